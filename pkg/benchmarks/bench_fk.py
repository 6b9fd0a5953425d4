"""Compare the compiled and pure-Python FK subset kernels on generalized Petersen graphs.

    python3 benchmarks/bench_fk.py --max-edges 24 --python-max-edges 18
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from pottstm import _fk_py
from pottstm.graphs import build_petersen

try:
    from pottstm import _fk_ext
except ImportError:
    _fk_ext = None


def timed(fn, graph, repeats):
    runs, out = [], None
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn(graph.vertex_count, graph.edges)
        runs.append(time.perf_counter() - t)
    return statistics.median(runs), out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-edges", type=int, default=24)
    ap.add_argument("--python-max-edges", type=int, default=18, help="skip the slow fallback above this size")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if _fk_ext is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'graph':>8} {'edges':>5} {'subsets':>9} {'cython s':>10} {'python s':>10} {'speedup':>8}")
    m = 3
    while 3 * m <= args.max_edges:
        g = build_petersen(m=m, k=1)
        e = len(g.edges)
        tc, cc = timed(_fk_ext.fk_counts, g, args.repeats)
        if e <= args.python_max_edges:
            tp, cp = timed(_fk_py.fk_counts, g, 1)
            if not np.array_equal(cc, cp):
                raise SystemExit(f"kernels disagree on G({m},1)")
            py, ratio = f"{tp:10.4f}", f"{tp / tc:8.1f}"
        else:
            py, ratio = f"{'-':>10}", f"{'-':>8}"
        print(f"{f'G({m},1)':>8} {e:>5} {2 ** e:>9} {tc:10.4f} {py} {ratio}")
        m += 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
