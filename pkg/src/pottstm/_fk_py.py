"""Pure-Python Fortuin-Kasteleyn subset enumeration (fallback kernel)."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def fk_counts(n_vertices: int, edges: Sequence[Sequence[int]]) -> np.ndarray:
    """Return an int64 table ``c[|E'|, k(E')]`` of subset counts.

    Same walk as the compiled kernel: edges are decided in order and a
    union-find with union by size is rolled back on the way up.
    """
    eu = [int(a) for a, _ in edges]
    ev = [int(b) for _, b in edges]
    m = len(eu)
    parent = list(range(n_vertices))
    size = [1] * n_vertices
    counts = [[0] * (n_vertices + 1) for _ in range(m + 1)]

    def find(x: int) -> int:
        while parent[x] != x:
            x = parent[x]
        return x

    # stack items: (depth, components, selected, root, child, phase); phase 1
    # applies a union before visiting, phase 2 undoes it afterwards
    stack = [(0, n_vertices, 0, -1, -1, 0)]
    while stack:
        d, comp, nsel, ra, rb, phase = stack.pop()
        if phase == 2:
            size[ra] -= size[rb]
            parent[rb] = rb
            continue
        if phase == 1:
            parent[rb] = ra
            size[ra] += size[rb]
        if d == m:
            counts[nsel][comp] += 1
            continue
        a, b = find(eu[d]), find(ev[d])
        if a == b:
            stack.append((d + 1, comp, nsel + 1, -1, -1, 0))
        else:
            if size[a] < size[b]:
                a, b = b, a
            stack.append((0, 0, 0, a, b, 2))
            stack.append((d + 1, comp - 1, nsel + 1, a, b, 1))
        stack.append((d + 1, comp, nsel, -1, -1, 0))
    return np.array(counts, dtype=np.int64)
