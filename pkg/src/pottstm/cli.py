"""Command-line front end: zeros, curve, audit, qc, xi and fit.

Every output embeds the validated run configuration and a SHA-256 of its
payload.  Nothing time- or host-dependent is written, so identical configs
give identical bytes.  Exit codes: 0 success, 2 invalid config, 3 resource
cap, 4 numeric non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .errors import InvalidInputError, PottsError, ResourceLimitError
from .poly import LineSpec

log = logging.getLogger("pottstm")

COMMANDS = ("zeros", "curve", "audit", "qc", "xi", "fit")
FAMILIES = ("petersen", "slab")
MODES = ("dense", "arnoldi", "auto")
FIT_MODELS = ("parity", "power-law", "bulirsch-stoer", "linear-in-1/k")


@dataclass
class RunConfig:
    command: str
    family: str = "petersen"
    k: int | None = None
    n: int | None = None
    line: str | None = None
    plane: bool = False
    region: list[float] | None = None
    step: float = 0.1
    tol: float = 1e-9
    target_radius: float = 1e-20
    seed: int = 0
    mode: str = "auto"
    q_max: float = 12.0
    q_min: float = 0.0
    criterion: str = "auto"
    N: int | None = None
    spin_check: bool = False
    Q: float | None = None
    v_min: float | None = None
    v_max: float | None = None
    v_steps: int = 11
    input: str | None = None
    model: str = "parity"
    parity: str | None = None
    kmin: int | None = None
    kmax: int | None = None
    window: int = 5
    format: str = "json"
    max_orbits: int = 2000
    cache_dir: str | None = None
    output: str | None = None
    threads: int = 1
    extra: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> RunConfig:
        bad = InvalidInputError
        if self.command not in COMMANDS:
            raise bad(f"unknown command {self.command!r}")
        if self.extra:
            raise bad(f"unknown config keys: {sorted(self.extra)}")
        if self.family not in FAMILIES:
            raise bad(f"family must be one of {FAMILIES}")
        if self.command != "fit" and (self.k is None or self.k < 1):
            raise bad("k must be a positive integer")
        if self.family == "slab" and self.command in ("audit", "qc"):
            raise bad(f"{self.command} is defined for the petersen family only")
        if self.threads < 1:
            raise bad("threads must be >= 1")
        if self.mode not in MODES:
            raise bad(f"mode must be one of {MODES}")
        if self.step <= 0 or self.tol <= 0 or self.target_radius <= 0:
            raise bad("step, tol and target_radius must be positive")
        if self.max_orbits < 1:
            raise bad("max_orbits must be positive")
        if self.line is not None:
            self.line = str(LineSpec.parse(self.line))
        if self.region is not None:
            if len(self.region) != 4 or self.region[0] >= self.region[1] or self.region[2] >= self.region[3]:
                raise bad("region must be xmin,xmax,ymin,ymax with min < max")
            self.region = [float(x) for x in self.region]
        c = self.command
        if c == "zeros":
            if self.n is None or self.n < 1:
                raise bad("zeros needs n >= 1")
            if self.line is None:
                raise bad("zeros needs a line")
        elif c == "curve":
            if (self.line is None) == (not self.plane):
                raise bad("curve needs exactly one of --line or --plane")
            if self.format not in ("json", "csv"):
                raise bad("format must be json or csv")
        elif c == "audit":
            if self.N is None or self.N < 0:
                raise bad("audit needs N >= 0")
        elif c == "qc":
            if self.line is None:
                raise bad("qc needs a line")
            if self.q_min >= self.q_max:
                raise bad("q_min must be below q_max")
            if self.criterion not in ("auto", "any", "bk_edge"):
                raise bad("criterion must be auto, any or bk_edge")
        elif c == "xi":
            if self.Q is None or self.v_min is None or self.v_max is None:
                raise bad("xi needs Q, v_min and v_max")
            if self.v_steps < 1 or self.v_min > self.v_max:
                raise bad("xi needs v_min <= v_max and v_steps >= 1")
        elif c == "fit":
            if self.input is None:
                raise bad("fit needs an input table")
            if self.model not in FIT_MODELS:
                raise bad(f"model must be one of {FIT_MODELS}")
            if self.parity not in (None, "even", "odd"):
                raise bad("parity must be even or odd")
        return self

    def to_json_obj(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d.pop("extra")
        return d


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def render_json(cfg: RunConfig, result: Any) -> str:
    body = _canonical(result)
    doc = {"config": cfg.to_json_obj(), "content_sha256": _sha(body), "result": result}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def render_csv(cfg: RunConfig, header: Sequence[str], rows: Sequence[Sequence[Any]], extra: dict[str, str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    body = buf.getvalue()
    head = [f"# config={_canonical(cfg.to_json_obj())}", f"# content_sha256={_sha(body)}"]
    head += [f"# {k}={v}" for k, v in (extra or {}).items()]
    return "\n".join(head) + "\n" + body


def _write(cfg: RunConfig, text: str, suffix: str | None = None) -> None:
    if cfg.output is None:
        if suffix is None:
            sys.stdout.write(text)
        return
    path = Path(cfg.output)
    if suffix is not None:
        path = path.with_suffix(suffix)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    tmp.write_text(text)
    tmp.replace(path)


def _decomposition(cfg: RunConfig):
    from . import transfer as tm

    dec = tm.block_decompose(cfg.k, cfg.family, cache=cfg.cache_dir, max_orbits=cfg.max_orbits)
    if dec.missing:
        raise ResourceLimitError(f"sectors {dec.missing} exceed max_orbits={cfg.max_orbits}")
    return dec


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_zeros(cfg: RunConfig) -> None:
    from . import roots
    from . import transfer as tm

    line = LineSpec.parse(cfg.line)
    dec = _decomposition(cfg)
    p = tm.assemble_on_line(dec, cfg.n, line)
    if p.is_zero():
        raise InvalidInputError(f"Z vanishes identically on {line}")
    rs = roots.solve(p, cfg.target_radius, seed=cfg.seed)
    rows = [[roots._fmt(r.value.real, 40), roots._fmt(r.value.imag, 40), f"{float(r.radius):.3e}", r.multiplicity]
            for r in rs.roots]
    prov = {"poly_sha256": rs.poly_hash, "family": cfg.family, "k": str(cfg.k), "n": str(cfg.n), "line": str(line)}
    _write(cfg, render_csv(cfg, ["re", "im", "radius", "multiplicity"], rows, prov))
    vieta = roots.vieta_check(p, rs)
    meta = {
        "poly_sha256": rs.poly_hash,
        "degree": p.degree,
        "parameter": line.parameter,
        "root_count": sum(r.multiplicity for r in rs.roots),
        "max_radius": f"{rs.max_radius():.3e}",
        "iterations": rs.iterations,
        "final_precision_bits": rs.precision,
        "flagged": rs.flagged,
        "conjugate_closed": rs.conjugate_closed(),
        "vieta_passed": vieta.passed,
        "residual_consistent": roots.residual_consistent(p, rs),
        "notes": rs.notes,
    }
    _write(cfg, render_json(cfg, meta), ".json")
    log.info("degree %d, max radius %.3e, vieta %s", p.degree, rs.max_radius(), "PASS" if vieta.passed else "FAIL")


def _curve_region(cfg: RunConfig) -> tuple[float, float, float, float]:
    if cfg.region is not None:
        return tuple(cfg.region)  # type: ignore[return-value]
    return (-0.5, 4.5, -3.0, 0.5) if cfg.plane else (-1.0, 5.0, -3.0, 3.0)


def cmd_curve(cfg: RunConfig) -> None:
    from . import spectra

    line = None if cfg.plane else LineSpec.parse(cfg.line)
    dec = _decomposition(cfg)
    src = spectra.SpectralSource.from_decomposition(dec)
    mode = "dense" if cfg.mode == "auto" else cfg.mode
    curve = spectra.trace_curve(src, _curve_region(cfg), cfg.step, cfg.tol, line=line, mode=mode)
    chain_of = {i: c for c, ch in enumerate(curve.chains) for i in ch}
    points = [
        [repr(p.x), repr(p.y), str(p.left), str(p.right), chain_of.get(i, -1)]
        for i, p in enumerate(curve.points)
    ]
    if cfg.format == "csv":
        _write(cfg, render_csv(cfg, ["x", "y", "left", "right", "chain"], points))
        return
    result = {
        "context": curve.context,
        "axis_crossings": [repr(x) for x in curve.crossings_on_axis()],
        "vertical_segments": [
            {"Q": s.Q, "v_minus": repr(s.v_minus), "v_plus": repr(s.v_plus),
             "sectors": [f"{a[0]}:" + "-".join(map(str, a[1])) for a in s.sectors]}
            for s in curve.vertical_segments
        ],
        "points": points,
        "chains": len(curve.chains),
        "warnings": len(curve.warnings),
    }
    _write(cfg, render_json(cfg, result))


def cmd_audit(cfg: RunConfig) -> None:
    from . import analysis

    dec = _decomposition(cfg)
    rep = analysis.integer_q_audit(cfg.k, cfg.N, dec, seed=cfg.seed or 7)
    result = rep.to_json_obj()
    checks = {"sum_rule": "PASS" if rep.sum_rule_holds() else "FAIL"}
    if cfg.spin_check:
        checks["spin_traces"] = "PASS" if analysis.audit_spin_agreement(rep) else "FAIL"
    result["checks"] = checks
    _write(cfg, render_json(cfg, result))
    log.info("sum rule %s, %d surviving eigenvalues", checks["sum_rule"], rep.surviving_count)


def cmd_qc(cfg: RunConfig) -> None:
    from . import analysis

    est = analysis.qc_crossing(cfg.k, cfg.line, q_max=cfg.q_max, q_min=cfg.q_min, step=cfg.step,
                               tol=cfg.tol, mode=cfg.mode, criterion=cfg.criterion)
    _write(cfg, render_json(cfg, est.to_json_obj()))
    if est.value is not None:
        log.info("Q_c = %.10f", est.value)


def cmd_xi(cfg: RunConfig) -> None:
    import numpy as np

    from . import analysis, spectra

    dec = _decomposition(cfg)
    src = spectra.SpectralSource.from_decomposition(dec)
    vs = np.linspace(cfg.v_min, cfg.v_max, cfg.v_steps)
    mode = "dense" if cfg.mode == "auto" else cfg.mode
    xc = analysis.xi_curve(cfg.k, cfg.Q, vs, cfg.family, source=src, mode=mode)
    rows = [[repr(v), repr(a), repr(b)] for v, a, b in xc.samples]
    _write(cfg, render_csv(cfg, ["v", "xi1_inv", "xi2_inv"], rows))


def cmd_fit(cfg: RunConfig) -> None:
    from . import analysis

    data = analysis.load_table(cfg.input)
    fit = analysis.fit_extrapolate(data, cfg.model, cfg.parity, cfg.kmin, cfg.kmax, cfg.window)
    result = fit.to_json_obj()
    result["input_rows"] = [[k, repr(q)] for k, q in data]
    _write(cfg, render_json(cfg, result))
    log.info("%s limit %.6f", cfg.model, fit.qc)


HANDLERS = {"zeros": cmd_zeros, "curve": cmd_curve, "audit": cmd_audit, "qc": cmd_qc, "xi": cmd_xi, "fit": cmd_fit}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _region(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with option values (flags override it)")
    common.add_argument("--family", choices=FAMILIES)
    common.add_argument("--k", type=int, help="Petersen step k (slab: side L)")
    common.add_argument("--L", type=int, dest="k", help="slab side (alias of --k)")
    common.add_argument("--output", help="output file (default stdout)")
    common.add_argument("--cache-dir", dest="cache_dir", help="decomposition cache (env POTTSTM_CACHE_DIR)")
    common.add_argument("--threads", type=int)
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--seed", type=int)
    common.add_argument("--max-orbits", dest="max_orbits", type=int)
    common.add_argument("-v", "--verbose", action="store_true", default=False)

    ap = argparse.ArgumentParser(prog="pottstm", description="Potts transfer matrices on generalized Petersen graphs")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zeros", parents=[common], argument_default=argparse.SUPPRESS, help="zeros of Z on a line")
    p.add_argument("--n", type=int)
    p.add_argument("--line")
    p.add_argument("--target-radius", dest="target_radius", type=float)

    p = sub.add_parser("curve", parents=[common], argument_default=argparse.SUPPRESS, help="limiting curve by direct search")
    p.add_argument("--line")
    p.add_argument("--plane", action="store_true")
    p.add_argument("--region", type=_region, help="xmin,xmax,ymin,ymax")
    p.add_argument("--step", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--format", choices=("json", "csv"))

    p = sub.add_parser("audit", parents=[common], argument_default=argparse.SUPPRESS, help="integer-Q eigenvalue cancellation audit")
    p.add_argument("--N", type=int)
    p.add_argument("--spin-check", dest="spin_check", action="store_true")

    p = sub.add_parser("qc", parents=[common], argument_default=argparse.SUPPRESS, help="largest real crossing Q_c")
    p.add_argument("--line")
    p.add_argument("--q-max", dest="q_max", type=float)
    p.add_argument("--q-min", dest="q_min", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--criterion", choices=("auto", "any", "bk_edge"))

    p = sub.add_parser("xi", parents=[common], argument_default=argparse.SUPPRESS, help="inverse correlation lengths along v")
    p.add_argument("--Q", type=float)
    p.add_argument("--v-min", dest="v_min", type=float)
    p.add_argument("--v-max", dest="v_max", type=float)
    p.add_argument("--v-steps", dest="v_steps", type=int)

    p = sub.add_parser("fit", parents=[common], argument_default=argparse.SUPPRESS, help="large-k extrapolation of a Q_c table")
    p.add_argument("--input")
    p.add_argument("--model", choices=FIT_MODELS)
    p.add_argument("--parity", choices=("even", "odd"))
    p.add_argument("--kmin", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--window", type=int)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    given = dict(vars(ns))
    command = given.pop("command")
    given.pop("verbose", None)
    values: dict[str, Any] = {}
    cfg_path = given.pop("config", None)
    if cfg_path is not None:
        try:
            loaded = json.loads(Path(cfg_path).read_text())
        except (OSError, ValueError) as e:
            raise InvalidInputError(f"cannot read config {cfg_path}: {e}") from None
        if not isinstance(loaded, dict):
            raise InvalidInputError("config file must hold a JSON object")
        loaded.pop("command", None)
        values.update(loaded)
    values.update(given)
    if values.get("cache_dir") is None:
        from .transfer import cache_dir

        root = cache_dir()
        values["cache_dir"] = None if root is None else str(root)
    names = {f.name for f in dataclasses.fields(RunConfig)} - {"extra", "command"}
    extra = {k: v for k, v in values.items() if k not in names}
    known = {k: v for k, v in values.items() if k in names}
    return RunConfig(command=command, extra=extra, **known).validate()


def _fail(exc: BaseException, code: int) -> int:
    report = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(report, sort_keys=True) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        try:
            cfg = config_from_args(ns)
        except (TypeError, ValueError) as e:
            if isinstance(e, PottsError):
                raise
            raise InvalidInputError(str(e)) from e
        HANDLERS[cfg.command](cfg)
    except PottsError as e:
        return _fail(e, e.exit_code)
    except MemoryError as e:
        return _fail(e, 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
