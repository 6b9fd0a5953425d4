"""Correlation lengths, real-axis crossings, extrapolation, Beraha numbers,
integer-Q cancellation audits and large-|Q| branch counting."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import mpmath
import numpy as np
import scipy.optimize

from . import spectra
from . import transfer as tm
from .errors import ConvergenceError, InvalidInputError, ResourceLimitError
from .graphs import spin_transfer_matrix, spin_transfer_trace
from .poly import LineSpec

Sector = tm.Sector


# ---------------------------------------------------------------------------
# Beraha numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BerahaNumber:
    n: int
    value: mpmath.mpf
    exact: str | None = None

    def __float__(self) -> float:
        return float(self.value)


_BERAHA_EXACT = {1: "4", 2: "0", 3: "1", 4: "2", 5: "(3+sqrt(5))/2", 6: "3"}


def beraha(n: int, dps: int = 50) -> BerahaNumber:
    """``B_n = 4 cos^2(pi/n)``, with ``B_1`` set to the limit value 4."""
    if n < 1:
        raise InvalidInputError("Beraha index must be >= 1")
    with mpmath.workdps(dps):
        if n == 1:
            val = mpmath.mpf(4)
        elif n == 5:
            val = (3 + mpmath.sqrt(5)) / 2
        elif n in _BERAHA_EXACT:
            val = mpmath.mpf(int(_BERAHA_EXACT[n]))
        else:
            val = 4 * mpmath.cos(mpmath.pi / n) ** 2
        return BerahaNumber(n, +val, _BERAHA_EXACT.get(n))


# ---------------------------------------------------------------------------
# Integer-Q audit
# ---------------------------------------------------------------------------


@dataclass
class AuditClass:
    """Eigenvalues sharing one irreducible factor of the block char polys at Q=N."""

    degree: int
    members: dict[Sector, int]
    net: Fraction
    factor: tuple[int, ...]
    assigned: Sector | None = None


@dataclass
class CancellationReport:
    k: int
    N: int
    v_points: list[int]
    classes: list[AuditClass]
    trivial_extra: dict[Sector, int]
    rho: Fraction
    n_tilde: dict[Sector, Fraction]
    amplitudes: dict[Sector, Fraction]
    checks: dict[str, bool] = field(default_factory=dict)
    unresolved: list[str] = field(default_factory=list)

    @property
    def survivors(self) -> list[AuditClass]:
        return [c for c in self.classes if c.net != 0]

    @property
    def surviving_count(self) -> int:
        """Surviving eigenvalues counted with their net amplitude."""
        return int(sum(c.degree * c.net for c in self.survivors))

    @property
    def surviving_distinct(self) -> int:
        return sum(c.degree for c in self.survivors)

    def sum_rule(self) -> Fraction:
        return sum((self.amplitudes[s] * n for s, n in self.n_tilde.items()), Fraction(0)) + self.rho

    def sum_rule_holds(self) -> bool:
        return self.sum_rule() == Fraction(self.N) ** (self.k + 1)

    def character_counts(self) -> dict[Sector, int]:
        """Distinct surviving eigenvalues per assigned sector."""
        out: dict[Sector, int] = {}
        for c in self.survivors:
            if c.assigned is not None:
                out[c.assigned] = out.get(c.assigned, 0) + c.degree
        return dict(sorted(out.items()))

    def reconstruct_trace(self, n: int, v_index: int = 0) -> Fraction:
        """``Z(N, v)`` at the audit's ``v`` from surviving classes and the trivial term."""
        if v_index != 0:
            raise InvalidInputError("classes are stored for the first audit point only")
        v = self.v_points[0]
        total = Fraction(self.rho) * Fraction(v) ** (2 * self.k * n)
        for c in self.survivors:
            total += c.net * _power_sum(c.factor, n)
        return total

    def to_json_obj(self) -> dict[str, Any]:
        def tag(s: Sector) -> str:
            return f"{s[0]}:" + "-".join(map(str, s[1]))

        return {
            "k": self.k,
            "N": self.N,
            "v_points": self.v_points,
            "rho": str(self.rho),
            "sum_rule": str(self.sum_rule()),
            "sum_rule_target": self.N ** (self.k + 1),
            "surviving_eigenvalues": self.surviving_count,
            "n_tilde": {tag(s): str(x) for s, x in self.n_tilde.items()},
            "trivial_extra": {tag(s): m for s, m in self.trivial_extra.items() if m},
            "classes": [
                {"degree": c.degree, "net": str(c.net), "members": {tag(s): m for s, m in c.members.items()},
                 "assigned": tag(c.assigned) if c.assigned else None}
                for c in self.classes
            ],
            "checks": self.checks,
            "unresolved": self.unresolved,
        }


def _power_sum(factor: tuple[int, ...], n: int) -> Fraction:
    """Sum of n-th powers of the roots of an integer polynomial (low-to-high coefficients)."""
    d = len(factor) - 1
    lead = Fraction(factor[-1])
    # monic e_i via x^d + a_{d-1} x^{d-1} + ... ; Newton: p_m = -(sum_{i=1}^{m-1} a_{d-i} p_{m-i} + m a_{d-m})
    a = [Fraction(c) / lead for c in factor]
    p = [Fraction(d)]
    for m in range(1, n + 1):
        s = Fraction(0)
        for i in range(1, min(m, d + 1)):
            s += a[d - i] * p[m - i]
        if m <= d:
            s += m * a[d - m]
        p.append(-s)
    return p[n]


def _factor_int_charpoly(M) -> list[tuple[tuple[int, ...], int]]:
    num = M.charpoly().numer()
    _, facs = num.factor()
    out = []
    for f, e in facs:
        cs = tuple(int(c) for c in f.coeffs())
        if cs[-1] < 0:
            cs = tuple(-c for c in cs)
        out.append((cs, int(e)))
    return out


def _audit_point(dec: tm.TransferDecomposition, N: int, v: int):
    t = v ** dec.trivial.deg_v
    tfac = (-t, 1)
    classes: dict[tuple[int, ...], dict[Sector, int]] = {}
    extra: dict[Sector, int] = {}
    for s, blk in dec.nontrivial.items():
        if blk.dim == 0:
            continue
        for f, e in _factor_int_charpoly(blk.matrix.to_fmpq_mat(N, v)):
            if f == tfac:
                extra[s] = extra.get(s, 0) + e
            else:
                classes.setdefault(f, {})
                classes[f][s] = classes[f].get(s, 0) + e
    return classes, extra


def _signature(classes: dict[tuple[int, ...], dict[Sector, int]], extra: dict[Sector, int]):
    return sorted((len(f) - 1, sorted(m.items())) for f, m in classes.items()), sorted(extra.items())


def _sector_order(s: Sector) -> tuple:
    ell, lam = s
    return (ell, tuple(-x for x in lam))


def _audit_vs(rng: random.Random, count: int) -> list[int]:
    out: list[int] = []
    while len(out) < count:
        v = rng.randint(2, 97) * rng.choice((-1, 1))
        if v not in out:
            out.append(v)
    return out


def integer_q_audit(
    k: int,
    N: int,
    dec: tm.TransferDecomposition | None = None,
    n_points: int = 3,
    seed: int = 7,
) -> CancellationReport:
    """Eigenvalue cancellation audit of G(nk, k) at ``Q = N``.

    Nontrivial blocks are specialized at ``Q = N`` and several random integer
    ``v``; their characteristic polynomials are factored over the integers.
    Factors equal to ``x - v^(2k)`` are eigenvalues that became trivial; every
    other irreducible factor is an eigenvalue class whose net amplitude is
    ``sum alpha_s(N) * mult_s``.  A class structure is accepted when all
    points agree; disagreements are reported in ``unresolved`` and the finest
    structure is kept.
    """
    if N < 0:
        raise InvalidInputError("N must be a non-negative integer")
    if dec is None:
        dec = tm.block_decompose(k)
    if dec.family != "petersen" or dec.k != k:
        raise InvalidInputError("audit needs the Petersen decomposition for the same k")
    rng = random.Random(seed * 1000 + 31 * k + N)
    vs = _audit_vs(rng, n_points)
    results = [_audit_point(dec, N, v) for v in vs]
    sigs = [_signature(c, e) for c, e in results]
    unresolved = []
    best = 0
    if any(s != sigs[0] for s in sigs):
        unresolved.append("class structure differs between audit points; finest kept")
        best = max(range(len(results)), key=lambda i: len(results[i][0]))
    classes_raw, extra = results[best]
    vs = [vs[best]] + [v for i, v in enumerate(vs) if i != best]
    amps = {s: Fraction(dec.amplitudes[s](Fraction(N))) for s in dec.blocks}
    classes = []
    for f, members in classes_raw.items():
        net = sum((amps[s] * m for s, m in members.items()), Fraction(0))
        cls = AuditClass(len(f) - 1, dict(sorted(members.items(), key=lambda kv: _sector_order(kv[0]))), net, f)
        if net != 0:
            for s in sorted(members, key=_sector_order):
                if amps[s] != 0:
                    cls.assigned = s
                    break
        classes.append(cls)
    classes.sort(key=lambda c: (_sector_order(min(c.members, key=_sector_order)), c.degree, c.factor))
    gamma_n = Fraction(tm.gamma(dec)(Fraction(N)))
    rho = gamma_n + sum((amps[s] * m for s, m in extra.items()), Fraction(0))
    n_tilde: dict[Sector, Fraction] = {}
    for c in classes:
        if c.net != 0 and c.assigned is not None:
            n_tilde[c.assigned] = n_tilde.get(c.assigned, Fraction(0)) + c.degree * c.net / amps[c.assigned]
    report = CancellationReport(k, N, vs, classes, extra, rho, dict(sorted(n_tilde.items(), key=lambda kv: _sector_order(kv[0]))), amps, unresolved=unresolved)
    report.checks.update(_inclusion_checks(report, dec))
    return report


def _sector_sets(report: CancellationReport, k: int) -> list[set[tuple[int, ...]]]:
    """``E_ell``: nontrivial eigenvalue classes present in a block with nonzero amplitude at Q=N."""
    sets: list[set[tuple[int, ...]]] = [set() for _ in range(k + 1)]
    for c in report.classes:
        for s in c.members:
            if report.amplitudes[s] != 0:
                sets[s[0]].add(c.factor)
    return sets


def _inclusion_checks(report: CancellationReport, dec: tm.TransferDecomposition) -> dict[str, bool]:
    """Inclusion-exclusion pattern of the nontrivial eigenvalue sets ``E_ell``."""
    k, N = report.k, report.N
    E = _sector_sets(report, k)
    out: dict[str, bool] = {
        "sum_rule": report.sum_rule_holds(),
        "all_nets_integral": all(c.net.denominator == 1 for c in report.classes),
    }
    if N == 0:
        out["E0_subset_E1"] = E[0] <= E[1]
        out["chain"] = all((E[l] - E[l - 1]) <= E[l + 1] for l in range(1, k))
        out["top_empty"] = not (E[k] - E[k - 1])
        out["all_cancel"] = not report.survivors and report.rho == 0
    elif N == 1:
        surv = report.survivors
        target = (-(1 + report.v_points[0]) ** (3 * k), 1)
        out["single_survivor"] = len(surv) == 1 and surv[0].factor == target and surv[0].net == 1
        out["rho_zero"] = report.rho == 0
        out["E0_rest_subset_E2"] = (E[0] - {target}) <= E[2]
        out["chain"] = all((E[l] - E[l - 1]) <= E[l + 1] for l in range(3, k))
        out["top_empty"] = not (E[k] - E[k - 1])
    return out


def audit_spin_agreement(report: CancellationReport, ns: Sequence[int] = (1, 2, 3), dim_cap: int = 4096) -> bool:
    """Reconstructed ``tr T^n`` at ``Q = N`` equals the spin transfer-matrix trace."""
    v = report.v_points[0]
    for n in ns:
        if report.reconstruct_trace(n) != spin_transfer_trace(report.k, n, report.N, v, dim_cap=dim_cap):
            return False
    return True


def audit_spin_charpoly(report: CancellationReport, dim_cap: int = 256) -> bool:
    """Surviving spectrum equals the spin transfer-matrix spectrum (up to zero eigenvalues)."""
    import flint

    k, N, v = report.k, report.N, report.v_points[0]
    if N ** (k + 1) > dim_cap:
        raise ResourceLimitError("spin matrix too large for an exact char poly")
    if any(c.net < 0 or c.net.denominator != 1 for c in report.survivors) or report.rho < 0:
        return False
    T = spin_transfer_matrix(k, N, v)
    m = flint.fmpz_mat(T.shape[0], T.shape[1], [int(x) for x in T.flat])
    spin = m.charpoly()
    ours = flint.fmpz_poly([1])
    for c in report.survivors:
        ours *= flint.fmpz_poly(list(c.factor)) ** int(c.net)
    ours *= flint.fmpz_poly([-(v ** (2 * k)), 1]) ** int(report.rho)

    def strip_x(p):
        cs = [int(c) for c in p.coeffs()]
        while cs and cs[0] == 0:
            cs.pop(0)
        return flint.fmpz_poly(cs)

    return strip_x(spin) == strip_x(ours)


# ---------------------------------------------------------------------------
# Real-axis crossings Q_c(k)
# ---------------------------------------------------------------------------


def _line_of(line: LineSpec | str) -> LineSpec:
    if isinstance(line, LineSpec):
        return line
    named = {"chromatic": LineSpec.chromatic(), "flow": LineSpec.flow()}
    return named[line] if line in named else LineSpec.parse(line)


@dataclass
class QcEstimate:
    k: int
    line: str
    value: float | None
    bracket: tuple[float, float] | None
    above: str | None
    below: str | None
    symmetric_dominance_verified: bool | None
    found: bool = True
    message: str = ""

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "k": self.k, "line": self.line, "found": self.found,
            "Qc": None if self.value is None else f"{self.value:.12f}",
            "bracket": None if self.bracket is None else [f"{x:.15f}" for x in self.bracket],
            "dominant_above": self.above, "dominant_below": self.below,
            "symmetric_dominance_verified": self.symmetric_dominance_verified,
            "message": self.message,
        }


def qc_crossing(
    k: int,
    line: LineSpec | str,
    family: str = "petersen",
    q_max: float = 12.0,
    q_min: float = 0.0,
    step: float = 0.1,
    tol: float = 1e-9,
    mode: str = "auto",
    source: spectra.SpectralSource | None = None,
    verify_full: bool = True,
    criterion: str = "auto",
) -> QcEstimate:
    """Largest real ``Q`` where the dominant eigenvalue changes along ``line``.

    Only ``ell = 0`` and the completely symmetric irreps are scanned (the
    dominant eigenvalue on the real axis comes from them); with
    ``verify_full`` the two branches at the crossing are checked to be the
    top two among all irreps.  The scan goes down from ``q_max`` in steps of
    ``step``; the first accepted label change is bisected to ``tol``.

    ``criterion="any"`` accepts any change of the dominance label.
    ``criterion="bk_edge"`` looks for the edge of the regular BK region:
    ``ell = 0`` dominant above (a real eigenvalue or a conjugate pair) and the
    symmetric sector ``(ell)`` below, with the crossing inside that sector's
    band ``2*ell - 2 <= Q <= 2*ell``.  ``"auto"`` picks ``bk_edge`` on
    horizontal lines ``v = const`` and ``any`` otherwise.
    """
    ln = _line_of(line)
    if ln.kind != "v_affine":
        raise InvalidInputError("Q_c needs a line parametrized by Q (v = a*Q + b)")
    if criterion == "auto":
        criterion = "bk_edge" if ln.a == 0 else "any"
    if criterion not in ("any", "bk_edge"):
        raise InvalidInputError(f"unknown crossing criterion {criterion!r}")
    src = source or spectra.SpectralSource.symmetric(family, k)
    cache: dict[float, spectra.DominanceLabel] = {}

    def label(Q: float) -> spectra.DominanceLabel:
        if Q not in cache:
            _, v = ln.point_float(Q)
            cache[Q] = spectra.dominance_label(spectra.spectrum_at(src, Q, v.real, mode))
        return cache[Q]

    def accepted(up: spectra.DominanceLabel, down: spectra.DominanceLabel, q: float) -> bool:
        if up == down:
            return False
        if criterion == "any":
            return True
        ell = down.sector[0]
        return (up.sector[0] == 0 and ell >= 1 and down.sector[1] == (ell,) and not down.conjugate_pair
                and 2 * ell - 2 <= q <= 2 * ell)

    n_steps = int(math.floor((q_max - q_min) / step + 1e-9))
    grid = [q_max - i * step for i in range(n_steps + 1)]
    bracket = None
    for hi, lo in zip(grid, grid[1:]):
        if accepted(label(hi), label(lo), lo):
            bracket = (lo, hi)
            break
    if bracket is None:
        return QcEstimate(k, str(ln), None, None, str(label(q_max)), None, None, False,
                          f"no accepted dominance change in [{q_min}, {q_max}]")
    a, b = bracket
    l_hi, l_lo = label(b), label(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        if label(m) == l_hi:
            b = m
        else:
            a = m
    qc = 0.5 * (a + b)
    verified = None
    if verify_full:
        full = spectra.SpectralSource(family, k)
        sym = set(src.sectors) | {spectra.trivial_sector(src.width)}
        verified = True
        for q in (a, b):
            _, v = ln.point_float(q)
            dist = spectra.spectrum_at(full, q, v.real, mode).distinct()
            top = [secs for _, secs in dist[:2]]
            verified &= all(any(s in sym for s in secs) for secs in top)
    return QcEstimate(k, str(ln), qc, (a, b), str(l_hi), str(l_lo), verified)


def format_qc_table(rows: Sequence[tuple[int, float | None]], title: str = "") -> str:
    """Aligned two-column ``k  Q_c(k)`` table, ten decimals."""
    out = [title] if title else []
    out.append(f"{'k':>3}  {'Q_c(k)':>14}")
    for k, q in rows:
        out.append(f"{k:>3}  {'-':>14}" if q is None else f"{k:>3}  {q:>14.10f}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Correlation lengths
# ---------------------------------------------------------------------------


def xi_inverse(spec: spectra.SpectrumAtPoint, i: int = 1) -> float:
    """``|log |mu_i / mu_*||`` from the distinct moduli (``i = 0`` is the dominant itself)."""
    mods: list[float] = []
    for z, _ in spec.distinct():
        # conjugate partners share a modulus and count once
        if not mods or abs(abs(z) - mods[-1]) > 1e-10 * mods[0]:
            mods.append(abs(z))
    if i >= len(mods):
        raise InvalidInputError(f"only {len(mods)} distinct eigenvalues")
    if mods[i] == 0:
        return math.inf
    return abs(math.log(mods[i] / mods[0]))


@dataclass
class XiCurve:
    k: int
    Q: float
    samples: list[tuple[float, float, float]]


def xi_curve(k: int, Q: float, v_values: Sequence[float], family: str = "petersen",
             source: spectra.SpectralSource | None = None, mode: str = "dense") -> XiCurve:
    src = source or spectra.SpectralSource(family, k)
    out = []
    for v in v_values:
        spec = spectra.spectrum_at(src, Q, v, mode)
        out.append((float(v), xi_inverse(spec, 1), xi_inverse(spec, 2)))
    return XiCurve(k, Q, out)


@dataclass
class BoundarySlope:
    k: int
    slope: float
    coefficients: list[float]
    samples: list[tuple[float, float]]


def upper_boundary_slope(
    k: int,
    q_values: Sequence[float] | None = None,
    family: str = "petersen",
    source: spectra.SpectralSource | None = None,
    degree: int = 4,
    tol: float = 1e-14,
) -> BoundarySlope:
    """Slope at ``Q = 0`` of the upper boundary ``v_+(Q)`` of the BK phase.

    At each small ``Q`` the first dominance change below ``v = 0`` is found by
    a scan down to ``v = -Q`` and bisection; ``v_+(Q)`` is then fitted by a
    polynomial through the origin of the given degree.  The slope is reported
    without any assumption about its value.
    """
    src = source or spectra.SpectralSource(family, k)
    qs = list(np.linspace(0.01, 0.08, 8) if q_values is None else q_values)

    def label(Q: float, v: float) -> spectra.DominanceLabel:
        return spectra.dominance_label(spectra.spectrum_at(src, Q, v))

    samples = []
    for Q in qs:
        top = label(Q, -1e-9)
        grid = -np.linspace(1e-9, Q, 41)
        bracket = next(((a, b) for a, b in zip(grid, grid[1:]) if label(Q, b) != top), None)
        if bracket is None:
            raise ConvergenceError(f"no dominance change in -{Q} <= v < 0 at Q={Q}")
        hi, lo = bracket
        while hi - lo > tol:
            mid = 0.5 * (hi + lo)
            if label(Q, mid) == top:
                hi = mid
            else:
                lo = mid
        samples.append((float(Q), 0.5 * (hi + lo)))
    if len(samples) < degree:
        raise InvalidInputError(f"need at least {degree} sample points")
    q = np.array([a for a, _ in samples])
    X = np.vstack([q ** j for j in range(1, degree + 1)]).T
    coef, *_ = np.linalg.lstsq(X, np.array([b for _, b in samples]), rcond=None)
    return BoundarySlope(k, float(coef[0]), coef.tolist(), samples)


# ---------------------------------------------------------------------------
# Extrapolation in k
# ---------------------------------------------------------------------------


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    residuals: list[float]
    ks: list[int]
    spread: dict[str, float] = field(default_factory=dict)
    condition: float | None = None
    diagnostic: str = ""

    @property
    def qc(self) -> float:
        return self.params["Qc"]

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "model": self.model, "params": self.params, "residual_norm": float(np.linalg.norm(self.residuals)),
            "residuals": self.residuals, "ks": self.ks, "spread": self.spread,
            "condition": self.condition, "diagnostic": self.diagnostic,
        }


def load_table(path_or_name: str) -> list[tuple[int, float]]:
    """Read a ``k,Qc`` CSV; bare names resolve to the bundled tables."""
    import csv
    from importlib import resources
    from pathlib import Path

    p = Path(path_or_name)
    if not p.exists():
        data = Path(str(resources.files("pottstm") / "data"))
        p = data / path_or_name
        if not p.exists():
            # short names: "table2.csv" -> "table2_flow.csv"
            hits = sorted(data.glob(f"{Path(path_or_name).stem}_*.csv"))
            if len(hits) != 1:
                raise InvalidInputError(f"no table named {path_or_name!r}")
            p = hits[0]
    with open(p, newline="") as fh:
        return [(int(r["k"]), float(r["Qc"])) for r in csv.DictReader(fh)]


def _subset(data: Sequence[tuple[int, float]], parity: str | None, kmin: int | None, kmax: int | None):
    ks = np.array([d[0] for d in data], dtype=float)
    qs = np.array([d[1] for d in data], dtype=float)
    m = np.ones(len(ks), dtype=bool)
    if parity == "odd":
        m &= ks % 2 == 1
    elif parity == "even":
        m &= ks % 2 == 0
    if kmin is not None:
        m &= ks >= kmin
    if kmax is not None:
        m &= ks <= kmax
    return ks[m], qs[m]


def _power_law(ks: np.ndarray, qs: np.ndarray) -> FitResult:
    """``Q(k) = Qc + A k^-Delta``.

    For a trial ``Qc``, ``(A, Delta)`` come from a straight-line fit of
    ``log|Qc - Q(k)|`` against ``log k``; ``Qc`` minimizes the resulting
    data-space residual, and all three are then polished jointly.
    """
    if len(ks) < 3:
        raise InvalidInputError("power-law fit needs at least three points")
    d = np.diff(qs)
    nan = {"Qc": float("nan"), "A": float("nan"), "Delta": float("nan")}
    if not (np.all(d > 0) or np.all(d < 0)):
        return FitResult("power-law", nan, [], ks.astype(int).tolist(),
                         diagnostic="data not monotone in k; fit parity subsets separately")
    up = d[0] > 0
    lk = np.log(ks)
    scale = max(abs(qs[-1] - qs[0]), 1e-12)
    X = np.vstack([np.ones_like(lk), lk]).T

    def params(u: float) -> tuple[float, float, float]:
        qc = qs[-1] + (u if up else -u)
        coef, *_ = np.linalg.lstsq(X, np.log(np.abs(qc - qs)), rcond=None)
        return qc, (-1.0 if up else 1.0) * math.exp(coef[0]), -coef[1]

    def rss(u: float) -> float:
        qc, A, delta = params(u)
        return float(np.sum((qc + A * ks ** (-delta) - qs) ** 2))

    grid = np.geomspace(scale * 1e-6, scale * 1e3, 400)
    u0 = grid[int(np.argmin([rss(u) for u in grid]))]
    start = params(u0)

    def res(p):
        return p[0] + p[1] * ks ** (-p[2]) - qs

    fit = scipy.optimize.least_squares(res, start, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    qc, A, delta = (float(x) for x in fit.x)
    cond = float(np.linalg.cond(fit.jac))
    return FitResult("power-law", {"Qc": qc, "A": A, "Delta": delta}, res(fit.x).tolist(), ks.astype(int).tolist(),
                     condition=cond, diagnostic="" if cond < 1e12 else "ill-conditioned fit")


def _parity_ansatz(ks: np.ndarray, qs: np.ndarray) -> FitResult:
    """Shared limit, separate ``(A, B)`` for even and ``(A', B')`` for odd ``k``."""
    if len(ks) < 5:
        raise InvalidInputError("parity ansatz needs at least five points")
    even = ks % 2 == 0
    if even.sum() < 2 or (~even).sum() < 2:
        raise InvalidInputError("parity ansatz needs two points of each parity")

    def res(p):
        qc, a, b, a2, b2 = p
        return np.where(even, qc + a * ks ** (-b), qc + a2 * ks ** (-b2)) - qs

    # starting values from separate power laws when possible
    starts = []
    for sub in (even, ~even):
        if sub.sum() >= 3:
            f = _power_law(ks[sub], qs[sub])
            if math.isfinite(f.qc):
                starts.append(f.qc)
    best = None
    span = max(abs(qs.max() - qs.min()), 1e-3)
    seeds = starts + list(qs.max() + span * np.array([0.1, 0.5, 1.0, 2.0, 4.0]))
    for qc0 in seeds:
        for b0 in (0.5, 1.0, 2.0):
            a0 = (qs.min() - qc0) * ks.min() ** b0
            try:
                r = scipy.optimize.least_squares(res, [qc0, a0, b0, a0, b0], method="lm", max_nfev=20000,
                                                 xtol=1e-15, ftol=1e-15, gtol=1e-15)
            except ValueError:
                continue
            if best is None or r.cost < best.cost - 1e-30:
                best = r
    if best is None:
        raise ConvergenceError("parity ansatz did not converge from any start")
    qc, a, b, a2, b2 = best.x
    try:
        cond = float(np.linalg.cond(best.jac))
    except np.linalg.LinAlgError:
        cond = float("inf")
    diag = "" if cond < 1e12 else "ill-conditioned fit"
    return FitResult("parity", {"Qc": qc, "A": a, "B": b, "A_odd": a2, "B_odd": b2}, res(best.x).tolist(),
                     ks.astype(int).tolist(), condition=cond, diagnostic=diag)


def bulirsch_stoer(h: Sequence[float], values: Sequence[float], omega: float) -> float:
    """Rational (BST) extrapolation of ``values`` at ``h -> 0`` with error exponent ``omega``."""
    n = len(values)
    if n < 2:
        return float(values[-1])
    prev = [0.0] * (n + 1)
    cur = [float(x) for x in values]
    for m in range(1, n):
        nxt = []
        for i in range(len(cur) - 1):
            d = cur[i + 1] - cur[i]
            den2 = cur[i + 1] - prev[i + 1]
            ratio = (h[i] / h[i + m]) ** omega
            denom = ratio * ((1 - d / den2) if den2 != 0 else 1.0) - 1
            if denom == 0:
                raise ConvergenceError("Bulirsch-Stoer table hit a zero denominator")
            nxt.append(cur[i + 1] + d / denom)
        prev, cur = cur, nxt
    return cur[0]


def _bst(ks: np.ndarray, qs: np.ndarray, omegas: np.ndarray | None = None) -> FitResult:
    if omegas is None:
        omegas = np.arange(0.5, 2.0 + 1e-9, 0.05)
    est = []
    for w in omegas:
        try:
            est.append(bulirsch_stoer(1.0 / ks, qs, float(w)))
        except (ConvergenceError, ZeroDivisionError, OverflowError):
            est.append(float("nan"))
    est = np.array(est)
    ok = np.isfinite(est)
    if ok.sum() < 3:
        return FitResult("bulirsch-stoer", {"Qc": float("nan"), "omega": float("nan")}, [], ks.astype(int).tolist(),
                         diagnostic="no finite extrapolants")
    slope = np.full(len(est), np.inf)
    slope[1:-1] = np.abs(est[2:] - est[:-2])
    slope[~ok] = np.inf
    nplat = max(3, len(est) // 5)
    plat = np.argsort(slope)[:nplat]
    plat = plat[np.isfinite(slope[plat])]
    qc = float(np.median(est[plat]))
    w = float(np.median(omegas[plat]))
    return FitResult("bulirsch-stoer", {"Qc": qc, "omega": w}, [], ks.astype(int).tolist(),
                     spread={f"omega={omegas[i]:.2f}": float(est[i]) for i in range(len(est)) if ok[i]})


def _poly_inverse_k(ks: np.ndarray, qs: np.ndarray, degree: int = 2) -> FitResult:
    X = np.vstack([ks ** (-j) for j in range(degree + 1)]).T
    coef, *_ = np.linalg.lstsq(X, qs, rcond=None)
    return FitResult("linear-in-1/k", {"Qc": float(coef[0]), **{f"c{j}": float(c) for j, c in enumerate(coef[1:], 1)}},
                     (X @ coef - qs).tolist(), ks.astype(int).tolist(), condition=float(np.linalg.cond(X)))


def fit_extrapolate(
    data: Sequence[tuple[int, float]],
    model: str = "parity",
    parity: str | None = None,
    kmin: int | None = None,
    kmax: int | None = None,
    window: int = 5,
) -> FitResult:
    """Large-k limit of ``Q_c(k)``.

    ``parity``: shared-limit ansatz fitted on the last ``window`` values of k
    (the largest sizes), with the limits from every earlier window of the
    same length reported in ``spread``.  ``power-law``: ``Qc + A k^-Delta``
    on the chosen subset.  ``bulirsch-stoer``: rational extrapolation with
    the exponent scanned over [0.5, 2]; the plateau median is reported.
    ``linear-in-1/k``: quadratic polynomial in 1/k.
    """
    ks, qs = _subset(data, parity, kmin, kmax)
    order = np.argsort(ks)
    ks, qs = ks[order], qs[order]
    if model == "parity":
        if len(ks) < window:
            raise InvalidInputError(f"parity ansatz needs at least {window} points")
        fits = {}
        for i in range(len(ks) - window + 1):
            f = _parity_ansatz(ks[i:i + window], qs[i:i + window])
            fits[f"{int(ks[i])}<=k<={int(ks[i + window - 1])}"] = f
        last = list(fits.values())[-1]
        last.spread = {key: f.qc for key, f in fits.items()}
        return last
    if model == "power-law":
        return _power_law(ks, qs)
    if model == "bulirsch-stoer":
        return _bst(ks, qs)
    if model == "linear-in-1/k":
        return _poly_inverse_k(ks, qs)
    raise InvalidInputError(f"unknown fit model {model!r}")


# ---------------------------------------------------------------------------
# Large-|Q| branches on the flow line
# ---------------------------------------------------------------------------


@dataclass
class BranchAsymptotics:
    k: int
    radius: float
    angles: list[float]
    labels: list[tuple[str, str]]
    conjugate_closed: bool

    @property
    def count(self) -> int:
        return len(self.angles)

    @staticmethod
    def predicted(k: int) -> list[float]:
        """``(j - 1/2) pi / k`` for ``j = 1..2k``, folded into ``(-pi, pi]``."""
        out = []
        for j in range(1, 2 * k + 1):
            th = (j - 0.5) * math.pi / k
            out.append(th - 2 * math.pi if th > math.pi else th)
        return sorted(out)


def branch_asymptotics(
    k: int,
    radius: float = 100.0,
    samples: int = 720,
    tol: float = 1e-6,
    line: LineSpec | str = "flow",
    family: str = "petersen",
    source: spectra.SpectralSource | None = None,
) -> BranchAsymptotics:
    """Dominance changes on the circle ``|Q| = radius`` along ``line``.

    Labels are sampled at ``samples`` equally spaced angles; every change is
    bisected in the angle to ``tol``.  Where a sample lies within 1e-6 of
    equimodular the neighbourhood is resampled four times finer.
    """
    ln = _line_of(line)
    src = source or spectra.SpectralSource(family, k)

    def label_at(theta: float) -> tuple[spectra.DominanceLabel, float]:
        Q = radius * complex(math.cos(theta), math.sin(theta))
        if ln.kind == "q_prop":
            Q = Q / float(ln.c)
        Qp, v = ln.point_float(Q)
        spec = spectra.spectrum_at(src, Qp, v)
        dist = spec.distinct()
        gap = 1.0 if len(dist) < 2 else (abs(dist[0][0]) - abs(dist[1][0])) / abs(dist[0][0])
        return spectra.dominance_label(spec), gap

    # start half a step off the real axis so that no sample sits on a symmetry line
    thetas = list(-math.pi + (np.arange(samples) + 0.5) * 2 * math.pi / samples)
    labs = [label_at(t) for t in thetas]
    dense_t, dense_l = [], []
    h = 2 * math.pi / samples
    for t, (lab, gap) in zip(thetas, labs):
        dense_t.append(t)
        dense_l.append(lab)
        if gap < 1e-6:
            for j in (1, 2, 3):
                tt = t + j * h / 4
                dense_t.append(tt)
                dense_l.append(label_at(tt)[0])
    angles, pairs = [], []
    n = len(dense_t)
    for i in range(n):
        a, b = dense_t[i], dense_t[(i + 1) % n] + (2 * math.pi if i + 1 == n else 0.0)
        la, lb = dense_l[i], dense_l[(i + 1) % n]
        if la == lb:
            continue
        while b - a > tol:
            m = 0.5 * (a + b)
            if label_at(m)[0] == la:
                a = m
            else:
                b = m
        th = 0.5 * (a + b)
        th = th - 2 * math.pi if th > math.pi else th
        angles.append(th)
        pairs.append((str(la), str(lb)))
    order = np.argsort(angles)
    angles = [float(angles[i]) for i in order]
    pairs = [pairs[i] for i in order]
    closed = all(min(abs(a + b) for b in angles) <= 10 * tol for a in angles)
    return BranchAsymptotics(k, radius, angles, pairs, closed)
