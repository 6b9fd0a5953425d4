"""Numeric spectra of the transfer-matrix blocks, equimodularity, dominance
maps, limiting-curve tracing and isolated limiting points."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np
import scipy.sparse.linalg as spla

from . import partitions as pt
from . import transfer as tm
from .errors import ConvergenceError, InvalidInputError
from .poly import LineSpec, UniPoly

log = logging.getLogger(__name__)

Sector = tm.Sector

EQUIMODULAR_RTOL = 1e-10
ESCALATE_RTOL = 1e-8
AUTO_DENSE_MAX = 300


def trivial_sector(width: int) -> Sector:
    """Tag of the trivial eigenvalue (one past the largest link number)."""
    return (width, ())


def _block_label(s: Sector) -> str:
    return f"{s[0]}" + (":" + "-".join(map(str, s[1])) if s[1] else "")


# ---------------------------------------------------------------------------
# Spectral sources
# ---------------------------------------------------------------------------


class SpectralSource:
    """Blocks of one family/size, evaluated numerically at complex (Q, v).

    Built from a :class:`TransferDecomposition` (nontrivial blocks, dense
    evaluation of the exact matrices) and/or from the factor sequence
    (sparse factors per irrep, usable for Arnoldi).  With only the factor
    sequence the full irrep blocks are used and eigenvalues equal to the
    trivial one are re-tagged.
    """

    def __init__(
        self,
        family: str,
        k: int,
        decomposition: tm.TransferDecomposition | None = None,
        sectors: Sequence[Sector] | None = None,
    ):
        self.family = family
        self.k = k
        self.seq = tm.factor_sequence(family, k)
        self.width = self.seq.width
        self.dec = decomposition
        self.trivial_degree = self.seq.trivial_v_degree
        if sectors is None:
            if decomposition is not None:
                sectors = [s for s, b in decomposition.nontrivial.items() if b.dim]
            else:
                sectors = [(ell, lam) for ell in range(self.width)
                           for lam in (pt.young_diagrams(ell) if ell else [()])]
        self.sectors = [tuple((s[0], tuple(s[1]))) for s in sectors]
        self._evaluators: dict[Sector, Callable] = {}

    @classmethod
    def from_decomposition(cls, dec: tm.TransferDecomposition, sectors: Sequence[Sector] | None = None) -> SpectralSource:
        return cls(dec.family, dec.k, dec, sectors)

    @classmethod
    def symmetric(cls, family: str, k: int, decomposition: tm.TransferDecomposition | None = None) -> SpectralSource:
        """Only ``ell = 0`` and the completely symmetric irreps ``lam = (ell)``."""
        width = tm.factor_sequence(family, k).width
        secs = [(0, ())] + [(ell, (ell,)) for ell in range(1, width)]
        if decomposition is not None:
            secs = [s for s in secs if s in decomposition.nontrivial and decomposition.nontrivial[s].dim]
        return cls(family, k, decomposition, secs)

    def amplitude(self, s: Sector) -> UniPoly:
        if s == trivial_sector(self.width):
            if self.dec is None:
                raise InvalidInputError("trivial amplitude needs the exact decomposition")
            return tm.gamma(self.dec)
        if (self.dec is not None and self.family == "petersen" and s == (self.k, (self.k,))
                and not any(t[0] == self.k and t != s for t in self.sectors)):
            # reduced all-symmetric block standing in for every irrep with k links
            return tm.beta(self.k)
        return tm.amplitude(s[0], s[1])

    def trivial_value(self, v: complex) -> complex:
        return complex(v) ** self.trivial_degree

    def uses_exact_blocks(self) -> bool:
        return self.dec is not None

    def dense_matrix(self, s: Sector, Q: complex, v: complex) -> np.ndarray:
        if self.dec is not None:
            ev = self._evaluators.get(s)
            if ev is None:
                ev = self.dec.nontrivial[s].matrix.evaluator()
                self._evaluators[s] = ev
            return ev(Q, v)
        return tm.numeric_sector(self.seq, s[0], s[1]).matrix(Q, v)

    def operator(self, s: Sector, Q: complex, v: complex):
        return tm.numeric_sector(self.seq, s[0], s[1]).operator(Q, v)

    def dim(self, s: Sector) -> int:
        if self.dec is not None:
            return self.dec.nontrivial[s].dim
        return tm.numeric_sector(self.seq, s[0], s[1]).dim


# ---------------------------------------------------------------------------
# Spectrum at a point
# ---------------------------------------------------------------------------


@dataclass
class SpectrumAtPoint:
    Q: complex
    v: complex
    eigenvalues: list[tuple[complex, Sector]]
    errors: list[float]
    per_block: dict[Sector, np.ndarray]
    mode: str
    diagnostics: dict[str, float] = field(default_factory=dict)
    groups: list[list[int]] = field(default_factory=list)

    def distinct(self) -> list[tuple[complex, tuple[Sector, ...]]]:
        """Numerically distinct eigenvalues with every sector containing each."""
        if not self.groups:
            return [(z, (s,)) for z, s in self.eigenvalues]
        return [(self.eigenvalues[g[0]][0], tuple(self.eigenvalues[i][1] for i in g)) for g in self.groups]

    @property
    def moduli(self) -> np.ndarray:
        return np.array([abs(z) for z, _ in self.eigenvalues])

    def top(self, m: int = 1) -> list[tuple[complex, Sector]]:
        return self.eigenvalues[:m]

    def sector_max(self) -> dict[Sector, float]:
        out: dict[Sector, float] = {}
        for z, s in self.eigenvalues:
            if s not in out:
                out[s] = abs(z)
        return out


COINCIDENCE_RTOL = 1e-11


def _sector_key(s: Sector) -> tuple:
    return (s[0], tuple(-x for x in s[1]))


def _merge(per_block: dict[Sector, np.ndarray], errs: dict[Sector, np.ndarray]) -> tuple[list, list, list]:
    """Sort by modulus; numerically identical values form a group ordered by sector."""
    items = []
    for s, vals in per_block.items():
        for z, r in zip(vals, errs[s]):
            items.append((complex(z), s, float(r)))
    items.sort(key=lambda t: (-abs(t[0]), -t[0].imag, _sector_key(t[1])))
    groups: list[list[tuple]] = []
    for it in items:
        for g in groups[-4:]:
            if abs(g[0][0] - it[0]) <= COINCIDENCE_RTOL * max(abs(it[0]), 1e-300):
                g.append(it)
                break
        else:
            groups.append([it])
    eigs, err, idx = [], [], []
    for g in groups:
        g.sort(key=lambda t: _sector_key(t[1]))
        idx.append(list(range(len(eigs), len(eigs) + len(g))))
        eigs += [(z, s) for z, s, _ in g]
        err += [r for _, _, r in g]
    return eigs, err, idx


def _dense_eigs(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex), np.zeros(0)
    if not np.iscomplexobj(M) or not np.any(M.imag):
        vals = np.linalg.eigvals(np.real(M))
    else:
        vals = np.linalg.eigvals(M)
    err = np.full(len(vals), np.finfo(float).eps * max(1.0, np.linalg.norm(M, 1)) * M.shape[0])
    return vals.astype(complex), err


def _arnoldi_eigs(op, n_eigs: int, ncv: int, maxiter: int, v0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = op.shape[0]
    ncv = max(min(ncv, n), min(n, 2 * n_eigs + 1))
    try:
        vals, vecs = spla.eigs(op, k=n_eigs, which="LM", ncv=ncv, maxiter=maxiter, v0=v0, tol=1e-13)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"Arnoldi did not converge: {len(exc.eigenvalues)} of {n_eigs} eigenvalues after {maxiter} restarts"
        ) from exc
    res = np.array([np.linalg.norm(op.matvec(vecs[:, i]) - vals[i] * vecs[:, i]) / max(np.linalg.norm(vecs[:, i]), 1e-300)
                    for i in range(len(vals))])
    return vals, res


def spectrum_at(
    source: SpectralSource,
    Q: complex,
    v: complex,
    mode: str = "dense",
    n_eigs: int = 4,
    ncv: int = 60,
    maxiter: int = 500,
    sectors: Sequence[Sector] | None = None,
) -> SpectrumAtPoint:
    """Eigenvalues of every block at ``(Q, v)``, merged and sorted by modulus.

    ``dense`` returns all eigenvalues; ``arnoldi`` the ``n_eigs`` largest in
    modulus per sector from the sparse factor product; ``auto`` is dense for
    blocks up to ``AUTO_DENSE_MAX`` and Arnoldi above.  The trivial
    eigenvalue ``v^(2k)`` is always present, once, with its own tag.
    """
    if mode not in ("dense", "arnoldi", "auto"):
        raise InvalidInputError(f"unknown spectrum mode {mode!r}")
    Q, v = complex(Q), complex(v)
    t = source.trivial_value(v)
    per_block: dict[Sector, np.ndarray] = {}
    errs: dict[Sector, np.ndarray] = {}
    diag: dict[str, float] = {}
    rng = np.random.default_rng(12345)
    for s in sectors if sectors is not None else source.sectors:
        s = (s[0], tuple(s[1]))
        dim = source.dim(s)
        if dim == 0:
            continue
        full_block = not source.uses_exact_blocks()
        if mode == "dense" or dim <= n_eigs + 2 or (mode == "auto" and dim <= AUTO_DENSE_MAX):
            vals, e = _dense_eigs(source.dense_matrix(s, Q, v))
        else:
            # the sparse operator is the full irrep block, trivial copies included
            op = source.operator(s, Q, v)
            full_block = True
            vals, e = _arnoldi_eigs(op, n_eigs, ncv, maxiter, rng.standard_normal(op.shape[0]).astype(complex))
            diag[f"residual:{_block_label(s)}"] = float(e.max()) if len(e) else 0.0
        if full_block:
            keep = np.abs(vals - t) > 1e-9 * max(1.0, abs(t))
            vals, e = vals[keep], e[keep]
        per_block[s] = vals
        errs[s] = e
    tri = trivial_sector(source.width)
    per_block[tri] = np.array([t])
    errs[tri] = np.array([0.0])
    eigs, err, groups = _merge(per_block, errs)
    return SpectrumAtPoint(Q, v, eigs, err, per_block, mode, diag, groups)


def spectrum_from_values(Q: complex, v: complex, blocks: dict[Sector, Sequence[complex]]) -> SpectrumAtPoint:
    """Spectrum built from given per-block eigenvalues (toy blocks, external solvers)."""
    per_block = {(s[0], tuple(s[1])): np.asarray(vals, dtype=complex) for s, vals in blocks.items()}
    errs = {s: np.zeros(len(vals)) for s, vals in per_block.items()}
    eigs, err, groups = _merge(per_block, errs)
    return SpectrumAtPoint(complex(Q), complex(v), eigs, err, per_block, "given", {}, groups)


# ---------------------------------------------------------------------------
# Equimodularity
# ---------------------------------------------------------------------------


@dataclass
class EquimodularPoint:
    Q: complex
    v: complex
    sectors: tuple[Sector, ...]
    gap: float
    classification: str


def _refine_modulus(source: SpectralSource | None, spec: SpectrumAtPoint, idx: int, dps: int = 40) -> float | None:
    """Rayleigh-quotient refinement of one eigenvalue in extended precision."""
    if source is None:
        return None
    z, s = spec.eigenvalues[idx]
    if s == trivial_sector(source.width):
        return abs(z)
    M = source.dense_matrix(s, spec.Q, spec.v) if source.dim(s) <= 400 else None
    if M is None:
        return None
    n = M.shape[0]
    w, V = np.linalg.eig(M)
    j = int(np.argmin(np.abs(w - z)))
    with mpmath.workdps(dps):
        A = mpmath.matrix([[mpmath.mpc(M[i, c].real, M[i, c].imag) for c in range(n)] for i in range(n)])
        x = mpmath.matrix([mpmath.mpc(V[i, j].real, V[i, j].imag) for i in range(n)])
        mu = mpmath.mpc(w[j].real, w[j].imag)
        for _ in range(3):
            shift = A - (mu * (1 + mpmath.mpf(10) ** (-dps // 2))) * mpmath.eye(n)
            y = mpmath.lu_solve(shift, x)
            x = y / mpmath.norm(y)
            Ax = A * x
            mu = sum(mpmath.conj(x[i]) * Ax[i] for i in range(n))
        return float(abs(mu))


def is_equimodular(
    spec: SpectrumAtPoint,
    rel_tol: float = EQUIMODULAR_RTOL,
    source: SpectralSource | None = None,
    merge_identical: bool = True,
) -> EquimodularPoint | None:
    """Dominant equimodularity with classification.

    Numerically identical values (one eigenvalue present in several blocks)
    count once.  ``two-real``: two distinct dominant branches that are not a
    conjugate pair; ``conjugate-pair``: a non-real eigenvalue and its
    conjugate at a real point; ``multi``: three or more.  Near-ties between
    ``rel_tol`` and ``1e-8`` are re-checked in extended precision when
    ``source`` is given.  ``merge_identical=False`` treats every block
    eigenvalue separately, so identical values in two blocks are a tie.
    """
    groups = spec.groups if merge_identical else []
    dist = spec.distinct() if merge_identical else [(z, (s,)) for z, s in spec.eigenvalues]
    if len(dist) < 2:
        return None
    m = np.array([abs(z) for z, _ in dist])
    m1 = m[0]
    if m1 == 0:
        return None
    rel = (m1 - m[1]) / m1
    if rel > rel_tol:
        if rel > ESCALATE_RTOL or source is None:
            return None
        i0 = groups[0][0] if groups else 0
        i1 = groups[1][0] if groups else 1
        a, b = _refine_modulus(source, spec, i0), _refine_modulus(source, spec, i1)
        if a is None or b is None or abs(a - b) / max(a, b) > rel_tol:
            return None
    count = int(np.sum((m1 - m) / m1 <= max(rel_tol, 1e-12)))
    count = max(count, 2)
    tied = dist[:count]
    third = m[count] if len(m) > count else 0.0
    gap = float((m1 - third) / m1)
    secs = tuple(dict.fromkeys(s for _, ss in tied for s in ss))
    z1, z2 = tied[0][0], tied[1][0]
    real_point = spec.Q.imag == 0 and spec.v.imag == 0
    if count > 2:
        cls = "multi"
    elif real_point and abs(z1.imag) > 1e-12 * abs(z1) and abs(z1 - z2.conjugate()) <= 1e-8 * abs(z1):
        cls = "conjugate-pair"
    else:
        cls = "two-real"
    return EquimodularPoint(spec.Q, spec.v, secs, gap, cls)


@dataclass(frozen=True)
class DominanceLabel:
    sector: Sector
    conjugate_pair: bool = False

    def __str__(self) -> str:
        return _block_label(self.sector) + ("*" if self.conjugate_pair else "")


def dominance_label(spec: SpectrumAtPoint) -> DominanceLabel:
    """Sector of the dominant eigenvalue; asterisk when it is a complex-conjugate pair.

    An eigenvalue present in several blocks is labelled by the lowest sector.
    """
    dist = spec.distinct()
    z, secs = dist[0]
    star = False
    if spec.Q.imag == 0 and spec.v.imag == 0 and abs(z.imag) > 1e-9 * abs(z) and len(dist) > 1:
        z2, secs2 = dist[1]
        star = secs2[0] == secs[0] and abs(z2 - z.conjugate()) <= 1e-7 * abs(z)
    return DominanceLabel(secs[0], star)


# ---------------------------------------------------------------------------
# Dominance maps and curve tracing
# ---------------------------------------------------------------------------


def _point(line: LineSpec | None, x: float, y: float) -> tuple[complex, complex]:
    """Grid coordinate -> (Q, v): real plane (x=Q, y=v) or complex parameter on a line."""
    if line is None:
        return complex(x), complex(y)
    return line.point_float(complex(x, y))


def dominance_map(
    source: SpectralSource,
    region: tuple[float, float, float, float],
    resolution: tuple[int, int],
    line: LineSpec | None = None,
    mode: str = "dense",
) -> list[list[DominanceLabel]]:
    """Dominant-sector labels on a grid; rows follow the second coordinate."""
    x0, x1, y0, y1 = region
    nx, ny = resolution
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    out = []
    for y in ys:
        row = []
        for x in xs:
            Q, v = _point(line, x, y)
            row.append(dominance_label(spectrum_at(source, Q, v, mode)))
        out.append(row)
    return out


@dataclass
class CurvePoint:
    x: float
    y: float
    left: DominanceLabel
    right: DominanceLabel
    classification: str = ""


@dataclass
class VerticalSegment:
    Q: float
    v_minus: float
    v_plus: float
    sectors: tuple[Sector, Sector]


@dataclass
class LimitingCurve:
    family: str
    k: int
    context: str
    points: list[CurvePoint]
    chains: list[list[int]]
    leftovers: list[int]
    vertical_segments: list[VerticalSegment]
    step: float
    tol: float
    warnings: list[str] = field(default_factory=list)

    def crossings_on_axis(self) -> list[float]:
        """Grid-edge crossings lying on y = 0 (real-parameter axis)."""
        return sorted(p.x for p in self.points if p.y == 0.0)


def _bisect_edge(
    f_label: Callable[[float], DominanceLabel], a: float, b: float, la: DominanceLabel, tol: float
) -> tuple[float, DominanceLabel]:
    lb = None
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        lm = f_label(m)
        if lm == la:
            a = m
        else:
            b, lb = m, lm
    return 0.5 * (a + b), lb


def _chain(points: list[CurvePoint], cutoff: float) -> tuple[list[list[int]], list[int], list[str]]:
    n = len(points)
    if n == 0:
        return [], [], []
    xy = np.array([(p.x, p.y) for p in points])
    used = np.zeros(n, dtype=bool)
    chains: list[list[int]] = []
    warnings = []
    order = np.lexsort((xy[:, 1], xy[:, 0]))
    for start in order:
        if used[start]:
            continue
        chain = [int(start)]
        used[start] = True
        cur = start
        while True:
            d = np.hypot(xy[:, 0] - xy[cur, 0], xy[:, 1] - xy[cur, 1])
            d[used] = np.inf
            nxt = int(np.argmin(d))
            if not np.isfinite(d[nxt]) or d[nxt] > cutoff:
                break
            if np.sum(d <= cutoff) > 2:
                warnings.append(f"ambiguous chaining near ({xy[cur, 0]:.6g}, {xy[cur, 1]:.6g})")
            chain.append(nxt)
            used[nxt] = True
            cur = nxt
        chains.append(chain)
    leftovers = [c[0] for c in chains if len(c) == 1]
    chains = [c for c in chains if len(c) > 1]
    return chains, leftovers, warnings


def _vertical_segments(points: list[CurvePoint], tol: float, step: float) -> list[VerticalSegment]:
    """Runs of crossings on horizontal grid edges sharing one Q value near an even integer."""
    groups: dict[int, list[CurvePoint]] = {}
    for p in points:
        q = round(p.x)
        if abs(p.x - q) <= 4 * tol and q % 2 == 0:
            groups.setdefault(q, []).append(p)
    segs = []
    for q, ps in sorted(groups.items()):
        ys = sorted({round(p.y / step) * step for p in ps})
        if len(ys) < 3:
            continue
        # longest run of consecutive grid rows
        best, cur = [ys[0]], [ys[0]]
        for y in ys[1:]:
            if y - cur[-1] <= 1.5 * step:
                cur.append(y)
            else:
                cur = [y]
            if len(cur) > len(best):
                best = list(cur)
        if len(best) >= 3 and best[-1] - best[0] >= 1.5 * step:
            p0 = ps[0]
            segs.append(VerticalSegment(float(q), best[0], best[-1], (p0.left.sector, p0.right.sector)))
    return segs


def trace_curve(
    source: SpectralSource,
    region: tuple[float, float, float, float],
    step: float,
    tol: float = 1e-9,
    line: LineSpec | None = None,
    mode: str = "dense",
) -> LimitingCurve:
    """Direct-search tracing of the limiting curve.

    A grid of dominance labels is scanned; every grid edge whose end labels
    differ is bisected (on the label) to ``tol``.  Points are chained by
    greedy nearest neighbour with cutoff ``3 * step``.  With ``line=None`` the
    region is a rectangle ``(Qmin, Qmax, vmin, vmax)`` of the real plane;
    otherwise it is ``(Re t min, Re t max, Im t min, Im t max)`` for the line
    parameter.
    """
    if step <= 0 or tol <= 0:
        raise InvalidInputError("step and tol must be positive")
    x0, x1, y0, y1 = region
    nx = int(math.floor((x1 - x0) / step + 1e-9)) + 1
    ny = int(math.floor((y1 - y0) / step + 1e-9)) + 1
    xs = x0 + step * np.arange(nx)
    ys = y0 + step * np.arange(ny)
    cache: dict[tuple[float, float], DominanceLabel] = {}

    def label(x: float, y: float) -> DominanceLabel:
        key = (float(x), float(y))
        lab = cache.get(key)
        if lab is None:
            Q, v = _point(line, x, y)
            lab = dominance_label(spectrum_at(source, Q, v, mode))
            cache[key] = lab
        return lab

    grid = [[label(x, y) for x in xs] for y in ys]
    pts: list[CurvePoint] = []
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            la = grid[j][i]
            if i + 1 < nx and grid[j][i + 1] != la:
                xm, lb = _bisect_edge(lambda s: label(s, y), x, xs[i + 1], la, tol)
                pts.append(CurvePoint(float(xm), float(y), la, lb or grid[j][i + 1]))
            if j + 1 < ny and grid[j + 1][i] != la:
                ym, lb = _bisect_edge(lambda s: label(x, s), y, ys[j + 1], la, tol)
                pts.append(CurvePoint(float(x), float(ym), la, lb or grid[j + 1][i]))
    pts.sort(key=lambda p: (p.x, p.y))
    chains, leftovers, warns = _chain(pts, 3 * step)
    for w in warns[:1]:
        log.warning("%s (and %d more)", w, len(warns) - 1)
    verticals = _vertical_segments(pts, tol, step) if line is None else []
    ctx = "plane" if line is None else str(line)
    return LimitingCurve(source.family, source.k, ctx, pts, chains, leftovers, verticals, step, tol, warns)


def hausdorff(a: Sequence[tuple[float, float]], b: Sequence[tuple[float, float]]) -> float:
    if not a or not b:
        return math.inf
    A, B = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    D = np.hypot(A[:, None, 0] - B[None, :, 0], A[:, None, 1] - B[None, :, 1])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


# ---------------------------------------------------------------------------
# Vertical-line (BK) check
# ---------------------------------------------------------------------------


def vertical_line_check(
    source: SpectralSource,
    Q: float,
    v_values: Iterable[float],
    pair: tuple[int, int],
    rel_tol: float = 1e-8,
) -> list[tuple[float, float, bool]]:
    """At each ``v``: relative modulus difference of the dominant eigenvalues of
    the two link sectors in ``pair`` and whether they are the top two overall."""
    out = []
    for v in v_values:
        spec = spectrum_at(source, Q, v)
        best: dict[int, float] = {}
        for z, s in spec.eigenvalues:
            if s[0] in pair and s[0] not in best:
                best[s[0]] = abs(z)
        a, b = best.get(pair[0], 0.0), best.get(pair[1], 0.0)
        rel = abs(a - b) / max(a, b, 1e-300)
        top = {s[0] for _, s in spec.eigenvalues[:2]}
        out.append((float(v), rel, rel <= rel_tol and top == set(pair)))
    return out


# ---------------------------------------------------------------------------
# Isolated limiting points
# ---------------------------------------------------------------------------


@dataclass
class IsolatedPoint:
    parameter: complex
    Q: complex
    v: complex
    sector: Sector
    members: dict[Sector, int]
    dominance_gap: float


def _mp_coeffs(p: UniPoly) -> list:
    """Coefficients high to low as mpmath numbers (exact rationals rounded at working precision)."""
    out = []
    for c in reversed(p.coeffs):
        c = Fraction(c)
        out.append(mpmath.mpf(c.numerator) / c.denominator)
    return out


def _amplitude_roots(p: UniPoly, dps: int = 50) -> list[mpmath.mpc]:
    if p.degree < 1:
        return []
    with mpmath.workdps(dps):
        cs = _mp_coeffs(p)
        roots = mpmath.polyroots(cs, maxsteps=200, extraprec=2 * dps)
        return [mpmath.mpc(r) for r in roots]


def _line_parameter_of_Q(line: LineSpec | None, Q: mpmath.mpc) -> mpmath.mpc:
    if line is None or line.kind == "v_affine":
        return Q
    return Q * line.c.denominator / line.c.numerator


def _dominant_members(spec: SpectrumAtPoint, rtol: float) -> tuple[dict[Sector, int], float]:
    """Blocks containing the dominant eigenvalue (with multiplicity) and the relative gap to the next."""
    z1 = spec.eigenvalues[0][0]
    members: dict[Sector, int] = {}
    rest = []
    for z, s in spec.eigenvalues:
        if abs(z - z1) <= rtol * abs(z1):
            members[s] = members.get(s, 0) + 1
        else:
            rest.append(abs(z))
    gap = (abs(z1) - max(rest)) / abs(z1) if rest else math.inf
    return members, gap


def isolated_points(
    source: SpectralSource,
    line: LineSpec | None = None,
    v_fixed: float | None = None,
    region: tuple[float, float, float, float] = (-10.0, 10.0, -10.0, 10.0),
    dominance_tol: float = 1e-10,
    coincidence_rtol: float = 1e-8,
    probe: float = 1e-4,
) -> list[IsolatedPoint]:
    """Points where a unique dominant eigenvalue has vanishing net amplitude.

    Candidates are the roots of every amplitude in play (``alpha`` for the
    generic blocks, ``beta_k`` for the reduced all-link block, ``gamma`` for
    the trivial eigenvalue).  At a candidate the dominant eigenvalue must
    beat the next one by ``dominance_tol``, the set of blocks containing it
    must be the same at ``parameter +- probe`` (otherwise two branches merely
    cross there, which is a curve point), and its net amplitude, evaluated at
    the exact root, must vanish.  Either ``line`` (complex parameter) or
    ``v_fixed`` (real plane, Q varies) selects where to look.
    """
    if source.dec is None:
        raise InvalidInputError("isolated points need the exact decomposition (amplitudes of reduced blocks)")
    if line is None and v_fixed is None:
        raise InvalidInputError("give a line or a fixed v")
    amps = {s: source.amplitude(s) for s in source.sectors}
    tri = trivial_sector(source.width)
    amps[tri] = source.amplitude(tri)
    candidates: list[mpmath.mpc] = []
    # shared eigenvalues carry summed amplitudes such as beta_ell
    summed = [tm.beta(ell) for ell in sorted({s[0] for s in source.sectors}) if ell]
    for p in list(amps.values()) + summed:
        for r in _amplitude_roots(p):
            if all(abs(r - c) > mpmath.mpf(10) ** -30 for c in candidates):
                candidates.append(r)

    def at(t: complex) -> SpectrumAtPoint:
        if line is not None:
            Q, v = line.point_float(t)
        else:
            Q, v = t, complex(v_fixed)
        return spectrum_at(source, Q, v)

    out: list[IsolatedPoint] = []
    for Qr in sorted(candidates, key=lambda z: (float(z.real), float(z.imag))):
        tc = complex(_line_parameter_of_Q(line, Qr))
        if abs(tc.imag) < 1e-25:
            tc = complex(tc.real, 0.0)
        if not (region[0] <= tc.real <= region[1] and region[2] <= tc.imag <= region[3]):
            continue
        spec = at(tc)
        members, gap = _dominant_members(spec, coincidence_rtol)
        if gap <= dominance_tol:
            continue
        if any(_dominant_members(at(tc + d), coincidence_rtol)[0].keys() != members.keys() for d in (probe, -probe)):
            continue
        with mpmath.workdps(50):
            net = mpmath.mpf(0)
            for s, m in members.items():
                net += m * mpmath.polyval(_mp_coeffs(amps[s]), Qr)
            vanishes = abs(net) < mpmath.mpf(10) ** -30
        if vanishes:
            out.append(IsolatedPoint(tc, spec.Q, spec.v, spec.eigenvalues[0][1], members, float(gap)))
    return out
