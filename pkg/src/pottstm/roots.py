"""Multiprecision simultaneous root finding (Aberth–Ehrlich) with a-posteriori
inclusion radii.

Iteration style: Jacobi.  Every round computes all Aberth corrections from
the previous approximations and only then moves the roots, so a round is a
pure function of the previous one and the per-root updates are independent.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import InvalidInputError
from .poly import UniPoly

START_PRECISION = 128


@dataclass
class Root:
    value: complex | mpc
    radius: mpfr
    multiplicity: int = 1

    @property
    def real(self) -> float:
        return float(self.value.real)

    @property
    def imag(self) -> float:
        return float(self.value.imag)


@dataclass
class RootSet:
    poly_hash: str
    degree: int
    roots: list[Root]
    iterations: int
    precision: int
    flagged: bool = False
    notes: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.roots)

    def values(self) -> list[complex]:
        return [complex(r.value) for r in self.roots]

    def max_radius(self) -> float:
        return max((float(r.radius) for r in self.roots), default=0.0)

    def conjugate_closed(self) -> bool:
        """Every non-real root has a partner within the radii of its conjugate."""
        used = [False] * len(self.roots)
        with gmpy2.context(gmpy2.get_context(), precision=self.precision):
            for i, r in enumerate(self.roots):
                if used[i]:
                    continue
                z = r.value
                if abs(z.imag) <= r.radius:
                    used[i] = True
                    continue
                zc = mpc(z.real, -z.imag)
                for j, s in enumerate(self.roots):
                    if j != i and not used[j] and abs(s.value - zc) <= r.radius + s.radius:
                        used[i] = used[j] = True
                        break
                else:
                    return False
        return True

    def to_csv(self, provenance: dict[str, str] | None = None, digits: int = 30) -> str:
        buf = io.StringIO()
        buf.write(f"# poly_sha256={self.poly_hash}\n")
        for key, val in (provenance or {}).items():
            buf.write(f"# {key}={val}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "radius", "multiplicity"])
        for r in self.roots:
            w.writerow([_fmt(r.value.real, digits), _fmt(r.value.imag, digits), f"{float(r.radius):.3e}", r.multiplicity])
        return buf.getvalue()


def _fmt(x, digits: int) -> str:
    return gmpy2.mpfr(x).__format__(f".{digits}g")


# ---------------------------------------------------------------------------
# Numerical helpers
# ---------------------------------------------------------------------------


def _int_coeffs(p: UniPoly) -> list[int]:
    """Integer multiple of ``p`` with coprime coefficients (low to high)."""
    den = 1
    for c in p.coeffs:
        den = math.lcm(den, Fraction(c).denominator)
    cs = [int(Fraction(c) * den) for c in p.coeffs]
    g = 0
    for c in cs:
        g = math.gcd(g, c)
    return [c // g for c in cs] if g else cs


def _newton_polygon_start(coeffs: list[int], prec: int, rng: random.Random) -> list[mpc]:
    """Initial points on circles whose radii come from the upper hull of ``(i, log|c_i|)``."""
    d = len(coeffs) - 1
    pts = [(i, math.log(abs(c)) if c else -math.inf) for i, c in enumerate(coeffs)]
    pts = [pt for pt in pts if pt[1] > -math.inf]
    hull: list[tuple[int, float]] = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (pt[0] - x1) <= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    out: list[mpc] = []
    sigma = rng.uniform(0, 2 * math.pi)
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        for (i, yi), (j, yj) in zip(hull, hull[1:]):
            m = j - i
            r = math.exp((yi - yj) / m)
            for t in range(m):
                ang = 2 * math.pi * t / m + sigma + 0.7 * i / max(d, 1)
                out.append(mpc(r * math.cos(ang), r * math.sin(ang)))
    return out


def _horner(coeffs: Sequence[mpfr], z: mpc) -> tuple[mpc, mpc, mpfr]:
    """``p(z)``, ``p'(z)`` and ``sum |c_i| |z|^i`` (for the rounding bound)."""
    p = mpc(0)
    dp = mpc(0)
    mag = mpfr(0)
    az = abs(z)
    for c in reversed(coeffs):
        dp = dp * z + p
        p = p * z + c
        mag = mag * az + abs(c)
    return p, dp, mag


def _inclusion_radii(coeffs: Sequence[mpfr], zs: list[mpc], prec: int) -> list[mpfr]:
    """``d * (|p(z_i)| + err_i) / |c_d prod_{j != i} (z_i - z_j)|`` (Gerschgorin-type inclusion)."""
    d = len(zs)
    u = mpfr(2) ** (-prec + 1)
    lead = abs(coeffs[-1])
    out = []
    for i, z in enumerate(zs):
        p, _, mag = _horner(coeffs, z)
        err = mag * u * (4 * d + 4)
        den = lead
        for j, w in enumerate(zs):
            if j != i:
                den *= abs(z - w)
        if den == 0:
            out.append(mpfr("inf"))
            continue
        out.append(mpfr(d) * (abs(p) + err) / den * (1 + u * (4 * d + 4)))
    return out


def _aberth_squarefree(
    coeffs_int: list[int],
    target_radius: float,
    seed: int,
    max_precision: int,
    max_rounds: int,
) -> tuple[list[mpc], list[mpfr], int, int, bool]:
    d = len(coeffs_int) - 1
    if d == 1:
        prec = START_PRECISION
        with gmpy2.context(gmpy2.get_context(), precision=prec):
            z = mpc(-mpfr(coeffs_int[0]) / mpfr(coeffs_int[1]))
            return [z], [mpfr(abs(z)) * mpfr(2) ** (-prec + 2)], 0, prec, False
    rng = random.Random(seed)
    prec = START_PRECISION
    zs = _newton_polygon_start(coeffs_int, prec, rng)
    total = 0
    radii: list[mpfr] = []
    while True:
        with gmpy2.context(gmpy2.get_context(), precision=prec):
            cs = [mpfr(c) for c in coeffs_int]
            zs = [mpc(z) for z in zs]
            stall = mpfr(2) ** (-(prec // 2))
            for _ in range(max_rounds):
                total += 1
                corr = []
                for i, z in enumerate(zs):
                    p, dp, _ = _horner(cs, z)
                    if p == 0:
                        corr.append(mpc(0))
                        continue
                    if dp == 0:
                        corr.append(mpc(stall, stall))
                        continue
                    n = p / dp
                    s = mpc(0)
                    for j, w in enumerate(zs):
                        if j != i:
                            s += 1 / (z - w)
                    den = 1 - n * s
                    corr.append(n / den if den != 0 else n)
                zs = [z - c for z, c in zip(zs, corr)]
                move = max(abs(c) / max(abs(z), mpfr(1)) for c, z in zip(corr, zs))
                if move < stall:
                    break
            radii = _inclusion_radii(cs, zs, prec)
        if max(radii) <= target_radius:
            return zs, radii, total, prec, False
        if prec * 2 > max_precision:
            return zs, radii, total, prec, True
        prec *= 2


def _hash_poly(p: UniPoly) -> str:
    return p.digest()


def solve(
    p: UniPoly,
    target_radius: float = 1e-20,
    seed: int = 0,
    max_precision: int = 8192,
    max_rounds: int = 2000,
) -> RootSet:
    """All complex roots of ``p`` with inclusion radii at most ``target_radius``.

    Zero roots (trailing zero coefficients) are removed exactly first; the
    rest is split by the squarefree decomposition, so a root of multiplicity
    ``m`` is reported once with ``multiplicity = m`` and the radius of its
    squarefree factor.  Precision starts at 128 bits and doubles whenever the
    iteration has stalled (root movement below ``2^-(prec/2)``) while some
    radius still exceeds the target.  Hitting ``max_precision`` returns the
    partial result with ``flagged = True``.
    """
    if p.is_zero() or p.degree < 1:
        raise InvalidInputError("root finding needs a polynomial of degree >= 1")
    notes: list[str] = []
    zeros, rest = p.shift_down()
    roots: list[Root] = []
    if zeros:
        roots.append(Root(mpc(0), mpfr(0), zeros))
        notes.append(f"deflated {zeros} zero roots")
    total_iter, max_prec, flagged = 0, START_PRECISION, False
    if rest.degree >= 1:
        for factor, mult in rest.squarefree_decomposition():
            if factor.degree < 1:
                continue
            cs = _int_coeffs(factor)
            zs, radii, it, prec, fl = _aberth_squarefree(cs, target_radius, seed, max_precision, max_rounds)
            total_iter += it
            max_prec = max(max_prec, prec)
            flagged |= fl
            for z, r in zip(zs, radii):
                roots.append(Root(z, r, mult))
    roots.sort(key=lambda r: (float(r.value.real), float(r.value.imag)))
    if flagged:
        notes.append("precision cap reached; radii above target are flagged")
    return RootSet(_hash_poly(p), p.degree, roots, total_iter, max_prec, flagged, notes)


@dataclass
class VietaReport:
    sum_error: float
    sum_bound: float
    product_error: float
    product_bound: float

    @property
    def passed(self) -> bool:
        return self.sum_error <= self.sum_bound and self.product_error <= self.product_bound


def vieta_check(p: UniPoly, rs: RootSet, slack: float = 1e-25) -> VietaReport:
    """Compare ``sum`` and ``prod`` of the roots with ``-c_{d-1}/c_d`` and ``(-1)^d c_0/c_d``.

    The bounds are the accumulated radii (plus a relative ``slack`` for the
    final rounding of the sums themselves).
    """
    d = p.degree
    cs = [Fraction(c) for c in p.coeffs]
    with gmpy2.context(gmpy2.get_context(), precision=max(rs.precision, 128)):
        s = mpc(0)
        prod = mpc(1)
        rad_sum = mpfr(0)
        mod_prod = mpfr(1)
        mod_prod_up = mpfr(1)
        for r in rs.roots:
            for _ in range(r.multiplicity):
                s += r.value
                prod *= r.value
                rad_sum += r.radius
                mod_prod *= abs(r.value)
                mod_prod_up *= abs(r.value) + r.radius
        want_s = -mpfr(cs[d - 1].numerator) / cs[d - 1].denominator / (mpfr(cs[d].numerator) / cs[d].denominator)
        want_p = mpfr(cs[0].numerator) / cs[0].denominator / (mpfr(cs[d].numerator) / cs[d].denominator)
        if d % 2:
            want_p = -want_p
        es = abs(s - want_s)
        ep = abs(prod - want_p)
        bs = rad_sum + slack * (1 + sum(abs(r.value) * r.multiplicity for r in rs.roots))
        bp = (mod_prod_up - mod_prod) + slack * (1 + mod_prod_up)
        return VietaReport(float(es), float(bs), float(ep), float(bp))


def residual_consistent(p: UniPoly, rs: RootSet) -> bool:
    """``|p(z)| / |p'(z)|`` never exceeds the radius at simple roots (Newton-step consistency)."""
    from .poly import eval_complex

    dp = p.derivative()
    # twice the working precision, so rounding in p(z) stays far below the radius floor
    prec = 2 * max(rs.precision, 128)
    for r in rs.roots:
        if r.multiplicity != 1 or r.radius == 0:
            continue
        z = _to_mpmath(r.value, prec)
        pv = eval_complex(p, [z], precision=prec)[0]
        dv = eval_complex(dp, [z], precision=prec)[0]
        if abs(dv.value) <= dv.radius:
            return False
        step = (abs(pv.value) + pv.radius) / (abs(dv.value) - dv.radius)
        if step > r.radius * (1 + 1e-6):
            return False
    return True


def _to_mpmath(z: mpc, prec: int):
    import mpmath

    def exact(x: mpfr):
        num, den = x.as_integer_ratio()
        return mpmath.mpf(num) / den

    with mpmath.workprec(prec):
        return mpmath.mpc(exact(z.real), exact(z.imag))
