"""Exact polynomials in (Q, v), univariate specializations and polynomial matrices.

Coefficients are Python ints or :class:`fractions.Fraction`.  Matrix powers are
computed exactly by Kronecker substitution: every integer polynomial is packed
into a single big integer (``gmpy2.mpz``) with enough bits per coefficient slot
that the packed product decodes to the true product.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

import gmpy2
import mpmath
import numpy as np

from .errors import InvalidInputError, ResourceLimitError

Scalar = int | Fraction


def _norm(c: Any) -> Scalar:
    if isinstance(c, Fraction):
        return c.numerator if c.denominator == 1 else c
    if isinstance(c, (int, np.integer)) or type(c).__name__ == "mpz":
        return int(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def _coef_str(c: Scalar) -> str:
    return str(c)


def _coef_parse(s: str) -> Scalar:
    return _norm(Fraction(s)) if "/" in s else int(s)


# ---------------------------------------------------------------------------
# Bivariate polynomials
# ---------------------------------------------------------------------------


class BivarPoly:
    """Sparse polynomial in ``Q`` and ``v``; keys are ``(deg_Q, deg_v)``."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[tuple[int, int], Any] | None = None):
        self.terms: dict[tuple[int, int], Scalar] = {}
        if terms:
            for k, c in terms.items():
                c = _norm(c)
                if c:
                    self.terms[(int(k[0]), int(k[1]))] = c

    @classmethod
    def const(cls, c: Any) -> BivarPoly:
        return cls({(0, 0): c})

    @classmethod
    def Q(cls) -> BivarPoly:
        return cls({(1, 0): 1})

    @classmethod
    def v(cls) -> BivarPoly:
        return cls({(0, 1): 1})

    @classmethod
    def monomial(cls, dq: int, dv: int, c: Any = 1) -> BivarPoly:
        return cls({(dq, dv): c})

    @classmethod
    def from_univariate_q(cls, p: UniPoly) -> BivarPoly:
        return cls({(i, 0): c for i, c in enumerate(p.coeffs)})

    # -- structure ------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    @property
    def deg_q(self) -> int:
        return max((k[0] for k in self.terms), default=-1)

    @property
    def deg_v(self) -> int:
        return max((k[1] for k in self.terms), default=-1)

    @property
    def scalar_domain(self) -> str:
        return "QQ" if any(isinstance(c, Fraction) for c in self.terms.values()) else "ZZ"

    def coefficient(self, dq: int, dv: int) -> Scalar:
        return self.terms.get((dq, dv), 0)

    def sorted_terms(self) -> list[tuple[int, int, Scalar]]:
        return [(i, j, self.terms[(i, j)]) for (i, j) in sorted(self.terms)]

    def denominator_lcm(self) -> int:
        d = 1
        for c in self.terms.values():
            if isinstance(c, Fraction):
                d = d * c.denominator // math.gcd(d, c.denominator)
        return d

    def content(self) -> int:
        g = 0
        for c in self.terms.values():
            g = math.gcd(g, int(c) if not isinstance(c, Fraction) else c.numerator)
        return g

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other: Any) -> BivarPoly:
        if isinstance(other, BivarPoly):
            return other
        return BivarPoly.const(other)

    def __add__(self, other: Any) -> BivarPoly:
        other = self._coerce(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            nc = out.get(k, 0) + c
            if nc:
                out[k] = nc
            else:
                out.pop(k, None)
        r = BivarPoly()
        r.terms = {k: _norm(c) for k, c in out.items()}
        return r

    __radd__ = __add__

    def __neg__(self) -> BivarPoly:
        r = BivarPoly()
        r.terms = {k: -c for k, c in self.terms.items()}
        return r

    def __sub__(self, other: Any) -> BivarPoly:
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> BivarPoly:
        return self._coerce(other) - self

    def __mul__(self, other: Any) -> BivarPoly:
        if not isinstance(other, BivarPoly):
            c = _norm(other) if not isinstance(other, Fraction) else other
            if not c:
                return BivarPoly()
            r = BivarPoly()
            r.terms = {k: _norm(v * c) for k, v in self.terms.items()}
            return r
        out: dict[tuple[int, int], Scalar] = {}
        for (a, b), c in self.terms.items():
            for (x, y), d in other.terms.items():
                key = (a + x, b + y)
                out[key] = out.get(key, 0) + c * d
        return BivarPoly(out)

    __rmul__ = __mul__

    def scalar_mul(self, c: Any) -> BivarPoly:
        return self * c

    def __pow__(self, n: int) -> BivarPoly:
        if n < 0:
            raise InvalidInputError("negative power")
        result = BivarPoly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other: object) -> bool:
        if isinstance(other, BivarPoly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == BivarPoly.const(other).terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.terms.items())))

    # -- evaluation ------------------------------------------------------
    def __call__(self, Q: Any, v: Any) -> Any:
        return self.evaluate(Q, v)

    def evaluate(self, Q: Any, v: Any) -> Any:
        """Evaluate at arbitrary ring elements (ints, Fractions, complex, mpc...)."""
        if not self.terms:
            return 0
        dq, dv = self.deg_q, self.deg_v
        qp = [1] * (dq + 1)
        for i in range(1, dq + 1):
            qp[i] = qp[i - 1] * Q
        vp = [1] * (dv + 1)
        for j in range(1, dv + 1):
            vp[j] = vp[j - 1] * v
        total: Any = 0
        for (i, j), c in self.terms.items():
            total = total + c * qp[i] * vp[j]
        return total

    def substitute_v(self, value: Any) -> UniPoly:
        """Univariate polynomial in Q obtained by fixing ``v``."""
        out: dict[int, Any] = {}
        for (i, j), c in self.terms.items():
            out[i] = out.get(i, 0) + c * Fraction(value) ** j
        d = max(out, default=-1)
        return UniPoly([out.get(i, 0) for i in range(d + 1)])

    def substitute_q(self, value: Any) -> UniPoly:
        """Univariate polynomial in v obtained by fixing ``Q``."""
        out: dict[int, Any] = {}
        for (i, j), c in self.terms.items():
            out[j] = out.get(j, 0) + c * Fraction(value) ** i
        d = max(out, default=-1)
        return UniPoly([out.get(j, 0) for j in range(d + 1)])

    # -- serialization -----------------------------------------------------
    def to_json_obj(self) -> dict:
        return {"terms": [[i, j, _coef_str(c)] for i, j, c in self.sorted_terms()]}

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> BivarPoly:
        return cls({(int(i), int(j)): _coef_parse(c) for i, j, c in obj["terms"]})

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str) -> BivarPoly:
        return cls.from_json_obj(json.loads(s))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for i, j, c in sorted(self.sorted_terms(), key=lambda t: (-(t[0] + t[1]), -t[0])):
            mono = "*".join(
                s for s in (f"Q^{i}" if i > 1 else ("Q" if i == 1 else ""),
                            f"v^{j}" if j > 1 else ("v" if j == 1 else "")) if s
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# Univariate polynomials
# ---------------------------------------------------------------------------


class UniPoly:
    """Dense univariate polynomial, coefficients from low to high degree."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Any] = ()):
        cs = [_norm(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs: list[Scalar] = cs

    @classmethod
    def from_roots(cls, roots: Sequence[Any]) -> UniPoly:
        p = cls([1])
        for r in roots:
            p = p * cls([-r, 1])
        return p

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    @property
    def leading(self) -> Scalar:
        return self.coeffs[-1] if self.coeffs else 0

    def __add__(self, other: Any) -> UniPoly:
        other = other if isinstance(other, UniPoly) else UniPoly([other])
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + [0] * (n - len(self.coeffs))
        b = other.coeffs + [0] * (n - len(other.coeffs))
        return UniPoly([x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self) -> UniPoly:
        return UniPoly([-c for c in self.coeffs])

    def __sub__(self, other: Any) -> UniPoly:
        other = other if isinstance(other, UniPoly) else UniPoly([other])
        return self + (-other)

    def __rsub__(self, other: Any) -> UniPoly:
        return UniPoly([other]) - self

    def __mul__(self, other: Any) -> UniPoly:
        if not isinstance(other, UniPoly):
            return UniPoly([c * other for c in self.coeffs])
        if not self.coeffs or not other.coeffs:
            return UniPoly()
        if all(isinstance(c, int) for c in self.coeffs + other.coeffs):
            import flint

            return UniPoly(int(c) for c in (flint.fmpz_poly(self.coeffs) * flint.fmpz_poly(other.coeffs)).coeffs())
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return UniPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> UniPoly:
        out = UniPoly([1])
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other: object) -> bool:
        if isinstance(other, UniPoly):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self.coeffs == UniPoly([other]).coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(tuple(self.coeffs))

    def __call__(self, x: Any) -> Any:
        acc: Any = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self) -> UniPoly:
        return UniPoly([i * c for i, c in enumerate(self.coeffs)][1:])

    def shift_down(self) -> tuple[int, UniPoly]:
        """Strip factors of the variable: returns (multiplicity of 0, quotient)."""
        k = 0
        while k < len(self.coeffs) and self.coeffs[k] == 0:
            k += 1
        return k, UniPoly(self.coeffs[k:])

    def denominator_lcm(self) -> int:
        d = 1
        for c in self.coeffs:
            if isinstance(c, Fraction):
                d = d * c.denominator // math.gcd(d, c.denominator)
        return d

    def primitive(self) -> UniPoly:
        """Integer primitive part with positive leading coefficient."""
        if not self.coeffs:
            return UniPoly()
        d = self.denominator_lcm()
        ints = [int(c * d) for c in self.coeffs]
        g = 0
        for c in ints:
            g = math.gcd(g, c)
        s = -1 if ints[-1] < 0 else 1
        return UniPoly([s * c // g for c in ints])

    def to_fmpz(self):
        import flint

        return flint.fmpz_poly([int(c) for c in self.primitive().coeffs])

    @classmethod
    def from_flint(cls, p) -> UniPoly:
        return cls([_norm(Fraction(int(c.p), int(c.q))) if hasattr(c, "q") else int(c) for c in p.coeffs()])

    def divmod(self, other: UniPoly) -> tuple[UniPoly, UniPoly]:
        if not other.coeffs:
            raise ZeroDivisionError("polynomial division by zero")
        r = [Fraction(c) for c in self.coeffs]
        q = [Fraction(0)] * max(len(r) - len(other.coeffs) + 1, 0)
        lead = Fraction(other.coeffs[-1])
        for i in range(len(q) - 1, -1, -1):
            c = r[i + len(other.coeffs) - 1] / lead
            q[i] = c
            if c:
                for j, b in enumerate(other.coeffs):
                    r[i + j] -= c * b
        return UniPoly(q), UniPoly(r[: max(len(other.coeffs) - 1, 0)])

    def gcd(self, other: UniPoly) -> UniPoly:
        """Monic-free primitive gcd over the rationals (via FLINT)."""
        if not self.coeffs:
            return other.primitive()
        if not other.coeffs:
            return self.primitive()
        g = self.to_fmpz().gcd(other.to_fmpz())
        return UniPoly([int(c) for c in g.coeffs()]).primitive()

    def squarefree_decomposition(self) -> list[tuple[UniPoly, int]]:
        """Yun's algorithm: ``p = c * prod f_i^i`` with squarefree coprime ``f_i``."""
        p = self.primitive()
        if p.degree <= 0:
            return []
        out = []
        dp = p.derivative()
        a = p.gcd(dp)
        b = p.divmod(a)[0].primitive()
        c = dp.divmod(a)[0]
        d = c - b.derivative()
        i = 1
        while b.degree > 0:
            a = b.gcd(d) if d.coeffs else b
            if a.degree > 0:
                out.append((a, i))
            b2 = b.divmod(a)[0].primitive()
            c = d.divmod(a)[0]
            b = b2
            d = c - b.derivative()
            i += 1
        return out

    def to_json_obj(self) -> dict:
        return {"coeffs": [_coef_str(c) for c in self.coeffs]}

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> UniPoly:
        return cls(_coef_parse(c) for c in obj["coeffs"])

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json_obj()).encode()).hexdigest()[:16]

    def __repr__(self) -> str:
        return f"UniPoly({self.coeffs})"


# ---------------------------------------------------------------------------
# Lines in the (Q, v) plane
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LineSpec:
    """Either ``v = a*Q + b`` (parameter Q) or ``Q = c*v`` (parameter v)."""

    kind: str
    a: Fraction = Fraction(0)
    b: Fraction = Fraction(0)
    c: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if self.kind not in ("v_affine", "q_prop"):
            raise InvalidInputError(f"unknown line kind {self.kind}")

    @classmethod
    def v_affine(cls, a: Any, b: Any) -> LineSpec:
        return cls("v_affine", a=Fraction(a), b=Fraction(b))

    @classmethod
    def q_prop(cls, c: Any) -> LineSpec:
        return cls("q_prop", c=Fraction(c))

    @classmethod
    def chromatic(cls) -> LineSpec:
        return cls.v_affine(0, -1)

    @classmethod
    def flow(cls) -> LineSpec:
        return cls.v_affine(-1, 0)

    @property
    def parameter(self) -> str:
        return "Q" if self.kind == "v_affine" else "v"

    def point(self, t: Any) -> tuple[Any, Any]:
        """(Q, v) on the line at parameter value ``t``."""
        if self.kind == "v_affine":
            return t, self.a * t + self.b
        return self.c * t, t

    def point_float(self, t: complex) -> tuple[complex, complex]:
        if self.kind == "v_affine":
            return t, float(self.a) * t + float(self.b)
        return float(self.c) * t, t

    @classmethod
    def parse(cls, text: str) -> LineSpec:
        """Parse ``v=-1``, ``v=-Q``, ``v=-2Q+1``, ``Q=-v``, ``Q=-3v``, ``v=-p*Q`` forms."""
        s = text.replace(" ", "").replace("*", "")
        m = re.fullmatch(r"v=([+-]?[\d/]*)Q([+-][\d/]+)?", s)
        if m:
            a = m.group(1)
            a = Fraction(a + "1") if a in ("", "+", "-") else Fraction(a)
            b = Fraction(m.group(2)) if m.group(2) else Fraction(0)
            return cls.v_affine(a, b)
        m = re.fullmatch(r"v=([+-]?[\d/]+)", s)
        if m:
            return cls.v_affine(0, Fraction(m.group(1)))
        m = re.fullmatch(r"Q=([+-]?[\d/]*)v", s)
        if m:
            c = m.group(1)
            c = Fraction(c + "1") if c in ("", "+", "-") else Fraction(c)
            return cls.q_prop(c)
        raise InvalidInputError(f"cannot parse line spec {text!r}")

    def __str__(self) -> str:
        if self.kind == "v_affine":
            if self.a == 0:
                return f"v={self.b}"
            lead = {1: "", -1: "-"}.get(self.a, f"{self.a}*")
            tail = "" if self.b == 0 else (f"+{self.b}" if self.b > 0 else f"{self.b}")
            return f"v={lead}Q{tail}"
        lead = {1: "", -1: "-"}.get(self.c, f"{self.c}*")
        return f"Q={lead}v"


def specialize(p: BivarPoly, line: LineSpec) -> UniPoly:
    """Exact substitution of a line into a bivariate polynomial."""
    out: list[Any] = [0] * (p.deg_q + p.deg_v + 1 if p.terms else 0)
    if line.kind == "v_affine":
        a, b = _norm(line.a), _norm(line.b)
        cache: dict[int, UniPoly] = {0: UniPoly([1])}
        base = UniPoly([b, a])
        for (i, j), c in p.terms.items():
            if j not in cache:
                cache[j] = base ** j
            for t, x in enumerate(cache[j].coeffs):
                out[i + t] += c * x
    else:
        cc = _norm(line.c)
        for (i, j), c in p.terms.items():
            out[i + j] += c * cc ** i
    return UniPoly(out)


# ---------------------------------------------------------------------------
# Complex evaluation with running error bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplexValue:
    value: mpmath.mpc
    radius: mpmath.mpf

    def contains_zero(self) -> bool:
        return abs(self.value) <= self.radius


def eval_complex(
    p: UniPoly | BivarPoly, points: Sequence[Any], precision: int = 53
) -> list[ComplexValue]:
    """Evaluate at complex points with a rigorous a-priori rounding bound.

    For a univariate polynomial the points are scalars; for a bivariate one they
    are ``(Q, v)`` pairs.  The bound is the classical Horner/summation estimate
    ``gamma * sum |c| |z|^i`` with ``gamma`` covering coefficient conversion and
    complex multiplication errors, evaluated with upward slack.
    """
    if precision < 53:
        raise InvalidInputError("precision must be at least 53 bits")
    out = []
    with mpmath.workprec(precision):
        u = mpmath.mpf(2) ** (1 - precision)
        for pt in points:
            if isinstance(p, UniPoly):
                z = mpmath.mpc(pt)
                d = max(p.degree, 0)
                acc = mpmath.mpc(0)
                mag = mpmath.mpf(0)
                az = abs(z)
                for c in reversed(p.coeffs):
                    cm = mpmath.mpf(c.numerator) / c.denominator if isinstance(c, Fraction) else mpmath.mpf(c)
                    acc = acc * z + cm
                    mag = mag * az + abs(cm)
                n_ops = 2 * d + 2
            else:
                Q, v = mpmath.mpc(pt[0]), mpmath.mpc(pt[1])
                acc = mpmath.mpc(0)
                mag = mpmath.mpf(0)
                aq, av = abs(Q), abs(v)
                for (i, j), c in p.terms.items():
                    cm = mpmath.mpf(c.numerator) / c.denominator if isinstance(c, Fraction) else mpmath.mpf(c)
                    acc += cm * Q ** i * v ** j
                    mag += abs(cm) * aq ** i * av ** j
                n_ops = 2 * (p.deg_q + p.deg_v + len(p.terms)) + 4
            gamma = 4 * n_ops * u / (1 - 4 * n_ops * u)
            rad = gamma * mag * (1 + 2 * u * n_ops)
            out.append(ComplexValue(acc, rad))
    return out


# ---------------------------------------------------------------------------
# Polynomial matrices
# ---------------------------------------------------------------------------


class _Packer:
    """Kronecker substitution for integer bivariate polynomials with known bounds."""

    def __init__(self, slot_bits: int, q_slots: int):
        self.B = slot_bits
        self.SQ = q_slots
        self.half = gmpy2.mpz(1) << (slot_bits - 1)
        self.mask = (gmpy2.mpz(1) << slot_bits) - 1

    def pack(self, p: BivarPoly) -> gmpy2.mpz:
        acc = gmpy2.mpz(0)
        for (i, j), c in p.terms.items():
            acc += gmpy2.mpz(int(c)) << (self.B * (i + self.SQ * j))
        return acc

    def unpack(self, x: gmpy2.mpz) -> BivarPoly:
        terms = {}
        slot = 0
        x = gmpy2.mpz(x)
        B = self.B
        while x != 0:
            r = x & self.mask
            if r >= self.half:
                r -= self.mask + 1
            if r:
                terms[(slot % self.SQ, slot // self.SQ)] = int(r)
            x = (x - r) >> B
            slot += 1
        return BivarPoly(terms)


class PolyMatrix:
    """Dense rectangular array of :class:`BivarPoly`."""

    __slots__ = ("rows", "shape")

    def __init__(self, rows: Sequence[Sequence[BivarPoly]]):
        self.rows = [list(r) for r in rows]
        nr = len(self.rows)
        nc = len(self.rows[0]) if nr else 0
        if any(len(r) != nc for r in self.rows):
            raise InvalidInputError("ragged polynomial matrix")
        self.shape = (nr, nc)

    @classmethod
    def zeros(cls, n: int, m: int | None = None) -> PolyMatrix:
        m = n if m is None else m
        return cls([[BivarPoly() for _ in range(m)] for _ in range(n)])

    @classmethod
    def identity(cls, n: int) -> PolyMatrix:
        return cls([[BivarPoly.const(1) if i == j else BivarPoly() for j in range(n)] for i in range(n)])

    @classmethod
    def diag(cls, entries: Sequence[BivarPoly]) -> PolyMatrix:
        n = len(entries)
        return cls([[entries[i] if i == j else BivarPoly() for j in range(n)] for i in range(n)])

    def __getitem__(self, ij: tuple[int, int]) -> BivarPoly:
        return self.rows[ij[0]][ij[1]]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PolyMatrix) and self.rows == other.rows

    @property
    def dim(self) -> int:
        return self.shape[0]

    def entries(self) -> Iterator[tuple[int, int, BivarPoly]]:
        for i, r in enumerate(self.rows):
            for j, p in enumerate(r):
                if p:
                    yield i, j, p

    def is_integral(self) -> bool:
        return all(p.scalar_domain == "ZZ" for _, _, p in self.entries())

    def __matmul__(self, other: PolyMatrix) -> PolyMatrix:
        return product(self, other)

    def trace(self) -> BivarPoly:
        acc = BivarPoly()
        for i in range(min(self.shape)):
            acc = acc + self.rows[i][i]
        return acc

    def sub_scalar_identity(self, p: BivarPoly) -> PolyMatrix:
        return PolyMatrix([[x - p if i == j else x for j, x in enumerate(r)] for i, r in enumerate(self.rows)])

    # -- evaluation -------------------------------------------------------
    def evaluator(self) -> Callable[[complex, complex], np.ndarray]:
        """Vectorized numeric evaluation ``(Q, v) -> complex ndarray``."""
        rows, cols, qi, vj, cf = [], [], [], [], []
        for i, j, p in self.entries():
            for (a, b), c in p.terms.items():
                rows.append(i)
                cols.append(j)
                qi.append(a)
                vj.append(b)
                cf.append(float(c))
        r, c = np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp)
        qi_a, vj_a, cf_a = np.array(qi, dtype=np.intp), np.array(vj, dtype=np.intp), np.array(cf)
        shape = self.shape
        dq = int(qi_a.max()) if len(qi) else 0
        dv = int(vj_a.max()) if len(vj) else 0

        def ev(Q: complex, v: complex) -> np.ndarray:
            qp = np.power(complex(Q), np.arange(dq + 1))
            vp = np.power(complex(v), np.arange(dv + 1))
            out = np.zeros(shape, dtype=complex)
            np.add.at(out, (r, c), cf_a * qp[qi_a] * vp[vj_a])
            return out

        return ev

    def to_numpy(self, Q: complex, v: complex) -> np.ndarray:
        return self.evaluator()(Q, v)

    def to_fmpq_mat(self, Q: Any, v: Any):
        """Exact specialization at rational (Q, v) as a FLINT rational matrix."""
        import flint

        Q, v = Fraction(Q), Fraction(v)
        m = flint.fmpq_mat(self.shape[0], self.shape[1])
        for i, j, p in self.entries():
            x = Fraction(p.evaluate(Q, v))
            m[i, j] = flint.fmpq(x.numerator, x.denominator)
        return m

    def specialize(self, line: LineSpec) -> PolyMatrix:
        """Entries become polynomials in the line parameter (stored in the Q slot)."""
        return PolyMatrix([[BivarPoly.from_univariate_q(specialize(p, line)) for p in r] for r in self.rows])

    def substitute(self, Q: Any = None, v: Any = None) -> PolyMatrix:
        """Fix one variable to a rational value; the other keeps its slot."""
        out = []
        for r in self.rows:
            nr = []
            for p in r:
                if Q is not None:
                    u = p.substitute_q(Q)
                    nr.append(BivarPoly({(0, j): c for j, c in enumerate(u.coeffs)}))
                else:
                    nr.append(BivarPoly.from_univariate_q(p.substitute_v(v)))
            out.append(nr)
        return PolyMatrix(out)

    # -- serialization ----------------------------------------------------
    def to_json_obj(self) -> dict:
        return {
            "shape": list(self.shape),
            "entries": [[i, j, p.to_json_obj()["terms"]] for i, j, p in self.entries()],
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> PolyMatrix:
        m = cls.zeros(*obj["shape"])
        for i, j, terms in obj["entries"]:
            m.rows[i][j] = BivarPoly.from_json_obj({"terms": terms})
        return m


def product(a: PolyMatrix, b: PolyMatrix) -> PolyMatrix:
    """Exact matrix product (plain sparse-entry arithmetic)."""
    if a.shape[1] != b.shape[0]:
        raise InvalidInputError("shape mismatch in matrix product")
    n, m = a.shape[0], b.shape[1]
    out = PolyMatrix.zeros(n, m)
    for i in range(n):
        ri = a.rows[i]
        for k, x in enumerate(ri):
            if not x:
                continue
            bk = b.rows[k]
            for j in range(m):
                y = bk[j]
                if y:
                    out.rows[i][j] = out.rows[i][j] + x * y
    return out


DEFAULT_MEMORY_CAP_BITS = 2 ** 36  # 8 GiB of packed integers


def _bitlen(x: int) -> int:
    return max(int(x).bit_length(), 1)


def trace_of_power(m: PolyMatrix, n: int, memory_cap_bits: int = DEFAULT_MEMORY_CAP_BITS) -> BivarPoly:
    """Exact ``tr(M^n)`` by binary powering on Kronecker-packed integers.

    The packed slot width is derived from an a-priori bound on the
    coefficients of ``M^n``; if three packed matrices would exceed the memory
    cap, powering falls back to sequential multiplication (two matrices); if
    that still does not fit, :class:`ResourceLimitError` is raised.
    """
    d = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError("trace_of_power needs a square matrix")
    if n < 0:
        raise InvalidInputError("negative power")
    if n == 0:
        return BivarPoly.const(d)
    entries = list(m.entries())
    if not entries:
        return BivarPoly()
    den = 1
    for _, _, p in entries:
        dd = p.denominator_lcm()
        den = den * dd // math.gcd(den, dd)
    ipoly = {(i, j): p * den for i, j, p in entries}
    dq = max(p.deg_q for p in ipoly.values())
    dv = max(p.deg_v for p in ipoly.values())
    cmax = max(abs(int(c)) for p in ipoly.values() for c in p.terms.values())
    tmax = max(len(p.terms) for p in ipoly.values())
    bound_bits = n * (_bitlen(d) + _bitlen(tmax) + _bitlen(cmax))
    B = bound_bits + 2
    SQ = n * dq + 1
    SV = n * dv + 1
    entry_bits = B * SQ * SV
    if 2 * d * d * entry_bits > memory_cap_bits:
        raise ResourceLimitError(
            f"trace_of_power needs about {2 * d * d * entry_bits / 8e9:.1f} GB (cap {memory_cap_bits / 8e9:.1f} GB)"
        )
    pk = _Packer(B, SQ)
    zero = gmpy2.mpz(0)
    base = [[zero] * d for _ in range(d)]
    for (i, j), p in ipoly.items():
        base[i][j] = pk.pack(p)

    def mul(x: list[list[Any]], y: list[list[Any]]) -> list[list[Any]]:
        yt = list(zip(*y))
        out = []
        for row in x:
            nz = [(k, a) for k, a in enumerate(row) if a]
            out.append([sum((a * col[k] for k, a in nz if col[k]), zero) for col in yt])
        return out

    def trace_mul(x: list[list[Any]], y: list[list[Any]]) -> Any:
        return sum((x[i][k] * y[k][i] for i in range(d) for k in range(d) if x[i][k] and y[k][i]), zero)

    if n == 1:
        tr = sum((base[i][i] for i in range(d)), zero)
    elif 3 * d * d * entry_bits <= memory_cap_bits:
        # binary powering: M^n = M^(n - 2^s) * M^(2^s); last product only traced
        power = base
        k = n
        factors = []
        while k:
            if k & 1:
                factors.append(power)
            k >>= 1
            if k:
                power = mul(power, power)
        acc = factors[0]
        for f in factors[1:-1]:
            acc = mul(acc, f)
        tr = trace_mul(acc, factors[-1]) if len(factors) > 1 else sum((acc[i][i] for i in range(d)), zero)
    else:
        acc = base
        for _ in range(n - 2):
            acc = mul(acc, base)
        tr = trace_mul(acc, base)
    out = pk.unpack(tr)
    if den != 1:
        out = out * Fraction(1, den ** n)
    return out


def charpoly_berkowitz(m: PolyMatrix, cap: int = 40) -> list[BivarPoly]:
    """Division-free characteristic polynomial ``det(x I - M)``.

    Returns coefficients from the constant term up to the leading ``1``.
    """
    d = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError("char_poly needs a square matrix")
    if d > cap:
        raise ResourceLimitError(f"char_poly dimension {d} exceeds cap {cap}")
    one = BivarPoly.const(1)
    if d == 0:
        return [one]
    A = [list(r) for r in m.rows]
    transforms = []
    while len(A) >= 2:
        k = len(A)
        a = A[0][0]
        R = A[0][1:]
        C = [A[i][0] for i in range(1, k)]
        sub = [r[1:] for r in A[1:]]
        items = [C]
        for _ in range(k - 2):
            prev = items[-1]
            items.append([sum((sub[i][j] * prev[j] for j in range(k - 1) if sub[i][j] and prev[j]), BivarPoly()) for i in range(k - 1)])
        col = [one, -a] + [-sum((R[j] * it[j] for j in range(k - 1) if R[j] and it[j]), BivarPoly()) for it in items]
        transforms.append(col)
        A = sub
    poly = [one, -A[0][0]]
    for col in reversed(transforms):
        k = len(col) - 1
        new = []
        for i in range(k + 1):
            acc = BivarPoly()
            for j in range(min(i + 1, len(poly))):
                c = col[i - j]
                if c and poly[j]:
                    acc = acc + c * poly[j]
            new.append(acc)
        poly = new
    return list(reversed(poly))


char_poly = charpoly_berkowitz


def newton_power_sum(charpoly: Sequence[BivarPoly], n: int) -> BivarPoly:
    """n-th power sum of the roots of a monic polynomial (low-to-high coefficients)."""
    d = len(charpoly) - 1
    # e_i with x^d + c_{d-1} x^{d-1} + ... : c_{d-i} = (-1)^i e_i
    c = [charpoly[d - i] if i <= d else BivarPoly() for i in range(n + 1)]
    p: list[BivarPoly] = [BivarPoly.const(d)]
    for k in range(1, n + 1):
        acc = c[k] * (-k) if k <= d else BivarPoly()
        for i in range(1, k):
            if i <= d and c[i]:
                acc = acc - c[i] * p[k - i]
        p.append(acc)
    return p[n]
