"""Connectivity states of the transfer boundary and symmetric-group tools.

Points of the boundary are integers: top points are ``0..w-1`` and bottom
points ``w..2w-1`` (bottom point ``i'`` is ``w + i``).  A state is a set
partition of these ``2w`` points.  A *link* is a block holding both top and
bottom points.

For the transfer-matrix kernels a faster encoding is used: a labelled state is
a pair ``(blk, lab)`` where ``blk`` is the restricted-growth string of the top
partition and ``lab[b]`` is the link label carried by top block ``b`` (or -1).
Label ``j`` means the block is attached to the ``j``-th linked bottom block.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .errors import InvalidInputError

Perm = tuple[int, ...]
Labeled = tuple[tuple[int, ...], tuple[int, ...]]


# ---------------------------------------------------------------------------
# Set partitions of the top and bottom rows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SetPartition:
    """Canonical set partition of ``{0..w-1} U {0'..(w-1)'}``."""

    width: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        pts = sorted(p for b in self.blocks for p in b)
        if pts != list(range(2 * self.width)):
            raise InvalidInputError("blocks must cover every point exactly once")

    @property
    def link_count(self) -> int:
        w = self.width
        return sum(1 for b in self.blocks if b[0] < w and b[-1] >= w)

    def block_of(self, point: int) -> tuple[int, ...]:
        for b in self.blocks:
            if point in b:
                return b
        raise InvalidInputError(f"point {point} out of range")

    def bottom_pattern(self) -> tuple[tuple[int, ...], ...]:
        """Restriction to the bottom row, as blocks of bottom indices."""
        w = self.width
        out = [tuple(p - w for p in b if p >= w) for b in self.blocks]
        return tuple(sorted(b for b in out if b))

    def __str__(self) -> str:
        w = self.width
        name = lambda p: str(p) if p < w else f"{p - w}'"
        return "{" + ",".join("{" + ",".join(map(name, b)) + "}" for b in self.blocks) + "}"


def canonicalize(blocks: Iterable[Iterable[int]], width: int) -> SetPartition:
    """Sort points inside blocks and blocks by least element."""
    bl = [tuple(sorted(b)) for b in blocks]
    bl = [b for b in bl if b]
    seen = [p for b in bl for p in b]
    if len(seen) != len(set(seen)):
        raise InvalidInputError("a point appears in two blocks")
    if sorted(seen) != list(range(2 * width)):
        raise InvalidInputError("partition does not cover the point set")
    bl.sort(key=lambda b: b[0])
    return SetPartition(width, tuple(bl))


def _check_point(p: SetPartition, i: int) -> None:
    if not 0 <= i < 2 * p.width:
        raise InvalidInputError(f"invalid point {i}")


def join(p: SetPartition, i: int, j: int) -> SetPartition:
    """Merge the blocks containing points ``i`` and ``j``."""
    _check_point(p, i)
    _check_point(p, j)
    bi, bj = p.block_of(i), p.block_of(j)
    if bi == bj:
        return p
    rest = [b for b in p.blocks if b not in (bi, bj)]
    return canonicalize(rest + [bi + bj], p.width)


def detach(p: SetPartition, i: int) -> tuple[SetPartition, int]:
    """Make point ``i`` a singleton.

    Returns the new partition and the exponent of ``Q`` in the weight:
    1 when ``i`` already was a singleton, 0 otherwise.
    """
    _check_point(p, i)
    b = p.block_of(i)
    if len(b) == 1:
        return p, 1
    rest = [x for x in p.blocks if x != b]
    return canonicalize(rest + [tuple(x for x in b if x != i), (i,)], p.width), 0


def set_partitions(n: int) -> Iterator[tuple[int, ...]]:
    """All set partitions of ``n`` points as restricted-growth strings."""
    cur: list[int] = []

    def rec(i: int, top: int) -> Iterator[tuple[int, ...]]:
        if i == n:
            yield tuple(cur)
            return
        for b in range(top + 2):
            cur.append(b)
            yield from rec(i + 1, max(top, b))
            cur.pop()

    yield from rec(0, -1)


def bell_number(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def default_bottom(width: int) -> tuple[tuple[int, ...], ...]:
    """All-singleton bottom pattern: the linked blocks are ``0'..(l-1)'``."""
    return tuple((i,) for i in range(width))


def _validate_bottom(width: int, bottom: Sequence[Sequence[int]], ell: int) -> tuple[tuple[int, ...], ...]:
    bl = tuple(sorted(tuple(sorted(b)) for b in bottom))
    if sorted(p for b in bl for p in b) != list(range(width)):
        raise InvalidInputError("bottom pattern must partition the bottom row")
    if not 0 <= ell <= len(bl):
        raise InvalidInputError(f"bottom pattern has {len(bl)} blocks, cannot carry {ell} links")
    return bl


def enumerate_states(
    width: int, ell: int, bottom: Sequence[Sequence[int]] | None = None
) -> list[SetPartition]:
    """States with exactly ``ell`` links and the given bottom pattern.

    The linked bottom blocks are the first ``ell`` blocks of ``bottom`` (in
    canonical order); the remaining bottom blocks are isolated.  Ordering is
    deterministic: by top partition, then by the assignment of bottom blocks.
    """
    if bottom is None:
        bottom = default_bottom(width)
    bl = _validate_bottom(width, bottom, ell)
    out = []
    for rgs, lab in labeled_states(width, ell):
        out.append(labeled_to_partition(rgs, lab, bl))
    return out


def labeled_to_partition(
    rgs: Sequence[int], lab: Sequence[int], bottom: Sequence[Sequence[int]]
) -> SetPartition:
    w = len(rgs)
    nb = max(rgs) + 1 if w else 0
    blocks: list[list[int]] = [[] for _ in range(nb)]
    for i, b in enumerate(rgs):
        blocks[b].append(i)
    extra = []
    used = set()
    for b in range(nb):
        if lab[b] >= 0:
            blocks[b].extend(w + x for x in bottom[lab[b]])
            used.add(lab[b])
    for j, bb in enumerate(bottom):
        if j not in used:
            extra.append([w + x for x in bb])
    return canonicalize(blocks + extra, w)


def partition_to_labeled(
    p: SetPartition, bottom: Sequence[Sequence[int]], ell: int
) -> Labeled:
    """Inverse of :func:`labeled_to_partition` for states in the ell-link space."""
    w = p.width
    bl = _validate_bottom(w, bottom, ell)
    where = {}
    for j, bb in enumerate(bl):
        where[w + bb[0]] = j
    top_blocks = [b for b in p.blocks if b[0] < w]
    rgs = [0] * w
    lab = []
    for idx, b in enumerate(top_blocks):
        l = -1
        for x in b:
            if x < w:
                rgs[x] = idx
            elif x in where:
                l = where[x]
        if l >= ell:
            raise InvalidInputError("state links a bottom block outside the linked set")
        lab.append(l)
    return tuple(rgs), tuple(lab)


# ---------------------------------------------------------------------------
# Link-labelled states: the fast encoding used by the transfer kernels
# ---------------------------------------------------------------------------


def _renormalize(blk: Sequence[int], lab: dict[int, int]) -> Labeled:
    mp: dict[int, int] = {}
    new = []
    for b in blk:
        if b not in mp:
            mp[b] = len(mp)
        new.append(mp[b])
    out = [-1] * len(mp)
    for old, nw in mp.items():
        out[nw] = lab.get(old, -1)
    return tuple(new), tuple(out)


def labeled_states(width: int, ell: int) -> list[Labeled]:
    """Every top partition with every labelled choice of ``ell`` linked blocks."""
    out = []
    for blk in set_partitions(width):
        nb = max(blk) + 1
        for chosen in itertools.permutations(range(nb), ell):
            lab = [-1] * nb
            for j, b in enumerate(chosen):
                lab[b] = j
            out.append((blk, tuple(lab)))
    return out


def orbit_representatives(width: int, ell: int) -> list[Labeled]:
    """One labelled state per S_ell orbit: labels increase with block index."""
    out = []
    for blk in set_partitions(width):
        nb = max(blk) + 1
        for chosen in itertools.combinations(range(nb), ell):
            lab = [-1] * nb
            for j, b in enumerate(chosen):
                lab[b] = j
            out.append((blk, tuple(lab)))
    return out


def orbit_count(width: int, ell: int) -> int:
    """Number of orbit representatives: sum over top partitions of C(blocks, ell)."""
    return sum(math.comb(max(b) + 1, ell) for b in set_partitions(width))


def split_orbit(state: Labeled) -> tuple[Labeled, Perm]:
    """Write a labelled state as ``sigma . rep``.

    ``sigma[j]`` is the label found on the ``j``-th linked block, so relabelling
    the representative by ``sigma`` gives back ``state``.
    """
    blk, lab = state
    sigma = tuple(l for l in lab if l >= 0)
    cnt = 0
    rep = []
    for l in lab:
        if l >= 0:
            rep.append(cnt)
            cnt += 1
        else:
            rep.append(-1)
    return (blk, tuple(rep)), sigma


def relabel(state: Labeled, sigma: Perm) -> Labeled:
    blk, lab = state
    return blk, tuple(sigma[l] if l >= 0 else -1 for l in lab)


def labeled_join(state: Labeled, i: int, j: int) -> Labeled | None:
    """Join two top points; ``None`` when two links would fuse (link lost)."""
    blk, lab = state
    bi, bj = blk[i], blk[j]
    if bi == bj:
        return state
    if lab[bi] >= 0 and lab[bj] >= 0:
        return None
    d = dict(enumerate(lab))
    d[bi] = max(lab[bi], lab[bj])
    return _renormalize([bi if b == bj else b for b in blk], d)


def labeled_detach(state: Labeled, i: int) -> tuple[Labeled, int] | None:
    """Detach top point ``i``; returns (state, Q-exponent) or ``None`` if a link is lost."""
    blk, lab = state
    b = blk[i]
    if blk.count(b) == 1:
        if lab[b] >= 0:
            return None
        return state, 1
    nb = len(lab)
    d = dict(enumerate(lab))
    d[nb] = -1
    new = list(blk)
    new[i] = nb
    return _renormalize(new, d), 0


def link_count_labeled(state: Labeled) -> int:
    return sum(1 for l in state[1] if l >= 0)


# ---------------------------------------------------------------------------
# Permutations
# ---------------------------------------------------------------------------


def compose(p: Perm, q: Perm) -> Perm:
    """``(p o q)(j) = p[q[j]]``."""
    return tuple(p[x] for x in q)


def inverse(p: Perm) -> Perm:
    out = [0] * len(p)
    for i, x in enumerate(p):
        out[x] = i
    return tuple(out)


def sign(p: Perm) -> int:
    s = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if not seen[i]:
            j, c = i, 0
            while not seen[j]:
                seen[j] = True
                j = p[j]
                c += 1
            if c % 2 == 0:
                s = -s
    return s


def cycle_type(p: Perm) -> tuple[int, ...]:
    seen = [False] * len(p)
    out = []
    for i in range(len(p)):
        if not seen[i]:
            j, c = i, 0
            while not seen[j]:
                seen[j] = True
                j = p[j]
                c += 1
            out.append(c)
    return tuple(sorted(out, reverse=True))


@lru_cache(maxsize=None)
def permutations(n: int) -> tuple[Perm, ...]:
    return tuple(itertools.permutations(range(n)))


# ---------------------------------------------------------------------------
# Young diagrams, dimensions and characters
# ---------------------------------------------------------------------------


YoungDiagram = tuple[int, ...]


def validate_diagram(lam: Sequence[int]) -> YoungDiagram:
    lam = tuple(int(x) for x in lam)
    if any(x <= 0 for x in lam) or any(a < b for a, b in zip(lam, lam[1:])):
        raise InvalidInputError(f"not a Young diagram: {lam}")
    return lam


def young_diagrams(n: int) -> list[YoungDiagram]:
    """Integer partitions of ``n`` in reverse lexicographic order, (n) first."""

    def rec(rem: int, mx: int) -> Iterator[YoungDiagram]:
        if rem == 0:
            yield ()
            return
        for p in range(min(rem, mx), 0, -1):
            for r in rec(rem - p, p):
                yield (p,) + r

    return list(rec(n, n))


def conjugate(lam: Sequence[int]) -> YoungDiagram:
    if not lam:
        return ()
    return tuple(sum(1 for r in lam if r > j) for j in range(lam[0]))


def irrep_dimension(lam: Sequence[int]) -> int:
    """Hook-length formula."""
    lam = validate_diagram(lam)
    cols = conjugate(lam)
    hooks = 1
    for i, r in enumerate(lam):
        for j in range(r):
            hooks *= (r - j - 1) + (cols[j] - i - 1) + 1
    return math.factorial(sum(lam)) // hooks


def standard_tableaux(lam: Sequence[int]) -> list[tuple[tuple[int, ...], ...]]:
    """Enumerate standard Young tableaux of shape ``lam`` (entries 0..n-1)."""
    lam = validate_diagram(lam)
    n = sum(lam)
    rows: list[list[int]] = [[] for _ in lam]
    out = []

    def rec(x: int) -> None:
        if x == n:
            out.append(tuple(tuple(r) for r in rows))
            return
        for i, r in enumerate(lam):
            if len(rows[i]) < r and (i == 0 or len(rows[i - 1]) > len(rows[i])):
                rows[i].append(x)
                rec(x + 1)
                rows[i].pop()

    rec(0)
    return out


@lru_cache(maxsize=None)
def character(lam: YoungDiagram, mu: tuple[int, ...]) -> int:
    """Murnaghan-Nakayama rule: chi_lam on cycle type ``mu``."""
    if not mu:
        return 1 if sum(lam) == 0 else 0
    r, rest = mu[0], mu[1:]
    # Work on the beta-set (first-column hook lengths) representation.
    m = len(lam)
    beta = [lam[i] + (m - 1 - i) for i in range(m)]
    total = 0
    bs = set(beta)
    for b in beta:
        nb = b - r
        if nb < 0 or nb in bs:
            continue
        height = sum(1 for c in beta if nb < c < b)
        new = sorted((c if c != b else nb) for c in beta)[::-1]
        mm = len(new)
        shape = tuple(x for x in (new[i] - (mm - 1 - i) for i in range(mm)) if x > 0)
        total += (-1) ** height * character(shape, rest)
    return total


def character_of(lam: Sequence[int], sigma: Perm) -> int:
    return character(tuple(lam), cycle_type(sigma))


# ---------------------------------------------------------------------------
# Integral irreducible representations
# ---------------------------------------------------------------------------


def young_symmetrizer(lam: Sequence[int]) -> dict[Perm, int]:
    """Row symmetrizer times column antisymmetrizer of the row-reading tableau."""
    lam = validate_diagram(lam)
    n = sum(lam)
    rows, c = [], 0
    for r in lam:
        rows.append(list(range(c, c + r)))
        c += r
    cols = [[rows[i][j] for i in range(len(lam)) if j < lam[i]] for j in range(lam[0])] if n else []

    def stabilizer(groups: list[list[int]]) -> list[Perm]:
        out = [tuple(range(n))]
        for g in groups:
            perms_g = []
            for img in itertools.permutations(g):
                m = list(range(n))
                for a, b in zip(g, img):
                    m[a] = b
                perms_g.append(tuple(m))
            out = [compose(a, b) for a in out for b in perms_g]
        return out

    e: dict[Perm, int] = {}
    for r in stabilizer(rows):
        for q in stabilizer(cols):
            g = compose(r, q)
            e[g] = e.get(g, 0) + sign(q)
    return {g: c for g, c in e.items() if c}


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Solve a square nonsingular rational system by Gauss-Jordan."""
    n = len(rows)
    a = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next(i for i in range(col, n) if a[i][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for i in range(n):
            if i != col and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[col])]
    return [a[i][n] for i in range(n)]


@lru_cache(maxsize=None)
def irrep_matrices(lam: YoungDiagram) -> dict[Perm, tuple[tuple[Fraction, ...], ...]]:
    """Matrices of the irrep ``lam`` on the left ideal ``C[S_n] e_lam``.

    The basis is ``sigma . e_lam`` for the first permutations (lexicographic)
    that extend a linearly independent set; ``rho(tau)`` expresses
    ``tau sigma e_lam`` in that basis.  ``rho`` is a homomorphism:
    ``rho(p o q) = rho(p) rho(q)``.
    """
    lam = validate_diagram(lam)
    n = sum(lam)
    d = irrep_dimension(lam)
    perms = permutations(n)
    if n == 0:
        return {(): ((Fraction(1),),)}
    e = young_symmetrizer(lam)

    def left(sig: Perm) -> dict[Perm, int]:
        return {compose(sig, g): c for g, c in e.items()}

    # Greedy basis with incremental elimination on sparse vectors.
    basis_perm: list[Perm] = []
    reduced: list[tuple[Perm, dict[Perm, Fraction]]] = []
    for sig in perms:
        vec = {g: Fraction(c) for g, c in left(sig).items()}
        for piv, r in reduced:
            f = vec.get(piv)
            if f:
                for g, c in r.items():
                    nv = vec.get(g, 0) - f * c
                    if nv:
                        vec[g] = nv
                    else:
                        vec.pop(g, None)
        if vec:
            piv = min(vec)
            inv = 1 / vec[piv]
            vec = {g: c * inv for g, c in vec.items()}
            for _, r in reduced:
                f = r.get(piv)
                if f:
                    for g, c in vec.items():
                        nv = r.get(g, 0) - f * c
                        if nv:
                            r[g] = nv
                        else:
                            r.pop(g, None)
            reduced.append((piv, vec))
            basis_perm.append(sig)
            if len(basis_perm) == d:
                break
    pivots = [p for p, _ in reduced]
    bvecs = [left(s) for s in basis_perm]
    sysrows = [[Fraction(bvecs[j].get(p, 0)) for j in range(d)] for p in pivots]
    rho = {}
    for tau in perms:
        cols = []
        for s in basis_perm:
            img = left(compose(tau, s))
            cols.append(_solve_exact(sysrows, [Fraction(img.get(p, 0)) for p in pivots]))
        rho[tau] = tuple(tuple(cols[j][i] for j in range(d)) for i in range(d))
    return rho


def irrep_is_integral(lam: YoungDiagram) -> bool:
    return all(x.denominator == 1 for m in irrep_matrices(tuple(lam)).values() for r in m for x in r)


# ---------------------------------------------------------------------------
# Symmetrized bases on the state space
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymmetrizedBasis:
    """Basis of an S_ell-symmetry-adapted subspace of the ell-link states.

    ``vectors[i]`` maps state indices (into ``states``) to exact rationals.
    ``copies`` is the number of irrep copies spanned; ``one_copy`` tells
    whether the span keeps a single copy of every block eigenvalue.
    """

    width: int
    ell: int
    lam: YoungDiagram
    states: tuple[SetPartition, ...]
    vectors: tuple[dict[int, Fraction], ...]
    one_copy: bool

    @property
    def dimension(self) -> int:
        return len(self.vectors)


def _permute_state(p: SetPartition, sigma: Perm, bottom: Sequence[Sequence[int]]) -> SetPartition:
    """Act on the linked bottom blocks: block ``j`` goes to block ``sigma[j]``."""
    ell = len(sigma)
    rgs, lab = partition_to_labeled(p, bottom, ell)
    return labeled_to_partition(rgs, tuple(sigma[l] if l >= 0 else -1 for l in lab), bottom)


def _column_reduce(vectors: list[dict[int, Fraction]]) -> list[dict[int, Fraction]]:
    """Independent spanning subset of sparse rational vectors (kept unreduced)."""
    reduced: list[tuple[int, dict[int, Fraction]]] = []
    out = []
    for v in vectors:
        w = dict(v)
        for piv, r in reduced:
            f = w.get(piv)
            if f:
                for g, c in r.items():
                    nv = w.get(g, 0) - f * c
                    if nv:
                        w[g] = nv
                    else:
                        w.pop(g, None)
        if w:
            piv = min(w)
            inv = 1 / w[piv]
            reduced.append((piv, {g: c * inv for g, c in w.items()}))
            out.append(v)
    return out


def symmetrized_basis(
    width: int,
    ell: int,
    lam: Sequence[int],
    one_copy: bool = True,
    bottom: Sequence[Sequence[int]] | None = None,
) -> SymmetrizedBasis:
    """Symmetry-adapted basis of the ell-link states for the irrep ``lam``.

    With ``one_copy=False`` this is the full isotypic component, obtained from
    the character projector ``(dim/ell!) sum chi(s) s`` and column reduction.
    With ``one_copy=True`` the isotypic component is cut down to a single copy
    by the Young symmetrizer, so the transfer matrix restricted to the span
    carries each block eigenvalue once.
    """
    lam = validate_diagram(lam) if lam else ()
    if sum(lam) != ell:
        raise InvalidInputError("diagram size must equal the link count")
    if bottom is None:
        bottom = default_bottom(width)
    bl = _validate_bottom(width, bottom, ell)
    states = enumerate_states(width, ell, bl)
    index = {s: i for i, s in enumerate(states)}
    perms = permutations(ell)
    if one_copy:
        op = {g: Fraction(c) for g, c in young_symmetrizer(lam).items()} if ell else {(): Fraction(1)}
    else:
        d = irrep_dimension(lam) if ell else 1
        f = Fraction(d, math.factorial(ell))
        op = {g: f * character_of(lam, g) for g in perms} if ell else {(): Fraction(1)}
        op = {g: c for g, c in op.items() if c}
    images = []
    for s in states:
        vec: dict[int, Fraction] = {}
        for g, c in op.items():
            t = index[_permute_state(s, g, bl)]
            vec[t] = vec.get(t, 0) + c
        vec = {t: c for t, c in vec.items() if c}
        if vec:
            images.append(vec)
    vecs = _column_reduce(images)
    return SymmetrizedBasis(width, ell, tuple(lam), tuple(states), tuple(vecs), one_copy)


def permutation_trace_on_span(basis: SymmetrizedBasis, sigma: Perm,
                              bottom: Sequence[Sequence[int]] | None = None) -> Fraction:
    """Trace of the link permutation ``sigma`` restricted to an invariant span."""
    if bottom is None:
        bottom = default_bottom(basis.width)
    bl = _validate_bottom(basis.width, bottom, basis.ell)
    index = {s: i for i, s in enumerate(basis.states)}
    images = []
    for v in basis.vectors:
        w: dict[int, Fraction] = {}
        for t, c in v.items():
            u = index[_permute_state(basis.states[t], sigma, bl)]
            w[u] = w.get(u, 0) + c
        images.append(w)
    coords = express_in_span(basis.vectors, images)
    return sum(coords[i][i] for i in range(len(coords)))


def express_in_span(
    basis: Sequence[dict[int, Fraction]], targets: Sequence[dict[int, Fraction]]
) -> list[list[Fraction]]:
    """Coordinates ``c[j][i]`` with ``targets[j] = sum_i c[j][i] basis[i]``.

    Raises if a target is not in the span.
    """
    d = len(basis)
    # Reduce basis to echelon form while tracking the transformation.
    rows = [(dict(v), {i: Fraction(1)}) for i, v in enumerate(basis)]
    echelon: list[tuple[int, dict[int, Fraction], dict[int, Fraction]]] = []
    for vec, tr in rows:
        for piv, r, rt in echelon:
            f = vec.get(piv)
            if f:
                for g, c in r.items():
                    nv = vec.get(g, 0) - f * c
                    if nv:
                        vec[g] = nv
                    else:
                        vec.pop(g, None)
                for g, c in rt.items():
                    nv = tr.get(g, 0) - f * c
                    if nv:
                        tr[g] = nv
                    else:
                        tr.pop(g, None)
        if not vec:
            raise InvalidInputError("basis vectors are linearly dependent")
        piv = min(vec)
        inv = 1 / vec[piv]
        echelon.append((piv, {g: c * inv for g, c in vec.items()}, {g: c * inv for g, c in tr.items()}))
    out = []
    for t in targets:
        vec = dict(t)
        coeff = [Fraction(0)] * d
        for piv, r, rt in echelon:
            f = vec.get(piv)
            if f:
                for g, c in r.items():
                    nv = vec.get(g, 0) - f * c
                    if nv:
                        vec[g] = nv
                    else:
                        vec.pop(g, None)
                for g, c in rt.items():
                    coeff[g] += f * c
        if vec:
            raise InvalidInputError("target vector is outside the span")
        out.append(coeff)
    return out
