"""Sector and irrep decomposition of the FK transfer matrix.

The transfer matrix acts on set partitions of the top row ``0..w-1`` and the
bottom row.  Joins and detaches never create links, so it is block triangular
in the number ``ell`` of links; only the diagonal blocks matter for the
partition function.  Inside the ``ell``-link sector, S_ell permutes the link
labels freely, so the sector is a free ``C[S_ell]``-module on the orbit
representatives (labels increasing with block index).  Writing

    T r_b = sum_{a, s} t_ab(s) s . r_a

every irrep ``lam`` gives a block ``[rho_lam(t_ab)^T]`` of dimension
``(#orbits) * dim(lam)`` that carries each eigenvalue once.  The map from a
factor sequence to blocks is multiplicative, which is what the numeric path
uses; the exact path propagates orbit representatives through the factors with
polynomial weights packed into big integers.

For the Petersen family the trivial eigenvalue ``v^(2k)`` is split off using
the left eigenvectors of the block, which turn out to be independent of
``(Q, v)``; the remainder is the restriction to their common kernel.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import partitions as pt
from .errors import DependencyError, InvalidInputError, ResourceLimitError
from .graphs import petersen_operator_sequence, slab_operator_sequence
from .poly import BivarPoly, LineSpec, PolyMatrix, UniPoly, specialize, trace_of_power

Sector = tuple[int, tuple[int, ...]]


# ---------------------------------------------------------------------------
# Factor sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorSequence:
    """Operators of one layer in application order (first applied first)."""

    family: str
    size: int
    width: int
    ops: tuple[tuple, ...]
    trivial_v_degree: int

    def written_order(self) -> list[str]:
        """Product as printed, leftmost factor first (rightmost acts first)."""
        names = []
        for op in reversed(self.ops):
            names.append(f"V_{op[1]}" if op[0] == "V" else f"H_{op[1]}{op[2]}")
        return names

    @property
    def v_factor_count(self) -> int:
        return sum(1 for op in self.ops if op[0] == "V")


def build_full_T(k: int) -> FactorSequence:
    """Factor sequence of G(nk, k): V_0..V_k, then H_0k, V_0, H_0(k-1), ..., V_0, H_01."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    return FactorSequence("petersen", k, k + 1, tuple(petersen_operator_sequence(k)), 2 * k)


def build_full_T_slab(L: int = 2) -> FactorSequence:
    """Factor sequence of Sc(L, n): all horizontal joins, then the L^2 vertical steps."""
    if L < 1:
        raise InvalidInputError("L must be >= 1")
    return FactorSequence("slab", L, L * L, tuple(slab_operator_sequence(L)), L * L)


def factor_sequence(family: str, k: int) -> FactorSequence:
    if family == "petersen":
        return build_full_T(k)
    if family == "slab":
        return build_full_T_slab(k)
    raise InvalidInputError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# Sector spaces and one-step transitions
# ---------------------------------------------------------------------------


@dataclass
class SectorSpace:
    width: int
    ell: int
    reps: list[pt.Labeled]
    index: dict[pt.Labeled, int]
    perms: tuple[pt.Perm, ...]
    perm_index: dict[pt.Perm, int]
    mult: np.ndarray  # mult[i, j] = index of perms[i] o perms[j]

    @property
    def orbit_count(self) -> int:
        return len(self.reps)


@lru_cache(maxsize=None)
def sector_space(width: int, ell: int) -> SectorSpace:
    reps = pt.orbit_representatives(width, ell)
    perms = pt.permutations(ell)
    pidx = {p: i for i, p in enumerate(perms)}
    mult = np.array([[pidx[pt.compose(a, b)] for b in perms] for a in perms], dtype=np.int32).reshape(len(perms), len(perms))
    return SectorSpace(width, ell, reps, {r: i for i, r in enumerate(reps)}, perms, pidx, mult)


def apply_op_labeled(state: pt.Labeled, op: tuple) -> list[tuple[pt.Labeled, int, int]]:
    """Image of a labelled state: list of (state, Q-degree, v-degree); link losses dropped."""
    if op[0] == "V":
        out = [(state, 0, 1)]
        r = pt.labeled_detach(state, op[1])
        if r is not None:
            out.append((r[0], r[1], 0))
        return out
    out = [(state, 0, 0)]
    r = pt.labeled_join(state, op[1], op[2])
    if r is not None:
        out.append((r, 0, 1))
    return out


@dataclass
class SectorTransitions:
    """Per operator and orbit representative: list of (target, perm, dq, dv)."""

    space: SectorSpace
    ops: tuple[tuple, ...]
    table: list[list[list[tuple[int, int, int, int]]]]


@lru_cache(maxsize=None)
def _transitions_cached(width: int, ops: tuple[tuple, ...], ell: int) -> SectorTransitions:
    sp_ = sector_space(width, ell)
    table = []
    for op in ops:
        rows = []
        for rep in sp_.reps:
            lst = []
            for st, dq, dv in apply_op_labeled(rep, op):
                r2, tau = pt.split_orbit(st)
                lst.append((sp_.index[r2], sp_.perm_index[tau], dq, dv))
            rows.append(lst)
        table.append(rows)
    return SectorTransitions(sp_, ops, table)


def sector_transitions(seq: FactorSequence, ell: int) -> SectorTransitions:
    return _transitions_cached(seq.width, seq.ops, ell)


# ---------------------------------------------------------------------------
# Exact group-algebra matrix
# ---------------------------------------------------------------------------


@dataclass
class GroupAlgebraMatrix:
    """``coeff[(a, b)][s]``: coefficient of ``perms[s] . r_a`` in ``T r_b``."""

    space: SectorSpace
    coeff: dict[tuple[int, int], dict[int, BivarPoly]]


def group_algebra_matrix(seq: FactorSequence, ell: int) -> GroupAlgebraMatrix:
    """Propagate every orbit representative through the layer exactly.

    Weights are monomials with coefficient 1, so every coefficient of the
    result counts paths and is at most ``2^(#ops)``; slots of that many bits
    make the packed integer arithmetic exact.
    """
    tr = sector_transitions(seq, ell)
    space = tr.space
    B = len(seq.ops) + 2
    SQ = seq.v_factor_count + 1
    shifts = {}
    for rows in tr.table:
        for lst in rows:
            for _, _, dq, dv in lst:
                shifts[(dq, dv)] = B * (dq + SQ * dv)
    mult = space.mult
    coeff: dict[tuple[int, int], dict[int, BivarPoly]] = {}
    mask = (1 << B) - 1
    for b in range(space.orbit_count):
        vec: dict[tuple[int, int], int] = {(b, 0): 1}
        for rows in tr.table:
            nv: dict[tuple[int, int], int] = {}
            for (a, s), val in vec.items():
                for a2, t, dq, dv in rows[a]:
                    key = (a2, int(mult[s, t]))
                    nv[key] = nv.get(key, 0) + (val << shifts[(dq, dv)])
            vec = nv
        for (a, s), val in vec.items():
            terms = {}
            slot = 0
            while val:
                c = val & mask
                if c:
                    terms[(slot % SQ, slot // SQ)] = c
                val >>= B
                slot += 1
            coeff.setdefault((a, b), {})[s] = BivarPoly(terms)
    return GroupAlgebraMatrix(space, coeff)


def _rho_transposed(lam: tuple[int, ...], perms: Sequence[pt.Perm]) -> list[list[list[Fraction]]]:
    rho = pt.irrep_matrices(lam)
    return [[list(col) for col in zip(*rho[p])] for p in perms]


def irrep_block(gam: GroupAlgebraMatrix, lam: Sequence[int]) -> PolyMatrix:
    """``[rho_lam(t_ab)^T]``: dimension ``orbits * dim(lam)``."""
    lam = tuple(lam)
    space = gam.space
    d = pt.irrep_dimension(lam) if lam else 1
    rt = _rho_transposed(lam, space.perms)
    m = space.orbit_count
    out = PolyMatrix.zeros(m * d)
    for (a, b), per in gam.coeff.items():
        for s, poly in per.items():
            r = rt[s]
            for i in range(d):
                for j in range(d):
                    c = r[i][j]
                    if c:
                        out.rows[a * d + i][b * d + j] = out.rows[a * d + i][b * d + j] + poly * c
    return out


# ---------------------------------------------------------------------------
# Numeric blocks from the factor sequence
# ---------------------------------------------------------------------------


class NumericSector:
    """Sparse factor matrices of an irrep block; evaluation at complex (Q, v)."""

    def __init__(self, seq: FactorSequence, ell: int, lam: Sequence[int]):
        self.seq = seq
        self.ell = ell
        self.lam = tuple(lam)
        tr = sector_transitions(seq, ell)
        self.space = tr.space
        d = pt.irrep_dimension(self.lam) if self.lam else 1
        self.block_dim = d
        rt = _rho_transposed(self.lam, self.space.perms)
        self.dim = self.space.orbit_count * d
        self._structure = []
        for rows in tr.table:
            r_idx, c_idx, vals, dqs, dvs = [], [], [], [], []
            for a, lst in enumerate(rows):
                for a2, s, dq, dv in lst:
                    rho = rt[s]
                    for i in range(d):
                        for j in range(d):
                            c = rho[i][j]
                            if c:
                                r_idx.append(a2 * d + i)
                                c_idx.append(a * d + j)
                                vals.append(float(c))
                                dqs.append(dq)
                                dvs.append(dv)
            self._structure.append(
                (np.array(r_idx, dtype=np.intp), np.array(c_idx, dtype=np.intp), np.array(vals),
                 np.array(dqs, dtype=np.intp), np.array(dvs, dtype=np.intp))
            )

    def factors(self, Q: complex, v: complex) -> list[sp.csr_matrix]:
        qp = np.array([1.0, Q, Q * Q], dtype=complex)
        vp = np.array([1.0, v, v * v], dtype=complex)
        out = []
        for r, c, val, dq, dv in self._structure:
            data = val * qp[dq] * vp[dv]
            out.append(sp.csr_matrix((data, (r, c)), shape=(self.dim, self.dim)))
        return out

    def matrix(self, Q: complex, v: complex) -> np.ndarray:
        X = np.eye(self.dim, dtype=complex)
        for F in self.factors(Q, v):
            X = F @ X
        return np.asarray(X)

    def operator(self, Q: complex, v: complex):
        """``scipy.sparse.linalg.LinearOperator`` applying the factors right to left."""
        from scipy.sparse.linalg import LinearOperator

        fs = self.factors(Q, v)

        def mv(x: np.ndarray) -> np.ndarray:
            for F in fs:
                x = F @ x
            return x

        return LinearOperator((self.dim, self.dim), matvec=mv, dtype=complex)


@lru_cache(maxsize=64)
def numeric_sector(seq: FactorSequence, ell: int, lam: tuple[int, ...]) -> NumericSector:
    return NumericSector(seq, ell, lam)


# ---------------------------------------------------------------------------
# State-level checks (explicit partitions with a bottom row)
# ---------------------------------------------------------------------------


def apply_op_partition(p: pt.SetPartition, op: tuple) -> list[tuple[pt.SetPartition, int, int]]:
    """Image of a full top/bottom partition under one operator (no links dropped)."""
    if op[0] == "V":
        q, e = pt.detach(p, op[1])
        return [(p, 0, 1), (q, e, 0)]
    return [(p, 0, 0), (pt.join(p, op[1], op[2]), 0, 1)]


def check_triangularity(seq: FactorSequence, bottom: Sequence[Sequence[int]] | None = None) -> bool:
    """Every operator maps each ell-link state to states with at most ell links."""
    w = seq.width
    bl = bottom if bottom is not None else pt.default_bottom(w)
    for ell in range(len(bl) + 1):
        for s in pt.enumerate_states(w, ell, bl):
            for op in seq.ops:
                for img, _, _ in apply_op_partition(s, op):
                    if img.link_count > s.link_count:
                        return False
    return True


def state_level_block_at(
    seq: FactorSequence,
    ell: int,
    lam: Sequence[int],
    Q: Fraction,
    v: Fraction,
    bottom: Sequence[Sequence[int]] | None = None,
):
    """Exact block at a rational point, built on explicit states.

    The layer is applied to every ell-link state (bottom pattern fixed, lower
    sectors dropped) and restricted to the one-copy symmetrized basis.  Returns
    a FLINT rational matrix.
    """
    import flint

    basis = pt.symmetrized_basis(seq.width, ell, lam, one_copy=True, bottom=bottom)
    states = basis.states
    index = {s: i for i, s in enumerate(states)}
    Q, v = Fraction(Q), Fraction(v)
    images = []
    for vec in basis.vectors:
        cur: dict[pt.SetPartition, Fraction] = {}
        for i, c in vec.items():
            cur[states[i]] = cur.get(states[i], 0) + c
        for op in seq.ops:
            nxt: dict[pt.SetPartition, Fraction] = {}
            for s, c in cur.items():
                for img, dq, dv in apply_op_partition(s, op):
                    if img.link_count < ell:
                        continue
                    w = c * Q ** dq * v ** dv
                    if w:
                        nxt[img] = nxt.get(img, 0) + w
            cur = nxt
        images.append({index[s]: c for s, c in cur.items() if c})
    coords = pt.express_in_span(basis.vectors, images)
    d = len(basis.vectors)
    m = flint.fmpq_mat(d, d)
    for j, col in enumerate(coords):
        for i, c in enumerate(col):
            if c:
                m[i, j] = flint.fmpq(c.numerator, c.denominator)
    return m


# ---------------------------------------------------------------------------
# Amplitudes
# ---------------------------------------------------------------------------


def amplitude(ell: int, lam: Sequence[int]) -> UniPoly:
    """``(dim lam / ell!) prod_{i<ell} (Q - i - lam_{ell-i})`` with ``lam`` zero-padded."""
    lam = tuple(lam)
    if sum(lam) != ell:
        raise InvalidInputError("diagram size must equal ell")
    if ell == 0:
        return UniPoly([1])
    padded = list(lam) + [0] * (ell - len(lam))
    p = UniPoly([Fraction(pt.irrep_dimension(lam), math.factorial(ell))])
    for i in range(ell):
        p = p * UniPoly([-(i + padded[ell - 1 - i]), 1])
    return p


def beta(ell: int) -> UniPoly:
    """``sum_lam dim(lam) * alpha_{ell, lam}``."""
    acc = UniPoly()
    for lam in pt.young_diagrams(ell) if ell else [()]:
        acc = acc + amplitude(ell, lam) * (pt.irrep_dimension(lam) if lam else 1)
    return acc


# ---------------------------------------------------------------------------
# Blocks, trivial eigenvalue and the decomposition
# ---------------------------------------------------------------------------


@dataclass
class TransferBlock:
    family: str
    k: int
    ell: int
    lam: tuple[int, ...]
    matrix: PolyMatrix
    nontrivial: bool = False

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def sector(self) -> Sector:
        return (self.ell, self.lam)


def _random_point(rng: random.Random) -> tuple[Fraction, Fraction]:
    Q = Fraction(rng.randint(-97, 97), rng.randint(1, 13))
    v = Fraction(rng.randint(-97, 97), rng.randint(1, 13))
    if Q == 0:
        Q = Fraction(53, 7)
    if v in (0, 1, -1):
        v = Fraction(-31, 11)
    return Q, v


def _fmpq_to_fraction(x) -> Fraction:
    return Fraction(int(x.p), int(x.q))


def nullspace_fmpq(A) -> list[list[Fraction]]:
    """Right nullspace basis of a FLINT rational matrix, one vector per free column."""
    R, rank = A.rref()
    n = A.ncols()
    pivots = []
    for i in range(rank):
        pivots.append(next(j for j in range(n) if R[i, j] != 0))
    pset = set(pivots)
    out = []
    for f in range(n):
        if f in pset:
            continue
        x = [Fraction(0)] * n
        x[f] = Fraction(1)
        for i, p in enumerate(pivots):
            x[p] = -_fmpq_to_fraction(R[i, f])
        out.append(x)
    return out


def _rref_rows(rows: list[list[Fraction]]):
    import flint

    K = flint.fmpq_mat(len(rows), len(rows[0]), [flint.fmpq(x.numerator, x.denominator) for r in rows for x in r])
    R, rank = K.rref()
    return [[_fmpq_to_fraction(R[i, j]) for j in range(R.ncols())] for i in range(rank)]


def _left_kernel(block: PolyMatrix, trivial: BivarPoly, point: tuple[Fraction, Fraction]) -> list[list[Fraction]]:
    """Rows spanning the left kernel of ``M - t I`` at a rational point, in RREF."""
    import flint

    Q, v = point
    A = block.to_fmpq_mat(Q, v)
    t = Fraction(trivial.evaluate(Q, v))
    tq = flint.fmpq(t.numerator, t.denominator)
    for i in range(A.nrows()):
        A[i, i] = A[i, i] - tq
    rows = nullspace_fmpq(A.transpose())
    return _rref_rows(rows) if rows else []


def _left_eigen_identity(block: PolyMatrix, trivial: BivarPoly, rows: list[list[Fraction]]) -> bool:
    """Exact check that every row ``y`` satisfies ``y M = t y`` as polynomials."""
    d = block.dim
    for y in rows:
        for j in range(d):
            acc = BivarPoly()
            for i in range(d):
                if y[i] and block.rows[i][j]:
                    acc = acc + block.rows[i][j] * y[i]
            if acc != trivial * y[j]:
                return False
    return True


def extract_trivial(block: TransferBlock, trivial: BivarPoly, seed: int = 1729) -> tuple[int, TransferBlock]:
    """Split off the trivial eigenvalue ``t`` from a block.

    The left eigenvectors of ``t`` are computed at a random rational point and
    certified as exact polynomial identities; their common kernel ``U`` is then
    an invariant subspace with a constant basis, and the remainder block is the
    restriction of the block to ``U``.  Repeated until the remainder's
    characteristic polynomial is no longer divisible by ``x - t`` at random
    points.  Returns (multiplicity, remainder block).
    """
    rng = random.Random(seed + 97 * block.ell + 13 * len(block.lam))
    M = block.matrix
    total = 0
    for _ in range(M.dim + 1):
        if M.dim == 0:
            break
        rows = []
        for _attempt in range(4):
            rows = _left_kernel(M, trivial, _random_point(rng))
            if not rows or _left_eigen_identity(M, trivial, rows):
                break
        else:
            raise InvalidInputError(
                f"left eigenvectors of the trivial eigenvalue depend on (Q, v) in block {block.sector}"
            )
        if not rows:
            break
        total += len(rows)
        M = _restrict_to_kernel(M, rows)
    if M.dim and _has_trivial_root(M, trivial, rng):
        raise InvalidInputError(f"trivial eigenvalue left in remainder of block {block.sector}")
    return total, TransferBlock(block.family, block.k, block.ell, block.lam, M, True)


def _restrict_to_kernel(M: PolyMatrix, rows: list[list[Fraction]]) -> PolyMatrix:
    """Restriction to ``{x : L x = 0}`` for ``L`` in RREF (constant rational)."""
    d = M.dim
    pivots = []
    for r in rows:
        pivots.append(next(j for j, x in enumerate(r) if x))
    free = [j for j in range(d) if j not in set(pivots)]
    # basis u_f: u_f[f] = 1, u_f[p_i] = -L[i][f]
    out = PolyMatrix.zeros(len(free))
    for a, g in enumerate(free):
        Mg = M.rows[g]
        for b, f in enumerate(free):
            acc = Mg[f]
            for i, p in enumerate(pivots):
                c = rows[i][f]
                if c and Mg[p]:
                    acc = acc - Mg[p] * c
            out.rows[a][b] = acc
    return out


def _has_trivial_root(M: PolyMatrix, trivial: BivarPoly, rng: random.Random, points: int = 2) -> bool:
    import flint

    for _ in range(points):
        Q, v = _random_point(rng)
        cp = M.to_fmpq_mat(Q, v).charpoly()
        t = Fraction(trivial.evaluate(Q, v))
        if cp(flint.fmpq(t.numerator, t.denominator)) != 0:
            return False
    return True


@dataclass
class TransferDecomposition:
    family: str
    k: int
    width: int
    trivial: BivarPoly
    blocks: dict[Sector, TransferBlock]
    nontrivial: dict[Sector, TransferBlock]
    trivial_multiplicity: dict[Sector, int]
    amplitudes: dict[Sector, UniPoly]
    missing: list[Sector] = field(default_factory=list)

    def sectors(self) -> list[Sector]:
        return list(self.blocks)

    def reduced_top_block(self) -> TransferBlock | None:
        """Nontrivial part of the completely symmetric block with ``ell = k``."""
        if self.family != "petersen":
            return None
        return self.nontrivial.get((self.k, (self.k,)))

    def beta(self, ell: int) -> UniPoly:
        return beta(ell)

    def gamma(self) -> UniPoly:
        return gamma(self)

    def factor_sequence(self) -> FactorSequence:
        return factor_sequence(self.family, self.k)


def gamma(dec: TransferDecomposition) -> UniPoly:
    """Net amplitude of the trivial eigenvalue: ``sum alpha_{ell, lam} dim D_{ell, lam}``.

    For the Petersen family the all-link sector is entirely trivial and
    contributes ``beta_{k+1}``, so this is ``beta_{k+1}`` plus the ``ell <= k``
    multiplicities.
    """
    if not dec.trivial_multiplicity or any(s not in dec.trivial_multiplicity for s in dec.blocks):
        raise DependencyError("trivial multiplicities missing; run extract_trivial first")
    acc = UniPoly()
    for s, mult in dec.trivial_multiplicity.items():
        if mult:
            acc = acc + dec.amplitudes[s] * mult
    return acc


def _source_digest() -> str:
    h = hashlib.sha256()
    here = Path(__file__).parent
    for name in ("partitions.py", "transfer.py", "poly.py", "graphs.py"):
        h.update((here / name).read_bytes())
    return h.hexdigest()[:12]


def cache_dir(explicit: str | os.PathLike | None = None) -> Path | None:
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get("POTTSTM_CACHE_DIR")
    return Path(env) if env else None


def _cache_path(root: Path, family: str, k: int, ell: int, lam: tuple[int, ...]) -> Path:
    tag = "-".join(map(str, lam)) or "0"
    return root / f"{family}-k{k}-{_source_digest()}" / f"block-l{ell}-{tag}.json"


def _save_block(path: Path, blk: TransferBlock, nt: TransferBlock, mult: int) -> None:
    payload = {
        "family": blk.family,
        "k": blk.k,
        "ell": blk.ell,
        "lam": list(blk.lam),
        "basis": "orbit representatives x one-copy irrep basis (Young symmetrizer ideal)",
        "trivial_multiplicity": mult,
        "matrix": blk.matrix.to_json_obj(),
        "nontrivial": nt.matrix.to_json_obj(),
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps({"sha256": hashlib.sha256(body.encode()).hexdigest(), "payload": body}))
    tmp.replace(path)


def _load_block(path: Path) -> tuple[TransferBlock, TransferBlock, int] | None:
    try:
        outer = json.loads(path.read_text())
        body = outer["payload"]
        if hashlib.sha256(body.encode()).hexdigest() != outer["sha256"]:
            return None
        p = json.loads(body)
    except (OSError, ValueError, KeyError):
        return None
    lam = tuple(p["lam"])
    blk = TransferBlock(p["family"], p["k"], p["ell"], lam, PolyMatrix.from_json_obj(p["matrix"]))
    nt = TransferBlock(p["family"], p["k"], p["ell"], lam, PolyMatrix.from_json_obj(p["nontrivial"]), True)
    return blk, nt, int(p["trivial_multiplicity"])


def block_decompose(
    k: int,
    family: str = "petersen",
    cache: str | os.PathLike | None = None,
    max_orbits: int = 2000,
) -> TransferDecomposition:
    """All blocks ``T_{ell, lam}`` with trivial parts split off.

    ``k`` is the Petersen step (width ``k + 1``) or the slab side ``L``.
    Sectors whose orbit count exceeds ``max_orbits`` are skipped and listed in
    ``missing``.
    """
    seq = factor_sequence(family, k)
    if not check_triangularity_fast(seq):
        raise AssertionError("transfer matrix is not link-triangular")
    trivial = BivarPoly.monomial(0, seq.trivial_v_degree)
    root = cache_dir(cache)
    blocks: dict[Sector, TransferBlock] = {}
    nts: dict[Sector, TransferBlock] = {}
    mults: dict[Sector, int] = {}
    amps: dict[Sector, UniPoly] = {}
    missing: list[Sector] = []
    for ell in range(seq.width + 1):
        lams = pt.young_diagrams(ell) if ell else [()]
        if pt.orbit_count(seq.width, ell) > max_orbits:
            missing += [(ell, lam) for lam in lams]
            continue
        gam = None
        for lam in lams:
            key = (ell, lam)
            amps[key] = amplitude(ell, lam)
            loaded = _load_block(_cache_path(root, family, k, ell, lam)) if root else None
            if loaded is None:
                if gam is None:
                    gam = group_algebra_matrix(seq, ell)
                blk = TransferBlock(family, k, ell, lam, irrep_block(gam, lam))
                mult, nt = extract_trivial(blk, trivial)
                if root:
                    _save_block(_cache_path(root, family, k, ell, lam), blk, nt, mult)
            else:
                blk, nt, mult = loaded
            blocks[key], nts[key], mults[key] = blk, nt, mult
    return TransferDecomposition(family, k, seq.width, trivial, blocks, nts, mults, amps, missing)


def check_triangularity_fast(seq: FactorSequence) -> bool:
    """Link count never increases under the labelled operators (all sectors)."""
    for ell in range(seq.width + 1):
        for st in pt.labeled_states(seq.width, ell) if math.factorial(ell) <= 24 else pt.orbit_representatives(seq.width, ell):
            for op in seq.ops:
                for img, _, _ in apply_op_labeled(st, op):
                    if pt.link_count_labeled(img) > ell:
                        return False
    return True


# ---------------------------------------------------------------------------
# Partition function assembly
# ---------------------------------------------------------------------------


def _amp_bivar(p: UniPoly) -> BivarPoly:
    return BivarPoly.from_univariate_q(p)


def assemble_Z(dec: TransferDecomposition, n: int, reduced: bool = False) -> BivarPoly:
    """Exact ``Z`` of G(nk, k) (or Sc(L, n)).

    ``reduced=False``: sum of amplitudes times traces of the full blocks.
    ``reduced=True``: nontrivial blocks plus ``gamma * t^n`` for the trivial
    eigenvalue ``t``.
    """
    if dec.missing:
        raise ResourceLimitError(f"decomposition is missing sectors {dec.missing}")
    Z = BivarPoly()
    src = dec.nontrivial if reduced else dec.blocks
    for s, blk in src.items():
        if blk.dim == 0:
            continue
        Z = Z + _amp_bivar(dec.amplitudes[s]) * trace_of_power(blk.matrix, n)
    if reduced:
        Z = Z + _amp_bivar(gamma(dec)) * dec.trivial ** n
    return Z


def assemble_on_line(dec: TransferDecomposition, n: int, line: LineSpec) -> UniPoly:
    """``Z`` restricted to a line, computed from line-specialized nontrivial blocks."""
    if dec.missing:
        raise ResourceLimitError(f"decomposition is missing sectors {dec.missing}")

    def amp_on_line(p: UniPoly) -> UniPoly:
        if line.kind == "v_affine":
            return p
        return UniPoly([c * line.c ** i for i, c in enumerate(p.coeffs)])

    total = UniPoly()
    for s, blk in dec.nontrivial.items():
        if blk.dim == 0:
            continue
        tr = trace_of_power(blk.matrix.specialize(line), n)
        total = total + amp_on_line(dec.amplitudes[s]) * UniPoly([tr.coefficient(i, 0) for i in range(tr.deg_q + 1)])
    triv = specialize(dec.trivial ** n, line)
    return total + amp_on_line(gamma(dec)) * triv


# ---------------------------------------------------------------------------
# Eigenvalue census: distinct eigenvalues and coincidence classes
# ---------------------------------------------------------------------------


@dataclass
class EigenvalueClass:
    """Eigenvalues sharing one irreducible factor of the block char polys.

    ``members`` maps sector to multiplicity (for the trivial class the keys are
    the sectors with trivial multiplicities); ``amplitude`` is the net
    coefficient ``sum alpha_s * mult_s``.
    """

    degree: int
    members: dict[Sector, int]
    amplitude: UniPoly
    trivial: bool = False


@dataclass
class EigenvalueCensus:
    distinct: int
    per_point: list[int]
    per_sector: dict[int, int]
    classes: list[EigenvalueClass]
    points: list[tuple[Fraction, Fraction]]


def _block_factors(M: PolyMatrix, Q: Fraction, v: Fraction) -> list[tuple[tuple[int, ...], int]]:
    cp = M.to_fmpq_mat(Q, v).charpoly()
    num = cp.numer()
    _, facs = num.factor()
    out = []
    for f, e in facs:
        cs = [int(c) for c in f.coeffs()]
        if cs[-1] < 0:
            cs = [-c for c in cs]
        out.append((tuple(cs), int(e)))
    return out


def eigenvalue_census(dec: TransferDecomposition, n_points: int = 3, seed: int = 2024) -> EigenvalueCensus:
    """Count distinct eigenvalues of the complete decomposition.

    At each random rational point every nontrivial block's characteristic
    polynomial is factored over the integers; distinct irreducible factors are
    distinct eigenvalue classes, plus the trivial eigenvalue.  The count is the
    maximum over points (an accidental coincidence can only lower it), and the
    class structure is taken from a point attaining the maximum.
    """
    if n_points < 3:
        raise InvalidInputError("distinctness certification needs at least three points")
    rng = random.Random(seed)
    counts = []
    best = None
    points = []
    for _ in range(n_points):
        Q, v = _random_point(rng)
        points.append((Q, v))
        classes: dict[tuple[int, ...], dict[Sector, int]] = {}
        for s, blk in dec.nontrivial.items():
            if blk.dim == 0:
                continue
            for f, e in _block_factors(blk.matrix, Q, v):
                classes.setdefault(f, {})[s] = classes.setdefault(f, {}).get(s, 0) + e
        t = Fraction(dec.trivial.evaluate(Q, v))
        tfac = (-t.numerator, t.denominator)
        if tfac in classes:
            # accidental collision with the trivial eigenvalue at this point
            counts.append(sum(len(f) - 1 for f in classes))
        else:
            counts.append(sum(len(f) - 1 for f in classes) + 1)
        if best is None or counts[-1] > best[0]:
            best = (counts[-1], classes)
    assert best is not None
    out_classes = []
    per_sector: dict[int, set] = {}
    for f, members in best[1].items():
        amp = UniPoly()
        for s, e in members.items():
            amp = amp + dec.amplitudes[s] * e
            per_sector.setdefault(s[0], set()).add(f)
        out_classes.append(EigenvalueClass(len(f) - 1, dict(members), amp))
    triv_members = {s: m for s, m in dec.trivial_multiplicity.items() if m}
    out_classes.append(EigenvalueClass(1, triv_members, gamma(dec), trivial=True))
    sector_counts = {ell: sum(len(f) - 1 for f in fs) for ell, fs in sorted(per_sector.items())}
    return EigenvalueCensus(best[0], counts, sector_counts, out_classes, points)
