"""Graph families and brute-force oracles.

``build_petersen`` and ``build_slab`` construct the two families; the layered
variants present them as ``n`` identical layers joined periodically.  Two
independent oracles check the transfer-matrix machinery: the FK subset sum
(:func:`fk_partition_poly`) and the spin-representation transfer matrix at
integer ``Q`` (:func:`spin_transfer_trace`).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from . import _backend
from .errors import InvalidInputError, ResourceLimitError
from .poly import BivarPoly

DEFAULT_EDGE_CAP = 26
DEFAULT_SPIN_DIM_CAP = 4096


@dataclass(frozen=True)
class Graph:
    """Undirected multigraph without loops; edges keep insertion order."""

    vertex_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.vertex_count < 0:
            raise InvalidInputError("negative vertex count")
        for u, v in self.edges:
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise InvalidInputError(f"edge ({u}, {v}) out of range")
            if u == v:
                raise InvalidInputError(f"loop at vertex {u}")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> list[int]:
        deg = [0] * self.vertex_count
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def has_multi_edges(self) -> bool:
        seen = set()
        for u, v in self.edges:
            key = (min(u, v), max(u, v))
            if key in seen:
                return True
            seen.add(key)
        return False

    def to_edge_list(self) -> str:
        lines = [f"{self.vertex_count} {self.edge_count}"]
        lines += [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> Graph:
        rows = [r.split() for r in text.strip().splitlines() if r.strip()]
        if not rows or len(rows[0]) != 2:
            raise InvalidInputError("edge list must start with 'V E'")
        nv, ne = int(rows[0][0]), int(rows[0][1])
        edges = tuple((int(a), int(b)) for a, b in rows[1:])
        if len(edges) != ne:
            raise InvalidInputError(f"header announces {ne} edges, found {len(edges)}")
        return cls(nv, edges)


@dataclass(frozen=True)
class PetersenParams:
    m: int
    k: int

    def __post_init__(self) -> None:
        if not (isinstance(self.m, int) and isinstance(self.k, int)) or not self.m > self.k >= 1:
            raise InvalidInputError(f"generalized Petersen graph needs m > k >= 1, got m={self.m}, k={self.k}")


@dataclass(frozen=True)
class SlabParams:
    L: int
    n: int

    def __post_init__(self) -> None:
        if self.L < 1 or self.n < 1:
            raise InvalidInputError("slab needs L >= 1 and n >= 1")


@dataclass(frozen=True)
class LayeredGraph:
    """``n_layers`` copies of a layer; inter-layer edges join layer t to t+1."""

    layer_width: int
    n_layers: int
    intra_layer_edges: tuple[tuple[int, int], ...]
    inter_layer_edges: tuple[tuple[int, int], ...]
    periodic_longitudinal: bool = True

    def flatten(self) -> Graph:
        w, n = self.layer_width, self.n_layers
        edges = []
        for t in range(n):
            for a, b in self.intra_layer_edges:
                edges.append((t * w + a, t * w + b))
            if t + 1 < n or self.periodic_longitudinal:
                nt = (t + 1) % n
                for a, b in self.inter_layer_edges:
                    edges.append((t * w + a, nt * w + b))
        return Graph(w * n, tuple(edges))


def build_petersen(params: PetersenParams | None = None, *, m: int | None = None, k: int | None = None) -> Graph:
    """G(m, k): outer vertices ``i_p = p``, inner vertices ``j_p = m + p``."""
    if params is None:
        params = PetersenParams(m, k)  # type: ignore[arg-type]
    m, k = params.m, params.k
    edges = []
    for p in range(m):
        edges.append((p, m + p))
        edges.append((p, (p + 1) % m))
        edges.append((m + p, m + (p + k) % m))
    return Graph(2 * m, tuple(edges))


def build_petersen_layered(n: int, k: int) -> LayeredGraph:
    """G(nk, k) as ``n`` layers of ``2k`` vertices.

    Layer ``t`` holds ``i_p, j_p`` for ``p = tk .. tk+k-1``; local index ``r``
    is ``i_{tk+r}`` and ``k + r`` is ``j_{tk+r}``.
    """
    if n < 2 or k < 1:
        raise InvalidInputError("layered Petersen graph needs n >= 2 and k >= 1")
    intra = [(r, k + r) for r in range(k)] + [(r, r + 1) for r in range(k - 1)]
    inter = [(k - 1, 0)] + [(k + r, k + r) for r in range(k)]
    return LayeredGraph(2 * k, n, tuple(intra), tuple(inter), True)


def build_slab(params: SlabParams | None = None, *, L: int | None = None, n: int | None = None) -> LayeredGraph:
    """Sc(L, n): L x L layers with free transverse and periodic longitudinal sides.

    Vertex ``(x, y)`` of a layer has local index ``x + L*y``.
    """
    if params is None:
        params = SlabParams(L, n)  # type: ignore[arg-type]
    L = params.L
    idx = lambda x, y: x + L * y
    intra = [(idx(x, y), idx(x + 1, y)) for y in range(L) for x in range(L - 1)]
    intra += [(idx(x, y), idx(x, y + 1)) for x in range(L) for y in range(L - 1)]
    inter = [(idx(x, y), idx(x, y)) for y in range(L) for x in range(L)]
    return LayeredGraph(L * L, params.n, tuple(intra), tuple(inter), True)


# ---------------------------------------------------------------------------
# Isomorphism via canonical labeling
# ---------------------------------------------------------------------------


def _adjacency(g: Graph) -> list[dict[int, int]]:
    adj: list[dict[int, int]] = [dict() for _ in range(g.vertex_count)]
    for u, v in g.edges:
        adj[u][v] = adj[u].get(v, 0) + 1
        adj[v][u] = adj[v].get(u, 0) + 1
    return adj


def _refine(adj: list[dict[int, int]], colors: list[int]) -> list[int]:
    ncol = len(set(colors))
    while True:
        sig = [
            (colors[v], tuple(sorted((colors[u], c) for u, c in adj[v].items())))
            for v in range(len(adj))
        ]
        order = {s: i for i, s in enumerate(sorted(set(sig)))}
        new = [order[s] for s in sig]
        if len(order) == ncol:
            return new
        colors, ncol = new, len(order)


def canonical_form(g: Graph) -> tuple:
    """Labeling-invariant certificate: minimal relabeled edge multiset.

    Degree-based color refinement, then individualization with backtracking
    over the first non-singleton cell.
    """
    adj = _adjacency(g)
    n = g.vertex_count
    best: list[tuple | None] = [None]

    def leaf(colors: list[int]) -> tuple:
        return tuple(sorted(tuple(sorted((colors[u], colors[v]))) for u, v in g.edges))

    def search(colors: list[int]) -> None:
        if len(set(colors)) == n:
            key = leaf(colors)
            if best[0] is None or key < best[0]:
                best[0] = key
            return
        cells: dict[int, list[int]] = {}
        for v, c in enumerate(colors):
            cells.setdefault(c, []).append(v)
        target = min((c for c, vs in cells.items() if len(vs) > 1))
        for v in cells[target]:
            ind = [2 * c + (0 if u == v else 1) for u, c in enumerate(colors)]
            search(_refine(adj, ind))

    search(_refine(adj, [0] * n))
    return (n, best[0] or ())


def is_isomorphic(a: Graph, b: Graph) -> bool:
    if a.vertex_count != b.vertex_count or a.edge_count != b.edge_count:
        return False
    if sorted(a.degrees()) != sorted(b.degrees()):
        return False
    return canonical_form(a) == canonical_form(b)


# ---------------------------------------------------------------------------
# FK subset-sum oracle
# ---------------------------------------------------------------------------


def fk_counts(g: Graph, cap: int = DEFAULT_EDGE_CAP) -> np.ndarray:
    """Table ``c[|E'|, k(E')]`` over all ``2^|E|`` edge subsets."""
    if g.edge_count > cap:
        raise ResourceLimitError(f"{g.edge_count} edges exceed the FK cap of {cap}")
    edges = np.array(g.edges, dtype=np.int32).reshape(-1, 2)
    return _backend.fk_counts(g.vertex_count, edges)


def fk_partition_poly(g: Graph, cap: int = DEFAULT_EDGE_CAP) -> BivarPoly:
    """``Z_G(Q, v) = sum over E' of v^|E'| Q^k(E')``, exactly."""
    c = fk_counts(g, cap)
    return BivarPoly({(comp, ne): int(c[ne, comp]) for ne, comp in zip(*np.nonzero(c))})


def components_union_find(n: int, edges: Iterable[tuple[int, int]]) -> int:
    parent = list(range(n))

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    comp = n
    for u, v in edges:
        a, b = find(u), find(v)
        if a != b:
            parent[a] = b
            comp -= 1
    return comp


def components_dfs(n: int, edges: Iterable[tuple[int, int]]) -> int:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    comp = 0
    for s in range(n):
        if seen[s]:
            continue
        comp += 1
        stack = [s]
        seen[s] = True
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    stack.append(y)
    return comp


def fk_self_check(g: Graph, fraction: float = 0.01, seed: int = 0, max_samples: int = 5000) -> int:
    """Recount components on a random sample of subsets with both methods.

    Returns the number of subsets checked; raises ``AssertionError`` on a
    disagreement.
    """
    rng = random.Random(seed)
    m = g.edge_count
    samples = min(max(1, int(fraction * 2 ** m)), max_samples)
    for _ in range(samples):
        mask = rng.getrandbits(m) if m else 0
        sub = [e for i, e in enumerate(g.edges) if mask >> i & 1]
        a = components_union_find(g.vertex_count, sub)
        b = components_dfs(g.vertex_count, sub)
        if a != b:
            raise AssertionError(f"component count mismatch on subset {mask:#x}: {a} vs {b}")
    return samples


# ---------------------------------------------------------------------------
# Spin-representation transfer matrix at integer Q
# ---------------------------------------------------------------------------


def petersen_operator_sequence(k: int) -> list[tuple]:
    """Layer operators of G(nk, k), in application order (first applied first).

    Point 0 is the current outer vertex, points ``1..k`` the last ``k`` inner
    vertices (point ``k`` the oldest).  ``("V", i)`` advances point ``i`` along
    an edge to a fresh vertex; ``("H", i, j)`` adds an edge between two points.
    """
    ops: list[tuple] = [("V", i) for i in range(k + 1)]
    ops.append(("H", 0, k))
    for i in range(k - 1, 0, -1):
        ops.append(("V", 0))
        ops.append(("H", 0, i))
    return ops


def slab_operator_sequence(L: int) -> list[tuple]:
    """Layer operators of Sc(L, n): horizontal joins first, then vertical steps."""
    idx = lambda x, y: x + L * y
    ops: list[tuple] = []
    ops += [("H", idx(x, y), idx(x + 1, y)) for y in range(L) for x in range(L - 1)]
    ops += [("H", idx(x, y), idx(x, y + 1)) for x in range(L) for y in range(L - 1)]
    ops += [("V", idx(x, y)) for y in range(L) for x in range(L)]
    return ops


def _spin_transfer_matrix(ops: Sequence[tuple], width: int, N: int, v: Any, exact: bool) -> np.ndarray:
    dim = N ** width
    if exact:
        X = np.empty((dim, dim), dtype=object)
        X[...] = Fraction(0)
        for i in range(dim):
            X[i, i] = Fraction(1)
    else:
        X = np.eye(dim, dtype=complex)
    shape = (N,) * width + (dim,)
    X = X.reshape(shape)
    grids = np.indices((N,) * width)
    for op in ops:
        if op[0] == "V":
            i = op[1]
            s = X.sum(axis=i, keepdims=True)
            X = v * X + s
        else:
            i, j = op[1], op[2]
            mask = (grids[i] == grids[j])[..., None]
            X = X + v * X * mask
    return X.reshape(dim, dim)


def spin_transfer_matrix(k: int, N: int, v: Any, family: str = "petersen", L: int = 2) -> np.ndarray:
    """Dense ``N^(width)``-dimensional spin transfer matrix of one layer."""
    if family == "petersen":
        ops, width = petersen_operator_sequence(k), k + 1
    else:
        ops, width = slab_operator_sequence(L), L * L
    exact = isinstance(v, (int, Fraction))
    return _spin_transfer_matrix(ops, width, N, Fraction(v) if exact else v, exact)


def spin_transfer_trace(
    k: int,
    n: int,
    N: int,
    v: Any,
    dim_cap: int = DEFAULT_SPIN_DIM_CAP,
    family: str = "petersen",
    L: int = 2,
) -> Any:
    """``Z(N, v)`` of G(nk, k) (or Sc(L, n)) as ``tr(T^n)`` over Potts spins.

    Exact for integer/rational ``v`` (returns a Fraction), floating otherwise.
    ``N = 0`` returns 0: there are no spin configurations.
    """
    if N < 0 or k < 1 or n < 1:
        raise InvalidInputError("spin oracle needs N >= 0, k >= 1, n >= 1")
    if N == 0:
        return Fraction(0) if isinstance(v, (int, Fraction)) else 0.0
    width = k + 1 if family == "petersen" else L * L
    if N ** width > dim_cap:
        raise ResourceLimitError(f"spin transfer dimension {N ** width} exceeds cap {dim_cap}")
    T = spin_transfer_matrix(k, N, v, family, L)
    if isinstance(v, (int, Fraction)):
        import flint

        m = flint.fmpq_mat(T.shape[0], T.shape[1], [flint.fmpq(x.numerator, x.denominator) for x in T.flat])
        p = m ** n
        tr = sum((p[i, i] for i in range(T.shape[0])), flint.fmpq(0))
        return Fraction(int(tr.p), int(tr.q))
    return complex(np.trace(np.linalg.matrix_power(T, n)))


def spin_transfer_eigenvalue_count(k: int, N: int) -> int:
    """Dimension of the spin transfer matrix (eigenvalues counted with multiplicity)."""
    return N ** (k + 1)
