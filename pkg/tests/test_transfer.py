import math
import random
from fractions import Fraction

import flint
import numpy as np
import pytest

from pottstm import partitions as pt
from pottstm import transfer as tm
from pottstm.errors import DependencyError
from pottstm.graphs import build_petersen, build_slab, fk_partition_poly
from pottstm.poly import BivarPoly, LineSpec, UniPoly, char_poly, newton_power_sum, specialize, trace_of_power

Qx = UniPoly([0, 1])


def test_k1_factor_sequence():
    assert tm.build_full_T(1).written_order() == ["H_01", "V_1", "V_0"]


def test_petersen_factor_sequence_shape():
    for k in (2, 3, 4):
        seq = tm.build_full_T(k)
        want = []
        for j in range(1, k):
            want += [f"H_0{j}", "V_0"]
        want += [f"H_0{k}"] + [f"V_{i}" for i in range(k, -1, -1)]
        assert seq.written_order() == want
        assert seq.v_factor_count == 2 * k == seq.trivial_v_degree


def test_slab_factor_sequence():
    seq = tm.build_full_T_slab(2)
    kinds = [op[0] for op in seq.ops]
    assert kinds.count("H") == 4 and kinds.count("V") == 4
    assert kinds[:4] == ["H"] * 4


def _apply_sequence(state, ops, v):
    """Weighted image of a partition under an operator list, with v numeric and Q kept symbolic."""
    cur = {state: BivarPoly.const(1)}
    for op in ops:
        nxt = {}
        for s, w in cur.items():
            for img, dq, dv in tm.apply_op_partition(s, op):
                if v == 0 and dv:
                    continue
                term = w * BivarPoly.monomial(dq, 0)
                nxt[img] = nxt.get(img, BivarPoly()) + term
        cur = {s: w for s, w in nxt.items() if w}
    return cur


def test_zero_coupling_detaches_everything():
    # every V on a singleton contributes one factor of Q
    for k in (1, 2, 3):
        seq = tm.build_full_T(k)
        start = pt.canonicalize([[i] for i in range(2 * (k + 1))], k + 1)
        out = _apply_sequence(start, seq.ops, 0)
        assert len(out) == 1
        ((state, weight),) = out.items()
        assert state == start
        assert weight == BivarPoly.monomial(seq.v_factor_count, 0)
        if k == 1:
            assert weight == BivarPoly.monomial(k + 1, 0)


def test_slab_horizontal_factors_commute():
    seq = tm.build_full_T_slab(2)
    hs = [op for op in seq.ops if op[0] == "H"]
    rest = [op for op in seq.ops if op[0] != "H"]
    rng = random.Random(0)
    states = [s for ell in range(5) for s in pt.enumerate_states(4, ell)]
    for _ in range(5):
        perm = hs[:]
        rng.shuffle(perm)
        for s in rng.sample(states, 20):
            a = _apply_sequence(s, hs + rest, 1)
            b = _apply_sequence(s, perm + rest, 1)
            assert a == b


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_link_triangularity(k):
    assert tm.check_triangularity_fast(tm.build_full_T(k))


@pytest.mark.parametrize("k", [1, 2])
def test_triangularity_on_full_partitions(k):
    assert tm.check_triangularity(tm.build_full_T(k))


def test_slab_triangularity():
    assert tm.check_triangularity_fast(tm.build_full_T_slab(2))


@pytest.mark.parametrize("k,n", [(1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4), (3, 2)])
def test_transfer_matches_fk(dec, k, n):
    Z = tm.assemble_Z(dec(k), n)
    assert Z == fk_partition_poly(build_petersen(m=n * k, k=k))


def test_slab_matches_fk(dec):
    Z = tm.assemble_Z(dec(2, "slab"), 2)
    assert Z == fk_partition_poly(build_slab(L=2, n=2).flatten())


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_assembly_paths_agree(dec, k, n):
    d = dec(k)
    assert tm.assemble_Z(d, n) == tm.assemble_Z(d, n, reduced=True)


@pytest.mark.parametrize("k,n", [(1, 2), (1, 3), (2, 2), (3, 2)])
def test_partition_function_at_zero_and_one(dec, k, n):
    Z = tm.assemble_Z(dec(k), n)
    assert Z.substitute_q(0).is_zero()
    assert Z.substitute_q(1) == UniPoly([1, 1]) ** (3 * n * k)


def test_line_assembly_matches_specialization(dec):
    d = dec(2)
    for text in ("v=-1", "v=-Q", "Q=-v", "v=-4"):
        line = LineSpec.parse(text)
        assert tm.assemble_on_line(d, 3, line) == specialize(tm.assemble_Z(d, 3), line)


@pytest.mark.parametrize("k,expected", [(1, 6), (2, 20), (3, 113)])
def test_eigenvalue_census(dec, k, expected):
    census = tm.eigenvalue_census(dec(k))
    assert census.distinct == expected
    assert max(census.per_point) == expected


@pytest.mark.extended
def test_eigenvalue_census_k4(dec):
    assert tm.eigenvalue_census(dec(4)).distinct == 755


def test_slab_structure(dec):
    d = dec(2, "slab")
    census = tm.eigenvalue_census(d)
    assert census.per_sector == {0: 12, 1: 27, 2: 39, 3: 14}
    weighted = {}
    for (ell, lam), m in d.trivial_multiplicity.items():
        weighted[ell] = weighted.get(ell, 0) + m * pt.irrep_dimension(lam) if ell else m
    assert [weighted[ell] for ell in (1, 2, 3, 4)] == [2, 6, 12, 24]


def test_slab_trivial_amplitude(dec):
    assert tm.gamma(dec(2, "slab")) == UniPoly([1, -15, 20, -8, 1])


@pytest.mark.parametrize("k", [1, 2, 3])
def test_trivial_extraction_edges(dec, k):
    d = dec(k)
    assert d.trivial_multiplicity[(0, ())] == 0
    for lam in pt.young_diagrams(k + 1):
        assert d.nontrivial[(k + 1, lam)].dim == 0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_all_link_sector_shares_eigenvalues(dec, k):
    d = dec(k)
    Q, v = Fraction(7, 3), Fraction(-5, 2)
    sets = []
    for lam in pt.young_diagrams(k):
        blk = d.nontrivial[(k, lam)]
        assert blk.dim == (2 * k + 1) * pt.irrep_dimension(lam)
        sets.append(frozenset(f for f, _ in tm._block_factors(blk.matrix, Q, v)))
    assert len(set(sets)) == 1
    assert sum(len(f) - 1 for f in sets[0]) == 2 * k + 1


@pytest.mark.parametrize("k", [1, 2])
def test_nontrivial_blocks_lose_the_trivial_eigenvalue(dec, k):
    d = dec(k)
    Q, v = Fraction(11, 5), Fraction(-7, 3)
    t = d.trivial.evaluate(Q, v)
    for s, blk in d.nontrivial.items():
        if blk.dim:
            m = blk.matrix.to_fmpq_mat(Q, v)
            cp = m.charpoly()
            assert cp(flint.fmpq(t.numerator, t.denominator)) != 0, s


def test_amplitude_examples():
    assert tm.amplitude(1, (1,)) == UniPoly([-1, 1])
    for ell in range(1, 7):
        assert tm.amplitude(ell, (1,) * ell)(0) == (-1) ** ell
        sym = UniPoly([Fraction(1, math.factorial(ell))]) * UniPoly([-(2 * ell - 1), 1])
        for i in range(ell - 1):
            sym = sym * UniPoly([-i, 1])
        assert tm.amplitude(ell, (ell,)) == sym
        assert tm.amplitude(ell, (ell,))(2 * ell - 1) == 0


@pytest.mark.parametrize("ell", range(1, 7))
def test_amplitude_degree_and_leading(ell):
    for lam in pt.young_diagrams(ell):
        a = tm.amplitude(ell, lam)
        assert a.degree == ell
        assert a.leading == Fraction(pt.irrep_dimension(lam), math.factorial(ell))


def test_beta_examples():
    assert tm.beta(2) == UniPoly([1, -3, 1])
    for k in range(1, 8):
        assert tm.beta(k)(0) == (-1) ** k
        assert tm.beta(k)(1) == (k - 1) * (-1) ** (k - 1)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_gamma_examples(dec, k):
    g = tm.gamma(dec(k))
    assert g(1) == (-1) ** k
    assert g(2) == -1
    if k == 1:
        assert g == UniPoly([1, -3, 1])


def test_gamma_needs_multiplicities(dec):
    d = dec(1)
    broken = tm.TransferDecomposition(d.family, d.k, d.width, d.trivial, d.blocks, d.nontrivial, {}, d.amplitudes)
    with pytest.raises(DependencyError):
        tm.gamma(broken)


def test_trace_of_power_matches_newton_on_block(dec):
    m = dec(1).blocks[(0, ())].matrix
    assert trace_of_power(m, 2) == newton_power_sum(char_poly(m), 2)


def test_char_poly_of_block_matches_numeric(dec):
    m = dec(1).blocks[(1, (1,))].matrix
    cp = char_poly(m)
    Q, v = Fraction(5, 3), Fraction(-3, 4)
    coeffs = [float(c.evaluate(Q, v)) for c in cp][::-1]
    eig = np.linalg.eigvals(m.to_numpy(float(Q), float(v)))
    for z in np.roots(coeffs):
        assert np.min(np.abs(eig - z)) < 1e-9


def test_missing_sectors_reported():
    d = tm.block_decompose(3, max_orbits=5)
    assert d.missing
    assert all(pt.orbit_count(4, ell) > 5 for ell, _ in d.missing)


def test_cache_round_trip(tmp_path):
    a = tm.block_decompose(2, cache=tmp_path)
    assert any(tmp_path.rglob("*.json"))
    b = tm.block_decompose(2, cache=tmp_path)
    for s in a.blocks:
        assert a.blocks[s].matrix == b.blocks[s].matrix
        assert a.nontrivial[s].matrix == b.nontrivial[s].matrix
    assert a.trivial_multiplicity == b.trivial_multiplicity


def test_corrupt_cache_is_recomputed(tmp_path):
    tm.block_decompose(1, cache=tmp_path)
    for f in tmp_path.rglob("*.json"):
        f.write_text("{not json")
    d = tm.block_decompose(1, cache=tmp_path)
    assert tm.assemble_Z(d, 2) == fk_partition_poly(build_petersen(m=2, k=1))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_blocks_do_not_depend_on_bottom_row(k):
    seq = tm.build_full_T(k)
    w = k + 1
    merged = [((0, w - 1),) + tuple((i,) for i in range(1, w - 1)), (tuple(range(w)),)]
    Q, v = Fraction(7, 3), Fraction(-5, 2)
    compared = 0
    for ell in range(1, w + 1):
        for lam in pt.young_diagrams(ell):
            ref = tm.state_level_block_at(seq, ell, lam, Q, v).charpoly()
            for bottom in merged:
                if len(bottom) >= ell:
                    assert tm.state_level_block_at(seq, ell, lam, Q, v, bottom=bottom).charpoly() == ref
                    compared += 1
    assert compared >= 2


def test_tampered_cache_fails_checksum(tmp_path):
    import json

    tm.block_decompose(1, cache=tmp_path)
    for f in tmp_path.rglob("*.json"):
        outer = json.loads(f.read_text())
        outer["payload"] = outer["payload"].replace('"trivial_multiplicity":', '"trivial_multiplicity":9')
        f.write_text(json.dumps(outer))
    d = tm.block_decompose(1, cache=tmp_path)
    assert tm.assemble_Z(d, 2) == fk_partition_poly(build_petersen(m=2, k=1))
