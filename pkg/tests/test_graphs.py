import itertools
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pottstm import _backend, _fk_py
from pottstm.errors import InvalidInputError, ResourceLimitError
from pottstm.graphs import (
    Graph,
    PetersenParams,
    build_petersen,
    build_petersen_layered,
    build_slab,
    canonical_form,
    components_dfs,
    components_union_find,
    fk_counts,
    fk_partition_poly,
    fk_self_check,
    is_isomorphic,
    spin_transfer_trace,
)
from pottstm.poly import BivarPoly


def test_petersen_5_2_size():
    g = build_petersen(m=5, k=2)
    assert (g.vertex_count, g.edge_count) == (10, 15)


def test_petersen_4_2_has_double_edges():
    assert build_petersen(m=4, k=2).has_multi_edges()


def test_petersen_12_4_cubic():
    g = build_petersen(m=12, k=4)
    assert g.degrees() == [3] * 24


@pytest.mark.parametrize("m,k", [(2, 2), (3, 0), (1, 1)])
def test_petersen_bad_params(m, k):
    with pytest.raises(InvalidInputError):
        PetersenParams(m, k)


def test_layered_smallest_case():
    g = build_petersen_layered(2, 1).flatten()
    assert (g.vertex_count, g.edge_count) == (4, 6)
    assert is_isomorphic(g, build_petersen(m=2, k=1))


def test_layered_3_2_is_petersen_6_2():
    assert is_isomorphic(build_petersen_layered(3, 2).flatten(), build_petersen(m=6, k=2))


def test_layered_widths():
    lg = build_petersen_layered(2, 3)
    assert (lg.layer_width, lg.n_layers) == (6, 2)


def test_layered_needs_two_layers():
    with pytest.raises(InvalidInputError):
        build_petersen_layered(1, 2)


def test_slab_2_3_counts():
    lg = build_slab(L=2, n=3)
    g = lg.flatten()
    horizontal = len(lg.intra_layer_edges) * lg.n_layers
    vertical = len(lg.inter_layer_edges) * lg.n_layers
    assert (g.vertex_count, horizontal, vertical) == (12, 12, 12)


def test_slab_line_is_cycle():
    g = build_slab(L=1, n=4).flatten()
    assert g.vertex_count == 4 and g.edge_count == 4
    assert g.degrees() == [2] * 4
    assert components_dfs(4, g.edges) == 1


def test_slab_single_layer_wraps_onto_itself():
    lg = build_slab(L=2, n=1)
    # the periodic wrap of a single layer joins every vertex to itself
    assert all(a == b for a, b in lg.inter_layer_edges)
    with pytest.raises(InvalidInputError):
        lg.flatten()


def test_single_edge_fk():
    g = Graph(2, ((0, 1),))
    assert fk_partition_poly(g) == BivarPoly({(2, 0): 1, (1, 1): 1})


@pytest.mark.parametrize("m,k", [(3, 1), (4, 1), (5, 2), (6, 2), (7, 3)])
def test_fk_at_q_one_and_zero(m, k):
    g = build_petersen(m=m, k=k)
    Z = fk_partition_poly(g)
    one_plus_v = BivarPoly({(0, 0): 1, (0, 1): 1})
    assert Z.substitute_q(1) == one_plus_v.substitute_q(1) ** g.edge_count
    assert Z.substitute_q(0).is_zero()


@pytest.mark.parametrize("m,k", [(3, 1), (4, 1), (5, 2), (6, 2), (7, 3), (8, 3)])
def test_fk_degrees_and_leading_term(m, k):
    g = build_petersen(m=m, k=k)
    Z = fk_partition_poly(g)
    assert Z.deg_v == g.edge_count
    assert Z.deg_q == g.vertex_count
    assert Z.coefficient(g.vertex_count, 0) == 1


def test_odd_cycle_not_two_colorable():
    Z = fk_partition_poly(build_petersen(m=3, k=1))
    assert Z.evaluate(2, -1) == 0


def test_edge_cap():
    with pytest.raises(ResourceLimitError):
        fk_partition_poly(build_petersen(m=9, k=2))


def test_edge_list_round_trip():
    g = build_petersen(m=7, k=2)
    assert Graph.from_edge_list(g.to_edge_list()) == g


def test_edge_list_header_mismatch():
    with pytest.raises(InvalidInputError):
        Graph.from_edge_list("3 2\n0 1\n")


def test_component_counters_agree_on_random_subsets():
    assert fk_self_check(build_petersen(m=6, k=2), fraction=0.05) > 0


@given(st.integers(1, 9), st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8)), max_size=14))
def test_component_counters_property(n, raw):
    edges = [(a % n, b % n) for a, b in raw]
    assert components_union_find(n, edges) == components_dfs(n, edges)


def test_compiled_backend_matches_fallback():
    for m, k in [(3, 1), (5, 2), (6, 2), (7, 3)]:
        g = build_petersen(m=m, k=k)
        edges = np.array(g.edges, dtype=np.int32)
        assert np.array_equal(_backend.fk_counts(g.vertex_count, edges), _fk_py.fk_counts(g.vertex_count, edges))


def test_backend_selection_honours_environment():
    code = "from pottstm import _backend; print(_backend.BACKEND)"
    env = dict(os.environ, POTTSTM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_fk_counts_sum_to_all_subsets():
    g = build_petersen(m=5, k=2)
    assert int(fk_counts(g).sum()) == 2 ** g.edge_count


@pytest.mark.parametrize("n,k", [(2, 1), (3, 1), (4, 1), (2, 2), (3, 2), (4, 2), (2, 3), (3, 3), (2, 4), (3, 4),
                                 (2, 5), (2, 6)])
def test_layered_matches_direct(n, k):
    a = build_petersen_layered(n, k).flatten()
    b = build_petersen(m=n * k, k=k)
    assert canonical_form(a) == canonical_form(b)


def test_isomorphism_rejects_different_graphs():
    assert not is_isomorphic(build_petersen(m=5, k=1), build_petersen(m=5, k=2))


def test_spin_trace_at_q_one():
    for v in (Fraction(3), Fraction(-2, 7)):
        assert spin_transfer_trace(2, 2, 1, v) == (1 + v) ** 12


def test_spin_trace_at_q_zero():
    assert spin_transfer_trace(3, 2, 0, Fraction(5)) == 0


def test_spin_trace_matches_fk_at_two():
    Z = fk_partition_poly(build_petersen(m=6, k=2))
    assert spin_transfer_trace(2, 3, 2, -1) == Z.evaluate(2, -1)


def test_spin_dimension_cap():
    with pytest.raises(ResourceLimitError):
        spin_transfer_trace(3, 2, 4, 1, dim_cap=100)


_FK = {}


def _fk(n, k):
    if (n, k) not in _FK:
        _FK[(n, k)] = fk_partition_poly(build_petersen(m=n * k, k=k))
    return _FK[(n, k)]


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from([(k, n) for k in (1, 2, 3) for n in (2, 3) if 3 * n * k <= 24] + [(1, 4)]),
    st.integers(0, 4),
    st.fractions(min_value=-3, max_value=3, max_denominator=5),
)
def test_spin_oracle_equals_fk(kn, N, v):
    k, n = kn
    if N ** (k + 1) > 4096:
        return
    assert spin_transfer_trace(k, n, N, v) == _fk(n, k).evaluate(N, v)


def test_spin_oracle_slab():
    Z = fk_partition_poly(build_slab(L=2, n=2).flatten())
    for N, v in itertools.product((1, 2, 3), (Fraction(-1), Fraction(2, 3))):
        assert spin_transfer_trace(2, 2, N, v, family="slab", L=2) == Z.evaluate(N, v)
