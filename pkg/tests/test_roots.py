import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pottstm import roots
from pottstm import transfer as tm
from pottstm.errors import InvalidInputError
from pottstm.graphs import build_petersen, fk_partition_poly
from pottstm.poly import LineSpec, UniPoly, specialize


def test_golden_quadratic():
    p = UniPoly([1, -3, 1])
    rs = roots.solve(p)
    got = sorted(rs.values(), key=lambda z: z.real)
    assert got[0].real == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-15)
    assert got[1].real == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-15)
    assert rs.max_radius() <= 1e-20
    rep = roots.vieta_check(p, rs)
    assert rep.passed
    assert roots.residual_consistent(p, rs)


def test_quintuple_root():
    p = UniPoly.from_roots([1] * 5)
    rs = roots.solve(p)
    assert len(rs) == 1
    assert rs.roots[0].multiplicity == 5
    assert complex(rs.roots[0].value) == 1
    assert roots.vieta_check(p, rs).passed


def test_triple_root_vieta():
    p = UniPoly.from_roots([1, 1, 1])
    rep = roots.vieta_check(p, roots.solve(p))
    assert rep.passed
    assert rep.sum_error == 0 and rep.product_error == 0


def test_zero_roots_deflated():
    p = UniPoly([0, 0, 2, -3, 1])
    rs = roots.solve(p)
    zero = [r for r in rs.roots if r.value == 0]
    assert zero and zero[0].multiplicity == 2
    assert sum(r.multiplicity for r in rs.roots) == 4


def test_constant_rejected():
    with pytest.raises(InvalidInputError):
        roots.solve(UniPoly([3]))


def test_random_degree_20():
    rng = random.Random(20)
    p = UniPoly([rng.randint(-100, 100) for _ in range(20)] + [rng.randint(1, 100)])
    rs = roots.solve(p)
    assert sum(r.multiplicity for r in rs.roots) == 20
    assert rs.max_radius() <= 1e-20
    assert roots.vieta_check(p, rs).passed
    assert roots.residual_consistent(p, rs)
    assert rs.conjugate_closed()


@settings(max_examples=10, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=3, max_size=16).filter(lambda c: c[-1] != 0))
def test_random_integer_polynomials(cs):
    p = UniPoly(cs)
    rs = roots.solve(p)
    assert sum(r.multiplicity for r in rs.roots) == p.degree
    assert rs.conjugate_closed()
    assert roots.vieta_check(p, rs).passed
    assert roots.residual_consistent(p, rs)


def test_chromatic_roots_of_g10_1_inside_disk(dec):
    p = tm.assemble_on_line(dec(1), 10, LineSpec.chromatic())
    rs = roots.solve(p)
    assert max(abs(z) for z in rs.values()) < 23.9
    assert rs.max_radius() <= 1e-20
    assert rs.conjugate_closed()
    assert roots.vieta_check(p, rs).passed
    assert roots.residual_consistent(p, rs)


def test_deterministic_for_fixed_seed():
    p = specialize(fk_partition_poly(build_petersen(m=6, k=2)), LineSpec.flow())
    a = roots.solve(p, seed=3)
    b = roots.solve(p, seed=3)
    assert a.to_csv() == b.to_csv()


def test_seed_does_not_change_the_root_set():
    p = UniPoly.from_roots([2, -1, 5]) * UniPoly([1, 0, 1])
    a = roots.solve(p, seed=0).values()
    b = roots.solve(p, seed=99).values()
    assert all(abs(x - y) < 1e-25 for x, y in zip(a, b))


def test_conjugate_check_detects_missing_partner():
    rs = roots.solve(UniPoly([1, 0, 1]))
    rs.roots = rs.roots[:1]
    assert not rs.conjugate_closed()


def test_csv_has_provenance():
    rs = roots.solve(UniPoly([1, -3, 1]))
    text = rs.to_csv({"line": "v=-1"})
    assert text.startswith(f"# poly_sha256={rs.poly_hash}\n# line=v=-1\nre,im,radius,multiplicity\n")
    assert len(text.strip().splitlines()) == 5


def test_residual_check_with_zero_and_repeated_roots():
    # Q^4 (Q-1)(Q-2)^2: simple root radii come from the squarefree factor
    p = UniPoly.from_roots([1, 2, 2]) * UniPoly([0, 0, 0, 0, 1])
    rs = roots.solve(p)
    assert roots.residual_consistent(p, rs)
    assert roots.vieta_check(p, rs).passed
