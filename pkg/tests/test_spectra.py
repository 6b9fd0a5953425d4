import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pottstm import spectra
from pottstm.errors import InvalidInputError
from pottstm.poly import LineSpec


@pytest.fixture(scope="module")
def sources(dec):
    return {k: spectra.SpectralSource.from_decomposition(dec(k)) for k in (1, 2, 3)}


def test_toy_diagonal_block():
    spec = spectra.spectrum_from_values(2, -1, {(0, ()): [2, -1]})
    assert sorted(spec.moduli.tolist()) == [1.0, 2.0]


def test_equimodular_two_real():
    spec = spectra.spectrum_from_values(1, -1, {(0, ()): [2.0], (1, (1,)): [-2.0], (2, (2,)): [1.0]})
    eq = spectra.is_equimodular(spec)
    assert eq is not None and eq.classification == "two-real"
    assert set(eq.sectors) == {(0, ()), (1, (1,))}


def test_equimodular_conjugate_pair():
    spec = spectra.spectrum_from_values(1, -1, {(1, (1,)): [1 + 2j, 1 - 2j, 0.5]})
    eq = spectra.is_equimodular(spec)
    assert eq is not None and eq.classification == "conjugate-pair"


def test_not_equimodular():
    spec = spectra.spectrum_from_values(1, -1, {(0, ()): [2.0], (1, (1,)): [1.0]})
    assert spectra.is_equimodular(spec) is None


def test_identical_values_merge_unless_asked():
    spec = spectra.spectrum_from_values(1, -1, {(0, ()): [2.0], (1, (1,)): [2.0]})
    assert spectra.is_equimodular(spec) is None
    eq = spectra.is_equimodular(spec, merge_identical=False)
    assert eq is not None and eq.classification == "two-real"


def test_trivial_eigenvalue_present(sources):
    spec = spectra.spectrum_at(sources[1], 2, -1)
    tri = spectra.trivial_sector(2)
    vals = [z for z, s in spec.eigenvalues if s == tri]
    assert vals == [1.0]


@settings(max_examples=15, deadline=None)
@given(st.floats(-4, 6), st.floats(-3, 2), st.sampled_from([1, 2, 3]))
def test_trivial_value_and_conjugate_symmetry(sources, Q, v, k):
    spec = spectra.spectrum_at(sources[k], Q, v)
    tri = spectra.trivial_sector(k + 1)
    assert [abs(z) for z, s in spec.eigenvalues if s == tri] == [pytest.approx(abs(v) ** (2 * k), rel=1e-15, abs=1e-300)]
    for s, vals in spec.per_block.items():
        for z in vals:
            if abs(z.imag) > 1e-9 * max(1, abs(z)):
                assert np.min(np.abs(vals - z.conjugate())) <= 1e-8 * max(1, abs(z))


@pytest.mark.parametrize("k", [2, 3, 4])
def test_dense_and_arnoldi_agree(dec, k):
    src = spectra.SpectralSource(family="petersen", k=k)
    exact = spectra.SpectralSource.from_decomposition(dec(k))
    # Arnoldi sees the full irrep blocks; ask past the trivial copies
    n_eigs = 3 + max(dec(k).trivial_multiplicity.values())
    rng = np.random.default_rng(k)
    for _ in range(3):
        Q, v = rng.uniform(0.5, 5), rng.uniform(-2.5, -0.2)
        a = spectra.spectrum_at(exact, Q, v, "dense")
        b = spectra.spectrum_at(src, Q, v, "arnoldi", n_eigs=n_eigs)
        c = spectra.spectrum_at(exact, Q, v, "arnoldi", n_eigs=n_eigs)
        assert np.allclose(a.moduli[:3], b.moduli[:3], rtol=1e-9)
        assert np.allclose(a.moduli[:3], c.moduli[:3], rtol=1e-9)
        for s in exact.sectors:
            if len(a.per_block.get(s, ())) <= n_eigs + 2:
                continue
            top_a = np.sort(np.abs(a.per_block[s]))[::-1][:3]
            top_b = np.sort(np.abs(b.per_block[s]))[::-1][:3]
            assert np.allclose(top_a, top_b, rtol=1e-9), s
            assert np.allclose(top_a, np.sort(np.abs(c.per_block[s]))[::-1][:3], rtol=1e-9), s


def test_exact_and_factor_sources_agree(dec):
    a = spectra.SpectralSource.from_decomposition(dec(2))
    b = spectra.SpectralSource("petersen", 2)
    for Q, v in [(1.3, -0.7), (3.1, -1.9), (0.4 + 0.3j, -1)]:
        ma = spectra.spectrum_at(a, Q, v).distinct()[:3]
        mb = spectra.spectrum_at(b, Q, v).distinct()[:3]
        assert np.allclose([abs(z) for z, _ in ma], [abs(z) for z, _ in mb], rtol=1e-10)


def test_unknown_mode(sources):
    with pytest.raises(InvalidInputError):
        spectra.spectrum_at(sources[1], 1, -1, mode="power")


@pytest.mark.parametrize("Q,v,ell", [(1, -1.5, 1), (3, -1.5, 2), (5, -0.05, 0)])
def test_dominant_sectors_k3(sources, Q, v, ell):
    lab = spectra.dominance_label(spectra.spectrum_at(sources[3], Q, v))
    assert lab.sector[0] == ell


def test_dominance_map_shape(sources):
    grid = spectra.dominance_map(sources[1], (0, 3, -2, 0), (4, 3))
    assert len(grid) == 3 and all(len(r) == 4 for r in grid)


def _crossing_near(curve, target, tol):
    return any(abs(x - target) < tol for x in curve.crossings_on_axis())


def test_curve_k1_chromatic(sources):
    c = spectra.trace_curve(sources[1], (-1, 3, -1, 1), 0.25, 1e-10, line=LineSpec.chromatic())
    assert _crossing_near(c, 2.0, 1e-8)


def test_curve_k1_flow(sources):
    c = spectra.trace_curve(sources[1], (0, 4, -1, 1), 0.25, 1e-10, line=LineSpec.flow())
    assert _crossing_near(c, 3.0, 1e-8)


def test_curve_k2_flow(sources):
    c = spectra.trace_curve(sources[2], (0, 5, -1, 1), 0.25, 1e-10, line=LineSpec.flow())
    assert _crossing_near(c, 3.6180339887, 1e-8)


def test_curve_k2_plane_vertical_lines(sources):
    c = spectra.trace_curve(sources[2], (-0.5, 4.5, -3, 0.5), 0.25, 1e-9)
    assert {s.Q for s in c.vertical_segments} == {0.0, 2.0}


def _on_shared_lines(curve, x0, y0, step):
    on = lambda t, o: abs((t - o) / step - round((t - o) / step)) < 1e-12
    return [(p.x, p.y) for p in curve.points if on(p.x, x0) or on(p.y, y0)]


def _directed(a, b):
    return max(min(math.hypot(p[0] - q[0], p[1] - q[1]) for q in b) for p in a)


@pytest.mark.parametrize("k,line,region,resolved", [
    (1, "v=-1", (-1, 3, -2, 2), True),
    (2, "v=-Q", (0, 4, -2, 2), True),
    (2, None, (-0.5, 4.5, -3, 0.5), False),
    (3, "v=-1", (0, 3, -1.5, 1.5), False),
])
def test_curve_stable_under_step_halving(sources, k, line, region, resolved):
    tol = 1e-9
    ln = LineSpec.parse(line) if line else None
    coarse = spectra.trace_curve(sources[k], region, 0.5, tol, line=ln)
    fine = spectra.trace_curve(sources[k], region, 0.25, tol, line=ln)
    a = _on_shared_lines(coarse, region[0], region[2], 0.5)
    b = _on_shared_lines(fine, region[0], region[2], 0.5)
    assert len(a) == len(coarse.points)
    # a finer grid can only add crossings that a coarse edge skipped
    assert _directed(a, b) <= 2 * tol
    if resolved:
        assert spectra.hausdorff(a, b) <= 2 * tol


def test_trace_curve_rejects_bad_step(sources):
    with pytest.raises(InvalidInputError):
        spectra.trace_curve(sources[1], (0, 1, 0, 1), 0.0)


def test_vertical_line_k3(sources):
    vs = np.linspace(-1.5, -1.0, 11)
    rows = spectra.vertical_line_check(sources[3], 2.0, vs, (1, 2))
    assert all(ok for _, _, ok in rows)
    assert max(rel for _, rel, _ in rows) <= 1e-8


def _isolated_Q(points):
    return sorted(round(p.Q.real, 8) for p in points if abs(p.Q.imag) < 1e-8)


def test_isolated_points_k3_chromatic(sources):
    pts = spectra.isolated_points(sources[3], line=LineSpec.chromatic())
    assert _isolated_Q(pts) == [1.0]


def test_isolated_points_k3_flow(sources):
    pts = spectra.isolated_points(sources[3], line=LineSpec.flow())
    assert {1.0, 3.0} <= set(_isolated_Q(pts))


B5 = (3 + math.sqrt(5)) / 2


@pytest.mark.parametrize("k", [1, 2])
def test_isolated_point_at_b5(sources, k):
    pts = spectra.isolated_points(sources[k], v_fixed=-2.0)
    assert any(abs(q - B5) < 1e-8 for q in _isolated_Q(pts))


def test_isolated_points_need_decomposition():
    with pytest.raises(InvalidInputError):
        spectra.isolated_points(spectra.SpectralSource("petersen", 1), line=LineSpec.chromatic())


def test_isolated_point_is_dominated_by_one_branch(sources):
    pts = spectra.isolated_points(sources[3], line=LineSpec.chromatic())
    for p in pts:
        assert p.dominance_gap > 1e-10
        z = spectra.spectrum_at(sources[3], p.Q, p.v).eigenvalues[0][0]
        assert cmath.isfinite(z)
