import math

import mpmath
import numpy as np
import pytest

from pottstm import analysis as an
from pottstm import partitions as pt
from pottstm import spectra
from pottstm import transfer as tm
from pottstm.errors import InvalidInputError
from pottstm.graphs import build_petersen, fk_partition_poly, spin_transfer_trace


@pytest.mark.parametrize("n,expected", [(1, 4), (2, 0), (3, 1), (4, 2), (6, 3)])
def test_beraha_integers(n, expected):
    assert float(an.beraha(n)) == expected


def test_beraha_golden():
    assert float(an.beraha(5)) == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-15)
    assert an.beraha(5).exact == "(3+sqrt(5))/2"


def test_beraha_general_matches_cosine():
    for n in (7, 10, 13):
        assert float(an.beraha(n)) == pytest.approx(4 * math.cos(math.pi / n) ** 2, rel=1e-15)
    with mpmath.workdps(40):
        assert abs(an.beraha(7, dps=40).value - 4 * mpmath.cos(mpmath.pi / 7) ** 2) < mpmath.mpf(10) ** -38


def test_beraha_rejects_zero():
    with pytest.raises(InvalidInputError):
        an.beraha(0)


@pytest.fixture(scope="module")
def audits(dec):
    return {N: an.integer_q_audit(3, N, dec(3)) for N in range(4)}


def test_audit_q0_cancels_everything(audits):
    rep = audits[0]
    assert rep.surviving_count == 0 and rep.rho == 0
    assert rep.checks["all_cancel"]


def test_audit_q1_single_survivor(audits):
    rep = audits[1]
    assert rep.surviving_count == 1
    assert rep.character_counts() == {(0, ()): 1}


def test_audit_q2_ising(audits):
    rep = audits[2]
    assert rep.surviving_count == 16
    assert rep.character_counts() == {(0, ()): 8, (1, (1,)): 8}
    assert an.audit_spin_agreement(rep)
    assert an.audit_spin_charpoly(rep)


def test_audit_q3_counts(audits):
    k = 3
    assert audits[3].character_counts() == {(0, ()): 3 ** k // 2 + 1, (1, (1,)): 3 ** k, (2, (1, 1)): 3 ** k // 2}


@pytest.mark.parametrize("N", range(4))
def test_audit_sum_rule(audits, N):
    rep = audits[N]
    assert rep.sum_rule_holds()
    assert rep.sum_rule() == N ** 4
    assert not rep.unresolved
    assert all(rep.checks.values())


@pytest.mark.parametrize("N", [2, 3])
def test_reconstructed_trace_matches_oracles(audits, N):
    rep = audits[N]
    v = rep.v_points[0]
    assert rep.reconstruct_trace(2) == spin_transfer_trace(3, 2, N, v)
    assert rep.reconstruct_trace(2) == fk_partition_poly(build_petersen(m=6, k=3)).evaluate(N, v)


def test_audit_json_is_serializable(audits):
    import json

    text = json.dumps(audits[2].to_json_obj(), sort_keys=True)
    assert '"surviving_eigenvalues": 16' in text


@pytest.mark.parametrize("ell", range(1, 9))
def test_amplitude_vanishes_at_zero_except_sign_irrep(ell):
    for lam in pt.young_diagrams(ell):
        a0 = tm.amplitude(ell, lam)(0)
        if lam == (1,) * ell:
            assert a0 == (-1) ** ell
        else:
            assert a0 == 0


@pytest.mark.parametrize("k,line,expected", [
    (1, "flow", 3.0),
    (2, "flow", 3.6180339887),
    (2, "chromatic", 2.6383423072),
    (3, "v=-4", 3.5918146982),
])
def test_qc_examples(k, line, expected):
    est = an.qc_crossing(k, line)
    assert est.found
    assert est.value == pytest.approx(expected, abs=1e-8)
    assert est.symmetric_dominance_verified


@pytest.mark.parametrize("k", [1, 2, 3])
def test_chromatic_qc_below_three(k):
    assert an.qc_crossing(k, "chromatic").value < 3


def test_qc_bracket_contains_value():
    est = an.qc_crossing(2, "flow", tol=1e-10)
    lo, hi = est.bracket
    assert lo <= est.value <= hi and hi - lo <= 1e-10


def test_qc_not_found_is_reported():
    est = an.qc_crossing(1, "flow", q_min=4.0, q_max=6.0)
    assert not est.found and est.value is None and est.message


def test_qc_rejects_q_proportional_line():
    with pytest.raises(InvalidInputError):
        an.qc_crossing(1, "Q=-v")


def test_format_qc_table():
    text = an.format_qc_table([(1, 3.0), (2, None)], "flow")
    lines = text.splitlines()
    assert lines[0] == "flow"
    assert lines[2] == "  1    3.0000000000"
    assert lines[3].split() == ["2", "-"]


def test_xi_inverse_on_toy_spectrum():
    spec = spectra.spectrum_from_values(1, -1, {(0, ()): [4.0, 2.0], (1, (1,)): [1.0]})
    assert an.xi_inverse(spec, 0) == 0
    assert an.xi_inverse(spec, 1) == pytest.approx(math.log(2))
    assert an.xi_inverse(spec, 2) == pytest.approx(math.log(4))
    with pytest.raises(InvalidInputError):
        an.xi_inverse(spec, 3)


def test_xi_inverse_counts_conjugate_pairs_once():
    spec = spectra.spectrum_from_values(1, -1, {(0, ()): [2j, -2j, 1.0]})
    assert an.xi_inverse(spec, 1) == pytest.approx(math.log(2))


def test_xi_curve_disordered_region():
    xc = an.xi_curve(3, 1.5, [-0.1])
    (v, xi1, xi2), = xc.samples
    assert v == -0.1 and xi1 > 0.1 and xi2 >= xi1


@pytest.mark.parametrize("name,first", [("table1.csv", 3), ("table2.csv", 1), ("table3.csv", 1)])
def test_bundled_tables(name, first):
    data = an.load_table(name)
    assert data[0][0] == first and data[-1][0] in (10, 11)
    assert [k for k, _ in data] == list(range(first, data[-1][0] + 1))


def test_unknown_table():
    with pytest.raises(InvalidInputError):
        an.load_table("table9.csv")


def test_power_law_round_trip():
    ks = np.arange(3, 12)
    data = [(int(k), 5.0 - 2.5 * k ** -1.3) for k in ks]
    fit = an.fit_extrapolate(data, "power-law")
    assert fit.qc == pytest.approx(5.0, abs=1e-6)
    assert fit.params["Delta"] == pytest.approx(1.3, abs=1e-6)


def test_power_law_flags_non_monotone_data():
    data = [(k, 3 + (-1) ** k / k) for k in range(2, 9)]
    fit = an.fit_extrapolate(data, "power-law")
    assert math.isnan(fit.qc) and "monotone" in fit.diagnostic


def test_parity_round_trip():
    data = [(k, 4.0 + (-1.0 if k % 2 == 0 else -2.0) * k ** -1.5) for k in range(2, 12)]
    fit = an.fit_extrapolate(data, "parity")
    assert fit.qc == pytest.approx(4.0, abs=1e-6)
    assert len(fit.spread) == len(data) - 5 + 1


def test_bulirsch_stoer_exact_on_power():
    h = [1 / k for k in range(4, 10)]
    vals = [2.0 + 0.7 * x for x in h]
    assert an.bulirsch_stoer(h, vals, 1.0) == pytest.approx(2.0, abs=1e-10)


def test_linear_in_inverse_k_round_trip():
    data = [(k, 1.5 + 2 / k - 3 / k ** 2) for k in range(3, 10)]
    assert an.fit_extrapolate(data, "linear-in-1/k").qc == pytest.approx(1.5, abs=1e-10)


def test_fit_rejects_unknown_model():
    with pytest.raises(InvalidInputError):
        an.fit_extrapolate([(k, 1.0) for k in range(1, 8)], "spline")


def test_flow_table_extrapolation():
    fit = an.fit_extrapolate(an.load_table("table2.csv"), "parity")
    assert 5.68 <= fit.qc <= 5.70


def test_chromatic_table_extrapolation():
    fit = an.fit_extrapolate(an.load_table("table3.csv"), "parity")
    assert 2.858 <= fit.qc <= 2.864


def test_predicted_branch_angles():
    assert an.BranchAsymptotics.predicted(1) == pytest.approx([-math.pi / 2, math.pi / 2])
    assert len(an.BranchAsymptotics.predicted(3)) == 6


@pytest.mark.parametrize("k", [1, 2])
def test_branch_asymptotics(k):
    b = an.branch_asymptotics(k, samples=360)
    assert b.count == 2 * k
    assert b.conjugate_closed
    for got, want in zip(b.angles, an.BranchAsymptotics.predicted(k)):
        assert abs(got - want) < 0.05


def test_audit_rejects_mismatched_decomposition(dec):
    with pytest.raises(InvalidInputError):
        an.integer_q_audit(3, 2, dec(2))


@pytest.mark.parametrize("k,expected,tol", [(1, -1 / 3, 1e-6), (2, -0.347841, 2e-6), (3, -1 / 3, 1e-6)])
def test_upper_boundary_slope(dec, k, expected, tol):
    res = an.upper_boundary_slope(k, source=spectra.SpectralSource.from_decomposition(dec(k)))
    assert res.slope == pytest.approx(expected, abs=tol)
    assert all(v < 0 for _, v in res.samples)
