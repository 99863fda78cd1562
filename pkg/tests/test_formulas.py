from math import e, exp, log, pi, sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wellsplit.dynamics import LibrationTable
from wellsplit.errors import AssumptionViolated, EnergyOutOfRegime, NoBracket, TurningPointDegeneracy
from wellsplit.formulas import (
    SplittingEstimate,
    action_expansion_check,
    b_coeff,
    barrier_action_1d,
    check_splitting_assumptions,
    crossing_splitting,
    excited_splitting_1d,
    floquet_exponent_check,
    ground_splitting_1d,
    harmonic_frequency_1d,
    inputs_digest,
    ll_splitting_1d,
    solve_matching_energy,
    tee_splitting,
    transverse_splitting,
    turning_points_1d,
    well_period_1d,
)
from wellsplit.wkb import WkbConstants


def test_b0_exact():
    assert b_coeff(0) == pytest.approx(sqrt(pi / e), rel=1e-15, abs=1e-12)


@given(st.integers(0, 400))
def test_b_decreasing_above_one(m):
    assert 1 < b_coeff(m + 1) < b_coeff(m)


def test_b_limit_and_log_space_continuity():
    assert 1 < b_coeff(200) < 1.001
    # the two evaluation branches meet smoothly at m = 20 / 21
    ratio = b_coeff(21) / b_coeff(20)
    assert 0.999 < ratio < 1


def test_b_rejects_negative():
    with pytest.raises(ValueError):
        b_coeff(-1)


def test_quartic_1d_classical_data(quartic_1d):
    # (x^2 - 1)^2: barrier action at E -> 0 is 4/3, omega = 2, small-E period
    assert barrier_action_1d(quartic_1d, 1e-7) == pytest.approx(4 / 3, abs=1e-5)
    assert harmonic_frequency_1d(quartic_1d, 1.0) == pytest.approx(2.0, rel=1e-8)
    assert well_period_1d(quartic_1d, 1e-4) == pytest.approx(pi, rel=1e-3)
    a, b = turning_points_1d(quartic_1d, 0.25)
    assert a == pytest.approx(sqrt(0.5)) and b == pytest.approx(sqrt(1.5))
    with pytest.raises(TurningPointDegeneracy):
        turning_points_1d(quartic_1d, 1.5)


def test_harmonic_1d_period_and_action():
    # v = (|x| - 1)^2 per well: harmonic with omega = 1, period 2 pi
    v = lambda x: (np.abs(x) - 1.0) ** 2  # noqa: E731
    assert well_period_1d(v, 0.3) == pytest.approx(2 * pi, rel=1e-9)
    # int_{-x0}^{x0} sqrt((1-|x|)^2 - E) with x0 = 1 - sqrt(E)
    E = 0.09
    r = sqrt(E)
    exact = 2 * (0.5 * (1 * sqrt(1 - E) - E * log((1 + sqrt(1 - E)) / r)))
    assert barrier_action_1d(v, E) == pytest.approx(exact, rel=1e-10)


def test_estimate_record_is_reproducible():
    a = SplittingEstimate.build("LL", -1, 0.1, 3.0, 0.5, E=0.2)
    b = SplittingEstimate.build("LL", -1, 0.1, 3.0, 0.5, E=0.2)
    assert a == b
    assert a.value == 0.5 * exp(-3.0)
    assert a.inputs_digest == inputs_digest(method="LL", m=-1, hbar=0.1, E=0.2)
    assert a.row(a.value)[-1] == 1.0
    with pytest.raises(ValueError):
        SplittingEstimate.build("magic", 0, 0.1, 1.0, 1.0)


def test_excited_regime_check(quartic_1d):
    with pytest.raises(EnergyOutOfRegime):
        excited_splitting_1d(quartic_1d, 3, 0.04, 2.0)
    excited_splitting_1d(quartic_1d, 3, 0.04, 2.0, strict=False)


def test_ground_and_excited_m0_agree(quartic_1d):
    g = ground_splitting_1d(quartic_1d, 0.03, 2.0)
    x = excited_splitting_1d(quartic_1d, 0, 0.03, 2.0)
    assert g.value == pytest.approx(x.value, rel=1e-14)


def test_ll_at_level_energy(quartic_1d):
    # at the level energy LL misses only the factor b_m, which tends to 1 with m
    from wellsplit.spectral import solve_1d
    h = 0.02
    s = solve_1d(quartic_1d, h, L=2.5, n=4001, count=4)
    ratios = []
    for m in range(4):
        E = 0.5 * (s.even[m] + s.odd[m])
        ratios.append(ll_splitting_1d(quartic_1d, E, h).value / s.splittings[m])
        assert ratios[-1] * b_coeff(m) == pytest.approx(1.0, abs=0.015)
    assert ratios == sorted(ratios)


def _separable_table(lam1=2.0, lam2=3.0):
    v = lambda x: (x * x - 1) ** 2  # noqa: E731
    E = np.geomspace(1e-3, 0.7, 60)
    S = np.array([barrier_action_1d(v, x) for x in E])
    z = np.zeros((60, 2))
    return LibrationTable(E=E, T=np.ones(60), S_E=S, beta=np.full(60, lam2), x_E=z, yL=z, yR=z), v


def test_matching_energy_separable():
    table, _ = _separable_table()
    for m in range(3):
        assert solve_matching_energy(table, 2.0, 3.0, m, 0.05) == pytest.approx(0.05 * 2 * (2 * m + 1), rel=1e-12)
    with pytest.raises(NoBracket):
        solve_matching_energy(table, 2.0, 3.0, 10, 0.1)


def test_transverse_collapses_to_excited_1d():
    table, v = _separable_table()
    ok = {"gap_ok": True}
    for m in range(3):
        t = transverse_splitting(table, 2.0, 3.0, m, 0.04, ok)
        x = excited_splitting_1d(v, m, 0.04, 2.0)
        assert t.prefactor == pytest.approx(x.prefactor, rel=1e-14)
        assert t.value == pytest.approx(x.value, rel=1e-6)


def test_assumption_checks():
    with pytest.raises(AssumptionViolated):
        check_splitting_assumptions({"gap_ok": False}, True)
    with pytest.raises(AssumptionViolated):
        check_splitting_assumptions({"gap_ok": True}, False)
    with pytest.raises(AssumptionViolated):
        floquet_exponent_check(3.0, 3.0, 10.0, 1.0, {"gap_ok": False})


def test_floquet_exponent_identity():
    direct, formula, gap = floquet_exponent_check(3.0, 3.0, 12.0, 1.0)
    assert formula == 3.0 and gap == 0.0
    _, formula, _ = floquet_exponent_check(2.5, 2.5, 10.0, exp(0.25))
    assert formula == pytest.approx(2.4)


def test_crossing_and_tee_separable_harmonic_limit():
    # separable constants: J = 2, sigma = 2, P0 = 1, D = lam2 = 3
    w = WkbConstants(lambda1=2.0, lambda2=3.0, S0=4 / 3, J=2.0, sigma=2.0, P0=1.0, D=3.0, x0=(0.0, 0.0),
                     T_const=1.0)
    h = 0.05
    c = crossing_splitting(w, 0, h)
    # ground splitting of the 1-D quartic, 8 sqrt(h/pi) sqrt(lam1) ... with lam1 = 2
    assert c.prefactor == pytest.approx(4 * sqrt(h) * sqrt(2.0 * 3.0) * 4.0 / (sqrt(pi) * sqrt(3.0)), rel=1e-14)
    t = tee_splitting(w, 0, h, 1.2)
    assert t.prefactor == pytest.approx(b_coeff(0) * h * 2.0 / pi, rel=1e-14)
    assert t.exponent == pytest.approx(1.2 / h)


def test_action_expansion_forms():
    r, q = action_expansion_check(0.1, 1.0, 1.0, 2.0, 3.0, "printed")
    assert r == pytest.approx(-0.1 / 4 * (1 + log(2)) - 0.3)
    assert q == pytest.approx(r / 0.1)
    rc, _ = action_expansion_check(0.1, 1.0, 1.0, 2.0, 3.0, "corrected")
    assert rc == pytest.approx(0.1 / 4 * (1 + 2 * log(2)) + 0.15)
    with pytest.raises(ValueError):
        action_expansion_check(0.1, 1.0, 1.0, 2.0, 3.0, "other")


def test_corrected_action_expansion_on_quartic(separable, separable_instanton):
    from wellsplit.dynamics import compute_libration, truncation_time
    out = []
    for E in (0.08, 0.02):
        lib = compute_libration(separable, E, inst=separable_instanton)
        out.append(action_expansion_check(E, lib.S_E, separable_instanton.S0, 2.0,
                                          truncation_time(separable_instanton, E), "corrected")[1])
    assert abs(out[1]) <= 0.5 * abs(out[0])
