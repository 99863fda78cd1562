import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wellsplit.errors import ConfigError, DegenerateMinimum, EnergyAboveBarrier, EnergyNonPositive
from wellsplit.potentials import (
    PotentialSpec,
    check_quasi1d_assumptions,
    eval_with_derivatives,
    locate_minima,
    well_boundary,
)

coords = st.floats(-2.5, 2.5, allow_nan=False)

potentials = st.builds(
    lambda fam, alpha, a, omega, c, d: PotentialSpec(
        fam, alpha=alpha, a=a, omega=omega,
        c=c if fam != "separable-quartic" else 0.0,
        d=d if fam == "curved-quartic" else 0.0),
    st.sampled_from(["separable-quartic", "coupled-quartic", "curved-quartic"]),
    st.floats(0.2, 2.0), st.floats(0.5, 1.5), st.floats(1.0, 3.0), st.floats(0.0, 1.0), st.floats(-0.3, 0.3),
)


def test_reflection_symmetry_is_bitwise(curved):
    rng = np.random.default_rng(1)
    x1, x2 = rng.uniform(-2.5, 2.5, (2, 10_000))
    assert np.array_equal(curved(x1, x2), curved(-x1, x2))


@settings(max_examples=60, deadline=None)
@given(potentials, coords, coords)
def test_derivatives_match_finite_differences(pot, x1, x2):
    h = 1e-5
    g = pot.gradient(x1, x2)
    fd = np.array([(pot(x1 + h, x2) - pot(x1 - h, x2)) / (2 * h), (pot(x1, x2 + h) - pot(x1, x2 - h)) / (2 * h)])
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(g).max()))
    H = pot.hessian(x1, x2)
    fdh = np.column_stack([(pot.gradient(x1 + h, x2) - pot.gradient(x1 - h, x2)) / (2 * h),
                           (pot.gradient(x1, x2 + h) - pot.gradient(x1, x2 - h)) / (2 * h)])
    assert np.allclose(H, fdh, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(H).max()))
    assert H[0, 1] == H[1, 0]


@settings(max_examples=40, deadline=None)
@given(potentials)
def test_minima_are_mirror_images(pot):
    left, right = locate_minima(pot)
    assert np.allclose(left.minimum, right.minimum * [-1, 1], atol=1e-12)
    assert np.allclose(left.lam, right.lam, rtol=1e-12)
    assert abs(pot(*right.minimum)) < 1e-14


def test_separable_harmonic_data(separable):
    _, right = locate_minima(separable)
    assert right.lam == pytest.approx([2.0, 3.0], rel=1e-14)
    info = check_quasi1d_assumptions(separable)
    assert info["gap_ok"] is False
    assert separable.barrier == 1.0


def test_curved_default_has_gap(curved):
    info = check_quasi1d_assumptions(curved)
    assert info["gap_ok"]
    assert info["lambda1"] == pytest.approx(0.99142, abs=1e-5)
    assert info["unique_libration_family"] == "assumed"


def test_eval_with_derivatives(curved):
    V, g, H = eval_with_derivatives(curved, (0.3, -0.2))
    assert V == curved(0.3, -0.2)
    assert np.array_equal(g, curved.gradient(0.3, -0.2))


@pytest.mark.parametrize("E", [0.01, 0.1, 0.2])
def test_boundary_on_level_set(curved, E):
    wb = well_boundary(curved, E, "L")
    vals = curved(wb.polyline[:, 0], wb.polyline[:, 1])
    assert np.max(np.abs(vals - E) / E) <= 1e-9
    assert np.all(wb.polyline[:, 0] < 0)


def test_boundary_area_harmonic_limit(separable):
    # small E: ellipse with semi-axes sqrt(E)/lam_j
    E = 1e-4
    wb = well_boundary(separable, E, "R", resolution=256)
    assert wb.area() == pytest.approx(np.pi * E / 6.0, rel=2e-2)


def test_boundary_errors(curved):
    with pytest.raises(EnergyNonPositive):
        well_boundary(curved, 0.0)
    with pytest.raises(EnergyAboveBarrier):
        well_boundary(curved, curved.barrier * 1.01)


def test_config_errors():
    with pytest.raises(ConfigError):
        PotentialSpec("banana")
    with pytest.raises(ConfigError):
        PotentialSpec("separable-quartic", c=1.0)
    with pytest.raises(ConfigError):
        PotentialSpec("curved-quartic", alpha=-1.0)
    with pytest.raises(DegenerateMinimum):
        PotentialSpec("curved-quartic", alpha=0.25, omega=0.1, d=2.0)
