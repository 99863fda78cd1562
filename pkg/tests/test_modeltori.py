import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wellsplit.errors import ConfigError, InsideCaustic, ZeroTorus
from wellsplit.modeltori import (
    CSV_HEADER,
    ebk_actions,
    model_agmon_F,
    model_agmon_F_quad,
    model_table,
    torus_from_actions,
    tunnel_distance,
)
from wellsplit.modeltori import _section_gradient
from wellsplit.potentials import locate_minima


@pytest.fixture(scope="module")
def curved_wells(curved):
    return locate_minima(curved)


@pytest.fixture(scope="module")
def sep_wells(separable):
    return locate_minima(separable)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.0, 0.2), st.floats(0.0, 0.2), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.booleans(), st.booleans())
def test_agmon_closed_form_matches_quadrature(i1, i2, s1, s2, neg1, neg2):
    _, right = locate_minima(__import__("wellsplit.potentials", fromlist=["PotentialSpec"]).PotentialSpec(
        "curved-quartic", alpha=0.25, a=1.0, omega=2.5, d=0.3))
    y = np.array([np.sqrt(2 * i1 / right.lam[0]), np.sqrt(2 * i2 / right.lam[1])])
    x = (y + np.array([s1, s2])) * np.where([neg1, neg2], -1, 1)
    assert model_agmon_F(right, y, x) == pytest.approx(model_agmon_F_quad(right, y, x), abs=1e-10)


def test_torus_invariants(curved_wells):
    _, right = curved_wells
    tor = torus_from_actions(right, (0.03, 0.01), k=(1, 0))
    lam = right.lam
    assert tor.E == 2 * lam[0] * 0.03 + 2 * lam[1] * 0.01
    assert np.sum(lam**2 * tor.umbilic**2) == pytest.approx(tor.E, rel=1e-14)
    assert np.allclose(right.to_frame(tor.umbilic_global), tor.umbilic)


def test_torus_errors(curved_wells):
    _, right = curved_wells
    with pytest.raises(ZeroTorus):
        torus_from_actions(right, (0.0, 0.0))
    with pytest.raises(ConfigError):
        torus_from_actions(right, (-0.1, 0.0))
    with pytest.raises(InsideCaustic):
        model_agmon_F(right, (0.5, 0.0), (0.1, 0.0))


def test_ebk_actions():
    assert ebk_actions((2, 1), 0.1) == pytest.approx((0.25, 0.15))
    assert ebk_actions((2, 1), 0.1, maslov_shift=False) == pytest.approx((0.2, 0.1))
    with pytest.raises(ConfigError):
        ebk_actions((-1, 0), 0.1)


def test_ebk_energies_are_harmonic_levels(curved_wells):
    _, right = curved_wells
    h = 0.05
    for k in [(0, 0), (2, 0), (1, 1)]:
        tor = torus_from_actions(right, ebk_actions(k, h))
        lam = right.lam
        assert tor.E == pytest.approx(h * (lam[0] * (2 * k[0] + 1) + lam[1] * (2 * k[1] + 1)), rel=1e-14)


def test_tunnel_distance_separable_zero_torus(sep_wells):
    # two harmonic wells lam = (2, 3) centred at -+1: F_0 + F_0 on x1 = 0 is
    # minimal at x2 = 0 with value 2 * (lam1 / 2) = 2 and curvature 2 lam2 = 6
    left, right = sep_wells
    path = tunnel_distance(left, right, np.zeros(2), np.zeros(2))
    assert path.action == pytest.approx(2.0, rel=1e-12)
    assert path.curvature == pytest.approx(6.0, rel=1e-5)
    assert path.x_tilde[1] == pytest.approx(0.0, abs=1e-9)
    assert not path.on_caustic


def test_tunnel_distance_is_stationary(curved_wells):
    left, right = curved_wells
    tor = torus_from_actions(right, ebk_actions((1, 0), 0.05))
    path = tunnel_distance(left, right, tor.umbilic, tor.umbilic)
    assert not path.on_caustic
    x2 = path.x_tilde[1]
    assert abs(_section_gradient(left, right, tor.umbilic, tor.umbilic, x2)) <= 1e-9
    # the analytic gradient agrees with a difference quotient of the phase
    phi = lambda s: model_agmon_F(left, tor.umbilic, [0, s], False) + model_agmon_F(right, tor.umbilic, [0, s], False)  # noqa: E731
    d = 1e-5
    fd = (phi(x2 - 0.01 + d) - phi(x2 - 0.01 - d)) / (2 * d)
    assert fd == pytest.approx(_section_gradient(left, right, tor.umbilic, tor.umbilic, x2 - 0.01), rel=1e-6)
    assert path.curvature > 0


def test_model_table_decreasing_action(curved_wells):
    left, right = curved_wells
    rows = model_table(left, right, [(0, 0), (1, 0), (2, 0)], [0.05])
    assert len(rows[0]) == len(CSV_HEADER.split(","))
    actions = [r[8] for r in rows]
    assert actions[0] > actions[1] > actions[2]
