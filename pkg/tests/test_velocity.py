import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from irdecoherence import velocity as V
from irdecoherence.environment import VACUUM, EnvironmentState, exponent as field_exponent
from irdecoherence.errors import Unbounded
from irdecoherence.phase_space import WeylLabel, product_flow, PhasePoint
from irdecoherence.spectral import Boundedness, FormFactor, field_quadrature, weighted_norm_sq


@pytest.fixture(scope="module")
def critical():
    return V.VelocityModel.build(FormFactor(sigma=1.0, cutoff=2.0, amplitude=1.0))


@pytest.fixture(scope="module")
def regular():
    return V.VelocityModel.build(FormFactor(sigma=2.0, cutoff=1.0).with_norm(0.25))


def test_build_defaults(critical, regular):
    assert critical.boundedness is Boundedness.CRITICAL
    assert critical.alpha_sq == 0.0
    assert critical.metadata()["drift_frozen"] is True
    assert regular.alpha_sq == pytest.approx(0.75, rel=1e-14)
    with pytest.raises(Unbounded):
        V.VelocityModel.build(FormFactor(sigma=2.0).with_norm(1.01))
    with pytest.raises(ValueError):
        V.VelocityModel.build(FormFactor(sigma=2.0).with_norm(0.2), alpha_sq=1.5)


def test_closed_form_law(critical):
    for t in np.geomspace(1e-3, 100.0, 40):
        assert V.phi(critical, t) == pytest.approx(0.25 * math.log1p(t * t), rel=1e-9)
    _, chi = V.reduced_weyl(critical, WeylLabel(0.0, 1.0), 3.0)
    assert chi == pytest.approx(10 ** -0.25, rel=1e-10)
    assert chi == pytest.approx(0.5623, abs=5e-5)


@given(b=st.floats(-4.0, 4.0), t=st.floats(0.0, 50.0))
def test_exponent_quadratic_in_b(b, t):
    m = V.VelocityModel.build(FormFactor(sigma=2.0, cutoff=1.0).with_norm(0.25))
    assert V.exponent(m, 2 * b, t) == pytest.approx(4 * V.exponent(m, b, t), rel=1e-14, abs=1e-300)


def test_t_zero_and_b_zero(regular):
    assert V.exponent(regular, 1.3, 0.0) == 0.0
    lab, chi = V.reduced_weyl(regular, WeylLabel(0.7, 0.0), 12.0)
    assert lab == WeylLabel(0.7, 0.0) and chi == 1.0
    p = V.flow(regular, WeylLabel(0.7, 0.0), 12.0)
    assert p.a == 0.7 and not np.any(p.u.values) and not np.any(p.v.values)
    p0 = V.flow(regular, WeylLabel(0.7, 1.1), 0.0)
    assert p0.a == 0.7 and p0.b == 1.1 and not np.any(p0.u.values) and not np.any(p0.v.values)


def test_grid_field_components_reproduce_exponent(regular):
    """The sampled (u, v) give the same exponent as the kernel-identity path."""
    label = WeylLabel(0.3, 1.2)
    for t in (0.5, 5.0, 40.0):
        p = V.flow(regular, label, t, grid=field_quadrature(regular.form_factor, t_max=t, n=20))
        assert field_exponent(p.u, p.v) == pytest.approx(V.exponent(regular, label.b, t), rel=1e-9)


def test_thermal_exponent_grid_consistency(regular):
    env = EnvironmentState.thermal(0.8)
    label = WeylLabel(0.0, 1.0)
    t = 7.0
    p = V.flow(regular, label, t, grid=field_quadrature(regular.form_factor, t_max=t))
    assert field_exponent(p.u, p.v, env) == pytest.approx(V.exponent(regular, 1.0, t, env), rel=1e-9)


def test_zero_coupling_matches_product_flow():
    m = V.VelocityModel.build(FormFactor(sigma=2.0, amplitude=0.0))
    assert m.alpha_sq == 1.0
    label = WeylLabel(0.4, -1.5)
    grid = field_quadrature(FormFactor(sigma=2.0), t_max=3.0)
    p = V.flow(m, label, 3.0, grid=grid)
    q = product_flow(PhasePoint.particle(label, *grid), 0.0, 3.0)
    assert p.a == pytest.approx(q.a, abs=1e-15) and p.b == q.b
    assert not np.any(p.u.values) and not np.any(p.v.values)


def test_exponent_independent_of_a(regular):
    c = V.decoherence_curve(regular, WeylLabel(0.0, 1.0), [0.5, 5.0])
    d = V.decoherence_curve(regular, WeylLabel(9.0, 1.0), [0.5, 5.0])
    np.testing.assert_array_equal(c.exponent, d.exponent)


def test_envelope_properties(critical, regular):
    times = np.concatenate([[0.0], np.geomspace(0.01, 1e4, 80)])
    env_c = V.phi_envelope(critical, times)
    assert env_c[0] == 0.0
    assert np.all(np.diff(env_c) >= 0)
    np.testing.assert_allclose(env_c, 0.25 * np.log1p(times ** 2), rtol=1e-9)
    env_r = V.phi_envelope(regular, times)
    assert np.all(np.diff(env_r) >= 0)
    sup = weighted_norm_sq(regular.form_factor, -3).value
    assert np.all(env_r <= sup * (1 + 1e-12))


def test_envelope_trend(critical, regular):
    times = np.geomspace(1.0, 1e6, 121)
    assert V.envelope_trend(times, V.phi_envelope(critical, times)).diverging
    assert not V.envelope_trend(times, V.phi_envelope(regular, times)).diverging


def test_curve_invariants_and_threads(regular):
    times = np.linspace(0.0, 30.0, 31)
    c1 = V.decoherence_curve(regular, WeylLabel(0.2, 1.5), times)
    c2 = V.decoherence_curve(regular, WeylLabel(0.2, 1.5), times, workers=3)
    assert c1.to_csv() == c2.to_csv()
    np.testing.assert_array_equal(c1.abs_chi, np.exp(-c1.exponent))
    assert np.all(c1.b_t == 1.5)
    assert np.all(c1.exponent >= 0)
    header = c1.to_csv().splitlines()[0]
    assert header == "t,a_t,b_t,abs_chi,exponent,envelope_phi"
    assert c1.metadata["alpha_sq_rule"] == "1 - ||M^-1 h||^2"
