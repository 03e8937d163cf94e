import math

import numpy as np
import pytest

from irdecoherence import oracle as O, velocity as V
from irdecoherence.environment import EnvironmentState
from irdecoherence.errors import Unbounded, WindowTooShort
from irdecoherence.phase_space import WeylLabel
from irdecoherence.spectral import FormFactor, weighted_norm_sq


@pytest.fixture(scope="module")
def regular():
    return FormFactor(sigma=2.0, cutoff=1.0).with_norm(0.25)


def test_generator_infinitesimally_symplectic(regular):
    for kind, w0 in (("velocity", None), ("position", 1.0)):
        sys_ = O.build(regular, kind, 64, omega0=w0)
        S, Om = sys_.dense_generator(), sys_.canonical_form()
        assert np.max(np.abs(S @ Om + Om @ S.T)) <= 1e-12


def test_zero_coupling_block_diagonal():
    sys_ = O.build(FormFactor(2.0, amplitude=0.0), "velocity", 16)
    S = sys_.dense_generator()
    m = sys_.n + 1
    # particle rows/cols (0 and m) decouple from the field
    assert not np.any(S[0, 1:m]) and not np.any(S[m, m + 1:]) and not np.any(S[1:m, m])


def test_velocity_momentum_row_conserved(regular):
    sys_ = O.build(regular, "velocity", 64)
    assert not np.any(sys_.dense_generator()[sys_.n + 1])


def test_norm_discretization_converges(regular):
    exact = weighted_norm_sq(regular, -2).value
    errs = [abs(O.build(regular, "velocity", n).discrete_norm_sq - exact) for n in (64, 128, 256)]
    # at least first order: doubling N at least halves the error
    assert errs[1] <= 0.5 * errs[0] and errs[2] <= 0.5 * errs[1]


def test_supercritical_discretization_rejected():
    with pytest.raises(Unbounded):
        O.build(FormFactor(2.0).with_norm(1.05), "velocity", 32)


def test_propagator_symplectic_and_group_law(regular, rng):
    sys_ = O.build(regular, "position", 40, omega0=1.0)
    Om = sys_.canonical_form()
    for _ in range(5):
        t, s = rng.uniform(-10, 10, 2)
        R = O.propagator(sys_, t)
        assert np.max(np.abs(R.T @ Om @ R - Om)) <= 1e-10
        vec = rng.normal(size=sys_.dim)
        lhs = O.propagate(sys_, vec, t + s)
        rhs = O.propagate(sys_, O.propagate(sys_, vec, s), t)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(lhs)))
    assert np.array_equal(O.propagate(sys_, vec, 0.0), vec)


def test_single_free_mode_rotation():
    sys_ = O.build(FormFactor(2.0, amplitude=0.0), "velocity", 2)
    w = sys_.omegas[0]
    vec = np.zeros(sys_.dim)
    vec[1] = 1.0  # u_1
    t = 2.3
    out = O.propagate(sys_, vec, t)
    assert out[1] == pytest.approx(math.cos(w * t), abs=1e-13)
    assert out[sys_.n + 2] == pytest.approx(-w * math.sin(w * t), abs=1e-13)


def test_b_zero_chi_exactly_one(regular):
    sys_ = O.build(regular, "velocity", 128)
    for t in (1.0, 7.0):
        cmp_ = O.oracle_chi(sys_, WeylLabel(0.4, 0.0), t)
        assert cmp_.oracle == 1.0 and cmp_.analytic == 1.0


def test_position_zero_coupling_chi_one():
    sys_ = O.build(FormFactor(2.0, amplitude=0.0), "position", 32, omega0=1.0)
    for t in (0.5, 9.0):
        assert O.oracle_chi(sys_, WeylLabel(0.3, 1.0), t).oracle == 1.0


def test_velocity_flow_matches_oracle(regular):
    sys_ = O.build(regular, "velocity", 1024)
    model = V.VelocityModel.build(regular)
    label = WeylLabel(0.3, 1.1)
    vec = O.propagate(sys_, O.initial_vector(sys_, label), 5.0)
    p = O.from_vector(sys_, vec)
    q = V.flow(model, label, 5.0, grid=(sys_.omegas, sys_.widths))
    assert p.a == pytest.approx(q.a, abs=1e-4) and p.b == q.b
    np.testing.assert_allclose(p.u.values, q.u.values, atol=1e-4)
    np.testing.assert_allclose(p.v.values, q.v.values, atol=1e-4)


def test_position_oracle_matches_diagonalization(regular):
    sys_ = O.build(FormFactor(2.0, cutoff=1.0).with_norm(0.5), "position", 200, omega0=1.0)
    for t in (1.0, 8.0):
        assert O.oracle_chi(sys_, WeylLabel(0.2, 0.9), t).abs_diff <= 1e-10


def test_thermal_limit_recovers_vacuum(regular):
    sys_ = O.build(regular, "velocity", 256)
    vec = O.propagate(sys_, O.initial_vector(sys_, WeylLabel(0, 1)), 4.0)
    beta = 50.0 / sys_.omegas[0]
    assert abs(O.oracle_exponent(sys_, vec, EnvironmentState.thermal(beta))
               - O.oracle_exponent(sys_, vec)) <= 1e-10


def test_fit_drift_free_particle():
    sys_ = O.build(FormFactor(2.0, amplitude=0.0), "velocity", 64)
    fit = O.fit_drift(sys_, t_window=(1.0, 5.0))
    assert fit.alpha_sq == pytest.approx(1.0, abs=1e-12)


def test_fit_drift_window_checks(regular):
    sys_ = O.build(regular, "velocity", 64)
    with pytest.raises(WindowTooShort):
        O.fit_drift(sys_, t_window=(5.0, 5.0))
    with pytest.raises(WindowTooShort):
        O.fit_drift(sys_, t_window=(1.0, 5.0), num=4)
    with pytest.raises(WindowTooShort):
        O.fit_drift(sys_, t_window=(10.0, 1e4))


def test_convergence_order_helper():
    assert O.convergence_order([10, 20, 40], [1e-2, 2.5e-3, 6.25e-4]) == pytest.approx(2.0)
    cmp_ = O.OracleComparison("abs_chi", 0.5, 0.5001, 1e-4, 256, 1.9)
    assert set(cmp_.to_dict()) == {"quantity", "analytic", "oracle", "abs_diff", "N",
                                   "convergence_order_estimate"}
