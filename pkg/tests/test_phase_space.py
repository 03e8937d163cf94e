import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from irdecoherence.errors import GridMismatch
from irdecoherence.phase_space import (FieldVector, PhasePoint, WeightRole, WeylLabel, field_flow,
                                       particle_flow, product_flow)

finite = st.floats(-5.0, 5.0)
times = st.floats(-20.0, 20.0)


def random_point(rng, n=16):
    grid = np.sort(rng.uniform(0.05, 4.0, n))
    weights = rng.uniform(0.1, 1.0, n)
    return PhasePoint(rng.normal(), FieldVector(grid, rng.normal(size=n), WeightRole.MINUS_ONE, weights),
                      rng.normal(), FieldVector(grid, rng.normal(size=n), WeightRole.PLUS_ONE, weights))


def test_quarter_period_rotation():
    out = particle_flow(WeylLabel(1.0, 0.0), 1.0, math.pi / 2)
    assert out.a == pytest.approx(0.0, abs=1e-15)
    assert out.b == pytest.approx(-1.0, abs=1e-15)


@given(a=finite, b=finite, t=times)
def test_free_particle_branch_is_exact(a, b, t):
    assert particle_flow(WeylLabel(a, b), 0.0, t) == WeylLabel(a + b * t, b)


@given(a=finite, b=finite, w=st.floats(0.0, 3.0))
def test_identity_at_t_zero(a, b, w):
    assert particle_flow(WeylLabel(a, b), w, 0.0) == WeylLabel(a, b)


@given(a=finite, b=finite, w=st.floats(0.0, 3.0), t=times, s=times)
def test_particle_group_law(a, b, w, t, s):
    lab = WeylLabel(a, b)
    lhs = particle_flow(lab, w, t + s)
    rhs = particle_flow(particle_flow(lab, w, s), w, t)
    assert lhs.a == pytest.approx(rhs.a, abs=1e-10)
    assert lhs.b == pytest.approx(rhs.b, abs=1e-10)


def test_single_mode_half_period_matches_matrix_exponential():
    grid = np.array([1.0])
    u = FieldVector(grid, [1.0], WeightRole.MINUS_ONE)
    v = FieldVector(grid, [0.0], WeightRole.PLUS_ONE)
    u1, v1 = field_flow(u, v, math.pi)
    # one-mode generator d(u, v)/dt = (v, -w^2 u) at w = 1
    R = scipy.linalg.expm(np.array([[0.0, 1.0], [-1.0, 0.0]]) * math.pi)
    assert u1.values[0] == pytest.approx(R[0, 0], abs=1e-14)
    assert v1.values[0] == pytest.approx(R[1, 0], abs=1e-14)
    assert u1.values[0] == pytest.approx(-1.0, abs=1e-15)


def test_field_flow_zero_and_identity(rng):
    p = random_point(rng)
    z = PhasePoint.particle(WeylLabel(0, 0), p.u.grid, p.u.weights)
    u, v = field_flow(z.u, z.v, 3.7)
    assert not np.any(u.values) and not np.any(v.values)
    u, v = field_flow(p.u, p.v, 0.0)
    assert u == p.u and v == p.v


def test_field_flow_grid_mismatch(rng):
    p, q = random_point(rng), random_point(rng)
    with pytest.raises(GridMismatch):
        field_flow(p.u, q.v, 1.0)


def test_flows_preserve_forms(rng):
    for _ in range(50):
        p, q = random_point(rng), random_point(rng)
        q = PhasePoint(q.a, p.u.with_values(q.u.values), q.b, p.v.with_values(q.v.values))
        t, w0 = rng.uniform(-30, 30), rng.uniform(0, 3)
        u, v = field_flow(p.u, p.v, t)
        assert (u.norm_sq() + v.norm_sq()) == pytest.approx(p.vacuum_form(), rel=1e-12)
        pt, qt = product_flow(p, w0, t), product_flow(q, w0, t)
        # the particle part is symplectic for every w0; the field part with the
        # unweighted pairing as well
        assert pt.symplectic_form(qt) == pytest.approx(p.symplectic_form(q), abs=1e-10)


def test_product_flow_group_law_spot_value(rng):
    p = random_point(rng)
    twice = product_flow(product_flow(p, 0.8, 1.0), 0.8, 1.0)
    once = product_flow(p, 0.8, 2.0)
    assert twice.a == pytest.approx(once.a, abs=1e-12)
    assert twice.b == pytest.approx(once.b, abs=1e-12)
    np.testing.assert_allclose(twice.u.values, once.u.values, atol=1e-12)
    np.testing.assert_allclose(twice.v.values, once.v.values, atol=1e-12)


def test_field_vector_validation():
    with pytest.raises(GridMismatch):
        FieldVector([1.0, 2.0], [1.0], WeightRole.MINUS_ONE)
    with pytest.raises(ValueError):
        FieldVector([2.0, 1.0], [1.0, 1.0], WeightRole.MINUS_ONE)
    fv = FieldVector([1.0, 2.0], [1.0, 1.0], WeightRole.PLUS_ONE)
    with pytest.raises(ValueError):
        fv.values[0] = 3.0


def test_phase_point_roles_checked():
    g = [1.0]
    u = FieldVector(g, [0.0], WeightRole.MINUS_ONE)
    with pytest.raises(ValueError):
        PhasePoint(0.0, u, 0.0, u)
