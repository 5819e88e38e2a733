import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multifsi.evolution import make_initial_datum
from multifsi.pressure import (check_pressure_boundary_identity, pressure_eliminator, reconstruct_pressure,
                               solve_P1, solve_P2, solve_P3)
from multifsi.resolvent import resolvent_apply

from conftest import discretization


def vertical(disc):
    """Interface edges with normal along x."""
    return np.abs(disc.mesh.chain_normals[:, 0]) > 0.5


def test_zero_fields(disc0):
    sp_ = disc0.spaces
    assert not solve_P1(disc0, np.zeros(sp_.n_f)).values.any()
    assert not solve_P2(disc0, np.zeros(sp_.n_g)).values.any()
    assert not solve_P3(disc0, np.zeros(sp_.n_s)).values.any()
    assert not reconstruct_pressure(disc0, np.zeros(sp_.n_f), np.zeros(sp_.n_g), np.zeros(sp_.n_s)).any()


def test_rigid_rotation_has_no_P1(disc0):
    u = disc0.spaces.interpolate_fluid(lambda p: np.column_stack([-p[:, 1], p[:, 0]]))
    assert np.abs(solve_P1(disc0, u).values).max() < 1e-13


def test_P1_data_of_pure_strain(disc0):
    pe = pressure_eliminator(disc0)
    u = disc0.spaces.interpolate_fluid(lambda p: np.column_stack([p[:, 0], -p[:, 1]]))
    d = pe.datum_P1(u)
    v = vertical(disc0)
    np.testing.assert_allclose(d[v], 2.0, atol=1e-12)
    np.testing.assert_allclose(d[~v], -2.0, atol=1e-12)
    np.testing.assert_allclose(pe.neumann_P1(u), 0.0, atol=1e-12)


def test_P3_data_of_stretch(disc0):
    pe = pressure_eliminator(disc0)
    w = disc0.spaces.interpolate_solid(lambda p: np.column_stack([p[:, 0], 0 * p[:, 0]]))
    d = pe.datum_P3(w)
    v = vertical(disc0)
    np.testing.assert_allclose(d[v], -3.0, atol=1e-12)
    np.testing.assert_allclose(d[~v], -1.0, atol=1e-12)


def test_P3_rigid_motion(disc0):
    w = disc0.spaces.interpolate_solid(lambda p: np.column_stack([1 - p[:, 1], 2 + p[:, 0]]))
    assert np.abs(solve_P3(disc0, w).values).max() < 1e-12


def test_P2_constant_h_and_constant_datum(disc0):
    pe = pressure_eliminator(disc0)
    h = np.tile([0.4, -1.0], disc0.spaces.n_g // 2)
    assert np.abs(solve_P2(disc0, h).values).max() < 1e-12
    field = pe.harmonic(np.full(len(pe.dirichlet_q), 2.5), np.zeros(disc0.spaces.n_q), "c")
    np.testing.assert_allclose(field.values, 2.5, atol=1e-12)


def test_neumann_datum_of_quadratic_flow():
    # u = (y^2, 0): div(grad u + grad^T u) = (2, 0); outward normal gives +-2 on vertical sides
    disc = discretization(0)
    pe = pressure_eliminator(disc)
    u = disc.spaces.interpolate_fluid(lambda p: np.column_stack([p[:, 1] ** 2, 0 * p[:, 0]]))
    g = pe.neumann_P1(u)
    expected = 2.0 * pe.gf_normal[:, 0]
    np.testing.assert_allclose(g, expected, atol=1e-11)


def test_harmonicity(disc1, rng):
    sp_ = disc1.spaces
    for f in (solve_P1(disc1, rng.standard_normal(sp_.n_f)),
              solve_P2(disc1, rng.standard_normal(sp_.n_g)),
              solve_P3(disc1, rng.standard_normal(sp_.n_s))):
        assert f.residual <= 1e-10


def test_maximum_principle():
    # P2 with a datum in [m, M] stays within [m - eps, M + eps], eps shrinking with h
    excess = []
    for level in range(3):
        disc = discretization(level)
        pe = pressure_eliminator(disc)
        s = disc.mesh.chain_arclength
        datum = np.sin(2 * np.pi * s / 4.0)
        f = pe.harmonic(datum, np.zeros(disc.spaces.n_q), "P2")
        excess.append(max(f.values.max() - datum.max(), datum.min() - f.values.min(), 0.0))
    assert excess[-1] <= excess[0] + 1e-14
    assert excess[-1] < 1e-2


def test_P2_stability_constant():
    # ||P2|| <= C ||datum||: C measured once, stable under refinement
    ratios = []
    for level in range(3):
        disc = discretization(level)
        pe = pressure_eliminator(disc)
        s = disc.spaces.iface_s
        mode = np.sin(2 * np.pi * s / 4.0)
        h = np.column_stack([mode, 0.5 * mode]).ravel()
        d = pe.project_trace(pe.datum_P2(h))
        p = pe.solve_P2(h).values
        lumped = pe.hat_moments(np.ones((len(d), len(pe.t))))
        dnorm = np.sqrt(d @ (lumped * d))
        ratios.append(np.sqrt(p @ disc.M_q @ p) / dnorm)
    ratios = np.array(ratios)
    assert np.ptp(ratios) / ratios.max() < 0.1
    # regression value from the first run
    assert ratios[-1] == pytest.approx(0.6132672, abs=1e-6)


@settings(max_examples=6, deadline=None)
@given(seed=st.integers(0, 2**20), a=st.floats(-2, 2))
def test_linearity_and_additivity(seed, a):
    disc = discretization(0)
    sp_ = disc.spaces
    rng = np.random.default_rng(seed)
    u1, u2 = rng.standard_normal((2, sp_.n_f))
    h = rng.standard_normal(sp_.n_g)
    w1, w2 = rng.standard_normal((2, sp_.n_s))
    lhs = solve_P3(disc, w1 + a * w2).values
    rhs = solve_P3(disc, w1).values + a * solve_P3(disc, w2).values
    assert np.abs(lhs - rhs).max() <= 1e-10 * (np.abs(lhs).max() + 1)
    lhs = solve_P1(disc, u1 + a * u2).values
    rhs = solve_P1(disc, u1).values + a * solve_P1(disc, u2).values
    assert np.abs(lhs - rhs).max() <= 1e-10 * (np.abs(lhs).max() + 1)
    zf, zg, zs = np.zeros(sp_.n_f), np.zeros(sp_.n_g), np.zeros(sp_.n_s)
    total = reconstruct_pressure(disc, u1, h, w1)
    parts = (reconstruct_pressure(disc, u1, zg, zs) + reconstruct_pressure(disc, zf, h, zs)
             + reconstruct_pressure(disc, zf, zg, w1))
    assert np.abs(total - parts).max() <= 1e-12 * (np.abs(total).max() + 1)


# ----------------------------------------------------- boundary identity

def test_boundary_identity_zero_and_linear(disc0, rng):
    sp_ = disc0.spaces
    zq, zf, zg, zs = np.zeros(sp_.n_q), np.zeros(sp_.n_f), np.zeros(sp_.n_g), np.zeros(sp_.n_s)
    assert check_pressure_boundary_identity(disc0, zq, zf, zg, zs).norm == 0.0
    args1 = (rng.standard_normal(sp_.n_q), rng.standard_normal(sp_.n_f),
             rng.standard_normal(sp_.n_g), rng.standard_normal(sp_.n_s))
    args2 = tuple(rng.standard_normal(len(x)) for x in args1)
    r1 = check_pressure_boundary_identity(disc0, *args1).residual
    r2 = check_pressure_boundary_identity(disc0, *args2).residual
    r12 = check_pressure_boundary_identity(disc0, *(x + 2 * y for x, y in zip(args1, args2))).residual
    np.testing.assert_allclose(r12, r1 + 2 * r2, atol=1e-10 * np.abs(r12).max())


@pytest.mark.slow
def test_boundary_identity_converges_away_from_corners():
    # datum with zero fluid and thin velocities: the identity holds without data terms
    local = []
    for level in (1, 2, 3):
        disc = discretization(level)
        data = make_initial_datum("interface_mode", disc)
        assert not data.u.any() and not data.ht.any()
        sol = resolvent_apply(data, disc, 1.0)
        s = sol.state
        rep = check_pressure_boundary_identity(disc, sol.pressure, s.u, s.h, s.w)
        local.append(rep.local_max(0.25))
    assert local[0] > local[1] > local[2]
