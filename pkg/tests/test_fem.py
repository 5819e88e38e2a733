from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial.legendre import leggauss

from multifsi.errors import ConfigurationError, ConstraintViolationError
from multifsi.fem import (MaterialParams, StateVector, check_in_H, divergence_residual, h_norm,
                          line_rule, project_to_H, random_state, triangle_rule)

from conftest import discretization


# ----------------------------------------------------------- quadrature

@pytest.mark.parametrize("degree", [1, 2, 3, 4, 6, 8])
def test_triangle_rule_exact_on_monomials(degree):
    L, w = triangle_rule(degree)
    assert w.sum() == pytest.approx(1.0)
    x, y = L[:, 1], L[:, 2]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            # weights are normalized to unit area; the reference triangle has area 1/2
            assert 0.5 * w @ (x**a * y**b) == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_line_rule():
    t, w = line_rule(3)
    for k in range(6):
        assert w @ t**k == pytest.approx(1.0 / (k + 1), rel=1e-13)


# ------------------------------------------------- independent assembler

def duffy_rule(n=6):
    """Collapsed Gauss rule on the reference triangle, independent of the library rule."""
    g, gw = leggauss(n)
    g, gw = 0.5 * (g + 1), 0.5 * gw
    pts, wts = [], []
    for i in range(n):
        for j in range(n):
            u, v = g[i], g[j]
            pts.append((u, v * (1 - u)))
            wts.append(gw[i] * gw[j] * (1 - u))
    return np.array(pts), np.array(wts)


MONO = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def mono(x, y):
    return np.array([x**a * y**b for a, b in MONO])


def mono_grad(x, y):
    out = np.zeros((6, 2))
    for k, (a, b) in enumerate(MONO):
        if a:
            out[k, 0] = a * x ** (a - 1) * y**b
        if b:
            out[k, 1] = b * x**a * y ** (b - 1)
    return out


def local_basis(nodes):
    """Coefficients C with phi_i = sum_k C[k, i] m_k, from the nodal Vandermonde matrix."""
    V = np.array([mono(*p) for p in nodes])
    return np.linalg.inv(V)


def reference_matrices(disc):
    sp_, mesh = disc.spaces, disc.mesh
    qp, qw = duffy_rule()
    nv = mesh.n_vertices
    cells = np.hstack([mesh.triangles, nv + mesh.tri_edges])
    M = np.zeros((sp_.n_f, sp_.n_f))
    D = np.zeros_like(M)
    B = np.zeros((sp_.n_q, sp_.n_f))
    Ks = np.zeros((sp_.n_s, sp_.n_s))
    p = disc.params
    for t in range(mesh.n_triangles):
        xy = mesh.vertices[mesh.triangles[t]]
        J = np.column_stack([xy[1] - xy[0], xy[2] - xy[0]])
        det = abs(np.linalg.det(J))
        nodes = sp_.node_xy[cells[t]]
        C = local_basis(nodes)
        fluid = mesh.tags[t] == 0
        loc = sp_.g2f[cells[t]] if fluid else sp_.g2s[cells[t]]
        dofs = np.ravel([[2 * n, 2 * n + 1] for n in loc])
        Mloc = np.zeros((12, 12))
        Sloc = np.zeros((12, 12))
        Kloc = np.zeros((12, 12))
        Bloc = np.zeros((3, 12))
        for (r, s), wq in zip(qp, qw):
            x, y = xy[0] + J @ np.array([r, s])
            phi = C.T @ mono(x, y)
            dphi = C.T @ mono_grad(x, y)  # (6, 2)
            lin = np.array([1 - r - s, r, s])
            for a in range(6):
                for c in range(2):
                    ga = np.zeros((2, 2))
                    ga[c] = dphi[a]
                    ia = 2 * a + c
                    if fluid:
                        Bloc[:, ia] += wq * det * lin * ga.trace()
                    for b in range(6):
                        for d in range(2):
                            gb = np.zeros((2, 2))
                            gb[d] = dphi[b]
                            ib = 2 * b + d
                            Mloc[ia, ib] += wq * det * phi[a] * phi[b] * (c == d)
                            Sloc[ia, ib] += wq * det * np.sum((ga + ga.T) * (gb + gb.T))
                            ea, eb = 0.5 * (ga + ga.T), 0.5 * (gb + gb.T)
                            Kloc[ia, ib] += wq * det * (2 * p.mu * np.sum(ea * eb)
                                                        + p.lambda_lame * ga.trace() * gb.trace())
        if fluid:
            M[np.ix_(dofs, dofs)] += Mloc
            D[np.ix_(dofs, dofs)] += Sloc
            B[np.ix_(sp_.g2q[mesh.triangles[t]], dofs)] += Bloc
        else:
            Ks[np.ix_(dofs, dofs)] += Kloc
    return M, D, B, Ks


def reference_interface(disc):
    sp_, mesh = disc.spaces, disc.mesh
    g, gw = leggauss(4)
    g, gw = 0.5 * (g + 1), 0.5 * gw
    n = sp_.n_g
    M = np.zeros((n, n))
    L = np.zeros((n, n))
    load = np.zeros(n)
    for k, cell in enumerate(sp_.iface_cells):
        h = mesh.chain_lengths[k]
        # 1D quadratic through s = 0, h/2, h
        V = np.array([[1, s, s * s] for s in (0, h / 2, h)])
        C = np.linalg.inv(V)
        dofs = np.ravel([[2 * c, 2 * c + 1] for c in cell])
        for t, wt in zip(g, gw):
            s = t * h
            phi = C.T @ np.array([1, s, s * s])
            dphi = C.T @ np.array([0, 1, 2 * s])
            for a in range(3):
                for c in range(2):
                    load[dofs[2 * a + c]] += wt * h * phi[a] * mesh.chain_normals[k, c]
                    for b in range(3):
                        M[dofs[2 * a + c], dofs[2 * b + c]] += wt * h * phi[a] * phi[b]
                        L[dofs[2 * a + c], dofs[2 * b + c]] += wt * h * dphi[a] * dphi[b]
    return M, L, load


@pytest.mark.slow
def test_assembly_matches_loop_oracle():
    disc = discretization(0, mu=1.3, lambda_lame=0.7)
    M, D, B, Ks = reference_matrices(disc)
    np.testing.assert_allclose(disc.M_f.toarray(), M, atol=1e-13)
    np.testing.assert_allclose(disc.D_f.toarray(), D, atol=1e-12)
    np.testing.assert_allclose(disc.B.toarray(), B, atol=1e-13)
    np.testing.assert_allclose(disc.K_s.toarray(), Ks, atol=1e-12)
    Mg, Lg, load = reference_interface(disc)
    np.testing.assert_allclose(disc.M_g.toarray(), Mg, atol=1e-14)
    np.testing.assert_allclose(disc.L_g.toarray(), Lg, atol=1e-12)
    np.testing.assert_allclose(disc.nu_load, load, atol=1e-14)


# ------------------------------------------------------- matrix identities

def test_mass_integrates_area(disc0):
    sp_ = disc0.spaces
    ex = np.tile([1.0, 0.0], sp_.n_f // 2)
    assert ex @ disc0.M_f @ ex == pytest.approx(8.0, rel=1e-13)
    es = np.tile([0.0, 1.0], sp_.n_s // 2)
    assert es @ disc0.M_s @ es == pytest.approx(1.0, rel=1e-13)
    eg = np.tile([1.0, 0.0], sp_.n_g // 2)
    assert eg @ disc0.M_g @ eg == pytest.approx(4.0, rel=1e-13)
    assert disc0.fluid_area == pytest.approx(8.0, rel=1e-13)


def test_rigid_motions_in_kernels(disc0):
    sp_ = disc0.spaces
    for fn in (lambda p: np.column_stack([np.ones(len(p)), 0 * p[:, 0]]),
               lambda p: np.column_stack([-p[:, 1], p[:, 0]])):
        u = sp_.interpolate_fluid(fn)
        w = sp_.interpolate_solid(fn)
        assert np.abs(disc0.D_f @ u).max() < 1e-12
        assert np.abs(disc0.K_s @ w).max() < 1e-12
    const = np.tile([0.3, -0.2], sp_.n_g // 2)
    assert np.abs(disc0.L_g @ const).max() < 1e-12


def test_elastic_energy_of_stretch(disc0):
    # w = (x, 0): sigma = diag(2 mu + lam, lam), sigma : eps = 2 mu + lam on unit area
    disc = discretization(0, mu=1.5, lambda_lame=0.25)
    w = disc.spaces.interpolate_solid(lambda p: np.column_stack([p[:, 0], 0 * p[:, 0]]))
    assert w @ disc.K_s @ w == pytest.approx(2 * 1.5 + 0.25, rel=1e-12)
    assert w @ disc.G_s @ w == pytest.approx(1.0, rel=1e-12)


def test_divergence_form(disc0):
    sp_ = disc0.spaces
    u = sp_.interpolate_fluid(lambda p: np.column_stack([p[:, 0], 0 * p[:, 0]]))
    np.testing.assert_allclose(disc0.B @ u, disc0.m_q, atol=1e-14)
    # symmetric gradient of (x, -y) is diag(2, -2): |.|^2 = 8 per unit area
    u = sp_.interpolate_fluid(lambda p: np.column_stack([p[:, 0], -p[:, 1]]))
    assert u @ disc0.D_f @ u == pytest.approx(8.0 * 8.0, rel=1e-12)


def test_normal_field_flux():
    # corner averaging loses 2 h / 3 of the perimeter in the flux of nu
    for level in range(3):
        disc = discretization(level)
        h = disc.mesh.chain_lengths[0]
        assert disc.flux(disc.normal_field()) == pytest.approx(4.0 - 2.0 * h / 3.0, rel=1e-13)
    assert np.abs(discretization(0).nu_load.reshape(-1, 2).sum(axis=0)).max() < 1e-14


def test_fluid_load_and_errors(disc0):
    sp_ = disc0.spaces

    def quad(p):
        return np.column_stack([p[:, 0] ** 2 + p[:, 1], p[:, 0] * p[:, 1]])

    def quad_grad(p):
        g = np.zeros((len(p), 2, 2))
        g[:, 0, 0], g[:, 0, 1] = 2 * p[:, 0], 1.0
        g[:, 1, 0], g[:, 1, 1] = p[:, 1], p[:, 0]
        return g

    u = sp_.interpolate_fluid(quad)
    l2, h1 = disc0.fluid_errors(u, quad, quad_grad)
    assert l2 < 1e-13 and h1 < 1e-12
    # the load of a P2 field is its mass-matrix image
    np.testing.assert_allclose(disc0.fluid_load(quad), disc0.M_f @ u, atol=1e-12)


# ------------------------------------------------------------ state space

def test_material_validation():
    with pytest.raises(ConfigurationError):
        MaterialParams(mu=0.0)
    with pytest.raises(ConfigurationError):
        MaterialParams(lambda_lame=-1.0)
    with pytest.raises(ConfigurationError):
        MaterialParams(dt=0.0)


def test_state_roundtrip(tmp_path, disc0, rng):
    s = random_state(disc0, rng)
    s.save(tmp_path / "s.npz")
    t = StateVector.load(tmp_path / "s.npz")
    for k in StateVector.FIELDS:
        np.testing.assert_array_equal(getattr(s, k), getattr(t, k))


def test_check_in_H_rejects_mismatched_trace(disc0, rng):
    s = random_state(disc0, rng)
    check_in_H(s, disc0)
    s.h = s.h + 1e-6
    with pytest.raises(ConstraintViolationError):
        check_in_H(s, disc0)


def test_project_to_H(disc0, rng):
    s = random_state(disc0, rng)
    assert divergence_residual(s.u, disc0) < 1e-10
    assert np.abs(s.u[disc0.spaces.gamma_f_dofs]).max() == 0.0
    again = project_to_H(s, disc0)
    assert h_norm(again - s, disc0) < 1e-10 * h_norm(s, disc0)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**16))
def test_energy_norm_is_a_norm(a, b, seed):
    disc = discretization(0)
    rng = np.random.default_rng(seed)
    x, y = random_state(disc, rng), random_state(disc, rng)
    nx, ny = h_norm(x, disc), h_norm(y, disc)
    assert h_norm(a * x, disc) == pytest.approx(abs(a) * nx, rel=1e-10, abs=1e-12)
    assert h_norm(a * x + b * y, disc) <= abs(a) * nx + abs(b) * ny + 1e-10
    terms = disc.energy_terms(x)
    assert np.all(terms >= -1e-12)
