"""Resolvent solve ``(lam I - A) Phi = Phi*`` by the structure-driven mixed method.

The unknowns of the mixed problem are the thin and thick velocities
``[h1, w1]`` in the coupled structure space S (V_s coefficients whose interface
values double as V_g coefficients) and the pressure constant ``c0``.  The fluid
enters through a Dirichlet-to-Neumann block built from one Stokes lifting per
interface basis function.  Afterwards the displacements, fluid velocity and
pressure are reconstructed and every resolvent equation is checked weakly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CompatibilityError, DimensionError, GeometryError, SolverError
from .fem import Discretization, StateVector, check_in_H, h_norm
from .stokes import StokesSolver, stokes_solver

log = logging.getLogger(__name__)

EXACT_TOL = 1e-10
RESIDUAL_TOL = 1e-8


@dataclass
class SaddleSystem:
    """``A_S x + c0 N = F``, ``N^T x = 0``."""

    A_S: np.ndarray
    N: np.ndarray
    F: np.ndarray
    lambda_res: float
    _factor: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.N)
        if self.A_S.shape != (n, n) or self.F.shape != (n,):
            raise DimensionError("saddle blocks have inconsistent sizes")

    def factor(self):
        if self._factor is None:
            self._factor = factor_spd(self.A_S)
        return self._factor


def factor_spd(A: np.ndarray):
    try:
        return sla.cho_factor(A, lower=True)
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(0.5 * (A + A.T))
        raise SolverError(
            "structure Gram matrix is not positive definite: "
            f"smallest eigenvalues {ev[:3]}") from None


def solve_saddle(system: SaddleSystem) -> tuple[np.ndarray, float]:
    """Solve the rank-one bordered system through its Schur complement."""
    N, F = system.N, system.F
    if not np.any(N):
        raise SolverError("constraint vector vanishes; inf-sup condition fails")
    fac = system.factor()
    y_F = sla.cho_solve(fac, F)
    y_N = sla.cho_solve(fac, N)
    s = N @ y_N
    c0 = (N @ y_F) / s
    x = y_F - c0 * y_N
    # re-project onto the constraint to remove roundoff drift
    x -= ((N @ x) / s) * y_N
    return x, float(c0)


def recover_structure(h1, w1, data: StateVector, lam: float):
    """Displacements from velocities: ``h0 = (h1 + h0*) / lam`` and likewise for w."""
    return (h1 + data.h) / lam, (w1 + data.w) / lam


@dataclass
class ResolventSolution:
    state: StateVector
    pressure: np.ndarray
    c0: float
    data: StateVector
    lambda_res: float
    residuals: dict = field(default_factory=dict)

    @property
    def h1(self):
        return self.state.ht

    @property
    def w1(self):
        return self.state.wt


class ResolventSolver:
    """Cached mixed-method resolvent for one discretization and one ``lam``."""

    def __init__(self, disc: Discretization, lam: float, include_fluid: bool = True):
        self.disc = disc
        self.lam = float(lam)
        self.include_fluid = include_fluid
        self.stokes: StokesSolver = stokes_solver(disc, lam)
        sp_ = disc.spaces
        lam = self.lam
        T = sp_.trace_s
        structure = (lam * disc.M_s + (disc.K_s + disc.M_s) / lam).toarray()
        thin = (lam * disc.M_g + disc.L_g / lam).toarray()
        if include_fluid:
            thin = thin + self.stokes.dtn
        A_S = structure
        A_S[np.ix_(T, T)] += thin
        self.A_S = 0.5 * (A_S + A_S.T)
        self.N = np.zeros(sp_.n_s)
        self.N[T] = -disc.nu_load
        self._factor = factor_spd(self.A_S)

    def assemble(self, data: StateVector) -> SaddleSystem:
        disc, lam = self.disc, self.lam
        data.check_shapes(disc.spaces)
        T = disc.spaces.trace_s
        F = disc.M_s @ data.wt - (disc.K_s @ data.w + disc.M_s @ data.w) / lam
        thin = disc.M_g @ data.ht - (disc.L_g @ data.h) / lam
        if self.include_fluid:
            u2 = self.stokes.forced(disc.M_f @ data.u).velocity
            U = self.stokes.lifting_matrix
            thin = thin + U.T @ (disc.M_f @ data.u - self.stokes.A @ u2)
        F[T] += thin
        return SaddleSystem(self.A_S, self.N.copy(), F, lam, self._factor)

    def reconstruct_fluid(self, w1: np.ndarray, u0_star: np.ndarray, c0: float):
        """``u0 = u1(w1|trace) + u2(u0*)``, ``p0 = p1 + p2 + c0``."""
        disc = self.disc
        g = disc.spaces.T_s(w1)
        flux = disc.flux(g)
        scale = np.sqrt(g @ (disc.M_g @ g)) * np.sqrt(disc.mesh.perimeter)
        if abs(flux) > 1e-8 * scale + 1e-14:
            raise CompatibilityError(f"interface velocity carries flux {flux:.3e}")
        s1 = self.stokes.lifting(g)
        s2 = self.stokes.forced(disc.M_f @ u0_star)
        return s1.velocity + s2.velocity, s1.pressure + s2.pressure + c0

    def solve(self, data: StateVector) -> ResolventSolution:
        check_in_H(data, self.disc)
        system = self.assemble(data)
        x, c0 = solve_saddle(system)
        T = self.disc.spaces.trace_s
        w1 = x
        h1 = x[T]
        h0, w0 = recover_structure(h1, w1, data, self.lam)
        u0, p0 = self.reconstruct_fluid(w1, data.u, c0)
        state = StateVector(u0, h0, h1, w0, w1)
        sol = ResolventSolution(state, p0, c0, data, self.lam)
        sol.residuals = resolvent_residuals(sol, self.disc)
        return sol


def resolvent_solver(disc: Discretization, lam: float) -> ResolventSolver:
    return disc.cached(("resolvent", float(lam)), lambda: ResolventSolver(disc, lam))


def assemble_mixed_system(data: StateVector, disc: Discretization, lam: float) -> SaddleSystem:
    return resolvent_solver(disc, lam).assemble(data)


def resolvent_apply(data: StateVector, disc: Discretization, lam: float) -> ResolventSolution:
    return resolvent_solver(disc, lam).solve(data)


# ------------------------------------------------------------ monolithic oracle

class MonolithicSolver:
    """One coupled sparse system over ``(u interior, w1, p)``.

    Interface fluid velocities and thin velocities are read off ``w1``
    through the shared dofs; the full P1 pressure (constant included) is
    the multiplier of the weak divergence constraint.
    """

    def __init__(self, disc: Discretization, lam: float):
        self.disc, self.lam = disc, float(lam)
        sp_ = disc.spaces
        nI = len(sp_.fluid_interior_dofs)
        n_z = nI + sp_.n_s
        rows = np.concatenate([sp_.fluid_interior_dofs, sp_.trace_f])
        cols = np.concatenate([np.arange(nI), nI + sp_.trace_s])
        self.R_u = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(sp_.n_f, n_z))
        self.R_w = sp.hstack([sp.csr_matrix((sp_.n_s, nI)), sp.identity(sp_.n_s)]).tocsr()
        self.R_h = self.R_w[sp_.trace_s]
        A_f = lam * disc.M_f + 0.5 * disc.D_f
        A = (self.R_u.T @ A_f @ self.R_u
             + self.R_h.T @ (lam * disc.M_g + disc.L_g / lam) @ self.R_h
             + self.R_w.T @ (lam * disc.M_s + (disc.K_s + disc.M_s) / lam) @ self.R_w)
        Bz = disc.B @ self.R_u
        self.K = sp.bmat([[A, -Bz.T], [-Bz, None]], format="csc")
        self.n_z = n_z
        try:
            self._lu = spla.splu(self.K)
        except RuntimeError as exc:
            raise SolverError(f"coupled system is singular: {exc}") from exc

    def solve(self, data: StateVector) -> tuple[StateVector, np.ndarray]:
        disc, lam = self.disc, self.lam
        rhs_z = (self.R_u.T @ (disc.M_f @ data.u)
                 + self.R_h.T @ (disc.M_g @ data.ht - disc.L_g @ data.h / lam)
                 + self.R_w.T @ (disc.M_s @ data.wt - (disc.K_s @ data.w + disc.M_s @ data.w) / lam))
        rhs = np.concatenate([rhs_z, np.zeros(disc.spaces.n_q)])
        z = self._lu.solve(rhs)
        z += self._lu.solve(rhs - self.K @ z)
        w1 = self.R_w @ z[: self.n_z]
        u0 = self.R_u @ z[: self.n_z]
        p0 = z[self.n_z:]
        h1 = disc.spaces.T_s(w1)
        h0, w0 = recover_structure(h1, w1, data, lam)
        return StateVector(u0, h0, h1, w0, w1), p0


def monolithic_oracle(data: StateVector, disc: Discretization, lam: float) -> StateVector:
    solver = disc.cached(("monolithic", float(lam)), lambda: MonolithicSolver(disc, lam))
    return solver.solve(data)[0]


# -------------------------------------------------------------- diagnostics

def resolvent_residuals(sol: ResolventSolution, disc: Discretization) -> dict:
    """Weak residual norms of the resolvent equations and domain conditions."""
    sp_ = disc.spaces
    st, data, lam, p = sol.state, sol.data, sol.lambda_res, sol.pressure
    A_f = lam * disc.M_f + 0.5 * disc.D_f
    fluid = A_f @ st.u - disc.B.T @ p - disc.M_f @ data.u
    solid = lam * (disc.M_s @ st.wt) + disc.K_s @ st.w + disc.M_s @ st.w - disc.M_s @ data.wt
    thin = lam * (disc.M_g @ st.ht) + disc.L_g @ st.h - disc.M_g @ data.ht
    coupled = solid.copy()
    coupled[sp_.trace_s] += thin + fluid[sp_.trace_f]
    return {
        "stokes_momentum": float(np.linalg.norm(fluid[sp_.fluid_interior_dofs])),
        "stokes_divergence": float(np.linalg.norm(disc.B @ st.u)),
        "thin_displacement": float(np.linalg.norm(lam * st.h - st.ht - data.h)),
        "thin_equation": float(np.linalg.norm(coupled[sp_.trace_s])),
        "thick_displacement": float(np.linalg.norm(lam * st.w - st.wt - data.w)),
        "thick_equation": float(np.linalg.norm(solid[sp_.solid_interior_dofs])),
        "outer_trace": float(np.abs(st.u[sp_.gamma_f_dofs]).max(initial=0.0)),
        "fluid_thin_trace": float(np.abs(sp_.T_f(st.u) - st.ht).max(initial=0.0)),
        "thin_thick_trace": float(np.abs(st.ht - sp_.T_s(st.wt)).max(initial=0.0)),
        "displacement_trace": float(np.abs(st.h - sp_.T_s(st.w)).max(initial=0.0)),
        "zero_flux": float(abs(disc.flux(st.ht))),
        "pressure_mean_minus_c0": float(abs(disc.m_q @ p / disc.fluid_area - sol.c0)),
    }


@dataclass
class MembershipReport:
    checks: dict
    tolerance: float

    @property
    def ok(self) -> bool:
        return all(v["ok"] for v in self.checks.values())

    def lines(self):
        for name, v in self.checks.items():
            yield f"{name}: {'PASS' if v['ok'] else 'FAIL'} residual={v['residual']:.3e} bound={v['bound']:.3e}"


def check_domain_membership(sol: ResolventSolution, disc: Discretization,
                            tol: float = RESIDUAL_TOL) -> MembershipReport:
    r = sol.residuals or resolvent_residuals(sol, disc)
    scale = h_norm(sol.data, disc)
    bound = tol * scale

    def item(value, b):
        return {"residual": value, "bound": b, "ok": value <= b}

    checks = {
        "A.i conforming spaces": item(0.0, 0.0),
        "A.ii stokes": item(max(r["stokes_momentum"], r["stokes_divergence"]), bound),
        "A.iii thick elasticity": item(max(r["thick_equation"], r["thick_displacement"]), bound),
        "A.iv thin equation": item(max(r["thin_equation"], r["thin_displacement"]), bound),
        "A.v traces": item(max(r["outer_trace"], r["fluid_thin_trace"], r["thin_thick_trace"]), 0.0),
    }
    return MembershipReport(checks, tol)


def dissipation_defect(sol: ResolventSolution, disc: Discretization) -> float:
    """``<A Phi, Phi>_H + 1/2 ||D u||^2`` with ``A Phi = lam Phi - Phi*``."""
    st = sol.state
    A_phi = sol.lambda_res * st - sol.data
    pairing = disc.energy_terms(A_phi, st).sum()
    return float(pairing + 0.5 * st.u @ (disc.D_f @ st.u))


# ------------------------------------------------------------------ inf-sup

@dataclass
class InfSupReport:
    beta_h: float
    beta_a: float
    constructive: float
    z_h1_norm: float
    level: int | None = None


def structure_h1_gram(disc: Discretization) -> sp.csr_matrix:
    """H1(interface) + H1(solid) product on the coupled structure space."""
    T = disc.spaces.trace_s
    n = disc.spaces.n_s
    P = sp.csr_matrix((np.ones(len(T)), (np.arange(len(T)), T)), shape=(len(T), n))
    return (P.T @ (disc.M_g + disc.L_g) @ P + disc.M_s + disc.G_s).tocsr()


def estimate_inf_sup(disc: Discretization, tol: float = 1e-12) -> InfSupReport:
    sp_ = disc.spaces
    closure = np.abs((disc.mesh.chain_normals * disc.mesh.chain_lengths[:, None]).sum(axis=0)).max()
    if closure > tol * disc.mesh.perimeter:
        raise GeometryError(f"normal field does not integrate to zero ({closure:.3e})")
    N = np.zeros(sp_.n_s)
    N[sp_.trace_s] = -disc.nu_load
    M_S = structure_h1_gram(disc).tocsc()
    lu = spla.splu(M_S)
    beta_h = float(np.sqrt(N @ lu.solve(N)))

    A1 = resolvent_solver(disc, 1.0).A_S
    beta_a = float(np.sqrt(N @ np.linalg.solve(A1, N)))

    # z'' = nu on the interface, mean-zero per component
    n_g = sp_.n_g
    means = np.zeros((2, n_g))
    ones = disc.M_g @ np.tile([1.0, 0.0], n_g // 2), disc.M_g @ np.tile([0.0, 1.0], n_g // 2)
    means[0], means[1] = ones
    K = sp.bmat([[disc.L_g, sp.csr_matrix(means.T)], [sp.csr_matrix(means), None]], format="csc")
    z = spla.splu(K).solve(np.concatenate([-disc.nu_load, [0.0, 0.0]]))[:n_g]

    # elastic extension into the solid as a right inverse of the trace
    E = (disc.K_s + disc.M_s).tocsr()
    I = sp_.solid_interior_dofs
    x = np.zeros(sp_.n_s)
    x[sp_.trace_s] = z
    x[I] = spla.spsolve(E[I][:, I].tocsc(), -(E[I][:, sp_.trace_s] @ z))
    constructive = abs(N @ x) / np.sqrt(x @ (M_S @ x))
    z_norm = float(np.sqrt(z @ ((disc.M_g + disc.L_g) @ z)))
    return InfSupReport(beta_h, beta_a, float(constructive), z_norm,
                        disc.mesh.config.refinement_level)
