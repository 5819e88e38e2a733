"""Auxiliary resolvent-Stokes solution maps on the fluid domain.

Both maps solve

    lam u - div(grad u + grad^T u) + grad p = f,   <q, div u> = d <q, 1>,

with a zero outer trace and mean-zero pressure.  The lifting map prescribes
the interface trace ``g`` and the constant divergence ``d = flux(g) / |fluid|``;
the forced map has a zero interface trace and ``d = 0``.  Both share one
bordered saddle matrix, factorized once per ``lam``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionError, SolverError
from .fem import Discretization


@dataclass
class StokesSolution:
    velocity: np.ndarray
    pressure: np.ndarray
    div_mean: float


class StokesSolver:
    """Factorized resolvent-Stokes operator for one value of ``lam``."""

    def __init__(self, disc: Discretization, lam: float):
        if not lam > 0:
            raise ValueError("resolvent parameter must be positive")
        self.disc = disc
        self.lam = float(lam)
        sp_ = disc.spaces
        self.A = (self.lam * disc.M_f + 0.5 * disc.D_f).tocsr()
        I, G = sp_.fluid_interior_dofs, sp_.trace_f
        self._I, self._G = I, G
        A_II = self.A[I][:, I]
        B_I = disc.B[:, I]
        m = sp.csr_matrix(disc.m_q[:, None])
        K = sp.bmat([
            [A_II, -B_I.T, None],
            [-B_I, None, -m],
            [None, -m.T, None],
        ], format="csc")
        self._A_IG = self.A[I][:, G]
        self._B_G = disc.B[:, G]
        self._nI, self._nq = len(I), sp_.n_q
        try:
            self._lu = spla.splu(K)
        except RuntimeError as exc:
            raise SolverError(f"Stokes saddle matrix is singular: {exc}") from exc
        self._K = K

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        sol = self._lu.solve(rhs)
        # one step of iterative refinement
        sol += self._lu.solve(rhs - self._K @ sol)
        if not np.all(np.isfinite(sol)):
            raise SolverError("non-finite Stokes solution")
        return sol

    def _unpack(self, sol, g):
        n = self.disc.spaces.n_f
        multi = sol.ndim == 2
        u = np.zeros((n, sol.shape[1]) if multi else n)
        u[self._I] = sol[: self._nI]
        if g is not None:
            u[self._G] = g
        p = sol[self._nI: self._nI + self._nq]
        return u, p

    def lifting(self, g: np.ndarray) -> StokesSolution:
        g = np.asarray(g, dtype=float)
        if g.shape[0] != self.disc.spaces.n_g:
            raise DimensionError("lifting datum must be a V_g field")
        d = self.disc.flux(g) / self.disc.fluid_area
        rhs = np.concatenate([
            -(self._A_IG @ g),
            -d * self.disc.m_q + self._B_G @ g,
            [0.0],
        ])
        u, p = self._unpack(self._solve(rhs), g)
        return StokesSolution(u, p, d)

    def forced(self, f_load: np.ndarray) -> StokesSolution:
        """``f_load`` is the assembled load vector on all of V_f."""
        f_load = np.asarray(f_load, dtype=float)
        if f_load.shape[0] != self.disc.spaces.n_f:
            raise DimensionError("forcing must be a V_f load vector")
        rhs = np.concatenate([f_load[self._I], np.zeros(self._nq + 1)])
        u, p = self._unpack(self._solve(rhs), None)
        return StokesSolution(u, p, 0.0)

    @cached_property
    def lifting_matrix(self) -> np.ndarray:
        """Velocities of the lifting of every V_g basis function, (n_f, n_g)."""
        disc = self.disc
        n_g = disc.spaces.n_g
        E = np.eye(n_g)
        d = disc.nu_load / disc.fluid_area
        rhs = np.vstack([
            -(self._A_IG @ E),
            -np.outer(disc.m_q, d) + self._B_G @ E,
            np.zeros((1, n_g)),
        ])
        u, _ = self._unpack(self._solve(rhs), E)
        return u

    @cached_property
    def dtn(self) -> np.ndarray:
        """Fluid energy pairing on interface basis functions, (n_g, n_g)."""
        U = self.lifting_matrix
        return U.T @ (self.A @ U)

    def pairing(self, xi: np.ndarray, phi: np.ndarray) -> float:
        return fluid_energy_pairing(xi, phi, self)


def stokes_solver(disc: Discretization, lam: float) -> StokesSolver:
    return disc.cached(("stokes", float(lam)), lambda: StokesSolver(disc, lam))


def solve_stokes_lifting(disc: Discretization, g: np.ndarray, lambda_res: float) -> StokesSolution:
    return stokes_solver(disc, lambda_res).lifting(g)


def solve_stokes_forced(disc: Discretization, f_load: np.ndarray, lambda_res: float) -> StokesSolution:
    return stokes_solver(disc, lambda_res).forced(f_load)


def fluid_energy_pairing(xi: np.ndarray, phi: np.ndarray, solver: StokesSolver) -> float:
    """Viscous plus inertial pairing of the liftings of two interface traces.

    Returns ``1/2 <D u(xi), D u(phi)> + lam <u(xi), u(phi)>`` with
    ``D u = grad u + grad^T u``.  The half weight matches the viscous term of
    the fluid equation after integration by parts.
    """
    if not np.any(xi) or not np.any(phi):
        return 0.0
    a = solver.lifting(xi).velocity
    b = solver.lifting(phi).velocity
    return float(a @ (solver.A @ b))
