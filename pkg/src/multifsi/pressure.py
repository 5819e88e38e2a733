"""Pressure as a sum of three harmonic fields on the fluid domain.

Each field solves the Laplace equation in the P1 pressure space with a
Dirichlet trace on the interface and a Neumann datum on the outer boundary:

* ``P1(u)``: trace ``((grad u + grad^T u) nu) . nu``, Neumann ``div(grad u + grad^T u) . nu``
* ``P2(h)``: trace ``-Lap_s(h) . nu``, zero Neumann
* ``P3(w)``: trace ``-(sigma(w) nu) . nu``, zero Neumann

Boundary data are evaluated element by element from the adjacent triangle
and L2-projected onto the P1 trace space on the interface chain.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import (Discretization, barycentric_gradients, line_rule, p2_gradients,
                  p2_hessians, p2_line_values, to_barycentric)
from .geometry import interface_chart

N_LINE = 4


@dataclass
class HarmonicField:
    values: np.ndarray
    dirichlet_tag: str
    residual: float = 0.0

    def __add__(self, other):
        return HarmonicField(self.values + other.values, f"{self.dirichlet_tag}+{other.dirichlet_tag}")


class PressureEliminator:
    """Boundary-data evaluation and harmonic solves for one discretization."""

    def __init__(self, disc: Discretization):
        self.disc = disc
        mesh, sp_ = disc.mesh, disc.spaces
        self.t, self.wt = line_rule(N_LINE)
        cv = mesh.chain_vertices
        self.a = mesh.vertices[cv]
        self.b = mesh.vertices[np.roll(cv, -1)]
        self.lengths = mesh.chain_lengths
        self.nu = mesh.chain_normals
        self.points = self.a[:, None, :] + self.t[None, :, None] * (self.b - self.a)[:, None, :]
        pairs = [mesh.edge_solid_fluid(k) for k in mesh.chain_edges]
        self.solid_tri = np.array([p[0] for p in pairs])
        self.fluid_tri = np.array([p[1] for p in pairs])
        self._frow = np.searchsorted(sp_.fluid_tris, self.fluid_tri)
        self._srow = np.searchsorted(sp_.solid_tris, self.solid_tri)

        # outer boundary edges with outward normals
        gf = sp_.gamma_f_edges
        ends = mesh.edges[gf]
        tris = mesh.edge_tris[gf, 0]
        pa, pb = mesh.vertices[ends[:, 0]], mesh.vertices[ends[:, 1]]
        tang = pb - pa
        normal = np.column_stack([tang[:, 1], -tang[:, 0]])
        normal /= np.linalg.norm(normal, axis=1)[:, None]
        centroid = mesh.vertices[mesh.triangles[tris]].mean(axis=1)
        flip = np.einsum("ij,ij->i", normal, centroid - pa) > 0
        normal[flip] *= -1
        self.gf_normal = normal
        self.gf_tris = np.searchsorted(sp_.fluid_tris, tris)
        self.gf_q = sp_.g2q[ends]
        self.gf_len = np.linalg.norm(tang, axis=1)

        m = len(cv)
        idx = np.arange(m)
        self._hat_cells = np.column_stack([idx, (idx + 1) % m])
        self.dirichlet_q = sp_.iface_pressure

    # ---------------------------------------------------------- trace space
    @cached_property
    def _trace_mass_lu(self):
        m = len(self.lengths)
        loc = np.einsum("e,ij->eij", self.lengths, np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0)
        rows = np.repeat(self._hat_cells, 2, axis=1).ravel()
        cols = np.tile(self._hat_cells, (1, 2)).ravel()
        M = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(m, m)).tocsc()
        return spla.splu(M)

    def hat_moments(self, values: np.ndarray) -> np.ndarray:
        """``int f l_i`` over the chain for edgewise samples ``values`` (m, nq)."""
        hats = np.column_stack([1.0 - self.t, self.t])
        loc = np.einsum("e,q,eq,qi->ei", self.lengths, self.wt, values, hats)
        out = np.zeros(len(self.lengths))
        np.add.at(out, self._hat_cells, loc)
        return out

    def project_trace(self, values: np.ndarray) -> np.ndarray:
        return self._trace_mass_lu.solve(self.hat_moments(values))

    # -------------------------------------------------------- element data
    def _grad_at(self, coeffs, cells, tris_global, rows, points):
        """Gradients (m, nq, 2, 2) of a vector P2 field, ``[..., i, j] = d_j u_i``."""
        mesh = self.disc.mesh
        out = np.empty(points.shape[:2] + (2, 2))
        for k in range(len(rows)):
            xy = mesh.vertices[mesh.triangles[tris_global[k]]]
            dL, _ = barycentric_gradients(xy[None])
            L = to_barycentric(xy, points[k])
            G = p2_gradients(L, dL)[0]
            U = coeffs.reshape(-1, 2)[cells[rows[k]]]
            out[k] = np.einsum("ai,qaj->qij", U, G)
        return out

    def _div_sym_grad(self, u, tris_global, rows):
        """``div(grad u + grad^T u)`` per triangle (constant for P2), (n, 2)."""
        mesh, sp_ = self.disc.mesh, self.disc.spaces
        xy = mesh.vertices[mesh.triangles[tris_global]]
        dL, _ = barycentric_gradients(xy)
        H = p2_hessians(dL)
        U = u.reshape(-1, 2)[sp_.fluid_cells[rows]]
        lap = np.einsum("tac,tajj->tc", U, H)
        grad_div = np.einsum("tac,taic->ti", U, H)
        return lap + grad_div

    # ------------------------------------------------------------- data
    def datum_P1(self, u):
        sp_ = self.disc.spaces
        G = self._grad_at(u, sp_.fluid_cells, self.fluid_tri, self._frow, self.points)
        return 2.0 * np.einsum("ei,eqij,ej->eq", self.nu, G, self.nu)

    def neumann_P1(self, u):
        sp_ = self.disc.spaces
        tris = sp_.fluid_tris[self.gf_tris]
        dv = self._div_sym_grad(u, tris, self.gf_tris)
        return np.einsum("ei,ei->e", dv, self.gf_normal)

    @cached_property
    def _mass_g_lu(self):
        return spla.splu(self.disc.M_g.tocsc())

    def datum_P2(self, h):
        disc = self.disc
        r = self._mass_g_lu.solve(disc.L_g @ h)  # Riesz representative of -Lap_s h
        R = r.reshape(-1, 2)[disc.spaces.iface_cells]
        vals = np.einsum("qa,eai->eqi", p2_line_values(self.t), R)
        return np.einsum("eqi,ei->eq", vals, self.nu)

    def datum_P3(self, w):
        sp_, p = self.disc.spaces, self.disc.params
        G = self._grad_at(w, sp_.solid_cells, self.solid_tri, self._srow, self.points)
        eps_nn = np.einsum("ei,eqij,ej->eq", self.nu, G, self.nu)
        div = np.einsum("eqii->eq", G)
        return -(2.0 * p.mu * eps_nn + p.lambda_lame * div)

    # ------------------------------------------------------------ solves
    @cached_property
    def _free(self):
        free = np.ones(self.disc.spaces.n_q, dtype=bool)
        free[self.dirichlet_q] = False
        return np.flatnonzero(free)

    @cached_property
    def _lap_lu(self):
        K = self.disc.K_q.tocsr()
        return spla.splu(K[self._free][:, self._free].tocsc())

    def neumann_load(self, g_edge: np.ndarray) -> np.ndarray:
        load = np.zeros(self.disc.spaces.n_q)
        np.add.at(load, self.gf_q, 0.5 * (g_edge * self.gf_len)[:, None])
        return load

    def harmonic(self, dirichlet: np.ndarray, load: np.ndarray, tag: str) -> HarmonicField:
        K = self.disc.K_q.tocsr()
        p = np.zeros(self.disc.spaces.n_q)
        p[self.dirichlet_q] = dirichlet
        f = self._free
        rhs = load[f] - K[f][:, self.dirichlet_q] @ dirichlet
        p[f] = self._lap_lu.solve(rhs)
        res = np.linalg.norm((K @ p - load)[f])
        scale = np.linalg.norm(dirichlet) + np.linalg.norm(load) + 1e-300
        return HarmonicField(p, tag, float(res / scale))

    def solve_P1(self, u) -> HarmonicField:
        return self.harmonic(self.project_trace(self.datum_P1(u)),
                             self.neumann_load(self.neumann_P1(u)), "P1")

    def solve_P2(self, h) -> HarmonicField:
        return self.harmonic(self.project_trace(self.datum_P2(h)),
                             np.zeros(self.disc.spaces.n_q), "P2")

    def solve_P3(self, w) -> HarmonicField:
        return self.harmonic(self.project_trace(self.datum_P3(w)),
                             np.zeros(self.disc.spaces.n_q), "P3")

    def reconstruct(self, u, h, w) -> np.ndarray:
        return self.solve_P1(u).values + self.solve_P2(h).values + self.solve_P3(w).values

    def boundary_identity_residual(self, p, u, h, w) -> np.ndarray:
        """Weak residual of ``p + dp/dnu = div(Du).nu + [Du nu - Lap_s h - sigma(w) nu].nu``
        on the interface, tested against P1 hats."""
        mesh, sp_ = self.disc.mesh, self.disc.spaces
        P = p[sp_.pressure_cells[self._frow]]
        xy = mesh.vertices[mesh.triangles[self.fluid_tri]]
        dL, _ = barycentric_gradients(xy)
        dpdn = np.einsum("ea,eai,ei->e", P, dL, self.nu)
        lam_pts = np.stack([to_barycentric(xy[k], self.points[k]) for k in range(len(xy))])
        p_vals = np.einsum("eqa,ea->eq", lam_pts, P)
        div_t = np.einsum("ei,ei->e", self._div_sym_grad(u, self.fluid_tri, self._frow), self.nu)
        integrand = (p_vals + dpdn[:, None] - div_t[:, None]
                     - self.datum_P1(u) - self.datum_P2(h) - self.datum_P3(w))
        return self.hat_moments(integrand)


def pressure_eliminator(disc: Discretization) -> PressureEliminator:
    return disc.cached("pressure", lambda: PressureEliminator(disc))


def solve_P1(disc, u):
    return pressure_eliminator(disc).solve_P1(u)


def solve_P2(disc, h):
    return pressure_eliminator(disc).solve_P2(h)


def solve_P3(disc, w):
    return pressure_eliminator(disc).solve_P3(w)


def reconstruct_pressure(disc, u, h, w) -> np.ndarray:
    return pressure_eliminator(disc).reconstruct(u, h, w)


@dataclass
class BoundaryIdentityReport:
    """Weak residual per interface vertex, with the vertex distance to the nearest corner.

    Near the reentrant corners of the fluid domain the pressure gradient is
    not square integrable, so only the part of the residual away from the
    corners is expected to shrink under refinement.
    """
    residual: np.ndarray
    hat_mass: np.ndarray
    corner_distance: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.residual))

    def local_max(self, min_corner_distance: float = 0.0) -> float:
        """Largest hat-averaged residual over vertices at least the given arclength from a corner."""
        keep = self.corner_distance >= min_corner_distance
        if not keep.any():
            return 0.0
        return float(np.max(np.abs(self.residual[keep]) / self.hat_mass[keep]))


def check_pressure_boundary_identity(disc, p, u, h, w) -> BoundaryIdentityReport:
    pe = pressure_eliminator(disc)
    chart = interface_chart(disc.mesh)
    s = chart.vertex_s
    gaps = np.abs(s[:, None] - chart.corners[None, :])
    dist = np.minimum(gaps, chart.perimeter - gaps).min(axis=1)
    mass = pe.hat_moments(np.ones((len(s), len(pe.t))))
    return BoundaryIdentityReport(pe.boundary_identity_residual(p, u, h, w), mass, dist)
