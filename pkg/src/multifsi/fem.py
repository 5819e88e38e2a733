"""Finite-element spaces, assembly and the finite-energy inner product.

Spaces
------
``V_f``  vector P2 on fluid triangles (velocity)
``Q_f``  scalar P1 on fluid triangles (pressure)
``V_s``  vector P2 on solid triangles (thick displacement and velocity)
``V_g``  vector P2 on the periodic interface chain (thin displacement and velocity)

Vector coefficients are interleaved, ``dof = 2 * node + component``.  Interface
nodes are shared by all three vector spaces, so both trace maps are plain
index arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ConstraintViolationError, DimensionError
from .geometry import FLUID, GAMMA_F, SOLID, Mesh

# ---------------------------------------------------------------- quadrature

_A1, _W1 = 0.44594849091596488632, 0.22338158967801146570
_A2, _W2 = 0.091576213509770743460, 0.10995174365532186764


def triangle_rule(degree: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (n, 3) and weights summing to one.

    Degree <= 4 uses the 6-point symmetric rule; higher degrees use a
    collapsed Gauss-Legendre product rule.
    """
    if degree <= 4:
        pts = []
        for a in (_A1, _A2):
            b = 1.0 - 2.0 * a
            pts += [(b, a, a), (a, b, a), (a, a, b)]
        return np.array(pts), np.array([_W1] * 3 + [_W2] * 3)
    n = (degree + 2) // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    xi, eta, wt = [], [], []
    for i in range(n):
        for j in range(n):
            xi.append(x[i])
            eta.append(x[j] * (1.0 - x[i]))
            wt.append(w[i] * w[j] * (1.0 - x[i]))
    xi, eta, wt = map(np.array, (xi, eta, wt))
    return np.column_stack([1.0 - xi - eta, xi, eta]), 2.0 * wt


def line_rule(n: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points on [0, 1] with weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


# ----------------------------------------------------------------- P2 basis

_EDGE_PAIRS = ((0, 1), (1, 2), (2, 0))


def barycentric_gradients(xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of barycentric coordinates (nt, 3, 2) and triangle areas."""
    x, y = xy[..., 0], xy[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    g = np.empty(xy.shape[:1] + (3, 2))
    g[:, 0, 0], g[:, 0, 1] = y[:, 1] - y[:, 2], x[:, 2] - x[:, 1]
    g[:, 1, 0], g[:, 1, 1] = y[:, 2] - y[:, 0], x[:, 0] - x[:, 2]
    g[:, 2, 0], g[:, 2, 1] = y[:, 0] - y[:, 1], x[:, 1] - x[:, 0]
    return g / det[:, None, None], 0.5 * np.abs(det)


def to_barycentric(xy_tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of ``pts`` (n, 2) in one triangle (3, 2)."""
    T = np.vstack([np.ones(3), xy_tri.T])
    return np.linalg.solve(T, np.vstack([np.ones(len(pts)), pts.T])).T


def p2_values(L: np.ndarray) -> np.ndarray:
    """P2 basis values at barycentric points, shape (..., 6)."""
    out = [L[..., i] * (2.0 * L[..., i] - 1.0) for i in range(3)]
    out += [4.0 * L[..., i] * L[..., j] for i, j in _EDGE_PAIRS]
    return np.stack(out, axis=-1)


def p2_gradients(L: np.ndarray, dL: np.ndarray) -> np.ndarray:
    """P2 basis gradients.

    ``L`` has shape (nq, 3); ``dL`` (nt, 3, 2).  Returns (nt, nq, 6, 2).
    """
    out = [(4.0 * L[None, :, i, None] - 1.0) * dL[:, None, i, :] for i in range(3)]
    out += [4.0 * (L[None, :, j, None] * dL[:, None, i, :] + L[None, :, i, None] * dL[:, None, j, :])
            for i, j in _EDGE_PAIRS]
    return np.stack(out, axis=2)


def p2_hessians(dL: np.ndarray) -> np.ndarray:
    """Constant P2 Hessians per triangle, shape (nt, 6, 2, 2)."""
    out = [4.0 * np.einsum("tk,tl->tkl", dL[:, i], dL[:, i]) for i in range(3)]
    for i, j in _EDGE_PAIRS:
        o = np.einsum("tk,tl->tkl", dL[:, i], dL[:, j])
        out.append(4.0 * (o + np.swapaxes(o, 1, 2)))
    return np.stack(out, axis=1)


def p2_line_values(t: np.ndarray) -> np.ndarray:
    """1D P2 basis on [0,1] ordered (start, mid, end)."""
    return np.stack([(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)], axis=-1)


def p2_line_derivatives(t: np.ndarray) -> np.ndarray:
    return np.stack([4 * t - 3, 4 - 8 * t, 4 * t - 1], axis=-1)


def vector_dofs(nodes) -> np.ndarray:
    """Interleaved vector dofs of scalar node ids; last axis expands by two."""
    nodes = np.asarray(nodes)
    return (2 * nodes[..., None] + np.arange(2)).reshape(nodes.shape[:-1] + (-1,))


def _scatter(cells: np.ndarray, local: np.ndarray, shape) -> sp.csr_matrix:
    rows = np.repeat(cells, cells.shape[1], axis=1).ravel()
    cols = np.tile(cells, (1, cells.shape[1])).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()


def _scatter_rect(rcells, ccells, local, shape) -> sp.csr_matrix:
    rows = np.repeat(rcells, ccells.shape[1], axis=1).ravel()
    cols = np.tile(ccells, (1, rcells.shape[1])).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()


# -------------------------------------------------------------------- params

@dataclass(frozen=True)
class MaterialParams:
    mu: float = 1.0
    lambda_lame: float = 1.0
    lambda_res: float = 1.0
    dt: float = 0.01

    def __post_init__(self):
        for name in ("mu", "lambda_res", "dt"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"material.{name} must be positive")
        if not self.lambda_lame >= 0:
            raise ConfigurationError("material.lambda_lame must be nonnegative")


# -------------------------------------------------------------------- spaces

class FunctionSpaces:
    """Index bookkeeping for the four finite-element spaces."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        nv, ne = mesh.n_vertices, mesh.n_edges
        self.n_p2 = nv + ne
        self.node_xy = np.vstack([mesh.vertices, mesh.vertices[mesh.edges].mean(axis=1)])

        cells = np.hstack([mesh.triangles, nv + mesh.tri_edges])
        self.fluid_tris = np.flatnonzero(mesh.tags == FLUID)
        self.solid_tris = np.flatnonzero(mesh.tags == SOLID)

        self.fluid_nodes = np.unique(cells[self.fluid_tris])
        self.solid_nodes = np.unique(cells[self.solid_tris])
        self.g2f = self._inverse(self.fluid_nodes)
        self.g2s = self._inverse(self.solid_nodes)
        self.fluid_cells = self.g2f[cells[self.fluid_tris]]
        self.solid_cells = self.g2s[cells[self.solid_tris]]

        self.pressure_vertices = np.unique(mesh.triangles[self.fluid_tris])
        self.g2q = self._inverse(self.pressure_vertices, nv)
        self.pressure_cells = self.g2q[mesh.triangles[self.fluid_tris]]

        m = len(mesh.chain_vertices)
        chain = np.empty(2 * m, dtype=np.int64)
        chain[0::2] = mesh.chain_vertices
        chain[1::2] = nv + mesh.chain_edges
        self.iface_nodes = chain
        idx = np.arange(m)
        self.iface_cells = np.column_stack([2 * idx, 2 * idx + 1, (2 * idx + 2) % (2 * m)])
        self.trace_s_nodes = self.g2s[chain]
        self.trace_f_nodes = self.g2f[chain]
        if (self.trace_s_nodes < 0).any() or (self.trace_f_nodes < 0).any():
            raise DimensionError("interface nodes missing from a subdomain space")
        s_vert = mesh.chain_arclength
        s = np.empty(2 * m)
        s[0::2] = s_vert
        s[1::2] = s_vert + 0.5 * mesh.chain_lengths
        self.iface_s = s

        gf_edges = np.flatnonzero(mesh.edge_tags == GAMMA_F)
        gf_nodes = np.unique(np.concatenate([mesh.edges[gf_edges].ravel(), nv + gf_edges]))
        self.gamma_f_nodes = self.g2f[gf_nodes]
        self.gamma_f_edges = gf_edges

        self.n_f = 2 * len(self.fluid_nodes)
        self.n_s = 2 * len(self.solid_nodes)
        self.n_g = 2 * len(chain)
        self.n_q = len(self.pressure_vertices)

        self.trace_s = vector_dofs(self.trace_s_nodes)
        self.trace_f = vector_dofs(self.trace_f_nodes)
        self.gamma_f_dofs = vector_dofs(self.gamma_f_nodes)
        on_boundary = np.zeros(self.n_f, dtype=bool)
        on_boundary[self.gamma_f_dofs] = True
        on_boundary[self.trace_f] = True
        self.fluid_interior_dofs = np.flatnonzero(~on_boundary)
        interior_s = np.ones(self.n_s, dtype=bool)
        interior_s[self.trace_s] = False
        self.solid_interior_dofs = np.flatnonzero(interior_s)

        self.iface_pressure = self.g2q[mesh.chain_vertices]

    def _inverse(self, ids, n=None):
        inv = -np.ones(n or self.n_p2, dtype=np.int64)
        inv[ids] = np.arange(len(ids))
        return inv

    @property
    def fluid_xy(self) -> np.ndarray:
        return self.node_xy[self.fluid_nodes]

    @property
    def solid_xy(self) -> np.ndarray:
        return self.node_xy[self.solid_nodes]

    @property
    def pressure_xy(self) -> np.ndarray:
        return self.mesh.vertices[self.pressure_vertices]

    def T_s(self, w: np.ndarray) -> np.ndarray:
        return w[self.trace_s]

    def T_f(self, u: np.ndarray) -> np.ndarray:
        return u[self.trace_f]

    def interpolate_fluid(self, fn) -> np.ndarray:
        return np.asarray(fn(self.fluid_xy), dtype=float).reshape(-1)

    def interpolate_solid(self, fn) -> np.ndarray:
        return np.asarray(fn(self.solid_xy), dtype=float).reshape(-1)

    def interpolate_pressure(self, fn) -> np.ndarray:
        return np.asarray(fn(self.pressure_xy), dtype=float)


# ------------------------------------------------------------------ state

@dataclass
class StateVector:
    """Coefficients of ``[u, h, h_t, w, w_t]``."""

    u: np.ndarray
    h: np.ndarray
    ht: np.ndarray
    w: np.ndarray
    wt: np.ndarray

    FIELDS = ("u", "h", "ht", "w", "wt")

    @classmethod
    def zeros(cls, spaces: FunctionSpaces) -> "StateVector":
        return cls(np.zeros(spaces.n_f), np.zeros(spaces.n_g), np.zeros(spaces.n_g),
                   np.zeros(spaces.n_s), np.zeros(spaces.n_s))

    def _map(self, fn, other=None):
        if other is None:
            return StateVector(*(fn(getattr(self, k)) for k in self.FIELDS))
        return StateVector(*(fn(getattr(self, k), getattr(other, k)) for k in self.FIELDS))

    def __add__(self, other):
        return self._map(np.add, other)

    def __sub__(self, other):
        return self._map(np.subtract, other)

    def __mul__(self, a):
        return self._map(lambda x: a * x)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def copy(self):
        return self._map(np.copy)

    def is_zero(self) -> bool:
        return all(not np.any(getattr(self, k)) for k in self.FIELDS)

    def check_shapes(self, spaces: FunctionSpaces):
        expect = (spaces.n_f, spaces.n_g, spaces.n_g, spaces.n_s, spaces.n_s)
        got = tuple(len(getattr(self, k)) for k in self.FIELDS)
        if got != expect:
            raise DimensionError(f"state sizes {got} do not match spaces {expect}")

    def save(self, path):
        np.savez(path, **{k: getattr(self, k) for k in self.FIELDS})

    @classmethod
    def load(cls, path) -> "StateVector":
        with np.load(path) as data:
            return cls(*(np.array(data[k], dtype=float) for k in cls.FIELDS))


# ------------------------------------------------------------- assembly

def _vector_kernels(G, phi):
    """Per-quadrature-point building blocks for vector P2 forms.

    ``G`` is (nt, nq, 6, 2).  Returns the three tensors (nt, nq, 6, 2, 6, 2)
    ``delta_cd G_a.G_b``, ``G_a[d] G_b[c]`` and ``G_a[c] G_b[d]``.
    """
    eye = np.eye(2)
    GG = np.einsum("tqak,tqbk->tqab", G, G)
    t1 = np.einsum("tqab,cd->tqacbd", GG, eye)
    t2 = np.einsum("tqad,tqbc->tqacbd", G, G)
    t3 = np.einsum("tqac,tqbd->tqacbd", G, G)
    return t1, t2, t3


class Discretization:
    """Mesh, spaces and every assembled matrix that does not depend on the
    resolvent parameter.  Matrices are built lazily and cached."""

    def __init__(self, mesh: Mesh, params: MaterialParams | None = None):
        self.mesh = mesh
        self.params = params or MaterialParams()
        self.spaces = FunctionSpaces(mesh)
        self._solver_cache: dict = {}

    # geometry per subdomain
    def _tri_data(self, tris, degree=4):
        xy = self.mesh.vertices[self.mesh.triangles[tris]]
        dL, area = barycentric_gradients(xy)
        L, w = triangle_rule(degree)
        return dL, area, L, w

    def _vector_forms(self, tris, cells):
        dL, area, L, w = self._tri_data(tris)
        G = p2_gradients(L, dL)
        phi = p2_values(L)
        wa = area[:, None] * w[None, :]
        t1, t2, t3 = _vector_kernels(G, phi)
        nt = len(tris)
        sym = np.einsum("tq,tqacbd->tacbd", wa, t1 + t2).reshape(nt, 12, 12)
        lap = np.einsum("tq,tqacbd->tacbd", wa, t1).reshape(nt, 12, 12)
        div = np.einsum("tq,tqacbd->tacbd", wa, t3).reshape(nt, 12, 12)
        mass = np.einsum("tq,qa,qb,cd->tacbd", wa, phi, phi, np.eye(2)).reshape(nt, 12, 12)
        dofs = vector_dofs(cells)
        return dofs, sym, lap, div, mass

    @cached_property
    def _fluid_forms(self):
        return self._vector_forms(self.spaces.fluid_tris, self.spaces.fluid_cells)

    @cached_property
    def _solid_forms(self):
        return self._vector_forms(self.spaces.solid_tris, self.spaces.solid_cells)

    def _assemble(self, forms, idx, n, scale=1.0):
        dofs = forms[0]
        return _scatter(dofs, scale * forms[idx], (n, n))

    # fluid
    @cached_property
    def M_f(self) -> sp.csr_matrix:
        return self._assemble(self._fluid_forms, 4, self.spaces.n_f)

    @cached_property
    def D_f(self) -> sp.csr_matrix:
        """<grad u + grad^T u, grad v + grad^T v> on the fluid."""
        return self._assemble(self._fluid_forms, 1, self.spaces.n_f, 2.0)

    @cached_property
    def B(self) -> sp.csr_matrix:
        """<q, div u>, shape (n_q, n_f)."""
        sp_ = self.spaces
        dL, area, L, w = self._tri_data(sp_.fluid_tris)
        G = p2_gradients(L, dL)
        loc = np.einsum("t,q,qi,tqac->tiac", area, w, L, G).reshape(len(area), 3, 12)
        return _scatter_rect(sp_.pressure_cells, vector_dofs(sp_.fluid_cells), loc,
                             (sp_.n_q, sp_.n_f))

    @cached_property
    def _pressure_forms(self):
        sp_ = self.spaces
        dL, area, L, w = self._tri_data(sp_.fluid_tris)
        mass = np.einsum("t,q,qi,qj->tij", area, w, L, L)
        stiff = np.einsum("t,tik,tjk->tij", area, dL, dL)
        return mass, stiff, np.einsum("t,q,qi->ti", area, w, L)

    @cached_property
    def M_q(self) -> sp.csr_matrix:
        return _scatter(self.spaces.pressure_cells, self._pressure_forms[0],
                        (self.spaces.n_q,) * 2)

    @cached_property
    def K_q(self) -> sp.csr_matrix:
        return _scatter(self.spaces.pressure_cells, self._pressure_forms[1],
                        (self.spaces.n_q,) * 2)

    @cached_property
    def m_q(self) -> np.ndarray:
        """<q_i, 1> for the pressure basis."""
        out = np.zeros(self.spaces.n_q)
        np.add.at(out, self.spaces.pressure_cells, self._pressure_forms[2])
        return out

    @cached_property
    def fluid_area(self) -> float:
        return float(self.m_q.sum())

    # solid
    @cached_property
    def M_s(self) -> sp.csr_matrix:
        return self._assemble(self._solid_forms, 4, self.spaces.n_s)

    @cached_property
    def K_s(self) -> sp.csr_matrix:
        """<sigma(w), eps(v)> with the configured Lame constants."""
        p = self.params
        return (self._assemble(self._solid_forms, 1, self.spaces.n_s, p.mu)
                + self._assemble(self._solid_forms, 3, self.spaces.n_s, p.lambda_lame))

    @cached_property
    def G_s(self) -> sp.csr_matrix:
        """Vector H1 seminorm on the solid."""
        return self._assemble(self._solid_forms, 2, self.spaces.n_s)

    # interface
    @cached_property
    def _iface_forms(self):
        sp_ = self.spaces
        lengths = self.mesh.chain_lengths
        t, w = line_rule(3)
        phi = p2_line_values(t)
        dphi = p2_line_derivatives(t)
        mass = np.einsum("e,q,qa,qb->eab", lengths, w, phi, phi)
        stiff = np.einsum("e,q,qa,qb->eab", 1.0 / lengths, w, dphi, dphi)
        eye = np.eye(2)
        n = len(lengths)
        mass_v = np.einsum("eab,cd->eacbd", mass, eye).reshape(n, 6, 6)
        stiff_v = np.einsum("eab,cd->eacbd", stiff, eye).reshape(n, 6, 6)
        nu = self.mesh.chain_normals
        nu_load = np.einsum("e,q,qa,ec->eac", lengths, w, phi, nu).reshape(n, 6)
        return vector_dofs(sp_.iface_cells), mass_v, stiff_v, nu_load

    @cached_property
    def M_g(self) -> sp.csr_matrix:
        dofs, mass, _, _ = self._iface_forms
        return _scatter(dofs, mass, (self.spaces.n_g,) * 2)

    @cached_property
    def L_g(self) -> sp.csr_matrix:
        """Arclength Laplacian <h', phi'> with periodic wrap."""
        dofs, _, stiff, _ = self._iface_forms
        return _scatter(dofs, stiff, (self.spaces.n_g,) * 2)

    @cached_property
    def nu_load(self) -> np.ndarray:
        """<nu, phi_i> on the interface for every V_g basis function."""
        dofs, _, _, load = self._iface_forms
        out = np.zeros(self.spaces.n_g)
        np.add.at(out, dofs, load)
        return out

    def normal_field(self) -> np.ndarray:
        """V_g field equal to nu on each edge (averaged at corner vertices)."""
        sp_ = self.spaces
        m = len(self.mesh.chain_vertices)
        nu = self.mesh.chain_normals
        vals = np.empty((2 * m, 2))
        vals[1::2] = nu
        vals[0::2] = 0.5 * (nu + np.roll(nu, 1, axis=0))
        return vals.ravel()

    def flux(self, g: np.ndarray) -> float:
        """Integral of g . nu over the interface."""
        return float(self.nu_load @ g)

    # loads and errors for prescribed functions
    def _fluid_quadrature(self, degree):
        sp_ = self.spaces
        dL, area, L, w = self._tri_data(sp_.fluid_tris, degree)
        xy = self.mesh.vertices[self.mesh.triangles[sp_.fluid_tris]]
        pts = np.einsum("qi,tid->tqd", L, xy)
        return dL, area, L, w, pts

    def fluid_load(self, fn, degree: int = 6) -> np.ndarray:
        """``<f, phi_i>`` for a vector function ``fn(xy) -> (n, 2)`` on the fluid."""
        sp_ = self.spaces
        _, area, L, w, pts = self._fluid_quadrature(degree)
        f = np.asarray(fn(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape)
        loc = np.einsum("t,q,qa,tqc->tac", area, w, p2_values(L), f).reshape(len(area), 12)
        out = np.zeros(sp_.n_f)
        np.add.at(out, vector_dofs(sp_.fluid_cells), loc)
        return out

    def fluid_errors(self, u: np.ndarray, exact, exact_grad, degree: int = 8) -> tuple[float, float]:
        """L2 and H1-seminorm distances from ``u`` to a prescribed velocity.

        ``exact_grad(xy)`` returns (n, 2, 2) with ``[.., i, j] = d_j u_i``.
        """
        sp_ = self.spaces
        dL, area, L, w, pts = self._fluid_quadrature(degree)
        U = u.reshape(-1, 2)[sp_.fluid_cells]
        uh = np.einsum("qa,tac->tqc", p2_values(L), U)
        gh = np.einsum("tac,tqaj->tqcj", U, p2_gradients(L, dL))
        flat = pts.reshape(-1, 2)
        eu = uh - np.asarray(exact(flat)).reshape(uh.shape)
        eg = gh - np.asarray(exact_grad(flat)).reshape(gh.shape)
        wa = area[:, None] * w[None, :]
        return (float(np.sqrt(np.einsum("tq,tqc->", wa, eu**2))),
                float(np.sqrt(np.einsum("tq,tqcj->", wa, eg**2))))

    # cached solvers keyed by lambda
    def cached(self, key, factory):
        if key not in self._solver_cache:
            self._solver_cache[key] = factory()
        return self._solver_cache[key]

    # energy
    def energy_terms(self, a: StateVector, b: StateVector | None = None) -> np.ndarray:
        """The six terms of the finite-energy pairing, in order
        fluid, thin gradient, thin kinetic, thick elastic, thick mass, thick kinetic."""
        b = a if b is None else b
        return np.array([
            a.u @ (self.M_f @ b.u),
            a.h @ (self.L_g @ b.h),
            a.ht @ (self.M_g @ b.ht),
            a.w @ (self.K_s @ b.w),
            a.w @ (self.M_s @ b.w),
            a.wt @ (self.M_s @ b.wt),
        ])


def check_in_H(state: StateVector, disc: Discretization, tol: float = 1e-12):
    """Raise unless the thin displacement is the trace of the thick one."""
    state.check_shapes(disc.spaces)
    gap = np.abs(disc.spaces.T_s(state.w) - state.h)
    scale = max(1.0, np.abs(state.w).max(initial=0.0))
    if gap.max(initial=0.0) > tol * scale:
        raise ConstraintViolationError(
            f"thin displacement differs from the thick trace by {gap.max():.3e}")


def h_inner_product(a: StateVector, b: StateVector, disc: Discretization) -> float:
    check_in_H(a, disc)
    check_in_H(b, disc)
    return float(disc.energy_terms(a, b).sum())


def h_norm(a: StateVector, disc: Discretization) -> float:
    return float(np.sqrt(max(h_inner_product(a, a, disc), 0.0)))


def divergence_residual(u: np.ndarray, disc: Discretization) -> float:
    """Largest |<q_i, div u>| over the pressure basis."""
    return float(np.abs(disc.B @ u).max(initial=0.0))


def project_to_H(raw: StateVector, disc: Discretization) -> StateVector:
    """Closest state in the discrete energy space.

    The velocity is L2-projected onto weakly divergence-free fields with zero
    outer trace; the thin displacement is replaced by the thick trace.
    """
    raw.check_shapes(disc.spaces)
    sp_ = disc.spaces
    free = np.setdiff1d(np.arange(sp_.n_f), sp_.gamma_f_dofs)
    M = disc.M_f[free][:, free]
    Bf = disc.B[:, free]
    K = sp.bmat([[M, Bf.T], [Bf, None]], format="csc")
    rhs = np.concatenate([(disc.M_f @ raw.u)[free], np.zeros(sp_.n_q)])
    sol = spla.splu(K).solve(rhs)
    u = np.zeros(sp_.n_f)
    u[free] = sol[: len(free)]
    return StateVector(u, sp_.T_s(raw.w).copy(), raw.ht.copy(), raw.w.copy(), raw.wt.copy())


def random_state(disc: Discretization, rng: np.random.Generator) -> StateVector:
    """Standard-normal coefficients projected into the discrete energy space."""
    sp_ = disc.spaces
    raw = StateVector(rng.standard_normal(sp_.n_f), np.zeros(sp_.n_g), rng.standard_normal(sp_.n_g),
                      rng.standard_normal(sp_.n_s), rng.standard_normal(sp_.n_s))
    return project_to_H(raw, disc)
