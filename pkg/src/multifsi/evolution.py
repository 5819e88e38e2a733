"""Implicit Euler evolution: each step is one resolvent solve with ``lam = 1/dt``."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConfigurationError
from .fem import Discretization, StateVector, h_norm, project_to_H
from .resolvent import ResolventSolution, resolvent_solver

log = logging.getLogger(__name__)

COMPONENTS = ("E_fluid", "E_thin_grad", "E_thin_kin", "E_thick_elastic", "E_thick_mass", "E_thick_kin")
CSV_COLUMNS = ("step", "t", "E_total") + COMPONENTS + ("dissipation_residual", "contraction_ratio")

INITIAL_DATA = ("zero", "structure_bump", "interface_mode", "fluid_vortex")


@dataclass
class EnergyReport:
    step: int
    t: float
    E_total: float
    components: np.ndarray
    dissipation_residual: float = 0.0
    contraction_ratio: float = 0.0
    viscous: float = 0.0

    def row(self) -> list:
        return ([self.step, repr(float(self.t)), repr(float(self.E_total))]
                + [repr(float(c)) for c in self.components]
                + [repr(float(self.dissipation_residual)), repr(float(self.contraction_ratio))])


def energy_report(state: StateVector, disc: Discretization, step=0, t=0.0) -> EnergyReport:
    comps = disc.energy_terms(state)
    return EnergyReport(step, t, 0.5 * float(comps.sum()), comps)


def generator_action(sol_state: StateVector, data: StateVector, lam: float) -> StateVector:
    """``A Phi = lam Phi - Phi*`` for a solution of ``(lam I - A) Phi = Phi*``."""
    return lam * sol_state - data


def viscous_dissipation(u: np.ndarray, disc: Discretization) -> float:
    """``1/2 ||grad u + grad^T u||^2`` on the fluid."""
    return 0.5 * float(u @ (disc.D_f @ u))


class Evolver:
    def __init__(self, disc: Discretization, dt: float):
        if not dt > 0:
            raise ConfigurationError("dt must be positive")
        self.disc, self.dt = disc, float(dt)
        self.lam = 1.0 / self.dt
        self.solver = resolvent_solver(disc, self.lam)

    def step(self, state: StateVector, n: int = 0) -> tuple[StateVector, EnergyReport, ResolventSolution]:
        data = self.lam * state
        sol = self.solver.solve(data)
        new = sol.state
        A_phi = generator_action(new, data, self.lam)
        visc = viscous_dissipation(new.u, self.disc)
        defect = abs(self.disc.energy_terms(A_phi, new).sum() + visc)
        before = h_norm(state, self.disc)
        after = h_norm(new, self.disc)
        rep = energy_report(new, self.disc, n + 1, (n + 1) * self.dt)
        rep.dissipation_residual = float(defect)
        rep.contraction_ratio = after / before if before > 0 else 0.0
        rep.viscous = visc
        return new, rep, sol

    def evolve(self, state: StateVector, n_steps: int, snapshot_every: int = 0, callback=None):
        reports = [energy_report(state, self.disc)]
        snapshots = [(0, state.copy())] if snapshot_every else []
        for n in range(n_steps):
            state, rep, _ = self.step(state, n)
            reports.append(rep)
            if snapshot_every and (n + 1) % snapshot_every == 0:
                snapshots.append((n + 1, state.copy()))
            if callback is not None:
                callback(n + 1, state, rep)
        return state, reports, snapshots


def evolve(initial: StateVector, disc: Discretization, dt: float, n_steps: int, snapshot_every: int = 0):
    return Evolver(disc, dt).evolve(initial, n_steps, snapshot_every)


def write_energy_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow(r.row())


# ------------------------------------------------------------ initial data

def _bump(xy, center, radius):
    r2 = ((xy - center) ** 2).sum(axis=1) / radius**2
    return np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 3, 0.0)


def elastic_extension(disc: Discretization, trace: np.ndarray) -> np.ndarray:
    """Solid field with the given interface trace, minimizing the elastic-plus-mass energy."""
    sp_ = disc.spaces
    E = (disc.K_s + disc.M_s).tocsr()
    I = sp_.solid_interior_dofs
    w = np.zeros(sp_.n_s)
    w[sp_.trace_s] = trace
    w[I] = spla.spsolve(E[I][:, I].tocsc(), -(E[I][:, sp_.trace_s] @ trace))
    return w


def make_initial_datum(name: str, disc: Discretization, amplitude: float = 0.1) -> StateVector:
    sp_ = disc.spaces
    cfg = disc.mesh.config
    state = StateVector.zeros(sp_)
    if name == "zero":
        return state
    if name == "structure_bump":
        box = cfg.inner_box
        radius = 0.4 * min(box.x1 - box.x0, box.y1 - box.y0)
        state.w = sp_.interpolate_solid(
            lambda xy: amplitude * _bump(xy, box.center, radius)[:, None] * np.array([1.0, 0.5]))
        return project_to_H(state, disc)
    if name == "interface_mode":
        s = sp_.iface_s
        mode = amplitude * np.sin(2.0 * np.pi * s / disc.mesh.perimeter)
        h = np.column_stack([mode, mode]).ravel()
        state.w = elastic_extension(disc, h)
        state.h = sp_.T_s(state.w).copy()
        return state
    if name == "fluid_vortex":
        box = cfg.outer_box
        wx, wy = box.x1 - box.x0, box.y1 - box.y0

        def velocity(xy):
            x = (xy[:, 0] - box.x0) / wx
            y = (xy[:, 1] - box.y0) / wy
            fx, fy = (x * (1 - x)) ** 2, (y * (1 - y)) ** 2
            dfx = 2 * x * (1 - x) * (1 - 2 * x) / wx
            dfy = 2 * y * (1 - y) * (1 - 2 * y) / wy
            # curl of the stream function fx * fy (peak 1/256), rescaled
            return 256.0 * amplitude * np.column_stack([fx * dfy, -dfx * fy])

        state.u = sp_.interpolate_fluid(velocity)
        return project_to_H(state, disc)
    raise ConfigurationError(f"unknown initial datum {name!r}; choose from {', '.join(INITIAL_DATA)}")
