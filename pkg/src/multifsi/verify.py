"""Invariant suite run by ``multifsi verify``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolution import INITIAL_DATA, Evolver, make_initial_datum
from .fem import Discretization, StateVector, h_norm, random_state
from .pressure import pressure_eliminator
from .resolvent import check_domain_membership, dissipation_defect, monolithic_oracle, resolvent_solver

LAMBDAS = (0.5, 1.0, 2.0, 10.0)

ROUTE_TOL = 1e-8
DISSIPATION_TOL = 1e-7
CONTRACTION_TOL = 1e-9
FLUX_TOL = 1e-10
HARMONIC_TOL = 1e-10
MEMBERSHIP_TOL = 1e-8
STEP_SLACK = 1e-10
BALANCE_TOL = 1e-8


@dataclass
class InvariantResult:
    name: str
    value: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.name:<28s} value={self.value:.6e} tol={self.tolerance:.1e}"


def zero_flux_ratio(disc: Discretization, h1: np.ndarray) -> float:
    """``|<nu, h1>| / ||h1||`` on the interface (0 for a zero field)."""
    norm = np.sqrt(max(h1 @ (disc.M_g @ h1), 0.0))
    return 0.0 if norm == 0 else abs(disc.flux(h1)) / norm


def trace_gap(disc: Discretization, state: StateVector) -> float:
    sp_ = disc.spaces
    return float(max(np.abs(sp_.T_f(state.u) - state.ht).max(initial=0.0),
                     np.abs(sp_.T_s(state.wt) - state.ht).max(initial=0.0)))


def relative_l2(disc: Discretization, p: np.ndarray, ref: np.ndarray) -> float:
    d = p - ref
    den = ref @ (disc.M_q @ ref)
    return float(np.sqrt(d @ (disc.M_q @ d) / den)) if den > 0 else float(np.sqrt(d @ (disc.M_q @ d)))


def resolvent_suite(disc: Discretization, n_random: int, seed: int, lambdas=LAMBDAS) -> list[InvariantResult]:
    rng = np.random.default_rng(seed)
    data = [random_state(disc, rng) for _ in range(n_random)]
    route = diss = contr = flux = gap = member = 0.0
    for lam in lambdas:
        solver = resolvent_solver(disc, lam)
        for d in data:
            nd = h_norm(d, disc)
            sol = solver.solve(d)
            diss = max(diss, abs(dissipation_defect(sol, disc)) / (1.0 + nd**2))
            contr = max(contr, lam * h_norm(sol.state, disc) / nd - 1.0)
            flux = max(flux, zero_flux_ratio(disc, sol.h1))
            gap = max(gap, trace_gap(disc, sol.state))
            rep = check_domain_membership(sol, disc, MEMBERSHIP_TOL)
            member = max(member, 0.0 if rep.ok else np.inf,
                          max(v / nd for v in sol.residuals.values()))
    for d in data:
        lam = lambdas[0]
        diff = resolvent_solver(disc, lam).solve(d).state - monolithic_oracle(d, disc, lam)
        route = max(route, h_norm(diff, disc) / h_norm(d, disc))
    return [
        InvariantResult("route_equivalence", route, ROUTE_TOL),
        InvariantResult("dissipation_identity", diss, DISSIPATION_TOL),
        InvariantResult("resolvent_contraction", max(contr, 0.0), CONTRACTION_TOL),
        InvariantResult("zero_flux", flux, FLUX_TOL),
        InvariantResult("trace_exactness", gap, 0.0),
        InvariantResult("resolvent_residuals", member, MEMBERSHIP_TOL),
    ]


def pressure_suite(disc: Discretization, seed: int, lam: float = 1.0):
    """Harmonicity and additivity of the pressure reconstruction.

    The distance to the resolvent pressure is returned separately as a
    diagnostic: at a single level it has no tolerance to check against.
    """
    pe = pressure_eliminator(disc)
    d = random_state(disc, np.random.default_rng(seed + 1))
    sol = resolvent_solver(disc, lam).solve(d)
    s = sol.state
    fields = [pe.solve_P1(s.u), pe.solve_P2(s.h), pe.solve_P3(s.w)]
    harmonic = max(f.residual for f in fields)
    total = pe.reconstruct(s.u, s.h, s.w)
    parts = sum(f.values for f in fields)
    additivity = np.abs(total - parts).max() / max(np.abs(total).max(), 1e-300)
    distance = relative_l2(disc, total, sol.pressure)
    return [
        InvariantResult("pressure_harmonicity", harmonic, HARMONIC_TOL),
        InvariantResult("pressure_additivity", float(additivity), 1e-12),
    ], distance


def evolution_suite(disc: Discretization, dt: float, n_steps: int) -> list[InvariantResult]:
    evolver = Evolver(disc, dt)
    contraction = monotone = balance = diss = 0.0
    for name in INITIAL_DATA:
        state = make_initial_datum(name, disc)
        E0 = None
        for n in range(n_steps):
            before = state
            Eb = 0.5 * h_norm(before, disc) ** 2
            E0 = Eb if E0 is None else E0
            state, rep, _ = evolver.step(state, n)
            scale = max(Eb, 1e-300)
            contraction = max(contraction, rep.contraction_ratio - 1.0)
            monotone = max(monotone, (rep.E_total - Eb) / scale if Eb > 0 else rep.E_total)
            balance = max(balance, (dt * rep.viscous - (Eb - rep.E_total)) / scale if Eb > 0 else 0.0)
            diss = max(diss, rep.dissipation_residual / (1.0 + 2.0 * Eb))
    return [
        InvariantResult("evolution_contraction", max(contraction, 0.0), STEP_SLACK),
        InvariantResult("energy_monotone", max(monotone, 0.0), STEP_SLACK),
        InvariantResult("energy_balance", max(balance, 0.0), BALANCE_TOL),
        InvariantResult("step_dissipation_identity", diss, DISSIPATION_TOL),
    ]


def run_verify(disc: Discretization, seed: int = 0, n_random: int = 3, n_steps: int = 10):
    results = resolvent_suite(disc, n_random, seed)
    pres, distance = pressure_suite(disc, seed)
    results += pres
    results += evolution_suite(disc, disc.params.dt, n_steps)
    return results, {"pressure_reconstruction_distance": distance}
