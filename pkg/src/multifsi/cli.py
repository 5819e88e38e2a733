"""Command-line entry point: ``multifsi <command> --config <file> [--refine k] [--out dir]``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, RunConfig, build_config, load_config
from .errors import (CompatibilityError, ConfigurationError, ConstraintViolationError,
                     MeshResolutionError, SolverError, TopologyError)
from .evolution import INITIAL_DATA, Evolver, energy_report, make_initial_datum, write_energy_csv
from .fem import Discretization, StateVector, check_in_H, h_norm
from .geometry import build_nested_mesh
from .pressure import reconstruct_pressure
from .resolvent import check_domain_membership, estimate_inf_sup, resolvent_solver
from .verify import MEMBERSHIP_TOL, run_verify, trace_gap, zero_flux_ratio
from .vtk import vertex_fields, write_vtk

log = logging.getLogger("multifsi")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4


def _discretization(cfg: RunConfig, level=None) -> Discretization:
    geo = cfg.geometry if level is None else cfg.geometry.refined(level)
    return Discretization(build_nested_mesh(geo), cfg.material)


def _write_manifest(cfg: RunConfig, disc: Discretization | None, out: Path, extra=()):
    lines = [f"multifsi {__version__}", f"command = {cfg.command}", "", "[config]", *cfg.echo(), ""]
    if disc is not None:
        lines += ["[mesh]", *(f"{k} = {v}" for k, v in disc.mesh.stats().items()),
                  f"fluid_dofs = {disc.spaces.n_f}", f"solid_dofs = {disc.spaces.n_s}",
                  f"interface_dofs = {disc.spaces.n_g}", f"pressure_dofs = {disc.spaces.n_q}", ""]
    lines += ["[tolerances]", f"membership = {MEMBERSHIP_TOL}", *extra]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _load_datum(cfg: RunConfig, disc: Discretization) -> StateVector:
    if cfg.datum in INITIAL_DATA:
        return make_initial_datum(cfg.datum, disc)
    path = Path(cfg.datum)
    if not path.exists():
        raise ConfigurationError(
            f"run.datum must be one of {', '.join(INITIAL_DATA)} or an existing .npz file")
    state = StateVector.load(path)
    try:
        check_in_H(state, disc)
    except Exception as exc:
        raise ConfigurationError(f"datum file {path} is not a valid state: {exc}") from exc
    return state


def cmd_resolvent(cfg: RunConfig, out: Path) -> int:
    disc = _discretization(cfg)
    _write_manifest(cfg, disc, out)
    data = _load_datum(cfg, disc)
    lam = cfg.material.lambda_res
    sol = resolvent_solver(disc, lam).solve(data)
    norm_star = h_norm(data, disc)
    rep = check_domain_membership(sol, disc, MEMBERSHIP_TOL)
    lines = [f"lambda_res = {lam!r}", f"datum = {cfg.datum}", f"datum_norm = {norm_star!r}",
             f"solution_norm = {h_norm(sol.state, disc)!r}", f"c0 = {sol.c0!r}",
             f"zero_flux_ratio = {zero_flux_ratio(disc, sol.h1)!r}",
             f"trace_gap = {trace_gap(disc, sol.state)!r}", "", "[residuals]"]
    lines += [f"{k} = {v!r}" for k, v in sol.residuals.items()]
    lines += ["", "[membership]", *rep.lines()]
    (out / "resolvent_report.txt").write_text("\n".join(lines) + "\n")
    sol.state.save(out / "resolvent_state.npz")
    if cfg.export_fields:
        p_rec = reconstruct_pressure(disc, sol.state.u, sol.state.h, sol.state.w)
        write_vtk(out / "resolvent.vtk", disc.mesh,
                  vertex_fields(disc, sol.state, sol.pressure, {"pressure_reconstructed": p_rec}),
                  title=f"resolvent lambda={lam}")
    print("\n".join(lines))
    return EXIT_OK if rep.ok else EXIT_INVARIANT


def cmd_evolve(cfg: RunConfig, out: Path) -> int:
    disc = _discretization(cfg)
    _write_manifest(cfg, disc, out)
    state = _load_datum(cfg, disc)
    evolver = Evolver(disc, cfg.material.dt)
    reports = [energy_report(state, disc)]
    if cfg.export_fields:
        write_vtk(out / "snapshot_00000.vtk", disc.mesh, vertex_fields(disc, state), title="step 0")
    for n in range(cfg.n_steps):
        state, rep, sol = evolver.step(state, n)
        reports.append(rep)
        if cfg.snapshot_every and (n + 1) % cfg.snapshot_every == 0:
            state.save(out / f"snapshot_{n + 1:05d}.npz")
            if cfg.export_fields:
                write_vtk(out / f"snapshot_{n + 1:05d}.vtk", disc.mesh,
                          vertex_fields(disc, state, sol.pressure), title=f"step {n + 1}")
    write_energy_csv(out / "energy.csv", reports)
    print(f"{cfg.n_steps} steps, E0 = {reports[0].E_total!r}, E_final = {reports[-1].E_total!r}")
    return EXIT_OK


def cmd_infsup(cfg: RunConfig, out: Path) -> int:
    disc = None
    rows = []
    for level in cfg.levels:
        disc = _discretization(cfg, level)
        r = estimate_inf_sup(disc)
        rows.append([level, disc.mesh.n_vertices, repr(r.beta_h), repr(r.constructive), repr(r.beta_a)])
        print(f"level {level}: beta_h = {r.beta_h:.6f}  constructive = {r.constructive:.6f}  "
              f"beta_a = {r.beta_a:.6f}")
    _write_manifest(cfg, disc, out)
    with open(out / "infsup.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "vertices", "beta_h", "constructive", "beta_a"])
        writer.writerows(rows)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    disc = _discretization(cfg)
    results, diagnostics = run_verify(disc, cfg.seed, cfg.n_random)
    _write_manifest(cfg, disc, out, [f"{r.name} = {r.tolerance}" for r in results])
    lines = [r.line() for r in results]
    lines += [f"INFO {k:<28s} value={v:.6e}" for k, v in diagnostics.items()]
    (out / "verify_report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if all(r.ok for r in results) else EXIT_INVARIANT


HANDLERS = {"resolvent": cmd_resolvent, "evolve": cmd_evolve, "infsup": cmd_infsup, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multifsi", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument("--refine", type=int, help="override geometry.refinement_level")
    parser.add_argument("--out", type=Path, help="output directory (overrides run.output_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command) if args.config else build_config({}, args.command, False)
        if args.refine is not None:
            if args.refine < 0:
                raise ConfigurationError("--refine must be nonnegative")
            cfg = replace(cfg, geometry=cfg.geometry.refined(args.refine))
        if args.out is not None:
            cfg = replace(cfg, output_dir=args.out)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        status = HANDLERS[args.command](cfg, out)
        log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
        return status
    except (ConfigurationError, MeshResolutionError, TopologyError) as exc:
        print(f"multifsi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, CompatibilityError, np.linalg.LinAlgError) as exc:
        print(f"multifsi: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConstraintViolationError as exc:
        print(f"multifsi: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
