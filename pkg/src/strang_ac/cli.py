"""Command line entry point: ``strang-ac run|converge|ustar``.

Exit codes: 0 success, 1 configuration or I/O error, 2 invariant abort,
3 nonlinear solver failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, RunConfig, dump_config, load_config
from .log_flow import LogScheme, NewtonFailure, find_ustar, g_log
from .spectral import Field
from .stepper import (
    InvariantViolation,
    SolverFailure,
    ic_disk,
    ic_seven_circles,
    ic_sine,
    run,
)
from .verify import convergence_study

log = logging.getLogger("strang_ac")

OUTPUT_DIR_ENV = "STRANG_AC_OUTPUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_SOLVER = 0, 1, 2, 3


def output_dir(cfg: RunConfig) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)


def initial_field(cfg: RunConfig) -> Field:
    grid = cfg.grid()
    ic = cfg.initial_condition
    if ic == "sine":
        u0 = ic_sine(grid)
    elif ic == "disk":
        u0 = ic_disk(grid)
    elif ic == "seven_circles":
        u0 = ic_seven_circles(grid, cfg.epsilon)
    else:
        try:
            u0, _ = io.read_field(ic[len("file:"):])
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"initial_condition: cannot load {ic!r}: {exc}") from None
        if u0.grid != grid:
            raise ConfigError(f"initial_condition: {ic!r} has grid {u0.grid}, config has {grid}")
    if cfg.potential == "logarithmic":
        u_star = cfg.scheme().u_star
        if u0.max_abs() > u_star:
            # Seven circles sits at -1 away from the circles; project onto |u| <= u*.
            log.warning("initial data exceeds u* = %.12g; clipping to [-u*, u*]", u_star)
            u0 = Field(grid, np.clip(u0.values, -u_star, u_star))
    return u0


def _snapshot_steps(cfg: RunConfig) -> set[int]:
    return {int(round(t / cfg.tau)) for t in cfg.snapshot_times}


def _write_snapshot(out: Path, u: Field, step: int, cfg: RunConfig):
    stem = out / f"field_{step:07d}"
    io.write_field(
        stem,
        u,
        step=step,
        time=step * cfg.tau,
        potential=cfg.potential,
        params=cfg.to_dict(),
    )
    if u.grid.dim == 2:
        io.write_pgm(stem.with_suffix(".pgm"), u.values)


def cmd_run(config_path) -> int:
    cfg = load_config(config_path)
    scheme = cfg.scheme()
    u0 = initial_field(cfg)
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(cfg))
    snaps = _snapshot_steps(cfg)
    if 0 in snaps:
        _write_snapshot(out, u0, 0, cfg)

    def on_step(state):
        if state.step in snaps:
            _write_snapshot(out, state.field, state.step, cfg)

    status = EXIT_OK
    try:
        state = run(
            u0,
            scheme,
            cfg.T,
            record_every=cfg.record_every,
            policy=cfg.invariant_policy,
            callback=on_step,
        )
    except InvariantViolation as exc:
        log.error("invariant violated: %s", exc)
        state, status = exc.state, EXIT_INVARIANT
    except SolverFailure as exc:
        log.error("solver failure: %s", exc)
        state, status = exc.state, EXIT_SOLVER
    if state is not None:
        io.write_energy_csv(out / "energy.csv", state.records)
        for v in state.violations:
            log.warning("invariant warning: %s", v)
    log.info("wrote results to %s", out)
    return status


def cmd_converge(config_path) -> int:
    cfg = load_config(config_path)
    if not cfg.taus:
        raise ConfigError("taus: converge needs a non-empty list of steps")
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = convergence_study(
            initial_field(cfg),
            cfg.scheme(),
            cfg.taus,
            cfg.reference_tau,
            cfg.T,
            cache_dir=out / "reference_cache",
        )
    except ValueError as exc:
        raise ConfigError(f"taus/reference_tau/T: {exc}") from None
    report.write_csv(out / "convergence.csv")
    text = report.to_text()
    (out / "convergence.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_ustar(theta: float, theta_c: float, tau: float | None = None, a: float | None = None) -> int:
    if not 0 < theta < theta_c:
        raise ConfigError(f"theta must be < theta_c and positive (theta={theta}, theta_c={theta_c})")
    u = find_ustar(theta, theta_c)
    print(f"u*        = {u:.12f}")
    print(f"g(u*)     = {g_log(u, theta, theta_c):.3e}")
    lo, hi = np.nextafter(u, 0.0), np.nextafter(u, 1.0)
    print(f"g(u* - 1ulp) = {g_log(lo, theta, theta_c):+.3e}")
    print(f"g(u* + 1ulp) = {g_log(hi, theta, theta_c):+.3e}")
    if tau is not None:
        kw = {} if a is None else {"a": a}
        try:
            scheme = LogScheme(1.0, tau, theta, theta_c, mode="solvable", **kw)
        except ValueError as exc:
            raise ConfigError(f"tau/a: {exc}") from None
        table = scheme.potential_table
        print(f"modified potential table: {table.n_panels} panels, {table.node_count} nodes")
        print(f"Fbar(u*)  = {table(scheme.u_star):.15g}")
        print(f"Fbar'(u*) = {table.derivative(scheme.u_star):.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strang-ac",
        description="Strang splitting for the Allen-Cahn equation on periodic domains",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="time-march a configuration")
    p.add_argument("config")
    p = sub.add_parser("converge", help="temporal convergence study")
    p.add_argument("config")
    p = sub.add_parser("ustar", help="positive root of theta_c u - theta artanh(u)")
    p.add_argument("theta", type=float)
    p.add_argument("theta_c", type=float)
    p.add_argument("--tau", type=float, help="also tabulate the modified potential")
    p.add_argument("--a", type=float, help="PR-RK parameter for --tau")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "converge":
            return cmd_converge(args.config)
        return cmd_ustar(args.theta, args.theta_c, args.tau, args.a)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except NewtonFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvariantViolation, SolverFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT if isinstance(exc, InvariantViolation) else EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
