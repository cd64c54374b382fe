"""Strang composition, the time loop with invariant monitoring, and initial data."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import log_flow, poly_flow
from .log_flow import LogScheme, NewtonFailure
from .poly_flow import PolyScheme
from .spectral import Field, PeriodicGrid, apply_heat_propagator

log = logging.getLogger(__name__)

Scheme = Union[PolyScheme, LogScheme]

MAX_PRINCIPLE_SLACK = 1e-10
ENERGY_SLACK = 1e-10


class _StepError(RuntimeError):
    def __init__(self, message: str, step: int, state=None):
        super().__init__(f"step {step}: {message}")
        self.step = step
        # Partial SimulationState when raised from ``run``.
        self.state = state


class InvariantViolation(_StepError):
    pass


class SolverFailure(_StepError):
    pass


@dataclass(frozen=True)
class EnergyRecord:
    step: int
    time: float
    standard_energy: float
    modified_energy: float
    max_abs: float
    mean: float


@dataclass
class SimulationState:
    field: Field
    scheme: Scheme
    step: int = 0
    records: list[EnergyRecord] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def time(self) -> float:
        return self.step * self.scheme.tau


def nonlinear_flow(values: np.ndarray, scheme: Scheme) -> np.ndarray:
    if isinstance(scheme, PolyScheme):
        return poly_flow.poly_nonlinear_flow(values, scheme.tau)
    return log_flow.prrk_flow(values, scheme)


def strang_step(u: Field, scheme: Scheme) -> Field:
    half = 0.5 * scheme.epsilon**2 * scheme.tau
    u_half = apply_heat_propagator(u, half)
    reacted = u_half.map(lambda v: nonlinear_flow(v, scheme))
    return apply_heat_propagator(reacted, half)


def evolve(u0: Field, scheme: Scheme, n_steps: int) -> Field:
    """``n_steps`` Strang steps without diagnostics.

    Adjacent half-step heat propagators are fused into one full step, which
    only changes roundoff relative to repeated ``strang_step`` calls.
    """
    _check_initial(u0, scheme)
    if n_steps == 0:
        return u0
    grid = u0.grid
    half = np.exp(0.5 * scheme.epsilon**2 * scheme.tau * grid.half_symbol)
    full = half * half
    uh = np.fft.rfftn(u0.values) * half
    for n in range(1, n_steps + 1):
        v = np.fft.irfftn(uh, s=grid.shape, axes=grid.axes)
        try:
            v = nonlinear_flow(v, scheme)
        except NewtonFailure as exc:
            raise SolverFailure(str(exc), n) from exc
        except ValueError as exc:
            raise InvariantViolation(str(exc), n) from exc
        uh = np.fft.rfftn(v) * (half if n == n_steps else full)
    return Field(grid, np.fft.irfftn(uh, s=grid.shape, axes=grid.axes))


def standard_energy(u: Field, scheme: Scheme) -> float:
    if isinstance(scheme, PolyScheme):
        return poly_flow.standard_energy(u, scheme.epsilon)
    return log_flow.standard_energy_log(u, scheme)


def modified_energy(u: Field, scheme: Scheme) -> float:
    if isinstance(scheme, PolyScheme):
        return poly_flow.modified_energy_poly(u, scheme)
    return log_flow.modified_energy_log(u, scheme)


def make_record(u: Field, scheme: Scheme, step: int) -> EnergyRecord:
    return EnergyRecord(
        step=step,
        time=step * scheme.tau,
        standard_energy=standard_energy(u, scheme),
        modified_energy=modified_energy(u, scheme),
        max_abs=u.max_abs(),
        mean=u.mean(),
    )


def max_norm_bound(u0: Field, scheme: Scheme) -> float:
    if isinstance(scheme, PolyScheme):
        return max(1.0, u0.max_abs())
    return scheme.u_star


def _check_initial(u0: Field, scheme: Scheme):
    if isinstance(scheme, LogScheme) and u0.max_abs() > scheme.u_star:
        raise ValueError(
            f"initial max |u| = {u0.max_abs():.6g} exceeds u* = {scheme.u_star:.12g}"
        )


def _energy_checked(scheme: Scheme) -> bool:
    return isinstance(scheme, PolyScheme) or scheme.strict


def run(
    u0: Field,
    scheme: Scheme,
    T: float,
    record_every: int = 1,
    policy: str = "abort",
    check_energy_every_step: bool = False,
    callback=None,
) -> SimulationState:
    """March floor(T / tau) Strang steps (up to roundoff in T / tau).

    Records are taken at step 0, every ``record_every`` steps and at the final
    step.  The max-norm bound is checked every step; the modified energy is
    compared between consecutive records (or every step when
    ``check_energy_every_step``).  ``policy`` is ``"abort"`` or ``"warn"``.
    ``callback(state)`` is invoked after every step.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if record_every < 1:
        raise ValueError(f"record_every must be >= 1, got {record_every}")
    if policy not in ("abort", "warn"):
        raise ValueError(f"policy must be 'abort' or 'warn', got {policy!r}")
    _check_initial(u0, scheme)

    n_steps = math.floor(T / scheme.tau + 1e-9)
    if abs(n_steps * scheme.tau - T) > 1e-9 * max(1.0, T):
        log.warning(
            "T=%g is not a multiple of tau=%g; stopping at t=%g",
            T, scheme.tau, n_steps * scheme.tau,
        )
    bound = max_norm_bound(u0, scheme) + MAX_PRINCIPLE_SLACK
    check_energy = _energy_checked(scheme)

    state = SimulationState(field=u0, scheme=scheme)
    state.records.append(make_record(u0, scheme, 0))
    last_energy = state.records[0].modified_energy

    def violation(message: str, step: int):
        if policy == "abort":
            raise InvariantViolation(message, step, state)
        state.violations.append(f"step {step}: {message}")
        warnings.warn(f"step {step}: {message}", RuntimeWarning, stacklevel=3)

    u = u0
    for n in range(1, n_steps + 1):
        try:
            u = strang_step(u, scheme)
        except (NewtonFailure, FloatingPointError) as exc:
            raise SolverFailure(str(exc), n, state) from exc
        except ValueError as exc:
            # Precondition of the reaction step violated by the previous iterate.
            raise InvariantViolation(str(exc), n, state) from exc
        state.field, state.step = u, n

        m = u.max_abs()
        if m > bound:
            violation(f"max |u| = {m:.17g} exceeds bound {bound - MAX_PRINCIPLE_SLACK:.17g}", n)

        recording = n % record_every == 0 or n == n_steps
        if recording or (check_energy and check_energy_every_step):
            rec = make_record(u, scheme, n)
            if check_energy:
                if rec.modified_energy > last_energy + ENERGY_SLACK * max(1.0, abs(last_energy)):
                    violation(
                        f"modified energy increased from {last_energy:.17g} "
                        f"to {rec.modified_energy:.17g}",
                        n,
                    )
            last_energy = rec.modified_energy
            if recording:
                state.records.append(rec)
        if callback is not None:
            callback(state)
    return state


def _require_2d(grid: PeriodicGrid):
    if grid.dim != 2:
        raise ValueError(f"this initial condition is two-dimensional, grid has dim={grid.dim}")


def ic_sine(grid: PeriodicGrid) -> Field:
    _require_2d(grid)
    x, y = grid.nodes()
    return Field(grid, 0.05 * np.sin(x) * np.sin(y))


def ic_disk(grid: PeriodicGrid) -> Field:
    _require_2d(grid)
    x, y = grid.nodes()
    inside = (x - np.pi) ** 2 + (y - np.pi) ** 2 <= 1.2
    return Field(grid, 0.5 * (inside.astype(np.float64) - 0.5))


SEVEN_CIRCLES = (
    (np.pi / 2, np.pi / 2, np.pi / 5),
    (np.pi / 4, 3 * np.pi / 4, 2 * np.pi / 15),
    (np.pi / 2, 5 * np.pi / 4, 2 * np.pi / 15),
    (np.pi, np.pi / 4, np.pi / 10),
    (3 * np.pi / 2, np.pi / 4, np.pi / 10),
    (np.pi, np.pi, np.pi / 4),
    (3 * np.pi / 2, 3 * np.pi / 2, np.pi / 4),
)


def bump(s, epsilon: float):
    """2 exp(-eps^2 / s^2) for s < 0, else 0."""
    s = np.asarray(s, dtype=np.float64)
    neg = s < 0
    safe = np.where(neg, s, -1.0)
    return np.where(neg, 2.0 * np.exp(-(epsilon**2) / safe**2), 0.0)


def seven_circles(x, y, epsilon: float):
    out = -np.ones(np.broadcast(x, y).shape)
    for xc, yc, r in SEVEN_CIRCLES:
        out = out + bump(np.hypot(x - xc, y - yc) - r, epsilon)
    return out


def ic_seven_circles(grid: PeriodicGrid, epsilon: float) -> Field:
    _require_2d(grid)
    x, y = grid.nodes()
    return Field(grid, seven_circles(x, y, epsilon))
