"""Temporal convergence studies and one-step order measurements."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .log_flow import artanh
from .spectral import Field, l2_norm
from .stepper import Scheme, evolve

log = logging.getLogger(__name__)


@dataclass
class ConvergenceReport:
    taus: list[float]
    errors: list[float]
    rates: list[float]
    reference_tau: float
    errors_vec: list[float] = field(default_factory=list)
    errors_rms: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.rates) != len(self.errors) - 1:
            raise ValueError("rates must be one shorter than errors")
        if any(not e > 0 for e in self.errors):
            raise ValueError("errors must be strictly positive")

    def rows(self):
        for i, (tau, err) in enumerate(zip(self.taus, self.errors)):
            yield {
                "tau": tau,
                "error_L2": err,
                "error_vec": self.errors_vec[i] if self.errors_vec else float("nan"),
                "error_rms": self.errors_rms[i] if self.errors_rms else float("nan"),
                "rate": self.rates[i - 1] if i else float("nan"),
            }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau", "error_L2", "error_vec", "error_rms", "rate"])
            for row in self.rows():
                writer.writerow([f"{row[k]:.17g}" for k in row])

    def to_text(self) -> str:
        lines = [
            f"reference tau = {self.reference_tau:g}",
            f"{'tau':>12} {'error_L2':>12} {'error_vec':>12} {'error_rms':>12} {'rate':>7}",
        ]
        for row in self.rows():
            rate = "--" if math.isnan(row["rate"]) else f"{row['rate']:.3f}"
            lines.append(
                f"{row['tau']:>12.6g} {row['error_L2']:>12.4e} {row['error_vec']:>12.4e} "
                f"{row['error_rms']:>12.4e} {rate:>7}"
            )
        return "\n".join(lines)


def _steps_for(T: float, tau: float) -> int:
    n = round(T / tau)
    if n < 1 or abs(n * tau - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of tau={tau}")
    return n


def observed_rates(taus: Sequence[float], errors: Sequence[float]) -> list[float]:
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(taus[i] / taus[i + 1])
        for i in range(len(errors) - 1)
    ]


def _cache_key(u0: Field, scheme: Scheme, T: float) -> str:
    payload = {
        "grid": dataclasses.asdict(u0.grid),
        "scheme": type(scheme).__name__,
        "params": {k: v for k, v in dataclasses.asdict(scheme).items()},
        "T": T,
        "u0": hashlib.sha256(u0.values.tobytes()).hexdigest(),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:24]


def reference_solution(u0: Field, scheme: Scheme, T: float, cache_dir=None) -> Field:
    """Fine-step solution at time T, optionally cached as .npy keyed by config hash."""
    n = _steps_for(T, scheme.tau)
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"reference_{_cache_key(u0, scheme, T)}.npy"
        if path.exists():
            log.info("loading cached reference %s", path)
            return Field(u0.grid, np.load(path))
    ref = evolve(u0, scheme, n)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, ref.values)
    return ref


def convergence_study(
    u0: Field,
    scheme: Scheme,
    taus: Sequence[float],
    reference_tau: float,
    T: float,
    cache_dir=None,
) -> ConvergenceReport:
    """Errors at time T of runs with each tau against a run with ``reference_tau``.

    ``scheme`` supplies every parameter except the step, which is replaced.
    """
    taus = [float(t) for t in taus]
    if not reference_tau < min(taus) / 10:
        raise ValueError("reference_tau must be below min(taus) / 10")
    for tau in [*taus, reference_tau]:
        _steps_for(T, tau)

    ref = reference_solution(u0, dataclasses.replace(scheme, tau=reference_tau), T, cache_dir)
    grid = u0.grid
    errors, errors_vec, errors_rms = [], [], []
    for tau in taus:
        sol = evolve(u0, dataclasses.replace(scheme, tau=tau), _steps_for(T, tau))
        diff = Field(grid, sol.values - ref.values)
        errors.append(l2_norm(diff))
        vec = float(np.linalg.norm(diff.values))
        errors_vec.append(vec)
        errors_rms.append(vec / math.sqrt(diff.values.size))
        log.info("tau=%g error=%.4e", tau, errors[-1])
    config = {
        "scheme": type(scheme).__name__,
        **{k: v for k, v in dataclasses.asdict(scheme).items() if k != "tau"},
        "N": grid.n,
        "L": grid.length,
        "dim": grid.dim,
        "T": T,
    }
    return ConvergenceReport(
        taus=taus,
        errors=errors,
        rates=observed_rates(taus, errors),
        reference_tau=reference_tau,
        errors_vec=errors_vec,
        errors_rms=errors_rms,
        config=config,
    )


def _rhs(law: str, theta: float | None, theta_c: float | None) -> Callable:
    if law == "polynomial":
        return lambda w: w - w**3
    if law == "logarithmic":
        if theta is None or theta_c is None:
            raise ValueError("logarithmic law needs theta and theta_c")

        def rhs(w):
            if np.any(np.abs(w) >= 1):
                raise FloatingPointError("RK4 iterate left (-1, 1)")
            return theta_c * w - theta * artanh(w)

        return rhs
    raise ValueError(f"unknown law {law!r}")


def _rk4(rhs, v, t: float, substeps: int):
    h = t / substeps
    w = v
    for _ in range(substeps):
        k1 = rhs(w)
        k2 = rhs(w + 0.5 * h * k1)
        k3 = rhs(w + 0.5 * h * k2)
        k4 = rhs(w + h * k3)
        w = w + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return w


def ode_flow_oracle(
    law: str,
    v,
    t: float,
    substeps: int = 1000,
    theta: float | None = None,
    theta_c: float | None = None,
    rtol: float = 1e-12,
    max_doublings: int = 6,
):
    """Time-t flow of the reaction ODE by composed classical RK4.

    ``law`` is ``"polynomial"`` (dw/dt = w - w^3) or ``"logarithmic"``
    (dw/dt = theta_c w - theta artanh w).  The step count is doubled until two
    successive results agree to ``rtol``.
    """
    rhs = _rhs(law, theta, theta_c)
    v = np.asarray(v, dtype=np.float64)
    if t == 0:
        return v if v.ndim else float(v)
    coarse = _rk4(rhs, v, t, substeps)
    for _ in range(max_doublings):
        substeps *= 2
        fine = _rk4(rhs, v, t, substeps)
        scale = np.maximum(np.abs(fine), 1e-300)
        if np.all(np.abs(fine - coarse) <= rtol * scale + 1e-300):
            return fine if fine.ndim else float(fine)
        coarse = fine
    warnings.warn("ODE oracle did not reach its Richardson tolerance", RuntimeWarning)
    return fine if fine.ndim else float(fine)


def one_step_errors(flow: Callable, oracle: Callable, taus, samples) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    return np.array(
        [float(np.max(np.abs(flow(samples, tau) - oracle(samples, tau)))) for tau in taus]
    )


def one_step_order(flow: Callable, oracle: Callable, taus, samples) -> float:
    """Least-squares slope of log(max error) against log(tau).

    ``flow(v, tau)`` and ``oracle(v, tau)`` act on arrays of sample points.
    """
    taus = np.asarray(taus, dtype=np.float64)
    errs = one_step_errors(flow, oracle, taus, samples)
    keep = errs > 0
    if not np.all(keep):
        warnings.warn("zero one-step errors excluded from the order fit", RuntimeWarning)
    if keep.sum() < 2:
        raise ValueError("need at least two nonzero errors to fit an order")
    slope, _ = np.polyfit(np.log(taus[keep]), np.log(errs[keep]), 1)
    return float(slope)
