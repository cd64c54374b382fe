"""Double-well potential F(u) = (u^2 - 1)^2 / 4: exact reaction flow and energies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Field, apply_heat_propagator, quadratic_form


@dataclass(frozen=True)
class PolyScheme:
    epsilon: float
    tau: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def poly_nonlinear_flow(a, tau: float):
    """Exact time-``tau`` flow of du/dt = u - u^3 started at ``a``.

    Written as ``a / sqrt(e^{-2tau} + (1 - e^{-2tau}) a^2)``, which equals
    ``e^tau a / sqrt(1 + (e^{2tau} - 1) a^2)`` and cannot overflow for large tau.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite input to the nonlinear flow")
    decay = np.exp(-2.0 * tau)
    out = a / np.sqrt(decay - np.expm1(-2.0 * tau) * a * a)
    return out if out.ndim else float(out)


def modified_potential_poly(z, tau: float):
    """The tau-dependent potential whose gradient step reproduces the exact flow.

    Rearranged so that each term is O(1) as tau -> 0; with s = sqrt(1 + q z^2),
    q = e^{2tau} - 1, the value is

        1/4 + z^2 (q z^2 / (s + 1) - 2 (e^tau - 1)) / (2 tau (s + 1)).
    """
    z = np.asarray(z, dtype=np.float64)
    q = np.expm1(2.0 * tau)
    z2 = z * z
    s1 = np.sqrt(1.0 + q * z2) + 1.0
    out = 0.25 + z2 * (q * z2 / s1 - 2.0 * np.expm1(tau)) / (2.0 * tau * s1)
    return out if out.ndim else float(out)


def modified_potential_poly_deriv(z, tau: float):
    z = np.asarray(z, dtype=np.float64)
    out = -(poly_nonlinear_flow(z, tau) - z) / tau
    return out if np.ndim(out) else float(out)


def modified_potential_poly_second(z, tau: float):
    z = np.asarray(z, dtype=np.float64)
    out = 1.0 / tau - np.exp(tau) / (tau * (1.0 + np.expm1(2.0 * tau) * z * z) ** 1.5)
    return out if out.ndim else float(out)


def double_well(u):
    return 0.25 * (u * u - 1.0) ** 2


def gradient_energy(u: Field, epsilon: float) -> float:
    """(eps^2 / 2) ||grad_h u||^2 evaluated through the discrete symbol."""
    return 0.5 * epsilon**2 * quadratic_form(u, -u.grid.symbol)


def standard_energy(u: Field, epsilon: float) -> float:
    return gradient_energy(u, epsilon) + u.grid.cell_volume * float(
        np.sum(double_well(u.values))
    )


def dissipation_multiplier(grid, epsilon: float, tau: float) -> np.ndarray:
    """(1 - e^{eps^2 tau w_k}) / (2 tau), bounded and nonnegative."""
    return -np.expm1(epsilon**2 * tau * grid.symbol) / (2.0 * tau)


def modified_energy_poly(u_n: Field, scheme: PolyScheme) -> float:
    eps, tau = scheme.epsilon, scheme.tau
    quad = quadratic_form(u_n, dissipation_multiplier(u_n.grid, eps, tau))
    u_tilde = apply_heat_propagator(u_n, 0.5 * eps**2 * tau)
    pot = u_n.grid.cell_volume * float(np.sum(modified_potential_poly(u_tilde.values, tau)))
    return quad + pot
