"""Flory-Huggins potential: root u*, PR-RK reaction step and its modified potential.

The reaction ODE is dw/dt = g(w) with g(u) = theta_c u - theta artanh(u).  It is
advanced by the two-stage diagonally implicit Runge-Kutta tableau

    a   | a      0
    1-a | 1-2a   a
    ----+----------
        | 1/2    1/2

whose stage equations reduce to scalar problems H(u) = rhs with
H(u) = u - a tau g(u), solved pointwise by bracketed Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate

from .spectral import Field, apply_heat_propagator, quadratic_form

STRICT_A_MIN = 1.0 + math.sqrt(2.0) / 2.0
CROUZEIX_A = 0.5 + math.sqrt(3.0) / 6.0
MODES = ("strict", "solvable")

# Relative slack for |v| <= u* coming from FFT roundoff in the heat step.
_BOUND_SLACK = 1e-12


class NewtonFailure(RuntimeError):
    """A stage equation did not converge; usually a violated (a, tau) condition."""


def artanh(u):
    return 0.5 * (np.log1p(u) - np.log1p(-u))


def _check_open_interval(u):
    if np.any(np.abs(u) >= 1.0):
        raise ValueError("logarithmic potential is only defined for |u| < 1")


def g_log(u, theta: float, theta_c: float):
    u = np.asarray(u, dtype=np.float64)
    _check_open_interval(u)
    out = theta_c * u - theta * artanh(u)
    return out if out.ndim else float(out)


def g_log_prime(u, theta: float, theta_c: float):
    u = np.asarray(u, dtype=np.float64)
    out = theta_c - theta / ((1.0 - u) * (1.0 + u))
    return out if out.ndim else float(out)


def find_ustar(theta: float, theta_c: float) -> float:
    """Positive root of g in (0, 1): bisection for safety, Newton to polish."""
    if not 0 < theta < theta_c:
        raise ValueError(f"need 0 < theta < theta_c, got theta={theta}, theta_c={theta_c}")

    def g(u):
        return theta_c * u - theta * artanh(u)

    lo, hi = 0.0, 1.0 - 1e-15
    if g(hi) >= 0:
        raise ValueError("no sign change of g on (0, 1 - 1e-15); theta too close to theta_c")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    for _ in range(5):
        step = g(u) / (theta_c - theta / ((1.0 - u) * (1.0 + u)))
        if not lo < u - step < hi or step == 0:
            break
        u -= step
    # Near u* one ulp moves g by |g'| * 1e-16; take the best neighbouring float.
    candidates = [u]
    for direction in (0.0, 1.0):
        x = u
        for _ in range(2):
            x = float(np.nextafter(x, direction))
            candidates.append(x)
    candidates = [c for c in candidates if 0 < c < 1]
    return min(candidates, key=lambda c: abs(g(c)))


@dataclass(frozen=True)
class LogScheme:
    epsilon: float
    tau: float
    theta: float
    theta_c: float
    a: float = STRICT_A_MIN
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    mode: str = "strict"
    u_star: float = field(init=False, repr=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0 < self.theta < self.theta_c:
            raise ValueError(
                f"need 0 < theta < theta_c, got theta={self.theta}, theta_c={self.theta_c}"
            )
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.newton_tol > 0 or self.newton_max_iter < 1:
            raise ValueError("newton_tol must be positive and newton_max_iter >= 1")
        gap = self.theta_c - self.theta
        if self.mode == "strict":
            if self.a < STRICT_A_MIN - 1e-12:
                raise ValueError(f"strict mode needs a >= 1 + sqrt(2)/2, got a={self.a}")
            bound = 1.0 / (3.0 * self.a * gap)
            if self.tau > bound * (1 + 1e-12):
                raise ValueError(
                    f"strict mode needs tau <= 1/(3 a (theta_c - theta)) = {bound:.6g}, "
                    f"got tau={self.tau}"
                )
        else:
            if self.a < 0.5:
                raise ValueError(f"solvable mode needs a >= 1/2, got a={self.a}")
            bound = 1.0 / ((3.0 * self.a - 1.0) * gap)
            if self.tau > bound * (1 + 1e-12):
                raise ValueError(
                    f"solvable mode needs tau <= 1/((3a - 1)(theta_c - theta)) = {bound:.6g}, "
                    f"got tau={self.tau}"
                )
        object.__setattr__(self, "u_star", find_ustar(self.theta, self.theta_c))

    @property
    def strict(self) -> bool:
        return self.mode == "strict"

    def g(self, u):
        return g_log(u, self.theta, self.theta_c)

    @cached_property
    def potential_table(self) -> ModifiedPotentialTable:
        return ModifiedPotentialTable(self)


def H_map(u, scheme: LogScheme):
    u = np.asarray(u, dtype=np.float64)
    _check_open_interval(u)
    at = scheme.a * scheme.tau
    out = (1.0 - at * scheme.theta_c) * u + at * scheme.theta * artanh(u)
    return out if out.ndim else float(out)


def H_prime(u, scheme: LogScheme):
    u = np.asarray(u, dtype=np.float64)
    at = scheme.a * scheme.tau
    out = 1.0 - at * scheme.theta_c + at * scheme.theta / ((1.0 - u) * (1.0 + u))
    return out if out.ndim else float(out)


def _solve_H(rhs: np.ndarray, scheme: LogScheme, stage: int) -> np.ndarray:
    """Solve H(u) = rhs pointwise for rhs in [0, u*], root in [0, u*].

    H is increasing and convex on [0, u*], so plain Newton from u* decreases
    monotonically onto the root.  That iteration runs first, clamped to
    [0, u*] against roundoff; if it produces non-finite values or fails to
    converge, the safeguarded solver takes over.  One extra Newton step is
    taken after the residual tolerance is met.
    """
    at = scheme.a * scheme.tau
    c1 = 1.0 - at * scheme.theta_c
    c2 = at * scheme.theta
    u_star = scheme.u_star
    x = np.full_like(rhs, u_star)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(scheme.newton_max_iter):
            f = c1 * x + c2 * artanh(x) - rhs
            step = f / (c1 + c2 / ((1.0 - x) * (1.0 + x)))
            x_next = np.clip(x - step, 0.0, u_star)
            if not np.all(np.isfinite(x_next)):
                break
            if np.max(np.abs(f)) <= scheme.newton_tol:
                return x_next
            x = x_next
    return _solve_H_safeguarded(rhs, scheme, stage)


def _solve_H_safeguarded(rhs: np.ndarray, scheme: LogScheme, stage: int) -> np.ndarray:
    """Bracketed Newton: an iterate leaving the bracket, or five consecutive
    non-decreasing residuals, triggers a bisection step instead."""
    u_star = scheme.u_star
    at = scheme.a * scheme.tau
    c1 = 1.0 - at * scheme.theta_c
    c2 = at * scheme.theta

    lo = np.zeros_like(rhs)
    hi = np.full_like(rhs, u_star)
    x = hi.copy()
    best = np.full_like(rhs, np.inf)
    stall = np.zeros(rhs.shape, dtype=np.int64)
    for _ in range(scheme.newton_max_iter):
        f = c1 * x + c2 * artanh(x) - rhs
        res = np.abs(f)
        done = res <= scheme.newton_tol
        hi = np.where(f > 0, x, hi)
        lo = np.where(f < 0, x, lo)
        stall = np.where(res < best, 0, stall + 1)
        best = np.minimum(best, res)
        df = c1 + c2 / ((1.0 - x) * (1.0 + x))
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - f / df
        ok = np.isfinite(newton) & (newton >= lo) & (newton <= hi) & (stall < 5)
        x_next = np.where(ok, newton, 0.5 * (lo + hi))
        if np.all(done):
            return np.where(ok, newton, x)
        x = np.where(done, np.where(ok, newton, x), x_next)
    f = c1 * x + c2 * artanh(x) - rhs
    worst = float(np.max(np.abs(f)))
    raise NewtonFailure(
        f"stage {stage} Newton iteration did not reach tol={scheme.newton_tol:g} in "
        f"{scheme.newton_max_iter} iterations (max residual {worst:.3e}); "
        f"check a={scheme.a}, tau={scheme.tau} against the solvability bound"
    )


def _clip_to_bound(v: np.ndarray, scheme: LogScheme) -> np.ndarray:
    u_star = scheme.u_star
    if np.any(np.abs(v) > u_star * (1.0 + _BOUND_SLACK)):
        raise ValueError(
            f"|v| = {float(np.max(np.abs(v))):.17g} exceeds u* = {u_star:.17g}"
        )
    return np.clip(v, -u_star, u_star)


def _as_array(v):
    arr = np.asarray(v, dtype=np.float64)
    return arr, arr.ndim == 0


def _stage1(v: np.ndarray, scheme: LogScheme) -> np.ndarray:
    s = np.sign(v)
    return s * _solve_H(np.abs(v), scheme, stage=1)


def _stage2(v: np.ndarray, u1: np.ndarray, scheme: LogScheme) -> np.ndarray:
    rhs = v + (1.0 - 2.0 * scheme.a) * scheme.tau * g_log(u1, scheme.theta, scheme.theta_c)
    s = np.sign(v)
    # The solvability bound keeps rhs on the same side of 0 as v and below u*.
    r = np.clip(s * rhs, 0.0, scheme.u_star)
    return s * _solve_H(r, scheme, stage=2)


def newton_stage1(v, scheme: LogScheme):
    """Root u1 of H(u1) = v, with v < u1 < u* for 0 < v < u*."""
    arr, scalar = _as_array(v)
    arr = _clip_to_bound(arr, scheme)
    out = _stage1(arr, scheme)
    return float(out) if scalar else out


def newton_stage2(v, u1, scheme: LogScheme):
    """Root u2 of H(u2) = v + (1 - 2a) tau g(u1)."""
    arr, scalar = _as_array(v)
    arr = _clip_to_bound(arr, scheme)
    u1 = np.asarray(u1, dtype=np.float64)
    out = _stage2(arr, u1, scheme)
    return float(out) if scalar else out


def prrk_stages(v, scheme: LogScheme):
    arr = _clip_to_bound(np.asarray(v, dtype=np.float64), scheme)
    u1 = _stage1(arr, scheme)
    u2 = _stage2(arr, u1, scheme)
    return arr, u1, u2


def prrk_flow(v, scheme: LogScheme):
    """One PR-RK step of length tau for dw/dt = g(w), applied pointwise."""
    scalar = np.ndim(v) == 0
    arr, u1, u2 = prrk_stages(v, scheme)
    g = scheme.g
    out = arr + 0.5 * scheme.tau * (g(u1) + g(u2))
    return float(out) if scalar else out


def modified_potential_log_deriv(u, scheme: LogScheme):
    """-(g(u1(u)) + g(u2(u))) / 2."""
    scalar = np.ndim(u) == 0
    _, u1, u2 = prrk_stages(u, scheme)
    out = -0.5 * (scheme.g(u1) + scheme.g(u2))
    return float(out) if scalar else out


def modified_potential_log(u: float, scheme: LogScheme) -> float:
    """Direct adaptive quadrature of the stage-based derivative from 0 to u.

    Slow; the energy evaluation uses ``scheme.potential_table`` instead.
    """
    u = float(u)
    if abs(u) > scheme.u_star * (1.0 + _BOUND_SLACK):
        raise ValueError(f"|u| = {abs(u)} exceeds u* = {scheme.u_star}")
    x = min(abs(u), scheme.u_star)
    if x == 0:
        return 0.0
    val, err = integrate.quad(
        lambda s: modified_potential_log_deriv(s, scheme),
        0.0,
        x,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    if not err <= 1e-10:
        raise NewtonFailure(f"quadrature for the modified potential stalled (error {err:.2e})")
    return val


class ModifiedPotentialTable:
    """Piecewise Legendre representation of the modified log potential on [0, u*].

    The derivative is sampled at 32 Gauss-Legendre nodes per panel, converted
    to a Legendre series and integrated exactly, panel by panel.  Panels shrink
    geometrically towards u*, where the stage maps have nearby complex
    singularities at distance ~ a tau theta.
    """

    nodes_per_panel = 32

    def __init__(self, scheme: LogScheme, grading: float = 0.7, max_panels: int = 256):
        self.scheme = scheme
        u_star = scheme.u_star
        gap = min(0.05, 0.25 * scheme.a * scheme.tau * scheme.theta)
        # Distances from u*: u*, u* q, u* q^2, ... down to ``gap``.
        n_graded = max(1, math.ceil(math.log(gap / u_star) / math.log(grading)))
        n_graded = min(n_graded, max_panels - 1)
        dist = u_star * grading ** np.arange(n_graded + 1)
        breaks = np.concatenate([u_star - dist, [u_star]])
        breaks[0] = 0.0
        self.breaks = breaks
        self.n_panels = len(breaks) - 1

        t, w = legendre.leggauss(self.nodes_per_panel)
        left, right = breaks[:-1], breaks[1:]
        mid, half = 0.5 * (left + right), 0.5 * (right - left)
        x = mid[:, None] + half[:, None] * t[None, :]
        fprime = modified_potential_log_deriv(x.ravel(), scheme).reshape(x.shape)

        k = np.arange(self.nodes_per_panel)
        vander = legendre.legvander(t, self.nodes_per_panel - 1)  # (nodes, deg+1)
        deriv_coef = (fprime * w[None, :]) @ vander * (k + 0.5)[None, :]
        self.deriv_coef = deriv_coef
        self.node_count = x.size

        coef = np.stack(
            [legendre.legint(c, lbnd=-1, scl=h) for c, h in zip(deriv_coef, half)]
        )
        panel_integrals = legendre.legval(1.0, coef.T)
        offsets = np.concatenate([[0.0], np.cumsum(panel_integrals)[:-1]])
        coef[:, 0] += offsets
        self.coef = coef
        self._mid, self._half = mid, half

    def _locate(self, x: np.ndarray):
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, self.n_panels - 1)
        t = (x - self._mid[idx]) / self._half[idx]
        return idx, t

    @staticmethod
    def _clenshaw(coef: np.ndarray, t: np.ndarray) -> np.ndarray:
        # Legendre recurrence with per-point coefficient rows.
        n = coef.shape[1]
        b1 = np.zeros_like(t)
        b2 = np.zeros_like(t)
        for k in range(n - 1, 0, -1):
            alpha = (2 * k + 1) / (k + 1) * t
            beta = -(k + 1) / (k + 2)
            b1, b2 = coef[:, k] + alpha * b1 + beta * b2, b1
        return coef[:, 0] + t * b1 - 0.5 * b2

    def _prepare(self, u):
        x = np.abs(np.asarray(u, dtype=np.float64))
        if np.any(x > self.scheme.u_star * (1.0 + _BOUND_SLACK)):
            raise ValueError("argument exceeds u* in modified potential table")
        return np.minimum(x, self.scheme.u_star)

    def __call__(self, u):
        x = self._prepare(u)
        idx, t = self._locate(x.ravel())
        out = self._clenshaw(self.coef[idx], t).reshape(x.shape)
        out = np.where(x == 0, 0.0, out)
        return out if out.ndim else float(out)

    def derivative(self, u):
        u = np.asarray(u, dtype=np.float64)
        x = self._prepare(u)
        idx, t = self._locate(x.ravel())
        out = self._clenshaw(self.deriv_coef[idx], t).reshape(x.shape) * np.sign(u)
        return out if out.ndim else float(out)


def modified_energy_log(u_n: Field, scheme: LogScheme) -> float:
    """Quadratic part in frequency space on u_n, potential part on the half-step field."""
    if u_n.max_abs() > scheme.u_star * (1.0 + _BOUND_SLACK):
        raise ValueError(f"max |u| = {u_n.max_abs()} exceeds u* = {scheme.u_star}")
    eps, tau = scheme.epsilon, scheme.tau
    mult = -np.expm1(eps**2 * tau * u_n.grid.symbol) / (2.0 * tau)
    quad = quadratic_form(u_n, mult)
    u_tilde = apply_heat_propagator(u_n, 0.5 * eps**2 * tau)
    pot = u_n.grid.cell_volume * float(np.sum(scheme.potential_table(u_tilde.values)))
    return quad + pot


def _xlogx(x):
    x = np.asarray(x, dtype=np.float64)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, x * np.log(safe), 0.0)


def standard_potential_log(u, theta: float, theta_c: float):
    u = np.asarray(u, dtype=np.float64)
    if np.any(np.abs(u) > 1.0):
        raise ValueError("Flory-Huggins potential needs |u| <= 1")
    out = 0.5 * theta * (_xlogx(1.0 + u) + _xlogx(1.0 - u)) - 0.5 * theta_c * u * u
    return out if out.ndim else float(out)


def standard_energy_log(u: Field, scheme: LogScheme) -> float:
    grad = 0.5 * scheme.epsilon**2 * quadratic_form(u, -u.grid.symbol)
    pot = standard_potential_log(u.values, scheme.theta, scheme.theta_c)
    return grad + u.grid.cell_volume * float(np.sum(pot))
