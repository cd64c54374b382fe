"""Acceptance suite.

Each test carries a ``criterion`` marker; the session summary prints one
PASS/FAIL/SKIP line per criterion.  Run just this module with

    pytest tests/test_acceptance.py -v

The N=512, T=20 polynomial study is skipped unless STRANG_AC_FULLSCALE=1.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy.optimize import bisect

from conftest import random_fourier_field
from strang_ac.log_flow import (
    CROUZEIX_A,
    STRICT_A_MIN,
    LogScheme,
    find_ustar,
    g_log,
    H_map,
    newton_stage1,
    newton_stage2,
    prrk_flow,
    prrk_stages,
)
from strang_ac.poly_flow import PolyScheme, poly_nonlinear_flow
from strang_ac.spectral import Field, PeriodicGrid, apply_heat_propagator, dft, inner
from strang_ac.stepper import ic_disk, ic_sine, modified_energy, standard_energy, strang_step
from strang_ac.verify import convergence_study, ode_flow_oracle, one_step_order

TWO_PI = 2 * math.pi
TAU_LADDER = [1 / 10, 1 / 20, 1 / 40, 1 / 80, 1 / 160]

criterion = pytest.mark.criterion


def fmt(values, spec=".4g"):
    return "[" + ", ".join(format(v, spec) for v in values) + "]"


# --- 1: polynomial convergence --------------------------------------------------


@criterion("1", "polynomial Strang rates in [1.9, 2.1] (N=128, T=2)")
def test_polynomial_convergence_rates(record_property):
    grid = PeriodicGrid(128, TWO_PI, 2)
    start = time.perf_counter()
    rep = convergence_study(ic_sine(grid), PolyScheme(0.1, 0.1), TAU_LADDER, 1e-4, 2.0)
    elapsed = time.perf_counter() - start
    record_property("detail", f"rates {fmt(rep.rates, '.3f')}, {elapsed:.0f}s")
    assert all(1.9 <= r <= 2.1 for r in rep.rates), rep.to_text()
    assert elapsed < 300


FULLSCALE_ERRORS = [9.367e-4, 2.345e-4, 5.865e-5, 1.466e-5, 3.665e-6]
FULLSCALE_RATES = [1.998, 1.999, 2.000, 2.000]


@pytest.mark.slow
@pytest.mark.fullscale
@criterion("1-full", "polynomial errors within 5% and rates within 0.02 of reference values (N=512, T=20)")
@pytest.mark.skipif(os.environ.get("STRANG_AC_FULLSCALE") != "1", reason="set STRANG_AC_FULLSCALE=1")
def test_polynomial_convergence_fullscale(record_property):
    grid = PeriodicGrid(512, TWO_PI, 2)
    rep = convergence_study(ic_sine(grid), PolyScheme(0.1, 0.1), TAU_LADDER, 1e-4, 20.0)
    record_property("detail", f"errors {fmt(rep.errors)}, rates {fmt(rep.rates, '.3f')}")
    for got, want in zip(rep.errors, FULLSCALE_ERRORS):
        assert abs(got - want) <= 0.05 * want, rep.to_text()
    for got, want in zip(rep.rates, FULLSCALE_RATES):
        assert abs(got - want) <= 0.02, rep.to_text()


# --- 2: logarithmic convergence ----------------------------------------------------


@criterion("2", "logarithmic Strang rates in [1.9, 2.3] (N=128, T=1, strict a)")
def test_logarithmic_convergence_rates(record_property):
    grid = PeriodicGrid(128, TWO_PI, 2)
    scheme = LogScheme(0.01, 0.1, 0.25, 1.0, a=STRICT_A_MIN, newton_tol=1e-12)
    start = time.perf_counter()
    rep = convergence_study(ic_disk(grid), scheme, TAU_LADDER, 1e-4, 1.0)
    elapsed = time.perf_counter() - start
    record_property("detail", f"rates {fmt(rep.rates, '.3f')}, {elapsed:.0f}s")
    assert all(1.9 <= r <= 2.3 for r in rep.rates), rep.to_text()
    assert elapsed < 600


# --- 3: one-step order of the PR-RK flow ---------------------------------------------


def _log_oracle(v, tau):
    return ode_flow_oracle("logarithmic", v, tau, substeps=200, theta=0.25, theta_c=1.0)


@criterion("3", "PR-RK one-step slope in [3.7, 4.3] (Crouzeix a) and [2.8, 3.3] (strict a)")
@pytest.mark.parametrize(
    "a,lo,hi", [(CROUZEIX_A, 3.7, 4.3), (STRICT_A_MIN, 2.8, 3.3)], ids=["crouzeix", "strict"]
)
def test_prrk_one_step_order(a, lo, hi, record_property):
    taus = np.geomspace(1e-3, 1e-1, 9)
    samples = np.linspace(-0.8, 0.8, 9)

    def flow(v, tau):
        return prrk_flow(v, LogScheme(0.01, tau, 0.25, 1.0, a=a, newton_tol=1e-14, mode="solvable"))

    slope = one_step_order(flow, _log_oracle, taus, samples)
    record_property("detail", f"a={a:.4f}: slope {slope:.3f}")
    assert lo <= slope <= hi


# --- 4: u* ---------------------------------------------------------------------------


@criterion("4", "u*(0.25, 1) = 0.99933 +- 1e-5 with |g(u*)| <= 1e-14")
def test_ustar(record_property):
    u = find_ustar(0.25, 1.0)
    residual = abs(float(g_log(u, 0.25, 1.0)))
    record_property("detail", f"u*={u:.12f}, |g|={residual:.1e}")
    assert abs(u - 0.99933) <= 1e-5
    assert residual <= 1e-14


# --- 5, 6: max principle and energy decay on random data --------------------------------

N_FIELDS = 100
N_STEPS = 200
SLACK = 1e-10
RANDOM_GRID = PeriodicGrid(64, TWO_PI, 2)


def log_scheme_for(tau):
    # Strict mode needs tau <= 1/(3a(theta_c - theta)); theta = 0.25 admits
    # tau <= 0.26, so the tau = 1 runs use the closer pair theta = 0.9.
    theta = 0.25 if tau <= 0.1 else 0.9
    return LogScheme(0.01, tau, theta, 1.0, a=STRICT_A_MIN, newton_tol=1e-12)


def random_fields(seed, bound):
    rng = np.random.default_rng(seed)
    fields = []
    for i in range(N_FIELDS):
        # Every tenth field touches the bound exactly; the rest are random below it.
        amp = bound if i % 10 == 0 else bound * rng.uniform(0.05, 1.0)
        fields.append(random_fourier_field(RANDOM_GRID, rng, amp, n_modes=int(rng.integers(2, 12))))
    return fields


@criterion("5", "max principle on 100 random fields x 200 steps, tau in {0.01, 0.1, 1}")
def test_max_principle_random_fields(record_property):
    start = time.perf_counter()
    worst = {}
    violations = 0
    for tau in (0.01, 0.1, 1.0):
        for label, scheme, bound in (
            ("poly", PolyScheme(0.1, tau), 1.0),
            ("log", log_scheme_for(tau), None),
        ):
            limit = scheme.u_star if bound is None else bound
            for u in random_fields(int(tau * 1000) + len(label), limit):
                cap = max(limit, u.max_abs()) if label == "poly" else limit
                excess = -math.inf
                for _ in range(N_STEPS):
                    u = strang_step(u, scheme)
                    excess = max(excess, u.max_abs() - cap)
                violations += excess > SLACK
                worst[(label, tau)] = max(worst.get((label, tau), -math.inf), excess)
    elapsed = time.perf_counter() - start
    top = max(worst.values())
    record_property("detail", f"{violations} violations, worst excess {top:.1e}, {elapsed:.0f}s")
    assert violations == 0, worst
    assert elapsed < 180


@criterion("6", "modified energy nonincreasing per step on the same random fields")
def test_modified_energy_random_fields(record_property):
    violations = 0
    worst = -math.inf
    cases = [("poly", PolyScheme(0.1, tau), 1.0, tau) for tau in (0.01, 0.1, 1.0, 10.0)]
    cases += [("log", log_scheme_for(tau), None, tau) for tau in (0.01, 0.1, 1.0)]
    for label, scheme, bound, tau in cases:
        limit = scheme.u_star if bound is None else bound
        seed = int(tau * 1000) + len(label)
        for u in random_fields(seed, limit):
            e_prev = modified_energy(u, scheme)
            for _ in range(N_STEPS):
                u = strang_step(u, scheme)
                e = modified_energy(u, scheme)
                rise = (e - e_prev) / max(1.0, abs(e_prev))
                worst = max(worst, rise)
                violations += rise > SLACK
                e_prev = e
    record_property("detail", f"{violations} increases, worst relative change {worst:.1e}")
    assert violations == 0


# --- 7: energy gap -------------------------------------------------------------------


@criterion("7", "max |modified - standard energy| halves with tau (ratios in [1.7, 2.3])")
def test_energy_gap_scaling(record_property):
    grid = PeriodicGrid(128, TWO_PI, 2)
    gaps = []
    for tau in (0.04, 0.02, 0.01):
        scheme = PolyScheme(0.1, tau)
        u = ic_sine(grid)
        gap = 0.0
        for n in range(math.ceil(1 / tau) + 1):
            if n:
                u = strang_step(u, scheme)
            gap = max(gap, abs(modified_energy(u, scheme) - standard_energy(u, scheme)))
        gaps.append(gap)
    ratios = [gaps[0] / gaps[1], gaps[1] / gaps[2]]
    record_property("detail", f"ratios {fmt(ratios, '.3f')}")
    assert all(1.7 <= r <= 2.3 for r in ratios)


# --- 8: oracle equivalence ---------------------------------------------------------------


@criterion("8", "oracle equivalence: polynomial flow 1e-9, stage roots 1e-11, convex form 1e-13")
def test_polynomial_flow_matches_oracle(record_property):
    a = np.linspace(-1.5, 1.5, 61)
    err = 0.0
    for tau in (1e-3, 0.01, 0.1, 0.3, 0.5, 1.0):
        ref = ode_flow_oracle("polynomial", a, tau)
        err = max(err, float(np.max(np.abs(poly_nonlinear_flow(a, tau) - ref))))
    record_property("detail", f"flow vs oracle {err:.1e}")
    assert err <= 1e-9


def _sample_solvable(rng):
    # Below theta/theta_c ~ 0.2 the bound u* sits within a few ulps of 1 and
    # artanh is too steep there for any residual test to be meaningful.
    theta_c = 1.0
    theta = rng.uniform(0.2, 0.95)
    a = rng.uniform(0.5, 3.0)
    tau_max = 1.0 / ((3 * a - 1) * (theta_c - theta))
    tau = min(tau_max, 10.0) * rng.uniform(1e-3, 1.0)
    scheme = LogScheme(0.01, tau, theta, theta_c, a=a, mode="solvable")
    v = rng.uniform(-1.0, 1.0) * scheme.u_star
    return scheme, v


def _bisect_H(rhs, scheme):
    u = scheme.u_star
    return bisect(lambda x: float(H_map(x, scheme)) - rhs, -u, u, xtol=1e-15, rtol=1e-15, maxiter=200)


@criterion("8", "oracle equivalence: polynomial flow 1e-9, stage roots 1e-11, convex form 1e-13")
def test_stage_roots_match_bisection(record_property):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(1000):
        scheme, v = _sample_solvable(rng)
        u1 = newton_stage1(v, scheme)
        u2 = newton_stage2(v, u1, scheme)
        ref1 = _bisect_H(v, scheme)
        rhs2 = v + (1 - 2 * scheme.a) * scheme.tau * float(g_log(ref1, scheme.theta, scheme.theta_c))
        ref2 = _bisect_H(rhs2, scheme)
        worst = max(worst, abs(u1 - ref1), abs(u2 - ref2))
    record_property("detail", f"1000 stage pairs vs bisection {worst:.1e}")
    assert worst <= 1e-11


@criterion("8", "oracle equivalence: polynomial flow 1e-9, stage roots 1e-11, convex form 1e-13")
def test_convex_combination_identity(record_property):
    rng = np.random.default_rng(88)
    worst = 0.0
    for _ in range(200):
        scheme, _ = _sample_solvable(rng)
        v = rng.uniform(-1.0, 1.0, 64) * scheme.u_star
        _, u1, u2 = prrk_stages(v, scheme)
        a = scheme.a
        convex = u2 / (2 * a) + (3 / (2 * a) - 1 / (2 * a**2)) * u1 + (1 - 2 / a + 1 / (2 * a**2)) * v
        worst = max(worst, float(np.max(np.abs(prrk_flow(v, scheme) - convex))))
    record_property("detail", f"convex form {worst:.1e}")
    assert worst <= 1e-13


# --- 9: tabulated modified potential ------------------------------------------------------


TABLE_CASES = [(0.01, 0.25, STRICT_A_MIN), (0.1, 0.25, STRICT_A_MIN), (1.0, 0.9, STRICT_A_MIN)]


@criterion("9", "Fbar: finite differences to 1e-7, Fbar(0)=0, even to 1e-12, Fbar'' <= 2/tau + 1e-6")
@pytest.mark.parametrize("tau,theta,a", TABLE_CASES, ids=["tau0.01", "tau0.1", "tau1"])
def test_modified_potential_table(tau, theta, a, record_property):
    scheme = LogScheme(0.01, tau, theta, 1.0, a=a)
    table = scheme.potential_table
    us = scheme.u_star

    x = np.linspace(-0.9 * us, 0.9 * us, 2001)
    d = 1e-6
    fd = (table(x + d) - table(x - d)) / (2 * d)
    _, u1, u2 = prrk_stages(x, scheme)
    expected = -0.5 * (g_log(u1, theta, 1.0) + g_log(u2, theta, 1.0))
    fd_err = float(np.max(np.abs(fd - expected)))

    even_err = float(np.max(np.abs(table(x) - table(-x))))

    dd = 1e-4
    y = np.linspace(-us + dd, us - dd, 4001)
    second = (table(y + dd) - 2 * table(y) + table(y - dd)) / dd**2
    record_property(
        "detail", f"tau={tau}: fd {fd_err:.1e}, max Fbar'' {second.max():.3g} <= {2 / tau:g}"
    )
    assert fd_err <= 1e-7
    assert table(0.0) == 0.0
    assert even_err <= 1e-12
    assert float(second.max()) <= 2 / tau + 1e-6


# --- 10: spectral invariants ------------------------------------------------------------------


def _spectral_fields(grid, rng):
    for i in range(50):
        if i % 2:
            yield Field(grid, rng.uniform(-1.0, 1.0, grid.shape))
        else:
            yield random_fourier_field(grid, rng, rng.uniform(0.1, 2.0), n_modes=min(8, grid.n // 2))


@criterion("10", "semigroup, mean, Parseval and max-norm invariants on 50 fields, N in {16, 64, 256}")
@pytest.mark.parametrize("n", [16, 64, 256])
@pytest.mark.parametrize("dim", [1, 2])
def test_spectral_invariants(n, dim, record_property):
    rng = np.random.default_rng(1000 * n + dim)
    grid = PeriodicGrid(n, TWO_PI, dim)
    worst = {"semigroup": 0.0, "mean": 0.0, "parseval": 0.0, "maxnorm": 0.0}
    for u in _spectral_fields(grid, rng):
        c1, c2 = 10 ** rng.uniform(-6, 0, size=2)
        scale = u.max_abs()
        two = apply_heat_propagator(apply_heat_propagator(u, c1), c2)
        once = apply_heat_propagator(u, c1 + c2)
        worst["semigroup"] = max(worst["semigroup"], np.max(np.abs(two.values - once.values)) / scale)

        m0 = u.mean()
        m1 = apply_heat_propagator(u, c1).mean()
        worst["mean"] = max(worst["mean"], abs(m1 - m0) / abs(m0))

        uh = dft(u.values)
        spectral = grid.cell_volume * u.values.size * float(np.sum(np.abs(uh) ** 2))
        direct = inner(u, u)
        worst["parseval"] = max(worst["parseval"], abs(spectral - direct) / direct)

        for c in (c1, c2, 1.0):
            out = apply_heat_propagator(u, c).max_abs()
            worst["maxnorm"] = max(worst["maxnorm"], (out - scale) / scale)
    record_property(
        "detail", f"N={n} d={dim}: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    )
    assert worst["semigroup"] <= 1e-12
    assert worst["mean"] <= 1e-12
    assert worst["parseval"] <= 1e-12
    assert worst["maxnorm"] <= 1e-10


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
