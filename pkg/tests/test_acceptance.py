"""Acceptance criteria 1-10. Each test prints one PASS/FAIL line (collected in
the terminal summary) and asserts at the stated tolerance."""

import itertools
import math
import time

import numpy as np
import pytest

from svolterra.estimators import AsianCall, Moment, TerminalCall, mc_estimate
from svolterra.euler import euler_batch
from svolterra.grid import TimeGrid, uniform_grid
from svolterra.kernels import PowerKernel
from svolterra.mlmc import MlmcConfig, mlmc_adaptive, optimal_allocation
from svolterra.models import RoughHestonParams, geometric_brownian, mech_langevin, rough_heston, volterra_ou
from svolterra.noise import NoiseConfig, aggregate_to_coarse, cell_factors, sample_increments_batch
from svolterra.rates import complexity_experiment, strong_rate_experiment
from svolterra.reference import (
    black_scholes_call,
    black_scholes_charfn,
    fourier_call,
    heston_call_fourier,
    mittag_leffler_E,
    mittag_leffler_R,
    ou_call_reference,
)

OU_REF = {0.1: 0.3978, 0.25: 0.397202, 0.75: 0.373444}


def test_criterion_01_ou_references(report):
    t0 = time.perf_counter()
    got = {H: ou_call_reference(H=H) for H in OU_REF}
    elapsed = time.perf_counter() - t0
    tol = {0.1: 1e-4, 0.25: 1e-5, 0.75: 1e-5}
    ok = all(abs(got[H] - OU_REF[H]) <= tol[H] for H in OU_REF) and elapsed < 1.0
    detail = ", ".join(f"H={H}: {got[H]:.7f}" for H in OU_REF) + f" ({elapsed:.3f} s)"
    assert report(1, "OU reference prices", ok, detail)


def test_criterion_02_euler_weak(report):
    m = volterra_ou(H=0.75)
    est = {n: mc_estimate(m, "euler", uniform_grid(1.0, n), TerminalCall(), 10000, seed=0) for n in (8, 20, 40, 80)}
    e80 = est[80]
    ok1 = abs(e80.mean - 0.376531) <= 4 * max(e80.stat_error, 0.0015)
    bias = [abs(est[n].mean - OU_REF[0.75]) for n in (8, 20, 40, 80)]
    se = [est[n].stat_error for n in (8, 20, 40, 80)]
    ok2 = all(bias[i + 1] <= bias[i] + 2 * math.hypot(se[i], se[i + 1]) for i in range(3))
    detail = f"n=80 mean {e80.mean:.6f} +- {e80.stat_error:.6f}; biases " + ", ".join(f"{b:.4f}" for b in bias)
    assert report(2, "Euler weak convergence, OU H=0.75", ok1 and ok2, detail)


def test_criterion_03_milstein(report):
    m = volterra_ou(H=0.1)
    ref = OU_REF[0.1]
    m40 = mc_estimate(m, "milstein", uniform_grid(1.0, 40), TerminalCall(), 10000, seed=0)
    m8 = mc_estimate(m, "milstein", uniform_grid(1.0, 8), TerminalCall(), 10000, seed=0)
    e8 = mc_estimate(m, "euler", uniform_grid(1.0, 8), TerminalCall(), 10000, seed=0)
    ok1 = abs(m40.mean - ref) <= 0.008
    bm, be = abs(m8.mean - ref), abs(e8.mean - ref)
    ok2 = bm + 3 * math.hypot(m8.stat_error, e8.stat_error) < be
    detail = f"n=40 {m40.mean:.6f}; n=8 bias Milstein {bm:.4f} vs Euler {be:.4f}"
    assert report(3, "Milstein, OU H=0.1", ok1 and ok2, detail)


def test_criterion_04_mlmc_adaptive(report):
    eps = 0.005
    t0 = time.perf_counter()
    r = mlmc_adaptive(volterra_ou(H=0.75), TerminalCall(), MlmcConfig(M=4, epsilon=eps, seed=0))
    elapsed = time.perf_counter() - t0
    ok = (abs(r.estimate - OU_REF[0.75]) <= eps * math.sqrt(2)
          and r.stat_error <= 1.25 * eps / math.sqrt(2)
          and all(b < a for a, b in zip(r.V, r.V[1:]))
          and elapsed < 60)
    detail = f"estimate {r.estimate:.6f}, stat_error {r.stat_error:.6f}, L={r.L}, V={[f'{v:.2e}' for v in r.V]} ({elapsed:.1f} s)"
    assert report(4, "adaptive MLMC, OU H=0.75, eps=0.005", ok, detail)


def test_criterion_05_heston_reference(report):
    t0 = time.perf_counter()
    price = heston_call_fourier(RoughHestonParams(), 1.0, 1.0)
    bs = fourier_call(black_scholes_charfn(0.2, 1.0), 1.0, 1.0)
    bs_exact = black_scholes_call(1.0, 1.0, 0.2, 1.0)
    elapsed = time.perf_counter() - t0
    ok = abs(price - 0.056832) <= 5e-4 and abs(bs - bs_exact) <= 1e-6 and elapsed < 30
    detail = f"rough Heston {price:.6f}, Black-Scholes error {abs(bs - bs_exact):.1e} ({elapsed:.1f} s)"
    assert report(5, "rough Heston Fourier reference", ok, detail)


def test_criterion_06_heston_euler(report):
    m = rough_heston()
    call, asian = mc_estimate(m, "euler", uniform_grid(1.0, 160), [TerminalCall(1.0, 0), AsianCall(1.0, 0)], 100000, seed=0)
    ok = (abs(call.mean - 0.058051) <= 0.002 and abs(asian.mean - 0.032626) <= 0.002
          and call.diverged_count == 0 and asian.diverged_count == 0)
    detail = f"call {call.mean:.6f} +- {call.stat_error:.6f}, Asian {asian.mean:.6f} +- {asian.stat_error:.6f}"
    assert report(6, "rough Heston Euler n=160", ok, detail)


def test_criterion_07_mechanics(report):
    res = {}
    for H in (0.3, 0.7):
        m = mech_langevin(H=H)
        res[H] = mc_estimate(m, "euler", uniform_grid(m.T, 1000), Moment(1, 0), 10000, seed=0)
    ok = (abs(res[0.3].mean - 0.790071) <= 0.02 and abs(res[0.7].mean + 1.311788) <= 0.02
          and res[0.3].diverged_count == 0 and res[0.7].diverged_count == 0)
    detail = f"H=0.3 {res[0.3].mean:.6f}, H=0.7 {res[0.7].mean:.6f}"
    assert report(7, "mechanics model first moment", ok, detail)


def test_criterion_08_strong_rates(report):
    n_list = [8, 16, 32, 64, 128]
    slopes = {}
    for H in (0.25, 0.75):
        slopes[f"OU H={H}"] = (strong_rate_experiment(volterra_ou(H=H), "euler", n_list, 8, 2000, seed=0).slope, H)
    gbm = geometric_brownian()
    slopes["GBM Euler"] = (strong_rate_experiment(gbm, "euler", n_list, 8, 2000, seed=0).slope, 0.5)
    slopes["GBM Milstein"] = (strong_rate_experiment(gbm, "milstein", n_list, 8, 2000, seed=0).slope, 1.0)
    ok = all(abs(s - target) <= 0.15 for s, target in slopes.values())
    detail = ", ".join(f"{k} {s:.3f} (target {t})" for k, (s, t) in slopes.items())
    assert report(8, "strong convergence slopes", ok, detail)


def test_criterion_09_complexity(report):
    rep = complexity_experiment(volterra_ou(H=0.75), TerminalCall(), [0.02, 0.01, 0.005], seed=0)
    sm, ss = rep.fit_mlmc.slope, rep.fit_single.slope
    ok = abs(sm) <= abs(ss) - 1.0
    detail = f"MLMC slope {sm:.3f}, single-level slope {ss:.3f}, costs " + \
        "; ".join(f"{r.epsilon}: {r.mlmc_cost}/{r.single_cost}" for r in rep.rows)
    assert report(9, "MLMC vs single-level complexity", ok, detail)


def test_criterion_10_structural(report):
    checks = {}

    # coupling: coarse increments are the exact cell sums, and coarse Euler reproduces them
    g = uniform_grid(1.0, 64)
    fine = sample_increments_batch(g, NoiseConfig(seed=1, stream_id=1003), np.arange(50))
    coarse = aggregate_to_coarse(fine, 4)
    sums = fine.dW[:, 0::4, :].copy()
    for r in range(1, 4):
        sums = sums + fine.dW[:, r::4, :]
    checks["coupling"] = bool(np.array_equal(coarse.dW, sums))

    # covariance factors: PSD and small jitter
    ok_cov = True
    for H in (0.05, 0.1, 0.25, 0.75):
        for grid in (uniform_grid(1.0, 40), TimeGrid(np.sort(np.r_[0.0, np.random.default_rng(1).uniform(0, 1, 15), 1.0]))):
            cf = cell_factors(grid, PowerKernel.fractional(H))
            ok_cov &= all(j <= 1e-10 * t and e >= -1e-10 * t for j, t, e in zip(cf.jitter, cf.trace, cf.min_eig))
    checks["covariance"] = ok_cov

    # allocation formula against exhaustive integer search on a 3-level toy
    V = np.array([0.05, 0.004, 0.0003])
    h = np.array([1.0, 0.25, 0.0625])
    eps = 0.02
    Nreal = optimal_allocation(V, h, eps)
    best = min(float(np.sum(np.array(N) / h ** 2))
               for N in itertools.product(*[range(1, int(2 * x) + 3) for x in Nreal])
               if np.sum(V / np.array(N)) <= eps ** 2 / 2)
    checks["allocation"] = float(np.sum(Nreal / h ** 2)) <= best + 1e-9 and \
        float(np.sum(np.ceil(Nreal) / h ** 2)) <= best + float(np.sum(1 / h ** 2))

    # Mittag-Leffler identity
    s = np.linspace(0.01, 3.0, 50)
    checks["R=-b1 E"] = all(np.allclose(mittag_leffler_R(b1, H, s) + b1 * mittag_leffler_E(b1, H, s), 0.0, atol=1e-13)
                            for b1 in (-0.5, 0.7) for H in (0.1, 0.5, 0.9))

    # seed / worker reproducibility
    m = volterra_ou(H=0.25)
    a = mc_estimate(m, "euler", uniform_grid(1.0, 20), TerminalCall(), 20000, seed=9, workers=1)
    b = mc_estimate(m, "euler", uniform_grid(1.0, 20), TerminalCall(), 20000, seed=9, workers=4)
    c = mlmc_adaptive(m, TerminalCall(), MlmcConfig(epsilon=0.02, seed=9, workers=1))
    d = mlmc_adaptive(m, TerminalCall(), MlmcConfig(epsilon=0.02, seed=9, workers=4))
    checks["reproducibility"] = a.mean == b.mean and c.estimate == d.estimate and c.N == d.N

    ok = all(checks.values())
    assert report(10, "structural invariants", ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))
