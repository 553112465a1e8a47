import itertools
import math

import numpy as np
import pytest

from svolterra.errors import InvalidArgument, NoConvergence
from svolterra.estimators import AsianCall, Moment, TerminalCall, mc_estimate
from svolterra.euler import euler_batch
from svolterra.grid import uniform_grid
from svolterra.mlmc import (
    MlmcConfig,
    budget_allocation,
    default_alpha_circ,
    largest_remainder,
    level_pair_estimate,
    mlmc_adaptive,
    mlmc_fixed_budget,
    optimal_allocation,
)
from svolterra.models import scalar_sde, volterra_ou
from svolterra.noise import NoiseConfig, aggregate_to_coarse, sample_increments_batch


def _deterministic():
    return volterra_ou(sigma0=0.0, H=0.75)


def test_config_validation():
    for kw in (dict(M=1), dict(epsilon=0.0), dict(alpha_circ=1.5), dict(N_initial=1)):
        with pytest.raises(InvalidArgument):
            MlmcConfig(**kw)


def test_level_zero_is_one_step_monte_carlo():
    m = volterra_ou(H=0.75)
    mean, var, x = level_pair_estimate(m, TerminalCall(), 4, 0, 5000, seed=3, stream_id=0)
    est = mc_estimate(m, "euler", uniform_grid(1.0, 1), TerminalCall(), 5000, seed=3)
    assert mean == pytest.approx(est.mean, rel=1e-12) and x.shape == (5000,)


def test_deterministic_levels_have_zero_variance():
    m = _deterministic()
    for level in range(4):
        _, var, _ = level_pair_estimate(m, TerminalCall(), 4, level, 50)
        assert var == pytest.approx(0.0, abs=1e-28)


def test_level_variance_decays():
    m = volterra_ou(H=0.75)
    _, v1, x1 = level_pair_estimate(m, TerminalCall(), 4, 1, 10000, seed=0)
    _, v2, x2 = level_pair_estimate(m, TerminalCall(), 4, 2, 10000, seed=0)
    se = math.hypot(np.std((x1 - x1.mean()) ** 2), np.std((x2 - x2.mean()) ** 2)) / math.sqrt(10000)
    assert v2 + 3 * se < v1


def test_coupling_uses_exact_cell_sums():
    # random walk: fine and coarse terminals are explicit sums of the same increments
    rw = scalar_sde(0.0, lambda t, x: 0 * x, lambda t, x: 1 + 0 * x)
    g = uniform_grid(1.0, 16)
    fine = sample_increments_batch(g, NoiseConfig(seed=1, stream_id=1002), np.arange(10))
    coarse = aggregate_to_coarse(fine, 4)
    xf = euler_batch(rw, g, fine.dW).values[:, -1, 0]
    xc = euler_batch(rw, coarse.grid, coarse.dW).values[:, -1, 0]
    for i in range(10):
        s = 0.0
        for k in range(16):
            s = s + fine.dW[i, k, 0]
        assert xf[i] == s
        c = 0.0
        for j in range(4):
            blk = fine.dW[i, 4 * j, 0]
            for r in range(1, 4):
                blk = blk + fine.dW[i, 4 * j + r, 0]
            c = c + blk
        assert xc[i] == c
    mean, var, _ = level_pair_estimate(rw, Moment(1), 4, 2, 10, seed=1)
    assert abs(mean) < 1e-14 and var < 1e-28


def test_allocation_formula_beats_exhaustive_search():
    V = np.array([0.04, 0.003, 0.0004])
    h = np.array([1.0, 0.25, 0.0625])
    eps = 0.02
    real = optimal_allocation(V, h, eps)
    cost = lambda N: float(np.sum(np.asarray(N) / h ** 2))
    assert np.sum(V / real) == pytest.approx(eps ** 2 / 2)
    best = None
    grids = [range(max(1, int(r * 0.5)), int(r * 1.6) + 2) for r in real]
    for N in itertools.product(*grids):
        if np.sum(V / np.array(N)) <= eps ** 2 / 2:
            c = cost(N)
            best = c if best is None or c < best else best
    rounded = np.ceil(real)
    assert np.sum(V / rounded) <= eps ** 2 / 2
    assert cost(real) <= best + 1e-9
    assert cost(rounded) <= best + np.sum(1 / h ** 2)


def test_largest_remainder():
    alloc = largest_remainder([1.0, 1.0, 1.0], 10)
    assert alloc.sum() == 10 and sorted(alloc) == [3, 3, 4]
    assert list(budget_allocation([1.0, 1.0, 1.0, 1.0], 400, 2)) == [100] * 4
    a = budget_allocation([1.0, 1e-12, 1e-12], 1000, 100)
    assert a.sum() == 1000 and a.min() >= 100


def test_fixed_budget():
    m = volterra_ou(H=0.75)
    r = mlmc_fixed_budget(m, TerminalCall(), MlmcConfig(L=2, N_total=3000, seed=1))
    assert sum(r.N) == 3000 and r.L == 2
    assert r.estimate == pytest.approx(sum(r.Y))
    assert r.cost_units == sum(n * 16 ** l for l, n in enumerate(r.N))
    r0 = mlmc_fixed_budget(m, TerminalCall(), MlmcConfig(L=0, N_total=500, seed=1))
    assert r0.N == [500]
    with pytest.raises(InvalidArgument):
        mlmc_fixed_budget(m, TerminalCall(), MlmcConfig(L=3, N_total=300))


def test_adaptive_large_eps_forces_two_levels():
    r = mlmc_adaptive(volterra_ou(H=0.75), TerminalCall(), MlmcConfig(epsilon=10.0))
    assert r.L == 2 and r.converged and r.N == [100, 100, 100]


def test_adaptive_deterministic_stays_at_minimum():
    r = mlmc_adaptive(_deterministic(), TerminalCall(), MlmcConfig(epsilon=1e-3))
    assert all(n == 100 for n in r.N)
    assert all(v == pytest.approx(0.0, abs=1e-25) for v in r.V)


def test_adaptive_no_convergence_partial():
    with pytest.raises(NoConvergence) as info:
        mlmc_adaptive(_deterministic(), TerminalCall(), MlmcConfig(epsilon=1e-9, max_level=3))
    assert info.value.partial is not None and info.value.partial.L == 3
    assert not info.value.partial.converged


def test_adaptive_worker_invariance():
    m = volterra_ou(H=0.75)
    a = mlmc_adaptive(m, TerminalCall(), MlmcConfig(epsilon=0.01, seed=2, workers=1))
    b = mlmc_adaptive(m, TerminalCall(), MlmcConfig(epsilon=0.01, seed=2, workers=3))
    assert a.estimate == b.estimate and a.N == b.N


def test_alpha_circ_default():
    assert default_alpha_circ(volterra_ou(H=0.25), TerminalCall()) == pytest.approx(0.25)
    with pytest.raises(InvalidArgument):
        default_alpha_circ(volterra_ou(H=0.25), AsianCall())


def test_telescoping_unbiased():
    m = volterra_ou(H=0.75)
    diffs, var = [], 0.0
    for seed in range(30):
        r = mlmc_fixed_budget(m, TerminalCall(), MlmcConfig(L=2, N_total=2000, seed=seed))
        s = mc_estimate(m, "euler", uniform_grid(1.0, 16), TerminalCall(), 2000, seed=seed)
        diffs.append(r.estimate - s.mean)
        var += r.stat_error ** 2 + s.stat_error ** 2
    assert abs(np.mean(diffs)) <= 3 * math.sqrt(var) / 30


def test_trace_csv():
    r = mlmc_fixed_budget(volterra_ou(H=0.75), TerminalCall(), MlmcConfig(L=1, N_total=400))
    lines = r.to_csv().strip().splitlines()
    assert lines[0] == "level,h,N,Y,V,cumulative_cost" and len(lines) == 3
    assert int(lines[-1].split(",")[-1]) == r.cost_units
