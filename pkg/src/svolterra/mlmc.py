"""Multilevel Monte Carlo over Euler levels ``n_l = M**l``.

Two drivers: the adaptive recipe (levels added until the bias test passes,
sample sizes from the cost-optimal allocation for an MSE target ``eps``) and
the fixed-budget recipe (given ``L`` and total sample count, allocate
proportionally to ``sqrt(V_l)``).
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NoConvergence
from .estimators import Accumulator, chunk_size_for, map_chunks
from .euler import euler_batch
from .grid import uniform_grid
from .models import SveModel
from .noise import NoiseConfig, aggregate_to_coarse, sample_increments_batch

STREAM_MLMC = 1000


@dataclass
class MlmcConfig:
    M: int = 4
    epsilon: float | None = None
    alpha_circ: float | None = None
    L: int | None = None
    N_total: int | None = None
    N_initial: int = 100
    seed: int = 0
    max_level: int = 10
    workers: int = 1

    def __post_init__(self):
        if self.M < 2:
            raise InvalidArgument("refinement factor M must be >= 2")
        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidArgument("epsilon must be positive")
        if self.alpha_circ is not None and not 0 < self.alpha_circ <= 1:
            raise InvalidArgument("alpha_circ must lie in (0, 1]")
        if self.N_initial < 2:
            raise InvalidArgument("N_initial must be >= 2")

    @property
    def adaptive(self) -> bool:
        return self.epsilon is not None


@dataclass
class LevelStat:
    level: int
    h: float
    N: int
    Y: float
    V: float
    invalid: int = 0


@dataclass
class MlmcResult:
    levels: list
    estimate: float
    stat_error: float
    cost_units: int
    M: int
    converged: bool = True
    wall_time: float = 0.0
    diverged_count: int = 0
    trace: list = field(default_factory=list)

    @property
    def L(self) -> int:
        return len(self.levels) - 1

    @property
    def N(self) -> list:
        return [lv.N for lv in self.levels]

    @property
    def Y(self) -> list:
        return [lv.Y for lv in self.levels]

    @property
    def V(self) -> list:
        return [lv.V for lv in self.levels]

    def to_csv(self) -> str:
        """Per-level trace: level, h, N, Y, V, cumulative cost."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "h", "N", "Y", "V", "cumulative_cost"])
        cum = 0
        for lv in self.levels:
            cum += lv.N * self.M ** (2 * lv.level)
            w.writerow([lv.level, repr(lv.h), lv.N, repr(lv.Y), repr(lv.V), cum])
        return buf.getvalue()


def level_samples(model: SveModel, payoff, M: int, level: int, T: float, seed: int, path_indices,
                  stream_id: int | None = None) -> np.ndarray:
    """``f(fine) - f(coarse)`` (or ``f(fine)`` at level 0) for the given paths.

    The coarse increments are exact sums of the fine ones. Diverged pairs give NaN.
    """
    stream = STREAM_MLMC + level if stream_id is None else stream_id
    cfg = NoiseConfig(model.m, model.correlation, seed, stream)
    fine_grid = uniform_grid(T, M ** level)
    inc = sample_increments_batch(fine_grid, cfg, path_indices)
    fine = euler_batch(model, fine_grid, inc.dW)
    with np.errstate(all="ignore"):
        pf = payoff(fine.values, fine_grid)
        bad = fine.diverged
        if level > 0:
            cinc = aggregate_to_coarse(inc, M)
            coarse = euler_batch(model, cinc.grid, cinc.dW)
            pf = pf - payoff(coarse.values, cinc.grid)
            bad = bad | coarse.diverged
    return np.where(bad, np.nan, pf)


class _Level:
    """Sample accumulator for one level; new samples continue the path index."""

    def __init__(self, model, payoff, M, level, T, seed, workers):
        self.model, self.payoff, self.M, self.level = model, payoff, M, level
        self.T, self.seed, self.workers = T, seed, workers
        self.acc = Accumulator()
        self.drawn = 0

    def draw(self, k: int):
        if k <= 0:
            return
        n = self.M ** self.level
        size = chunk_size_for(n, self.model.d, "euler") // 2 + 1
        chunks = [np.arange(a, min(a + size, self.drawn + k)) for a in range(self.drawn, self.drawn + k, size)]
        parts = map_chunks(
            lambda idx: Accumulator.of(
                level_samples(self.model, self.payoff, self.M, self.level, self.T, self.seed, idx)
            ),
            chunks,
            self.workers,
        )
        for p in parts:
            self.acc = self.acc.merge(p)
        self.drawn += k

    def stat(self) -> LevelStat:
        return LevelStat(self.level, self.T / self.M ** self.level, self.drawn, self.acc.mean,
                         self.acc.variance, self.acc.invalid)


def level_pair_estimate(model: SveModel, payoff, M: int, level: int, N: int, seed: int = 0,
                        stream_id: int | None = None, T: float | None = None):
    """Mean, unbiased variance and samples of ``P_l - P_{l-1}`` over ``N`` pairs."""
    if level < 0:
        raise InvalidArgument("level must be >= 0")
    T = model.T if T is None else T
    x = level_samples(model, payoff, M, level, T, seed, np.arange(N), stream_id)
    acc = Accumulator.of(x)
    return acc.mean, acc.variance, x


def optimal_allocation(V, h, eps) -> np.ndarray:
    """Real-valued ``N_l = 2 eps^-2 sqrt(V_l h_l^2) sum_m sqrt(V_m / h_m^2)``,
    the minimiser of ``sum N_l / h_l^2`` under ``sum V_l / N_l <= eps^2 / 2``."""
    V = np.asarray(V, dtype=float)
    h = np.asarray(h, dtype=float)
    return 2.0 * eps ** -2 * np.sqrt(V * h * h) * np.sum(np.sqrt(V / (h * h)))


def default_alpha_circ(model: SveModel, payoff) -> float:
    if getattr(payoff, "path_dependent", False):
        raise InvalidArgument("path-dependent payoffs need an explicit alpha_circ below min(alpha, 1)")
    return model.rate_parameters().euler_rate


def _result(levels, M, converged, t0):
    stats = [lv.stat() for lv in levels]
    est = float(sum(s.Y for s in stats))
    err = float(math.sqrt(sum(s.V / s.N for s in stats)))
    cost = int(sum(s.N * M ** (2 * s.level) for s in stats))
    return MlmcResult(stats, est, err, cost, M, converged, time.perf_counter() - t0,
                      sum(s.invalid for s in stats))


def mlmc_adaptive(model: SveModel, payoff, config: MlmcConfig, T: float | None = None) -> MlmcResult:
    if not config.adaptive:
        raise InvalidArgument("adaptive MLMC needs epsilon")
    T = model.T if T is None else T
    M, eps = config.M, config.epsilon
    a = config.alpha_circ if config.alpha_circ is not None else default_alpha_circ(model, payoff)
    t0 = time.perf_counter()
    levels: list[_Level] = []
    L = 0
    while True:
        lv = _Level(model, payoff, M, L, T, config.seed, config.workers)
        lv.draw(config.N_initial)
        levels.append(lv)
        stats = [x.stat() for x in levels]
        target = np.ceil(optimal_allocation([s.V for s in stats], [s.h for s in stats], eps))
        for x, nt in zip(levels, target):
            x.draw(int(max(nt, 2)) - x.drawn)
        stats = [x.stat() for x in levels]
        if L >= 2:
            bias = max(M ** (-a) * abs(stats[L - 1].Y), abs(stats[L].Y))
            if bias < (M ** a - 1) * eps / math.sqrt(2):
                return _result(levels, M, True, t0)
        if L >= config.max_level:
            raise NoConvergence(f"no convergence up to level {L}", partial=_result(levels, M, False, t0))
        L += 1


def largest_remainder(weights, total: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    raw = w / w.sum() * total
    base = np.floor(raw).astype(int)
    short = total - base.sum()
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return base


def budget_allocation(V, N_total: int, floor) -> np.ndarray:
    """Integers summing to ``N_total``, proportional to ``sqrt(V)`` where above
    the per-level floor and pinned to the floor elsewhere."""
    V = np.asarray(V, dtype=float)
    floor = np.broadcast_to(np.asarray(floor, dtype=int), V.shape).copy()
    sq = np.sqrt(np.maximum(V, 0.0))
    if sq.sum() == 0:
        sq = np.ones_like(sq)
    free = np.ones(V.size, dtype=bool)
    while True:
        budget = N_total - floor[~free].sum()
        w = np.where(free, sq, 0.0)
        if w.sum() == 0:
            w = free.astype(float)
        alloc = np.where(free, largest_remainder(w, budget), floor)
        low = free & (alloc < floor)
        if not low.any():
            return alloc
        free &= ~low


def mlmc_fixed_budget(model: SveModel, payoff, config: MlmcConfig, T: float | None = None) -> MlmcResult:
    if config.L is None or config.N_total is None:
        raise InvalidArgument("fixed-budget MLMC needs L and N_total")
    L, Ntot = config.L, config.N_total
    if Ntot < (L + 1) * config.N_initial:
        raise InvalidArgument(f"budget {Ntot} below the pilot size {(L + 1) * config.N_initial}")
    T = model.T if T is None else T
    t0 = time.perf_counter()
    levels = [_Level(model, payoff, config.M, l, T, config.seed, config.workers) for l in range(L + 1)]
    for lv in levels:
        lv.draw(config.N_initial)
    V = [lv.stat().V for lv in levels]
    alloc = budget_allocation(V, Ntot, max(2, config.N_initial))
    for lv, nt in zip(levels, alloc):
        lv.draw(int(nt) - lv.drawn)
    return _result(levels, config.M, True, t0)
