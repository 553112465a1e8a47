"""Payoffs and single-level Monte Carlo with statistical error."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .euler import SchemePath, euler_batch
from .grid import TimeGrid
from .milstein import milstein_case, milstein_constant_k2_batch, milstein_state_free_batch
from .models import SveModel
from .noise import NoiseConfig, sample_increments_batch, sample_kernel_cell_integrals_batch


# -- payoffs ---------------------------------------------------------------
# ``component`` is a 0-based state index.


@dataclass(frozen=True)
class TerminalCall:
    strike: float = 1.0
    component: int = 0
    path_dependent = False

    def __call__(self, values: np.ndarray, grid: TimeGrid) -> np.ndarray:
        return np.maximum(values[..., -1, self.component] - self.strike, 0.0)


@dataclass(frozen=True)
class AsianCall:
    """Call on the right-endpoint Riemann average ``(T/n) sum_{k=1}^n X_{t_k}``
    (uniform grids); on other grids the cell widths replace ``T/n``."""

    strike: float = 1.0
    component: int = 0
    path_dependent = True

    def __call__(self, values: np.ndarray, grid: TimeGrid) -> np.ndarray:
        x = values[..., 1:, self.component]
        if grid.uniform:
            avg = (grid.T / grid.n) * np.sum(x, axis=-1)
        else:
            avg = x @ grid.dt
        return np.maximum(avg - self.strike, 0.0)


@dataclass(frozen=True)
class Moment:
    order: int = 1
    component: int = 0
    path_dependent = False

    def __post_init__(self):
        if self.order < 1:
            raise InvalidArgument("moment order must be >= 1")

    def __call__(self, values: np.ndarray, grid: TimeGrid) -> np.ndarray:
        return values[..., -1, self.component] ** self.order


def _check_component(payoff, d):
    if not 0 <= payoff.component < d:
        raise InvalidArgument(f"payoff component {payoff.component} outside 0..{d - 1}")


def evaluate_payoff(payoff, path: SchemePath) -> float:
    """Payoff of a single path; NaN marks a diverged path."""
    _check_component(payoff, path.values.shape[-1])
    if np.any(path.diverged) or not np.all(np.isfinite(path.values)):
        return float("nan")
    return float(payoff(path.values, path.grid))


# -- running moments -------------------------------------------------------


@dataclass
class Accumulator:
    """Count / mean / M2 partials; ``merge`` is associative (Chan et al.)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    invalid: int = 0

    @classmethod
    def of(cls, x: np.ndarray) -> "Accumulator":
        x = np.asarray(x, dtype=float)
        ok = np.isfinite(x)
        y = x[ok]
        if y.size == 0:
            return cls(0, 0.0, 0.0, int((~ok).sum()))
        mu = float(y.mean())
        return cls(int(y.size), mu, float(np.sum((y - mu) ** 2)), int((~ok).sum()))

    def merge(self, other: "Accumulator") -> "Accumulator":
        n = self.count + other.count
        if n == 0:
            return Accumulator(0, 0.0, 0.0, self.invalid + other.invalid)
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return Accumulator(n, mean, m2, self.invalid + other.invalid)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def stat_error(self) -> float:
        return float(np.sqrt(self.variance / self.count)) if self.count > 0 else float("nan")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stat_error: float
    N: int
    diverged_count: int
    wall_time: float
    cost_units: int
    variance: float = 0.0


# -- path simulation -------------------------------------------------------

STREAM_MC = 0


def chunk_size_for(n: int, d: int, scheme: str) -> int:
    """Paths per batch; depends only on the problem size, never on workers."""
    per_path = (n + 1) * n if scheme == "milstein_state_free" else (n + 1) * (3 * d + 2)
    return int(max(8, min(20000, 2.5e7 // per_path)))


def resolve_scheme(model: SveModel, scheme: str) -> str:
    if scheme == "euler":
        return "euler"
    if scheme in ("milstein", "milstein-auto", "milstein_auto"):
        return "milstein_" + milstein_case(model)
    raise InvalidArgument(f"unknown scheme {scheme!r}")


def simulate_paths(model: SveModel, scheme: str, grid: TimeGrid, config: NoiseConfig, path_indices) -> SchemePath:
    """Batch of scheme paths for the given path indices (resolved scheme name)."""
    if scheme == "euler":
        inc = sample_increments_batch(grid, config, path_indices)
        return euler_batch(model, grid, inc.dW)
    if scheme == "milstein_state_free":
        fam = sample_kernel_cell_integrals_batch(grid, model.diffusion_kernels[0], config, path_indices)
        return milstein_state_free_batch(model, grid, fam.Z)[0]
    if scheme == "milstein_constant_k2":
        inc = sample_increments_batch(grid, config, path_indices)
        return milstein_constant_k2_batch(model, grid, inc.dW)[0]
    raise InvalidArgument(f"unknown scheme {scheme!r}")


def map_chunks(fn, chunks, workers: int = 1):
    """``[fn(c) for c in chunks]`` with results in chunk order."""
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, chunks))


def mc_estimate(
    model: SveModel,
    scheme: str,
    grid: TimeGrid,
    payoff,
    N: int,
    seed: int = 0,
    workers: int = 1,
    stream_id: int = STREAM_MC,
):
    """Single-level Monte Carlo over ``N`` independent paths.

    ``payoff`` may be one payoff or a sequence of payoffs evaluated on the same
    paths, in which case a list of estimates is returned.
    """
    if N < 2:
        raise InvalidArgument("need at least two paths")
    payoffs: Sequence = payoff if isinstance(payoff, (list, tuple)) else [payoff]
    for pf in payoffs:
        _check_component(pf, model.d)
    resolved = resolve_scheme(model, scheme)
    config = NoiseConfig(model.m, model.correlation, seed, stream_id)
    size = chunk_size_for(grid.n, model.d, resolved)
    chunks = [np.arange(a, min(a + size, N)) for a in range(0, N, size)]

    def run(idx):
        path = simulate_paths(model, resolved, grid, config, idx)
        vals = path.values
        out = []
        for pf in payoffs:
            with np.errstate(all="ignore"):
                f = pf(vals, grid)
            f = np.where(path.diverged, np.nan, f)
            out.append(Accumulator.of(f))
        return out

    t0 = time.perf_counter()
    parts = map_chunks(run, chunks, workers)
    wall = time.perf_counter() - t0
    results = []
    for i in range(len(payoffs)):
        acc = Accumulator()
        for part in parts:
            acc = acc.merge(part[i])
        results.append(
            McEstimate(
                mean=acc.mean,
                stat_error=acc.stat_error,
                N=N,
                diverged_count=acc.invalid,
                wall_time=wall,
                cost_units=N * grid.n ** 2,
                variance=acc.variance,
            )
        )
    return results if isinstance(payoff, (list, tuple)) else results[0]
