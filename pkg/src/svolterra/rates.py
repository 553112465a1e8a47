"""Empirical strong convergence rates and MLMC complexity measurements."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InvalidArgument
from .estimators import map_chunks, resolve_scheme
from .euler import euler_batch
from .grid import uniform_grid
from .milstein import milstein_constant_k2_batch, milstein_state_free_batch
from .mlmc import MlmcConfig, default_alpha_circ, mlmc_adaptive
from .models import SveModel
from .noise import (
    NoiseConfig,
    aggregate_kernel_family,
    aggregate_to_coarse,
    sample_increments_batch,
    sample_kernel_cell_integrals_batch,
)

STREAM_RATES = 2000
STREAM_PILOT = 3000


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    half_width: float  # 95% confidence half-width


def fit_slope(x, y) -> SlopeFit:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise InvalidArgument("need at least two positive points")
    res = stats.linregress(np.log(x), np.log(y))
    dof = x.size - 2
    hw = float(stats.t.ppf(0.975, dof) * res.stderr) if dof > 0 else math.inf
    return SlopeFit(float(res.slope), float(res.intercept), hw)


@dataclass(frozen=True)
class RateReport:
    scheme: str
    n: list
    delta: list
    rms_T: list
    rms_sup: list
    se_T: list  # Monte Carlo standard error of the mean squared error, propagated to rms
    fit_T: SlopeFit
    fit_sup: SlopeFit
    predicted: float
    N: int

    @property
    def slope(self) -> float:
        return self.fit_T.slope

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "delta_n", "rms_T", "rms_sup"])
        for row in zip(self.n, self.delta, self.rms_T, self.rms_sup):
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        w.writerow(["slope", repr(self.predicted), repr(self.fit_T.slope), repr(self.fit_sup.slope)])
        return buf.getvalue()


def _scheme_on(model, resolved, grid, noise):
    if resolved == "euler":
        return euler_batch(model, grid, noise.dW)
    if resolved == "milstein_constant_k2":
        return milstein_constant_k2_batch(model, grid, noise.dW)[0]
    return milstein_state_free_batch(model, grid, noise.Z)[0]


def _coarse_pair(noise, resolved, M):
    """(grid, noise) on the grid coarsened by ``M``."""
    if resolved == "milstein_state_free":
        c = aggregate_kernel_family(noise, M)
    else:
        c = aggregate_to_coarse(noise, M)
    return c.grid, c


def strong_rate_experiment(model: SveModel, scheme: str, n_list, M_ref_factor: int = 8, N: int = 2000,
                           seed: int = 0, workers: int = 1, chunk: int = 250,
                           reference: str = "paired") -> RateReport:
    """RMS errors at ``T`` and over the shared grid against a coupled fine-grid
    reference computed with the same scheme.

    All paths are driven by one noise table on ``max(n_list) * M_ref_factor``
    cells. With ``reference="paired"`` each ``n`` is compared with the scheme on
    ``n * M_ref_factor`` cells, so the reference-to-coarse resolution ratio is the
    same for every ``n``. ``reference="common"`` compares every ``n`` with the
    finest grid, which biases the slope upwards when the rate is small.
    """
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 2 or N < 2:
        raise InvalidArgument("need at least two grid sizes and two paths")
    if reference not in ("paired", "common"):
        raise InvalidArgument("reference must be 'paired' or 'common'")
    n_ref = n_list[-1] * int(M_ref_factor)
    if M_ref_factor < 1 or any(n_ref % n for n in n_list):
        raise InvalidArgument("every n must divide max(n_list) * M_ref_factor")
    resolved = resolve_scheme(model, scheme)
    T = model.T
    fine_grid = uniform_grid(T, n_ref)
    cfg = NoiseConfig(model.m, model.correlation, seed, STREAM_RATES)

    def run(idx):
        if resolved == "milstein_state_free":
            noise = sample_kernel_cell_integrals_batch(fine_grid, model.diffusion_kernels[0], cfg, idx)
        else:
            noise = sample_increments_batch(fine_grid, cfg, idx)
        cache = {}

        def solve(cells):
            if cells not in cache:
                cache[cells] = _scheme_on(model, resolved, *_coarse_pair(noise, resolved, n_ref // cells))
            return cache[cells]

        out = []
        for n in n_list:
            ref = solve(n * M_ref_factor if reference == "paired" else n_ref)
            path = solve(n)
            step = (ref.values.shape[1] - 1) // n
            diff = np.linalg.norm(path.values - ref.values[:, ::step], axis=-1)
            out.append((diff[:, -1] ** 2, np.max(diff, axis=1) ** 2))
        return out

    chunks = [np.arange(a, min(a + chunk, N)) for a in range(0, N, chunk)]
    parts = map_chunks(run, chunks, workers)
    rms_T, rms_sup, se_T = [], [], []
    for i in range(len(n_list)):
        eT = np.concatenate([p[i][0] for p in parts])
        es = np.concatenate([p[i][1] for p in parts])
        mse = float(np.mean(eT))
        rms_T.append(math.sqrt(mse))
        rms_sup.append(math.sqrt(float(np.mean(es))))
        se_T.append(float(np.std(eT, ddof=1) / math.sqrt(N) / (2 * math.sqrt(mse))) if mse > 0 else 0.0)
    delta = [T / n for n in n_list]
    rp = model.rate_parameters()
    predicted = rp.euler_rate if resolved == "euler" else (rp.milstein_rate or rp.euler_rate)
    return RateReport(scheme, n_list, delta, rms_T, rms_sup, se_T,
                      fit_slope(delta, rms_T), fit_slope(delta, rms_sup), float(predicted), N)


@dataclass(frozen=True)
class ComplexityRow:
    epsilon: float
    mlmc_cost: int
    single_cost: int
    single_n: int
    single_N: int
    mlmc_estimate: float


@dataclass(frozen=True)
class ComplexityReport:
    rows: list = field(default_factory=list)
    alpha_circ: float = 1.0
    sigma2: float = 0.0
    fit_mlmc: SlopeFit | None = None
    fit_single: SlopeFit | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "mlmc_cost_units", "single_level_cost_units", "single_n", "single_N", "mlmc_estimate"])
        for r in self.rows:
            w.writerow([repr(r.epsilon), r.mlmc_cost, r.single_cost, r.single_n, r.single_N, repr(r.mlmc_estimate)])
        w.writerow(["slope", repr(self.fit_mlmc.slope), repr(self.fit_single.slope), "", "", ""])
        return buf.getvalue()


def single_level_size(epsilon: float, alpha_circ: float, sigma2: float) -> tuple[int, int, int]:
    """``n = ceil(eps^(-1/alpha))``, ``N = max(2, ceil(2 sigma^2 / eps^2))``, cost ``N n^2``."""
    n = int(math.ceil(epsilon ** (-1.0 / alpha_circ) - 1e-9))
    N = max(2, int(math.ceil(2.0 * sigma2 / epsilon ** 2)))
    return n, N, N * n * n


def complexity_experiment(model: SveModel, payoff, epsilon_list, seed: int = 0, M: int = 4,
                          alpha_circ: float | None = None, pilot_paths: int = 2000,
                          workers: int = 1) -> ComplexityReport:
    eps = [float(e) for e in epsilon_list]
    if len(eps) < 3 or any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidArgument("need at least three strictly decreasing tolerances")
    a = alpha_circ if alpha_circ is not None else default_alpha_circ(model, payoff)
    # payoff variance from a pilot at the coarsest single-level grid
    n0 = single_level_size(eps[0], a, 1.0)[0]
    grid = uniform_grid(model.T, n0)
    cfg = NoiseConfig(model.m, model.correlation, seed, STREAM_PILOT)
    inc = sample_increments_batch(grid, cfg, np.arange(pilot_paths))
    with np.errstate(all="ignore"):
        vals = payoff(euler_batch(model, grid, inc.dW).values, grid)
    sigma2 = float(np.nanvar(vals, ddof=1))
    rows = []
    for e in eps:
        res = mlmc_adaptive(model, payoff, MlmcConfig(M=M, epsilon=e, alpha_circ=a, seed=seed, workers=workers))
        n, N, cost = single_level_size(e, a, sigma2)
        rows.append(ComplexityRow(e, res.cost_units, cost, n, N, res.estimate))
    fit_m = fit_slope(eps, [r.mlmc_cost for r in rows])
    fit_s = fit_slope(eps, [r.single_cost for r in rows])
    return ComplexityReport(rows, a, sigma2, fit_m, fit_s)
