"""Seeded Brownian drivers, level coupling and kernel-weighted Wiener integrals.

Randomness is drawn from counter-based Philox streams. The key is derived
from ``(seed, stream_id, purpose)`` and the counter's top word is the path
index, so every path owns a disjoint stream and any subset of paths can be
regenerated in any order, by any worker, with bit-identical results. Inside a
path stream, normals are laid out cell-major then driver (``(cell, driver)``
is the position in the stream).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import CovarianceFailure, InvalidArgument
from .grid import TimeGrid
from .kernels import PowerKernel, cell_covariance

_MASK64 = (1 << 64) - 1

INCREMENTS = 0
KERNEL_INTEGRALS = 1


@dataclass(frozen=True, eq=False)
class NoiseConfig:
    m: int = 1
    correlation: np.ndarray | None = None
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        corr = np.eye(self.m) if self.correlation is None else np.asarray(self.correlation, float)
        if corr.shape != (self.m, self.m):
            raise InvalidArgument(f"correlation must be {self.m}x{self.m}")
        if not np.allclose(corr, corr.T) or not np.allclose(np.diag(corr), 1.0):
            raise InvalidArgument("correlation must be symmetric with unit diagonal")
        w = np.linalg.eigvalsh(corr)
        if w.min() < -1e-12:
            raise InvalidArgument("correlation matrix is not positive semi-definite")
        object.__setattr__(self, "correlation", corr)
        object.__setattr__(self, "_factor", _psd_factor(corr))

    @property
    def factor(self) -> np.ndarray:
        """Lower factor ``L`` with ``L @ L.T == correlation``."""
        return self._factor

    def with_stream(self, stream_id: int) -> "NoiseConfig":
        return NoiseConfig(self.m, self.correlation, self.seed, stream_id)


def _psd_factor(corr):
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(corr)
        return v * np.sqrt(np.clip(w, 0.0, None))


def _stream_key(seed: int, stream_id: int, purpose: int) -> np.ndarray:
    ss = np.random.SeedSequence([seed & _MASK64, stream_id & _MASK64, purpose])
    return ss.generate_state(2, np.uint64)


def path_generator(seed: int, stream_id: int, purpose: int, path_index: int) -> np.random.Generator:
    """Generator for one path; independent of how paths are batched."""
    key = _stream_key(seed, stream_id, purpose)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, int(path_index)]))


def standard_normals(seed, stream_id, purpose, path_indices, size: int) -> np.ndarray:
    """``(len(path_indices), size)`` normals, one Philox stream per path."""
    key = _stream_key(seed, stream_id, purpose)
    idx = np.atleast_1d(np.asarray(path_indices, dtype=np.int64))
    out = np.empty((idx.size, size))
    for row, p in enumerate(idx):
        g = np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, int(p)]))
        out[row] = g.standard_normal(size)
    return out


@dataclass(frozen=True, eq=False)
class IncrementTable:
    """Brownian increments on ``grid``.

    ``dW`` has shape ``(n, m)`` for one path or ``(N, n, m)`` for a batch;
    row ``k`` is the increment over ``[t_k, t_{k+1})``.
    """

    grid: TimeGrid
    dW: np.ndarray

    @property
    def batched(self) -> bool:
        return self.dW.ndim == 3

    @property
    def n_paths(self) -> int:
        return self.dW.shape[0] if self.batched else 1

    def path(self, i: int) -> "IncrementTable":
        return IncrementTable(self.grid, self.dW[i]) if self.batched else self


def sample_increments_batch(grid: TimeGrid, config: NoiseConfig, path_indices) -> IncrementTable:
    n, m = grid.n, config.m
    xi = standard_normals(config.seed, config.stream_id, INCREMENTS, path_indices, n * m)
    xi = xi.reshape(-1, n, m)
    if m > 1:
        xi = xi @ config.factor.T
    dW = xi * np.sqrt(grid.dt)[None, :, None]
    return IncrementTable(grid, dW)


def sample_increments(grid: TimeGrid, config: NoiseConfig, path_index: int) -> IncrementTable:
    batch = sample_increments_batch(grid, config, [path_index])
    return IncrementTable(grid, batch.dW[0])


def coarse_grid(grid: TimeGrid, M: int) -> TimeGrid:
    if M < 1 or grid.n % M:
        raise InvalidArgument(f"grid with {grid.n} cells cannot be coarsened by {M}")
    return TimeGrid(grid.points[::M], uniform=grid.uniform)


def aggregate_to_coarse(fine: IncrementTable, M: int) -> IncrementTable:
    """Coarse increments as exact sums of ``M`` consecutive fine increments."""
    grid = coarse_grid(fine.grid, M)
    if M == 1:
        return IncrementTable(grid, fine.dW)
    dW = fine.dW
    # sequential accumulation so the sum order is fixed: ((d0 + d1) + d2) + ...
    acc = dW[..., 0::M, :].copy()
    for r in range(1, M):
        acc += dW[..., r::M, :]
    return IncrementTable(grid, acc)


# ---------------------------------------------------------------------------
# kernel-weighted Wiener integrals Z[j, m] = int_{cell m} K2(t_j, r) dW_r


@dataclass(frozen=True, eq=False)
class CellFactors:
    """Cholesky factors of the per-cell covariances ``C^(m)``.

    On a uniform grid the covariance only depends on lags, so ``C^(m)`` is the
    leading ``(n - m)`` block of ``C^(0)`` and one factor serves every cell.
    """

    grid: TimeGrid
    K2: PowerKernel
    factors: tuple
    shared: bool
    jitter: tuple
    trace: tuple
    min_eig: tuple

    def factor(self, m: int) -> np.ndarray:
        if self.shared:
            k = self.grid.n - m
            return self.factors[0][:k, :k]
        return self.factors[m]


def jittered_cholesky(C: np.ndarray):
    """Cholesky of a PSD matrix with escalating diagonal jitter.

    Returns ``(L, jitter, min_eig)``. Raises CovarianceFailure when the
    smallest eigenvalue is below ``-1e-10 * trace`` or when jitter up to
    ``1e-10 * trace`` does not succeed.
    """
    tr = float(np.trace(C))
    if tr == 0.0:
        return np.zeros_like(C), 0.0, 0.0
    min_eig = float(np.linalg.eigvalsh(C)[0])
    if min_eig < -1e-10 * tr:
        raise CovarianceFailure(f"covariance not PSD: min eigenvalue {min_eig:.3e}, trace {tr:.3e}")
    try:
        return np.linalg.cholesky(C), 0.0, min_eig
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(C.shape[0])
    rel = 1e-14
    while rel <= 1e-10 * (1 + 1e-9):
        try:
            return np.linalg.cholesky(C + rel * tr * eye), rel * tr, min_eig
        except np.linalg.LinAlgError:
            rel *= 10
    raise CovarianceFailure("Cholesky failed with jitter up to 1e-10 * trace")


_FACTOR_CACHE: dict = {}
_FACTOR_LOCK = threading.Lock()


def cell_factors(grid: TimeGrid, K2: PowerKernel) -> CellFactors:
    """Build (or fetch from cache) the per-cell Cholesky factors."""
    if 2 * K2.p <= -1 and not K2.is_zero:
        raise InvalidArgument("diffusion kernel must be square integrable")
    key = (grid.points.tobytes(), grid.uniform, K2)
    with _FACTOR_LOCK:
        hit = _FACTOR_CACHE.get(key)
        if hit is not None:
            return hit
        pts = grid.points
        n = grid.n
        cells = [0] if grid.uniform else range(n)
        factors, jit, traces, eigs = [], [], [], []
        for m in cells:
            C = cell_covariance(K2, pts[m + 1 :], pts[m], pts[m + 1])
            L, j, e = jittered_cholesky(C)
            factors.append(L)
            jit.append(j)
            traces.append(float(np.trace(C)))
            eigs.append(e)
        out = CellFactors(grid, K2, tuple(factors), grid.uniform, tuple(jit), tuple(traces), tuple(eigs))
        _FACTOR_CACHE[key] = out
        return out


@dataclass(frozen=True, eq=False)
class KernelGaussianFamily:
    """``Z[..., j, m]`` for ``m < j <= n``; entries with ``j <= m`` are zero.

    Shape ``(n + 1, n)`` for a single path or ``(N, n + 1, n)`` for a batch.
    """

    grid: TimeGrid
    K2: PowerKernel
    Z: np.ndarray
    factors: CellFactors | None = field(default=None, repr=False)

    @property
    def batched(self) -> bool:
        return self.Z.ndim == 3

    def path(self, i: int) -> "KernelGaussianFamily":
        return KernelGaussianFamily(self.grid, self.K2, self.Z[i], self.factors) if self.batched else self


def sample_kernel_cell_integrals_batch(grid, K2, config: NoiseConfig, path_indices) -> KernelGaussianFamily:
    n = grid.n
    if K2.is_constant or K2.is_zero:
        # rank-one covariance: Z[j, m] = c dW_m exactly, no factorisation needed
        c = 0.0 if K2.is_zero else K2.c
        xi = standard_normals(config.seed, config.stream_id, KERNEL_INTEGRALS, path_indices, n)
        dW = xi * np.sqrt(grid.dt)
        mask = np.tril(np.ones((n + 1, n)), -1)
        return KernelGaussianFamily(grid, K2, c * dW[:, None, :] * mask, None)
    fac = cell_factors(grid, K2)
    total = n * (n + 1) // 2
    xi = standard_normals(config.seed, config.stream_id, KERNEL_INTEGRALS, path_indices, total)
    N = xi.shape[0]
    Z = np.zeros((N, n + 1, n))
    pos = 0
    for m in range(n):
        k = n - m
        L = fac.factor(m)
        Z[:, m + 1 :, m] = xi[:, pos : pos + k] @ L.T
        pos += k
    return KernelGaussianFamily(grid, K2, Z, fac)


def sample_kernel_cell_integrals(grid, K2, config: NoiseConfig, path_index: int) -> KernelGaussianFamily:
    fam = sample_kernel_cell_integrals_batch(grid, K2, config, [path_index])
    return KernelGaussianFamily(grid, K2, fam.Z[0], fam.factors)


def aggregate_kernel_family(fine: KernelGaussianFamily, M: int) -> KernelGaussianFamily:
    """Coarse-grid ``Z`` built from the fine one on the same Wiener path.

    ``Z_c[J, c] = sum over fine cells m inside coarse cell c of Z_f[J*M, m]``.
    """
    grid = coarse_grid(fine.grid, M)
    if M == 1:
        return KernelGaussianFamily(grid, fine.K2, fine.Z)
    Zf = fine.Z[..., ::M, :]
    acc = Zf[..., 0::M].copy()
    for r in range(1, M):
        acc += Zf[..., r::M]
    # keep the strict lower triangle only
    nc = grid.n
    mask = np.tril(np.ones((nc + 1, nc), dtype=bool), -1)
    return KernelGaussianFamily(grid, fine.K2, np.where(mask, acc, 0.0))
