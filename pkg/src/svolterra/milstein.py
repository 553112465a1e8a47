"""Milstein scheme in its two exactly simulable one-dimensional cases.

State-free diffusion (``sigma`` independent of ``x``)::

    X_j = X_0 + sum_{k<j} w1[j, k] (b_k + b'_k A1_k) + sum_{k<j} sigma_k Z[j, k]

with exact drift weights ``w1[j, k] = int_{t_k}^{t_{k+1}} K1(t_j, s) ds``,
the exactly sampled Wiener integrals ``Z[j, k] = int_{cell k} K2(t_j, r) dW_r``
and the kernel-difference correction taken at the right end of cell ``k``::

    A1_k = sum_{m<k} sigma_m (Z[k+1, m] - Z[k, m]).

(The left end would make ``A1`` vanish identically.)

Constant diffusion kernel ``K2 = c``: ``A1`` vanishes and the within-cell
double integral is exact::

    X_j = X_0 + sum_{k<j} w1[j, k] b_k
              + sum_{k<j} c (sigma_k dW_k + c sigma'_k sigma_k (dW_k^2 - dt_k) / 2)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, MissingGradient, UnsupportedScheme
from .grid import TimeGrid
from .kernels import cell_integrals
from .models import SveModel
from .noise import IncrementTable, KernelGaussianFamily
from .euler import SchemePath


@dataclass(frozen=True, eq=False)
class MilsteinCorrection:
    """``A1[k]`` (per path) for the drift correction; ``A2_coeff[k]`` is the
    ``sigma' sigma`` factor multiplying ``(dW_k^2 - dt_k)/2`` when ``K2`` is
    constant."""

    A1: np.ndarray
    A2_coeff: np.ndarray | None = None


def drift_weights(model: SveModel, grid: TimeGrid) -> np.ndarray:
    """``w1[j, k]`` for ``k < j``, zero elsewhere."""
    t = grid.points
    n = grid.n
    K1 = model.drift_kernels[0]
    w = np.zeros((n + 1, n))
    for j in range(1, n + 1):
        w[j, :j] = cell_integrals(K1, t[j], t[: j + 1])
    return w


def _require_scalar(model: SveModel):
    if model.d != 1 or model.m != 1:
        raise UnsupportedScheme("Milstein is implemented for d = m = 1 only")
    if model.drift_grad is None:
        raise MissingGradient("Milstein needs the drift gradient")


def correction_from_family(sig: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """``A1[..., k]`` from ``Z[..., j, m]`` and frozen ``sig[m]``."""
    n = Z.shape[-1]
    D = Z[..., 1:, :] - Z[..., :-1, :]  # D[k, m] = Z[k+1, m] - Z[k, m]
    D = D * np.tril(np.ones((n, n)), -1)  # keep m < k
    return D @ sig


def milstein_state_free_batch(model: SveModel, grid: TimeGrid, Z: np.ndarray) -> tuple[SchemePath, MilsteinCorrection]:
    _require_scalar(model)
    if not model.sigma_state_free:
        raise UnsupportedScheme("diffusion depends on the state; use the constant-K2 case")
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 2:
        Z = Z[None]
    n = grid.n
    if Z.shape[1:] != (n + 1, n):
        raise InvalidArgument("kernel family does not match the grid")
    N = Z.shape[0]
    t = grid.points
    dummy = model.x0[None, :]
    sig = np.array([model.diffusion(t[k], dummy)[0, 0, 0] for k in range(n)])
    w1 = drift_weights(model, grid)
    G = Z @ sig  # G[:, j] = sum_{k<j} sig_k Z[j, k]
    A1 = correction_from_family(sig, Z)

    X = np.empty((N, n + 1, 1))
    X[:, 0, 0] = model.x0[0]
    F = np.empty((n, N))
    with np.errstate(all="ignore"):
        for j in range(1, n + 1):
            k = j - 1
            xk = X[:, k, :]
            F[k] = model.drift(t[k], xk)[:, 0] + model.drift_grad(t[k], xk)[:, 0, 0] * A1[:, k]
            X[:, j, 0] = model.x0[0] + w1[j, :j] @ F[:j] + G[:, j]
    diverged = ~np.all(np.isfinite(X), axis=(1, 2))
    return SchemePath(grid, X, diverged), MilsteinCorrection(A1)


def milstein_path_state_free_sigma(model: SveModel, grid: TimeGrid, zfam: KernelGaussianFamily) -> SchemePath:
    if zfam.grid.n != grid.n:
        raise InvalidArgument("kernel family was sampled on a different grid")
    path, _ = milstein_state_free_batch(model, grid, zfam.Z)
    return path if zfam.batched else path.path(0)


def milstein_constant_k2_batch(model: SveModel, grid: TimeGrid, dW: np.ndarray) -> tuple[SchemePath, MilsteinCorrection]:
    _require_scalar(model)
    K2 = model.diffusion_kernels[0]
    if not (K2.is_constant or K2.is_zero):
        raise UnsupportedScheme("diffusion kernel is not constant")
    if model.diffusion_grad is None:
        raise MissingGradient("constant-K2 Milstein needs the diffusion gradient")
    dW = np.asarray(dW, dtype=float)
    if dW.ndim == 2:
        dW = dW[None]
    N, n, _ = dW.shape
    if n != grid.n:
        raise InvalidArgument("increments do not match the grid")
    t = grid.points
    dt = grid.dt
    c2 = 0.0 if K2.is_zero else K2.c
    K1 = model.drift_kernels[0]
    recursive = K1.is_constant or K1.is_zero
    c1 = 0.0 if K1.is_zero else K1.c
    w1 = None if recursive else drift_weights(model, grid)

    X = np.empty((N, n + 1, 1))
    X[:, 0, 0] = model.x0[0]
    B = np.empty((n, N))
    coeff = np.empty((N, n))
    run_s = np.zeros(N)
    with np.errstate(all="ignore"):
        for k in range(n):
            xk = X[:, k, :]
            b = model.drift(t[k], xk)[:, 0]
            sig = model.diffusion(t[k], xk)[:, 0, 0]
            dsig = model.diffusion_grad(t[k], xk)[:, 0, 0, 0]
            coeff[:, k] = dsig * sig
            dw = dW[:, k, 0]
            noise = c2 * (sig * dw + c2 * coeff[:, k] * (dw * dw - dt[k]) / 2)
            if recursive:
                X[:, k + 1, 0] = X[:, k, 0] + c1 * (b * dt[k]) + noise
            else:
                B[k] = b
                run_s += noise
                X[:, k + 1, 0] = model.x0[0] + w1[k + 1, : k + 1] @ B[: k + 1] + run_s
    diverged = ~np.all(np.isfinite(X), axis=(1, 2))
    return SchemePath(grid, X, diverged), MilsteinCorrection(np.zeros((N, n)), coeff)


def milstein_path_constant_k2(model: SveModel, grid: TimeGrid, increments: IncrementTable) -> SchemePath:
    path, _ = milstein_constant_k2_batch(model, grid, increments.dW)
    return path if increments.batched else path.path(0)


def milstein_case(model: SveModel) -> str:
    """Which exactly simulable case ``model`` falls in: ``'state_free'`` or
    ``'constant_k2'``. Raises UnsupportedScheme otherwise."""
    _require_scalar(model)
    K2 = model.diffusion_kernels[0]
    if model.sigma_state_free and not K2.is_zero:
        return "state_free"
    if K2.is_constant or K2.is_zero:
        if model.diffusion_grad is None:
            raise MissingGradient("constant-K2 Milstein needs the diffusion gradient")
        return "constant_k2"
    raise UnsupportedScheme(
        "Milstein needs a state-free diffusion or a constant diffusion kernel"
    )
