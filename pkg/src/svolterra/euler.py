"""Euler scheme on the grid, with the kernel frozen at the left cell endpoint:

    X_{k+1} = X_0 + sum_{i<=k} K1(t_{k+1}, t_i) b(t_i, X_i) dt_{i+1}
                  + sum_{i<=k} K2(t_{k+1}, t_i) sigma(t_i, X_i) dW_{i+1}

Both sums start at ``i = 0``. Components whose kernels are constant (or zero)
are advanced by the textbook recursion ``X_{k+1} = X_k + c1 b dt + c2 sigma dW``;
components with a genuine power kernel keep the history of ``b`` and
``sigma dW`` and cost ``O(k)`` per step, ``O(n^2)`` per path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .grid import TimeGrid
from .kernels import PowerKernel, kernel_eval
from .models import SveModel
from .noise import IncrementTable


@dataclass(frozen=True, eq=False)
class SchemePath:
    """Scheme values at the grid points.

    ``values`` is ``(n + 1, d)`` for one path or ``(N, n + 1, d)`` for a batch.
    ``diverged`` flags paths with non-finite entries.
    """

    grid: TimeGrid
    values: np.ndarray
    diverged: np.ndarray | bool = False

    @property
    def batched(self) -> bool:
        return self.values.ndim == 3

    def path(self, i: int) -> "SchemePath":
        if not self.batched:
            return self
        return SchemePath(self.grid, self.values[i], bool(np.asarray(self.diverged)[i]))


def frozen_weights(K: PowerKernel, grid: TimeGrid, times_dt: bool) -> np.ndarray:
    """``W[k, i] = K(t_k, t_i)`` (times ``dt_{i+1}`` if requested) for ``i < k``."""
    t = grid.points
    W = kernel_eval(K, t[:, None], t[None, :-1])
    if times_dt:
        W = W * grid.dt[None, :]
    return W


def _kind(K: PowerKernel) -> str:
    if K.is_zero:
        return "zero"
    if K.is_constant:
        return "const"
    return "power"


def euler_batch(model: SveModel, grid: TimeGrid, dW: np.ndarray) -> SchemePath:
    """Euler scheme for a batch of increments ``dW`` of shape ``(N, n, m)``."""
    dW = np.asarray(dW, dtype=float)
    if dW.ndim != 3 or dW.shape[1:] != (grid.n, model.m):
        raise InvalidArgument(f"increments of shape {dW.shape} do not match grid n={grid.n}, m={model.m}")
    N, n, _ = dW.shape
    d = model.d
    t = grid.points
    dt = grid.dt

    kinds = [(_kind(K1), _kind(K2)) for K1, K2 in zip(model.drift_kernels, model.diffusion_kernels)]
    recursive = [k1 != "power" and k2 != "power" for k1, k2 in kinds]
    W1 = {c: frozen_weights(model.drift_kernels[c], grid, True)
          for c in range(d) if kinds[c][0] == "power"}
    W2 = {c: frozen_weights(model.diffusion_kernels[c], grid, False)
          for c in range(d) if kinds[c][1] == "power"}
    Bh = {c: np.empty((n, N)) for c in W1}
    Sh = {c: np.empty((n, N)) for c in W2}
    run_b = np.zeros((N, d))
    run_s = np.zeros((N, d))

    X = np.empty((N, n + 1, d))
    X[:, 0, :] = model.x0
    with np.errstate(all="ignore"):
        for k in range(n):
            xk = X[:, k, :]
            b = model.drift(t[k], xk)
            s = np.einsum("ndm,nm->nd", model.diffusion(t[k], xk), dW[:, k, :])
            for c in range(d):
                k1, k2 = kinds[c]
                c1 = model.drift_kernels[c].c
                c2 = model.diffusion_kernels[c].c
                if recursive[c]:
                    x_new = xk[:, c].copy()
                    if k1 == "const":
                        x_new = x_new + c1 * (b[:, c] * dt[k])
                    if k2 == "const":
                        x_new = x_new + c2 * s[:, c]
                    X[:, k + 1, c] = x_new
                    continue
                acc = np.full(N, model.x0[c])
                if k1 == "const":
                    run_b[:, c] += c1 * (b[:, c] * dt[k])
                    acc = acc + run_b[:, c]
                elif k1 == "power":
                    Bh[c][k] = b[:, c]
                    acc = acc + W1[c][k + 1, : k + 1] @ Bh[c][: k + 1]
                if k2 == "const":
                    run_s[:, c] += c2 * s[:, c]
                    acc = acc + run_s[:, c]
                elif k2 == "power":
                    Sh[c][k] = s[:, c]
                    acc = acc + W2[c][k + 1, : k + 1] @ Sh[c][: k + 1]
                X[:, k + 1, c] = acc
    diverged = ~np.all(np.isfinite(X), axis=(1, 2))
    return SchemePath(grid, X, diverged)


def euler_path(model: SveModel, grid: TimeGrid, increments: IncrementTable) -> SchemePath:
    """Euler scheme driven by ``increments`` (single path or batch)."""
    if increments.grid.n != grid.n or not np.array_equal(increments.grid.points, grid.points):
        raise InvalidArgument("increments were sampled on a different grid")
    if increments.batched:
        return euler_batch(model, grid, increments.dW)
    out = euler_batch(model, grid, increments.dW[None])
    return out.path(0)
