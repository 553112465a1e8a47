"""Stochastic Volterra equation descriptions and the concrete models.

Coefficient functions are vectorised over a batch of states: ``x`` has shape
``(N, d)``; ``drift`` returns ``(N, d)``, ``diffusion`` returns ``(N, d, m)``,
``drift_grad`` returns ``(N, d, d)`` and ``diffusion_grad`` ``(N, d, m, d)``.
Each state component ``i`` carries its own scalar drift and diffusion kernel,
i.e. kernel matrices are diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgument
from .kernels import PowerKernel, RateParams, rate_parameters


@dataclass(frozen=True, eq=False)
class SveModel:
    name: str
    d: int
    m: int
    x0: np.ndarray
    drift: Callable
    diffusion: Callable
    drift_kernels: tuple
    diffusion_kernels: tuple
    correlation: np.ndarray | None = None
    drift_grad: Callable | None = None
    diffusion_grad: Callable | None = None
    sigma_state_free: bool = False
    T: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.shape != (self.d,):
            raise InvalidArgument(f"x0 must have length {self.d}")
        if len(self.drift_kernels) != self.d or len(self.diffusion_kernels) != self.d:
            raise InvalidArgument("need one drift and one diffusion kernel per component")
        corr = np.eye(self.m) if self.correlation is None else np.asarray(self.correlation, float)
        if corr.shape != (self.m, self.m):
            raise InvalidArgument("correlation shape does not match the driver count")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "correlation", corr)
        object.__setattr__(self, "drift_kernels", tuple(self.drift_kernels))
        object.__setattr__(self, "diffusion_kernels", tuple(self.diffusion_kernels))

    def rate_parameters(self) -> RateParams:
        return rate_parameters(self.drift_kernels, self.diffusion_kernels)

    def check_shapes(self, t: float = 0.0):
        x = self.x0[None, :]
        b = np.asarray(self.drift(t, x))
        s = np.asarray(self.diffusion(t, x))
        if b.shape != (1, self.d) or s.shape != (1, self.d, self.m):
            raise InvalidArgument(
                f"coefficient shapes {b.shape}, {s.shape} do not match d={self.d}, m={self.m}"
            )


def _check_H(H):
    if not 0 < H < 1:
        raise InvalidArgument(f"H must lie in (0, 1), got {H}")


def volterra_ou(x0=1.0, b0=1.0, b1=-0.5, sigma0=0.2, H=0.25, T=1.0) -> SveModel:
    """``X_t = x0 + int K(t-s)(b0 + b1 X_s) ds + int K(t-s) sigma0 dW_s`` with the
    normalised fractional kernel ``(t-s)^(H-1/2) / Gamma(H+1/2)``."""
    _check_H(H)
    K = PowerKernel.fractional(H, normalized=True)

    def drift(t, x):
        return b0 + b1 * x

    def diffusion(t, x):
        return np.full((x.shape[0], 1, 1), float(sigma0))

    def drift_grad(t, x):
        return np.full((x.shape[0], 1, 1), float(b1))

    def diffusion_grad(t, x):
        return np.zeros((x.shape[0], 1, 1, 1))

    return SveModel(
        name="ou",
        d=1,
        m=1,
        x0=[x0],
        drift=drift,
        diffusion=diffusion,
        drift_kernels=(K,),
        diffusion_kernels=(K,),
        drift_grad=drift_grad,
        diffusion_grad=diffusion_grad,
        sigma_state_free=True,
        T=T,
        params=dict(x0=x0, b0=b0, b1=b1, sigma0=sigma0, H=H, T=T),
    )


def mech_langevin(lam=3.0, alpha_pot=0.1, H=0.3, q0=0.0, p0=0.0, T=2.0) -> SveModel:
    """Particle in a heat bath, written as a 3-d Volterra equation for
    ``(q, p, dp/dt / V'(q))`` with potential ``V(x) = x + alpha cos(x)`` and
    unnormalised kernel ``K(t) = t^(H-1/2)``."""
    _check_H(H)
    lam = float(lam)
    alpha_pot = float(alpha_pot)

    def V(x):
        return x + alpha_pot * np.cos(x)

    def dV(x):
        return 1.0 - alpha_pot * np.sin(x)

    def drift(t, x):
        q, p, a = x[:, 0], x[:, 1], x[:, 2]
        return np.stack([p, a * dV(q), -lam * lam * V(q)], axis=1)

    def diffusion(t, x):
        out = np.zeros((x.shape[0], 3, 1))
        out[:, 2, 0] = -lam * V(x[:, 0])
        return out

    def drift_grad(t, x):
        q, a = x[:, 0], x[:, 2]
        g = np.zeros((x.shape[0], 3, 3))
        g[:, 0, 1] = 1.0
        g[:, 1, 0] = -a * alpha_pot * np.cos(q)
        g[:, 1, 2] = dV(q)
        g[:, 2, 0] = -lam * lam * dV(q)
        return g

    def diffusion_grad(t, x):
        g = np.zeros((x.shape[0], 3, 1, 3))
        g[:, 2, 0, 0] = -lam * dV(x[:, 0])
        return g

    one = PowerKernel.constant(1.0)
    return SveModel(
        name="mech",
        d=3,
        m=1,
        x0=[q0, p0, -1.0],
        drift=drift,
        diffusion=diffusion,
        drift_kernels=(one, one, PowerKernel(p=2 * H - 1, c=1.0)),
        diffusion_kernels=(PowerKernel.zeros(), PowerKernel.zeros(), PowerKernel.fractional(H, normalized=False)),
        drift_grad=drift_grad,
        diffusion_grad=diffusion_grad,
        T=T,
        params=dict(lam=lam, alpha_pot=alpha_pot, H=H, q0=q0, p0=p0, T=T),
    )


@dataclass(frozen=True)
class RoughHestonParams:
    S0: float = 1.0
    V0: float = 0.02
    theta: float = 0.02
    lam: float = 0.3
    nu: float = 0.3
    rho: float = -0.7
    H: float = 0.1

    def __post_init__(self):
        _check_H(self.H)
        if not self.S0 > 0:
            raise InvalidArgument("S0 must be positive")
        if self.V0 < 0 or self.theta < 0 or self.nu < 0 or self.lam < 0:
            raise InvalidArgument("V0, theta, lambda and nu must be non-negative")
        if not -1 < self.rho < 1:
            raise InvalidArgument("rho must lie in (-1, 1)")


def rough_heston(S0=1.0, V0=0.02, theta=0.02, lam=0.3, nu=0.3, rho=-0.7, H=0.1, T=1.0) -> SveModel:
    """Price ``S`` (plain Euler on ``S``, no log transform) and variance ``V``
    with truncated square roots ``sqrt(max(V, 0))``."""
    prm = RoughHestonParams(S0, V0, theta, lam, nu, rho, H)
    K = PowerKernel.fractional(H, normalized=True)

    def drift(t, x):
        out = np.zeros_like(x)
        out[:, 1] = theta - lam * x[:, 1]
        return out

    def diffusion(t, x):
        vol = np.sqrt(np.maximum(x[:, 1], 0.0))
        out = np.zeros((x.shape[0], 2, 2))
        out[:, 0, 0] = x[:, 0] * vol
        out[:, 1, 1] = nu * vol
        return out

    return SveModel(
        name="heston",
        d=2,
        m=2,
        x0=[S0, V0],
        drift=drift,
        diffusion=diffusion,
        drift_kernels=(PowerKernel.zeros(), K),
        diffusion_kernels=(PowerKernel.constant(1.0), K),
        correlation=np.array([[1.0, rho], [rho, 1.0]]),
        T=T,
        params=dict(vars(prm), T=T),
    )


def scalar_sde(x0, b, sigma, db=None, dsigma=None, drift_kernel=None, diffusion_kernel=None,
               state_free=False, T=1.0, name="scalar") -> SveModel:
    """One-dimensional model from scalar coefficient functions ``f(t, x)``
    (``x`` is a 1-d array). Kernels default to the constant 1, i.e. an SDE."""
    K1 = drift_kernel or PowerKernel.constant(1.0)
    K2 = diffusion_kernel or PowerKernel.constant(1.0)

    def drift(t, x):
        return np.asarray(b(t, x[:, 0]), dtype=float).reshape(-1, 1) * np.ones((x.shape[0], 1))

    def diffusion(t, x):
        return np.asarray(sigma(t, x[:, 0]), dtype=float).reshape(-1, 1, 1) * np.ones((x.shape[0], 1, 1))

    drift_grad = None
    if db is not None:
        def drift_grad(t, x):
            return np.asarray(db(t, x[:, 0]), dtype=float).reshape(-1, 1, 1) * np.ones((x.shape[0], 1, 1))

    diffusion_grad = None
    if dsigma is not None:
        def diffusion_grad(t, x):
            return np.asarray(dsigma(t, x[:, 0]), dtype=float).reshape(-1, 1, 1, 1) * np.ones((x.shape[0], 1, 1, 1))

    return SveModel(
        name=name,
        d=1,
        m=1,
        x0=[x0],
        drift=drift,
        diffusion=diffusion,
        drift_kernels=(K1,),
        diffusion_kernels=(K2,),
        drift_grad=drift_grad,
        diffusion_grad=diffusion_grad,
        sigma_state_free=state_free,
        T=T,
    )


def geometric_brownian(x0=1.0, mu=0.05, sigma=0.5, T=1.0) -> SveModel:
    """Classical GBM ``dX = mu X dt + sigma X dW`` (constant unit kernels)."""
    return scalar_sde(
        x0,
        lambda t, x: mu * x,
        lambda t, x: sigma * x,
        db=lambda t, x: np.full_like(x, mu),
        dsigma=lambda t, x: np.full_like(x, sigma),
        T=T,
        name="gbm",
    )


MODELS = {
    "ou": volterra_ou,
    "mech": mech_langevin,
    "heston": rough_heston,
    "gbm": geometric_brownian,
}
