"""Scaled power kernels ``c * (t - s)**p`` and their rate parameters.

Every kernel used by the models in this package is of this form (fractional
kernels, their squares, constants, the zero kernel), which keeps all cell
integrals analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import gamma

from .errors import InvalidArgument


@dataclass(frozen=True)
class PowerKernel:
    """``K(t, s) = c * (t - s)**p`` for ``s < t`` and 0 otherwise."""

    p: float = 0.0
    c: float = 1.0
    zero: bool = False

    def __post_init__(self):
        if not self.zero and not self.p > -1:
            raise InvalidArgument(f"kernel exponent must exceed -1, got {self.p}")

    @classmethod
    def fractional(cls, H: float, normalized: bool = True) -> "PowerKernel":
        """``(t - s)**(H - 1/2)``, divided by ``Gamma(H + 1/2)`` when normalized."""
        c = 1.0 / gamma(H + 0.5) if normalized else 1.0
        return cls(p=H - 0.5, c=float(c))

    @classmethod
    def constant(cls, c: float = 1.0) -> "PowerKernel":
        return cls(p=0.0, c=float(c))

    @classmethod
    def zeros(cls) -> "PowerKernel":
        return cls(p=0.0, c=0.0, zero=True)

    @property
    def is_zero(self) -> bool:
        return self.zero or self.c == 0.0

    @property
    def is_constant(self) -> bool:
        return not self.is_zero and self.p == 0.0

    def __call__(self, t, s):
        return kernel_eval(self, t, s)


def kernel_eval(K: PowerKernel, t, s):
    """Evaluate ``K(t, s)``; broadcasts over array arguments."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if K.is_zero:
        out = np.zeros(np.broadcast(t, s).shape)
    else:
        lag = t - s
        pos = lag > 0
        out = np.where(pos, K.c * np.power(np.where(pos, lag, 1.0), K.p), 0.0)
    return out[()] if out.ndim == 0 else out


def cell_integral(K: PowerKernel, t: float, a: float, b: float) -> float:
    """Exact ``int_a^b K(t, s) ds`` for ``a <= b <= t``."""
    if b > t or a > b:
        raise InvalidArgument(f"need a <= b <= t, got a={a}, b={b}, t={t}")
    if K.is_zero:
        return 0.0
    q = K.p + 1.0
    return K.c * ((t - a) ** q - (t - b) ** q) / q


def cell_integrals(K: PowerKernel, t: float, edges: np.ndarray) -> np.ndarray:
    """Vector of exact integrals of ``K(t, .)`` over consecutive cells of ``edges``.

    All edges must be ``<= t``.
    """
    edges = np.asarray(edges, dtype=float)
    if K.is_zero:
        return np.zeros(edges.size - 1)
    q = K.p + 1.0
    prim = np.power(np.maximum(t - edges, 0.0), q)
    return K.c * (prim[:-1] - prim[1:]) / q


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = leggauss(order)
    return _GL_CACHE[order]


def _composite_gl(f, a: float, b: float, panels: int, order: int = 24):
    x, w = _gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return f(nodes) @ weights


def _smooth_products(K: PowerKernel, t1, t2, a: float, b: float, rtol: float = 1e-12):
    """Panel-doubling Gauss-Legendre for ``int_a^b K(t1,r) K(t2,r) dr`` with
    ``t1, t2 > b`` (integrand analytic on the cell)."""
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))

    def f(r):
        return (K.c * K.c) * np.power(t1[:, None] - r[None, :], K.p) * np.power(
            t2[:, None] - r[None, :], K.p
        )

    panels = 1
    prev = _composite_gl(f, a, b, panels)
    while panels < 4096:
        panels *= 2
        cur = _composite_gl(f, a, b, panels)
        scale = np.maximum(np.abs(cur), np.finfo(float).tiny)
        if np.all(np.abs(cur - prev) <= rtol * scale):
            return cur
        prev = cur
    return cur


def cell_l2_product(K: PowerKernel, t1: float, t2: float, a: float, b: float) -> float:
    """``int_a^b K(t1, r) K(t2, r) dr`` = covariance of the two Wiener
    integrals of ``K(t1, .)`` and ``K(t2, .)`` over ``[a, b]``."""
    lo = min(t1, t2)
    if not (a <= b <= lo):
        raise InvalidArgument(f"need a <= b <= min(t1, t2); got a={a}, b={b}, t=({t1}, {t2})")
    if K.is_zero or a == b:
        return 0.0
    p, c = K.p, K.c
    singular = b == lo
    if singular and 2 * p <= -1:
        raise InvalidArgument(f"kernel exponent {p} is not square integrable up to the diagonal")
    if t1 == t2:
        q = 2 * p + 1
        return c * c * ((t1 - a) ** q - (t1 - b) ** q) / q
    if not singular:
        return float(_smooth_products(K, t1, t2, a, b)[0])
    hi = max(t1, t2)
    # algebraic endpoint weight (b - r)**p handled exactly by QAWS
    val, _ = integrate.quad(
        lambda r: (hi - r) ** p, a, b, weight="alg", wvar=(0.0, p), epsabs=0.0, epsrel=1e-13
    )
    return c * c * val


def cell_covariance(K: PowerKernel, times: np.ndarray, a: float, b: float) -> np.ndarray:
    """Matrix of ``cell_l2_product(K, t_i, t_j, a, b)`` for times all ``>= b``."""
    times = np.asarray(times, dtype=float)
    n = times.size
    C = np.zeros((n, n))
    if K.is_zero or n == 0:
        return C
    q = 2 * K.p + 1
    for i in range(n):
        ti = times[i]
        if ti == b and q <= 0:
            raise InvalidArgument("kernel not square integrable up to the diagonal")
        C[i, i] = K.c * K.c * ((ti - a) ** q - (ti - b) ** q) / q
    iu, ju = np.triu_indices(n, 1)
    t_lo = np.minimum(times[iu], times[ju])
    smooth = t_lo > b
    if np.any(smooth):
        C[iu[smooth], ju[smooth]] = _smooth_products(K, times[iu[smooth]], times[ju[smooth]], a, b)
    for i, j in zip(iu[~smooth], ju[~smooth]):
        C[i, j] = cell_l2_product(K, times[i], times[j], a, b)
    C[ju, iu] = C[iu, ju]
    return C


@dataclass(frozen=True)
class RateParams:
    """Rate exponents of the two standing assumptions for power kernels.

    ``alpha_prime`` is ``None`` when ``alpha1 <= 1/2`` (Milstein theory does
    not apply). ``beta*_range`` are open intervals ``(1, upper)``.
    """

    alpha1: float
    alpha2: float
    alpha: float
    alpha_prime: float | None
    beta1_range: tuple[float, float]
    beta2_range: tuple[float, float]

    @property
    def euler_rate(self) -> float:
        return min(self.alpha, 1.0)

    @property
    def milstein_rate(self) -> float | None:
        if self.alpha_prime is None:
            return None
        return min(2 * self.alpha_prime, 1.0)


def _upper(x: float) -> float:
    return math.inf if x >= 1.0 else 1.0 / (1.0 - x)


def rate_parameters(drift_kernels, diffusion_kernels) -> RateParams:
    alpha1 = math.inf
    for K in drift_kernels:
        if K.is_zero:
            continue
        if not K.p > -1:
            raise InvalidArgument(f"drift kernel exponent {K.p} must exceed -1")
        alpha1 = min(alpha1, K.p + 1.0)
    alpha2 = math.inf
    for K in diffusion_kernels:
        if K.is_zero:
            continue
        if not K.p > -0.5:
            raise InvalidArgument(f"diffusion kernel exponent {K.p} must exceed -1/2")
        alpha2 = min(alpha2, K.p + 0.5)
    alpha = min(alpha1, alpha2)
    if alpha1 > 0.5:
        alpha_prime = min(alpha1, 2 * alpha2, alpha1 + alpha2 - 0.5) / 2
    else:
        alpha_prime = None
    return RateParams(
        alpha1=alpha1,
        alpha2=alpha2,
        alpha=alpha,
        alpha_prime=alpha_prime,
        beta1_range=(1.0, _upper(min(alpha1, 1.0))),
        beta2_range=(1.0, _upper(min(2 * alpha2, 1.0))),
    )
