"""Scheme-independent reference values.

* Volterra OU: ``X_T`` is Gaussian with moments expressed through the
  Mittag-Leffler type series ``E_{b1}``; all integrals are summed term by term.
* Rough Heston: characteristic function from the fractional Riccati equation
  (fractional Adams predictor-corrector), call prices by Lewis' Fourier formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma, gammaln, logsumexp
from scipy.stats import norm

from .errors import InvalidArgument, OracleFailure
from .models import RoughHestonParams

# -- Volterra OU -----------------------------------------------------------


@dataclass(frozen=True)
class MittagLefflerSeries:
    """``E(s) = s^(H-1/2) sum_n (b1 s^(H+1/2))^n / Gamma((n+1)(H+1/2))``."""

    b1: float
    H: float
    tol: float = 1e-16
    max_terms: int = 100000

    def __call__(self, s):
        return mittag_leffler_E(self.b1, self.H, s, self.tol, self.max_terms)

    def R(self, s):
        return mittag_leffler_R(self.b1, self.H, s, self.tol, self.max_terms)


def _ml_sum(x: np.ndarray, a: float, tol: float, max_terms: int) -> np.ndarray:
    """``sum_n x^n / Gamma((n+1) a)`` with terms in log space."""
    total = np.zeros_like(x)
    logabs = np.log(np.abs(x), where=x != 0, out=np.full_like(x, -np.inf))
    sign = np.sign(x)
    past_peak = np.zeros(x.shape, dtype=bool)
    prev = np.full(x.shape, np.inf)
    for n in range(max_terms):
        mag = np.exp(n * logabs - gammaln((n + 1) * a)) if n else np.full_like(x, math.exp(-gammaln(a)))
        term = mag * (sign ** n if n else 1.0)
        total += term
        past_peak |= mag < prev
        prev = mag
        if np.all(past_peak & (mag <= tol * np.maximum(np.abs(total), tol))):
            return total
    return total


def mittag_leffler_E(b1: float, H: float, s, tol: float = 1e-16, max_terms: int = 100000):
    if not 0 < H < 1:
        raise InvalidArgument("H must lie in (0, 1)")
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise InvalidArgument("s must be non-negative")
    a = H + 0.5
    ss = np.atleast_1d(s)
    x = b1 * ss ** a
    with np.errstate(divide="ignore"):
        out = np.power(ss, H - 0.5) * _ml_sum(x, a, tol, max_terms)
    return out.reshape(s.shape)[()] if s.ndim == 0 else out.reshape(s.shape)


def mittag_leffler_R(b1: float, H: float, s, tol: float = 1e-16, max_terms: int = 100000):
    """``R(s) = -b1 E(s)``."""
    return -b1 * mittag_leffler_E(b1, H, s, tol, max_terms)


def _series_until_small(term, tol=1e-17, max_terms=5000):
    total = 0.0
    prev = math.inf
    for k in range(max_terms):
        t = term(k)
        total += t
        if k > 2 and abs(t) <= prev and abs(t) <= tol * max(abs(total), 1e-300):
            break
        prev = abs(t)
    return total


def ou_terminal_moments(x0, b0, b1, sigma0, H, T=1.0) -> tuple[float, float]:
    """Mean and variance of the Gaussian ``X_T`` of the Volterra OU model.

    ``int_0^T E`` and ``int_0^T E(T-s)^2 ds`` are integrated term by term
    (the latter as a Cauchy product of the series); terms are formed in log space.
    """
    if not 0 < H < 1 or not T > 0:
        raise InvalidArgument("need H in (0, 1) and T > 0")
    a = H + 0.5
    nmax = 5000
    lg = -gammaln((np.arange(nmax) + 1) * a)  # log of 1 / Gamma((n+1) a)
    lT = math.log(T)
    if b1 == 0:
        lb, sb = 0.0, 0.0
    else:
        lb, sb = math.log(abs(b1)), math.copysign(1.0, b1)

    def signed(k, logmag):
        if k == 0:
            return math.exp(logmag)
        return 0.0 if sb == 0 else sb ** k * math.exp(k * lb + logmag)

    def int_E(k):
        return signed(k, lg[k] + (k + 1) * a * lT - math.log((k + 1) * a))

    def int_E2(k):
        conv = logsumexp(lg[: k + 1] + lg[k::-1])
        return signed(k, conv + (2 * H + k * a) * lT - math.log(2 * H + k * a))

    intE = _series_until_small(int_E)
    intE2 = _series_until_small(int_E2)
    mean = (1.0 + b1 * intE) * x0 + b0 * intE
    return float(mean), float(sigma0 * sigma0 * intE2)


def gaussian_call(mean: float, variance: float, strike: float) -> float:
    """``E[(Z - K)_+]`` for ``Z ~ N(mean, variance)``."""
    if variance < 0:
        raise InvalidArgument("variance must be non-negative")
    mu = mean - strike
    if variance == 0:
        return max(mu, 0.0)
    sd = math.sqrt(variance)
    d = mu / sd
    return float(mu * norm.cdf(d) + sd * norm.pdf(d))


def ou_call_reference(x0=1.0, b0=1.0, b1=-0.5, sigma0=0.2, H=0.25, T=1.0, strike=1.0) -> float:
    mean, var = ou_terminal_moments(x0, b0, b1, sigma0, H, T)
    return gaussian_call(mean, var, strike)


# -- fractional Adams ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    t: np.ndarray
    h: np.ndarray  # (..., steps + 1)
    I1: np.ndarray  # int_0^T h
    I_frac: np.ndarray  # I^{1-a} h at T
    order: float


def _trap_weights(beta: float, N: int) -> np.ndarray:
    """Product-trapezoid weights ``w_j`` with ``I^beta f(t_N) ~ sum_j w_j f_j``
    (without the ``dt^beta / Gamma(beta + 2)`` factor)."""
    j = np.arange(N + 1, dtype=float)
    w = np.empty(N + 1)
    w[0] = (N - 1) ** (beta + 1) - (N - 1 - beta) * N ** beta
    m = N - j[1:N]
    w[1:N] = (m + 1) ** (beta + 1) + (m - 1) ** (beta + 1) - 2 * m ** (beta + 1)
    w[N] = 1.0
    return w


def fractional_adams_solve(rhs, order: float, T: float, steps: int, y0=0.0, batch_shape=()) -> RiccatiSolution:
    """PECE fractional Adams-Bashforth-Moulton for ``D^a y = F(t, y)``, ``y(0) = y0``.

    ``rhs(t, y)`` must accept and return arrays of ``batch_shape`` (complex is
    fine). One corrector application per step.
    """
    a = float(order)
    if not 0 < a < 1:
        raise InvalidArgument("fractional order must lie in (0, 1)")
    N = int(steps)
    dt = T / N
    t = np.linspace(0.0, T, N + 1)
    y0 = np.broadcast_to(np.asarray(y0, dtype=complex), batch_shape)
    y = np.zeros(batch_shape + (N + 1,), dtype=complex)
    f = np.zeros_like(y)
    y[..., 0] = y0
    f[..., 0] = rhs(t[0], y0)

    m = np.arange(N + 1, dtype=float)
    pred_w = ((m + 1) ** a - m ** a) * dt ** a / (a * gamma(a))  # indexed by k - j
    corr_w = (m + 2) ** (a + 1) + m ** (a + 1) - 2 * (m + 1) ** (a + 1)  # j >= 1, by k - j
    cfac = dt ** a / gamma(a + 2)
    for k in range(N):
        fk = f[..., : k + 1]
        yp = y0 + fk @ pred_w[k::-1]
        a0 = k ** (a + 1) - (k - a) * (k + 1) ** a
        s = a0 * f[..., 0]
        if k >= 1:
            s = s + f[..., 1 : k + 1] @ corr_w[k - 1 :: -1]
        y[..., k + 1] = y0 + cfac * (rhs(t[k + 1], yp) + s)
        f[..., k + 1] = rhs(t[k + 1], y[..., k + 1])
    I1 = y @ (_trap_weights(1.0, N) * dt / 2.0)
    beta = 1.0 - a
    I_frac = y @ (_trap_weights(beta, N) * dt ** beta / gamma(beta + 2))
    return RiccatiSolution(t, y, I1, I_frac, a)


# -- rough Heston ----------------------------------------------------------


def riccati_rhs(z, params: RoughHestonParams, literal_minus_one: bool = False):
    """``F(h) = (-z^2 - iz)/2 + (i z rho nu - lam) h + nu^2 h^2 / 2``.

    ``literal_minus_one`` uses ``-1`` in place of ``-lam``.
    """
    z = np.asarray(z, dtype=complex)
    lin = 1j * z * params.rho * params.nu - (1.0 if literal_minus_one else params.lam)
    const = 0.5 * (-z * z - 1j * z)
    half_nu2 = 0.5 * params.nu ** 2

    def F(t, h):
        return const + lin * h + half_nu2 * h * h

    return F


def heston_charfn(u, params: RoughHestonParams, T: float = 1.0, adams_steps: int = 2000,
                  literal_minus_one: bool = False) -> np.ndarray:
    """``E[exp(i u log(S_T / S_0))]`` for real or complex ``u`` (vectorised)."""
    z = np.asarray(u, dtype=complex)
    shape = z.shape
    zf = z.ravel()
    F = riccati_rhs(zf, params, literal_minus_one)
    sol = fractional_adams_solve(F, params.H + 0.5, T, adams_steps, batch_shape=zf.shape)
    with np.errstate(all="ignore"):
        psi = np.exp(params.theta * sol.I1 + params.V0 * sol.I_frac)
    if not np.all(np.isfinite(psi)):
        raise OracleFailure("fractional Riccati solution is not finite")
    return psi.reshape(shape)


def fourier_call(charfn, S0: float, strike: float, panel: float = 4.0, order: int = 32,
                 tail_tol: float = 1e-8, u_max: float = 2000.0) -> float:
    """Lewis' call formula
    ``C = S0 - sqrt(S0 K)/pi int_0^inf Re[e^{iuk} psi(u - i/2)] / (u^2 + 1/4) du``,
    ``k = ln(S0/K)``, with ``charfn`` the characteristic function of
    ``log(S_T / S0)``. Gauss-Legendre panels are added until the magnitude bound
    of the remaining integrand over a panel falls below ``tail_tol``.
    """
    if not strike > 0:
        raise InvalidArgument("strike must be positive")
    k = math.log(S0 / strike)
    x, w = leggauss(order)
    total = 0.0
    lo = 0.0
    batch = 8
    while lo < u_max:
        edges = lo + panel * np.arange(batch + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * panel
        u = (mid[:, None] + half * x[None, :]).ravel()
        psi = np.asarray(charfn(u - 0.5j))
        if not np.all(np.isfinite(psi)):
            raise OracleFailure("characteristic function not finite")
        vals = np.real(np.exp(1j * u * k) * psi) / (u * u + 0.25)
        contrib = (vals.reshape(batch, order) * (half * w)).sum(axis=1)
        bound = (np.abs(psi) / (u * u + 0.25)).reshape(batch, order).max(axis=1) * panel
        for c, b in zip(contrib, bound):
            total += c
            lo += panel
            if b < tail_tol:
                return float(S0 - math.sqrt(S0 * strike) / math.pi * total)
    raise OracleFailure("Fourier integral did not converge")


def heston_call_fourier(params: RoughHestonParams, strike: float = 1.0, T: float = 1.0,
                        adams_steps: int = 2000, literal_minus_one: bool = False) -> float:
    return fourier_call(
        lambda z: heston_charfn(z, params, T, adams_steps, literal_minus_one), params.S0, strike
    )


def black_scholes_call(S0: float, strike: float, sigma: float, T: float) -> float:
    sd = sigma * math.sqrt(T)
    d1 = (math.log(S0 / strike) + 0.5 * sd * sd) / sd
    return float(S0 * norm.cdf(d1) - strike * norm.cdf(d1 - sd))


def black_scholes_charfn(sigma: float, T: float):
    """``exp(-sigma^2 T (z^2 + i z) / 2)``, characteristic function of ``log(S_T/S_0)``."""
    def psi(z):
        z = np.asarray(z, dtype=complex)
        return np.exp(-0.5 * sigma * sigma * T * (z * z + 1j * z))

    return psi
