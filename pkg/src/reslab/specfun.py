"""Special functions for the resonator coefficient family f_sigma.

The family lives on sigma in (1/2, 1).  Its scale constant c_sigma has a
Gamma-product closed form; the induced constants are

    G(sigma) = 1/c_sigma,
    kappa(sigma) = 2^(-1/(1-sigma)) * G(sigma)^(sigma/(1-sigma)),

with kappa(1-) = 8/e^3.  f_sigma itself is the unique decreasing solution
of f/(1-f^2)^2 = (c_sigma/x)^sigma normalized by
int_0^inf f^2/(1-f^2) dx = 1.

The Mellin transform of f_sigma used here is

    fhat(s) = (c^s / sigma) * G(1/2 - s/2sigma) G(2s/sigma) / G(3/2 + 3s/2sigma)

on 0 < Re s < sigma.  (A commonly quoted variant with G(2s/sigma + 1) and a
1/(2 sigma) prefactor fails both the quadrature cross-check and the residue
of the s=0 pole; the form above satisfies fhat(1-sigma) =
c^(-sigma)/(2(1-sigma)) and matches numerical quadrature.)  For
g = f^2/(1-f^2),

    ghat(s) = (c^s / s) * G(1 - s/2sigma) G(2s/sigma - 1) / G(3s/2sigma)

on sigma/2 < Re s < 2 sigma, with ghat(1) = 1 the normalization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

SIGMA_GUARD = 1e-6

__all__ = [
    "SigmaParams",
    "FSigmaFunction",
    "ModerateParams",
    "log_gamma",
    "digamma",
    "sigma_params",
    "kappa_limit_at_one",
    "f_sigma_build",
    "mellin_f",
    "mellin_g",
    "mellin_f_quadrature",
    "mellin_g_quadrature",
    "exp_integral_tau",
    "solve_A",
]


def log_gamma(s: complex) -> complex:
    """Principal branch of log Gamma(s); poles at non-positive integers."""
    if s == int(s.real) and s.real <= 0 and (not isinstance(s, complex) or s.imag == 0):
        raise ValueError(f"log_gamma pole at s = {s}")
    if isinstance(s, complex) and s.imag != 0:
        return complex(special.loggamma(s))
    return float(special.loggamma(float(s.real if isinstance(s, complex) else s)))


def digamma(s: float) -> float:
    return float(special.digamma(s))


@dataclass(frozen=True)
class SigmaParams:
    """Constants attached to one sigma: c = 1/G and kappa, all from Gamma values."""

    sigma: float
    c_sigma: float
    g_sigma: float
    kappa_sigma: float
    log_kappa: float


def _check_sigma(sigma: float) -> None:
    if not (0.5 + SIGMA_GUARD <= sigma <= 1.0 - SIGMA_GUARD):
        raise ValueError(
            f"sigma = {sigma} outside ({0.5 + SIGMA_GUARD}, {1 - SIGMA_GUARD})"
        )


def _log_c_sigma(sigma: float) -> float:
    return float(
        special.gammaln(3 / (2 * sigma))
        - special.gammaln(1 - 1 / (2 * sigma))
        - special.gammaln(2 / sigma - 1)
    )


def sigma_params(sigma: float) -> SigmaParams:
    """c_sigma, G(sigma), kappa(sigma), carried in log space."""
    _check_sigma(sigma)
    log_c = _log_c_sigma(sigma)
    log_g = -log_c
    log_kappa = (-math.log(2) + sigma * log_g) / (1 - sigma)
    return SigmaParams(
        sigma=sigma,
        c_sigma=math.exp(log_c),
        g_sigma=math.exp(log_g),
        kappa_sigma=math.exp(log_kappa),
        log_kappa=log_kappa,
    )


def kappa_limit_at_one() -> float:
    """kappa(1-) = exp(-log 2 - G'(1)/2); equals 8/e^3 = 0.3982965...

    G'(1) comes from logarithmic differentiation of the Gamma product,
    G'(1)/G(1) = psi(1/2)/2 - 2 psi(1) + (3/2) psi(3/2), G(1) = 2.
    """
    gp1 = 2.0 * (0.5 * digamma(0.5) - 2.0 * digamma(1.0) + 1.5 * digamma(1.5))
    return math.exp(-math.log(2) - gp1 / 2.0)


# ----------------------------------------------------------------------
# f_sigma on a grid
# ----------------------------------------------------------------------

_BISECT_STEPS = 80


def _invert_delta(target: float) -> float:
    # solve (1-d)/(d(2-d))^2 = target for d = 1-f, bisecting in log d;
    # stable for large targets where f is within float eps of 1
    lo, hi = -700.0, 0.0
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        d = math.exp(mid)
        if (1.0 - d) / (d * (2.0 - d)) ** 2 > target:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def _invert_f(target: float) -> float:
    # monotone inversion of f/(1-f^2)^2 = target on f in (0,1); bisection in
    # log f below target 1 keeps relative accuracy in the deep f -> 0 tail
    if target >= 1.0:
        return 1.0 - _invert_delta(target)
    if target < 1e-290:
        return target
    lo, hi = -700.0, 0.0
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        f = math.exp(mid)
        if f / (1.0 - f * f) ** 2 < target:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


@dataclass(frozen=True, eq=False)
class FSigmaFunction:
    """f_sigma tabulated on a geometric grid with asymptotic tails.

    Inside [x_min, x_max] evaluation is monotone-cubic interpolation of the
    bisected node values; below x_min it uses 1 - f ~ (1/2)(x/c)^(sigma/2),
    above x_max f ~ (c/x)^sigma.  Immutable, safe to share across threads.
    """

    sigma: float
    c_sigma: float
    x: np.ndarray
    f: np.ndarray
    _interp: PchipInterpolator

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        lo = x < self.x[0]
        hi = x > self.x[-1]
        mid = ~(lo | hi)
        out[lo] = 1.0 - 0.5 * (x[lo] / self.c_sigma) ** (self.sigma / 2)
        out[hi] = (self.c_sigma / x[hi]) ** self.sigma
        if mid.any():
            out[mid] = np.exp(self._interp(np.log(x[mid])))
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def residual(self, x) -> np.ndarray:
        """Relative residual |f/(1-f^2)^2 - (c/x)^sigma| / (c/x)^sigma.

        Relative, not absolute: near x -> 0 the implicit map's value grows
        like x^-sigma while its sensitivity to f grows cubically, so an
        absolute residual target is unreachable in doubles there.
        """
        f = np.atleast_1d(self(x))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        target = (self.c_sigma / x) ** self.sigma
        return np.abs(f / (1 - f * f) ** 2 - target) / target

    def one_minus_f(self, x) -> np.ndarray:
        """1 - f(x), stable in the x -> 0 tail."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = 1.0 - np.atleast_1d(self(x))
        lo = x < self.x[0]
        out[lo] = 0.5 * (x[lo] / self.c_sigma) ** (self.sigma / 2)
        return out

    def g_value(self, x):
        """g = f^2/(1-f^2) evaluated stably on (0, inf)."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        f = np.atleast_1d(self(x))
        delta = self.one_minus_f(x)
        out = (1.0 - delta) ** 2 / (delta * (2.0 - delta))
        hi = x > self.x[-1]
        out[hi] = f[hi] ** 2 / (1.0 - f[hi] ** 2)
        return float(out[0]) if scalar else out


def f_sigma_build(
    sigma: float,
    x_min: float = 1e-8,
    x_max: float = 1e8,
    nodes: int = 4096,
) -> FSigmaFunction:
    """Solve the implicit equation on a geometric grid by bisection."""
    _check_sigma(sigma)
    c = math.exp(_log_c_sigma(sigma))
    x = np.geomspace(x_min, x_max, nodes)
    f = np.array([_invert_f((c / xi) ** sigma) for xi in x])
    interp = PchipInterpolator(np.log(x), np.log(f))
    return FSigmaFunction(sigma=sigma, c_sigma=c, x=x, f=f, _interp=interp)


# ----------------------------------------------------------------------
# Mellin transforms
# ----------------------------------------------------------------------


def mellin_f(sigma: float, s: complex) -> complex:
    """Closed-form Mellin transform of f_sigma on 0 < Re s < sigma."""
    _check_sigma(sigma)
    s = complex(s)
    if not (0.0 < s.real < sigma):
        raise ValueError(f"Re(s) = {s.real} outside the strip (0, {sigma})")
    log_c = _log_c_sigma(sigma)
    val = (
        s * log_c
        - math.log(sigma)
        + special.loggamma(0.5 - s / (2 * sigma))
        + special.loggamma(2 * s / sigma)
        - special.loggamma(1.5 + 3 * s / (2 * sigma))
    )
    out = np.exp(val)
    return complex(out) if s.imag != 0 else complex(out.real)


def mellin_g(sigma: float, s: complex) -> complex:
    """Closed-form Mellin transform of g = f^2/(1-f^2) on sigma/2 < Re s < 2 sigma."""
    _check_sigma(sigma)
    s = complex(s)
    if not (sigma / 2 < s.real < 2 * sigma):
        raise ValueError(f"Re(s) = {s.real} outside the strip ({sigma/2}, {2*sigma})")
    log_c = _log_c_sigma(sigma)
    val = (
        s * log_c
        - np.log(s)
        + special.loggamma(1.0 - s / (2 * sigma))
        + special.loggamma(2 * s / sigma - 1.0)
        - special.loggamma(3 * s / (2 * sigma))
    )
    out = np.exp(val)
    return complex(out) if s.imag != 0 else complex(out.real)


_LOG_RANGE = 600.0  # exp-map truncation; integrands here decay exponentially


def _split_quad(func, c: float, abs_tol: float = 1e-10) -> float:
    """Integrate func over (0, inf), split at c with exponential tail maps.

    Substituting x = c e^{+-t} turns both halves into integrals over
    (0, _LOG_RANGE] whose integrands decay exponentially for arguments in
    the relevant Mellin strips.
    """
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=Warning)
        left, _ = quad(lambda t: func(c * math.exp(-t)) * c * math.exp(-t),
                       0, _LOG_RANGE, epsabs=abs_tol, limit=400)
        right, _ = quad(lambda t: func(c * math.exp(t)) * c * math.exp(t),
                        0, _LOG_RANGE, epsabs=abs_tol, limit=400)
    return left + right


def _exp_pow(base_log: float, s: complex) -> complex:
    return np.exp(s * base_log)


def mellin_f_quadrature(fs: FSigmaFunction, s: complex) -> complex:
    """Numerical Mellin transform of the grid function (oracle route).

    Quadrature covers x in [c e^-T, c e^T]; the ends are finished with the
    asymptotic forms f ~ 1 - (1/2)(x/c)^(sigma/2) and f ~ (c/x)^sigma in
    closed form, which matters near sigma -> 1/2 where convergence is slow.
    """
    s = complex(s)
    sigma, c = fs.sigma, fs.c_sigma
    log_c = math.log(c)
    re = _split_quad(lambda x: (fs(x) * x ** (s - 1)).real, c)
    im = _split_quad(lambda x: (fs(x) * x ** (s - 1)).imag, c) if s.imag else 0.0
    val = complex(re, im)
    log_lo, log_hi = log_c - _LOG_RANGE, log_c + _LOG_RANGE
    # int_0^xlo (1 - (1/2)(x/c)^(sigma/2)) x^{s-1} dx
    val += _exp_pow(log_lo, s) / s - _exp_pow(log_lo, s + sigma / 2) * math.exp(
        -sigma * log_c / 2
    ) / (2 * (s + sigma / 2))
    # int_xhi^inf (c/x)^sigma x^{s-1} dx
    val += math.exp(sigma * log_c) * _exp_pow(log_hi, s - sigma) / (sigma - s)
    return val


def mellin_g_quadrature(fs: FSigmaFunction, s: complex) -> complex:
    """Numerical Mellin transform of g = f^2/(1-f^2) with analytic end caps."""
    g = fs.g_value
    s = complex(s)
    sigma, c = fs.sigma, fs.c_sigma
    log_c = math.log(c)
    re = _split_quad(lambda x: (g(x) * x ** (s - 1)).real, c)
    im = _split_quad(lambda x: (g(x) * x ** (s - 1)).imag, c) if s.imag else 0.0
    val = complex(re, im)
    log_lo, log_hi = log_c - _LOG_RANGE, log_c + _LOG_RANGE
    # g ~ (x/c)^(-sigma/2) as x -> 0, g ~ (c/x)^(2 sigma) as x -> inf
    val += math.exp(sigma * log_c / 2) * _exp_pow(log_lo, s - sigma / 2) / (
        s - sigma / 2
    )
    val += math.exp(2 * sigma * log_c) * _exp_pow(log_hi, s - 2 * sigma) / (2 * sigma - s)
    return val


def normalization_integral(fs: FSigmaFunction) -> float:
    """int_0^inf f^2/(1-f^2) dx for the grid function; should be 1."""
    return mellin_g_quadrature(fs, 1.0).real


def c_sigma_oracle(sigma: float, tol: float = 1e-10) -> float:
    """Solve for c by bisection on the normalization integral (no Gamma).

    For a trial c, f_c is defined pointwise by inverting
    f/(1-f^2)^2 = (c/x)^sigma; the normalization integral is increasing in
    c, so bisection converges.  Independent oracle for the closed form.
    """
    _check_sigma(sigma)

    def norm_of(c: float) -> float:
        def g(x):
            t = (c / x) ** sigma
            if t >= 1.0:
                d = _invert_delta(t)
                return (1.0 - d) ** 2 / (d * (2.0 - d))
            f = _invert_f(t)
            return f * f / (1.0 - f * f)

        val = _split_quad(g, c, abs_tol=1e-12)
        # analytic end caps at s = 1 (see mellin_g_quadrature)
        log_c = math.log(c)
        val += math.exp(sigma * log_c / 2 + (1 - sigma / 2) * (log_c - _LOG_RANGE)) / (
            1 - sigma / 2
        )
        val += math.exp(2 * sigma * log_c + (1 - 2 * sigma) * (log_c + _LOG_RANGE)) / (
            2 * sigma - 1
        )
        return val

    lo, hi = 1e-6, 1.0
    flo, fhi = norm_of(lo), norm_of(hi)
    if not (flo < 1.0 < fhi):
        raise RuntimeError("normalization bracket failed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if norm_of(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------
# Exponential-integral parameters (tau, tau', A)
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ModerateParams:
    """A with tau = E1(A) and tau' = int_A^inf e^-x dx/x^2."""

    tau: float
    tau_prime: float
    a: float


def exp_integral_tau(a: float) -> tuple[float, float]:
    """(tau, tau') at lower limit a: tau = E1(a), tau' by quadrature.

    For a < 1e-3 the quadrature of e^-x/x^2 is ill-scaled and tau' is
    computed from the integration-by-parts identity e^-a/a - tau instead;
    above that threshold the two routes stay independent.
    """
    if a <= 0:
        raise ValueError("divergent: requires a > 0")
    tau = float(special.exp1(a))
    if a >= 1e-3:
        tau_prime, _ = quad(lambda x: math.exp(-x) / (x * x), a, np.inf,
                            epsrel=1e-12, limit=400)
    else:
        tau_prime = math.exp(-a) / a - tau
    return tau, float(tau_prime)


def solve_A(tau: float) -> ModerateParams:
    """Invert tau = E1(A) by monotone bisection; E1 maps (0,inf) onto (0,inf)."""
    if tau <= 0:
        raise ValueError("requires tau > 0")
    # bracket in log A
    lo, hi = -700.0, 700.0
    f = lambda v: float(special.exp1(math.exp(v))) - tau
    # E1 decreasing => f decreasing in A (increasing in -A)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    a = math.exp(0.5 * (lo + hi))
    _, tau_prime = exp_integral_tau(a)
    return ModerateParams(tau=tau, tau_prime=tau_prime, a=a)
