"""Dirichlet-series side of the resonator sums.

For a resonator r the generating function is R(s) = prod_p (1 - r(p) p^-s)^-1
(completely multiplicative case) and the working quantities are

    phi_0(s) = log R(s),   phi_j(s) = (-1)^j d^j/ds^j phi_0(s),

computed as exact prime sums with the geometric inner sums in closed form.
The saddle sigma solves phi_1(sigma) = log N and gives the closed-form
estimates

    sum_{n<=N}   r(n) ~ N^sigma     e^phi_0 / (sigma   sqrt(2 pi phi_2)),
    sum_{n<=N} n r(n) ~ N^(1+sigma) e^phi_0 / ((1+sigma) sqrt(2 pi phi_2)),

checked independently by truncated Perron integration.

Squarefree-supported resonators get phi_0(s) = sum_p log(1 + r(p) p^-s)
and its derivatives; the saddle formulas above apply verbatim.

Windows too wide to enumerate (upper end beyond PHI_ENUM_CAP) are
evaluated by a prime-density integral of the first-power term; reports
carry a method tag saying which path ran.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import primes
from .resonators import BudgetExceeded, Family, ResonatorSpec
from .specfun import mellin_f

PHI_ENUM_CAP = 2 * 10**7
F_SIGMA_PCAP = 10**6


class BracketError(ValueError):
    pass


# ----------------------------------------------------------------------
# phi_j sums
# ----------------------------------------------------------------------


def _inner_sums(w, j: int):
    """sum_{n>=1} n^(j-1) w^n in closed form (|w| < 1)."""
    if j == 0:
        return -np.log1p(-w)
    if j == 1:
        return w / (1 - w)
    if j == 2:
        return w / (1 - w) ** 2
    return w * (1 + w) / (1 - w) ** 3


def _phi_enumerated(spec: ResonatorSpec, s: complex, j: int,
                    p_cap: float | None) -> complex:
    ps, vals = spec.support_values(limit=p_cap)
    if len(ps) == 0:
        return 0.0 + 0.0j
    lp = np.log(ps.astype(np.float64))
    w = np.asarray(vals) * np.exp(-s * lp)
    if np.any(np.abs(w) >= 1.0):
        raise ValueError("divergent: r(p) p^-Re(s) >= 1 on support")
    if spec.squarefree_only:
        if j == 0:
            inner = np.log1p(w)
        elif j == 1:
            inner = w / (1 + w)
        elif j == 2:
            inner = w / (1 + w) ** 2
        else:
            inner = w * (1 - w) / (1 + w) ** 3
    else:
        inner = _inner_sums(w, j)
    return complex((lp**j * inner).sum())


def _phi_f_sigma_tail(spec: ResonatorSpec, s: complex, j: int, p_cap: float) -> complex:
    """Prime-density integral of log^j(t) f_sigma(t/M) t^-s beyond p_cap.

    Only the first power of the geometric series matters out there; the
    density dt/log t cancels one log factor.
    """
    sig, m = spec.sigma, spec.m
    fs = spec._fsig
    lo = math.log(p_cap)

    def integrand(u: float) -> complex:
        return fs(math.exp(u) / m) * np.exp((1 - s) * u) * u ** (j - 1)

    hi = lo
    # integrand decays like e^{(1-s-sigma) u}; cut when negligible
    decay = s.real + sig - 1.0
    if decay <= 0:
        raise ValueError("tail integral divergent: Re(s) <= 1 - sigma")
    hi = lo + max(50.0, 60.0 / decay)
    re, _ = quad(lambda u: integrand(u).real, lo, hi, limit=300)
    im, _ = quad(lambda u: integrand(u).imag, lo, hi, limit=300) if s.imag else (0.0, 0.0)
    return complex(re, im)


def _phi_window_integral(spec: ResonatorSpec, s: complex, j: int) -> complex:
    """First-order prime-density evaluation for windows too wide to
    enumerate: sum log^j p r(p) p^-s ~ int r(t) t^-s log^(j-1) t dt."""
    lo, hi = spec.window()
    ulo, uhi = math.log(lo), math.log(hi)

    if spec.family == Family.WINDOW_PSIGMA:
        coeff = lambda u: spec.lam * math.exp(-spec.sigma * u)
    elif spec.family == Family.WINDOW_LLOGP:
        coeff = lambda u: spec.big_l * u * math.exp(-u)
    elif spec.family == Family.SQRT_WINDOW:
        coeff = lambda u: spec.lam / (math.exp(0.5 * u) * u)
    else:
        raise BudgetExceeded("family has no integral fallback")

    def integrand(u: float) -> complex:
        w = coeff(u) * np.exp(-s * u)
        return u ** (j - 1) * (w / (1 - w) if not spec.squarefree_only else w / (1 + w)) * math.exp(u)

    re, _ = quad(lambda u: integrand(u).real, ulo, uhi, limit=500)
    im, _ = quad(lambda u: integrand(u).imag, ulo, uhi, limit=500) if s.imag else (0.0, 0.0)
    return complex(re, im)


def phi_j(spec: ResonatorSpec, s: complex, j: int,
          p_cap: float = F_SIGMA_PCAP) -> complex:
    """phi_j(s) = sum_p log^j p sum_n n^(j-1) (r(p) p^-s)^n, exact over the
    enumerated support; F_SIGMA adds a density-integral tail past p_cap,
    and window families past PHI_ENUM_CAP switch to the integral form."""
    if j not in (0, 1, 2, 3):
        raise ValueError("j in 0..3")
    s = complex(s)
    w = spec.window()
    if w is None:
        val = _phi_enumerated(spec, s, j, p_cap)
        return val + _phi_f_sigma_tail(spec, s, j, p_cap)
    if w[1] > PHI_ENUM_CAP:
        return _phi_window_integral(spec, s, j)
    return _phi_enumerated(spec, s, j, None)


def phi_method(spec: ResonatorSpec) -> str:
    w = spec.window()
    if w is None:
        return "enumerated+tail"
    return "pnt_integral" if w[1] > PHI_ENUM_CAP else "exact"


def zeta_log_deriv(sigma: float) -> float:
    """zeta'(sigma)/zeta(sigma) on (0, 1) u (1, inf), for cross-checks."""
    import mpmath

    return float(mpmath.zeta(sigma, derivative=1) / mpmath.zeta(sigma))


# ----------------------------------------------------------------------
# Saddle solving and closed-form estimates
# ----------------------------------------------------------------------


@dataclass
class SaddleReport:
    spec: ResonatorSpec
    sigma: float
    phi: tuple[float, float, float, float]
    log_n: float
    log_sum_estimate: float
    method: str


def decreasing_bracket(spec_builder, lo: float, hi: float,
                       grid: int = 48) -> tuple[float, float]:
    """Left edge of the decreasing branch of phi_1(sigma).

    Families whose coefficient size itself vanishes at the left endpoint
    (the p^-sigma window: lambda -> 0 as sigma -> 1/2) make phi_1
    unimodal; the saddle equation's meaningful root lies right of the
    peak.  Returns (argmax, hi) from a coarse grid scan.
    """
    build = spec_builder if callable(spec_builder) else (lambda _s: spec_builder)
    sigmas = np.linspace(lo, hi, grid)
    vals = [phi_j(build(float(s)), float(s), 1).real for s in sigmas]
    return float(sigmas[int(np.argmax(vals))]), hi


def solve_sigma(spec_builder: Callable[[float], ResonatorSpec] | ResonatorSpec,
                log_n: float, bracket: tuple[float, float],
                residual_tol: float = 1e-7,
                auto_bracket: bool = True) -> SaddleReport:
    """Solve phi_1(sigma) = log N by bisection on a decreasing phi_1.

    spec_builder may be a fixed spec or a callable sigma -> spec for
    families whose coefficients depend on the saddle location; each
    iterate then rebuilds the coefficients.  With auto_bracket, a failed
    bracket is retried from the peak of phi_1 (see decreasing_bracket).
    """
    if callable(spec_builder):
        build = spec_builder
    else:
        build = lambda _s: spec_builder

    cache: dict[float, ResonatorSpec] = {}

    def p1(sig: float) -> float:
        key = round(sig, 9)
        sp = cache.get(key)
        if sp is None:
            sp = build(sig)
            cache[key] = sp
        return phi_j(sp, sig, 1).real

    lo, hi = bracket
    flo, fhi = p1(lo), p1(hi)
    if not (fhi <= log_n <= flo) and auto_bracket:
        lo, hi = decreasing_bracket(build, lo, hi)
        flo, fhi = p1(lo), p1(hi)
    if not (fhi <= log_n <= flo):
        raise BracketError(
            f"log N = {log_n} outside [phi1({hi}) = {fhi:.4g}, phi1({lo}) = {flo:.4g}]"
        )
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if p1(mid) > log_n:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    sig = 0.5 * (lo + hi)
    if abs(p1(sig) - log_n) > residual_tol:
        raise BracketError(f"saddle residual {abs(p1(sig) - log_n):.3g} above tolerance")
    sp = build(sig)
    phis = tuple(phi_j(sp, sig, j).real for j in range(4))
    rep = SaddleReport(spec=sp, sigma=sig, phi=phis, log_n=log_n,
                       log_sum_estimate=0.0, method=phi_method(sp))
    rep.log_sum_estimate = saddle_sum_estimate(rep, weighted=False)
    return rep


def saddle_sum_estimate(report: SaddleReport, weighted: bool = False) -> float:
    """Log of the closed-form saddle estimate.

    Unweighted: sigma log N + phi_0 - log sigma - (1/2) log(2 pi phi_2).
    Weighted (sum n r(n) with the report solved at log of the half-length):
    (1+sigma) log N + phi_0 - log(1+sigma) - (1/2) log(2 pi phi_2).
    """
    sig, (p0, _, p2, _) = report.sigma, report.phi
    if p2 <= 0:
        raise ValueError("empty support: phi_2 = 0 leaves no saddle mass")
    if weighted:
        return (1 + sig) * report.log_n + p0 - math.log1p(sig) - 0.5 * math.log(2 * math.pi * p2)
    return sig * report.log_n + p0 - math.log(sig) - 0.5 * math.log(2 * math.pi * p2)


# ----------------------------------------------------------------------
# Numerical Perron integration (independent check)
# ----------------------------------------------------------------------

PERRON_PANEL_CAP = 10**6


def perron_numeric(spec: ResonatorSpec, n_limit: float, sigma: float,
                   t_max: float) -> complex:
    """(1/2 pi) int_{-T}^{T} exp(phi_0(sigma+it)) N^(sigma+it)/(sigma+it) dt.

    Panel width 2 pi / log(p_max) resolves the fastest oscillation of the
    Euler factors; N^it oscillation is handled inside each panel by the
    adaptive rule.  Both half-axes are integrated independently so the
    imaginary part is a genuine error indicator.
    """
    ps, _ = spec.support_values(limit=PHI_ENUM_CAP)
    if len(ps) == 0:
        raise ValueError("empty support")
    p_max = float(ps[-1])
    width = 2 * math.pi / math.log(p_max)
    n_panels = int(math.ceil(2 * t_max / width))
    if n_panels > PERRON_PANEL_CAP:
        raise BudgetExceeded(f"{n_panels} panels exceed cap {PERRON_PANEL_CAP}")
    log_n = math.log(n_limit)

    def integrand(t: float) -> complex:
        s = complex(sigma, t)
        return np.exp(phi_j(spec, s, 0) + s * log_n) / s

    total = 0.0 + 0.0j
    edges = np.linspace(-t_max, t_max, n_panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        re, _ = quad(lambda t: integrand(t).real, a, b, limit=80)
        im, _ = quad(lambda t: integrand(t).imag, a, b, limit=80)
        total += complex(re, im)
    return total / (2 * math.pi)


# ----------------------------------------------------------------------
# Implicit parameter system (composite-moduli short-sum pipeline)
# ----------------------------------------------------------------------


@dataclass
class ImplicitSystemSolution:
    """Simultaneous solution of the four coupled parameter conditions:

    a. u_bar = sqrt(M P) / (eta e^eta (1+eps) sqrt 2)
    b. u_bar = floor(u eta/(1+eta))
    c. u_bar = (log N/log P) eta/(1+eta) + omega, 0 <= omega < 2/log P
    d. P > M (log P ~ log M asymptotically)
    """

    p: float
    eta: float
    sigma: float
    u_bar: int
    omega: float
    epsilon: float
    m: float
    u: float

    def check(self, tol: float = 1e-6) -> dict:
        log_p = math.log(self.p)
        a_rhs = math.sqrt(self.m * self.p) / (self.eta * math.exp(self.eta)
                                              * (1 + self.epsilon) * math.sqrt(2))
        b_rhs = math.floor(self.u * self.eta / (1 + self.eta))
        log_n = self.u * math.log(self.m)
        omega = self.u_bar - (log_n / log_p) * self.eta / (1 + self.eta)
        return {
            "a": abs(self.u_bar - a_rhs) <= tol * abs(self.u_bar),
            "b": self.u_bar == b_rhs,
            "c": 0.0 <= omega < 2.0 / log_p,
            "d": self.p > self.m,
            "omega": omega,
        }


class NoSolution(RuntimeError):
    pass


def solve_implicit_system(m: float, u: float, epsilon: float,
                          eta_step: float = 1e-4) -> ImplicitSystemSolution:
    """Scan eta upward, defining P(eta) by matching conditions a = b, and
    stop at the first eta where condition c's omega falls in [0, 2/log P).

    The scan covers (0, 2 log M]; conditions a-d are re-validated on the
    returned solution.  Raises NoSolution when the window is never hit
    (the floor jump can leap over it at small scales).
    """
    if u < 2 or m < 100:
        raise ValueError("requires u >= 2 and M >= 100")
    log_m = math.log(m)
    log_n = u * log_m
    eta0 = max(eta_step, log_m - 4 * math.log(log_m))
    eta_hi = 2 * log_m
    eta = eta0
    while eta <= eta_hi:
        ubar = math.floor(u * eta / (1 + eta))
        if ubar >= 1:
            s = ubar * eta * math.exp(eta) * (1 + epsilon) * math.sqrt(2)
            p = s * s / m
            if p > m:
                log_p = math.log(p)
                omega = ubar - (log_n / log_p) * eta / (1 + eta)
                if 0.0 <= omega < 2.0 / log_p:
                    sol = ImplicitSystemSolution(
                        p=p, eta=eta, sigma=eta / log_p, u_bar=int(ubar),
                        omega=omega, epsilon=epsilon, m=m, u=u,
                    )
                    checks = sol.check()
                    if all(checks[k] for k in "abcd"):
                        return sol
        eta += eta_step
    raise NoSolution(f"no simultaneous solution for M={m}, u={u}, eps={epsilon}")


def solve_implicit_system_auto(m: float, u: float, eps0: float | None = None,
                               eta_step: float = 1e-4) -> ImplicitSystemSolution:
    """Try a ladder of epsilon values downward from eps0 (default 10/log M)
    and return the first exact solution.

    The asymptotic construction allows any epsilon tending to 0 slowly; at
    finite scale a given epsilon can just miss the capture window, so the
    pipeline takes the largest epsilon on the ladder that works.
    """
    if eps0 is None:
        eps0 = 10.0 / math.log(m)
    last_err: Exception | None = None
    for k in range(18):
        eps = eps0 * 2.0**-k
        try:
            return solve_implicit_system(m, u, eps, eta_step=eta_step)
        except NoSolution as e:
            last_err = e
    raise NoSolution(f"epsilon ladder exhausted for M={m}, u={u}") from last_err
