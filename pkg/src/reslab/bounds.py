"""Regime selection and log-scale lower bounds for the character-sum maximum.

Everything here works with log q and log N as plain floats, so
astronomically large moduli are in range.  Each pipeline returns a
BoundReport whose log_lower_bound is the main term of the regime's
display, with asymptotic=True flagging that (1 + o(1)) factors are
reported as their main term and no invented constants are inserted.

Regimes (prime_like moduli get the full menu, general moduli the
composite pipelines):

  TINY_N      log N below log_2^2 q / log_3^10 q   (dormant at float scale)
  THM1        prime-like, log N < sqrt(log q)      (smooth-count bound)
  THM2_SMALL  general q, B log_2 q < log N < log_2^3 q log_3 q
  THM2_LARGE  general q, up to log N < sqrt(log q)
  THM3        sqrt(log q) <= log N < 4 sqrt(log q log_2 q) log_3 q
  THM4        above that, N = q^theta with theta < 1 - eps

At exactly representable scales the TINY_N gate is empty (the gate
log_2^2 q/log_3^10 q only exceeds 1 once log_2 q > ~e^17, past float
range), so the selector never returns it; the pipeline stays testable
through the explicit check_regime=False escape.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from . import characters, saddle, smooth, specfun
from .primes import min_prime_theta_exceeds
from .resonators import ResonatorSpec, tail_condition_check

REGIMES = ("TINY_N", "THM1", "THM1_DUAL", "THM2_SMALL", "THM2_LARGE",
           "THM3", "THM3_DUAL", "THM4", "THM4_DUAL")

DEFAULT_B = 20.0
DEFAULT_EPS_C = 10.0
DEFAULT_THETA_GUARD = 0.01


class RegimeError(ValueError):
    pass


def _l2(logq: float) -> float:
    return math.log(logq)


def _l3(logq: float) -> float:
    return math.log(math.log(logq))


@dataclass
class BoundReport:
    """One evaluated lower bound, log scale, with its parameter record."""

    regime: str
    log_lower_bound: float
    parameters: dict = field(default_factory=dict)
    smoothness_claim: dict | None = None
    exact_delta: float | None = None
    asymptotic: bool = True
    predicted_form: str = ""

    def to_json(self) -> str:
        payload = {
            "regime": self.regime,
            "log_lower_bound": self.log_lower_bound,
            "parameters": self.parameters,
            "smoothness_claim": self.smoothness_claim,
            "exact_delta": self.exact_delta,
            "asymptotic": self.asymptotic,
            "predicted_form": self.predicted_form,
        }
        return json.dumps(payload, sort_keys=True)

    def to_text(self) -> str:
        rows = [("regime", self.regime),
                ("log_lower_bound", f"{self.log_lower_bound:.6g}"),
                ("asymptotic", str(self.asymptotic))]
        for k, v in sorted(self.parameters.items()):
            rows.append((k, f"{v:.6g}" if isinstance(v, float) else str(v)))
        if self.smoothness_claim:
            for k, v in sorted(self.smoothness_claim.items()):
                rows.append((f"smooth.{k}", f"{v:.6g}" if isinstance(v, float) else str(v)))
        if self.exact_delta is not None:
            rows.append(("exact_delta", f"{self.exact_delta:.6g}"))
        if self.predicted_form:
            rows.append(("form", self.predicted_form))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


# ----------------------------------------------------------------------
# Regime selection
# ----------------------------------------------------------------------


def tiny_n_gate(logq: float) -> float:
    return _l2(logq) ** 2 / _l3(logq) ** 10


def thm4_gate(logq: float) -> float:
    return 4.0 * math.sqrt(logq * _l2(logq)) * _l3(logq)


def select_regime(logq: float, logn: float, prime_like: bool = True,
                  b_const: float = DEFAULT_B,
                  theta_guard: float = DEFAULT_THETA_GUARD) -> str:
    """Choose the unique pipeline for (log q, log N).

    Boundaries (documented order of checks): the THM4 gate at
    4 sqrt(log q log_2 q) log_3 q, the THM3 entry at sqrt(log q), the
    THM2 small/large split at log_2^3 q log_3 q, the TINY_N gate.  For
    prime_like=True the selector is total on log q >= 1000,
    1 <= log N <= (1 - theta_guard) log q; for general q the range
    log N <= B log_2 q has no pipeline and raises.
    """
    if logq < 3:
        raise RegimeError("log q too small")
    if logn < 1 or logn > (1 - theta_guard) * logq:
        raise RegimeError(f"log N = {logn} outside (1, (1-{theta_guard}) log q)")
    if logn >= thm4_gate(logq):
        return "THM4"
    if logn >= math.sqrt(logq):
        return "THM3"
    if prime_like:
        return "THM1" if logn >= tiny_n_gate(logq) else "TINY_N"
    if logn <= b_const * _l2(logq):
        raise RegimeError(
            "general moduli have no pipeline below log N <= B log_2 q "
            f"(= {b_const * _l2(logq):.3g})"
        )
    split = _l2(logq) ** 3 * _l3(logq)
    return "THM2_SMALL" if logn < split else "THM2_LARGE"


# ----------------------------------------------------------------------
# Shared pieces
# ----------------------------------------------------------------------


def m_minimal(logq: float, exact_limit: int = 10**9) -> tuple[float, str]:
    """Minimal prime M with theta(M) > log q (exact below exact_limit)."""
    if logq < math.log(3):
        raise ValueError("log q >= log 3")
    return min_prime_theta_exceeds(logq, exact_limit=exact_limit)


def _log_psi(logn: float, y: float) -> float:
    """log Psi(e^logn, y) through the saddle estimate (log-scale x)."""
    if logn <= 0:
        return 0.0
    if y >= math.exp(min(logn, 700.0)) and logn <= 700:
        return logn  # y >= x: every integer counts
    alpha = _alpha_from_logx(logn, y)
    return (
        alpha * logn
        + smooth.zeta_smooth_psi_j(alpha, y, 0)
        - math.log(alpha)
        - 0.5 * math.log(2 * math.pi * smooth.zeta_smooth_psi_j(alpha, y, 2))
    )


def _alpha_from_logx(logx: float, y: float) -> float:
    lo, hi = 1e-8, 4.0
    while smooth.zeta_smooth_psi_j(hi, y, 1) > logx:
        hi *= 2
        if hi > 1e6:
            break
    while smooth.zeta_smooth_psi_j(lo, y, 1) < logx:
        lo /= 2
        if lo < 1e-300:
            raise RuntimeError("alpha bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if smooth.zeta_smooth_psi_j(mid, y, 1) > logx:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------
# Pipeline: smooth-count regime (prime-like moduli, log N < sqrt(log q))
# ----------------------------------------------------------------------


def _sigma_equation_rhs(sigma: float, logq: float, dual: bool) -> float:
    sp = specfun.sigma_params(sigma)
    log_g = math.log(sp.g_sigma)
    # log N = (log q)^(1-sigma) G^sigma / (2 (1-sigma)), dual denominator
    # 2^(2-sigma) (1-sigma)
    val = (1 - sigma) * math.log(logq) + sigma * log_g - math.log1p(-sigma)
    val -= (2 - sigma) * math.log(2) if dual else math.log(2)
    return val


def solve_sigma_equation(logq: float, logn: float, dual: bool = False) -> float:
    """Solve the explicit sigma equation of the smooth-count regime.

    The right side is U-shaped in sigma (it blows up at both ends), so
    the meaningful root is the one left of the minimum, where the right
    side decreases as sigma grows; below the minimum there is no
    solution (sub-asymptotic dead zone) and this raises.
    """
    target = math.log(logn)
    lo, hi = 0.5 + 1e-6, 1.0 - 1e-6
    import numpy as np

    grid = np.linspace(lo, hi, 256)
    vals = [_sigma_equation_rhs(float(s), logq, dual) for s in grid]
    kmin = int(np.argmin(vals))
    if vals[kmin] > target:
        raise RegimeError(
            f"log N = {logn} below the sigma equation's minimum "
            f"{math.exp(vals[kmin]):.4g}; smooth-count regime unavailable"
        )
    # decreasing branch on [lo, grid[kmin]]
    a, b = lo, float(grid[kmin])
    if _sigma_equation_rhs(a, logq, dual) < target:
        raise RegimeError("log N above the sigma equation's range")
    for _ in range(200):
        mid = 0.5 * (a + b)
        if _sigma_equation_rhs(mid, logq, dual) > target:
            a = mid
        else:
            b = mid
        if b - a < 1e-14:
            break
    return 0.5 * (a + b)


def bound_theorem1(logq: float, logn: float, dual: bool = False,
                   check_regime: bool = True) -> BoundReport:
    """Delta(N, q) >= Psi(N, kappa(sigma) log q) in the main case; the dual
    long-sum case gets the sqrt(q)/N prefactor and half the smoothness."""
    if check_regime:
        if not (tiny_n_gate(logq) <= logn < math.sqrt(logq)):
            raise RegimeError("outside the smooth-count range")
    sigma = solve_sigma_equation(logq, logn, dual=dual)
    sp = specfun.sigma_params(sigma)
    y_eff = (0.5 if dual else 1.0) * sp.kappa_sigma * logq
    log_psi = _log_psi(logn, y_eff)
    params = {
        "sigma": sigma,
        "kappa": sp.kappa_sigma,
        "c_sigma": sp.c_sigma,
        "g_sigma": sp.g_sigma,
        "m_scale": (0.5 if dual else 1.0) * logq,
        "residual": abs(math.exp(_sigma_equation_rhs(sigma, logq, dual)) - logn),
    }
    claim = {"log_n": logn, "y_effective": y_eff}
    if dual:
        lb = 0.5 * logq - logn + log_psi
        form = "sqrt(q)/N * Psi(N, kappa(sigma')/2 * log q)"
    else:
        lb = log_psi
        form = "Psi(N, kappa(sigma) log q)"
    return BoundReport(regime="THM1_DUAL" if dual else "THM1",
                       log_lower_bound=lb, parameters=params,
                       smoothness_claim=claim, predicted_form=form)


def bound_tiny_n(logq: float, logn: float, dual: bool = False,
                 check_regime: bool = True,
                 run_tail_check: bool = True) -> BoundReport:
    """Very short sums: Delta(N,q) >= (1+o(1)) Psi(N, log q); the dual form
    carries sqrt(q)/N and the loglog factor.

    The gate log N < log_2^2 q/log_3^10 q first exceeds 1 beyond float
    scale, so this pipeline is reachable only with check_regime=False.
    """
    if check_regime and logn >= tiny_n_gate(logq):
        raise RegimeError("log N above the tiny-N gate")
    spec = ResonatorSpec.tiny_n(logq)
    params: dict = {"window_hi": spec.window()[1]}
    if run_tail_check:
        ps, vals = spec.support_values()
        rep = tail_condition_check(
            [(int(p), v * v) for p, v in zip(ps, vals)], logy=logq - 2 * logn
        )
        params.update(tail_cond1=rep.cond1, tail_margin1=rep.margin1,
                      tail_cond2=rep.cond2, tail_margin2=rep.margin2)
    log_psi = _log_psi(logn, logq)
    claim = {"log_n": logn, "y_effective": logq}
    if dual:
        l2, l3 = _l2(logq), math.log(logn / _l2(logq)) if logn > _l2(logq) else 1.0
        lb = 0.5 * logq - logn + math.log(l2 / l3) + log_psi
        form = "sqrt(q) loglog q / log(log N/loglog q) * Psi(N, log q)/N"
    else:
        lb = log_psi
        form = "Psi(N, log q)"
    return BoundReport(regime="TINY_N", log_lower_bound=lb, parameters=params,
                       smoothness_claim=claim, predicted_form=form)


# ----------------------------------------------------------------------
# Pipeline: general moduli, short sums
# ----------------------------------------------------------------------


def bound_theorem2(logq: float, logn: float, check_regime: bool = True,
                   b_const: float = DEFAULT_B) -> BoundReport:
    """Composite-friendly short-sum bounds.

    Small range: the implicit (P, eta, u_bar) system drives
        N^(1/2 + ub/(2u')) (log N)^-ub (e/sqrt 2)^ub,  u' = u eta/(1+eta).
    Large range: the p^-sigma window saddle gives
        N (log N)^-u (e/sqrt(2 s'(2 s'-1)))^u,  log N = (log q)^(1-s').
    """
    if check_regime:
        if not (b_const * _l2(logq) < logn < math.sqrt(logq)):
            raise RegimeError("outside the composite short-sum range")
    split = _l2(logq) ** 3 * _l3(logq)
    m, m_method = m_minimal(logq)
    log_m = math.log(m)
    u = logn / log_m
    if logn < split:
        sol = saddle.solve_implicit_system_auto(m, u)
        u_prime = u * sol.eta / (1 + sol.eta)
        ub = sol.u_bar
        lb = ((0.5 + ub / (2 * u_prime)) * logn - ub * math.log(logn)
              + ub * (1.0 - 0.5 * math.log(2)))
        lb_eps = lb - ub * math.log1p(sol.epsilon)
        params = {
            "m": m, "m_method": m_method, "u": u, "u_prime": u_prime,
            "u_bar": ub, "eta": sol.eta, "p": sol.p, "sigma": sol.sigma,
            "omega": sol.omega, "epsilon": sol.epsilon,
            "log_bound_with_eps": lb_eps,
        }
        return BoundReport(regime="THM2_SMALL", log_lower_bound=lb,
                           parameters=params,
                           predicted_form="N^(1/2+ub/2u') (log N)^-ub (e/sqrt2)^ub")
    sigma_prime = 1.0 - math.log(logn) / _l2(logq)
    if not (0.5 < sigma_prime < 1.0):
        raise RegimeError("log N incompatible with sigma' in (1/2, 1)")
    u2 = logn / _l2(logq)
    lb = logn - u2 * math.log(logn) + u2 * (
        1.0 - 0.5 * math.log(2 * sigma_prime * (2 * sigma_prime - 1))
    )
    params = {"m": m, "m_method": m_method, "u": u2, "sigma_prime": sigma_prime,
              "epsilon": DEFAULT_EPS_C / _l2(logq)}
    # parameter record: the actual saddle of the window resonator
    try:
        eps = DEFAULT_EPS_C / _l2(logq)
        rep = saddle.solve_sigma(
            lambda s: ResonatorSpec.window_psigma(m, s, eps=eps),
            logn, (0.5 + 1 / _l2(logq), 1 - 1e-6))
        params["sigma_saddle"] = rep.sigma
        params["phi0"] = rep.phi[0]
    except Exception as exc:  # saddle record is informative, not load-bearing
        params["sigma_saddle_error"] = str(exc)
    return BoundReport(regime="THM2_LARGE", log_lower_bound=lb, parameters=params,
                       predicted_form="N (log N)^-u (e/sqrt(2s'(2s'-1)))^u")


# ----------------------------------------------------------------------
# Pipeline: the moderate range and long sums
# ----------------------------------------------------------------------


def bound_theorem3(logq: float, logn: float, dual: bool = False,
                   check_regime: bool = True) -> BoundReport:
    """sqrt(N) exp(A (tau + tau') sqrt(log q/loglog q)) and its dual.

    tau comes from log N = tau sqrt(log q log_2 q) via the resonator
    length x (x = q/N main, sqrt(q/N)/log q dual); A inverts the
    exponential integral (with the dual's sqrt 2 twist), tau' follows.
    """
    l2 = _l2(logq)
    tau = logn / math.sqrt(logq * l2)
    if check_regime:
        lo = math.exp(-_l3(logq) ** 2)
        hi = 4 * _l3(logq)
        if not (lo <= tau <= hi):
            raise RegimeError(f"tau = {tau:.4g} outside [{lo:.3g}, {hi:.3g}]")
    logx = (logq - logn) if not dual else 0.5 * (logq - logn) - l2
    lam = math.sqrt(logx * math.log(logx))
    target = logn / lam  # = E1(A); the dual's sqrt2 tau equals the same ratio
    mp = specfun.solve_A(target if not dual else target)
    if dual:
        # definitionally sqrt(2) tau = E1(A) with lam built from the dual x
        tau_d = target / math.sqrt(2)
        coeff = mp.a * (tau_d + mp.tau_prime / math.sqrt(2))
        lb = 0.5 * (logq - logn) + coeff * math.sqrt(logq / l2)
        form = "sqrt(q/N) exp(A (tau + tau'/sqrt2) sqrt(log q/loglog q))"
        params = {"tau": tau_d, "tau_prime": mp.tau_prime, "a": mp.a,
                  "lambda": lam, "log_x": logx}
    else:
        coeff = mp.a * (target + mp.tau_prime)
        lb = 0.5 * logn + coeff * math.sqrt(logq / l2)
        form = "sqrt(N) exp(A (tau + tau') sqrt(log q/loglog q))"
        params = {"tau": target, "tau_prime": mp.tau_prime, "a": mp.a,
                  "lambda": lam, "log_x": logx}
    params["tau_nominal"] = tau
    return BoundReport(regime="THM3_DUAL" if dual else "THM3",
                       log_lower_bound=lb, parameters=params,
                       predicted_form=form)


def bound_theorem4(logq: float, theta: float, dual: bool = False,
                   check_regime: bool = True,
                   theta_guard: float = DEFAULT_THETA_GUARD) -> BoundReport:
    """sqrt(N) exp(sqrt((1-theta) log q / loglog q)), dual with the extra
    1/sqrt 2; N = q^theta."""
    logn = theta * logq
    if check_regime:
        if theta >= 1 - theta_guard:
            raise RegimeError("theta too close to 1")
        if logn < thm4_gate(logq):
            raise RegimeError("log N below the long-sum gate")
    l2 = _l2(logq)
    logx = (logq - logn) if not dual else 0.5 * (logq - logn) - math.log(2) - l2
    lam = math.sqrt(logx * math.log(logx))
    z_log = 0.8 * min(logn, logx)
    if dual:
        lb = 0.5 * (logq - logn) + math.sqrt((1 - theta) * logq / (2 * l2))
        form = "sqrt(q/N) exp(sqrt((1-theta) log q/(2 loglog q)))"
    else:
        lb = 0.5 * logn + math.sqrt((1 - theta) * logq / l2)
        form = "sqrt(N) exp(sqrt((1-theta) log q/loglog q))"
    params = {"theta": theta, "lambda": lam, "log_x": logx, "log_z": z_log,
              "lambda_sq_over_2logq": lam * lam / (2 * logq)}
    return BoundReport(regime="THM4_DUAL" if dual else "THM4",
                       log_lower_bound=lb, parameters=params,
                       predicted_form=form)


def bound_auto(logq: float, logn: float | None = None,
               theta: float | None = None, dual: bool = False,
               prime_like: bool = True) -> BoundReport:
    """Route to the right pipeline from (log q, log N | theta)."""
    if (logn is None) == (theta is None):
        raise ValueError("pass exactly one of logn, theta")
    if logn is None:
        logn = theta * logq
    regime = select_regime(logq, logn, prime_like=prime_like)
    if regime == "THM4":
        return bound_theorem4(logq, logn / logq, dual=dual)
    if regime == "THM3":
        return bound_theorem3(logq, logn, dual=dual)
    if regime == "TINY_N":
        return bound_tiny_n(logq, logn, dual=dual)
    if regime == "THM1":
        return bound_theorem1(logq, logn, dual=dual)
    return bound_theorem2(logq, logn)


# ----------------------------------------------------------------------
# Exact verification at desk scale
# ----------------------------------------------------------------------


def verify_against_exact(q: int, n_limit: int, spec: ResonatorSpec,
                         mode: str = "first_moment") -> BoundReport:
    """Exact resonance ratio against the exact maximum for small moduli.

    The report's log_lower_bound is the log of the exact weighted-mean
    ratio; exact_delta is Delta(N, q) itself.  The weighted-mean
    inequality (ratio <= Delta, or Delta^2 in second-moment mode) is
    asserted here -- a violation is a correctness bug, not a data point.
    """
    group = characters.build_group(q)
    x = max(2, group.phi // max(1, n_limit))
    ratio = characters.resonance_ratio_exact(group, spec, x, n_limit, mode)
    delta, witness = characters.delta_exact(group, n_limit)
    target = delta**2 if mode == "second_moment" else delta
    tol = 1e-9 * max(1.0, target)
    if ratio > target + tol:
        raise AssertionError(
            f"weighted-mean inequality violated: {ratio} > {target} "
            f"(q={q}, N={n_limit}, mode={mode})"
        )
    params = {
        "mode": mode, "x": x, "ratio": ratio, "witness": witness,
        "spec": spec.to_text(),
    }
    return BoundReport(
        regime="EXACT", asymptotic=False,
        log_lower_bound=math.log(ratio) if ratio > 0 else -math.inf,
        parameters=params, exact_delta=delta,
        predicted_form="weighted-mean ratio <= Delta" + ("^2" if mode == "second_moment" else ""),
    )


# ----------------------------------------------------------------------
# Boundary continuity table
# ----------------------------------------------------------------------


def boundary_table(logq: float, flank: float = 0.1) -> list[dict]:
    """Adjacent-pipeline log-bounds at the regime crossovers.

    Rows are evaluated at the crossover and at (1 -+ flank) times it;
    the exact THM2/THM3 crossover sits on THM2_LARGE's removable
    sigma' = 1/2 degeneracy, so the comparison ratio is reported at the
    flanks.  ratio = |log-bound difference| / main exponent.
    """
    rows = []
    # THM2 <-> THM3 at log N = sqrt(log q)
    b = math.sqrt(logq)
    for mult in (1 - flank, 1 + flank):
        logn = b * mult
        try:
            lb2 = bound_theorem2(logq, logn, check_regime=False).log_lower_bound
        except RegimeError:
            continue
        r3 = bound_theorem3(logq, logn, check_regime=False)
        lb3 = r3.log_lower_bound
        expo = max(abs(lb3 - 0.5 * logn), abs(lb2 - 0.5 * logn), 1.0)
        rows.append({
            "boundary": "THM2/THM3", "logn": logn,
            "log_bound_a": lb2, "log_bound_b": lb3,
            "ratio": abs(lb2 - lb3) / expo,
        })
    # THM3 <-> THM4 at log N = 4 sqrt(log q log_2 q) log_3 q
    b = thm4_gate(logq)
    for mult in (1 - flank, 1 + flank):
        logn = b * mult
        r3 = bound_theorem3(logq, logn, check_regime=False)
        r4 = bound_theorem4(logq, logn / logq, check_regime=False)
        expo = max(abs(r4.log_lower_bound - 0.5 * logn), 1.0)
        rows.append({
            "boundary": "THM3/THM4", "logn": logn,
            "log_bound_a": r3.log_lower_bound, "log_bound_b": r4.log_lower_bound,
            "ratio": abs(r3.log_lower_bound - r4.log_lower_bound) / expo,
        })
    return rows
