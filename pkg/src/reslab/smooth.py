"""Smooth-number counting and the saddle-point estimate.

Psi(x, y) counts n <= x whose prime factors are all <= y (the boundary
prime is included everywhere in this package, in the generating function
as well: zeta(s, y) = prod_{p <= y} (1 - p^-s)^-1).  The exact count is an
oracle here, so it refuses rather than approximates beyond its budget.

psi_j(s, y) are the derived prime sums (-1)^j d^j/ds^j log zeta(s, y); the
saddle point alpha solves psi_1(alpha, y) = log x and feeds the estimate

    Psi(x,y) ~ x^alpha zeta(alpha,y) / (alpha sqrt(2 pi psi_2(alpha,y))).

The Dickman function rho(u) is integrated from u rho'(u) = -rho(u-1) and
describes log Psi(x, x^(1/u)) at large scales.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from . import primes

PSI_X_CAP = 10**12
PSI_STATE_BUDGET = 3 * 10**7


class BudgetExceeded(Exception):
    """Raised when an exact computation would exceed its stated budget."""


# ----------------------------------------------------------------------
# Exact Psi(x, y)
# ----------------------------------------------------------------------


class _SmoothCounter:
    """Memoized recursive counter for n <= x with prime factors among
    the first k primes.  Memoization keyed on (floor(x), k); confined to
    one instance, so unshared use is thread-safe (documented contract).
    """

    def __init__(self, y: int):
        self.plist = primes.primes_up_to(max(2, int(y)))
        self.sieve_max = max(2, int(y))
        self.memo: dict[tuple[int, int], int] = {}

    def count(self, x: int, k: int) -> int:
        # iterative post-order evaluation; explicit stack avoids the
        # recursion limit on the k-descent chain
        plist = self.plist
        memo = self.memo
        ONE, TWO = 0, 1
        stack = [(int(x), int(k), ONE)]
        results: list[int] = []
        while stack:
            x, k, phase = stack.pop()
            if phase == ONE:
                if x < 1:
                    results.append(0)
                    continue
                k = min(k, bisect_right(plist, x))
                if k == 0:
                    results.append(1)
                    continue
                if x <= self.sieve_max and k == bisect_right(plist, x):
                    results.append(int(x))
                    continue
                key = (x, k)
                hit = memo.get(key)
                if hit is not None:
                    results.append(hit)
                    continue
                if len(memo) > PSI_STATE_BUDGET:
                    raise BudgetExceeded("smooth-count state budget exceeded")
                stack.append((x, k, TWO))
                stack.append((x // plist[k - 1], k, ONE))
                stack.append((x, k - 1, ONE))
            else:
                b = results.pop()
                a = results.pop()
                memo[(x, k)] = a + b
                results.append(a + b)
        return results[0]


def psi_exact(x: int, y: int) -> int:
    """Exact Psi(x, y) by memoized recursion over the prime list."""
    x = int(x)
    y = int(y)
    if x < 1 or y < 2:
        raise ValueError("requires x >= 1 and y >= 2")
    if x > PSI_X_CAP:
        raise BudgetExceeded(f"x = {x} beyond exact budget {PSI_X_CAP}")
    if y >= x:
        return x
    counter = _SmoothCounter(y)
    return counter.count(x, len(counter.plist))


def psi_f_exact(x: int, y: int, f_prime) -> float:
    """Weighted count sum_{n <= x, y-smooth} f(n) for completely
    multiplicative f given by its values on primes (callable p -> f(p)).

    DFS over prime-power exponent tuples; cost is the number of y-smooth
    integers <= x, so the budget guard applies.
    """
    x = int(x)
    if x < 1 or y < 2:
        raise ValueError("requires x >= 1 and y >= 2")
    if x > PSI_X_CAP:
        raise BudgetExceeded("beyond exact budget")
    ps = primes.primes_up_to(min(int(y), x))
    fvals = [float(f_prime(int(p))) for p in ps]
    total = 0.0
    comp = 0.0  # Kahan compensation
    visited = 0

    def add(v: float):
        nonlocal total, comp
        t = total + (v - comp)
        comp = (t - total) - (v - comp)
        total = t

    # zero-valued prime branches are skipped entirely (subtree sums to 0)
    def dfs(i: int, n: int, val: float):
        nonlocal visited
        visited += 1
        if visited > PSI_STATE_BUDGET:
            raise BudgetExceeded("smooth-sum enumeration budget exceeded")
        add(val)
        for j in range(i, len(ps)):
            p = int(ps[j])
            if n * p > x:
                break
            if fvals[j] == 0.0:
                continue
            m, v = n * p, val * fvals[j]
            while m <= x:
                dfs(j + 1, m, v)
                m *= p
                v *= fvals[j]

    dfs(0, 1, 1.0)
    return total


# ----------------------------------------------------------------------
# zeta(s, y) prime sums and the saddle point
# ----------------------------------------------------------------------


PSI_J_ENUM_CAP = 10**8


def _psi_j_inner(t: np.ndarray, lp: np.ndarray, j: int) -> np.ndarray:
    one_m = 1.0 - t
    if j == 0:
        return -np.log(one_m)
    if j == 1:
        return lp * t / one_m
    if j == 2:
        return lp**2 * t / one_m**2
    return lp**3 * t * (1.0 + t) / one_m**3


def _psi_j_integral(s: float, y: float, j: int) -> float:
    """Prime-density approximation of psi_j for y beyond enumeration:
    sum over p becomes int_2^y (dt/log t), exact inner geometric sums."""
    from scipy.integrate import quad

    def integrand(u: float) -> float:
        t = np.array([math.exp(-s * u)])
        lp = np.array([u])
        return float(_psi_j_inner(t, lp, j)[0]) / u * math.exp(u)

    val, _ = quad(integrand, math.log(2.0), math.log(y), limit=500)
    return float(val)


def zeta_smooth_psi_j(s: float, y: float, j: int) -> float:
    """psi_j(s, y): j = 0 gives log zeta(s, y), j >= 1 the sign-flipped
    derivatives, as explicit prime-power sums in closed geometric form.

    Exact prime enumeration up to PSI_J_ENUM_CAP; beyond, the prime sum
    is replaced by its density integral (tagged by psi_j_method).
    """
    if s <= 0:
        raise ValueError("divergent for s <= 0")
    if j not in (0, 1, 2, 3):
        raise ValueError("j must be 0..3")
    if y < 2:
        return 0.0
    if y > PSI_J_ENUM_CAP:
        return _psi_j_integral(s, y, j)
    ps = primes.primes_up_to(int(y))
    if len(ps) == 0:
        return 0.0
    lp = primes.log_primes_up_to(int(y))
    t = np.exp(-s * lp)  # p^-s
    return float(_psi_j_inner(t, lp, j).sum())


def psi_j_method(y: float) -> str:
    return "pnt_integral" if y > PSI_J_ENUM_CAP else "exact"


def alpha_saddle(x: float, y: float) -> float:
    """Solve psi_1(alpha, y) = log x; psi_1 is strictly decreasing in alpha."""
    if not (x >= y >= 2):
        raise ValueError("requires x >= y >= 2")
    target = math.log(x)
    lo, hi = 1e-8, 4.0
    while zeta_smooth_psi_j(hi, y, 1) > target:
        hi *= 2
        if hi > 1e6:
            break
    while zeta_smooth_psi_j(lo, y, 1) < target:
        lo /= 2
        if lo < 1e-300:
            raise RuntimeError("saddle bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if zeta_smooth_psi_j(mid, y, 1) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


@dataclass
class SmoothEstimate:
    """Exact count (when affordable), saddle estimate, and their ratio."""

    x: float
    y: float
    alpha: float
    psi_saddle_log: float
    psi_exact: int | None = None
    ratio: float | None = None


PSI_EXACT_AUTO_CAP = 10**9


def psi_saddle_estimate(x: float, y: float, want_exact: bool | None = None) -> SmoothEstimate:
    """Log-scale saddle estimate of Psi(x, y), with the exact count and
    ratio attached when x is small enough to afford it."""
    if y < 2 or x < 1:
        raise ValueError("requires x >= 1, y >= 2")
    if y >= x:
        n = int(math.floor(x))
        return SmoothEstimate(x=x, y=y, alpha=1.0,
                              psi_saddle_log=math.log(n), psi_exact=n, ratio=1.0)
    alpha = alpha_saddle(x, y)
    log_est = (
        alpha * math.log(x)
        + zeta_smooth_psi_j(alpha, y, 0)
        - math.log(alpha)
        - 0.5 * math.log(2 * math.pi * zeta_smooth_psi_j(alpha, y, 2))
    )
    est = SmoothEstimate(x=x, y=y, alpha=alpha, psi_saddle_log=log_est)
    if want_exact is True and x > PSI_EXACT_AUTO_CAP:
        raise BudgetExceeded(f"exact comparison capped at x <= {PSI_EXACT_AUTO_CAP}")
    if want_exact is None:
        want_exact = x <= PSI_EXACT_AUTO_CAP
    if want_exact:
        exact = psi_exact(int(x), int(y))
        est.psi_exact = exact
        est.ratio = math.exp(log_est) / exact
    return est


# ----------------------------------------------------------------------
# Dickman rho
# ----------------------------------------------------------------------

_RHO_STEP = 1.0 / 1024.0
_RHO_UMAX = 200.0


@dataclass(eq=False)
class DickmanTable:
    """rho on a uniform grid via the integral form of u rho' = -rho(u-1).

    The first two unit intervals are exact (rho = 1, then 1 - log u); past
    u = 2 each node comes from derivative-corrected trapezoid marching of
    rho(u) = rho(u-h) - int rho(t-1)/t dt.  The correction term needs
    f' = d/dt [rho(t-1)/t], available from the table one unit back, and
    brings the local error to O(h^5).  Plain trapezoid at this step size
    cannot reach the 1e-8 node accuracy this table promises; higher-order
    windows that straddle the integer nodes pick up the rho'' jumps there
    and plateau near 1e-8 absolute, which is why the single-interval
    corrected rule (kinks only ever at interval ends) is used instead.
    """

    step: float
    values: np.ndarray

    def __call__(self, u: float) -> float:
        if u < 0:
            raise ValueError("rho defined for u >= 0")
        if u <= 1.0:
            return 1.0
        if u >= _RHO_UMAX:
            return 0.0
        pos = u / self.step
        i = int(math.floor(pos))
        frac = pos - i
        if frac == 0.0:
            return float(self.values[i])
        # 4-point Lagrange interpolation on the uniform grid
        i0 = min(max(i - 1, 0), len(self.values) - 4)
        t = pos - i0
        y = self.values[i0 : i0 + 4]
        w = (
            -(t - 1) * (t - 2) * (t - 3) / 6.0,
            t * (t - 2) * (t - 3) / 2.0,
            -t * (t - 1) * (t - 3) / 2.0,
            t * (t - 1) * (t - 2) / 6.0,
        )
        return float(sum(wi * yi for wi, yi in zip(w, y)))

    def delay_residual(self, u: float) -> float:
        """|u rho'(u) + rho(u-1)| with rho' by 5-point central differences."""
        h = self.step
        d = (
            -self(u + 2 * h) + 8 * self(u + h) - 8 * self(u - h) + self(u - 2 * h)
        ) / (12 * h)
        return abs(u * d + self(u - 1.0))


def _build_rho(step: float = _RHO_STEP, umax: float = _RHO_UMAX) -> DickmanTable:
    n = int(round(umax / step)) + 1
    pu = int(round(1.0 / step))  # nodes per unit; integers land on nodes
    v = np.empty(n)
    u = np.arange(n) * step
    v[u <= 1.0] = 1.0
    seg2 = (u > 1.0) & (u <= 2.0)
    v[seg2] = 1.0 - np.log(u[seg2])
    start = 2 * pu

    def rho_prime(j: int, from_above: bool) -> float:
        # one-sided rho'(w) at node w = u[j]; discontinuous only at w = 1
        if j < pu or (j == pu and not from_above):
            return 0.0
        return -v[j - pu] / u[j]

    h = step
    fa = v[start - pu] / u[start]  # integrand rho(t-1)/t at t = 2
    fpa = (rho_prime(start - pu, True) - fa) / u[start]
    for i in range(start + 1, n):
        fb = v[i - pu] / u[i]
        fpb = (rho_prime(i - pu, False) - fb) / u[i]
        v[i] = v[i - 1] - ((h / 2.0) * (fa + fb) + (h * h / 12.0) * (fpa - fpb))
        fa = fb
        fpa = (rho_prime(i - pu, True) - fb) / u[i]
    return DickmanTable(step=step, values=v)


_rho_table: DickmanTable | None = None


def dickman_rho(u: float, table: DickmanTable | None = None) -> float:
    """rho(u); table built once and cached (build-once, read-many)."""
    global _rho_table
    if table is not None:
        return table(u)
    if _rho_table is None:
        _rho_table = _build_rho()
    return _rho_table(u)


def dickman_table(step: float = _RHO_STEP) -> DickmanTable:
    """Fresh table at a chosen step (for Richardson half-step checks)."""
    return _build_rho(step=step)


def log_rho_main_term(u: float) -> float:
    """-u (log u + log log(u+2) - 1): the leading behavior of log rho."""
    return -u * (math.log(u) + math.log(math.log(u + 2)) - 1.0)


# ----------------------------------------------------------------------
# Predicted response of log Psi to rescaling y
# ----------------------------------------------------------------------


def log_psi_shift(x: float, y: float, kappa_shift: float) -> float:
    """Main-term prediction of log(Psi(x, e^kappa y)/Psi(x, y)).

    Returns (kappa / log y) * u * (log u + log log(u+2)) for
    u = log x / log y; requires |kappa| < 1, 1 <= u < sqrt(y).
    """
    if abs(kappa_shift) >= 1:
        raise ValueError("requires |kappa| < 1")
    u = math.log(x) / math.log(y)
    if not (1.0 <= u < math.sqrt(y)):
        raise ValueError("requires 1 <= log x/log y < sqrt(y)")
    return (kappa_shift / math.log(y)) * u * (math.log(u) + math.log(math.log(u + 2)))
