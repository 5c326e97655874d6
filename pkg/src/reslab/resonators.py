"""Resonator coefficient families and their exact truncated sums.

A resonator is a non-negative multiplicative function r supported on a
prime window, either extended completely multiplicatively or restricted
to squarefree numbers (r(p^k) = 0 for k >= 2).  The families:

  F_SIGMA        r(p) = f_sigma(p / M), full prime support
  WINDOW_LLOGP   r(p) = L log(p) / p          on P < p < P^2
  WINDOW_PSIGMA  r(p) = lam / p^sigma         on M < p < M^2
  SQRT_WINDOW    r(p) = lam / (sqrt(p) log p) on lam^2 <= p <= exp(log^2 lam)
  TINY_N         r(p) = 1 - (log log q)^-2    on p <= log q / (log log q)^5

Primes in `excluded` (divisors of the modulus, or everything up to the
swap threshold) are forced to r(p) = 0.  Specs are immutable; sums are
computed by depth-first enumeration over the supported prime-power
lattice (window families) or a smallest-prime-factor sieve pass
(full-support families), with compensated accumulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import primes
from .specfun import FSigmaFunction, f_sigma_build


class Family(str, Enum):
    F_SIGMA = "F_SIGMA"
    WINDOW_LLOGP = "WINDOW_LLOGP"
    WINDOW_PSIGMA = "WINDOW_PSIGMA"
    SQRT_WINDOW = "SQRT_WINDOW"
    TINY_N = "TINY_N"


class BudgetExceeded(Exception):
    pass


DFS_NODE_BUDGET = 3 * 10**7
PAIR_BUDGET = 4 * 10**6
SUM_R_FULL_CAP = 10**7


@dataclass(frozen=True, eq=False)
class ResonatorSpec:
    """One resonator: family, parameters, support window, exclusions."""

    family: Family
    m: float | None = None            # M (F_SIGMA, WINDOW_PSIGMA)
    p_window: float | None = None     # P (WINDOW_LLOGP)
    big_l: float | None = None        # L (WINDOW_LLOGP)
    lam: float | None = None          # lambda (WINDOW_PSIGMA, SQRT_WINDOW)
    sigma: float | None = None
    logq: float | None = None         # TINY_N scale
    eps: float = 0.0
    squarefree_only: bool = False
    excluded: frozenset = frozenset()
    _fsig: FSigmaFunction | None = field(default=None, repr=False)

    # -------------------- constructors --------------------

    @staticmethod
    def f_sigma(sigma: float, m: float, excluded=frozenset()) -> "ResonatorSpec":
        return ResonatorSpec(family=Family.F_SIGMA, m=m, sigma=sigma,
                             excluded=frozenset(excluded),
                             _fsig=f_sigma_build(sigma))

    @staticmethod
    def window_llogp(p_window: float, big_l: float | None = None,
                     m: float | None = None, eps: float = 0.0,
                     excluded=frozenset()) -> "ResonatorSpec":
        """L defaults to sqrt(M P)/log(P) / ((1+eps) sqrt(2)) given M."""
        if big_l is None:
            if m is None:
                raise ValueError("need big_l or m to set L")
            big_l = math.sqrt(m * p_window) / math.log(p_window) / ((1 + eps) * math.sqrt(2))
        return ResonatorSpec(family=Family.WINDOW_LLOGP, p_window=p_window,
                             big_l=big_l, m=m, eps=eps, excluded=frozenset(excluded))

    @staticmethod
    def window_psigma(m: float, sigma: float, lam: float | None = None,
                      eps: float = 0.0, excluded=frozenset()) -> "ResonatorSpec":
        """lambda defaults to (1-eps) sqrt((2 sigma - 1)/(2 sigma)) M^sigma."""
        if lam is None:
            lam = (1 - eps) * math.sqrt((2 * sigma - 1) / (2 * sigma)) * m**sigma
        return ResonatorSpec(family=Family.WINDOW_PSIGMA, m=m, sigma=sigma,
                             lam=lam, eps=eps, excluded=frozenset(excluded))

    @staticmethod
    def sqrt_window(lam: float, squarefree_only: bool = False,
                    excluded=frozenset()) -> "ResonatorSpec":
        return ResonatorSpec(family=Family.SQRT_WINDOW, lam=lam,
                             squarefree_only=squarefree_only,
                             excluded=frozenset(excluded))

    @staticmethod
    def tiny_n(logq: float, excluded=frozenset()) -> "ResonatorSpec":
        return ResonatorSpec(family=Family.TINY_N, logq=logq,
                             excluded=frozenset(excluded))

    @staticmethod
    def empty() -> "ResonatorSpec":
        """Support-free spec: r(1) = 1 and r(n) = 0 for n > 1."""
        return ResonatorSpec(family=Family.TINY_N, logq=math.e)

    # -------------------- support --------------------

    def window(self) -> tuple[float, float] | None:
        """(lo, hi) prime window, or None for full support (F_SIGMA)."""
        if self.family == Family.F_SIGMA:
            return None
        if self.family == Family.WINDOW_LLOGP:
            return (self.p_window, self.p_window**2)
        if self.family == Family.WINDOW_PSIGMA:
            return (self.m, self.m**2)
        if self.family == Family.SQRT_WINDOW:
            return (self.lam**2, math.exp(math.log(self.lam) ** 2))
        lg2 = math.log(self.logq)
        hi = self.logq / lg2**5 if lg2 > 1 else 0.0
        return (2.0, hi)

    def r_prime(self, p: int) -> float:
        """Coefficient at a prime."""
        if p in self.excluded:
            return 0.0
        if self.family == Family.F_SIGMA:
            return float(self._fsig(p / self.m))
        lo, hi = self.window()
        if self.family == Family.WINDOW_LLOGP:
            ok = lo < p < hi
            return self.big_l * math.log(p) / p if ok else 0.0
        if self.family == Family.WINDOW_PSIGMA:
            ok = lo < p < hi
            return self.lam / p**self.sigma if ok else 0.0
        if self.family == Family.SQRT_WINDOW:
            ok = lo <= p <= hi
            return self.lam / (math.sqrt(p) * math.log(p)) if ok else 0.0
        ok = 2 <= p <= self.window()[1]
        return 1.0 - 1.0 / math.log(self.logq) ** 2 if ok else 0.0

    def t_prime(self, p: int) -> float:
        """t(p) = r(p)/(1 + r(p)^2), always in [0, 1/2]."""
        r = self.r_prime(p)
        return r / (1.0 + r * r)

    def support_primes(self, limit: float | None = None) -> np.ndarray:
        """Supported primes (exclusions removed), optionally capped at limit.

        F_SIGMA support is unbounded; callers must pass a limit there and
        account for the tail analytically.
        """
        w = self.window()
        if w is None:
            if limit is None:
                raise ValueError("F_SIGMA support needs an explicit limit")
            ps = primes.primes_up_to(int(limit))
        else:
            lo, hi = w
            inclusive = self.family in (Family.SQRT_WINDOW, Family.TINY_N)
            if limit is not None and limit < hi:
                ps = primes.primes_in(lo, limit, inclusive=True)
                ps = ps[ps > lo] if not inclusive else ps
            else:
                ps = primes.primes_in(lo, hi, inclusive=inclusive)
        if self.excluded:
            mask = np.array([int(p) not in self.excluded for p in ps])
            ps = ps[mask]
        return ps

    def support_values(self, limit: float | None = None,
                       use_t: bool = False) -> tuple[np.ndarray, np.ndarray]:
        ps = self.support_primes(limit)
        f = self.t_prime if use_t else self.r_prime
        return ps, np.array([f(int(p)) for p in ps])

    # -------------------- serialization --------------------

    def to_text(self) -> str:
        """Human-readable key=value block (round-trips via from_text)."""
        lines = [f"family={self.family.value}"]
        for key in ("m", "p_window", "big_l", "lam", "sigma", "logq", "eps"):
            v = getattr(self, key)
            if v is not None and not (key == "eps" and v == 0.0):
                lines.append(f"{key}={v!r}")
        lines.append(f"squarefree={int(self.squarefree_only)}")
        if self.excluded:
            lines.append("excluded=" + ",".join(str(p) for p in sorted(self.excluded)))
        w = self.window()
        lines.append("support=full" if w is None else f"support=({w[0]:g},{w[1]:g})")
        return "\n".join(lines)

    @staticmethod
    def from_text(text: str) -> "ResonatorSpec":
        kv = {}
        for line in text.strip().splitlines():
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
        fam = Family(kv.pop("family"))
        kv.pop("support", None)
        excluded = frozenset(
            int(x) for x in kv.pop("excluded", "").split(",") if x
        )
        sf = bool(int(kv.pop("squarefree", "0")))
        args = {k: float(v) for k, v in kv.items()}
        spec = ResonatorSpec(family=fam, squarefree_only=sf, excluded=excluded,
                             **args)
        if fam == Family.F_SIGMA:
            spec = replace(spec, _fsig=f_sigma_build(spec.sigma))
        return spec


def r_value(spec: ResonatorSpec, n: int) -> float:
    """r(n) by factorization (multiplicative extension; r(1) = 1)."""
    if n < 1:
        raise ValueError("n >= 1")
    out = 1.0
    for p, e in primes.factorize(n):
        if spec.squarefree_only and e >= 2:
            return 0.0
        out *= spec.r_prime(p) ** e
    return out


def r_values_array(spec: ResonatorSpec, limit: int, use_t: bool = False) -> np.ndarray:
    """r(n) (or t(n)) for n = 0..limit via a smallest-prime-factor pass."""
    limit = int(limit)
    if limit > SUM_R_FULL_CAP:
        raise BudgetExceeded(f"sieve pass capped at {SUM_R_FULL_CAP}")
    spf = primes.spf_table(limit)
    ps = primes.primes_up_to(limit)
    f = spec.t_prime if use_t else spec.r_prime
    pval = {int(p): f(int(p)) for p in ps}
    out = np.zeros(limit + 1)
    if limit >= 1:
        out[1] = 1.0
    for n in range(2, limit + 1):
        p = int(spf[n])
        m = n // p
        if spec.squarefree_only and m % p == 0:
            out[n] = 0.0
        else:
            out[n] = out[m] * pval[p]
    return out


class _Kahan:
    __slots__ = ("s", "c")

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, v: float):
        t = self.s + (v - self.c)
        self.c = (t - self.s) - (v - self.c)
        self.s = t


def _dfs_sum(ps: list[int], vals: list[float], limit: float, node_fn,
             squarefree: bool) -> float:
    """Sum of node_fn(n, coeff) over supported n <= limit, coeff = prod vals."""
    acc = _Kahan()
    budget = [DFS_NODE_BUDGET]

    def rec(i: int, n: int, coeff: float):
        budget[0] -= 1
        if budget[0] < 0:
            raise BudgetExceeded("enumeration budget exceeded")
        acc.add(node_fn(n, coeff))
        for j in range(i, len(ps)):
            p = ps[j]
            if n * p > limit:
                break
            if vals[j] == 0.0:
                continue
            if squarefree:
                rec(j + 1, n * p, coeff * vals[j])
            else:
                m, v = n * p, coeff * vals[j]
                while m <= limit:
                    rec(j + 1, m, v)
                    m *= p
                    v *= vals[j]

    rec(0, 1, 1.0)
    return acc.s


WEIGHTS = ("one", "n", "r_squared", "t_over_sqrt")


def sum_r(spec: ResonatorSpec, n_limit: float, weight: str = "one") -> float:
    """Exact weighted sum over n <= n_limit of the resonator lattice.

    weight: "one" -> sum r(n); "n" -> sum n r(n); "r_squared" -> sum r(n)^2;
    "t_over_sqrt" -> sum t(n)/sqrt(n) (squarefree t-lattice).
    """
    if weight not in WEIGHTS:
        raise ValueError(f"weight must be one of {WEIGHTS}")
    if n_limit < 1:
        return 0.0
    use_t = weight == "t_over_sqrt"
    squarefree = spec.squarefree_only or use_t
    if weight == "one":
        node = lambda n, c: c
    elif weight == "n":
        node = lambda n, c: n * c
    elif weight == "r_squared":
        node = lambda n, c: c * c
    else:
        node = lambda n, c: c / math.sqrt(n)

    if spec.family == Family.F_SIGMA:
        if n_limit > SUM_R_FULL_CAP:
            raise BudgetExceeded(f"full-support sums capped at {SUM_R_FULL_CAP}")
        r = r_values_array(spec, int(n_limit), use_t=use_t)
        ns = np.arange(len(r), dtype=np.float64)
        if weight == "one":
            w = r
        elif weight == "n":
            w = ns * r
        elif weight == "r_squared":
            w = r * r
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(ns > 0, r / np.sqrt(np.maximum(ns, 1)), 0.0)
        return float(w[1:].sum())

    ps, vals = spec.support_values(limit=n_limit, use_t=use_t)
    return _dfs_sum([int(p) for p in ps], list(vals), n_limit, node, squarefree)


# ----------------------------------------------------------------------
# Square-sum ratio B and the Rankin tail checker
# ----------------------------------------------------------------------


def log_square_product(spec: ResonatorSpec, p_cap: float = 10**7) -> float:
    """log of the full square sum over all n: the Euler product
    prod (1 - r(p)^2)^-1 (complete) or prod (1 + r(p)^2) (squarefree).

    F_SIGMA support beyond p_cap is finished with a prime-density integral
    of the asymptotic coefficient (c M / p)^(2 sigma).
    """
    ps, vals = spec.support_values(limit=p_cap if spec.window() is None else None)
    vals = np.asarray(vals)
    if np.any(vals >= 1.0):
        raise ValueError("divergent square sum: some r(p) >= 1")
    if spec.squarefree_only:
        total = float(np.log1p(vals**2).sum())
    else:
        total = float(-np.log1p(-(vals**2)).sum())
    if spec.window() is None:
        from scipy.integrate import quad
        sig, cm = spec.sigma, spec._fsig.c_sigma * spec.m
        lo = math.log(p_cap)
        tail, _ = quad(lambda u: math.exp((1 - 2 * sig) * u) / u, lo, lo + 400,
                       limit=200)
        total += cm ** (2 * sig) * tail
    return total


def b_ratio(spec: ResonatorSpec, x: float, n_limit: float) -> float:
    """B = (sum over all n of r(n)^2) / (sum over n <= x/N of r(n)^2).

    The numerator is the Euler product.  The denominator is the exact
    enumeration when affordable; otherwise it is certified from below by
    a Rankin tail bound on the mass beyond x/N, making the returned B an
    upper estimate (B >= 1 either way).
    """
    y = x / n_limit
    if y < 1:
        raise ValueError("x/N < 1 leaves an empty truncation range")
    log_full = log_square_product(spec)
    if log_full <= 600.0:
        try:
            denom = sum_r(spec, y, weight="r_squared")
            return max(1.0, math.exp(log_full) / denom)
        except BudgetExceeded:
            pass
    rel_tail = rankin_square_tail(spec, y)
    if rel_tail >= 0.5:
        raise BudgetExceeded(
            f"denominator neither enumerable nor certified (tail bound {rel_tail:.3g})"
        )
    return 1.0 / (1.0 - rel_tail)


def rankin_square_tail(spec: ResonatorSpec, y: float) -> float:
    """Upper bound on (sum_{n > y} r^2) / (sum over all n), by Rankin's
    device: tail <= y^-a * prod-ratio, minimized over a grid of a."""
    logy = math.log(y)
    ps, vals = spec.support_values(limit=None if spec.window() else 10**7)
    v2 = np.asarray(vals) ** 2
    lp = np.log(np.asarray(ps, dtype=float))
    best = math.inf
    for a in np.geomspace(1e-4, 0.9, 60):
        pa = np.exp(a * lp)
        if spec.squarefree_only:
            grow = np.log1p(v2 * pa) - np.log1p(v2)
        else:
            if np.any(v2 * pa >= 1.0):
                continue
            grow = -np.log1p(-(v2 * pa)) + np.log1p(-v2)
        ex = -a * logy + float(grow.sum())
        best = min(best, ex)
    return math.exp(best) if best < 0 else 1.0


@dataclass
class TailReport:
    """Rankin-trick admissibility of a coefficient family at scale y."""

    cond1: bool
    margin1: float
    cond2: bool
    margin2: float
    alpha: float
    sum1: float
    sum2: float


TAIL_COND2_SMALL = 0.5  # desk-scale stand-in for the asymptotic o(1)


def tail_condition_check(support: list[tuple[int, float]], y: float | None = None,
                         logy: float | None = None,
                         small: float = TAIL_COND2_SMALL) -> TailReport:
    """Check the two prime-sum conditions guaranteeing that the truncated
    square sum up to y captures (1 + o(1)) of the full sum.

    support: [(p, f(p)), ...] with f(p) in [0, 1); callers pass f = r^2.
    Condition 1: sum_p log p f(p)/(1 - f(p)) < log y - log y/log log y.
    Condition 2: sum over k log p > log y/(log log y)^4 of f(p)^k p^(k a)
    with a = (log log y)^2/log y stays below `small` (a finite-scale
    reading of "= o(1)"; the threshold is configurable and reported).

    Scales where y itself overflows a double are passed via logy.
    """
    if logy is None:
        if y is None:
            raise ValueError("pass y or logy")
        logy = math.log(y)
    loglogy = math.log(logy)
    if loglogy <= 0:
        raise ValueError("y must exceed e")
    alpha = loglogy**2 / logy
    budget1 = logy - logy / loglogy
    s1 = _Kahan()
    s2 = _Kahan()
    thresh = logy / loglogy**4
    cond2_ok = True
    for p, fp in support:
        if not (0.0 <= fp < 1.0):
            raise ValueError(f"f({p}) = {fp} outside [0, 1)")
        if fp == 0.0:
            continue
        lp = math.log(p)
        s1.add(lp * fp / (1.0 - fp))
        k_min = max(1, math.floor(thresh / lp) + 1)
        rho = fp * p**alpha
        if rho >= 1.0:
            cond2_ok = False  # geometric block diverges outright
            continue
        s2.add(rho**k_min / (1.0 - rho))
    sum2 = s2.s if cond2_ok else math.inf
    cond1 = s1.s < budget1
    cond2 = cond2_ok and sum2 < small
    return TailReport(cond1=cond1, margin1=budget1 - s1.s, cond2=cond2,
                      margin2=small - sum2, alpha=alpha, sum1=s1.s, sum2=sum2)


# ----------------------------------------------------------------------
# Coprime double sums (second-moment certificates)
# ----------------------------------------------------------------------

KERNELS = ("fund_second", "main_extraction", "fund_second_dual")


def _enumerate_lattice(spec: ResonatorSpec, z: float, use_t: bool):
    """All supported n <= z as (n, coeff, prime-tuple)."""
    ps, vals = spec.support_values(limit=z, use_t=use_t)
    ps = [int(p) for p in ps]
    out = []

    def rec(i, n, coeff, fac):
        out.append((n, coeff, fac))
        if len(out) > DFS_NODE_BUDGET // 10:
            raise BudgetExceeded("lattice too large")
        for j in range(i, len(ps)):
            p = ps[j]
            if n * p > z:
                break
            if vals[j] == 0.0:
                continue
            rec(j + 1, n * p, coeff * vals[j], fac + (p,))

    rec(0, 1, 1.0, ())
    return out


def g_sum_factor(spec: ResonatorSpec, limit: float, coprime_to: tuple,
                 exact_cap: float = 10**6) -> float:
    """[sum_{g <= limit, (g, k) = 1} r(g)^2] / prod_p (1 + r(p)^2) for the
    squarefree lattice, k given by its support-prime tuple.

    Exact DFS when limit is enumerable; otherwise the closed form
    prod_{p | k} (1 + r(p)^2)^-1 discounted by the Rankin tail bound, which
    certifies the result from below.
    """
    if limit < 1:
        return 0.0
    log_full = log_square_product(spec)
    if limit <= exact_cap:
        ps, vals = spec.support_values(limit=limit)
        keep = [(int(p), v) for p, v in zip(ps, vals) if int(p) not in coprime_to]
        num = _dfs_sum([p for p, _ in keep], [v for _, v in keep], limit,
                       lambda n, c: c * c, True)
        return num / math.exp(log_full)
    rel_tail = rankin_square_tail(spec, limit)
    disc = 0.0
    for p in coprime_to:
        disc += math.log1p(spec.r_prime(p) ** 2)
    return math.exp(-disc) * max(0.0, 1.0 - rel_tail)


def coprime_double_sum(spec: ResonatorSpec, z: float, kernel: str,
                       x: float | None = None) -> float:
    """Exact coprime double sum over the supported lattice.

    kernel "fund_second":      r(n1) r(n2) / max * g-factor
    kernel "main_extraction":  t(m1) t(m2) m1 m2 / max^3
    kernel "fund_second_dual": r(m1) r(m2) m1 m2 / max^3 * g-factor
    where g-factor = sum_{g <= x/max, (g, m1 m2)=1} r(g)^2 normalized by
    prod (1 + r(p)^2); kernels with a g-factor require x.
    """
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}")
    use_t = kernel == "main_extraction"
    if kernel != "main_extraction":
        if x is None:
            raise ValueError("this kernel needs the resonator length x")
        if not spec.squarefree_only:
            raise ValueError("g-factor kernels require a squarefree spec")
    lattice = _enumerate_lattice(spec, z, use_t=use_t)
    if len(lattice) ** 2 > PAIR_BUDGET:
        raise BudgetExceeded(f"{len(lattice)}^2 pairs exceed budget")
    acc = _Kahan()
    for n1, c1, f1 in lattice:
        s1 = set(f1)
        for n2, c2, f2 in lattice:
            if s1.intersection(f2):
                continue
            mx = n1 if n1 >= n2 else n2
            if kernel == "main_extraction":
                acc.add(c1 * c2 * n1 * n2 / mx**3)
            else:
                g = g_sum_factor(spec, x / mx, f1 + f2)
                base = c1 * c2 / mx if kernel == "fund_second" else (
                    c1 * c2 * n1 * n2 / mx**3
                )
                acc.add(base * g)
    return acc.s


def mobius_t_sum(spec: ResonatorSpec, y: float, k: int = 1) -> float:
    """sum_{d <= y, (d, k) = 1} mu(d) t(d)^2 / d over the squarefree lattice.

    mu(d) t(d)^2 / d is multiplicative on squarefree d with prime value
    -t(p)^2/p, so the sign rides along in the DFS coefficient.
    """
    if y < 1:
        return 0.0
    ps, vals = spec.support_values(limit=y, use_t=True)
    keep = [(int(p), -v * v / int(p)) for p, v in zip(ps, vals) if k % int(p) != 0]
    return _dfs_sum([p for p, _ in keep], [v for _, v in keep], y,
                    lambda n, c: c, True)
