"""Exact Dirichlet-character machinery: the ground truth of this package.

A CharacterGroup carries the full structure of (Z/q)^*: one cyclic
component per prime-power factor (two for 2^k, k >= 3), generators,
and discrete-log tables for every unit.  Characters are indexed
row-major over component exponent vectors; index 0 is the principal
character.

All partial sums sum_{n <= N} chi(n) for every character at once come
from one histogram pass over n <= N followed by a multidimensional DFT
of the index-vector counts (inverse-FFT orientation, since
chi_j(n) = e(+ sum j_k ind_k(n) / d_k)).  Everything downstream --
the exact maximum Delta(N, q), Gauss sums, the dual cosine sums, and
the resonance weighted means -- reduces to these tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import primes
from .resonators import ResonatorSpec, r_values_array

GROUP_Q_CAP = 10**7


class BudgetExceeded(Exception):
    pass


class PrimitivityError(ValueError):
    pass


# ----------------------------------------------------------------------
# Group construction
# ----------------------------------------------------------------------


def _primitive_root(p: int) -> int:
    """Smallest primitive root modulo an odd prime p."""
    fac = [f for f, _ in primes.factorize(p - 1)]
    for g in range(2, p):
        if all(pow(g, (p - 1) // f, p) != 1 for f in fac):
            return g
    raise RuntimeError(f"no primitive root found for {p}")


def _component_tables(p: int, e: int) -> list[tuple[int, np.ndarray]]:
    """Cyclic components of (Z/p^e)^* as (order, dlog table) pairs.

    The table maps each residue mod p^e to its index (or -1 for
    non-units).  For p = 2, e >= 3 there are two components: the sign
    (generated by -1) and the 3-power part.
    """
    pe = p**e
    if p == 2:
        if e == 1:
            return []
        if e == 2:
            t = -np.ones(4, dtype=np.int64)
            t[1] = 0
            t[3] = 1
            return [(2, t)]
        half = 2 ** (e - 2)
        sign = -np.ones(pe, dtype=np.int64)
        ind = -np.ones(pe, dtype=np.int64)
        x = 1
        for k in range(half):
            sign[x], ind[x] = 0, k
            sign[pe - x], ind[pe - x] = 1, k
            x = (x * 3) % pe
        return [(2, sign), (half, ind)]
    order = (p - 1) * p ** (e - 1)
    g = _primitive_root(p)
    if e > 1 and pow(g, p - 1, p * p) == 1:
        g += p
    t = -np.ones(pe, dtype=np.int64)
    x = 1
    for k in range(order):
        t[x] = k
        x = (x * g) % pe
    return [(order, t)]


@dataclass(eq=False)
class CharacterGroup:
    """Structure of (Z/q)^* with discrete-log tables.

    orders: cyclic component orders (their product is phi(q)).
    index_of: flat row-major character-grid index of each unit n in
    [0, q), or -1 for non-units.  Immutable after construction.
    """

    q: int
    factorization: list[tuple[int, int]]
    orders: tuple[int, ...]
    phi: int
    index_of: np.ndarray
    _comp_inds: list[np.ndarray]  # per-component index of each n in [0, q)

    @property
    def n_chars(self) -> int:
        return self.phi

    def exponents_of_char(self, j: int) -> tuple[int, ...]:
        """Row-major decomposition of a character index."""
        out = []
        for d in reversed(self.orders):
            out.append(j % d)
            j //= d
        return tuple(reversed(out))

    def char_index(self, exponents) -> int:
        j = 0
        for d, e in zip(self.orders, exponents):
            j = j * d + (e % d)
        return j

    def conj_index(self, j: int) -> int:
        return self.char_index(tuple(-e for e in self.exponents_of_char(j)))

    def chi_values(self, j: int) -> np.ndarray:
        """chi_j(n) for n = 0..q-1 (0 on non-units)."""
        js = self.exponents_of_char(j)
        phase = np.zeros(self.q, dtype=np.float64)
        unit = self.index_of >= 0
        for jk, d, ind in zip(js, self.orders, self._comp_inds):
            if jk:
                phase[unit] += (jk * ind[unit] % d) / d
        vals = np.exp(2j * math.pi * phase)
        vals[~unit] = 0.0
        return vals

    def chi_parity(self, j: int) -> int:
        """chi(-1): +1 for even characters, -1 for odd.

        Exact integer phase arithmetic over the common denominator
        prod(orders); chi(-1)^2 = 1 forces the phase to 0 or 1/2.
        """
        js = self.exponents_of_char(j)
        n = self.q - 1
        prod = 1
        for d in self.orders:
            prod *= d
        total = 0
        for jk, d, ind in zip(js, self.orders, self._comp_inds):
            total += (int(jk) * int(ind[n]) % d) * (prod // d)
        return 1 if total % prod == 0 else -1

    def chi_at(self, j: int, n: int) -> complex:
        n %= self.q
        if self.index_of[n] < 0:
            return 0.0
        js = self.exponents_of_char(j)
        phase = 0.0
        for jk, d, ind in zip(js, self.orders, self._comp_inds):
            phase += (jk * int(ind[n]) % d) / d
        return complex(np.exp(2j * math.pi * phase))

    def conductor(self, j: int) -> int:
        """Conductor of chi_j, componentwise from p-adic valuations."""
        js = self.exponents_of_char(j)
        cond = 1
        k = 0
        for p, e in self.factorization:
            if p == 2:
                if e == 1:
                    continue
                if e == 2:
                    cond *= 4 if js[k] else 1
                    k += 1
                    continue
                ja, jb = js[k], js[k + 1]
                k += 2
                if jb:
                    v = 0
                    while jb % 2 == 0:
                        jb //= 2
                        v += 1
                    cond *= 2 ** (e - v)
                elif ja:
                    cond *= 4
            else:
                jj = js[k]
                k += 1
                if jj == 0:
                    continue
                v = 0
                while jj % p == 0 and v < e - 1:
                    jj //= p
                    v += 1
                cond *= p ** (e - v)
        return cond

    def is_primitive(self, j: int) -> bool:
        return self.conductor(j) == self.q


def build_group(q: int) -> CharacterGroup:
    """Factor q, find generators, and build all discrete-log tables."""
    q = int(q)
    if q < 3:
        raise ValueError("q >= 3 required")
    if q > GROUP_Q_CAP:
        raise BudgetExceeded(f"q = {q} beyond group budget {GROUP_Q_CAP}")
    fac = primes.factorize(q)
    orders: list[int] = []
    comp_inds: list[np.ndarray] = []
    n_range = np.arange(q, dtype=np.int64)
    unit_mask = np.ones(q, dtype=bool)
    for p, e in fac:
        pe = p**e
        res = n_range % pe
        for order, table in _component_tables(p, e):
            orders.append(order)
            comp_inds.append(table[res])
        unit_mask &= (res % p) != 0
    phi = 1
    for d in orders:
        phi *= d
    flat = np.zeros(q, dtype=np.int64)
    for d, ind in zip(orders, comp_inds):
        flat = flat * d + np.where(ind >= 0, ind, 0)
    flat[~unit_mask] = -1
    return CharacterGroup(q=q, factorization=fac, orders=tuple(orders),
                          phi=phi, index_of=flat, _comp_inds=comp_inds)


# ----------------------------------------------------------------------
# Character sum tables
# ----------------------------------------------------------------------


@dataclass(eq=False)
class CharSumTable:
    """sum_{n <= N} chi(n) for every character index (flat layout)."""

    group: CharacterGroup
    n_limit: int
    sums: np.ndarray  # complex, length phi(q)

    def __getitem__(self, j: int) -> complex:
        return complex(self.sums[j])


def _weighted_dft(group: CharacterGroup, weights_mod_q: np.ndarray) -> np.ndarray:
    """sum_n w(n) chi_j(n) for all j, via the index-vector histogram.

    weights_mod_q[c] is the total weight attached to residue class c.
    """
    size = group.phi
    unit = group.index_of >= 0
    hist = np.zeros(size, dtype=np.float64)
    np.add.at(hist, group.index_of[unit], weights_mod_q[unit])
    grid = hist.reshape(group.orders)
    sums = np.fft.ifftn(grid) * size
    return sums.ravel()


def all_char_sums(group: CharacterGroup, n_limit: int) -> CharSumTable:
    """Partial sums for every character simultaneously.

    One histogram pass over n <= N (full periods contribute a constant
    per class, which only the principal character sees) plus one
    multidimensional DFT.
    """
    n_limit = int(n_limit)
    if n_limit < 1:
        raise ValueError("N >= 1")
    q = group.q
    full, rem = divmod(n_limit, q)
    counts = np.zeros(q, dtype=np.float64)
    counts[np.arange(1, rem + 1)] = 1.0
    counts += full
    counts[0] = 0.0  # n = q, 2q, ... are non-units anyway; class 0 is dead
    sums = _weighted_dft(group, counts)
    return CharSumTable(group=group, n_limit=n_limit, sums=sums)


def delta_exact(group: CharacterGroup | int, n_limit: int) -> tuple[float, int]:
    """max_{chi != chi_0} |sum_{n <= N} chi(n)| with its witness index.

    Ties break to the smallest character index (argmax's first hit).
    """
    if isinstance(group, int):
        group = build_group(group)
    table = all_char_sums(group, n_limit)
    mods = np.abs(table.sums)
    mods[0] = -np.inf
    j = int(np.argmax(mods))
    return float(mods[j]), j


def gauss_sum(group: CharacterGroup, j: int) -> complex:
    """tau(chi) = sum_{n mod q} chi(n) e(n/q), by direct summation."""
    vals = group.chi_values(j)
    e = np.exp(2j * math.pi * np.arange(group.q) / group.q)
    return complex(np.dot(vals, e))


# ----------------------------------------------------------------------
# The Fourier expansion of long sums and the cosine dual sum
# ----------------------------------------------------------------------


@dataclass
class PolyaReport:
    lhs: complex
    rhs: complex
    residual: float
    bound: float


def polya_check(group: CharacterGroup, j: int, n_param: int, h_limit: int) -> PolyaReport:
    """Compare sum_{n <= q/N} chi(n) against its truncated Fourier series

        tau(chi)/(2 pi i) * sum_{0 < |h| <= H} conj(chi)(h)/h (1 - e(-h/N)),

    for primitive chi.  bound = 1 + q log q / H is the shape of the
    truncation error; the residual should stay within a small multiple.
    """
    if not group.is_primitive(j):
        raise PrimitivityError(f"character {j} mod {group.q} is imprimitive")
    q = group.q
    length = q // n_param
    vals = group.chi_values(j)
    lhs = complex(vals[1 : length + 1].sum())
    h = np.arange(1, h_limit + 1)
    conj_vals = np.conj(vals)
    pos = conj_vals[h % q] / h * (1.0 - np.exp(-2j * math.pi * h / n_param))
    neg = conj_vals[(-h) % q] / (-h) * (1.0 - np.exp(2j * math.pi * h / n_param))
    tau = gauss_sum(group, j)
    rhs = tau / (2j * math.pi) * (pos.sum() + neg.sum())
    resid = abs(lhs - rhs)
    return PolyaReport(lhs=lhs, rhs=rhs, residual=resid,
                       bound=1.0 + q * math.log(q) / h_limit)


def s_chi(group: CharacterGroup, j: int, n_param: int, h_limit: int) -> complex:
    """S(chi) = sum_{0 < |h| <= H} conj(chi)(h)/h (1 - cos(2 pi h/N)).

    Computed in the +-h paired form, whose common factor (1 - chi(-1))
    is exactly zero for even characters, so even S(chi) is exactly 0.0.
    """
    if group.chi_parity(j) == 1:
        return 0.0
    h = np.arange(1, h_limit + 1)
    vals = np.conj(group.chi_values(j))
    series = vals[h % group.q] / h * (1.0 - np.cos(2 * math.pi * h / n_param))
    return 2.0 * complex(series.sum())


# ----------------------------------------------------------------------
# Resonance ratios: the exact weighted-mean lower bounds
# ----------------------------------------------------------------------

RATIO_MODES = ("first_moment", "second_moment", "dual_first", "dual_second")
RATIO_Q_CAP = 10**5


def resonator_weights(group: CharacterGroup, spec: ResonatorSpec, x: int) -> np.ndarray:
    """|R(chi)|^2 for every character, R = phi(q)^-1/2 sum_{n<=x} r(n) chi(n)."""
    x = int(x)
    r = r_values_array(spec, x)
    q = group.q
    weights = np.zeros(q, dtype=np.float64)
    ns = np.arange(x + 1)
    np.add.at(weights, ns[1:] % q, r[1:])
    big_r = _weighted_dft(group, weights) / math.sqrt(group.phi)
    return np.abs(big_r) ** 2


def resonance_ratio_exact(group: CharacterGroup, spec: ResonatorSpec, x: int,
                          n_limit: int, mode: str = "first_moment",
                          h_limit: int | None = None) -> float:
    """The exact weighted-mean ratio that lower-bounds Delta (or its square).

    first_moment:  |sum_{chi != chi0} w_chi S_N(chi)| / sum_chi w_chi
    second_moment:  sum_{chi != chi0} w_chi |S_N(chi)|^2 / sum_chi w_chi
    dual modes use the cosine dual sum S(chi) instead of S_N.

    Each is bounded by its target (Delta, Delta^2, sup|S|, sup|S|^2) by
    the weighted-mean inequality; the bound is exact up to DFT rounding.
    """
    if mode not in RATIO_MODES:
        raise ValueError(f"mode must be one of {RATIO_MODES}")
    if group.q > RATIO_Q_CAP:
        raise BudgetExceeded(f"resonance sweeps capped at q <= {RATIO_Q_CAP}")
    w = resonator_weights(group, spec, x)
    denom = float(w.sum())
    if mode in ("first_moment", "second_moment"):
        sums = all_char_sums(group, n_limit).sums
        if mode == "first_moment":
            num = abs(np.dot(w[1:], sums[1:]))
        else:
            num = float(np.dot(w[1:], np.abs(sums[1:]) ** 2))
        return float(num / denom)
    if h_limit is None:
        h_limit = int(math.ceil(math.sqrt(n_limit * group.q) * math.log(group.q)))
    svals = np.array([s_chi(group, j, n_limit, h_limit)
                      for j in range(group.phi)])
    if mode == "dual_first":
        num = abs(np.dot(w[1:], svals[1:]))
    else:
        num = float(np.dot(w[1:], np.abs(svals[1:]) ** 2))
    return float(num / denom)
