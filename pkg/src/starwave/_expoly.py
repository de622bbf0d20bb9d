"""Exact algebra of exponential-polynomial pieces on half-open intervals.

A piece is ``sum_k c_k (x - s)^k exp(lam (x - s))`` restricted to ``[a, b)``.
The anchor ``s`` is kept near the support so that translation and reflection
never expand anything; a Taylor shift of the coefficients is only performed
when two pieces have to be combined or integrated.
"""

from __future__ import annotations

import cmath
import math
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.special import comb

from .errors import DivergentIntegralError

INF = math.inf


@lru_cache(maxsize=256)
def _pascal(k: int) -> np.ndarray:
    j = np.arange(k + 1)
    return comb(j[None, :], j[:, None])  # [j, k] -> C(k, j)


def taylor_shift(coeffs: np.ndarray, d: float) -> np.ndarray:
    """Coefficients of y -> p(y + d)."""
    c = np.asarray(coeffs, dtype=complex)
    if d == 0.0 or c.size == 1:
        return c.copy()
    k = c.size - 1
    e = np.arange(k + 1)
    expo = np.clip(e[None, :] - e[:, None], 0, None)
    return (_pascal(k) * np.power(float(d), expo)) @ c


def _unit_moments(kmax: int, mu: complex) -> np.ndarray:
    """J_k = int_0^1 t^k exp(mu t) dt for k = 0..kmax."""
    J = np.empty(kmax + 1, dtype=complex)
    if mu == 0:
        J[:] = 1.0 / np.arange(1, kmax + 2)
        return J
    amu = abs(mu)
    e = cmath.exp(mu)
    # upward recursion is stable for k <= |mu|, downward (Miller) above it
    top_up = min(kmax, int(amu)) if amu >= 1.0 else -1
    if top_up >= 0:
        J[0] = complex(np.expm1(np.complex128(mu))) / mu
        for k in range(1, top_up + 1):
            J[k] = (e - k * J[k - 1]) / mu
    if top_up < kmax:
        start = kmax + 30 + 4 * int(math.ceil(amu))
        val = 0.0 + 0.0j
        for k in range(start, top_up + 1, -1):
            val = (e - mu * val) / k
            if k - 1 <= kmax:
                J[k - 1] = val
    return J


def moments(kmax: int, lam: complex, width: float) -> np.ndarray:
    """m_k = int_0^width y^k exp(lam y) dy for k = 0..kmax."""
    lam = complex(lam)
    out = np.empty(kmax + 1, dtype=complex)
    if math.isinf(width):
        if not lam.real < 0:
            raise DivergentIntegralError(
                f"integral over an unbounded interval diverges for rate {lam}"
            )
        r = -1.0 / lam
        out[0] = r
        for k in range(1, kmax + 1):
            out[k] = out[k - 1] * k * r
        return out
    if width <= 0:
        out[:] = 0.0
        return out
    if lam == 0:
        ks = np.arange(kmax + 1)
        return width ** (ks + 1) / (ks + 1) + 0j
    J = _unit_moments(kmax, lam * width)
    return J * width ** (np.arange(kmax + 1) + 1.0)


class Piece:
    """One exponential-polynomial block; treat as immutable."""

    __slots__ = ("a", "b", "rate", "shift", "coeffs")

    def __init__(self, a: float, b: float, rate: complex, shift: float, coeffs):
        self.a = float(a)
        self.b = float(b)
        self.rate = complex(rate)
        self.shift = float(shift)
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        nz = np.flatnonzero(c)
        self.coeffs = c[: nz[-1] + 1] if nz.size else c[:1] * 0

    def __repr__(self) -> str:
        return (
            f"Piece([{self.a}, {self.b}), rate={self.rate}, shift={self.shift}, "
            f"coeffs={np.array2string(self.coeffs, precision=4)})"
        )

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def formula(self, x):
        y = np.asarray(x, dtype=float) - self.shift
        return npoly.polyval(y, self.coeffs) * np.exp(self.rate * y)

    def replace(self, **kw) -> "Piece":
        args = dict(a=self.a, b=self.b, rate=self.rate, shift=self.shift, coeffs=self.coeffs)
        args.update(kw)
        return Piece(**args)

    def reanchored(self, s_new: float) -> np.ndarray:
        d = s_new - self.shift
        if d == 0.0:
            return self.coeffs
        return taylor_shift(self.coeffs, d) * cmath.exp(self.rate * d)

    def deriv(self) -> "Piece":
        c = self.coeffs
        d = self.rate * c
        if c.size > 1:
            d[:-1] += c[1:] * np.arange(1, c.size)
        return self.replace(coeffs=d)

    def conj(self) -> "Piece":
        return self.replace(rate=self.rate.conjugate(), coeffs=self.coeffs.conj())

    def translate(self, t: float) -> "Piece":
        return self.replace(a=self.a + t, b=self.b + t, shift=self.shift + t)

    def reflect(self, t: float) -> "Piece":
        sign = (-1.0) ** np.arange(self.coeffs.size)
        return Piece(t - self.b, t - self.a, -self.rate, t - self.shift, self.coeffs * sign)

    def dilate(self, n: float) -> "Piece":
        """x -> piece(n x)."""
        return Piece(
            self.a / n, self.b / n, self.rate * n, self.shift / n,
            self.coeffs * float(n) ** np.arange(self.coeffs.size),
        )

    def clip(self, lo: float, hi: float) -> "Piece | None":
        a, b = max(self.a, lo), min(self.b, hi)
        if not a < b:
            return None
        if a == self.a and b == self.b:
            return self
        return self.replace(a=a, b=b)

    def integral(self) -> complex:
        if self.is_zero():
            return 0.0j
        a, b, lam = self.a, self.b, self.rate
        if not math.isinf(a) and (math.isinf(b) or lam.real <= 0):
            c = self.reanchored(a)
            m = moments(self.degree, lam, b - a)
        elif not math.isinf(b):
            # integrate leftwards from b so the exponential decays
            c = self.reanchored(b)
            c = c * (-1.0) ** np.arange(c.size)
            m = moments(self.degree, -lam, b - a)
        else:
            raise DivergentIntegralError("piece supported on the whole line")
        return complex(np.dot(c, m))


def product_piece(p: Piece, q: Piece) -> "Piece | None":
    lo, hi = max(p.a, q.a), min(p.b, q.b)
    if not lo < hi:
        return None
    anchor = lo if not math.isinf(lo) else hi
    if math.isinf(anchor):
        raise DivergentIntegralError("product supported on the whole line")
    c = np.convolve(p.reanchored(anchor), q.reanchored(anchor))
    return Piece(lo, hi, p.rate + q.rate, anchor, c)


def _preferred_anchor(lo: float, hi: float, rate: complex, current: float) -> float:
    if current == lo or current == hi:
        return current
    if math.isinf(lo):
        return hi
    if math.isinf(hi) or rate.real <= 0:
        return lo
    return hi


def canonical_pieces(pieces: Iterable[Piece]) -> list[Piece]:
    """Split at all breakpoints and merge pieces with equal support and rate."""
    pieces = [p for p in pieces if not p.is_zero() and p.a < p.b]
    if len(pieces) <= 1:
        return pieces
    bps = sorted(
        {p.a for p in pieces if not math.isinf(p.a)}
        | {p.b for p in pieces if not math.isinf(p.b)}
    )
    bps_arr = np.array(bps)
    groups: dict = {}
    order: list = []
    for p in pieces:
        inner = bps_arr[(bps_arr > p.a) & (bps_arr < p.b)]
        cuts = [p.a, *inner.tolist(), p.b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            key = (lo, hi, p.rate)
            slot = groups.get(key)
            if slot is None:
                anchor = _preferred_anchor(lo, hi, p.rate, p.shift)
                groups[key] = [anchor, p.reanchored(anchor).copy()]
                order.append(key)
            else:
                c = p.reanchored(slot[0])
                acc = slot[1]
                if c.size > acc.size:
                    c = c.copy()
                    c[: acc.size] += acc
                    slot[1] = c
                else:
                    acc[: c.size] += c
    out = []
    for key in order:
        anchor, c = groups[key]
        pc = Piece(key[0], key[1], key[2], anchor, c)
        if not pc.is_zero():
            out.append(pc)
    out.sort(key=lambda p: (p.a, p.b, p.rate.real, p.rate.imag))
    return out


def _particular(p: np.ndarray, mu: complex) -> np.ndarray:
    """Polynomial Q with Q' + mu Q = p."""
    k = p.size - 1
    if mu == 0:
        q = np.zeros(k + 2, dtype=complex)
        q[1:] = p / np.arange(1, k + 2)
        return q
    q = np.empty(k + 1, dtype=complex)
    q[k] = p[k] / mu
    for j in range(k - 1, -1, -1):
        q[j] = (p[j] - (j + 1) * q[j + 1]) / mu
    return q


def _taylor_primitive(p: np.ndarray, mu: complex, width: float, damping: float | None = None) -> np.ndarray:
    """Polynomial T(y) ~ int_0^y exp(mu w) p(w) dw.

    Accurate for |mu| width <= 3, or, with ``damping`` = Re z >> |mu|, uniformly
    on [0, inf) after multiplication by exp(-z y).
    """
    k = len(p) - 1
    terms = [1.0 + 0j]
    m = 0
    while True:
        m += 1
        terms.append(terms[-1] * mu / m)
        if m <= 4:
            continue
        if damping is None:
            if (abs(mu) * width) ** m / math.factorial(m) < 1e-19:
                break
        elif (abs(mu) / damping) ** m * (m + k + 1) ** (k + 1) / math.factorial(k + 1) < 1e-19:
            break
    prod = np.convolve(np.array(terms), p)
    out = np.zeros(prod.size + 1, dtype=complex)
    out[1:] = prod / np.arange(1, prod.size + 1)
    return out


def causal_piece(p: Piece, z: complex) -> list[Piece]:
    """x -> int_{-inf}^x exp(-z (x - s)) p(s) ds as pieces."""
    z = complex(z)
    a, b, lam, s = p.a, p.b, p.rate, p.shift
    if math.isinf(a):
        raise DivergentIntegralError("causal filter needs a bounded-below support")
    mu = lam + z
    width = b - a
    if math.isinf(b):
        decays = lam.real < 0 or (p.degree == 0 and lam == 0 and z.real > 0)
        if not decays:
            raise DivergentIntegralError("causal filter of a non-decaying unbounded piece")
    out: list[Piece] = []
    cut = a
    taylor_end_value = None
    if z != 0 and mu != 0 and abs(mu) < abs(z) / 4:
        phat = taylor_shift(p.coeffs, a - s)
        if abs(mu) <= 0.075 * z.real:
            # 3 / |mu| would exceed 40 / Re z; exp(-z y) damps the series uniformly,
            # so one piece covers the whole support
            span = width
            T = _taylor_primitive(phat, mu, span, z.real) * cmath.exp(lam * (a - s))
        else:
            span = min(width, 3.0 / abs(mu))
            T = _taylor_primitive(phat, mu, span) * cmath.exp(lam * (a - s))
        cut = a + span
        out.append(Piece(a, cut, -z, a, T))
        if cut >= b and not math.isinf(b):
            taylor_end_value = cmath.exp(-z * width) * complex(npoly.polyval(width, T))
    if cut < b:
        Q = _particular(p.coeffs, mu)
        Pa = cmath.exp(lam * (a - s)) * complex(npoly.polyval(a - s, Q))
        out.append(Piece(cut, b, lam, s, Q))
        out.append(Piece(cut, b, -z, a, [-Pa]))
    if not math.isinf(b):
        if taylor_end_value is None:
            Pb = cmath.exp(lam * (b - s)) * complex(npoly.polyval(b - s, Q))
            C = Pb - Pa * cmath.exp(-z * width)
        else:
            C = taylor_end_value
        out.append(Piece(b, INF, -z, b, [C]))
    return out


def anticausal_piece(p: Piece, z: complex) -> list[Piece]:
    """x -> int_x^inf exp(-z (s - x)) p(s) ds as pieces."""
    z = complex(z)
    a, b = p.a, p.b
    if not math.isinf(b):
        return [q.reflect(b) for q in causal_piece(p.reflect(b), z)]
    lam, s = p.rate, p.shift
    if not (lam - z).real < 0:
        raise DivergentIntegralError("anticausal filter of a non-decaying piece")
    Q = -_particular(p.coeffs, lam - z)
    out = [Piece(a, INF, lam, s, Q)]
    if not math.isinf(a):
        Aa = cmath.exp(lam * (a - s)) * complex(npoly.polyval(a - s, Q))
        out.append(Piece(-INF, a, z, a, [Aa]))
    return out


def as_pieces(seq: Sequence[Piece]) -> tuple[Piece, ...]:
    return tuple(p for p in seq if p is not None and p.a < p.b and not p.is_zero())
