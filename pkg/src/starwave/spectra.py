"""Eigenchains, quasimodes and certified lower bounds for the resolvent norm."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CriticalCouplingError,
    EmptyDictionaryError,
    HalfPlaneError,
    IntegrabilityError,
)
from .graphfun import (
    EdgeFunction,
    GraphFunction,
    StatePair,
    energy_inner,
    energy_norm,
    l2_inner,
    vertex_value,
)
from .resolvent import shifted_residual


class DegenerateQuasimodeWarning(UserWarning):
    pass


def eig_chain(N: int, z: complex, m: int) -> list[StatePair]:
    """Jordan chain U_1..U_m of W_N at the eigenvalue z."""
    z = complex(z)
    if not z.real > 0:
        raise HalfPlaneError(f"eigenvalues need Re z > 0, got z = {z}")
    if m < 1:
        raise ValueError("chain length must be positive")
    us = [GraphFunction.zero(N)]
    out = []
    for n in range(1, m + 1):
        c = (-1.0) ** (n - 1) / math.factorial(n - 1)
        u = GraphFunction.radial(EdgeFunction.term(c, n - 1, -z), N)
        v = (u * z + us[-1]).canonical()
        us.append(u)
        out.append(StatePair(u, v))
    return out


def chain_residual(chain: Sequence[StatePair], z: complex, N: int) -> list[float]:
    """||W_N U_n - z U_n - U_{n-1}|| / ||U_n|| for every chain element."""
    from .resolvent import apply_generator

    out = []
    prev = StatePair.zero(N)
    for U in chain:
        W = apply_generator(U, N)
        R = (W - U * complex(z) - prev).canonical()
        out.append(energy_norm(R) / energy_norm(U))
        prev = U
    return out


# polynomial bump (x-1)^2 (2-x)^2 on [1, 2); its squared L2 norm is 1/630
_BUMP = EdgeFunction.poly(np.sqrt(630.0) * np.array([0.0, 0.0, 1.0, -2.0, 1.0]), 1.0, 2.0)


def bump() -> EdgeFunction:
    """L2-normalised C1 bump supported in [1, 2]."""
    return _BUMP


def _axis_profile(theta: float, n: float) -> EdgeFunction:
    return (EdgeFunction.exp(1j * theta) * _BUMP.dilate(1.0 / n) * (1.0 / math.sqrt(n))).canonical()


def quasimode_axis(theta: float, n: int, N: int, alpha: complex = 0.0) -> tuple[StatePair, float]:
    """Quasimode for i theta supported on [n, 2n) of the first edge."""
    if n < 1:
        raise ValueError("n must be positive")
    theta = float(theta)
    if theta == 0:
        warnings.warn(
            "theta = 0: ||U_n|| decays like 1/n, the residual ratio does not shrink",
            DegenerateQuasimodeWarning,
            stacklevel=2,
        )
    u = _axis_profile(theta, n)
    U = StatePair(GraphFunction.single(u, N), GraphFunction.single(u * (1j * theta), N))
    R = shifted_residual(U, 1j * theta)
    return U, energy_norm(R) / energy_norm(U)


def eta_ratio_formula(alpha: complex, z: complex, N: int) -> float:
    alpha, z = complex(alpha), complex(z)
    return abs(z) * abs(alpha - N) * abs(alpha + N) / (N * math.sqrt(abs(alpha) ** 2 + N * N))


def quasimode_eta(alpha: complex, z: complex, N: int) -> tuple[StatePair, float]:
    """U = (eta, z eta) on every edge with eta = exp(-alpha z x / N)."""
    alpha, z = complex(alpha), complex(z)
    if z == 0 or not (alpha * z).real > 0:
        raise IntegrabilityError(f"exp(-alpha z x / N) is not square integrable for alpha z = {alpha * z}")
    eta = GraphFunction.radial(EdgeFunction.exp(-alpha * z / N), N)
    U = StatePair(eta, eta * z)
    R = shifted_residual(U, z)
    return U, energy_norm(R) / energy_norm(U)


def c0_function(alpha, N: int):
    alpha = np.asarray(alpha, dtype=complex)
    return N * np.sqrt(np.abs(alpha) ** 2 + N * N) / np.abs(alpha + N)


@dataclass(frozen=True)
class C0Grid:
    mod_min: float = 1e-3
    mod_max: float = 1e3
    n_mod: int = 1201
    n_arg: int = 721


def c0_search(N: int, search: C0Grid | None = None) -> tuple[float, complex]:
    """Grid infimum over the open right half-plane and its location."""
    s = search or C0Grid()
    mods = np.logspace(math.log10(s.mod_min), math.log10(s.mod_max), s.n_mod)
    args = np.linspace(-math.pi / 2, math.pi / 2, s.n_arg + 2)[1:-1]
    alpha = mods[:, None] * np.exp(1j * args[None, :])
    vals = c0_function(alpha, N)
    k = np.unravel_index(np.argmin(vals), vals.shape)
    return float(vals[k]), complex(alpha[k])


def c0_constant(N: int, search: C0Grid | None = None) -> float:
    return c0_search(N, search)[0]


class SeedGram:
    """Gram data that makes ||U|| / ||(W_alpha - z) U|| cheap for a projected seed.

    With A = (v', u'') and B = (u', v) taken componentwise, (W - z) U has energy
    norm ||A - z B|| and ||U|| = ||B||. Projection onto Dom(W_alpha) adds
    -r(alpha) E with E = (x e^{-x} on edge 1, 0), so both A and B are affine in r.
    """

    def __init__(self, seed: StatePair):
        N = seed.n_edges
        self.seed = seed
        self.slope_sum = complex(sum(seed.u.derivative_traces()))
        self.v0 = vertex_value(seed.v)
        e = GraphFunction.single(EdgeFunction.term(1.0, 1, -1.0), N)
        zero = GraphFunction.zero(N)
        u, v = seed.u, seed.v
        comps = [
            (v.deriv(), u.deriv().deriv()),      # A0
            (zero, e.deriv().deriv()),           # AE
            (u.deriv(), v),                      # B0
            (e.deriv(), zero),                   # BE
        ]
        comps = [(x.canonical(), y.canonical()) for x, y in comps]
        G = np.zeros((4, 4), dtype=complex)
        for i in range(4):
            for j in range(i, 4):
                G[i, j] = l2_inner(comps[i][0], comps[j][0]) + l2_inner(comps[i][1], comps[j][1])
                G[j, i] = np.conj(G[i, j])
        self.G = G

    def robin_defect(self, alpha: complex) -> complex:
        return self.slope_sum + complex(alpha) * self.v0

    def projected(self, alpha: complex) -> StatePair:
        from .dictionary import project_to_domain

        return project_to_domain(self.seed, alpha)

    def ratio(self, alpha: complex, z):
        """Ratios for scalar alpha and an array of z; NaN where the expansion is unreliable."""
        r = self.robin_defect(alpha)
        z = np.asarray(z, dtype=complex)
        cA = np.array([1.0, -r, 0.0, 0.0])
        cB = np.array([0.0, 0.0, 1.0, -r])
        G = self.G
        # G[i, j] = <X_i, X_j>, so ||sum c_i X_i||^2 = c^T G conj(c)
        aa = np.real(cA @ G @ np.conj(cA))
        bb = np.real(cB @ G @ np.conj(cB))
        ab = cA @ G @ np.conj(cB)  # <A, B>
        res2 = aa - 2 * np.real(np.conj(z) * ab) + np.abs(z) ** 2 * bb
        scale = aa + np.abs(z) ** 2 * bb
        out = np.sqrt(bb / np.maximum(res2, 1e-300))
        return np.where(res2 > 1e-6 * scale, out, np.nan)


def _exact_ratio(U: StatePair, z: complex) -> float:
    res = energy_norm(shifted_residual(U, z))
    return energy_norm(U) / res if res > 0 else math.inf


AXIS_SCALES = (10, 100, 1_000, 10_000, 100_000, 1_000_000)


class AxisGram:
    """||U|| / ||(W - z) U|| for the axis quasimode with theta = Im z, any Re z."""

    def __init__(self, theta: float, n: int, N: int):
        U, _ = quasimode_axis(theta, n, N) if theta != 0 else _quiet_axis(n, N)
        R = shifted_residual(U, 1j * theta)
        self.uu = energy_norm(U) ** 2
        self.rr = energy_norm(R) ** 2
        self.ru = energy_inner(R, U)

    def ratio(self, x):
        # (W - z) U = R - x U with x = Re z
        x = np.asarray(x, dtype=float)
        res2 = self.rr - 2 * x * self.ru.real + x * x * self.uu
        return np.sqrt(self.uu / np.maximum(res2, 1e-300))


def _quiet_axis(n: int, N: int):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateQuasimodeWarning)
        return quasimode_axis(0.0, n, N)


def _check_point(alpha: complex, z: complex, N: int) -> None:
    if not complex(z).real > 0:
        raise HalfPlaneError(f"Re z must be positive, got z = {z}")
    if complex(alpha) == N:
        raise CriticalCouplingError(f"alpha = N = {N}: resolvent undefined")


def resolvent_norm_lower(alpha: complex, z: complex, dictionary: Sequence[StatePair],
                         axis: bool = True) -> float:
    """Certified lower bound for ||(W_alpha - z)^{-1}|| by evaluating test vectors.

    Seeds are projected onto Dom(W_alpha); the eta quasimode is added when it is
    square integrable, and axis quasimodes with theta = Im z when ``axis`` is set.
    """
    alpha, z = complex(alpha), complex(z)
    if not dictionary:
        raise EmptyDictionaryError("dictionary is empty")
    N = dictionary[0].n_edges
    _check_point(alpha, z, N)
    best = 0.0
    for seed in dictionary:
        best = max(best, _exact_ratio(SeedGram(seed).projected(alpha), z))
    if (alpha * z).real > 0:
        U, _ = quasimode_eta(alpha, z, N)
        best = max(best, _exact_ratio(U, z))
    if axis:
        for n in AXIS_SCALES:
            best = max(best, float(AxisGram(z.imag, n, N).ratio(z.real)))
    return best


@dataclass(frozen=True)
class PseudospectrumRecord:
    z: complex
    alpha: complex
    norm_lower_estimate: float
    eta_bound: float
    axis_bound: float

    def row(self) -> tuple[float, ...]:
        return (self.z.real, self.z.imag, self.alpha.real, self.alpha.imag,
                self.norm_lower_estimate, self.eta_bound, self.axis_bound)


@dataclass(frozen=True)
class ZGrid:
    re_min: float
    re_max: float
    re_n: int
    im_min: float
    im_max: float
    im_n: int

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.linspace(self.re_min, self.re_max, self.re_n),
                np.linspace(self.im_min, self.im_max, self.im_n))


def _scan_row(alpha: complex, y: float, xs: np.ndarray, grams: Sequence[SeedGram], N: int,
              c0: float) -> list[PseudospectrumRecord]:
    zs = xs + 1j * y
    best = np.zeros(xs.size)
    for g in grams:
        r = g.ratio(alpha, zs)
        bad = np.isnan(r)
        if bad.any():
            proj = g.projected(alpha)
            r[bad] = [_exact_ratio(proj, zz) for zz in zs[bad]]
        best = np.maximum(best, r)
    for n in AXIS_SCALES:
        best = np.maximum(best, AxisGram(y, n, N).ratio(xs))
    out = []
    for k, z in enumerate(zs):
        est = best[k]
        if (alpha * z).real > 0:
            est = max(est, _exact_ratio(quasimode_eta(alpha, z, N)[0], z))
        out.append(PseudospectrumRecord(
            complex(z), alpha, float(est),
            c0 / (abs(z) * abs(alpha - N)), 1.0 / z.real,
        ))
    return out


def pseudospectrum_scan(alpha: complex, z_grid: ZGrid, n_edges: int,
                        dictionary: Sequence[StatePair] | None = None,
                        c0: float | None = None, workers: int = 1) -> list[PseudospectrumRecord]:
    """Records ordered row-major by (Im z, Re z)."""
    from .dictionary import domain_dictionary

    alpha = complex(alpha)
    N = n_edges
    if alpha == N:
        raise CriticalCouplingError(f"alpha = N = {N}: every z with Re z > 0 is an eigenvalue")
    xs, ys = z_grid.axes()
    if not (xs > 0).all():
        raise HalfPlaneError("z grid touches or crosses the imaginary axis")
    dictionary = domain_dictionary(N) if dictionary is None else dictionary
    if not dictionary:
        raise EmptyDictionaryError("dictionary is empty")
    c0 = c0_constant(N) if c0 is None else c0
    grams = [SeedGram(s) for s in dictionary]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_scan_row, [alpha] * len(ys), ys, [xs] * len(ys),
                                 [grams] * len(ys), [N] * len(ys), [c0] * len(ys)))
    else:
        rows = [_scan_row(alpha, y, xs, grams, N, c0) for y in ys]
    return [r for row in rows for r in row]


def divergence_slope(alpha_target: complex, z: complex, N: int, offsets: Sequence[float],
                     direction: complex = 1.0, dictionary=None) -> float:
    """Least-squares slope of log lower bound against log |alpha - N|."""
    from .dictionary import domain_dictionary

    dictionary = domain_dictionary(N) if dictionary is None else dictionary
    vals = [resolvent_norm_lower(alpha_target + d * direction, z, dictionary, axis=False)
            for d in offsets]
    return float(np.polyfit(np.log(offsets), np.log(vals), 1)[0])


def upper_bound_fit(N: int, alphas: Sequence[complex], zs: Sequence[complex],
                    inputs: Sequence[StatePair]) -> float:
    """Smallest C with sup ||R(z) F|| / ||F|| <= C (1 + 1/|alpha - N|) / Re z on the grid."""
    from .resolvent import resolvent_apply

    worst = 0.0
    for a in alphas:
        for z in zs:
            shape = (1 + 1 / abs(complex(a) - N)) / complex(z).real
            for F in inputs:
                U, _ = resolvent_apply(a, z, F)
                worst = max(worst, energy_norm(U) / energy_norm(F) / shape)
    return worst


def axis_slope(theta: float, ns: Sequence[int], N: int = 2, alpha: complex = 0.0) -> float:
    ratios = [quasimode_axis(theta, n, N, alpha)[1] for n in ns]
    return float(np.polyfit(np.log(ns), np.log(ratios), 1)[0])
