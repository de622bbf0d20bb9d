"""Resolvent of the damped wave operator for Re z > 0 in closed form."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import _expoly as ex
from .errors import CriticalCouplingError, HalfPlaneError, ZeroFunctionError
from .graphfun import (
    EdgeFunction,
    GraphFunction,
    StatePair,
    check_domain,
    energy_norm,
)


def _require_right_half_plane(z: complex) -> complex:
    z = complex(z)
    if not z.real > 0:
        raise HalfPlaneError(f"Re z must be positive, got z = {z}")
    return z


def rho_kernel(z: complex, y):
    """z exp(-z |y|) / 2."""
    z = _require_right_half_plane(z)
    y = np.asarray(y, dtype=float)
    out = z * np.exp(-z * np.abs(y)) / 2
    return complex(out) if out.ndim == 0 else out


def causal_filter(h: EdgeFunction, z: complex) -> EdgeFunction:
    """x -> int_0^x exp(-z (x - s)) h(s) ds."""
    out = []
    for p in h.clip().pieces:
        out.extend(ex.causal_piece(p, z))
    return EdgeFunction(out).clip()


def anticausal_filter(h: EdgeFunction, z: complex) -> EdgeFunction:
    """x -> int_x^inf exp(-z (s - x)) h(s) ds."""
    out = []
    for p in h.clip().pieces:
        out.extend(ex.anticausal_piece(p, z))
    return EdgeFunction(out).clip()


def halfline_convolve(z: complex, h: EdgeFunction) -> EdgeFunction:
    """x -> int_0^inf rho_z(x - s) h(s) ds."""
    z = _require_right_half_plane(z)
    return ((causal_filter(h, z) + anticausal_filter(h, z)) * (z / 2)).canonical()


@dataclass(frozen=True)
class ConvBounds:
    l2_ratio: float
    trace_ratio: float
    l2_bound: float
    trace_bound: float

    @property
    def ok(self) -> bool:
        slack = 1 + 1e-12
        return self.l2_ratio <= self.l2_bound * slack and self.trace_ratio <= self.trace_bound * slack


def conv_bounds_check(z: complex, h: EdgeFunction) -> ConvBounds:
    z = _require_right_half_plane(z)
    hn = h.norm()
    if hn == 0:
        raise ZeroFunctionError("h must be nonzero")
    c = halfline_convolve(z, h)
    res = ConvBounds(
        l2_ratio=c.norm() / hn,
        trace_ratio=abs(c.at0()) / hn,
        l2_bound=abs(z) / z.real,
        trace_bound=abs(z) / (2 * math.sqrt(2 * z.real)),
    )
    if not res.ok:
        raise AssertionError(f"convolution bound violated: {res}")
    return res


@dataclass(frozen=True)
class ResolventWork:
    z: complex
    alpha: complex
    a_tilde: tuple[complex, ...]
    u0_shifted: complex
    conv_fg: tuple[EdgeFunction, ...]


def resolvent_apply(alpha: complex, z: complex, F: StatePair) -> tuple[StatePair, ResolventWork]:
    """U = (W_alpha - z)^{-1} F for Re z > 0 and alpha != N."""
    z = _require_right_half_plane(z)
    alpha = complex(alpha)
    N = F.n_edges
    if alpha == N:
        raise CriticalCouplingError(
            f"alpha = N = {N}: z is an eigenvalue, the resolvent does not exist"
        )
    f, g = F.u, F.v
    fp = f.deriv()
    conv = [halfline_convolve(z, fp[j] + g[j]) for j in range(N)]
    traces = [c.at0() for c in conv]
    u0s = 2.0 * sum(traces) / (z * z * (alpha - N))
    a_tilde = [u0s + t / (z * z) for t in traces]
    decay = EdgeFunction.exp(-z)
    us, vs = [], []
    for j in range(N):
        kf = causal_filter(fp[j], z)
        us.append((decay * a_tilde[j] - conv[j] / (z * z) + kf / z - f[j] / z).canonical())
        vs.append((decay * (z * a_tilde[j]) - conv[j] / z + kf).canonical())
    U = StatePair(GraphFunction(us, f.graph), GraphFunction(vs, f.graph))
    work = ResolventWork(z, alpha, tuple(a_tilde), u0s, tuple(conv))
    return U, work


def apply_generator(U: StatePair, alpha: complex, tol: float | None = None) -> StatePair:
    """W_alpha (u, v) = (v, u'')."""
    check_domain(U, alpha, tol)
    return StatePair(U.v, U.u.deriv().deriv())


def shifted_residual(U: StatePair, z: complex) -> StatePair:
    """(W - z) U without the domain check."""
    return StatePair(U.v - U.u * z, U.u.deriv().deriv() - U.v * z).canonical()


def resolvent_residual(alpha: complex, z: complex, F: StatePair, U: StatePair | None = None) -> float:
    """||(W_alpha - z) U - F|| / ||F|| for U = R(z) F."""
    if U is None:
        U, _ = resolvent_apply(alpha, z, F)
    W = apply_generator(U, alpha)
    R = StatePair(W.u - U.u * z - F.u, W.v - U.v * z - F.v).canonical()
    fn = energy_norm(F)
    return energy_norm(R) / fn if fn else energy_norm(R)


def reflect_velocity(U: StatePair) -> StatePair:
    """T(u, v) = (u, -v); T W_alpha T = -W_{-alpha}."""
    return StatePair(U.u, -U.v)


def resolvent_apply_left(alpha: complex, z: complex, F: StatePair) -> StatePair:
    """(W_alpha - z)^{-1} F for Re z < 0 via (W_alpha - z)^{-1} = -T R_{-alpha}(-z) T."""
    z = complex(z)
    if not z.real < 0:
        raise HalfPlaneError(f"Re z must be negative, got z = {z}")
    U, _ = resolvent_apply(-complex(alpha), -z, reflect_velocity(F))
    return -reflect_velocity(U)
