"""Exact d'Alembert solutions of the damped wave equation on the star graph.

On each edge u_j(t, x) = u(0, 0) + phi_j(x - t) + psi_j(x + t). The incoming
profiles psi are fixed by the data; the outgoing profiles at negative arguments
come from the vertex conditions, Phi(s) := phi(-s) = -M_-^{-1} M_+ psi(s).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _expoly as ex
from .errors import CriticalCouplingError, CriticalityError, HorizonError, NegativeTimeError
from .graphfun import (
    EdgeFunction,
    GraphFunction,
    StatePair,
    check_domain,
    l2_inner,
)

INF = math.inf


def _primitive0(h: EdgeFunction) -> EdgeFunction:
    """x -> int_0^x h on [0, inf)."""
    return h.clip().primitive().clip().canonical()


def dalembert_split(f: GraphFunction, g: GraphFunction) -> tuple[GraphFunction, GraphFunction]:
    """phi_j = (1/2) int_0^x (f_j' - g_j), psi_j = (1/2) int_0^x (f_j' + g_j)."""
    fp = f.deriv()
    phi = GraphFunction([_primitive0((a - b) * 0.5) for a, b in zip(fp, g)], f.graph)
    psi = GraphFunction([_primitive0((a + b) * 0.5) for a, b in zip(fp, g)], f.graph)
    return phi, psi


def reflection_matrices(alpha: complex, N: int) -> tuple[np.ndarray, np.ndarray]:
    alpha = complex(alpha)
    out = []
    for sign in (-1.0, 1.0):
        M = np.zeros((N, N), dtype=complex)
        for j in range(N - 1):
            M[j, j] = 1.0
            M[j, j + 1] = -1.0
        M[N - 1, :] = alpha / N + sign
        out.append(M)
    return out[0], out[1]


def _combine(K: np.ndarray, fs) -> list[EdgeFunction]:
    N = len(fs)
    out = []
    for j in range(N):
        acc = EdgeFunction()
        for k in range(N):
            if K[j, k] != 0:
                acc = acc + fs[k] * complex(K[j, k])
        out.append(acc.canonical())
    return out


@dataclass(frozen=True)
class CharacteristicData:
    phi: GraphFunction
    psi: GraphFunction
    phi_neg: GraphFunction  # s -> phi(-s) for 0 <= s < horizon
    m_minus: np.ndarray
    m_plus: np.ndarray
    horizon: float = INF


@dataclass(frozen=True)
class EvolutionProblem:
    alpha: complex
    f: GraphFunction
    g: GraphFunction
    chars: CharacteristicData

    @property
    def n_edges(self) -> int:
        return self.f.n_edges

    @property
    def u00(self) -> complex:
        return self.f[0].at0()


def make_problem(alpha: complex, f: GraphFunction, g: GraphFunction,
                 tol: float | None = None) -> EvolutionProblem:
    alpha = complex(alpha)
    N = f.n_edges
    if alpha == N:
        raise CriticalCouplingError("alpha = N: the solution is not unique, use critical_family")
    check_domain(StatePair(f, g), alpha, tol)
    phi, psi = dalembert_split(f, g)
    mm, mp = reflection_matrices(alpha, N)
    cond = np.linalg.cond(mm)
    if cond > 1e10:
        warnings.warn(f"reflection matrix is ill-conditioned (cond = {cond:.2e})", RuntimeWarning)
    K = -np.linalg.solve(mm, mp)
    phi_neg = GraphFunction(_combine(K, psi.edges), f.graph)
    return EvolutionProblem(alpha, f, g, CharacteristicData(phi, psi, phi_neg, mm, mp))


def _check_time(t: float, horizon: float) -> float:
    t = float(t)
    if t < 0:
        raise NegativeTimeError(f"t must be non-negative, got {t}")
    if t >= horizon:
        raise HorizonError(f"t = {t} is beyond the horizon {horizon}")
    return t


def _assemble(u00: complex, phi, phi_neg, psi, t: float, graph) -> StatePair:
    us, vs = [], []
    for j in range(len(phi.edges)):
        out_right = phi[j].translate(t).clip(t, INF)
        out_left = phi_neg[j].clip(0.0, t + 1.0).reflect(t).clip(0.0, t) if t > 0 else EdgeFunction()
        inc = psi[j].translate(-t).clip()
        u = EdgeFunction.term(u00) + out_right + out_left + inc
        dphi, dphin, dpsi = phi[j].deriv(), phi_neg[j].deriv(), psi[j].deriv()
        v = (
            -dphi.translate(t).clip(t, INF)
            + (dphin.clip(0.0, t + 1.0).reflect(t).clip(0.0, t) if t > 0 else EdgeFunction())
            + dpsi.translate(-t).clip()
        )
        us.append(u.canonical())
        vs.append(v.canonical())
    return StatePair(GraphFunction(us, graph), GraphFunction(vs, graph))


def solution_at(P: EvolutionProblem, t: float) -> StatePair:
    """(u(t), du/dt(t)) in closed form."""
    t = _check_time(t, P.chars.horizon)
    c = P.chars
    return _assemble(P.u00, c.phi, c.phi_neg, c.psi, t, P.f.graph)


def _sq(h: EdgeFunction, lo: float, hi: float) -> float:
    r = h.clip(lo, hi)
    return r.norm2()


def _energy(phi, phi_neg, psi, t: float) -> float:
    total = 0.0
    for j in range(len(phi.edges)):
        total += _sq(phi_neg[j].deriv(), 0.0, t) if t > 0 else 0.0
        total += _sq(phi[j].deriv(), 0.0, INF)
        total += _sq(psi[j].deriv(), t, INF)
    return 2.0 * total


def energy(P: EvolutionProblem, t: float) -> float:
    """E(t) = 2 int_0^t |Phi'|^2 + 2 int_0^inf |phi'|^2 + 2 int_t^inf |psi'|^2."""
    t = _check_time(t, P.chars.horizon)
    c = P.chars
    return _energy(c.phi, c.phi_neg, c.psi, t)


def energy_growth_bound(alpha: complex, N: int) -> float:
    """sup_t E(t) / E(0) <= max(1, |alpha + N|^2 / |alpha - N|^2)."""
    alpha = complex(alpha)
    return max(1.0, abs(alpha + N) ** 2 / abs(alpha - N) ** 2)


def t0_of(f: GraphFunction, g: GraphFunction, tol: float = 1e-12) -> float:
    """First time the vertex receives incoming data: sup{t : sum_j (f_j' + g_j) = 0 on [0, t]}."""
    # coefficients below tol times the data scale count as rounding residue
    fp = f.deriv()
    total = EdgeFunction()
    for a, b in zip(fp, g):
        total = total + a + b
    total = total.clip().canonical()
    scale = max(fp.max_coeff(), g.max_coeff(), 1.0)
    live = [p for p in total.pieces if np.abs(p.coeffs).max() > tol * scale]
    if not live:
        return INF
    return max(0.0, min(p.a for p in live))


@dataclass(frozen=True)
class CriticalSolution:
    """Solution branch at alpha = N on [0, tau) selected by theta."""

    f: GraphFunction
    g: GraphFunction
    theta: EdgeFunction
    tau: float
    phi: GraphFunction
    psi: GraphFunction
    phi_neg: GraphFunction

    @property
    def alpha(self) -> complex:
        return complex(self.f.n_edges)

    @property
    def n_edges(self) -> int:
        return self.f.n_edges

    @property
    def u00(self) -> complex:
        return self.f[0].at0()


def critical_family(f: GraphFunction, g: GraphFunction, theta: EdgeFunction, tau: float,
                    alpha: complex | None = None, tol: float = 1e-8) -> CriticalSolution:
    """Phi_j(s) = -theta(s) + psi_1(s) - psi_j(s) on [0, tau).

    theta must satisfy theta(0) = 0 and theta'(0) = phi_1'(0+).
    """
    N = f.n_edges
    alpha = complex(N) if alpha is None else complex(alpha)
    if alpha != N:
        raise CriticalityError(f"critical family needs alpha = N = {N}, got {alpha}")
    t0 = t0_of(f, g)
    if tau > t0:
        raise HorizonError(f"tau = {tau} exceeds t0 = {t0}: no solution beyond t0")
    check_domain(StatePair(f, g), alpha)
    phi, psi = dalembert_split(f, g)
    th = theta.clip(0.0, tau)
    if abs(th.at0()) > tol:
        raise ValueError("theta(0) must vanish")
    slope = phi[0].deriv().at0()
    if abs(th.deriv().at0() - slope) > tol * max(1.0, abs(slope)):
        raise ValueError("theta'(0) must equal phi_1'(0+)")
    phi_neg = GraphFunction(
        [(-th + psi[0].clip(0.0, tau) - psi[j].clip(0.0, tau)).canonical() for j in range(N)],
        f.graph,
    )
    return CriticalSolution(f, g, th, float(tau), phi, psi, phi_neg)


def critical_solution_at(S: CriticalSolution, t: float) -> StatePair:
    t = _check_time(t, S.tau)
    return _assemble(S.u00, S.phi, S.phi_neg, S.psi, t, S.f.graph)


def critical_energy(S: CriticalSolution, t: float) -> float:
    t = _check_time(t, S.tau)
    return _energy(S.phi, S.phi_neg, S.psi, t)


def linear_theta(f: GraphFunction, g: GraphFunction, tau: float, curvature: complex = 0.0) -> EdgeFunction:
    """theta(s) = phi_1'(0) s + curvature s^2 on [0, tau)."""
    phi, _ = dalembert_split(f, g)
    return EdgeFunction.poly([0.0, phi[0].deriv().at0(), curvature], 0.0, tau)


def escalating_theta(f: GraphFunction, g: GraphFunction, tau: float, levels: int = 30,
                     amplitude: float | None = None) -> EdgeFunction:
    """theta with piecewise-linear theta' whose L2(0, t) norm diverges as t -> tau.

    theta' is continuous, equal to phi_1'(0) at 0, and takes the value
    phi_1'(0) + A 2^{k/2} (k + 1) at s_k = tau (1 - 2^{-k}); the last value is held
    on [s_levels, tau). Each level adds about A^2 tau (k + 1)^2 to int |theta'|^2.
    The amplitude A defaults to the square root of the initial energy.
    """
    phi, psi = dalembert_split(f, g)
    if amplitude is None:
        e0 = _energy(phi, phi, psi, 0.0)
        amplitude = math.sqrt(e0) if e0 > 0 else 1.0
    d0 = phi[0].deriv().at0()
    knots = [tau * (1 - 2.0 ** -k) for k in range(levels + 1)]
    vals = [d0] + [d0 + amplitude * 2.0 ** (k / 2) * (k + 1) for k in range(1, levels + 1)]
    pieces = []
    for k in range(levels):
        a, b = knots[k], knots[k + 1]
        slope = (vals[k + 1] - vals[k]) / (b - a)
        pieces.append(ex.Piece(a, b, 0.0, a, [vals[k], slope]))
    pieces.append(ex.Piece(knots[-1], tau, 0.0, knots[-1], [vals[-1]]))
    dtheta = EdgeFunction(pieces)
    return dtheta.primitive().clip(0.0, tau).canonical()


def pde_residual(state_at, t: float, xs, h: float = 1e-3) -> float:
    """max |d_t v - d_xx u| at the points xs, with d_t v by a 4th order central difference.

    The points must keep a distance larger than 2h from characteristic breakpoints.
    """
    xs = np.asarray(xs, dtype=float)
    S = state_at(t)
    stencil = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))
    worst = 0.0
    for j in range(S.n_edges):
        dtv = sum(w * state_at(t + k * h).v[j](xs) for k, w in stencil) / (12 * h)
        uxx = S.u[j].deriv().deriv()(xs)
        worst = max(worst, float(np.max(np.abs(dtv - uxx))))
    return worst


def vertex_report(S: StatePair, alpha: complex) -> tuple[complex, float, float]:
    """(u(t, 0), |Robin residual|, continuity defect of u and v)."""
    ut = S.u.traces()
    vt = S.v.traces()
    du = max(abs(a - b) for a in ut for b in ut)
    dv = max(abs(a - b) for a in vt for b in vt)
    robin = sum(S.u.derivative_traces()) + complex(alpha) * complex(np.mean(vt))
    return complex(np.mean(ut)), abs(robin), max(du, dv)


def direct_energy(S: StatePair) -> float:
    return (l2_inner(S.u.deriv(), S.u.deriv()) + l2_inner(S.v, S.v)).real
