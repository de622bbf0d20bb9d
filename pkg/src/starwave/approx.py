"""Smeared vertex dampings and the finite-element resolvent of the smeared operator.

The resolvent of W_{alpha,n} is reduced to the form
    Q(w, phi) = <w', phi'> - alpha z <rho^n w, phi> + z^2 <w, phi>
through u = R[(alpha rho^n - z) f - g], v = f + z u. Replacing rho^n by the
vertex Dirac mass gives the form of W_alpha itself, solved on the same mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.sparse.linalg import splu

from .errors import CoercivityError, DomainError, MeshTooCoarseError
from .graphfun import EdgeFunction, GraphFunction, StatePair, energy_norm, vertex_trace
from .tolerances import DEFAULT_TOL

_GX, _GW = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class DampingProfile:
    """Base profiles rho_j (unit total mass) and the concentration scale n."""

    rho: tuple[EdgeFunction, ...]
    n: float = 1.0

    @classmethod
    def indicator(cls, n_edges: int, n: float = 1.0) -> "DampingProfile":
        """rho_j = (1/N) 1_[0,1) on every edge."""
        return cls(tuple(EdgeFunction.poly([1.0 / n_edges], 0.0, 1.0) for _ in range(n_edges)), n)

    def __post_init__(self):
        mass = sum(r.integral() for r in self.rho)
        if abs(mass - 1) > 1e-12:
            raise ValueError(f"damping profile must have unit mass, got {mass}")
        for r in self.rho:
            if any(math.isinf(p.b) for p in r.pieces):
                raise ValueError("profiles must be compactly supported")

    @property
    def n_edges(self) -> int:
        return len(self.rho)

    def with_scale(self, n: float) -> "DampingProfile":
        return DampingProfile(self.rho, n)

    def scaled(self) -> tuple[EdgeFunction, ...]:
        """rho_j^n(x) = n rho_j(n x)."""
        return tuple((r.dilate(self.n) * self.n).canonical() for r in self.rho)

    def support_end(self) -> float:
        return max(p.b for r in self.rho for p in r.pieces) / self.n

    def sqrt_moment(self) -> float:
        """sum_j int sqrt(y) rho_j(y) dy, by adaptive quadrature on each piece."""
        total = 0.0
        for r in self.rho:
            for p in r.pieces:
                val, _ = quad(lambda y: math.sqrt(y) * p.formula(y).real, p.a, p.b, limit=200)
                total += val
        return total

    def gap_constant(self) -> float:
        """c in |<(rho^n - delta) u, w>| <= (c / sqrt(n)) ||u||_{H1} ||w||_{H1}.

        Writing u w(x) - u w(0) = int_0^x (u w)' and bounding |(u w)'| in L1 by
        2 ||u||_{H1} ||w||_{H1} and int_0^x by sqrt(x) times an L2 norm gives
        2 sum_j int sqrt(y) rho_j(y) dy, up to the 1D trace constant 1 for u w.
        """
        return 2.0 * self.sqrt_moment()


def h1_norm(u: GraphFunction) -> float:
    from .graphfun import l2_inner

    return math.sqrt((l2_inner(u, u) + l2_inner(u.deriv(), u.deriv())).real)


def delta_gap_pairing(u: GraphFunction, w: GraphFunction, profile: DampingProfile,
                      tol: float | None = None) -> complex:
    """<(rho^n - delta) u, w> = sum_j int rho_j^n u_j conj(w_j) - u(0) conj(w(0))."""
    tol = DEFAULT_TOL["domain"] if tol is None else tol
    for name, h in (("continuity-u", u), ("continuity-w", w)):
        _, d = vertex_trace(h)
        if d > tol:
            raise DomainError(name, d, tol)
    rho = profile.scaled()
    total = 0.0j
    for j in range(u.n_edges):
        total += (u[j] * rho[j]).inner(w[j])
    return complex(total - u[0].at0() * np.conj(w[0].at0()))


# ---------------------------------------------------------------- meshes


@dataclass(frozen=True)
class MeshProblem:
    """P1 elements on [0, L] per edge, shared vertex node, Dirichlet at L.

    Nodes are geometrically graded toward the vertex so the damping support
    [0, 1/n] holds at least ``min_inner`` elements for every n up to ``n_max``.
    """

    trunc_length: float = 12.0
    elements_per_edge: int = 3000
    n_max: float = 512.0
    min_inner: int = 8
    breakpoints: tuple[float, ...] = ()
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", graded_nodes(
            self.trunc_length, self.elements_per_edge, self.n_max, self.min_inner, self.breakpoints))

    @classmethod
    def for_z(cls, z: complex, **kw) -> "MeshProblem":
        """Truncation L = max(10, 12 / |Re z|)."""
        return cls(trunc_length=max(10.0, 12.0 / abs(complex(z).real)), **kw)

    def truncation_error(self, z: complex) -> float:
        return math.exp(-abs(complex(z).real) * self.trunc_length)

    def inner_elements(self, n: float) -> int:
        return int(np.sum(self.nodes[1:] <= 1.0 / n + 1e-15))


def graded_nodes(L: float, M: int, n_max: float, min_inner: int,
                 breakpoints: Sequence[float] = ()) -> np.ndarray:
    """About M elements on [0, L] with every 1/2^k (k <= log2 n_max) and breakpoint as a node."""
    h_min = 1.0 / (n_max * min_inner)
    # geometric core: h grows by a fixed ratio from h_min up to the bulk size
    bulk = L / (0.8 * M)
    core = [0.0]
    h = h_min
    while core[-1] < 1.0 and h < bulk:
        core.append(core[-1] + h)
        h *= 1.08
    x_end = core[-1]
    rest = max(M - len(core), int(math.ceil((L - x_end) / bulk)), 1)
    nodes = np.concatenate([np.array(core), np.linspace(x_end, L, rest + 1)[1:]])
    extra = [1.0 / 2 ** k for k in range(int(math.log2(n_max)) + 1)]
    extra += [b for b in breakpoints if 0 < b < L]
    # refine every dyadic damping support [0, 2^-k] to hold min_inner elements
    for k in range(int(math.log2(n_max)) + 1):
        s = 1.0 / 2 ** k
        extra += list(np.linspace(0.0, s, min_inner + 1)[1:])
    nodes = np.unique(np.concatenate([nodes, np.array(extra)]))
    nodes = nodes[nodes <= L]
    if nodes[-1] < L:
        nodes = np.append(nodes, L)
    # merge nodes closer than a tiny fraction of h_min
    keep = np.concatenate([[True], np.diff(nodes) > 1e-3 * h_min])
    return nodes[keep]


@dataclass
class _Assembly:
    nodes: np.ndarray
    N: int
    K: sp.csr_matrix
    M: sp.csr_matrix
    qx: np.ndarray  # quadrature points per element (E, 5)
    qw: np.ndarray  # weights (E, 5)
    h: np.ndarray

    @property
    def size(self) -> int:
        return 1 + self.N * (self.nodes.size - 2)


def _edge_index(N: int, P: int) -> np.ndarray:
    """Global unknown of node i on edge j; -1 marks the Dirichlet node."""
    idx = np.empty((N, P + 1), dtype=int)
    for j in range(N):
        idx[j, 0] = 0
        idx[j, 1:P] = 1 + j * (P - 1) + np.arange(P - 1)
        idx[j, P] = -1
    return idx


def _assemble(nodes: np.ndarray, N: int, weight=None) -> tuple[sp.csr_matrix, ...]:
    P = nodes.size - 1
    h = np.diff(nodes)
    idx = _edge_index(N, P)
    n = 1 + N * (P - 1)
    rows, cols, kv, mv = [], [], [], []
    for j in range(N):
        left, right = idx[j, :-1], idx[j, 1:]
        for (a, b, ks, ms) in (
            (left, left, 1 / h, h / 3),
            (left, right, -1 / h, h / 6),
            (right, left, -1 / h, h / 6),
            (right, right, 1 / h, h / 3),
        ):
            m = (a >= 0) & (b >= 0)
            rows.append(a[m]); cols.append(b[m]); kv.append(ks[m]); mv.append(ms[m])
    rows = np.concatenate(rows); cols = np.concatenate(cols)
    K = sp.csr_matrix((np.concatenate(kv), (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((np.concatenate(mv), (rows, cols)), shape=(n, n))
    return K, M


def _quadrature(nodes: np.ndarray):
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    qx = (a[:, None] + b[:, None]) / 2 + h[:, None] / 2 * _GX[None, :]
    qw = h[:, None] / 2 * _GW[None, :]
    return qx, qw, h


def _build(nodes: np.ndarray, N: int) -> _Assembly:
    K, M = _assemble(nodes, N)
    qx, qw, h = _quadrature(nodes)
    return _Assembly(nodes, N, K, M, qx, qw, h)


def _shape(qx: np.ndarray, nodes: np.ndarray):
    a = nodes[:-1, None]
    h = np.diff(nodes)[:, None]
    t = (qx - a) / h
    return 1 - t, t


def _load(A: _Assembly, values: Sequence[np.ndarray]) -> np.ndarray:
    """Vector of int values_j phi_i over all edges; values_j sampled at A.qx."""
    P = A.nodes.size - 1
    idx = _edge_index(A.N, P)
    s0, s1 = _shape(A.qx, A.nodes)
    out = np.zeros(A.size, dtype=complex)
    for j in range(A.N):
        w = values[j] * A.qw
        left = (w * s0).sum(axis=1)
        right = (w * s1).sum(axis=1)
        m = idx[j, :-1] >= 0
        np.add.at(out, idx[j, :-1][m], left[m])
        m = idx[j, 1:] >= 0
        np.add.at(out, idx[j, 1:][m], right[m])
    return out


def _weighted_mass(A: _Assembly, rho: Sequence[np.ndarray]) -> sp.csr_matrix:
    """Matrix of int rho_j phi_k phi_i; rho_j sampled at A.qx."""
    P = A.nodes.size - 1
    idx = _edge_index(A.N, P)
    s0, s1 = _shape(A.qx, A.nodes)
    rows, cols, vals = [], [], []
    for j in range(A.N):
        w = rho[j] * A.qw
        pairs = ((idx[j, :-1], idx[j, :-1], (w * s0 * s0).sum(1)),
                 (idx[j, :-1], idx[j, 1:], (w * s0 * s1).sum(1)),
                 (idx[j, 1:], idx[j, :-1], (w * s1 * s0).sum(1)),
                 (idx[j, 1:], idx[j, 1:], (w * s1 * s1).sum(1)))
        for a, b, v in pairs:
            m = (a >= 0) & (b >= 0) & (v != 0)
            rows.append(a[m]); cols.append(b[m]); vals.append(v[m])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(A.size, A.size))


def check_coercive(alpha: complex, z: complex) -> float:
    """Rotation angle making the form coercive; raises outside the admissible pairing."""
    alpha, z = complex(alpha), complex(z)
    if z.real < 0 and alpha.real >= 0:
        return cmath_phase(z) - math.pi
    if z.real > 0 and alpha.real <= 0:
        return cmath_phase(z)
    raise CoercivityError(
        f"the form is coercive for (Re alpha >= 0, Re z < 0) or (Re alpha <= 0, Re z > 0); "
        f"got alpha = {alpha}, z = {z}"
    )


def cmath_phase(z: complex) -> float:
    return math.atan2(z.imag, z.real)


@dataclass
class MeshState:
    """Finite-element resolvent output: nodal values of u on every edge, v = f + z u."""

    nodes: np.ndarray
    u: np.ndarray  # (N, P + 1) nodal values
    z: complex
    f: GraphFunction
    estimator: float = 0.0

    def to_state_pair(self) -> StatePair:
        """Piecewise-linear u with v = f + z u, inside the closed-form algebra."""
        us = []
        for j in range(self.u.shape[0]):
            a, b = self.nodes[:-1], self.nodes[1:]
            slope = np.diff(self.u[j]) / (b - a)
            from ._expoly import Piece

            us.append(EdgeFunction(Piece(a[k], b[k], 0.0, a[k], [self.u[j, k], slope[k]])
                                   for k in range(a.size)))
        u = GraphFunction(us)
        return StatePair(u, (self.f + u * self.z).canonical())

    def vertex_flux(self) -> complex:
        """sum_j u_j'(0) by linear extrapolation of the first two element slopes."""
        x = self.nodes
        s1 = (self.u[:, 1] - self.u[:, 0]) / (x[1] - x[0])
        s2 = (self.u[:, 2] - self.u[:, 1]) / (x[2] - x[1])
        m1, m2 = x[1] / 2, (x[1] + x[2]) / 2
        return complex(np.sum(s1 - (s2 - s1) / (m2 - m1) * m1))


class FemSolver:
    """Shared assembly for one mesh, edge count and data set."""

    def __init__(self, mesh: MeshProblem, N: int):
        self.mesh = mesh
        self.N = N
        self.A = _build(mesh.nodes, N)

    def sample(self, g: GraphFunction) -> list[np.ndarray]:
        return [g[j](self.A.qx) for j in range(self.N)]

    def rho_matrix(self, profile: DampingProfile) -> tuple[sp.csr_matrix, list[np.ndarray]]:
        rho = profile.scaled()
        vals = [np.real(r(self.A.qx)) for r in rho]
        return _weighted_mass(self.A, vals), vals

    def unknowns(self) -> int:
        return self.A.size

    def solve(self, alpha: complex, z: complex, F: StatePair, profile: DampingProfile | None,
              samples=None, rho=None) -> np.ndarray:
        """Coefficient vector of u; profile None means the vertex Dirac damping."""
        alpha, z = complex(alpha), complex(z)
        A = self.A
        fs, gs = samples if samples is not None else (self.sample(F.u), self.sample(F.v))
        rhs = -z * _load(A, fs) - _load(A, gs)
        Q = A.K + (z * z) * A.M
        if profile is None:
            f0 = F.u[0].at0()
            rhs[0] += alpha * f0
            Q = Q.tolil()
            Q[0, 0] -= alpha * z
            Q = Q.tocsc()
        else:
            R, rvals = rho if rho is not None else self.rho_matrix(profile)
            rhs += alpha * _load(A, [r * f for r, f in zip(rvals, fs)])
            Q = (Q - (alpha * z) * R).tocsc()
        return splu(Q.astype(complex)).solve(rhs)

    def nodal(self, c: np.ndarray) -> np.ndarray:
        P = self.A.nodes.size - 1
        idx = _edge_index(self.N, P)
        full = np.concatenate([c, [0.0]])
        return full[idx]

    def gap(self, c1: np.ndarray, c2: np.ndarray, z: complex) -> float:
        """Energy norm of the difference of two solutions on the same mesh (v = f + z u)."""
        d = c1 - c2
        A = self.A
        return math.sqrt(max((np.conj(d) @ (A.K @ d)).real + abs(z) ** 2 * (np.conj(d) @ (A.M @ d)).real, 0.0))

    def error_vs(self, c: np.ndarray, z: complex, exact: StatePair) -> float:
        """Energy-norm distance between the FEM solution and a closed-form one.

        On [0, L] both u' and v = f + z u differences reduce to u differences; the
        tail beyond L adds the exact solution's own energy there.
        """
        A = self.A
        L = self.mesh.trunc_length
        U = self.nodal(c)
        s0, s1 = _shape(A.qx, A.nodes)
        total = 0.0
        for j in range(self.N):
            ue = exact.u[j](A.qx)
            dues = exact.u[j].deriv()(A.qx)
            uh = U[j, :-1, None] * s0 + U[j, 1:, None] * s1
            duh = (np.diff(U[j]) / A.h)[:, None]
            total += float(np.sum(A.qw * (np.abs(duh - dues) ** 2 + abs(z) ** 2 * np.abs(uh - ue) ** 2)))
            total += exact.u[j].deriv().clip(L).norm2() + exact.v[j].clip(L).norm2()
        return math.sqrt(total)

    def l2_error_u(self, c: np.ndarray, exact: StatePair) -> float:
        """L2 distance of the u components on [0, L]; this one converges like h^2."""
        A = self.A
        U = self.nodal(c)
        s0, s1 = _shape(A.qx, A.nodes)
        total = 0.0
        for j in range(self.N):
            uh = U[j, :-1, None] * s0 + U[j, 1:, None] * s1
            total += float(np.sum(A.qw * np.abs(uh - exact.u[j](A.qx)) ** 2))
        return math.sqrt(total)

    def estimator(self, c: np.ndarray, alpha: complex, z: complex, F: StatePair,
                  profile: DampingProfile | None) -> float:
        """Residual estimator sum_K h_K^2 ||r||_K^2 + sum_x h |[u_h']|^2 for the u-equation."""
        A = self.A
        U = self.nodal(c)
        s0, s1 = _shape(A.qx, A.nodes)
        fs, gs = self.sample(F.u), self.sample(F.v)
        rho = [np.zeros_like(A.qx)] * self.N if profile is None else [np.real(r(A.qx)) for r in profile.scaled()]
        total = 0.0
        for j in range(self.N):
            uh = U[j, :-1, None] * s0 + U[j, 1:, None] * s1
            r = (z * z) * uh - alpha * z * rho[j] * uh - (alpha * rho[j] - z) * fs[j] + gs[j]
            total += float(np.sum(A.h[:, None] ** 2 * A.qw * np.abs(r) ** 2))
            slopes = np.diff(U[j]) / A.h
            jumps = np.diff(slopes)
            hh = (A.h[:-1] + A.h[1:]) / 2
            total += float(np.sum(hh * np.abs(jumps) ** 2))
        return math.sqrt(total)


def fem_resolvent_apply(alpha: complex, profile: DampingProfile | None, z: complex, F: StatePair,
                        mesh: MeshProblem, strict: bool = True, tol: float | None = None) -> MeshState:
    """(W_{alpha,n} - z)^{-1} F on the truncated graph (profile None: Dirac damping).

    With ``strict`` the pair (alpha, z) must lie in the coercive region.
    """
    tol = DEFAULT_TOL["mesh"] if tol is None else tol
    if strict:
        check_coercive(alpha, z)
    if profile is not None and mesh.inner_elements(profile.n) < mesh.min_inner:
        raise MeshTooCoarseError(f"fewer than {mesh.min_inner} elements inside the damping support")
    S = FemSolver(mesh, F.n_edges)
    c = S.solve(alpha, z, F, profile)
    est = S.estimator(c, alpha, z, F, profile)
    fn = energy_norm(F)
    if fn > 0 and est / fn > tol:
        raise MeshTooCoarseError(f"a-posteriori residual {est / fn:.3e} exceeds {tol:.1e}")
    return MeshState(mesh.nodes, S.nodal(c), complex(z), F.u, est)


def coercivity_margin(alpha: complex, z: complex, profile: DampingProfile, mesh: MeshProblem,
                      w: np.ndarray) -> tuple[float, float]:
    """(Re(e^{-i theta} <Q w, w>), min(1, |z|^2) cos(theta) ||w||_{H1}^2) for a coefficient vector."""
    theta = check_coercive(alpha, z)
    S = FemSolver(mesh, profile.n_edges)
    R, _ = S.rho_matrix(profile)
    Q = S.A.K - complex(alpha) * complex(z) * R + complex(z) ** 2 * S.A.M
    form = np.conj(w) @ (Q @ w)
    lhs = (np.exp(-1j * theta) * form).real
    h1 = (np.conj(w) @ (S.A.K @ w)).real + (np.conj(w) @ (S.A.M @ w)).real
    return float(lhs), float(min(1.0, abs(z) ** 2) * math.cos(theta) * h1)


# ---------------------------------------------------------------- convergence


def ladder_dictionary(n_edges: int, m_max: float = 2048.0) -> list[StatePair]:
    """Radial data f = e^{-m x}, g = 0 with m on a geometric ladder 1, 2, 4, ..., m_max.

    Concentrated data probe the damping at the scale 1/m; the supremum over the
    ladder is what makes the n^{-1/2} rate visible.
    """
    out = []
    m = 1.0
    while m <= m_max:
        out.append(StatePair(GraphFunction.radial(EdgeFunction.exp(-m), n_edges),
                             GraphFunction.zero(n_edges)))
        m *= 2
    return out


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    sup_gap: float
    mesh_floor: float
    slope_running: float


def _reference(alpha: complex, z: complex, F: StatePair) -> StatePair:
    from .resolvent import resolvent_apply, resolvent_apply_left

    if complex(z).real < 0:
        return resolvent_apply_left(alpha, z, F)
    U, _ = resolvent_apply(alpha, z, F)
    return U


def convergence_study(alpha: complex, z: complex, dictionary: Sequence[StatePair],
                      n_list: Sequence[int], mesh: MeshProblem,
                      profile: DampingProfile | None = None) -> list[ConvergenceRow]:
    """sup over the dictionary of ||R_alpha(z) F - R_{alpha,n}(z) F|| / ||F||.

    Both resolvents are computed on the same mesh; the mesh floor is the
    distance between the Dirac-damped FEM solution and the closed form.
    """
    alpha, z = complex(alpha), complex(z)
    check_coercive(alpha, z)
    if not dictionary:
        raise ValueError("dictionary is empty")
    N = dictionary[0].n_edges
    base = profile or DampingProfile.indicator(N)
    S = FemSolver(mesh, N)
    norms = [energy_norm(F) for F in dictionary]
    samples = [(S.sample(F.u), S.sample(F.v)) for F in dictionary]
    deltas = [S.solve(alpha, z, F, None, smp) for F, smp in zip(dictionary, samples)]
    floor = 0.0
    for F, c, nf in zip(dictionary, deltas, norms):
        floor = max(floor, S.error_vs(c, z, _reference(alpha, z, F)) / nf)
    rows = []
    for n in n_list:
        prof = base.with_scale(n)
        if mesh.inner_elements(n) < mesh.min_inner:
            raise MeshTooCoarseError(f"mesh resolves the damping support only up to n < {n}")
        rho = S.rho_matrix(prof)
        gap = 0.0
        for F, smp, cd, nf in zip(dictionary, samples, deltas, norms):
            cn = S.solve(alpha, z, F, prof, smp, rho)
            gap = max(gap, S.gap(cd, cn, z) / nf)
        slope = math.nan
        if rows and gap > 0 and rows[-1].sup_gap > 0:
            prev = rows[-1]
            slope = math.log(gap / prev.sup_gap) / math.log(n / prev.n)
        rows.append(ConvergenceRow(int(n), gap, floor, slope))
    return rows


def fitted_slope(rows: Sequence[ConvergenceRow]) -> float:
    ns = np.array([r.n for r in rows], dtype=float)
    gs = np.array([r.sup_gap for r in rows])
    return float(np.polyfit(np.log(ns), np.log(gs), 1)[0])


def truncation_drift(alpha: complex, z: complex, dictionary: Sequence[StatePair],
                     mesh: MeshProblem) -> tuple[float, float]:
    """Mesh floor at (L, M) and at (2L, 2M); a large change means L is too short."""
    alpha, z = complex(alpha), complex(z)
    N = dictionary[0].n_edges
    out = []
    for m in (mesh, MeshProblem(2 * mesh.trunc_length, 2 * mesh.elements_per_edge, mesh.n_max,
                                mesh.min_inner, mesh.breakpoints)):
        S = FemSolver(m, N)
        out.append(max(S.error_vs(S.solve(alpha, z, F, None), z, _reference(alpha, z, F)) / energy_norm(F)
                       for F in dictionary))
    return out[0], out[1]
