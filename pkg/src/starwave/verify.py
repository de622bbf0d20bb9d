"""Self-checks run by ``starwave verify``; each suite reports measured constants."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import approx, evolve, spectra
from .dictionary import (
    domain_dictionary,
    input_dictionary,
    project_to_domain,
    random_domain_splines,
)
from .graphfun import EdgeFunction, GraphFunction, StatePair, energy_inner, energy_norm, form_pairing
from .resolvent import (
    apply_generator,
    causal_filter,
    halfline_convolve,
    resolvent_apply,
    resolvent_apply_left,
    resolvent_residual,
)
from .tolerances import DEFAULT_TOL


@dataclass
class SuiteResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.measured = {k: float(v) for k, v in self.measured.items()}

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        items = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"{flag} {self.name} ({self.seconds:.2f}s) {items}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _random_piece_function(rng: np.random.Generator) -> EdgeFunction:
    k = int(rng.integers(0, 4))
    rate = complex(-rng.uniform(0.2, 3.0), rng.uniform(-3, 3))
    a = float(rng.uniform(0, 2))
    b = math.inf if rng.random() < 0.5 else a + float(rng.uniform(0.1, 3))
    return EdgeFunction.term(complex(*rng.normal(size=2)), k, rate, a, b)


def suite_graphfun(N: int, seed: int, tol: dict) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst_quad = 0.0
    for _ in range(20):
        f, g = _random_piece_function(rng), _random_piece_function(rng)
        exact = f.inner(g)
        lo = max(f.pieces[0].a, g.pieces[0].a)
        hi = min(f.pieces[0].b, g.pieces[0].b)
        if not lo < hi:
            continue
        prod = lambda x: f(x) * np.conj(g(x))
        re = quad(lambda x: prod(x).real, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
        im = quad(lambda x: prod(x).imag, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
        worst_quad = max(worst_quad, abs(exact - complex(re, im)) / max(abs(exact), 1e-300))
    seeds = domain_dictionary(N, seed)
    worst_sign = 0.0
    worst_adj = 0.0
    for alpha in (1.5 + 0.5j, -0.7 + 2j, 3j):
        Us = [project_to_domain(s, alpha) for s in seeds[::2]]
        Vs = [project_to_domain(s, -np.conj(alpha)) for s in seeds[1::2]]
        for U in Us:
            p = form_pairing(U, alpha)
            e2 = energy_norm(U) ** 2
            if alpha.real == 0:
                worst_sign = max(worst_sign, abs(p.real) / e2)
            elif np.sign(p.real) not in (0, np.sign(alpha.real)):
                worst_sign = math.inf
        for U, V in zip(Us, Vs):
            lhs = energy_inner(apply_generator(U, alpha), V) + energy_inner(U, apply_generator(V, -np.conj(alpha)))
            worst_adj = max(worst_adj, abs(lhs) / (energy_norm(U) * energy_norm(V)))
    ok = worst_quad <= 1e-8 and worst_sign <= 1e-10 and worst_adj <= tol["identity"]
    return SuiteResult("graphfun", ok, {"quadrature_rel": worst_quad, "accretive_defect": worst_sign,
                                        "adjoint_rel": worst_adj})


def suite_resolvent(N: int, seed: int, tol: dict, alpha: complex, z: complex) -> SuiteResult:
    rng = np.random.default_rng(seed)
    inputs = input_dictionary(N, seed, 12)
    worst = 0.0
    points = [(alpha, z)] if alpha != N and complex(z).real > 0 else []
    for _ in range(8):
        d = 10 ** rng.uniform(-3, 1) * np.exp(1j * rng.uniform(-np.pi / 2, np.pi / 2))
        a = N + d
        if a.real <= 0:
            a = complex(abs(a.real), a.imag)
        points.append((a, complex(rng.uniform(0.1, 10), rng.uniform(-5, 5))))
    for (a, zz), F in zip(points * 2, inputs):
        worst = max(worst, resolvent_residual(a, zz, F))
    # derivative identity (rho * h)' = z (rho * h) - z^2 K_z h, coefficient-wise
    worst_der = 0.0
    for F in inputs[:4]:
        h = F.u.deriv()[0] + F.v[0]
        zz = complex(rng.uniform(0.2, 4), rng.uniform(-3, 3))
        c = halfline_convolve(zz, h)
        d = (c.deriv() - c * zz + causal_filter(h, zz) * (zz * zz)).canonical()
        worst_der = max(worst_der, d.max_coeff() / max(c.max_coeff(), 1.0))
    alphas = [N + 1e-2, N - 0.5 + 0.5j, 0.5, 2 * N + 1j]
    zs = [0.1 + 1j, 1.0, 5.0 - 2j]
    C = spectra.upper_bound_fit(N, alphas, zs, inputs[:4])
    ok = worst <= tol["identity"] and worst_der <= 1e-12 and C <= 10
    return SuiteResult("resolvent", ok, {"identity_rel": worst, "derivative_identity": worst_der,
                                         "fitted_C": C})


def suite_spectra(N: int, seed: int, tol: dict) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst_chain = 0.0
    for _ in range(4):
        zz = complex(rng.uniform(0.2, 3), rng.uniform(-3, 3))
        worst_chain = max(worst_chain, max(spectra.chain_residual(spectra.eig_chain(N, zz, 5), zz, N)))
    slopes = {f"axis_slope_{t:g}": spectra.axis_slope(t, [8, 16, 32, 64, 128], N) for t in (0.5, 1.0, 3.0)}
    c0, _ = spectra.c0_search(N)
    c0_exact = N / math.sqrt(2)
    dic = domain_dictionary(N, seed)
    div = spectra.divergence_slope(complex(N), 1.0 + 0.5j, N, [10.0 ** -k for k in range(1, 6)], 1j, dic)
    recs = spectra.pseudospectrum_scan(N + 0.5, spectra.ZGrid(0.1, 2.0, 9, -2.0, 2.0, 9), N, dic, c0)
    ps_ratio = min(r.norm_lower_estimate / r.eta_bound for r in recs)
    ok = (worst_chain <= tol["chain"] and all(abs(s + 1) <= 0.1 for s in slopes.values())
          and abs(c0 - c0_exact) <= 0.01 * c0_exact and abs(div + 1) <= 0.05 and ps_ratio >= 0.95)
    return SuiteResult("spectra", ok, {"chain_residual": worst_chain, **slopes, "c0": c0,
                                       "divergence_slope": div, "pseudospec_min_ratio": ps_ratio})


def _safe_points(t: float, knots, count: int, h: float, rng) -> np.ndarray:
    bad = [t] + [k + t for k in knots] + [k - t for k in knots] + [t - k for k in knots]
    xs = []
    while len(xs) < count:
        x = float(rng.uniform(0.0, 6.0))
        if all(abs(x - b) > 4 * h + 1e-3 for b in bad):
            xs.append(x)
    return np.array(xs)


def suite_evolve(N: int, seed: int, tol: dict) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst_det = 0.0
    for n in range(1, 7):
        for _ in range(5):
            a = complex(*rng.normal(scale=3, size=2))
            mm, _ = evolve.reflection_matrices(a, n)
            worst_det = max(worst_det, abs(np.linalg.det(mm) - (a - n)) / max(1.0, abs(a - n)))
    worst_vertex = worst_pde = 0.0
    energy_defects = {}
    fitted = 0.0
    for alpha in (-1.0, 2j, 0.5, 3.0):
        D = random_domain_splines(rng, N, alpha)
        P = evolve.make_problem(alpha, D.u, D.v)
        ts = np.linspace(0, 5, 11)
        Es = np.array([evolve.energy(P, t) for t in ts])
        for t in ts:
            _, rob, cont = evolve.vertex_report(evolve.solution_at(P, t), alpha)
            worst_vertex = max(worst_vertex, rob, cont)
        t = 1.3 + 0.0123
        xs = _safe_points(t, (0.0, 1.0, 2.0, 3.0), 6, 1e-3, rng)
        worst_pde = max(worst_pde, evolve.pde_residual(lambda s: evolve.solution_at(P, s), t, xs))
        if alpha == 2j:
            energy_defects["conservation"] = float(np.max(np.abs(Es / Es[0] - 1)))
        elif alpha == -1.0:
            energy_defects["monotone_violation"] = float(max(0.0, np.max(np.diff(Es) / Es[0])))
        else:
            fitted = max(fitted, float(np.max(Es / Es[0])) / (1 + 1 / abs(alpha - N) ** 2))
    ok = (worst_det <= 1e-12 and worst_vertex <= tol["domain"] and worst_pde <= tol["pde"]
          and energy_defects["conservation"] <= tol["identity"]
          and energy_defects["monotone_violation"] <= 1e-12 and fitted <= 1 + 4 * N * N)
    return SuiteResult("evolve", ok, {"det_identity": worst_det, "vertex": worst_vertex,
                                      "pde_residual": worst_pde, **energy_defects,
                                      "fitted_C_energy": fitted})


def suite_fem(N: int, seed: int, tol: dict) -> SuiteResult:
    # norm cross-check against the closed form at alpha = 1, z = 1
    F = StatePair(GraphFunction.zero(N), GraphFunction.radial(EdgeFunction.exp(-1.0), N))
    exact = energy_norm(resolvent_apply(1.0, 1.0, F)[0])
    st = approx.fem_resolvent_apply(1.0, None, 1.0, F, approx.MeshProblem(trunc_length=30.0,
                                    elements_per_edge=2000), strict=False)
    norm_rel = abs(energy_norm(st.to_state_pair()) - exact) / exact
    # Kirchhoff coupling: L2 error of u drops by about 4 per mesh doubling
    inputs = input_dictionary(N, seed, 4)
    errs = []
    for M in (500, 1000):
        S = approx.FemSolver(approx.MeshProblem(trunc_length=60.0, elements_per_edge=M, n_max=4), N)
        errs.append(max(S.l2_error_u(S.solve(0.0, -1.0, G, None), resolvent_apply_left(0.0, -1.0, G))
                        / energy_norm(G) for G in inputs))
    ratio = errs[0] / errs[1]
    cmesh = approx.MeshProblem.for_z(-1.0, elements_per_edge=1500, n_max=64)
    rows = approx.convergence_study(1.0, -1.0, approx.ladder_dictionary(N, 256.0), [4, 8, 16, 32, 64], cmesh)
    slope = approx.fitted_slope(rows)
    decreasing = all(b.sup_gap < a.sup_gap for a, b in zip(rows, rows[1:]))
    ok = norm_rel <= tol["fem"] and ratio >= 3.0 and abs(slope + 0.5) <= 0.2 and decreasing
    return SuiteResult("fem", ok, {"norm_rel_error": norm_rel, "kirchhoff_doubling_ratio": ratio,
                                   "convergence_slope": slope, "mesh_floor": rows[0].mesh_floor})


SUITES: dict[str, Callable] = {
    "graphfun": suite_graphfun,
    "resolvent": suite_resolvent,
    "spectra": suite_spectra,
    "evolve": suite_evolve,
    "fem": suite_fem,
}


def run_all(N: int = 2, seed: int = 0, tol: dict | None = None, alpha: complex = 2.5,
            z: complex = 1.0, only=None) -> list[SuiteResult]:
    tol = {**DEFAULT_TOL, **(tol or {})}
    out = []
    for name, fn in SUITES.items():
        if only and name not in only:
            continue
        t = time.perf_counter()
        if name == "resolvent":
            res = fn(N, seed, tol, complex(alpha), complex(z))
        else:
            res = fn(N, seed, tol)
        res.seconds = time.perf_counter() - t
        out.append(res)
    return out
