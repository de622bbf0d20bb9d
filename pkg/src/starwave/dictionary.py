"""Reproducible test data: splines, exponentials and domain projections."""

from __future__ import annotations

import numpy as np

from .graphfun import EdgeFunction, GraphFunction, StatePair, vertex_value

KNOTS = (0.0, 1.0, 2.0, 3.0)


def hermite_spline(values, slopes, knots=KNOTS) -> EdgeFunction:
    """C1 piecewise cubic interpolating values and slopes at the knots."""
    pieces = []
    for i in range(len(knots) - 1):
        a, b = knots[i], knots[i + 1]
        h = b - a
        y0, y1 = values[i], values[i + 1]
        d0, d1 = slopes[i], slopes[i + 1]
        c2 = (3 * (y1 - y0) / h - 2 * d0 - d1) / h
        c3 = (d0 + d1 - 2 * (y1 - y0) / h) / h**2
        pieces.append(EdgeFunction.poly([y0, d0, c2, c3], a, b))
    return sum(pieces[1:], pieces[0])


def _cplx(rng: np.random.Generator, size) -> np.ndarray:
    return rng.normal(size=size) + 1j * rng.normal(size=size)


def random_spline_graph(rng: np.random.Generator, n_edges: int, vertex_value: complex | None = None,
                        vertex_slopes=None) -> GraphFunction:
    """Random C1 cubic splines on [0, 3], vanishing to first order at 3, common value at 0."""
    v0 = _cplx(rng, 1)[0] if vertex_value is None else vertex_value
    edges = []
    for j in range(n_edges):
        vals = np.concatenate([[v0], _cplx(rng, len(KNOTS) - 2), [0.0]])
        slopes = _cplx(rng, len(KNOTS))
        slopes[-1] = 0.0
        if vertex_slopes is not None:
            slopes[0] = vertex_slopes[j]
        edges.append(hermite_spline(vals, slopes))
    return GraphFunction(edges)


def random_l2_spline_graph(rng: np.random.Generator, n_edges: int) -> GraphFunction:
    """Splines with independent vertex values (an L2 function need not be continuous)."""
    return GraphFunction([random_spline_graph(rng, 1)[0] for _ in range(n_edges)])


def robin_corrector(n_edges: int) -> GraphFunction:
    """x e^{-x} on edge 1: vanishes at 0 with unit slope there."""
    return GraphFunction.single(EdgeFunction.term(1.0, 1, -1.0), n_edges)


def project_to_domain(U: StatePair, alpha: complex) -> StatePair:
    """Fix the Robin condition by adding c x e^{-x} to u on the first edge.

    u and v must already be continuous at the vertex.
    """
    v0 = vertex_value(U.v)
    r = sum(U.u.derivative_traces()) + complex(alpha) * v0
    return StatePair(U.u - robin_corrector(U.n_edges) * r, U.v)


def random_domain_splines(rng: np.random.Generator, n_edges: int, alpha: complex) -> StatePair:
    """Spline data in Dom(W_alpha); the Robin condition is met through u_1'(0)."""
    u = random_spline_graph(rng, n_edges)
    v = random_spline_graph(rng, n_edges)
    slopes = u.derivative_traces()
    fix = -(sum(slopes[1:]) + complex(alpha) * v[0].at0())
    edges = list(u.edges)
    edges[0] = edges[0] + _slope_bump(fix - slopes[0])
    return StatePair(GraphFunction(edges), v)


def _slope_bump(delta: complex) -> EdgeFunction:
    """Cubic on [0, 1) with value 0 at both ends, slope delta at 0 and 0 at 1."""
    return hermite_spline([0.0, 0.0], [delta, 0.0], knots=(0.0, 1.0))


def exp_graph(rates, coeffs=None) -> GraphFunction:
    coeffs = [1.0] * len(rates) if coeffs is None else coeffs
    return GraphFunction([EdgeFunction.exp(-k, c) for k, c in zip(rates, coeffs)])


def input_dictionary(n_edges: int, seed: int = 0, size: int = 20) -> list[StatePair]:
    """Data F = (f, g) in H~1 x L2 with f continuous at the vertex."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(size):
        kind = i % 4
        if kind == 0:
            f = random_spline_graph(rng, n_edges)
            g = random_l2_spline_graph(rng, n_edges)
        elif kind == 1:
            rates = rng.uniform(0.3, 3.0, n_edges) + 1j * rng.uniform(-2, 2, n_edges)
            f = exp_graph(rates)
            g = exp_graph(rng.uniform(0.3, 3.0, n_edges), _cplx(rng, n_edges))
        elif kind == 2:
            f = random_spline_graph(rng, n_edges) + exp_graph(rng.uniform(0.5, 2, n_edges))
            g = GraphFunction.zero(n_edges)
        else:
            f = GraphFunction.zero(n_edges)
            g = random_l2_spline_graph(rng, n_edges) + exp_graph(
                rng.uniform(0.2, 1.5, n_edges), _cplx(rng, n_edges))
        out.append(StatePair(f, g))
    return out


def chain_seeds(n_edges: int, zs=(1.0, 0.7 + 1.5j, 2.0 - 1.0j)) -> list[StatePair]:
    """Jordan chain vectors of the critical coupling, used away from it after projection."""
    from .spectra import eig_chain

    out = []
    for z in zs:
        out.extend(eig_chain(n_edges, z, 2))
    return out


def domain_dictionary(n_edges: int, seed: int = 0) -> list[StatePair]:
    """20 raw seeds (continuous at the vertex); project with ``project_to_domain``."""
    rng = np.random.default_rng(seed)
    seeds: list[StatePair] = []
    for kappa in (0.5, 1.0, 2.0, 1.0 + 2.0j):
        eta = GraphFunction.radial(EdgeFunction.exp(-kappa), n_edges)
        seeds.append(StatePair(eta, eta * kappa))
    seeds.extend(chain_seeds(n_edges))
    while len(seeds) < 20:
        seeds.append(StatePair(random_spline_graph(rng, n_edges), random_spline_graph(rng, n_edges)))
    return seeds


def quiet_vertex_data(rng: np.random.Generator, n_edges: int, t0: float = 1.0) -> StatePair:
    """Data in Dom(W_N) whose incoming characteristic sum vanishes exactly on [0, t0).

    g_j = -f_j' + w_j with sum_j w_j = 0, plus a bump on the last edge starting at t0.
    The vertex values w_j(0) = f_j'(0) - mean_k f_k'(0) make g continuous at 0,
    and the Robin condition at alpha = N then holds automatically.
    """
    f = random_spline_graph(rng, n_edges)
    fp = f.deriv()
    d0 = np.array(f.derivative_traces())
    w0 = d0 - d0.mean()
    ws = []
    for j in range(n_edges - 1):
        vals = np.concatenate([[w0[j]], _cplx(rng, len(KNOTS) - 2), [0.0]])
        slopes = _cplx(rng, len(KNOTS))
        slopes[-1] = 0.0
        ws.append(hermite_spline(vals, slopes))
    last = EdgeFunction()
    for w in ws:
        last = last - w
    bump = EdgeFunction.poly([0.0, 0.0, 1.0, -2.0, 1.0], t0, t0 + 2.0, shift=t0)
    ws.append(last + bump)
    g = GraphFunction([(-fp[j] + ws[j]).canonical() for j in range(n_edges)])
    return StatePair(f, g)
