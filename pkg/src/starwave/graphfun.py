"""Functions on the star graph built from exponential-polynomial pieces.

Every edge is a copy of [0, inf) glued at the vertex x = 0. Edge functions are
finite sums of ``c (x - s)^k exp(lam (x - s))`` on half-open intervals, so
integrals, traces and norms are evaluated in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _expoly as ex
from .errors import DomainError, IntegrabilityError
from .tolerances import DEFAULT_TOL

INF = math.inf


@dataclass(frozen=True)
class StarGraph:
    n_edges: int

    def __post_init__(self):
        if int(self.n_edges) != self.n_edges or self.n_edges < 1:
            raise ValueError(f"a star graph needs at least one edge, got {self.n_edges}")


@dataclass(frozen=True)
class ExpPolyTerm:
    """coeff * (x - shift)**power * exp(rate * (x - shift)) on [a, b)."""

    coeff: complex
    power: int
    rate: complex
    a: float = 0.0
    b: float = INF
    shift: float = 0.0

    def __post_init__(self):
        if self.power < 0 or int(self.power) != self.power:
            raise ValueError("power must be a non-negative integer")
        if not self.a < self.b:
            raise ValueError("empty support")
        if math.isinf(self.b) and self.coeff != 0:
            rate = complex(self.rate)
            if not (rate.real < 0 or (rate == 0 and self.power == 0)):
                raise IntegrabilityError("unbounded term must decay (or be a constant)")

    def to_piece(self) -> ex.Piece:
        c = np.zeros(self.power + 1, dtype=complex)
        c[self.power] = self.coeff
        return ex.Piece(self.a, self.b, self.rate, self.shift, c)


class EdgeFunction:
    """A function on one half-line; immutable."""

    __slots__ = ("pieces",)

    def __init__(self, pieces: Iterable[ex.Piece] = ()):
        self.pieces = ex.as_pieces(list(pieces))

    # construction
    @classmethod
    def from_terms(cls, terms: Iterable[ExpPolyTerm]) -> "EdgeFunction":
        return cls(t.to_piece() for t in terms)

    @classmethod
    def term(cls, coeff, power=0, rate=0.0, a=0.0, b=INF, shift=0.0) -> "EdgeFunction":
        return cls.from_terms([ExpPolyTerm(complex(coeff), power, complex(rate), a, b, shift)])

    @classmethod
    def exp(cls, rate, coeff=1.0, a=0.0, b=INF) -> "EdgeFunction":
        """coeff * exp(rate * x) on [a, b)."""
        return cls([ex.Piece(a, b, rate, 0.0, [coeff])])

    @classmethod
    def poly(cls, coeffs, a=0.0, b=INF, shift=None, rate=0.0) -> "EdgeFunction":
        """sum_k coeffs[k] (x - shift)^k on [a, b); shift defaults to a."""
        return cls([ex.Piece(a, b, rate, a if shift is None else shift, coeffs)])

    @classmethod
    def zero(cls) -> "EdgeFunction":
        return cls(())

    @property
    def terms(self) -> list[ExpPolyTerm]:
        out = []
        for p in self.pieces:
            for k, c in enumerate(p.coeffs):
                if c != 0:
                    out.append(ExpPolyTerm(complex(c), k, p.rate, p.a, p.b, p.shift))
        return out

    def __repr__(self) -> str:
        return f"EdgeFunction({len(self.pieces)} pieces)"

    # evaluation
    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        flat = np.atleast_1d(xa).ravel()
        out = np.zeros(flat.shape, dtype=complex)
        for p in self.pieces:
            m = (flat >= p.a) & (flat < p.b)
            if m.any():
                out[m] += p.formula(flat[m])
        if xa.ndim == 0:
            return complex(out[0])
        return out.reshape(xa.shape)

    def at0(self) -> complex:
        """Right limit at the vertex."""
        return self(0.0)

    def left_limit(self, x: float) -> complex:
        return complex(sum(p.formula(x) for p in self.pieces if p.a < x <= p.b))

    def breakpoints(self) -> list[float]:
        s = set()
        for p in self.pieces:
            s.add(p.a)
            s.add(p.b)
        return sorted(x for x in s if not math.isinf(x))

    # algebra
    def __add__(self, other: "EdgeFunction") -> "EdgeFunction":
        if not isinstance(other, EdgeFunction):
            return NotImplemented
        return EdgeFunction(self.pieces + other.pieces)

    def __neg__(self) -> "EdgeFunction":
        return EdgeFunction(p.replace(coeffs=-p.coeffs) for p in self.pieces)

    def __sub__(self, other: "EdgeFunction") -> "EdgeFunction":
        return self + (-other)

    def __mul__(self, other) -> "EdgeFunction":
        if isinstance(other, EdgeFunction):
            out = []
            for p in self.pieces:
                for q in other.pieces:
                    r = ex.product_piece(p, q)
                    if r is not None:
                        out.append(r)
            return EdgeFunction(out)
        c = complex(other)
        if c == 0:
            return EdgeFunction()
        return EdgeFunction(p.replace(coeffs=p.coeffs * c) for p in self.pieces)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "EdgeFunction":
        return self * (1.0 / complex(c))

    def deriv(self) -> "EdgeFunction":
        """Piecewise derivative (jumps at breakpoints are ignored)."""
        return EdgeFunction(p.deriv() for p in self.pieces)

    def conj(self) -> "EdgeFunction":
        return EdgeFunction(p.conj() for p in self.pieces)

    def translate(self, t: float) -> "EdgeFunction":
        """x -> f(x - t)."""
        return EdgeFunction(p.translate(t) for p in self.pieces)

    def reflect(self, t: float) -> "EdgeFunction":
        """x -> f(t - x)."""
        return EdgeFunction(p.reflect(t) for p in self.pieces)

    def dilate(self, n: float) -> "EdgeFunction":
        """x -> f(n x)."""
        return EdgeFunction(p.dilate(n) for p in self.pieces)

    def clip(self, lo: float = 0.0, hi: float = INF) -> "EdgeFunction":
        return EdgeFunction(p.clip(lo, hi) for p in self.pieces)

    def canonical(self) -> "EdgeFunction":
        return EdgeFunction(ex.canonical_pieces(self.pieces))

    def primitive(self) -> "EdgeFunction":
        """x -> int_{-inf}^x f, exact on each piece."""
        out = []
        for p in self.pieces:
            out.extend(ex.causal_piece(p, 0.0))
        return EdgeFunction(out)

    # integrals
    def integral(self) -> complex:
        return complex(sum(p.integral() for p in ex.canonical_pieces(self.pieces)))

    def inner(self, other: "EdgeFunction") -> complex:
        """int f conj(g) over the half-line."""
        ps = ex.canonical_pieces(self.clip().pieces)
        qs = [q.conj() for q in ex.canonical_pieces(other.clip().pieces)]
        total = 0.0j
        for p in ps:
            for q in qs:
                if p.a < q.b and q.a < p.b:
                    total += ex.product_piece(p, q).integral()
        return total

    def norm2(self) -> float:
        ps = sorted(ex.canonical_pieces(self.clip().pieces), key=lambda p: p.a)
        total = 0.0
        scale = 0.0
        for i, p in enumerate(ps):
            w = ex.product_piece(p, p.conj()).integral().real
            scale += w
            total += w
            for q in ps[i + 1:]:
                if q.a >= p.b:
                    break
                total += 2 * ex.product_piece(p, q.conj()).integral().real
        if total > _CANCEL * scale:
            return total
        # nearly cancelling pieces: the Gram sum has an absolute floor eps * scale
        return _quadrature_norm2(self, ps)

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def max_coeff(self) -> float:
        return max((float(np.abs(p.coeffs).max()) for p in self.pieces), default=0.0)


_CANCEL = 1e-4
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def _quadrature_norm2(f: EdgeFunction, ps) -> float:
    if not ps:
        return 0.0
    cuts = sorted({p.a for p in ps} | {p.b for p in ps if not math.isinf(p.b)})
    rmax = max(abs(p.rate) for p in ps)
    step = min(1.0, 2.0 / (rmax + 1e-300))
    open_tail = [p for p in ps if math.isinf(p.b)]
    if open_tail:
        sigma = min(-p.rate.real for p in open_tail)
        if sigma <= 0:
            return math.inf
        cuts.append(cuts[-1] + min(60.0 / sigma, 4000.0 * step))
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        n = max(1, math.ceil((hi - lo) / step))
        edges = np.linspace(lo, hi, n + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        xs = (mid + half * _GL_X).ravel()
        ws = (half * _GL_W).ravel()
        total += float(np.sum(ws * np.abs(f(xs)) ** 2))
    return total


def _as_edges(edges) -> tuple[EdgeFunction, ...]:
    return tuple(e if isinstance(e, EdgeFunction) else EdgeFunction(e) for e in edges)


class GraphFunction:
    """One EdgeFunction per edge of a star graph; immutable."""

    __slots__ = ("graph", "edges")

    def __init__(self, edges: Sequence[EdgeFunction], graph: StarGraph | None = None):
        self.edges = _as_edges(edges)
        self.graph = graph or StarGraph(len(self.edges))
        if len(self.edges) != self.graph.n_edges:
            raise ValueError("number of edge functions must equal the number of edges")

    @classmethod
    def radial(cls, f: EdgeFunction, n_edges: int) -> "GraphFunction":
        return cls([f] * n_edges)

    @classmethod
    def zero(cls, n_edges: int) -> "GraphFunction":
        return cls([EdgeFunction()] * n_edges)

    @classmethod
    def single(cls, f: EdgeFunction, n_edges: int, edge: int = 0) -> "GraphFunction":
        return cls([f if j == edge else EdgeFunction() for j in range(n_edges)])

    @property
    def n_edges(self) -> int:
        return self.graph.n_edges

    def __repr__(self) -> str:
        return f"GraphFunction(N={self.n_edges}, pieces={[len(e.pieces) for e in self.edges]})"

    def __getitem__(self, j: int) -> EdgeFunction:
        return self.edges[j]

    def __iter__(self):
        return iter(self.edges)

    def map(self, fn: Callable[[EdgeFunction], EdgeFunction]) -> "GraphFunction":
        return GraphFunction([fn(e) for e in self.edges], self.graph)

    def _zip(self, other: "GraphFunction", fn) -> "GraphFunction":
        if other.n_edges != self.n_edges:
            raise ValueError("edge counts differ")
        return GraphFunction([fn(a, b) for a, b in zip(self.edges, other.edges)], self.graph)

    def __add__(self, other):
        if not isinstance(other, GraphFunction):
            return NotImplemented
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        if not isinstance(other, GraphFunction):
            return NotImplemented
        return self._zip(other, lambda a, b: a - b)

    def __neg__(self):
        return self.map(lambda e: -e)

    def __mul__(self, c):
        if isinstance(c, GraphFunction):
            return self._zip(c, lambda a, b: a * b)
        return self.map(lambda e: e * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / complex(c))

    def deriv(self) -> "GraphFunction":
        return self.map(EdgeFunction.deriv)

    def conj(self) -> "GraphFunction":
        return self.map(EdgeFunction.conj)

    def canonical(self) -> "GraphFunction":
        return self.map(EdgeFunction.canonical)

    def add_constant(self, c: complex) -> "GraphFunction":
        return self.map(lambda e: e + EdgeFunction.term(c))

    def traces(self) -> list[complex]:
        return [e.at0() for e in self.edges]

    def derivative_traces(self) -> list[complex]:
        return [e.deriv().at0() for e in self.edges]

    def max_coeff(self) -> float:
        return max(e.max_coeff() for e in self.edges)

    # serialization
    def to_dict(self) -> dict:
        edges = []
        for e in self.edges:
            terms = []
            for p in ex.canonical_pieces(e.pieces):
                c = p.reanchored(0.0) if p.shift != 0.0 else p.coeffs
                for k, ck in enumerate(c):
                    if ck != 0:
                        terms.append({
                            "coeff_re": float(ck.real), "coeff_im": float(ck.imag),
                            "power": k,
                            "rate_re": float(p.rate.real), "rate_im": float(p.rate.imag),
                            "a": float(p.a), "b": None if math.isinf(p.b) else float(p.b),
                        })
            edges.append(terms)
        return {"n_edges": self.n_edges, "edges": edges}

    @classmethod
    def from_dict(cls, d: dict) -> "GraphFunction":
        n = int(d["n_edges"])
        if len(d["edges"]) != n:
            raise ValueError("edges list length differs from n_edges")
        edges = []
        for terms in d["edges"]:
            edges.append(EdgeFunction.from_terms(
                ExpPolyTerm(
                    complex(t["coeff_re"], t.get("coeff_im", 0.0)),
                    int(t["power"]),
                    complex(t["rate_re"], t.get("rate_im", 0.0)),
                    float(t["a"]),
                    INF if t.get("b") is None else float(t["b"]),
                    float(t.get("shift", 0.0)),
                )
                for t in terms
            ))
        return cls(edges)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "GraphFunction":
        return cls.from_dict(json.loads(s))


class StatePair:
    """U = (u, v): position modulo constants and velocity."""

    __slots__ = ("u", "v")

    def __init__(self, u: GraphFunction, v: GraphFunction):
        if u.n_edges != v.n_edges:
            raise ValueError("u and v live on different graphs")
        self.u = u
        self.v = v

    @property
    def n_edges(self) -> int:
        return self.u.n_edges

    @classmethod
    def zero(cls, n_edges: int) -> "StatePair":
        z = GraphFunction.zero(n_edges)
        return cls(z, z)

    def __repr__(self) -> str:
        return f"StatePair(u={self.u!r}, v={self.v!r})"

    def __add__(self, o: "StatePair") -> "StatePair":
        return StatePair(self.u + o.u, self.v + o.v)

    def __sub__(self, o: "StatePair") -> "StatePair":
        return StatePair(self.u - o.u, self.v - o.v)

    def __neg__(self) -> "StatePair":
        return StatePair(-self.u, -self.v)

    def __mul__(self, c) -> "StatePair":
        return StatePair(self.u * c, self.v * c)

    __rmul__ = __mul__

    def canonical(self) -> "StatePair":
        return StatePair(self.u.canonical(), self.v.canonical())

    def to_dict(self) -> dict:
        return {"u": self.u.to_dict(), "v": self.v.to_dict()}


def integrate_term(k: int, lam: complex, a: float, b: float) -> complex:
    """int_a^b x^k exp(lam x) dx."""
    if k < 0 or int(k) != k:
        raise ValueError("k must be a non-negative integer")
    c = np.zeros(k + 1, dtype=complex)
    c[k] = 1.0
    return ex.Piece(a, b, lam, 0.0, c).integral()


def l2_inner(f: GraphFunction, g: GraphFunction) -> complex:
    if f.n_edges != g.n_edges:
        raise ValueError("edge counts differ")
    return complex(sum(a.inner(b) for a, b in zip(f.edges, g.edges)))


def l2_norm(f: GraphFunction) -> float:
    return math.sqrt(sum(e.norm2() for e in f.edges))


def energy_inner(U: StatePair, V: StatePair) -> complex:
    """<U, V> in H~1 x L2."""
    return l2_inner(U.u.deriv(), V.u.deriv()) + l2_inner(U.v, V.v)


def energy_norm(U: StatePair) -> float:
    return math.sqrt(sum(e.norm2() for e in U.u.deriv().edges) + sum(e.norm2() for e in U.v.edges))


def vertex_trace(f: GraphFunction) -> tuple[list[complex], float]:
    vals = f.traces()
    defect = max((abs(x - y) for x in vals for y in vals), default=0.0)
    return vals, float(defect)


def vertex_value(f: GraphFunction, tol: float | None = None, name: str = "continuity") -> complex:
    """Common vertex value; raises DomainError when the traces disagree."""
    tol = DEFAULT_TOL["domain"] if tol is None else tol
    vals, defect = vertex_trace(f)
    if defect > tol:
        raise DomainError(name, defect, tol)
    return complex(np.mean(vals))


def robin_residual(U: StatePair, alpha: complex, tol: float | None = None) -> complex:
    """sum_j u_j'(0) + alpha v(0)."""
    v0 = vertex_value(U.v, tol, "continuity-v")
    return complex(sum(U.u.derivative_traces()) + complex(alpha) * v0)


def check_domain(U: StatePair, alpha: complex, tol: float | None = None) -> None:
    """Raise DomainError naming the first failed vertex condition."""
    tol = DEFAULT_TOL["domain"] if tol is None else tol
    vertex_value(U.u, tol, "continuity-u")
    r = robin_residual(U, alpha, tol)
    if abs(r) > tol:
        raise DomainError("robin", abs(r), tol)


def in_domain(U: StatePair, alpha: complex, tol: float | None = None) -> bool:
    try:
        check_domain(U, alpha, tol)
    except DomainError:
        return False
    return True


def form_pairing(U: StatePair, alpha: complex, tol: float | None = None) -> complex:
    """<W_alpha U, U> in the energy space via 2i Im<v', u'> + alpha |v(0)|^2."""
    check_domain(U, alpha, tol)
    v0 = vertex_value(U.v, tol)
    cross = l2_inner(U.v.deriv(), U.u.deriv())
    return complex(2j * cross.imag + complex(alpha) * abs(v0) ** 2)
