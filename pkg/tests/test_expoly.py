import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from starwave import _expoly as ex
from starwave.graphfun import EdgeFunction as E


def _mp_moment(k, lam, width):
    """Exact antiderivative sum at 150 digits, so its cancellation is harmless."""
    mp.mp.dps = 150
    lam = mp.mpc(lam)
    if math.isinf(width):
        return complex(mp.factorial(k) / (-lam) ** (k + 1))
    w = mp.mpf(width)
    top = mp.exp(lam * w) * sum((-1) ** j * mp.factorial(k) / mp.factorial(k - j) * w ** (k - j) / lam ** (j + 1)
                                for j in range(k + 1))
    return complex(top - (-1) ** k * mp.factorial(k) / lam ** (k + 1))


@pytest.mark.parametrize("lam", [-700.0, -35 + 80j, -1.0, -1e-6, 0.4 + 3j, 25.0, 1e-3j])
@pytest.mark.parametrize("width", [0.3, 2.0, 6.5])
def test_moments_against_incomplete_gamma(lam, width):
    got = ex.moments(12, lam, width)
    for k in range(13):
        ref = _mp_moment(k, lam, width)
        assert abs(got[k] - ref) <= 1e-12 * abs(ref) + 1e-300


def test_moments_unbounded():
    got = ex.moments(6, -2 + 1j, math.inf)
    for k in range(7):
        assert got[k] == pytest.approx(_mp_moment(k, -2 + 1j, math.inf), rel=1e-14)


def test_taylor_shift_is_exact_recentering():
    c = np.array([1.0, -2.0, 0.5, 3.0])
    d = 0.7
    shifted = ex.taylor_shift(c, d)
    xs = np.linspace(-1, 2, 9)
    assert np.allclose(np.polynomial.polynomial.polyval(xs, shifted),
                       np.polynomial.polynomial.polyval(xs + d, c), rtol=1e-14)


def test_canonical_merges_and_drops_zeros():
    f = E.exp(-1.0, 2.0) + E.exp(-1.0, -2.0) + E.poly([1.0, 1.0], 0.0, 1.0) + E.poly([1.0], 0.0, 1.0)
    g = f.canonical()
    assert len(g.pieces) == 1
    assert g(0.5) == pytest.approx(2.5)


def _quad_complex(fn, lo, hi, points=None):
    kw = dict(epsabs=1e-15, epsrel=1e-13, limit=800)
    if points is not None and not math.isinf(hi):
        kw["points"] = points
    re = quad(lambda s: fn(s).real, lo, hi, **kw)[0]
    im = quad(lambda s: fn(s).imag, lo, hi, **kw)[0]
    return complex(re, im)


@st.composite
def filter_case(draw):
    k = draw(st.integers(0, 3))
    lam = complex(draw(st.floats(-3, -0.1)), draw(st.floats(-3, 3)))
    z = complex(draw(st.floats(0.1, 4)), draw(st.floats(-4, 4)))
    # push some cases into the near-resonant Taylor region lam + z ~ 0
    if draw(st.booleans()):
        lam = -z + complex(draw(st.floats(-0.02, 0.02)), draw(st.floats(-0.02, 0.02)))
        if lam.real >= -0.05:
            lam = complex(-0.05, lam.imag)
    a = draw(st.floats(0, 1.5))
    b = draw(st.one_of(st.just(math.inf), st.floats(a + 0.1, a + 4)))
    x = draw(st.floats(0, 7))
    return k, lam, z, a, b, x


@given(filter_case())
def test_causal_filter_against_quadrature(case):
    k, lam, z, a, b, x = case
    h = E.term(1.0, k, lam, a, b)
    got = E(ex.as_pieces(q for p in h.pieces for q in ex.causal_piece(p, z)))(x)
    lo, hi = a, min(x, b)
    ref = 0j if hi <= lo else _quad_complex(lambda s: cmath.exp(-z * (x - s)) * complex(h(s)), lo, hi)
    assert abs(got - ref) <= 1e-9 * max(1.0, abs(ref))


@given(filter_case())
def test_anticausal_filter_against_quadrature(case):
    k, lam, z, a, b, x = case
    h = E.term(1.0, k, lam, a, b)
    got = E(ex.as_pieces(q for p in h.pieces for q in ex.anticausal_piece(p, z)))(x)
    lo = max(x, a)
    ref = 0j if lo >= b else _quad_complex(lambda s: cmath.exp(-z * (s - x)) * complex(h(s)), lo, b)
    assert abs(got - ref) <= 1e-9 * max(1.0, abs(ref))


def test_piece_integral_unbounded_requires_decay():
    from starwave.errors import DivergentIntegralError

    with pytest.raises(DivergentIntegralError):
        ex.Piece(0.0, math.inf, 0.1, 0.0, [1.0]).integral()
