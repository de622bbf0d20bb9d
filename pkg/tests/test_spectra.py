import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from starwave.dictionary import domain_dictionary
from starwave.errors import CriticalCouplingError, EmptyDictionaryError, HalfPlaneError, IntegrabilityError
from starwave.graphfun import EdgeFunction as E
from starwave.graphfun import StatePair, energy_norm, l2_norm, robin_residual
from starwave.resolvent import apply_generator, resolvent_apply
from starwave.spectra import (
    DegenerateQuasimodeWarning,
    ZGrid,
    axis_slope,
    bump,
    c0_constant,
    c0_function,
    c0_search,
    chain_residual,
    divergence_slope,
    eig_chain,
    eta_ratio_formula,
    pseudospectrum_scan,
    quasimode_axis,
    quasimode_eta,
    resolvent_norm_lower,
    upper_bound_fit,
)


def test_chain_traces_and_norms():
    z = 0.6 - 1.1j
    U1, U2 = eig_chain(2, z, 2)
    assert U1.u[0].at0() == 1 and U1.v[0].at0() == pytest.approx(z)
    chain = eig_chain(2, 1.0, 3)
    assert chain[1].u[0].norm2() == pytest.approx(0.25, rel=1e-14)
    assert max(chain_residual(chain, 1.0, 2)) <= 1e-10


@given(st.floats(0.05, 5), st.floats(-5, 5), st.sampled_from([1, 2, 3, 5]))
def test_chain_consistency(x, y, N):
    z = complex(x, y)
    chain = eig_chain(N, z, 5)
    assert max(chain_residual(chain, z, N)) <= 1e-10
    for U in chain:
        assert abs(robin_residual(U, N)) <= 1e-12 * max(1.0, energy_norm(U))


def test_chain_rejects_left_half_plane():
    with pytest.raises(HalfPlaneError):
        eig_chain(2, -1.0, 2)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_eigenvector_is_radial(N):
    # coefficients c_j of (c_j e^{-zx}, z c_j e^{-zx}): continuity of u and v plus the
    # Robin condition at alpha = N leave a one dimensional, radial solution space
    z = 0.7 + 0.4j
    rows = []
    for j in range(1, N):
        r = np.zeros(N, dtype=complex)
        r[0], r[j] = 1, -1
        rows.append(r)
        rows.append(z * r)
    robin = np.full(N, -z / N, dtype=complex) * N  # sum_j u_j'(0) = -z sum c_j
    robin[0] += N * z  # alpha v(0) with v(0) read on edge 1
    rows.append(robin)
    A = np.array(rows)
    _, s, vh = np.linalg.svd(A)
    null = vh[np.sum(s > 1e-12):]
    assert null.shape[0] == 1
    v = null[0] / null[0][0]
    assert np.allclose(v, np.ones(N))


def test_bump_is_normalised_and_c1():
    b = bump()
    assert b.norm2() == pytest.approx(1.0, rel=1e-14)
    assert abs(b(1.0)) == 0 and abs(b.left_limit(2.0)) < 1e-14
    assert abs(b.deriv()(1.0)) == 0 and abs(b.deriv().left_limit(2.0)) < 1e-12


def test_axis_quasimode_examples():
    U32, r32 = quasimode_axis(1.0, 32, 2)
    U64, r64 = quasimode_axis(1.0, 64, 2)
    assert 0.40 <= r64 / r32 <= 0.60
    assert robin_residual(U64, 0.0) == 0
    assert robin_residual(U64, 3 + 1j) == 0
    _, r = quasimode_axis(2.0, 4096, 3)
    U, _ = quasimode_axis(2.0, 4096, 3)
    assert energy_norm(U) ** 2 == pytest.approx(2 * 2.0**2, rel=1e-3)


def test_axis_quasimode_warns_at_zero():
    with pytest.warns(DegenerateQuasimodeWarning):
        quasimode_axis(0.0, 8, 2)


@pytest.mark.parametrize("theta", [0.5, 1.0, 3.0])
def test_axis_slope(theta):
    assert abs(axis_slope(theta, [8, 16, 32, 64, 128], 2) + 1) <= 0.1


def test_eta_examples():
    U, r = quasimode_eta(4.0, 1.0, 2)
    assert energy_norm(U) == pytest.approx(math.sqrt(2.5), rel=1e-14)
    assert r == pytest.approx(math.sqrt(1.8), rel=1e-13)
    _, r = quasimode_eta(2.0, 0.3 + 1j, 2)
    assert r == 0
    assert robin_residual(U, 4.0) == pytest.approx(0, abs=1e-14)
    with pytest.raises(IntegrabilityError):
        quasimode_eta(-1.0, 1.0, 2)


@given(st.floats(0.05, 6), st.floats(-1.5, 1.5), st.floats(0.05, 4), st.floats(-4, 4), st.sampled_from([1, 2, 3, 6]))
def test_eta_ratio_formula(r_alpha, arg_alpha, x, y, N):
    alpha = r_alpha * np.exp(1j * arg_alpha)
    z = complex(x, y)
    if (alpha * z).real <= 1e-3 * abs(alpha * z):
        return
    U, r = quasimode_eta(alpha, z, N)
    assert r == pytest.approx(eta_ratio_formula(alpha, z, N), rel=1e-12, abs=1e-14)
    assert abs(robin_residual(U, alpha)) <= 1e-12 * max(1.0, energy_norm(U))


def test_eta_round_trip_through_resolvent():
    # feeding (W - z) eta into the resolvent recovers eta; the ratio is consistent
    alpha, z, N = 3.0 + 1j, 0.8 + 0.5j, 2
    U, r = quasimode_eta(alpha, z, N)
    W = apply_generator(U, alpha)
    F = StatePair(W.u - U.u * z, W.v - U.v * z)
    V, _ = resolvent_apply(alpha, z, F)
    assert energy_norm(StatePair(V.u - U.u, V.v - U.v)) <= 1e-10 * energy_norm(U)
    assert energy_norm(V) / energy_norm(F) == pytest.approx(1 / r, rel=1e-10)


def test_c0_values():
    assert c0_function(1.0, 1) == pytest.approx(math.sqrt(2) / 2, rel=1e-15)
    for N in range(1, 7):
        assert c0_constant(N) > 0


def test_c0_matches_independent_minimiser():
    # independent oracle: local minimisation of N sqrt(t^2 + s^2 + N^2) / |t + i s + N| in the half-plane
    N = 2
    fn = lambda p: N * math.sqrt(p[0] ** 2 + p[1] ** 2 + N * N) / abs(complex(p[0] + N, p[1]))
    best = min(minimize(fn, x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14}).fun
               for x0 in ([0.5, 0.5], [3.0, -1.0], [10.0, 2.0]))
    c0, where = c0_search(N)
    assert best == pytest.approx(math.sqrt(2), rel=1e-9)
    assert c0 == pytest.approx(best, rel=0.01)
    assert abs(where - 2) < 0.05


def test_lower_bound_examples():
    dic = domain_dictionary(2, 0)
    alpha, z = 3.0 + 0.5j, 0.7 + 0.2j
    lb = resolvent_norm_lower(alpha, z, dic)
    assert lb >= 1 / eta_ratio_formula(alpha, z, 2) * (1 - 1e-12)
    c0 = c0_constant(2)
    assert lb >= 0.95 * c0 / (abs(z) * abs(alpha - 2))
    with pytest.raises(CriticalCouplingError):
        resolvent_norm_lower(2.0, z, dic)
    with pytest.raises(HalfPlaneError):
        resolvent_norm_lower(1.0, -z, dic)
    with pytest.raises(EmptyDictionaryError):
        resolvent_norm_lower(1.0, z, [])


def test_divergence_slope():
    dic = domain_dictionary(2, 0)
    s = divergence_slope(2.0, 1.0 + 0.5j, 2, [10.0**-k for k in range(1, 6)], 1j, dic)
    assert abs(s + 1) <= 0.05


def test_scan_examples():
    dic = domain_dictionary(2, 0)
    recs = pseudospectrum_scan(2.5, ZGrid(0.1, 2.0, 5, -2.0, 2.0, 4), 2, dic)
    assert len(recs) == 20
    assert [r.z.imag for r in recs[:5]] == [-2.0] * 5
    for r in recs:
        assert r.norm_lower_estimate >= 0.95 * r.eta_bound
        assert r.norm_lower_estimate >= 0.95 * r.axis_bound
    with pytest.raises(CriticalCouplingError):
        pseudospectrum_scan(2.0, ZGrid(0.1, 2.0, 3, -1.0, 1.0, 3), 2, dic)
    with pytest.raises(HalfPlaneError):
        pseudospectrum_scan(2.5, ZGrid(0.0, 2.0, 3, -1.0, 1.0, 3), 2, dic)


def test_scan_near_axis_follows_axis_bound():
    recs = pseudospectrum_scan(3.0, ZGrid(1e-3, 1e-2, 3, 0.5, 3.0, 3), 2, domain_dictionary(2, 0))
    for r in recs:
        assert r.axis_bound == pytest.approx(1 / r.z.real)
        assert r.norm_lower_estimate >= 0.95 * r.axis_bound


def test_scan_dissipative_coupling_respects_contraction():
    # Re alpha < 0 makes W_alpha dissipative, so ||(W - z)^{-1}|| <= 1 / Re z for Re z > 0
    recs = pseudospectrum_scan(-1.0 + 0.5j, ZGrid(0.2, 2.0, 4, -1.5, 1.5, 4), 2, domain_dictionary(2, 0))
    for r in recs:
        assert r.norm_lower_estimate <= (1 / r.z.real) * (1 + 1e-9)


def test_scan_parallel_matches_serial():
    dic = domain_dictionary(2, 1)
    g = ZGrid(0.2, 1.0, 3, -1.0, 1.0, 4)
    a = [r.row() for r in pseudospectrum_scan(1.5 + 1j, g, 2, dic, workers=1)]
    b = [r.row() for r in pseudospectrum_scan(1.5 + 1j, g, 2, dic, workers=2)]
    assert a == b


def test_upper_bound_fit_is_moderate():
    from starwave.dictionary import input_dictionary

    C = upper_bound_fit(2, [2.01, 1.5 + 0.5j, 0.3, 5 + 1j], [0.1 + 1j, 1.0, 8.0 - 3j], input_dictionary(2, 0, 6))
    assert 0 < C <= 10
