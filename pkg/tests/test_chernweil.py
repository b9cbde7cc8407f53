import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcl import chernweil as cw, geometry as geo
from mcl.errors import InvalidArity, NotUnitary


def _beta_by_expansion(k):
    # (t^2 - t)^(k-1) = sum_j C(k-1, j) t^(2j) (-t)^(k-1-j)
    return sum(Fraction(math.comb(k - 1, j) * (-1) ** (k - 1 - j), k + j) for j in range(k))


@pytest.mark.parametrize("k", range(1, 9))
def test_beta(k):
    assert cw.beta_exact(k) == _beta_by_expansion(k)
    assert abs(cw.beta_integral(k) - float(_beta_by_expansion(k))) < 1e-15


@pytest.mark.parametrize("k", range(1, 9))
def test_constant_relation_exact(k):
    tc, tch = cw.form_constants(k)
    assert tc.power == tch.power == k
    assert tc.coef == (-1) ** (k - 1) * math.factorial(k - 1) * tch.coef


def test_low_constants():
    assert abs(cw.tc_constant(1) - 1j / (2 * math.pi)) < 1e-16
    assert abs(cw.tc_constant(2) + 1 / (24 * math.pi ** 2)) < 1e-16
    assert abs(cw.tch_constant(1) - 1j / (2 * math.pi)) < 1e-16


def _perm_sign(p):
    inv = sum(1 for a, b in itertools.combinations(range(len(p)), 2) if p[a] > p[b])
    return -1 if inv % 2 else 1


def _wedge_trace_oracle(mats):
    total = 0j
    for p in itertools.permutations(range(len(mats))):
        M = np.eye(mats[0].shape[0], dtype=complex)
        for i in p:
            M = M @ mats[i]
        total += _perm_sign(p) * np.trace(M)
    return total


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), q=st.sampled_from([1, 3, 5]), n=st.integers(1, 3))
def test_wedge_trace_against_permutations(seed, q, n):
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for _ in range(q)]
    ref = _wedge_trace_oracle(mats)
    assert abs(cw.wedge_trace(mats) - ref) <= 1e-10 * max(1.0, abs(ref))
    if q > 1:
        swapped = [mats[1], mats[0]] + mats[2:]
        assert abs(cw.wedge_trace(swapped) + cw.wedge_trace(mats)) <= 1e-10 * max(1.0, abs(ref))


def test_wedge_trace_batched_and_arity(rng):
    mats = rng.standard_normal((3, 5, 2, 2))
    batch = cw.wedge_trace(list(mats))
    assert batch.shape == (5,)
    assert abs(batch[2] - _wedge_trace_oracle([m[2] for m in mats])) < 1e-12
    with pytest.raises(InvalidArity):
        cw.wedge_trace(list(mats[:2]))


def test_maurer_cartan_properties():
    g = geo.s3_map()
    pts = np.array([[0.3, 1.0, 2.0], [1.1, 4.0, 0.5]])
    w = cw.maurer_cartan(g, pts)
    assert w.shape == (2, 3, 2, 2)
    assert cw.antihermitian_residual(w) < 1e-12
    assert cw.mc_identity_residual(g, pts) < 1e-5


def test_maurer_cartan_rejects_non_unitary():
    g = cw.GaugeMap(geo.circle(), lambda p: np.broadcast_to(2 * np.eye(2, dtype=complex), (len(p), 2, 2)))
    with pytest.raises(NotUnitary):
        cw.maurer_cartan(g, np.array([[0.1]]))


def test_form_field_evaluation():
    f = cw.FormField(2, 3, lambda pts: {(0, 1): np.full(len(pts), 2.0 + 0j), (1, 2): np.ones(len(pts), complex)})
    b = np.zeros(3)
    e = np.eye(3)
    assert f(b, e[0], e[1]) == 2.0
    assert f(b, e[1], e[0]) == -2.0
    assert f(b, e[1], e[2]) == 1.0
    assert f(b, e[0], e[2]) == 0.0
    with pytest.raises(InvalidArity):
        f(b, e[0])


def test_tc_form_vanishes_below_degree():
    g = geo.gm_map(2)
    assert cw.tc_form(g, 2).coefficients(np.array([0.3])) == {}


def test_tc_closed_on_s3():
    g = geo.s3_map()
    pts = np.array([[0.4, 1.0, 2.0], [0.9, 3.0, 5.0], [1.2, 0.2, 4.4]])
    d = cw.fd_exterior_derivative(cw.tc_form(g, 1))
    assert cw.form_sup_norm(d, pts) < 1e-4


def test_transgression_equals_tc2():
    g = geo.s3_map()
    pts = np.array([[0.4, 1.0, 2.0], [0.9, 3.0, 5.0]])
    T = cw.transgression_general(cw.maurer_cartan_path(g), "c", 2)
    ref = cw.tc_form(g, 2)
    assert np.max(np.abs(T.top(pts) - ref.top(pts))) < 1e-8


def test_transgression_ch_relation():
    g = geo.s3_map()
    pts = np.array([[0.7, 2.0, 1.0]])
    Tch = cw.transgression_general(cw.maurer_cartan_path(g), "ch", 2).top(pts)[0]
    Tc = cw.tc_form(g, 2).top(pts)[0]
    # tc = -1! * tch for k = 2
    assert abs(Tc + Tch) < 1e-8


def _poly_connection(coeffs):
    """Connection on R^2 with A_j(x) = sum_m x_m C[j, m] + C[j, 2] (u(2)-valued)."""
    C = coeffs

    def A(pts):
        return np.einsum("pm,jmab->pjab", np.c_[pts, np.ones(len(pts))], C)

    return A


def test_transgression_derivative_identity(rng):
    def skew(shape):
        Z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return 0.5 * (Z - np.conj(np.swapaxes(Z, -1, -2)))

    path = cw.ConnectionPath(2, _poly_connection(skew((2, 3, 2, 2))), _poly_connection(skew((2, 3, 2, 2))))
    pts = rng.uniform(-1, 1, (4, 2))
    for P in ("c", "ch"):
        T = cw.transgression_general(path, P, 1)
        dT = cw.fd_exterior_derivative(T).top(pts)
        diff = cw.curvature_polynomial(path, P, 1, 1).top(pts) - cw.curvature_polynomial(path, P, 1, 0).top(pts)
        assert np.max(np.abs(dT - diff)) < 1e-6


def test_invariant_polynomial_abelian():
    # for u(1) coefficients c_2 vanishes identically and ch_2 = c_1^2 / 2
    F = {(0, 1): np.array([[[0.3j]]]), (2, 3): np.array([[[-1.1j]]])}
    c2 = cw.invariant_polynomial(F, "c", 2)
    assert all(abs(v).max() < 1e-15 for v in c2.values())
    ch2 = cw.invariant_polynomial(F, "ch", 2)[(0, 1, 2, 3)]
    c1 = cw.invariant_polynomial(F, "c", 1)
    expected = c1[(0, 1)] * c1[(2, 3)]
    assert abs(ch2 - expected).max() < 1e-15
    with pytest.raises(ValueError):
        cw.invariant_polynomial(F, "x", 1)
