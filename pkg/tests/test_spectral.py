import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcl import spectral as sp
from mcl.errors import DegenerateHessian, InvalidFrame, InvalidIndexSet, NotInDomain, NotUnitary


def test_index_set_validation():
    with pytest.raises(InvalidIndexSet):
        sp.IndexSet((2, 1))
    with pytest.raises(InvalidIndexSet):
        sp.IndexSet((0,))
    with pytest.raises(InvalidIndexSet):
        sp.IndexSet((1, 4)).validate(3)
    assert sp.IndexSet((1, 3)).complement(4) == (2, 4)
    assert len(sp.all_index_sets(4)) == 16


def test_check_unitary_rejects():
    with pytest.raises(NotUnitary):
        sp.check_unitary(np.array([[1.0, 0.1], [0.0, 1.0]]))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_critical_points_classify_to_themselves(n):
    flag = sp.Flag.standard(n)
    for I in sp.all_index_sets(n):
        U = sp.critical_point(I, flag)
        assert sp.unitarity_residual(U) < 1e-14
        assert sp.incidence_classify(U, flag) == I
        assert sp.nearest_critical(U, flag) == (I, 0.0)


def test_unclassifiable_profile():
    flag = sp.Flag.standard(3)
    U = np.diag([1.0, -1.0, -1.0]).astype(complex)
    assert sp.incidence_classify(U, flag) == sp.IndexSet((2, 3))
    prof = sp.KernelProfile((2, 0, 0, 0))
    assert isinstance(sp.classify_profile(prof), sp.Unclassifiable)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 4), data=st.data())
def test_stratum_samples_classify(seed, n, data):
    rng = np.random.default_rng(seed)
    flag = sp.Flag.standard(n)
    sets = sp.all_index_sets(n)
    I = sets[data.draw(st.integers(0, len(sets) - 1))]
    U = sp.sample_in_stratum(I, flag, rng)
    assert sp.unitarity_residual(U) < 1e-12
    assert sp.incidence_classify(U, flag) == I


def test_haar_unitary_generic(rng):
    flag = sp.Flag.standard(4)
    for _ in range(20):
        U = sp.haar_unitary(4, rng)
        assert sp.unitarity_residual(U) < 1e-13
        assert sp.incidence_classify(U, flag) == sp.IndexSet(())


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_morse_index_matches_unstable_dimension(n):
    flag = sp.Flag.standard(n)
    for I in sp.all_index_sets(n):
        assert sp.morse_index(I, flag) == sp.unstable_dim(I) == sum(2 * i - 1 for i in I)


def test_morse_index_other_weights_and_flag(rng):
    Q = sp.haar_unitary(3, rng)
    flag = sp.Flag(Q)
    A = np.array([0.7, 2.5, 5.0])
    for I in sp.all_index_sets(3):
        assert sp.morse_index(I, flag, A) == sp.unstable_dim(I)


def test_degenerate_weights_rejected():
    with pytest.raises((DegenerateHessian, ValueError)):
        sp.morse_index(sp.IndexSet((1,)), sp.Flag.standard(2), np.array([1.0, 1.0]))


def test_hessian_dimension():
    H = sp.hessian_form(sp.IndexSet((2,)), sp.Flag.standard(3))
    assert H.shape == (9, 9)
    assert np.allclose(H, H.T)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_reduction_unitary(seed):
    rng = np.random.default_rng(seed)
    split = sp.ReductionSplit.from_flag(sp.Flag.standard(4), 2)
    U = sp.haar_unitary(4, rng)
    R = sp.symplectic_reduce(U, split)
    assert R.shape == (2, 2)
    assert sp.unitarity_residual(R) < 1e-9


def test_reduction_exact_cases(rng):
    split = sp.ReductionSplit.from_flag(sp.Flag.standard(4), 2)
    assert np.array_equal(sp.symplectic_reduce(np.eye(4, dtype=complex), split), np.eye(2))
    T = sp.haar_unitary(2, rng)
    X = sp.haar_unitary(2, rng)
    B = np.zeros((4, 4), complex)
    B[:2, :2] = T
    B[2:, 2:] = X
    assert np.array_equal(sp.symplectic_reduce(B, split), T)


def test_reduction_domain():
    split = sp.ReductionSplit.from_flag(sp.Flag.standard(2), 1)
    with pytest.raises(NotInDomain):
        sp.symplectic_reduce(np.diag([1.0, -1.0]).astype(complex), split)
    swap = np.array([[0, 1], [1, 0]], complex)
    assert np.allclose(sp.symplectic_reduce(swap, split), [[-1.0]])


def test_split_rejects_bad_frame():
    with pytest.raises(InvalidFrame):
        sp.ReductionSplit(np.array([[1.0], [0.0]]), np.array([[1.0], [0.0]]))


def test_unitary_with_spectrum():
    V = [[1, 0], [0, 1]]
    U = sp.unitary_with_spectrum([1j, -1], V)
    assert np.allclose(U, np.diag([1j, -1]))
    with pytest.raises(ValueError):
        sp.unitary_with_spectrum([2.0, 1.0], V)
