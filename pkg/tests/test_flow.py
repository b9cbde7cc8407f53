import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from mcl import flow, spectral as sp
from mcl.errors import SlowConvergence


def _ode_reference(cfg, U, t):
    A = cfg.A
    n = cfg.n

    def rhs(_, v):
        M = v.reshape(n, n)
        return (A - M @ A @ M).ravel()

    sol = solve_ivp(rhs, (0, t), U.ravel().astype(complex), method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[:, -1].reshape(n, n)


def test_closed_form_matches_ode_integrator(rng):
    cfg = flow.FlowConfig(3)
    for _ in range(3):
        U = sp.haar_unitary(3, rng)
        for t in (0.4, 1.7):
            assert np.max(np.abs(flow.flow_at(cfg, U, t) - _ode_reference(cfg, U, t))) < 1e-9


def test_flow_with_rotated_flag(rng):
    cfg = flow.FlowConfig(2, np.array([0.5, 1.5]), sp.Flag(sp.haar_unitary(2, rng)))
    U = sp.haar_unitary(2, rng)
    assert np.max(np.abs(flow.flow_at(cfg, U, 1.1) - _ode_reference(cfg, U, 1.1))) < 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), t=st.floats(0.0, 6.0))
def test_unitary_and_monotone(seed, t):
    rng = np.random.default_rng(seed)
    cfg = flow.FlowConfig(3)
    U = sp.haar_unitary(3, rng)
    V = flow.flow_at(cfg, U, t)
    assert sp.unitarity_residual(V) < 1e-8
    assert flow.f_value(cfg, V) >= flow.f_value(cfg, U) - 1e-12


def test_semigroup_and_inverse(rng):
    cfg = flow.FlowConfig(3)
    U = sp.haar_unitary(3, rng)
    a = flow.flow_at(cfg, flow.flow_at(cfg, U, 0.8), 1.4)
    b = flow.flow_at(cfg, U, 2.2)
    assert np.max(np.abs(a - b)) < 1e-10
    back = flow.flow_at(cfg, flow.flow_at(cfg, U, 0.9), -0.9)
    assert np.max(np.abs(back - U)) < 1e-10


def test_critical_points_fixed():
    cfg = flow.FlowConfig(3)
    for I in sp.all_index_sets(3):
        U = sp.critical_point(I, cfg.flag)
        assert np.max(np.abs(flow.gradient(cfg, U))) < 1e-14
        assert np.max(np.abs(flow.flow_at(cfg, U, 3.0) - U)) < 1e-12


@pytest.mark.parametrize("I", [(), (1,), (2,), (3,), (1, 2), (2, 3), (1, 3), (1, 2, 3)])
def test_limit_of_stratum_seeds(I, rng):
    cfg = flow.FlowConfig(3)
    for _ in range(3):
        U = sp.sample_in_stratum(I, cfg.flag, rng)
        lim = flow.flow_limit(cfg, U)
        assert lim.index_set == sp.IndexSet(I)
        assert lim.kernel_dim == len(I)


def test_limit_horizon():
    cfg = flow.FlowConfig(2)
    U = sp.haar_unitary(2, np.random.default_rng(1))
    with pytest.raises(SlowConvergence):
        flow.flow_limit(cfg, U, tol=1e-15, horizon=1.0)
