import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcl import bvp
from mcl.errors import Blowup, NotHyperbolic, OnStableManifold


def test_linear_closed_form():
    sys_ = bvp.linear_diagonal((1.3,), (0.7,))
    prob = bvp.BvpProblem([0.4], [-0.25], 3.0)
    sol = bvp.solve_bvp(sys_, prob)
    t = sol.trajectory.times
    x_ref = 0.4 * np.exp(-1.3 * t)
    y_ref = -0.25 * np.exp(0.7 * (t - 3.0))
    assert np.max(np.abs(sol.trajectory.x[:, 0] - x_ref)) < 1e-12
    assert np.max(np.abs(sol.trajectory.y[:, 0] - y_ref)) < 1e-12


def test_zero_horizon_returns_data():
    sol = bvp.solve_bvp(bvp.cubic_straightened(), bvp.BvpProblem([0.1], [0.2], 0.0))
    assert sol.x1star[0] == 0.1 and sol.y0star[0] == 0.2


@pytest.mark.parametrize("x0,y1,tau", [(0.2, 0.15, 1.0), (-0.1, 0.25, 2.5), (0.25, -0.2, 4.0)])
def test_cubic_matches_shooting(x0, y1, tau):
    sys_ = bvp.cubic_straightened()
    sol = bvp.solve_bvp(sys_, bvp.BvpProblem([x0], [y1], tau))
    y0, traj = bvp.shooting_solution(sys_, [x0], [y1], tau)
    assert abs(sol.y0star[0] - y0) < 1e-8
    ref = traj(sol.trajectory.times)
    assert np.max(np.abs(sol.trajectory.states - ref)) < 1e-8


@settings(max_examples=40, deadline=None)
@given(x0=st.floats(-0.29, 0.29), y1=st.floats(-0.29, 0.29), tau=st.floats(0.0, 5.0))
def test_solution_bound(x0, y1, tau):
    sys_ = bvp.cubic_straightened()
    sol = bvp.solve_bvp(sys_, bvp.BvpProblem([x0], [y1], tau, epsilon=0.3))
    assert sol.hypothesis_ok
    sup = np.max(bvp.state_norm(sys_, sol.trajectory.states))
    assert sup <= 2 * max(abs(x0), abs(y1)) + 1e-12


def test_coupled_bound_and_identities(rng):
    sys_ = bvp.coupled_straightened()
    x0 = np.array([0.1, -0.15])
    y1 = np.array([0.05, 0.2])
    res = bvp.ivp_bvp_identity_residual(sys_, x0, y1, 1.5)
    assert res["bvp_to_ivp"] < 1e-8 and res["ivp_to_bvp"] < 1e-8


def test_problem_validation():
    with pytest.raises(ValueError):
        bvp.BvpProblem([0.5], [0.1], 1.0, epsilon=0.3)
    with pytest.raises(ValueError):
        bvp.BvpProblem([0.1], [0.1], -1.0)


def test_not_hyperbolic():
    sys_ = bvp.HyperbolicSystem(np.array([[0.0]]), np.array([[1.0]]))
    with pytest.raises(NotHyperbolic):
        bvp.spectral_gaps(sys_)


def test_nonvanishing_linearization_rejected():
    with pytest.raises(ValueError):
        bvp.HyperbolicSystem(-np.eye(1), np.eye(1), lambda x, y: (0.5 * y, 0 * y))


def test_rk4_linear():
    sys_ = bvp.linear_diagonal((2.0,), (1.0,))
    traj = bvp.solve_ivp(sys_, [1.0], [0.01], 2.0)
    assert abs(traj.x[-1, 0] - math.exp(-4.0)) < 1e-10
    assert abs(traj.y[-1, 0] - 0.01 * math.exp(2.0)) < 1e-10


def test_ivp_blowup():
    sys_ = bvp.HyperbolicSystem(-np.eye(1), np.eye(1), lambda x, y: (0 * x, y ** 2))
    with pytest.raises(Blowup):
        bvp.solve_ivp(sys_, [0.0], [1.0], 5.0)


def test_delta_estimate():
    assert bvp.delta_estimate(bvp.linear_diagonal(), 0.5).value == 0.0
    # crude bound on the square: |F| <= 2 eps^3 and ||dF|| <= 4 eps^2
    d = bvp.delta_estimate(bvp.cubic_straightened(), 0.3).value
    assert 0 < d <= 4 * 0.09 + 2 * 0.027
    assert bvp.contraction_margin(bvp.cubic_straightened(), 0.3) > 0


def test_dulac_scalar_closed_form():
    lam, mu, eps = 1.5, 0.5, 0.4
    sys_ = bvp.linear_diagonal((lam,), (mu,))
    cube = bvp.CubeSpec(eps)
    for y0 in (0.3, 0.05, -0.01):
        res = bvp.dulac_map(sys_, cube, [eps], [y0])
        assert abs(res.x[0] - eps * (abs(y0) / eps) ** (lam / mu)) < 1e-6
        assert abs(res.time - math.log(eps / abs(y0)) / mu) < 1e-8
        assert abs(abs(res.y[0]) - eps) < 1e-12


def test_dulac_corner_and_rejection():
    sys_ = bvp.cubic_straightened()
    cube = bvp.CubeSpec(0.3)
    res = bvp.dulac_map(sys_, cube, [0.3], [0.3])
    assert res.time == 0.0 and res.x[0] == 0.3 and res.y[0] == 0.3
    with pytest.raises(OnStableManifold):
        bvp.dulac_map(sys_, cube, [0.3], [0.0])
    with pytest.raises(ValueError):
        bvp.dulac_map(sys_, cube, [0.2], [0.1])


def test_continuity_shrinks():
    sys_ = bvp.cubic_straightened()
    table = bvp.continuity_table(sys_, bvp.CubeSpec(0.3), [0.1, 0.01, 0.001], directions=2, radii=3)
    vals = [v for _, v in table]
    assert vals[0] > vals[1] > vals[2]


def test_membership():
    sys_ = bvp.cubic_straightened()
    cube = bvp.CubeSpec(0.3, 0.05)
    assert bvp.fundamental_membership(sys_, cube, [0.2, 0.0])
    assert bvp.fundamental_membership(sys_, cube, [0.0, 0.2])
    assert not bvp.fundamental_membership(sys_, cube, [0.29, 0.25])


def test_scan_symmetric_and_xtrans():
    assert bvp.transversality_scan(bvp.cubic_straightened(), 0.3) == []
    assert bvp.transversality_scan(bvp.coupled_straightened(), 0.3, grid=24) == []
    hits = bvp.transversality_scan(bvp.xtrans_counterexample(), 0.3)
    assert hits
    for h in hits:
        y = h.state
        assert abs(y[0] + y[1]) < 1e-8
        assert abs(np.linalg.norm(y) - 0.3) < 1e-12


def test_decay_slopes():
    sys_ = bvp.cubic_straightened()
    table = bvp.graph_closure_probe(sys_, 0.3, [([0.2], [0.15])], [1.0, 2.0, 3.0], with_derivatives=False)
    assert table.ok
    assert abs(table.slopes[0]["x1star"] + 2.0) < 0.05


def test_convexity_witness(rng):
    out = bvp.flow_convexity_witness(bvp.cubic_straightened(), 0.3, rng, trials=10)
    assert out["violations"] == 0


def test_hypothesis_failure_warns():
    sys_ = bvp.cubic_straightened(rate=0.1)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        try:
            bvp.solve_bvp(sys_, bvp.BvpProblem([0.5], [0.5], 1.0, epsilon=0.9))
        except Exception:
            pass
    assert any(issubclass(w.category, RuntimeWarning) for w in rec)


def test_delta_matches_closed_form_supremum():
    # f = x y^2, g = -y x^2: on the square the supremum of |F| + ||dF|| sits at a corner,
    # where |F| = sqrt(2) eps^3 and dF = eps^2 [[1, 2], [-2, -1]] has spectral norm 3 eps^2.
    eps = 0.3
    exact = 3 * eps ** 2 + math.sqrt(2) * eps ** 3
    assert abs(bvp.delta_estimate(bvp.cubic_straightened(), eps, 1).value / exact - 1) < 0.02


def test_rk4_against_finer_step():
    sys_ = bvp.cubic_straightened()
    coarse = bvp.solve_ivp(sys_, [0.25], [0.01], 2.0, step=1e-3)
    fine = bvp.solve_ivp(sys_, [0.25], [0.01], 2.0, step=1e-4)
    assert np.max(np.abs(coarse.states[-1] - fine.states[-1])) < 1e-8


def test_unstable_manifold_invariant():
    sol = bvp.solve_bvp(bvp.cubic_straightened(), bvp.BvpProblem([0.0], [0.2], 3.0))
    assert np.all(sol.trajectory.x == 0.0)


def test_dulac_contraction():
    sys_ = bvp.cubic_straightened()
    eps = 0.3
    alpha, delta = bvp.decay_parameters(sys_, eps)
    for y0 in (0.2, 0.02, 0.002):
        res = bvp.dulac_map(sys_, bvp.CubeSpec(eps), [eps], [y0])
        assert abs(res.x[0]) <= eps * math.exp(-(alpha - delta) * res.time)
