"""Boundary value problems near a hyperbolic equilibrium.

System:  x' = L⁻x + f(x, y),  y' = L⁺y + g(x, y),  x ∈ R^s, y ∈ R^u.
BVP data: x(0) = x0, y(τ) = y1. Norm |x, y| = max(|x|, |y|).

Nonlinearities are batched: ``F(x, y)`` takes arrays of shape (..., s) and
(..., u) and returns (f, g) of the same shapes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from .errors import (
    Blowup,
    BoundViolation,
    ExitsUpstream,
    NoConvergence,
    NotHyperbolic,
    OnStableManifold,
    UnsupportedDimension,
)

NODES_PER_UNIT = 200
EVENT_TOL = 1e-10
BLOWUP_NORM = 1e6


def _zero_F(x, y):
    return np.zeros_like(x), np.zeros_like(y)


def _square(L) -> np.ndarray:
    L = np.asarray(L, float)
    if L.size == 0:
        return np.zeros((0, 0))
    L = np.atleast_2d(L)
    if L.shape[0] != L.shape[1]:
        raise ValueError(f"linear part must be square, got shape {L.shape}")
    return L


@dataclass
class HyperbolicSystem:
    Lminus: np.ndarray
    Lplus: np.ndarray
    F: Callable = _zero_F
    jac: Optional[Callable] = None
    straightened: bool = False
    name: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.Lminus = _square(self.Lminus)
        self.Lplus = _square(self.Lplus)
        f0, g0 = self.F(np.zeros(self.s), np.zeros(self.u))
        if np.linalg.norm(np.concatenate([f0, g0])) > 1e-8:
            raise ValueError("F(0, 0) must vanish")
        if self.dim and np.linalg.norm(self.jacobian(np.zeros(self.dim))) > 1e-8:
            raise ValueError("dF(0, 0) must vanish")

    @property
    def s(self) -> int:
        return self.Lminus.shape[0]

    @property
    def u(self) -> int:
        return self.Lplus.shape[0]

    @property
    def dim(self) -> int:
        return self.s + self.u

    @property
    def symmetric(self) -> bool:
        return bool(np.allclose(self.Lminus, self.Lminus.T) and np.allclose(self.Lplus, self.Lplus.T))

    def split(self, z):
        z = np.asarray(z, float)
        return z[..., : self.s], z[..., self.s:]

    def nonlinearity(self, z) -> np.ndarray:
        x, y = self.split(z)
        f, g = self.F(x, y)
        return np.concatenate([np.broadcast_to(f, x.shape), np.broadcast_to(g, y.shape)], axis=-1)

    def field(self, z) -> np.ndarray:
        x, y = self.split(z)
        f, g = self.F(x, y)
        return np.concatenate([x @ self.Lminus.T + f, y @ self.Lplus.T + g], axis=-1)

    def jacobian(self, z, h: float = 1e-6) -> np.ndarray:
        """dF at z (shape (..., d, d)); analytic if available, else central differences."""
        z = np.asarray(z, float)
        if self.jac is not None:
            return np.asarray(self.jac(z))
        cols = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            cols.append((self.nonlinearity(z + e) - self.nonlinearity(z - e)) / (2 * h))
        return np.stack(cols, axis=-1)


def state_norm(system: HyperbolicSystem, z) -> np.ndarray:
    """|x, y| = max(|x|, |y|) along the last axis."""
    x, y = system.split(z)
    nx = np.linalg.norm(x, axis=-1) if system.s else np.zeros(np.shape(z)[:-1])
    ny = np.linalg.norm(y, axis=-1) if system.u else np.zeros(np.shape(z)[:-1])
    return np.maximum(nx, ny)


def spectral_gaps(system: HyperbolicSystem) -> tuple[float, float]:
    """(λ₁, μ₁) = (-max Re spec L⁻, min Re spec L⁺); +inf for an empty block."""
    lam = math.inf
    mu = math.inf
    if system.s:
        re = np.real(np.linalg.eigvals(system.Lminus))
        if np.any(np.abs(re) < 1e-10) or np.any(re > 0):
            raise NotHyperbolic(f"L⁻ has eigenvalue real parts {re}")
        lam = float(-np.max(re))
    if system.u:
        re = np.real(np.linalg.eigvals(system.Lplus))
        if np.any(np.abs(re) < 1e-10) or np.any(re < 0):
            raise NotHyperbolic(f"L⁺ has eigenvalue real parts {re}")
        mu = float(np.min(re))
    return lam, mu


@dataclass(frozen=True)
class DeltaEstimate:
    value: float
    spacing: float

    def __float__(self):
        return self.value


def _cube_grid(system: HyperbolicSystem, eps: float, res: int) -> np.ndarray:
    axes = [np.linspace(-eps, eps, res)] * system.dim
    Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, system.dim)
    keep = state_norm(system, Z) <= eps * (1 + 1e-12)
    return Z[keep]


def delta_estimate(system: HyperbolicSystem, epsilon: float, k: int = 1, grid: int = 17) -> DeltaEstimate:
    """Grid supremum over |x,y| ≤ ε of Σ_{|m|≤k} |∂^m F|.

    Norms: Euclidean for F, spectral for dF, Frobenius for the second-derivative tensor.
    """
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    if grid < 8:
        raise ValueError("grid resolution must be at least 8 per axis")
    key = ("delta", float(epsilon), k, grid)
    if key in system._cache:
        return system._cache[key]
    if system.dim == 0:
        return DeltaEstimate(0.0, 0.0)
    Z = _cube_grid(system, epsilon, grid)
    total = np.linalg.norm(system.nonlinearity(Z), axis=-1)
    if k >= 1:
        J = system.jacobian(Z)
        total = total + np.linalg.norm(J, 2, axis=(-2, -1))
    if k >= 2:
        h = 1e-4 * max(epsilon, 1.0)
        second = []
        for i in range(system.dim):
            e = np.zeros(system.dim)
            e[i] = h
            second.append((system.jacobian(Z + e) - system.jacobian(Z - e)) / (2 * h))
        total = total + np.sqrt(sum(np.sum(np.abs(S) ** 2, axis=(-2, -1)) for S in second))
    est = DeltaEstimate(float(np.max(total)), 2 * epsilon / (grid - 1))
    system._cache[key] = est
    return est


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    s: int
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.states[:, : self.s]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, self.s:]

    def at(self, t) -> np.ndarray:
        if self.times.size < 2:
            return np.broadcast_to(self.states[0], np.shape(t) + self.states.shape[1:]).copy()
        return CubicSpline(self.times, self.states, axis=0)(t)


def _rk4_step(system: HyperbolicSystem, z: np.ndarray, h: float) -> np.ndarray:
    k1 = system.field(z)
    k2 = system.field(z + 0.5 * h * k1)
    k3 = system.field(z + 0.5 * h * k2)
    k4 = system.field(z + h * k3)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def solve_ivp(system: HyperbolicSystem, x0, y0, t_end: float, step: float = 1e-3) -> Trajectory:
    """Classical RK4 with a uniform step (the last step is shortened to land on t_end)."""
    z = np.concatenate([np.atleast_1d(np.asarray(x0, float)), np.atleast_1d(np.asarray(y0, float))])
    if t_end == 0:
        return Trajectory(np.array([0.0]), z[None, :], system.s, {"steps": 0})
    nsteps = max(1, int(math.ceil(abs(t_end) / step - 1e-9)))
    h = t_end / nsteps
    out = np.empty((nsteps + 1, z.size))
    out[0] = z
    for i in range(nsteps):
        z = _rk4_step(system, z, h)
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > BLOWUP_NORM:
            raise Blowup(f"state norm exceeded {BLOWUP_NORM:g} at t={(i + 1) * h:g}")
        out[i + 1] = z
    return Trajectory(np.linspace(0.0, t_end, nsteps + 1), out, system.s, {"steps": nsteps, "h": h})


@dataclass(frozen=True)
class BvpProblem:
    x0: np.ndarray
    y1: np.ndarray
    tau: float
    epsilon: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, float)))
        object.__setattr__(self, "y1", np.atleast_1d(np.asarray(self.y1, float)))
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.epsilon is not None and self.data_norm >= self.epsilon:
            raise ValueError(f"|x0, y1| = {self.data_norm:g} is not below epsilon = {self.epsilon:g}")

    @property
    def data_norm(self) -> float:
        nx = np.linalg.norm(self.x0) if self.x0.size else 0.0
        ny = np.linalg.norm(self.y1) if self.y1.size else 0.0
        return float(max(nx, ny))


@dataclass(frozen=True)
class BvpSolution:
    trajectory: Trajectory
    x1star: np.ndarray
    y0star: np.ndarray
    iterations: int
    increment: float
    hypothesis_ok: bool


def _linear_scan(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    """out_j = Σ_{i≤j} M^{j-i} v_i, by log-depth doubling (only nonnegative powers of M)."""
    S = v.copy()
    P = M
    shift = 1
    while shift < S.shape[0]:
        S[shift:] = S[shift:] + S[:-shift] @ P.T
        P = P @ P
        shift *= 2
    return S


def _midpoints(Z: np.ndarray) -> np.ndarray:
    """Cubic (4-point Lagrange) interpolation at interval midpoints of a uniform grid."""
    mid = np.empty((Z.shape[0] - 1,) + Z.shape[1:])
    mid[1:-1] = (-Z[:-3] + 9 * Z[1:-2] + 9 * Z[2:-1] - Z[3:]) / 16
    mid[0] = (5 * Z[0] + 15 * Z[1] - 5 * Z[2] + Z[3]) / 16
    mid[-1] = (5 * Z[-1] + 15 * Z[-2] - 5 * Z[-3] + Z[-4]) / 16
    return mid


def contraction_margin(system: HyperbolicSystem, epsilon: float) -> float:
    """min(λ₁, μ₁) − δ¹_{2ε}; positive when the solvability hypothesis holds."""
    lam, mu = spectral_gaps(system)
    return min(lam, mu) - delta_estimate(system, 2 * epsilon, 1, grid=9).value


def solve_bvp(system: HyperbolicSystem, problem: BvpProblem, tol: float = 1e-12,
              max_iter: int = 200, nodes: Optional[int] = None) -> BvpSolution:
    """Picard iteration on the variation-of-constants equations

        x(t) = e^{tL⁻}x0 + ∫_0^t e^{(t-s)L⁻} f ds
        y(t) = e^{(t-τ)L⁺}y1 − ∫_t^τ e^{(t-s)L⁺} g ds

    on a uniform grid (``nodes`` intervals, default 200 per unit time), composite
    Simpson per interval with cubic midpoint interpolation of the iterate.
    """
    s, u = system.s, system.u
    x0, y1, tau = problem.x0, problem.y1, float(problem.tau)
    if x0.size != s or y1.size != u:
        raise ValueError("data dimensions do not match the system")
    eps = problem.epsilon if problem.epsilon is not None else max(problem.data_norm, 1e-12) * (1 + 1e-9)
    hypothesis_ok = contraction_margin(system, eps) > 0
    if not hypothesis_ok:
        warnings.warn("δ¹_{2ε} ≥ min(λ₁, μ₁): contraction hypothesis fails, attempting anyway",
                      RuntimeWarning, stacklevel=2)

    if tau == 0.0:
        z = np.concatenate([x0, y1])[None, :]
        traj = Trajectory(np.array([0.0]), z, s, {"iterations": 0})
        return BvpSolution(traj, x0.copy(), y1.copy(), 0, 0.0, hypothesis_ok)

    N = nodes if nodes is not None else max(4, int(math.ceil(NODES_PER_UNIT * tau - 1e-9)))
    h = tau / N
    times = np.linspace(0.0, tau, N + 1)
    Ms, Ms_half = expm(h * system.Lminus), expm(0.5 * h * system.Lminus)
    Mu, Mu_half = expm(-h * system.Lplus), expm(-0.5 * h * system.Lplus)

    def sweep(X, Y):
        Z = np.concatenate([X, Y], axis=1)
        f, g = system.F(X, Y)
        fm, gm = system.F(*np.split(_midpoints(Z), [s], axis=1))
        vx = np.zeros((N + 1, s))
        vx[0] = x0
        vx[1:] = (h / 6) * (f[:-1] @ Ms.T + 4 * fm @ Ms_half.T + f[1:])
        vy = np.zeros((N + 1, u))
        vy[0] = y1
        d = (h / 6) * (g[:-1] + 4 * gm @ Mu_half.T + g[1:] @ Mu.T)
        vy[1:] = -d[::-1]
        return _linear_scan(Ms, vx), _linear_scan(Mu, vy)[::-1]

    # linear solution as the first iterate
    X = _linear_scan(Ms, np.vstack([x0[None, :], np.zeros((N, s))]))
    Y = _linear_scan(Mu, np.vstack([y1[None, :], np.zeros((N, u))]))[::-1]
    increment = math.inf
    for it in range(1, max_iter + 1):
        Xn, Yn = sweep(X, Y)
        diff = np.concatenate([Xn - X, Yn - Y], axis=1)
        increment = float(np.max(state_norm(system, diff)))
        X, Y = Xn, Yn
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise NoConvergence("Picard iterates diverged")
        if increment < tol:
            break
    else:
        raise NoConvergence(f"no contraction after {max_iter} iterations (last increment {increment:.2e})")

    states = np.concatenate([X, Y], axis=1)
    sup = float(np.max(state_norm(system, states)))
    bound = 2 * problem.data_norm
    meta = {"iterations": it, "increment": increment, "sup_norm": sup, "bound": bound, "nodes": N}
    if hypothesis_ok and sup > bound + 1e-9:
        raise BoundViolation(f"sup |x*, y*| = {sup:.3e} exceeds 2|x0, y1| = {bound:.3e}")
    traj = Trajectory(times, states, s, meta)
    return BvpSolution(traj, X[-1].copy(), Y[0].copy(), it, increment, hypothesis_ok)


def endpoint_maps(system: HyperbolicSystem, x0, y1, tau: float, **kw) -> tuple[np.ndarray, np.ndarray]:
    """(x₁*, y₀*) = (x*(τ), y*(0)) of the BVP with data (x0, y1, τ)."""
    sol = solve_bvp(system, BvpProblem(x0, y1, tau), **kw)
    return sol.x1star, sol.y0star


def endpoint_jacobian(system: HyperbolicSystem, x0, y1, tau: float, h: float = 1e-5,
                      tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference derivatives of x₁*, y₀* with respect to (x0, y1, τ).

    The grid size is frozen at the base τ so that the τ-derivative sees a smooth map.
    """
    x0 = np.atleast_1d(np.asarray(x0, float))
    y1 = np.atleast_1d(np.asarray(y1, float))
    N = max(4, int(math.ceil(NODES_PER_UNIT * tau - 1e-9)))
    base = np.concatenate([x0, y1, [tau]])
    s, u = system.s, system.u
    Jx = np.zeros((s, base.size))
    Jy = np.zeros((u, base.size))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i in range(base.size):
            vals = []
            for sign in (1, -1):
                p = base.copy()
                p[i] += sign * h
                sol = solve_bvp(system, BvpProblem(p[:s], p[s:s + u], p[-1]), tol=tol, nodes=N)
                vals.append((sol.x1star, sol.y0star))
            Jx[:, i] = (vals[0][0] - vals[1][0]) / (2 * h)
            Jy[:, i] = (vals[0][1] - vals[1][1]) / (2 * h)
    return Jx, Jy


def ivp_bvp_identity_residual(system: HyperbolicSystem, x0, y1, tau: float, tol: float = 1e-12,
                              ivp_step: float = 1e-3) -> dict:
    """Both directions of the IVP/BVP identities, as sup-norm discrepancies.

    bvp→ivp: solve the BVP, restart the IVP from (x0, y₀*) and compare trajectories.
    ivp→bvp: from the IVP endpoint y(τ) re-solve the BVP and compare with the IVP.
    """
    sol = solve_bvp(system, BvpProblem(x0, y1, tau), tol=tol)
    times = sol.trajectory.times
    ivp = solve_ivp(system, x0, sol.y0star, tau, step=ivp_step)
    ivp_on_grid = CubicSpline(ivp.times, ivp.states, axis=0)(times) if ivp.times.size > 1 else ivp.states
    forward = float(np.max(np.abs(ivp_on_grid - sol.trajectory.states)))
    y_tau = ivp.y[-1]
    sol2 = solve_bvp(system, BvpProblem(x0, y_tau, tau), tol=tol)
    backward = float(np.max(np.abs(sol2.trajectory.states - ivp_on_grid)))
    return {"bvp_to_ivp": forward, "ivp_to_bvp": backward}


def shooting_solution(system: HyperbolicSystem, x0, y1, tau: float, rtol: float = 1e-13):
    """Independent reference for u = 1: DOP853 integration plus a bracketing root-find on y0."""
    from scipy.integrate import solve_ivp as scipy_ivp

    if system.u != 1:
        raise UnsupportedDimension("shooting oracle implemented for u = 1")
    x0 = np.atleast_1d(np.asarray(x0, float))
    target = float(np.atleast_1d(y1)[0])

    def rhs(t, z):
        return system.field(z)

    def end_y(y0):
        r = scipy_ivp(rhs, (0, tau), np.concatenate([x0, [y0]]), method="DOP853", rtol=rtol, atol=1e-16)
        return r.y[-1, -1] - target

    mu = spectral_gaps(system)[1]
    guess = target * math.exp(-mu * tau)
    width = abs(guess) + 1e-3
    a, b = guess - width, guess + width
    while end_y(a) * end_y(b) > 0:
        width *= 2
        a, b = guess - width, guess + width
    y0 = optimize.brentq(end_y, a, b, xtol=1e-17, rtol=4 * np.finfo(float).eps, maxiter=500)
    return y0, lambda t: scipy_ivp(rhs, (0, tau), np.concatenate([x0, [y0]]), method="DOP853",
                                   rtol=rtol, atol=1e-16, t_eval=np.atleast_1d(t)).y.T


# --- the cube C_ε, Dulac map and fundamental neighbourhoods ---------------------------


@dataclass(frozen=True)
class CubeSpec:
    epsilon: float
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        g = self.epsilon if self.gamma is None else self.gamma
        if not 0 < g <= self.epsilon:
            raise ValueError("need 0 < gamma <= epsilon")
        object.__setattr__(self, "gamma", float(g))


@dataclass(frozen=True)
class DulacResult:
    x: np.ndarray
    y: np.ndarray
    time: float
    path: Optional[Trajectory] = None


def _run_to_outflow(system: HyperbolicSystem, z: np.ndarray, eps: float, step: float,
                    t_max: float, upstream_check: bool) -> tuple[np.ndarray, float, list]:
    """RK4 until |y| reaches ε; the crossing is refined by bisection on the last step."""
    s = system.s
    t = 0.0
    samples = [(0.0, z.copy())]
    while t < t_max:
        z_next = _rk4_step(system, z, step)
        ny = np.linalg.norm(z_next[s:])
        if upstream_check and s and np.linalg.norm(z_next[:s]) > eps * (1 + 1e-9):
            raise ExitsUpstream(f"trajectory leaves C_ε through ∂⁺ near t={t + step:g}")
        if ny >= eps:
            lo, hi = 0.0, step
            while hi - lo > EVENT_TOL:
                mid = 0.5 * (lo + hi)
                if np.linalg.norm(_rk4_step(system, z, mid)[s:]) >= eps:
                    hi = mid
                else:
                    lo = mid
            z_exit = _rk4_step(system, z, hi)
            # land exactly on the wall; the radial correction is below the event tolerance
            z_exit[s:] *= eps / np.linalg.norm(z_exit[s:])
            samples.append((t + hi, z_exit.copy()))
            return z_exit, t + hi, samples
        z = z_next
        t += step
        samples.append((t, z.copy()))
        if np.max(np.abs(z)) > BLOWUP_NORM:
            raise Blowup("trajectory blew up before reaching the outflow wall")
    raise NoConvergence(f"no exit through ∂⁻C_ε by t={t_max:g}")


def dulac_map(system: HyperbolicSystem, cube: CubeSpec, x0, y0, step: float = 1e-2,
              t_max: float = 500.0, keep_path: bool = False) -> DulacResult:
    """First-encounter map ∂⁺C_ε \\ S₀ → ∂⁻C_ε \\ U₀."""
    eps = cube.epsilon
    x0 = np.atleast_1d(np.asarray(x0, float))
    y0 = np.atleast_1d(np.asarray(y0, float))
    nx, ny = np.linalg.norm(x0), np.linalg.norm(y0)
    if abs(nx - eps) > 1e-9 * eps or ny > eps * (1 + 1e-12):
        raise ValueError("start point is not on ∂⁺C_ε (|x0| = ε, |y0| ≤ ε)")
    if ny == 0.0:
        raise OnStableManifold("y0 = 0: the trajectory stays on S₀ and converges to the origin")
    if abs(ny - eps) <= 1e-12 * eps:
        return DulacResult(x0.copy(), y0.copy(), 0.0)
    z_exit, t_exit, samples = _run_to_outflow(system, np.concatenate([x0, y0]), eps, step, t_max, False)
    path = None
    if keep_path:
        path = Trajectory(np.array([p[0] for p in samples]), np.array([p[1] for p in samples]), system.s)
    return DulacResult(z_exit[: system.s], z_exit[system.s:], t_exit, path)


def fundamental_membership(system: HyperbolicSystem, cube: CubeSpec, p, step: float = 1e-2,
                           kernel_tol: float = 1e-12, t_max: float = 500.0) -> bool:
    """Is p in V_γ^ε: on S₀ ∪ U₀, or flowing out through ∂⁻C_ε with |x₁| < γ?"""
    z = np.asarray(p, float)
    x, y = z[: system.s], z[system.s:]
    nx = np.linalg.norm(x) if system.s else 0.0
    ny = np.linalg.norm(y) if system.u else 0.0
    if max(nx, ny) > cube.epsilon * (1 + 1e-12):
        raise ValueError("p is not in C_ε")
    if nx * ny < kernel_tol:
        return True
    if abs(ny - cube.epsilon) <= 1e-12 * cube.epsilon:
        return bool(nx < cube.gamma)
    z_exit, _, _ = _run_to_outflow(system, z, cube.epsilon, step, t_max, True)
    return bool(np.linalg.norm(z_exit[: system.s]) < cube.gamma)


# --- transversality of X to the cube walls ---------------------------------------------


@dataclass(frozen=True)
class Tangency:
    wall: str
    state: np.ndarray
    value: float


def _sphere_point(k: int, eps: float, angles) -> np.ndarray:
    if k == 2:
        (phi,) = angles
        return eps * np.array([math.cos(phi), math.sin(phi)])
    theta, phi = angles
    return eps * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


def _wall_lines(k_sphere: int, k_ball: int, eps: float, grid: int):
    """Yield (fixed-parameter closure, (lo, hi), periodic) describing 1-D scan lines of a wall."""
    if k_sphere == 0:
        return
    if k_sphere > 3 or k_ball > 3:
        raise UnsupportedDimension("transversality scan supports block dimensions up to 3")
    ball_pts = [np.zeros(0)]
    if k_ball:
        ax = np.linspace(-eps, eps, max(3, grid // 4))
        mesh = np.stack(np.meshgrid(*[ax] * k_ball, indexing="ij"), -1).reshape(-1, k_ball)
        ball_pts = [b for b in mesh if np.linalg.norm(b) <= eps]
    if k_sphere >= 2:
        thetas = [None] if k_sphere == 2 else list(np.linspace(0, math.pi, max(3, grid // 4)))
        for b in ball_pts:
            for th in thetas:
                def at(phi, b=b, th=th):
                    ang = (phi,) if th is None else (th, phi)
                    return _sphere_point(k_sphere, eps, ang), b
                yield at, (0.0, 2 * math.pi), True
        return
    # k_sphere == 1: the sphere is {±ε}; scan along the first ball coordinate
    for sign in (-1.0, 1.0):
        if k_ball == 0:
            yield (lambda p, sign=sign: (np.array([sign * eps]), np.zeros(0))), (0.0, 0.0), False
            continue
        rests = [np.zeros(0)] if k_ball == 1 else [b[1:] for b in ball_pts if abs(b[0]) < 1e-15]
        for rest in rests:
            r = math.sqrt(max(eps ** 2 - float(rest @ rest), 0.0))

            def at(p, sign=sign, rest=rest):
                return np.array([sign * eps]), np.concatenate([[p], rest])
            yield at, (-r, r), False


def transversality_scan(system: HyperbolicSystem, epsilon: float, grid: int = 64,
                        zero_tol: float = 1e-8) -> list[Tangency]:
    """Points of ∂±C_ε where ⟨X₁, x⟩ (on |x| = ε) or ⟨X₂, y⟩ (on |y| = ε) vanishes.

    Each scan line is sampled; sign changes are refined with brentq, and small local
    minima of |h| (touching zeros, which have no sign change) by a root of h'.
    """
    s, u = system.s, system.u
    found: list[Tangency] = []

    def make_h(wall, at):
        def h(p):
            a, b = at(p)
            z = np.concatenate([a, b]) if wall == "+" else np.concatenate([b, a])
            X = system.field(z)
            return float(X[:s] @ z[:s]) if wall == "+" else float(X[s:] @ z[s:])
        return h, lambda p: (np.concatenate(at(p)) if wall == "+" else np.concatenate(at(p)[::-1]))

    for wall, ks, kb in (("+", s, u), ("-", u, s)):
        for at, (lo, hi), periodic in _wall_lines(ks, kb, epsilon, grid):
            h, state = make_h(wall, at)
            if hi == lo:
                if abs(h(lo)) < zero_tol:
                    found.append(Tangency(wall, state(lo), h(lo)))
                continue
            ps = np.linspace(lo, hi, grid, endpoint=not periodic)
            hs = np.array([h(p) for p in ps])
            scale = max(float(np.max(np.abs(hs))), 1e-300)
            m = len(ps)
            idx = range(m) if periodic else range(m - 1)
            candidates = []
            for i in idx:
                j = (i + 1) % m
                b = ps[j] if j > i else ps[j] + (hi - lo)
                if hs[i] == 0.0:
                    candidates.append(ps[i])
                elif hs[i] * hs[j] < 0:
                    candidates.append(optimize.brentq(h, ps[i], b, xtol=1e-15))
            dp = (ps[1] - ps[0])
            rng_i = range(m) if periodic else range(1, m - 1)
            for i in rng_i:
                a_, c_ = hs[(i - 1) % m], hs[(i + 1) % m]
                if abs(hs[i]) <= abs(a_) and abs(hs[i]) < abs(c_) and abs(hs[i]) < 0.1 * scale \
                        and hs[i] * a_ > 0 and hs[i] * c_ > 0:
                    delta = 1e-7 * dp

                    def dh(p):
                        return h(p + delta) - h(p - delta)
                    left, right = ps[i] - dp, ps[i] + dp
                    if dh(left) * dh(right) < 0:
                        candidates.append(optimize.brentq(dh, left, right, xtol=1e-15))
            for p in candidates:
                val = h(p)
                if abs(val) < zero_tol:
                    z = state(p)
                    if all(np.linalg.norm(z - t.state) > 1e-7 or t.wall != wall for t in found):
                        found.append(Tangency(wall, z, val))
    return found


# --- graph compactification probe and other witnesses ---------------------------------


def decay_parameters(system: HyperbolicSystem, epsilon: float) -> tuple[float, float]:
    """(α, δ) with α = min(λ₁, μ₁)(1 − 1e-3) and δ = δ¹_{2ε}."""
    lam, mu = spectral_gaps(system)
    return min(lam, mu) * (1 - 1e-3), delta_estimate(system, 2 * epsilon, 1, grid=17).value


@dataclass
class DecayTable:
    rows: list
    slopes: dict
    bound: float
    alpha: float
    delta: float

    @property
    def ok(self) -> bool:
        return all(v <= self.bound for per in self.slopes.values() for v in per.values())


def _fit_slope(taus, vals) -> float:
    return float(np.polyfit(np.asarray(taus), np.log(np.asarray(vals)), 1)[0])


def graph_closure_probe(system: HyperbolicSystem, epsilon: float, points, tau_list,
                        fd_step: float = 1e-5, with_derivatives: bool = True) -> DecayTable:
    """Endpoint maps and their derivatives over τ; log-slopes against −(α−δ)+0.05."""
    alpha, delta = decay_parameters(system, epsilon)
    bound = -(alpha - delta) + 0.05
    rows = []
    slopes = {}
    for pi, (x0, y1) in enumerate(points):
        x0 = np.atleast_1d(np.asarray(x0, float))
        y1 = np.atleast_1d(np.asarray(y1, float))
        series = {"x1star": [], "y0star": [], "dx1star": [], "dy0star": []}
        for tau in tau_list:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                sol = solve_bvp(system, BvpProblem(x0, y1, tau), tol=1e-14)
            row = {"point": pi, "tau": float(tau), "abs_x1star": float(np.linalg.norm(sol.x1star)),
                   "abs_y0star": float(np.linalg.norm(sol.y0star))}
            if with_derivatives:
                Jx, Jy = endpoint_jacobian(system, x0, y1, tau, h=fd_step)
                row["abs_dx1star"] = float(np.linalg.norm(Jx))
                row["abs_dy0star"] = float(np.linalg.norm(Jy))
            rows.append(row)
            series["x1star"].append(row["abs_x1star"])
            series["y0star"].append(row["abs_y0star"])
            if with_derivatives:
                series["dx1star"].append(row["abs_dx1star"])
                series["dy0star"].append(row["abs_dy0star"])
        fits = {}
        for key, vals in series.items():
            if vals and min(vals) > 0:
                fits[key] = _fit_slope(tau_list, vals)
        slopes[pi] = fits
    return DecayTable(rows, slopes, bound, alpha, delta)


def continuity_table(system: HyperbolicSystem, cube: CubeSpec, gamma0_list, directions: int = 4,
                     radii: int = 6, step: float = 1e-2) -> list[tuple[float, float]]:
    """max |μ₁(x, y)| over starts on ∂⁺C_ε with 0 < |y| ≤ γ₀, for each γ₀."""
    rng = np.random.default_rng(12345)
    s, u = system.s, system.u
    starts_x = [v / np.linalg.norm(v) * cube.epsilon for v in rng.standard_normal((directions, s))]
    starts_y = [v / np.linalg.norm(v) for v in rng.standard_normal((directions, u))]
    out = []
    for g0 in gamma0_list:
        best = 0.0
        for r in np.geomspace(g0 * 1e-2, g0, radii):
            for x0 in starts_x:
                for yd in starts_y:
                    res = dulac_map(system, cube, x0, yd * r, step=step)
                    best = max(best, float(np.linalg.norm(res.x)))
        out.append((float(g0), best))
    return out


def flow_convexity_witness(system: HyperbolicSystem, epsilon: float, rng: np.random.Generator,
                           trials: int = 20, samples: int = 50, step: float = 1e-2) -> dict:
    """Pairs q1 ≺ q2 in C_ε; every intermediate trajectory sample must stay in C_ε."""
    tested = violations = 0
    for _ in range(trials):
        z = rng.uniform(-1, 1, system.dim)
        z *= epsilon * rng.uniform(0.2, 0.99) / max(state_norm(system, z), 1e-300)
        T = rng.uniform(0.05, 1.0)
        traj = solve_ivp(system, z[: system.s], z[system.s:], T, step=step)
        if state_norm(system, traj.states[-1]) > epsilon:
            continue
        tested += 1
        mids = traj.at(np.linspace(0, T, samples + 2)[1:-1])
        violations += int(np.sum(state_norm(system, mids) > epsilon * (1 + 1e-12)))
    return {"pairs": tested, "violations": violations}


# --- built-in systems -------------------------------------------------------------------


def linear_diagonal(lam=(1.0,), mu=(1.0,)) -> HyperbolicSystem:
    return HyperbolicSystem(-np.diag(np.atleast_1d(lam)), np.diag(np.atleast_1d(mu)),
                            straightened=True, name="linear-diagonal")


def cubic_straightened(rate: float = 2.0, s: int = 1, u: int = 1) -> HyperbolicSystem:
    """f = |y|² x, g = −|x|² y on top of L = diag(−rate, +rate)."""

    def F(x, y):
        ny2 = np.sum(y * y, axis=-1, keepdims=True)
        nx2 = np.sum(x * x, axis=-1, keepdims=True)
        return ny2 * x, -nx2 * y

    def jac(z):
        z = np.asarray(z, float)
        x, y = z[..., :s], z[..., s:]
        nx2 = np.sum(x * x, axis=-1)[..., None, None]
        ny2 = np.sum(y * y, axis=-1)[..., None, None]
        J = np.zeros(z.shape[:-1] + (s + u, s + u))
        J[..., :s, :s] = ny2 * np.eye(s)
        J[..., :s, s:] = 2 * x[..., :, None] * y[..., None, :]
        J[..., s:, :s] = -2 * y[..., :, None] * x[..., None, :]
        J[..., s:, s:] = -nx2 * np.eye(u)
        return J

    return HyperbolicSystem(-rate * np.eye(s), rate * np.eye(u), F, jac, straightened=True,
                            name="cubic-straightened")


def coupled_straightened() -> HyperbolicSystem:
    """s = u = 2 with symmetric, non-diagonal L± and a straightened cubic coupling."""

    def F(x, y):
        return 0.5 * np.sum(y * y, axis=-1, keepdims=True) * x, -0.5 * np.sum(x * x, axis=-1, keepdims=True) * y

    return HyperbolicSystem(np.array([[-2.0, 0.3], [0.3, -1.5]]), np.array([[1.5, 0.2], [0.2, 2.0]]), F,
                            straightened=True, name="coupled-straightened")


def xtrans_counterexample() -> HyperbolicSystem:
    """s = 0, u = 2, L⁺ = [[1, 2], [0, 1]]: hyperbolic but tangent to every sphere |y| = ε."""
    return HyperbolicSystem(np.zeros((0, 0)), np.array([[1.0, 2.0], [0.0, 1.0]]), name="xtrans-counterexample")


SYSTEMS = {
    "linear-diagonal": linear_diagonal,
    "cubic-straightened": cubic_straightened,
    "coupled-straightened": coupled_straightened,
    "xtrans-counterexample": xtrans_counterexample,
}
