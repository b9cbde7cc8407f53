"""Gradient flow of f(U) = Re Tr(AU) on U(n) in closed form.

Φ_t(U) = (sinh(tA) + cosh(tA)U)(cosh(tA) + sinh(tA)U)^{-1}. The hyperbolic
factors grow like e^{t·max A}, so long horizons are reached by composing steps
of moderate length.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBreakdown, SlowConvergence
from .spectral import (
    DEFAULT_KERNEL_TOL,
    Flag,
    IndexSet,
    _check_weights,
    check_unitary,
    default_weights,
    nearest_critical,
)

MAX_COND = 1e12


@dataclass(frozen=True)
class FlowConfig:
    n: int
    weights: np.ndarray = None
    flag: Flag = None

    def __post_init__(self):
        a = default_weights(self.n) if self.weights is None else _check_weights(self.weights)
        if a.size != self.n:
            raise ValueError(f"need {self.n} weights, got {a.size}")
        object.__setattr__(self, "weights", a)
        if self.flag is None:
            object.__setattr__(self, "flag", Flag.standard(self.n))

    @property
    def A(self) -> np.ndarray:
        return self.flag.from_flag_basis(np.diag(self.weights).astype(complex))


def f_value(cfg: FlowConfig, U) -> float:
    U = check_unitary(U)
    return float(np.real(np.trace(cfg.A @ U)))


def gradient(cfg: FlowConfig, U) -> np.ndarray:
    U = check_unitary(U)
    A = cfg.A
    return A - U @ A @ U


def _step(cfg: FlowConfig, M: np.ndarray, t: float) -> np.ndarray:
    """One closed-form step in the flag basis, where A is diagonal."""
    s, c = np.sinh(t * cfg.weights), np.cosh(t * cfg.weights)
    D = np.diag(c) + s[:, None] * M
    cond = np.linalg.cond(D)
    if not np.isfinite(cond) or cond > MAX_COND:
        raise NumericalBreakdown(f"cosh(tA) + sinh(tA)U has condition {cond:.2e}; use smaller increments")
    # right division N D^{-1}
    return np.linalg.solve(D.T, (np.diag(s) + c[:, None] * M).T).T


def flow_at(cfg: FlowConfig, U, t: float, max_step: float = 1.0) -> np.ndarray:
    """Φ_t(U); |t| larger than ``max_step`` is reached by composition.

    Eigenvalues at -1 are repelling, and the extended map amplifies departures from
    unitarity there by e^{2at}; seeds lying on a stratum S(U_I), I ≠ ∅, should go
    through ``flow_limit``, which transports the -1 eigenspace exactly.
    """
    U = check_unitary(U)
    M = cfg.flag.to_flag_basis(U)
    nsteps = max(1, int(np.ceil(abs(t) / max_step)))
    h = t / nsteps
    for _ in range(nsteps):
        M = _step(cfg, M, h)
    return cfg.flag.from_flag_basis(M)


def _echelon_snap(K: np.ndarray, pivots: tuple) -> np.ndarray:
    """Basis of K adapted to the flag, with exact zeros above each pivot (flag basis).

    w_p spans (K ∩ W_{j_p}) ⊖ (K ∩ W_{j_{p+1}}); orthonormalizing from the deepest
    vector upward keeps the zero pattern intact.
    """
    n, d = K.shape
    subspaces = []
    for p, j in enumerate(pivots):
        if j == 0:
            subspaces.append(K)
            continue
        _, _, vh = np.linalg.svd(K[:j, :])
        subspaces.append(K @ vh[p:].conj().T)
    cols = []
    for p, j in enumerate(pivots):
        S = subspaces[p]
        if p + 1 < d:
            deeper = subspaces[p + 1]
            S = S - deeper @ (deeper.conj().T @ S)
        u, _, _ = np.linalg.svd(S, full_matrices=False)
        w = u[:, 0].copy()
        w[:j] = 0.0
        cols.append(w)
    out = np.zeros((n, d), complex)
    for p in reversed(range(d)):
        w = cols[p] - out[:, p + 1:] @ (out[:, p + 1:].conj().T @ cols[p])
        out[:, p] = w / np.linalg.norm(w)
    return out


def _kernel_pivots(K: np.ndarray, tol: float) -> tuple:
    """Flag positions (0-based) where dim(K ∩ W_m) drops, from the kernel basis K."""
    n, d = K.shape
    pivots = []
    for m in range(n):
        # dim(K ∩ W_m) = d - rank of the first m coordinates of K
        rank_m = np.linalg.matrix_rank(K[:m, :], tol) if m else 0
        rank_next = np.linalg.matrix_rank(K[: m + 1, :], tol)
        if rank_next > rank_m:
            pivots.append(m)
    return tuple(pivots[:d])


@dataclass
class FlowLimit:
    index_set: IndexSet
    time: float
    distance: float
    kernel_dim: int = 0
    history: list = field(default_factory=list)


def flow_limit(cfg: FlowConfig, U, tol: float = 1e-6, horizon: float = 200.0,
               step: float = 1.0, kernel_tol: float = DEFAULT_KERNEL_TOL) -> FlowLimit:
    """Evolve U until it is within ``tol`` of a critical point and return that point's label.

    The -1 eigenspace is transported exactly: 1 + Φ_s(U) = (C+S)(1+U)(C+SU)^{-1} with
    C, S = cosh(sA), sinh(sA), hence ker(1+Φ_s(U)) = (C+SU) ker(1+U).
    Each step re-imposes that eigenspace, with its flag-incidence pattern, so that
    rounding cannot push an on-stratum seed off its (unstable) stable manifold.
    """
    U = check_unitary(U)
    n = cfg.n
    M = cfg.flag.to_flag_basis(U)
    one_plus = np.eye(n) + M
    scale = max(1.0, np.linalg.norm(one_plus, 2))
    _, sv, vh = np.linalg.svd(one_plus)
    kdim = int(np.sum(sv < kernel_tol * scale))
    K = vh[n - kdim:].conj().T if kdim else np.zeros((n, 0), complex)
    pivots = ()
    if kdim:
        pivots = _kernel_pivots(K, kernel_tol)
        K = _echelon_snap(K, pivots)
        M = _impose_kernel(M, K)

    t = 0.0
    history = []
    label, dist = nearest_critical(M, Flag.standard(n))
    while dist >= tol:
        if t >= horizon:
            raise SlowConvergence(f"no critical point within {tol:g} by t={horizon:g} (distance {dist:.2e})")
        if kdim:
            K = (np.diag(np.cosh(step * cfg.weights)) + np.sinh(step * cfg.weights)[:, None] * M) @ K
            K = _echelon_snap(K, pivots)
        M = _step(cfg, M, step)
        if kdim:
            M = _impose_kernel(M, K)
        t += step
        label, dist = nearest_critical(M, Flag.standard(n))
        history.append((t, dist))
    return FlowLimit(label, t, dist, kdim, history)


def _impose_kernel(M: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Closest unitary having K as its exact -1 eigenspace (flag basis)."""
    n = M.shape[0]
    P = np.eye(n) - K @ K.conj().T
    R = P @ M @ P
    # polar factor of the compression to K⊥
    full, _ = np.linalg.qr(np.hstack([K, np.eye(n)]))
    C = full[:, K.shape[1]:n]
    inner = C.conj().T @ R @ C
    u, _, vh = np.linalg.svd(inner)
    return -K @ K.conj().T + C @ (u @ vh) @ C.conj().T
