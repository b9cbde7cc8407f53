"""Flags, critical points and incidence strata of f(U) = Re Tr(AU) on U(n).

Everything here works in a single fiber: a flag is an explicit orthonormal
basis e_1..e_n and W_m = span{e_{m+1}, ..., e_n}.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateHessian, InvalidFrame, InvalidIndexSet, NotInDomain, NotUnitary

DEFAULT_KERNEL_TOL = 1e-7
UNITARY_TOL = 1e-9


def unitarity_residual(U: np.ndarray) -> float:
    U = np.asarray(U)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def check_unitary(U, tol: float = UNITARY_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise NotUnitary(f"expected a square matrix, got shape {U.shape}")
    res = unitarity_residual(U)
    if res > tol:
        raise NotUnitary(f"unitarity residual {res:.3e} exceeds {tol:.1e}")
    return U


@dataclass(frozen=True)
class Flag:
    """Complete flag W_0 ⊃ W_1 ⊃ ... ⊃ W_n = 0 stored as the basis e_1..e_n (columns)."""

    basis: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.basis, dtype=complex)
        if E.ndim != 2 or E.shape[0] != E.shape[1]:
            raise InvalidFrame(f"flag basis must be square, got {E.shape}")
        gram = E.conj().T @ E
        if np.max(np.abs(gram - np.eye(E.shape[0]))) >= 1e-12:
            raise InvalidFrame("flag basis is not orthonormal to 1e-12")
        E.setflags(write=False)
        object.__setattr__(self, "basis", E)

    @classmethod
    def standard(cls, n: int) -> "Flag":
        return cls(np.eye(n, dtype=complex))

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    def W(self, m: int) -> np.ndarray:
        """Orthonormal basis (columns) of W_m; shape (n, n - m)."""
        return self.basis[:, m:]

    def to_flag_basis(self, M: np.ndarray) -> np.ndarray:
        return self.basis.conj().T @ M @ self.basis

    def from_flag_basis(self, M: np.ndarray) -> np.ndarray:
        return self.basis @ M @ self.basis.conj().T


@dataclass(frozen=True)
class IndexSet:
    entries: tuple = ()

    def __post_init__(self):
        entries = tuple(int(i) for i in self.entries)
        if any(b <= a for a, b in zip(entries, entries[1:])):
            raise InvalidIndexSet(f"entries must be strictly increasing: {entries}")
        if entries and entries[0] < 1:
            raise InvalidIndexSet(f"entries must be >= 1: {entries}")
        object.__setattr__(self, "entries", entries)

    def validate(self, n: int) -> "IndexSet":
        if self.entries and self.entries[-1] > n:
            raise InvalidIndexSet(f"{self.entries} out of range for n={n}")
        return self

    def complement(self, n: int) -> tuple:
        return tuple(j for j in range(1, n + 1) if j not in self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __str__(self):
        return "{" + ",".join(map(str, self.entries)) + "}"


def as_index_set(I) -> IndexSet:
    return I if isinstance(I, IndexSet) else IndexSet(tuple(I))


def all_index_sets(n: int) -> list[IndexSet]:
    out = []
    for mask in range(2 ** n):
        out.append(IndexSet(tuple(i + 1 for i in range(n) if mask >> i & 1)))
    return out


@dataclass(frozen=True)
class KernelProfile:
    """d_m = dim(Ker(1 + sign·U) ∩ W_m) for m = 0..n."""

    dims: tuple
    sign: int = 1

    @property
    def drops(self) -> tuple:
        return tuple(a - b for a, b in zip(self.dims, self.dims[1:]))


@dataclass(frozen=True)
class ReductionSplit:
    """H = W ⊕ W⊥, both given by orthonormal column bases."""

    W: np.ndarray
    Wperp: np.ndarray

    def __post_init__(self):
        W, P = (np.asarray(B, dtype=complex) for B in (self.W, self.Wperp))
        W, P = (B.reshape(-1, 1) if B.ndim == 1 else B for B in (W, P))
        Q = np.hstack([W, P])
        if Q.shape[0] != Q.shape[1]:
            raise InvalidFrame("dim W + dim W⊥ must equal n")
        if np.max(np.abs(Q.conj().T @ Q - np.eye(Q.shape[0]))) > 1e-10:
            raise InvalidFrame("split bases are not orthonormal and mutually orthogonal")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "Wperp", P)

    @classmethod
    def from_flag(cls, flag: Flag, N: int) -> "ReductionSplit":
        """W = W_N of the flag, so W⊥ = span{e_1..e_N} carries the induced flag."""
        return cls(flag.basis[:, N:], flag.basis[:, :N])

    @property
    def frame(self) -> np.ndarray:
        return np.hstack([self.W, self.Wperp])


def critical_point(I, flag: Flag) -> np.ndarray:
    """U_I = -id on span{e_i : i ∈ I}, +id on its orthocomplement."""
    I = as_index_set(I).validate(flag.n)
    signs = np.ones(flag.n)
    for i in I:
        signs[i - 1] = -1.0
    return flag.from_flag_basis(np.diag(signs).astype(complex))


def _small_singular_count(M: np.ndarray, threshold: float) -> int:
    if M.shape[1] == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv < threshold))


def kernel_profile(U, flag: Flag, sign: int = 1, tol: float = DEFAULT_KERNEL_TOL) -> KernelProfile:
    if tol <= 0:
        raise ValueError("tol must be positive")
    U = check_unitary(U)
    M = np.eye(flag.n) + sign * U
    scale = max(1.0, float(np.linalg.norm(M, 2)))
    dims = tuple(_small_singular_count(M @ flag.W(m), tol * scale) for m in range(flag.n + 1))
    return KernelProfile(dims, sign)


class Unclassifiable:
    """Sentinel returned when a kernel profile drops by more than one at some step."""

    def __init__(self, profile: KernelProfile):
        self.profile = profile

    def __repr__(self):
        return f"Unclassifiable({self.profile.dims})"

    def __eq__(self, other):
        return isinstance(other, Unclassifiable) and other.profile == self.profile

    def __hash__(self):
        return hash(self.profile)


def classify_profile(profile: KernelProfile):
    drops = profile.drops
    if any(d not in (0, 1) for d in drops):
        return Unclassifiable(profile)
    return IndexSet(tuple(m + 1 for m, d in enumerate(drops) if d == 1))


def incidence_classify(U, flag: Flag, tol: float = DEFAULT_KERNEL_TOL):
    """Label I of the stable stratum S(U_I) containing U, or Unclassifiable."""
    return classify_profile(kernel_profile(U, flag, +1, tol))


def unstable_dim(I) -> int:
    return sum(2 * i - 1 for i in as_index_set(I))


def antihermitian_basis(n: int) -> np.ndarray:
    """Real basis of u(n), shape (n², n, n), orthonormal for Re Tr(X* Y)."""
    out = []
    for i in range(n):
        M = np.zeros((n, n), complex)
        M[i, i] = 1j
        out.append(M)
    for i in range(n):
        for j in range(i + 1, n):
            M = np.zeros((n, n), complex)
            M[i, j], M[j, i] = 1, -1
            out.append(M / np.sqrt(2))
            M = np.zeros((n, n), complex)
            M[i, j], M[j, i] = 1j, 1j
            out.append(M / np.sqrt(2))
    return np.array(out)


def default_weights(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=float)


def _check_weights(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        a = np.diag(a)
    if np.any(a <= 0) or np.any(np.diff(a) <= 0):
        raise ValueError("A must be diagonal with strictly increasing positive entries")
    return a


def hessian_form(I, flag: Flag, A=None) -> np.ndarray:
    """Matrix of Q(H) = Re Tr(A U_I H²) on the real n²-dim space of anti-hermitian H."""
    n = flag.n
    a = default_weights(n) if A is None else np.asarray(A, dtype=float)
    if a.ndim == 2:
        a = np.diag(a)
    UI = critical_point(I, flag)
    AU = flag.from_flag_basis(np.diag(a).astype(complex)) @ UI
    basis = np.array([flag.from_flag_basis(X) for X in antihermitian_basis(n)])
    # polarization: Q(X, Y) = Re Tr(AU (XY + YX)/2)
    prods = np.einsum("ij,ajk,bki->ab", AU, basis, basis)
    return np.real(prods + prods.T) / 2


def morse_index(I, flag: Flag, A=None, degeneracy_tol: float = 1e-9) -> int:
    """Count of ascending directions of f at U_I, by brute-force diagonalization."""
    if A is not None:
        _check_weights(A)
    eig = np.linalg.eigvalsh(hessian_form(I, flag, A))
    if np.any(np.abs(eig) < degeneracy_tol):
        raise DegenerateHessian("near-zero Hessian eigenvalue; A probably has repeated entries")
    return int(np.sum(eig > degeneracy_tol))


def symplectic_reduce(U, split: ReductionSplit, domain_tol: float = 1e-9) -> np.ndarray:
    """R^W(U) = T - Z(1+X)^{-1}Y, expressed in the W⊥ basis of ``split``."""
    U = np.asarray(U, dtype=complex)
    w = split.W.shape[1]
    B = split.frame.conj().T @ U @ split.frame
    X, Y, Z, T = B[:w, :w], B[:w, w:], B[w:, :w], B[w:, w:]
    if w == 0:
        return T.copy()
    one_plus_X = np.eye(w) + X
    smin = np.linalg.svd(one_plus_X, compute_uv=False)[-1]
    if smin <= domain_tol:
        raise NotInDomain(f"1+X is singular (smallest singular value {smin:.2e})")
    return T - Z @ np.linalg.solve(one_plus_X, Y)


def unitary_with_spectrum(eigenvalues: Sequence[complex], eigenvectors) -> np.ndarray:
    lam = np.asarray(eigenvalues, dtype=complex)
    if np.max(np.abs(np.abs(lam) - 1), initial=0) > 1e-12:
        raise ValueError("eigenvalues must lie on the unit circle")
    # eigenvectors come as a list of vectors; store them as columns
    V = np.asarray(eigenvectors, dtype=complex).reshape(lam.size, -1).T
    if V.shape[0] != lam.size:
        raise InvalidFrame("need one n-vector per eigenvalue")
    if np.max(np.abs(V.conj().T @ V - np.eye(lam.size))) > 1e-12:
        raise InvalidFrame("eigenvectors are not orthonormal")
    return (V * lam) @ V.conj().T


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def sample_in_stratum(I, flag: Flag, rng: np.random.Generator, max_angle: float = 2.5) -> np.ndarray:
    """A unitary lying exactly (up to rounding) in S(U_I).

    The -1 eigenspace is spanned by generic vectors w_p ∈ W_{i_p - 1}; on the
    orthocomplement the eigenvalues stay at angular distance > pi - max_angle from -1.
    """
    I = as_index_set(I).validate(flag.n)
    n = flag.n
    cols = []
    for i in I:
        w = np.zeros(n, complex)
        w[i - 1:] = rng.standard_normal(n - i + 1) + 1j * rng.standard_normal(n - i + 1)
        w[i - 1] += 1.0 if abs(w[i - 1]) < 0.3 else 0.0
        cols.append(w)
    if cols:
        K, _ = np.linalg.qr(np.array(cols).T)
    else:
        K = np.zeros((n, 0), complex)
    # orthonormal completion of K
    full, _ = np.linalg.qr(np.hstack([K, haar_unitary(n, rng)]))
    P = full[:, len(cols):]
    phases = np.exp(1j * rng.uniform(-max_angle, max_angle, n - len(cols)))
    R = haar_unitary(n - len(cols), rng) if n > len(cols) else np.zeros((0, 0))
    inner = (R * phases) @ R.conj().T if n > len(cols) else np.zeros((0, 0))
    U_flag = -K @ K.conj().T + P @ inner @ P.conj().T
    return flag.from_flag_basis(U_flag)


def nearest_critical(U, flag: Flag) -> tuple[IndexSet, float]:
    """Nearest U_I in Frobenius norm and the distance to it."""
    M = flag.to_flag_basis(np.asarray(U, dtype=complex))
    signs = np.where(np.real(np.diag(M)) < 0, -1.0, 1.0)
    dist = float(np.linalg.norm(M - np.diag(signs)))
    return IndexSet(tuple(i + 1 for i, s in enumerate(signs) if s < 0)), dist
