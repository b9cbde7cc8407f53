"""Odd Chern–Weil forms of gauge maps and two-connection transgressions.

Differential forms on a chart are dicts ``{I: coeff}`` keyed by sorted index
tuples; ``coeff`` has a leading batch axis (one entry per evaluation point) and,
for matrix-valued forms, two trailing matrix axes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArity, NotUnitary

UNITARY_TOL = 1e-9


# --- exact constants -------------------------------------------------------------------


@dataclass(frozen=True)
class ExactConstant:
    """coef · (i/2π)^power with an exact rational coefficient."""

    coef: Fraction
    power: int

    def __complex__(self) -> complex:
        return complex(float(self.coef)) * (1j / (2 * math.pi)) ** self.power

    def __mul__(self, other):
        if isinstance(other, ExactConstant):
            return ExactConstant(self.coef * other.coef, self.power + other.power)
        return ExactConstant(self.coef * Fraction(other), self.power)

    __rmul__ = __mul__


def beta_exact(k: int) -> Fraction:
    """(−1)^{k−1} B(k, k) = ∫₀¹ (t² − t)^{k−1} dt."""
    return Fraction((-1) ** (k - 1) * math.factorial(k - 1) ** 2, math.factorial(2 * k - 1))


def beta_integral(k: int) -> float:
    """Gauss–Legendre value of ∫₀¹ (t² − t)^{k−1} dt (exact for the polynomial degree)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    x, w = np.polynomial.legendre.leggauss(k + 1)
    t = 0.5 * (x + 1)
    return float(0.5 * np.sum(w * (t * t - t) ** (k - 1)))


def form_constants(k: int) -> tuple[ExactConstant, ExactConstant]:
    """(tc, tch): the constants in front of tr(∧^{2k−1} g⁻¹dg) in Tc_k and Tch_k.

    tc is the closed form ((k−1)!)²/(2k−1)!. tch is assembled from its derivation:
    the dt-part of tr F̃^k along A_t = t·ω is k(t²−t)^{k−1} tr ω^{2k−1}, and ch_k
    carries 1/k!.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    tc = ExactConstant(Fraction(math.factorial(k - 1) ** 2, math.factorial(2 * k - 1)), k)
    tch = ExactConstant(Fraction(k, math.factorial(k)) * beta_exact(k), k)
    return tc, tch


def tc_constant(k: int) -> complex:
    return complex(form_constants(k)[0])


def tch_constant(k: int) -> complex:
    return complex(form_constants(k)[1])


# --- wedge traces ----------------------------------------------------------------------


def wedge_trace(omegas) -> complex | np.ndarray:
    """Σ_σ sgn σ · tr(ω_σ(1) ⋯ ω_σ(q)) for an odd number q of (batched) matrices.

    Dynamic programme over subsets: P[S] = Σ_{j∈S} (−1)^{#{i∈S, i<j}} ω_j P[S∖{j}].
    """
    omegas = [np.asarray(w) for w in omegas]
    q = len(omegas)
    if q % 2 == 0:
        raise InvalidArity(f"need an odd number of factors, got {q}")
    shape = omegas[0].shape
    eye = np.broadcast_to(np.eye(shape[-1], dtype=complex), shape)
    P = {0: eye}
    for size in range(1, q + 1):
        for S in itertools.combinations(range(q), size):
            mask = sum(1 << j for j in S)
            acc = np.zeros(shape, complex)
            for pos, j in enumerate(S):
                term = omegas[j] @ P[mask ^ (1 << j)]
                acc = acc - term if pos % 2 else acc + term
            P[mask] = acc
    out = np.trace(P[(1 << q) - 1], axis1=-2, axis2=-1)
    return complex(out) if np.ndim(out) == 0 else out


# --- gauge maps and Maurer–Cartan forms ------------------------------------------------


@dataclass(frozen=True)
class GaugeMap:
    """Smooth map from a chart of ``manifold`` to U(n).

    ``evaluate`` maps points (P, d) to (P, n, n); ``derivative``, if given, maps
    points to (P, d, n, n) with [:, i] = ∂_i g. Otherwise a fourth-order stencil with step h.
    """

    manifold: object
    evaluate: Callable
    derivative: Optional[Callable] = None
    h: float = 1e-3

    @property
    def dim(self) -> int:
        return self.manifold.dim

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.evaluate(_points(points, self.dim)), complex)

    def partials(self, points) -> np.ndarray:
        pts = _points(points, self.dim)
        if self.derivative is not None:
            return np.asarray(self.derivative(pts), complex)
        cols = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = self.h
            # fourth-order central stencil
            cols.append((8 * (self(pts + e) - self(pts - e)) - (self(pts + 2 * e) - self(pts - 2 * e)))
                        / (12 * self.h))
        return np.stack(cols, axis=1)

    @property
    def analytic(self) -> bool:
        return self.derivative is not None


def _points(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, float)
    if pts.ndim == 1:
        pts = pts.reshape(1, dim)
    if pts.shape[-1] != dim:
        raise ValueError(f"points must have {dim} coordinates")
    return pts


def maurer_cartan(g: GaugeMap, b) -> np.ndarray:
    """ω_i = g⁻¹ ∂_i g at b; shape (d, n, n) for one point, (P, d, n, n) for a batch."""
    single = np.ndim(b) == 1
    G = g(b)
    res = np.max(np.linalg.norm(np.conj(np.swapaxes(G, -1, -2)) @ G - np.eye(G.shape[-1]), axis=(-2, -1)))
    if res > UNITARY_TOL:
        raise NotUnitary(f"gauge map is not unitary at a sample point (residual {res:.2e})")
    dG = g.partials(b)
    omega = np.conj(np.swapaxes(G, -1, -2))[:, None] @ dG
    return omega[0] if single else omega


def antihermitian_residual(omega) -> float:
    return float(np.max(np.abs(omega + np.conj(np.swapaxes(omega, -1, -2)))))


def mc_identity_residual(g: GaugeMap, b, h: float = 1e-4) -> float:
    """max over points and i<j of ‖∂_iω_j − ∂_jω_i + [ω_i, ω_j]‖ by central differences."""
    b = _points(b, g.dim)
    d = g.dim
    w = maurer_cartan(g, b)
    dw = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        dw.append((maurer_cartan(g, b + e) - maurer_cartan(g, b - e)) / (2 * h))
    worst = 0.0
    for i, j in itertools.combinations(range(d), 2):
        r = dw[i][:, j] - dw[j][:, i] + w[:, i] @ w[:, j] - w[:, j] @ w[:, i]
        worst = max(worst, float(np.max(np.linalg.norm(r, axis=(-2, -1)))))
    return worst


# --- form fields -----------------------------------------------------------------------


@dataclass(frozen=True)
class FormField:
    """Degree-q form on a d-dimensional chart.

    ``components(points)`` maps (P, d) points to ``{I: (P,) complex array}``;
    missing keys are zero.
    """

    degree: int
    dim: int
    components: Callable

    def coefficients(self, b) -> dict:
        single = np.ndim(b) == 1
        comps = self.components(_points(b, self.dim))
        return {I: (complex(v[0]) if single else v) for I, v in comps.items()}

    def __call__(self, b, *vectors) -> complex:
        if len(vectors) != self.degree:
            raise InvalidArity(f"a {self.degree}-form takes {self.degree} vectors")
        V = np.array(vectors, float).reshape(self.degree, self.dim)
        total = 0j
        for I, c in self.coefficients(np.asarray(b, float)).items():
            total += c * (np.linalg.det(V[:, list(I)]) if I else 1.0)
        return total

    def top(self, points) -> np.ndarray:
        """Coefficient of dx_1∧⋯∧dx_d at a batch of points."""
        pts = _points(points, self.dim)
        return self.components(pts).get(tuple(range(self.dim)), np.zeros(len(pts), complex))


def zero_form_field(degree: int, dim: int) -> FormField:
    return FormField(degree, dim, lambda pts: {})


def tc_form(g: GaugeMap, k: int) -> FormField:
    """Tc_k(g) = tc(k) · tr(∧^{2k−1} g⁻¹dg); zero when the chart is too small."""
    q = 2 * k - 1
    d = g.dim
    if d < q:
        return zero_form_field(q, d)
    c = tc_constant(k)

    def components(pts):
        w = maurer_cartan(g, pts)
        return {I: c * wedge_trace([w[:, i] for i in I]) for I in itertools.combinations(range(d), q)}

    return FormField(q, d, components)


def _merge_sign(I: tuple, J: tuple) -> int:
    if set(I) & set(J):
        return 0
    seq = I + J
    inv = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return -1 if inv % 2 else 1


def wedge(a: dict, b: dict, mul=np.multiply) -> dict:
    """Wedge product of two forms given as component dicts (matrix-valued via ``mul``)."""
    out: dict = {}
    for I, x in a.items():
        for J, y in b.items():
            sgn = _merge_sign(I, J)
            if sgn == 0:
                continue
            key = tuple(sorted(I + J))
            term = mul(x, y)
            out[key] = out[key] + sgn * term if key in out else sgn * term
    return out


def fd_exterior_derivative(field: FormField, h: float = 1e-5) -> FormField:
    """d of a form field from central differences of its coefficients."""
    if field.degree >= field.dim:
        raise ValueError("exterior derivative of a top-degree form vanishes identically")
    d = field.dim

    def components(pts):
        m = len(pts)
        shifted = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            shifted += [pts + e, pts - e]
        comps = field.components(np.concatenate(shifted))
        out: dict = {}
        for I, v in comps.items():
            v = np.asarray(v).reshape(2 * d, m)
            for i in range(d):
                if i in I:
                    continue
                sgn = _merge_sign((i,), I)
                key = tuple(sorted((i,) + I))
                term = sgn * (v[2 * i] - v[2 * i + 1]) / (2 * h)
                out[key] = out[key] + term if key in out else term
        return out

    return FormField(field.degree + 1, d, components)


def form_sup_norm(field: FormField, points) -> float:
    comps = field.components(_points(points, field.dim))
    return max((float(np.max(np.abs(v))) for v in comps.values()), default=0.0)


# --- transgression along an affine path of connections ---------------------------------


@dataclass(frozen=True)
class ConnectionPath:
    """Affine path A_t = (1−t)A₀ + tA₁ of connection 1-forms on a d-dimensional chart.

    ``A0``/``A1`` map points (P, d) to (P, d, n, n) coefficient arrays. ``dA0``/``dA1``
    (optional) give (P, d, d, n, n) with [:, i, j] = ∂_i A_j.
    """

    dim: int
    A0: Callable
    A1: Callable
    dA0: Optional[Callable] = None
    dA1: Optional[Callable] = None
    t_order: int = 16
    h: float = 1e-5

    def _coeff_derivative(self, A, dA, pts):
        if dA is not None:
            return np.asarray(dA(pts), complex)
        cols = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = self.h
            cols.append((np.asarray(A(pts + e)) - np.asarray(A(pts - e))) / (2 * self.h))
        return np.stack(cols, axis=1)

    def curvature(self, pts, t: float) -> dict:
        """F̃ on [0,1]×chart at parameter t; coordinate 0 is t."""
        A0, A1 = np.asarray(self.A0(pts), complex), np.asarray(self.A1(pts), complex)
        D0 = self._coeff_derivative(self.A0, self.dA0, pts)
        D1 = self._coeff_derivative(self.A1, self.dA1, pts)
        At = (1 - t) * A0 + t * A1
        Dt = (1 - t) * D0 + t * D1
        F = {(0, i + 1): A1[:, i] - A0[:, i] for i in range(self.dim)}
        for i, j in itertools.combinations(range(self.dim), 2):
            F[(i + 1, j + 1)] = Dt[:, i, j] - Dt[:, j, i] + At[:, i] @ At[:, j] - At[:, j] @ At[:, i]
        return F


def _trace_form(a: dict) -> dict:
    return {I: np.trace(v, axis1=-2, axis2=-1) for I, v in a.items()}


def invariant_polynomial(F: dict, P: str, k: int) -> dict:
    """ch_k = (i/2π)^k/k!·tr F^k, or c_k from power sums of (i/2π)F via Newton's identities."""
    X = {I: (1j / (2 * math.pi)) * v for I, v in F.items()}
    powers = [None, X]
    for _ in range(k - 1):
        powers.append(wedge(powers[-1], X, np.matmul))
    p = [None] + [_trace_form(powers[j]) for j in range(1, k + 1)]
    if P == "ch":
        return {I: v / math.factorial(k) for I, v in p[k].items()}
    if P != "c":
        raise ValueError("P must be 'c' or 'ch'")
    e = [{(): 1.0}]
    for j in range(1, k + 1):
        acc: dict = {}
        for i in range(1, j + 1):
            term = wedge(e[j - i], p[i])
            for I, v in term.items():
                v = v * ((-1) ** (i - 1) / j)
                acc[I] = acc[I] + v if I in acc else v
        e.append(acc)
    return e[k]


def transgression_general(path: ConnectionPath, P: str, k: int) -> FormField:
    """TP(∇₀, ∇₁) = ∫_{[0,1]} P(F̃): the dt-component of P(F̃) integrated fibre-first."""
    d = path.dim
    q = 2 * k - 1
    if d < q:
        return zero_form_field(q, d)
    x, w = np.polynomial.legendre.leggauss(path.t_order)
    ts, ws = 0.5 * (x + 1), 0.5 * w

    def components(pts):
        acc: dict = {}
        for t, wt in zip(ts, ws):
            poly = invariant_polynomial(path.curvature(pts, t), P, k)
            for I, v in poly.items():
                if I and I[0] == 0:
                    J = tuple(c - 1 for c in I[1:])
                    acc[J] = acc[J] + wt * v if J in acc else wt * v
        return acc

    return FormField(q, d, components)


def curvature_polynomial(path: ConnectionPath, P: str, k: int, end: int) -> FormField:
    """P(F(∇_end)) for end ∈ {0, 1}, as a 2k-form on the chart."""

    def components(pts):
        F = path.curvature(pts, float(end))
        spatial = {(I[0] - 1, I[1] - 1): v for I, v in F.items() if I[0] != 0}
        return invariant_polynomial(spatial, P, k)

    return FormField(2 * k, path.dim, components)


def maurer_cartan_path(g: GaugeMap) -> ConnectionPath:
    """A₀ = 0, A₁ = g⁻¹dg: the transgression between d and g⁻¹∘d∘g."""

    def A1(pts):
        return maurer_cartan(g, pts)

    return ConnectionPath(g.dim, lambda pts: np.zeros_like(A1(pts)), A1)
