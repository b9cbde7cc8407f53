"""Parametrized manifolds, oriented integration, preimages of strata and transversality audits."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from . import parallel
from .chernweil import FormField, GaugeMap, maurer_cartan, tc_constant, wedge_trace
from .errors import DegreeMismatch, UnsupportedDimension
from .spectral import (
    Flag,
    IndexSet,
    all_index_sets,
    classify_profile,
    kernel_profile,
    unstable_dim,
)

# --- manifolds ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamManifold:
    """A manifold covered, up to a null set, by one coordinate box.

    ``density`` is the Riemannian volume density of the standard embedding in chart
    coordinates and ``orientation`` the sign of the chart against the standard orientation.
    """

    name: str
    lower: tuple
    upper: tuple
    periodic: tuple
    orientation: int = 1
    density: Optional[Callable] = None
    embed: Optional[Callable] = None
    volume: Optional[float] = None

    @property
    def dim(self) -> int:
        return len(self.lower)

    def wrap(self, p) -> np.ndarray:
        p = np.array(p, float)
        for i, per in enumerate(self.periodic):
            if per:
                span = self.upper[i] - self.lower[i]
                p[..., i] = self.lower[i] + np.mod(p[..., i] - self.lower[i], span)
        return p

    def interior(self, p, margin: float = 0.0) -> bool:
        return all(per or (self.lower[i] + margin <= p[i] <= self.upper[i] - margin)
                   for i, per in enumerate(self.periodic))

    def chart_distance(self, p, q) -> float:
        d = np.abs(np.asarray(p, float) - np.asarray(q, float))
        for i, per in enumerate(self.periodic):
            if per:
                span = self.upper[i] - self.lower[i]
                d[i] = min(d[i], span - d[i])
        return float(np.linalg.norm(d))

    def volume_form(self) -> FormField:
        top = tuple(range(self.dim))
        dens = self.density

        def components(pts):
            return {top: self.orientation * np.asarray(dens(pts), complex)}

        return FormField(self.dim, self.dim, components)

    def __mul__(self, other: "ParamManifold") -> "ParamManifold":
        d1 = self.dim
        dens = None
        if self.density is not None and other.density is not None:
            def dens(pts, a=self.density, b=other.density):
                return a(pts[:, :d1]) * b(pts[:, d1:])
        vol = self.volume * other.volume if self.volume and other.volume else None
        return ParamManifold(f"{self.name}x{other.name}", self.lower + other.lower, self.upper + other.upper,
                             self.periodic + other.periodic, self.orientation * other.orientation, dens,
                             None, vol)


def circle() -> ParamManifold:
    return ParamManifold("S1", (0.0,), (2 * math.pi,), (True,), 1,
                         lambda p: np.ones(len(p)),
                         lambda p: np.stack([np.cos(p[:, 0]), np.sin(p[:, 0])], -1), 2 * math.pi)


def _s2_embed(p):
    th, ph = p[:, 0], p[:, 1]
    return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1)


def sphere2() -> ParamManifold:
    """Spherical chart (θ, φ); outward normal followed by (∂θ, ∂φ) is positive."""
    return ParamManifold("S2", (0.0, 0.0), (math.pi, 2 * math.pi), (False, True), 1,
                         lambda p: np.sin(p[:, 0]), _s2_embed, 4 * math.pi)


def hopf_point(p) -> np.ndarray:
    """(η, ξ₁, ξ₂) ↦ (cos η·e^{iξ₁}, sin η·e^{iξ₂}) ∈ S³ ⊂ C²."""
    p = np.atleast_2d(p)
    eta, x1, x2 = p[:, 0], p[:, 1], p[:, 2]
    return np.stack([np.cos(eta) * np.exp(1j * x1), np.sin(eta) * np.exp(1j * x2)], -1)


def _hopf_real(p):
    z = hopf_point(p)
    return np.stack([z[:, 0].real, z[:, 0].imag, z[:, 1].real, z[:, 1].imag], -1)


def _hopf_orientation() -> int:
    """Sign of det[n, ∂η, ∂ξ₁, ∂ξ₂] at a generic point, n the outward normal of the unit ball."""
    p = np.array([[0.6, 0.3, 1.1]])
    h = 1e-6
    cols = [_hopf_real(p)[0]]
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        cols.append((_hopf_real(p + e)[0] - _hopf_real(p - e)[0]) / (2 * h))
    return int(np.sign(np.linalg.det(np.stack(cols, -1))))


def sphere3() -> ParamManifold:
    """Hopf chart η ∈ [0, π/2], ξ₁, ξ₂ ∈ [0, 2π); volume element sin η cos η."""
    return ParamManifold("S3", (0.0, 0.0, 0.0), (math.pi / 2, 2 * math.pi, 2 * math.pi), (False, True, True),
                         _hopf_orientation(), lambda p: np.sin(p[:, 0]) * np.cos(p[:, 0]), _hopf_real,
                         2 * math.pi ** 2)


MANIFOLDS = {"S1": circle, "S2": sphere2, "S3": sphere3}


# --- quadrature ----------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    mode: str = "gauss"
    order: int = 32
    samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("gauss", "mc"):
            raise ValueError("quadrature mode must be 'gauss' or 'mc'")
        if self.mode == "gauss" and self.order < 4:
            raise ValueError("Gauss-Legendre order must be at least 4")
        if self.mode == "mc" and self.samples < 10_000:
            raise ValueError("Monte Carlo needs at least 10^4 samples")

    def nodes(self, lower, upper) -> tuple[np.ndarray, np.ndarray]:
        """Points (P, d) and weights (P,) on the box."""
        lo, hi = np.asarray(lower, float), np.asarray(upper, float)
        if self.mode == "mc":
            rng = np.random.default_rng(self.seed)
            pts = lo + (hi - lo) * rng.random((self.samples, lo.size))
            return pts, np.full(self.samples, np.prod(hi - lo) / self.samples)
        x, w = np.polynomial.legendre.leggauss(self.order)
        axes = [0.5 * (b - a) * x + 0.5 * (a + b) for a, b in zip(lo, hi)]
        wts = [0.5 * (b - a) * w for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, lo.size)
        W = np.ones(1)
        for wa in wts:
            W = np.multiply.outer(W, wa).ravel()
        return pts, W


def _quadrature(fn: Callable, pts: np.ndarray, wts: np.ndarray, chunk: int = 8192) -> complex:
    """Σ w·fn(pts) in fixed-size chunks, reduced in chunk order."""
    bounds = [(a, min(a + chunk, len(pts))) for a in range(0, len(pts), chunk)]
    partial = parallel.ordered_map(lambda ab: complex(np.sum(wts[ab[0]:ab[1]] * fn(pts[ab[0]:ab[1]]))), bounds)
    return complex(math.fsum(p.real for p in partial) + 1j * math.fsum(p.imag for p in partial))


def integrate_form(manifold: ParamManifold, form: FormField, quad: QuadratureSpec) -> complex:
    if form.degree != manifold.dim or form.dim != manifold.dim:
        raise DegreeMismatch(f"cannot integrate a {form.degree}-form over a {manifold.dim}-manifold")
    pts, wts = quad.nodes(manifold.lower, manifold.upper)
    return manifold.orientation * _quadrature(form.top, pts, wts)


# --- the unstable-manifold integral ---------------------------------------------------------


def _unstable_param(k: int):
    """φ(λ, L) = 1 + (λ − 1)uu* and its partials, for L = [u] ∈ CP^{k−1}; k ∈ {1, 2}."""
    if k == 1:
        def phi(p):
            lam = np.exp(1j * p[:, 0])
            return lam[:, None, None], (1j * lam)[:, None, None, None]
        return (0.0,), (2 * math.pi,), phi

    def phi(p):
        a, th, ph = p[:, 0], p[:, 1], p[:, 2]
        lam = np.exp(1j * a)
        c, s, e = np.cos(th / 2), np.sin(th / 2), np.exp(1j * ph)
        u = np.stack([c + 0j, e * s], -1)
        du_th = np.stack([-s / 2 + 0j, e * c / 2], -1)
        du_ph = np.stack([np.zeros_like(c) + 0j, 1j * e * s], -1)

        def outer(x, y):
            return x[:, :, None] * np.conj(y)[:, None, :]

        uu = outer(u, u)
        G = np.eye(2) + (lam - 1)[:, None, None] * uu
        dG = np.stack([
            (1j * lam)[:, None, None] * uu,
            (lam - 1)[:, None, None] * (outer(du_th, u) + outer(u, du_th)),
            (lam - 1)[:, None, None] * (outer(du_ph, u) + outer(u, du_ph)),
        ], axis=1)
        return G, dG

    return (0.0, 0.0, 0.0), (2 * math.pi, math.pi, 2 * math.pi), phi


def integrate_unstable(k: int, quad: Optional[QuadratureSpec] = None, flag: Optional[Flag] = None) -> complex:
    """∫ over U(U_k) of tr(∧^{2k−1} g⁻¹dg), pulled back through φ on S¹ × CP^{k−1}.

    φ is orientation reversing for the orientation of U(U_k), hence the overall minus sign.
    The integrand is conjugation invariant, so the flag basis only enters as a check.
    """
    if k not in (1, 2):
        raise UnsupportedDimension("only k = 1, 2 are supported (CP^{k-1} for k >= 3 needs a larger atlas)")
    quad = quad or QuadratureSpec(order=48)
    lo, hi, phi = _unstable_param(k)
    if flag is not None and flag.n != k:
        raise ValueError(f"U(U_k) lives in U(W_k⊥), which needs a flag of size {k}")
    V = None if flag is None else flag.basis

    def integrand(p):
        G, dG = phi(p)
        if V is not None:
            G = V @ G @ V.conj().T
            dG = V @ dG @ V.conj().T
        w = np.conj(np.swapaxes(G, -1, -2))[:, None] @ dG
        return wedge_trace([w[:, i] for i in range(2 * k - 1)])

    pts, wts = quad.nodes(lo, hi)
    return -_quadrature(integrand, pts, wts)


# --- preimages of S(U_{k}) ------------------------------------------------------------------


@dataclass(frozen=True)
class PreimageHit:
    point: np.ndarray
    sign: int
    residual: float
    kernel_vector: np.ndarray


def _defining_map(U: np.ndarray, flag: Flag, k: int) -> np.ndarray:
    """Ψ(U) = (arg(−λ), v₁, …, v_{k−1}) ∈ R^{2k−1}.

    λ is the eigenvalue nearest −1 and v its eigenvector in the flag basis, scaled so
    v_k = 1. Ψ = 0 exactly on S(U_{k}) near points where the kernel is a line.
    """
    M = flag.to_flag_basis(U)
    ev, vec = np.linalg.eig(M)
    j = int(np.argmin(np.abs(ev + 1)))
    v = vec[:, j]
    out = [np.angle(-ev[j])]
    if k > 1:
        v = v / v[k - 1]
        for i in range(k - 1):
            out += [v[i].real, v[i].imag]
    return np.array(out)


def _psi_jacobian(fn: Callable, p: np.ndarray, h: float = 1e-7) -> np.ndarray:
    cols = []
    for i in range(p.size):
        e = np.zeros(p.size)
        e[i] = h
        cols.append((fn(p + e) - fn(p - e)) / (2 * h))
    return np.stack(cols, -1)


_CALIBRATION: dict = {}


def calibration_map(m: int = 1) -> tuple[ParamManifold, Callable]:
    """g_m(θ) = V diag(e^{imθ}, 1) V* on S¹ with a fixed generic V ∈ U(2)."""
    a, b = 0.7, 0.4
    V = np.array([[math.cos(a), -np.exp(1j * b) * math.sin(a)],
                  [np.exp(-1j * b) * math.sin(a), math.cos(a)]])
    return circle(), _gm_factory(V, m), _gm_derivative(V, m)


def _gm_derivative(V: np.ndarray, m: int) -> Callable:
    def derivative(p):
        D = np.zeros((len(p), 1, 2, 2), complex)
        D[:, 0, 0, 0] = 1j * m * np.exp(1j * m * p[:, 0])
        return V @ D @ V.conj().T
    return derivative


def _gm_factory(V: np.ndarray, m: int) -> Callable:
    def evaluate(p):
        z = np.exp(1j * m * p[:, 0])
        D = np.zeros((len(p), 2, 2), complex)
        D[:, 0, 0] = z
        D[:, 1, 1] = 1.0
        return V @ D @ V.conj().T
    return evaluate


def coorientation() -> int:
    """Sign c making the k=1, m=1 signed count equal ∫ Tc₁ = −1; computed once."""
    if "c" not in _CALIBRATION:
        g = GaugeMap(*calibration_map(1))
        hits = _solve_preimages(g, Flag.standard(2), 1, 16, 0, 1e-12, sign_convention=1)
        raw = sum(h.sign for h in hits)
        if abs(raw) != 1:
            raise RuntimeError(f"coorientation calibration found raw count {raw}")
        _CALIBRATION["c"] = -raw
    return _CALIBRATION["c"]


def _solve_preimages(g: GaugeMap, flag: Flag, k: int, starts: int, seed: int, tol: float,
                     sign_convention: int, max_iter: int = 60) -> list[PreimageHit]:
    M = g.manifold
    q = 2 * k - 1
    if M.dim != q:
        raise DegreeMismatch(f"preimages of S(U_{{{k}}}) are isolated only when dim B = {q}")

    def psi(p):
        return _defining_map(g(M.wrap(p))[0], flag, k)

    def newton(idx):
        rng = np.random.default_rng([seed, idx])
        lo, hi = np.asarray(M.lower), np.asarray(M.upper)
        p = lo + (hi - lo) * rng.random(q)
        for _ in range(max_iter):
            r = psi(p)
            if np.linalg.norm(r) < tol:
                return p
            J = _psi_jacobian(psi, p)
            try:
                dp = np.linalg.solve(J, r)
            except np.linalg.LinAlgError:
                return None
            n = np.linalg.norm(dp)
            if n > 0.5:
                dp *= 0.5 / n
            p = M.wrap(p - dp)
            if not M.interior(p, 1e-9):
                return None
        return p if np.linalg.norm(psi(p)) < tol else None

    found = [p for p in parallel.ordered_map(newton, range(starts)) if p is not None]
    clusters: list[list] = []
    for p in found:
        for c in clusters:
            if M.chart_distance(p, c[0]) < 1e-5:
                c.append(p)
                break
        else:
            clusters.append([p])
    hits = []
    for c in clusters:
        p = c[0]
        U = g(p)[0]
        prof = kernel_profile(U, flag, +1, 1e-6)
        if classify_profile(prof) != IndexSet((k,)):
            continue
        J = _psi_jacobian(psi, p)
        det = np.linalg.det(J)
        if abs(det) < 1e-10:
            continue
        sign = sign_convention * int(np.sign(det)) * M.orientation
        _, _, vh = np.linalg.svd(np.eye(flag.n) + U)
        hits.append(PreimageHit(p, sign, float(np.linalg.norm(psi(p))), vh[-1].conj()))
    hits.sort(key=lambda h: tuple(h.point))
    return hits


def find_preimages(g: GaugeMap, flag: Flag, k: int, starts: int = 64, seed: int = 0,
                   tol: float = 1e-11) -> list[PreimageHit]:
    """Isolated points of g⁻¹(S(U_{k})) with coorientation signs, by multistart Newton on Ψ∘g."""
    hits = _solve_preimages(g, flag, k, starts, seed, tol, coorientation())
    if not hits:
        warnings.warn(f"no preimage found from {starts} starts; coverage may be incomplete", RuntimeWarning,
                      stacklevel=2)
    return hits


def signed_count(hits) -> int:
    return int(sum(h.sign for h in hits))


# --- transversality audit -------------------------------------------------------------------


def _required_dims(I: IndexSet, n: int) -> list:
    return [sum(1 for i in I if i > m) for m in range(n + 1)]


def stratum_defect(U: np.ndarray, flag: Flag, I: IndexSet) -> float:
    """Σ of the singular values that must vanish for U to lie in the closure of S(U_I)."""
    M = np.eye(flag.n) + U
    total = 0.0
    for m, r in enumerate(_required_dims(I, flag.n)):
        if r:
            sv = np.linalg.svd(M @ flag.W(m), compute_uv=False)
            total += float(np.sum(sv[-r:]))
    return total


@dataclass
class StratumHit:
    index_set: IndexSet
    point: np.ndarray
    defect: float
    codim: int


@dataclass
class TransversalityReport:
    forbidden: list = field(default_factory=list)
    near: list = field(default_factory=list)
    rank_checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.forbidden and all(ok for _, ok in self.rank_checks)


def _sample_grid(M: ParamManifold, samples: int) -> np.ndarray:
    per_axis = max(4, int(round(samples ** (1.0 / M.dim))))
    axes = []
    for lo, hi, per in zip(M.lower, M.upper, M.periodic):
        axes.append(np.linspace(lo, hi, per_axis, endpoint=not per))
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, M.dim), per_axis


def transversality_check(g: GaugeMap, flag: Flag, samples: int = 400, hit_tol: float = 1e-7,
                         near_tol: float = 1e-3, candidates: int = 6) -> TransversalityReport:
    """Audit g against the strata S(U_I).

    Strata of codimension > dim B must be missed entirely; for each, the sampled stratum
    defect is minimized from its best sample points and any zero is a forbidden hit.
    For codimension = dim B the defining map must have full-rank Jacobian at each hit.
    """
    M = g.manifold
    d = M.dim
    n = flag.n
    report = TransversalityReport()
    pts, per_axis = _sample_grid(M, samples)
    Us = g(pts)
    spacing = [(hi - lo) / per_axis for lo, hi in zip(M.lower, M.upper)]
    for I in all_index_sets(n):
        codim = unstable_dim(I)
        if codim < d or codim == 0:
            continue
        defect = np.array([stratum_defect(U, flag, I) for U in Us])

        def fun(p, I=I):
            return stratum_defect(g(M.wrap(np.atleast_1d(p)))[0], flag, I)

        seen = []
        for idx in np.argsort(defect)[:candidates]:
            p0 = pts[idx]
            if d == 1:
                res = optimize.minimize_scalar(fun, bounds=(p0[0] - spacing[0], p0[0] + spacing[0]),
                                               method="bounded", options={"xatol": 1e-12})
                p, val = M.wrap(np.array([res.x])), float(res.fun)
            else:
                res = optimize.minimize(fun, p0, method="Nelder-Mead",
                                        options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 4000})
                p, val = M.wrap(res.x), float(res.fun)
            if any(M.chart_distance(p, s) < 1e-5 for s in seen):
                continue
            seen.append(p)
            hit = StratumHit(I, p, val, codim)
            if codim > d and val < hit_tol:
                report.forbidden.append(hit)
            elif codim > d and val < near_tol:
                report.near.append(hit)
            elif codim == d and val < hit_tol:
                k = I.entries[-1] if len(I) == 1 else None
                if k is not None and 2 * k - 1 == d:
                    J = _psi_jacobian(lambda x: _defining_map(g(M.wrap(x))[0], flag, k), p)
                    report.rank_checks.append((hit, int(np.linalg.matrix_rank(J, 1e-8)) == d))
    return report


# --- closed-form gauge maps ------------------------------------------------------------------


def gm_map(m: int, V: Optional[np.ndarray] = None) -> GaugeMap:
    if V is None:
        return GaugeMap(*calibration_map(m))
    V = np.asarray(V, complex)
    return GaugeMap(circle(), _gm_factory(V, m), _gm_derivative(V, m))


def diag_power_map(powers=(1, 2)) -> GaugeMap:
    """θ ↦ diag(e^{i p₁θ}, e^{i p₂θ}, …)."""
    pw = np.asarray(powers, float)

    def evaluate(p):
        out = np.zeros((len(p), pw.size, pw.size), complex)
        idx = np.arange(pw.size)
        out[:, idx, idx] = np.exp(1j * np.outer(p[:, 0], pw))
        return out

    return GaugeMap(circle(), evaluate)


def quaternion_matrix(z: np.ndarray) -> np.ndarray:
    """(z₁, z₂) ↦ [[z₁, z₂], [−z̄₂, z̄₁]] ∈ SU(2); this choice has degree +1 for ∫Tc₂."""
    z1, z2 = z[..., 0], z[..., 1]
    return np.stack([np.stack([z1, z2], -1), np.stack([-np.conj(z2), np.conj(z1)], -1)], -2)


def default_u0() -> np.ndarray:
    """A fixed generic U₀ ∈ U(2) with det U₀ = e^{2i}."""
    a, b = 0.9, 0.3
    R = np.array([[math.cos(a), -np.exp(1j * b) * math.sin(a)], [np.exp(-1j * b) * math.sin(a), math.cos(a)]])
    return R @ np.diag([np.exp(0.8j), np.exp(1.2j)]) @ R.conj().T


def s3_map(U0: Optional[np.ndarray] = None) -> GaugeMap:
    """g(q) = U₀·q on S³ with analytic chart derivatives."""
    U0 = default_u0() if U0 is None else np.asarray(U0, complex)

    def evaluate(p):
        return U0 @ quaternion_matrix(hopf_point(p))

    def derivative(p):
        eta, x1, x2 = p[:, 0], p[:, 1], p[:, 2]
        e1, e2 = np.exp(1j * x1), np.exp(1j * x2)
        dz = [
            np.stack([-np.sin(eta) * e1, np.cos(eta) * e2], -1),
            np.stack([1j * np.cos(eta) * e1, 0 * e2], -1),
            np.stack([0 * e1, 1j * np.sin(eta) * e2], -1),
        ]
        return np.stack([U0 @ quaternion_matrix(z) for z in dz], axis=1)

    return GaugeMap(sphere3(), evaluate, derivative)


def custom_map(manifold: ParamManifold, entry_fns) -> GaugeMap:
    """Gauge map from an n×n table of batched scalar callables of the chart point."""
    n = len(entry_fns)

    def evaluate(p):
        out = np.zeros((len(p), n, n), complex)
        for i, j in itertools.product(range(n), range(n)):
            out[:, i, j] = entry_fns[i][j](p)
        return out

    return GaugeMap(manifold, evaluate)


def tc_integral(g: GaugeMap, k: int, quad: QuadratureSpec) -> complex:
    """∫_B g*Tc_k, vectorized over quadrature nodes."""
    M = g.manifold
    q = 2 * k - 1
    if M.dim != q:
        raise DegreeMismatch(f"Tc_{k} has degree {q} but B has dimension {M.dim}")
    c = tc_constant(k)

    def integrand(p):
        w = maurer_cartan(g, p)
        return c * wedge_trace([w[:, i] for i in range(q)])

    pts, wts = quad.nodes(M.lower, M.upper)
    return M.orientation * _quadrature(integrand, pts, wts)
