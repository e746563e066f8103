"""Differential geometry of parametrized hypersurfaces.

A hypersurface patch is described by an :class:`ImmersionChart`, a vectorized
map from a parameter domain in R^n into R^(n+1).  Everything here works on
arrays of parameter points of shape ``(..., n)`` so that quadrature grids and
random samples can be pushed through in one call.

Conventions
-----------
The unit normal is ``orientation * c / |c|`` where ``c_k = det[J | e_k]``.
For a graph ``(x, y, f(x, y))`` this is the upward normal and for an n = 1
curve it is the tangent rotated by +90 degrees.  The shape operator is
``A = g^-1 h`` with ``h_ij = <d_ij map, N>``, so the sphere with its inward
normal has ``A = I / rho`` and the Gaussian bump with the upward normal has
negative principal curvatures at its summit.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import (
    InsufficientRadii,
    NonMonotoneVolumes,
    NormalUndefined,
    RankDeficient,
    TruncationExceeded,
    UnsupportedDimension,
)
from .fast_marching import march_grid

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12


@dataclass(frozen=True)
class End:
    """An end of the base surface, declared by a direction cone in parameter space.

    ``direction`` is an angle (n = 2) or a sign (n = 1); ``None`` means the
    end occupies every direction.
    """

    name: str = "end"
    direction: float | None = None
    half_angle: float = math.pi


@dataclass(frozen=True)
class RadialProfile:
    """Profile z = f(rho) of a rotationally symmetric graph, with derivatives."""

    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Callable[[np.ndarray], np.ndarray]
    breaks: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class ImmersionChart:
    name: str
    dim_base: int
    map: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = None
    h_fd: float = 1e-4
    extent: float = math.inf
    center: tuple[float, ...] | None = None
    orientation: int = 1
    ends: tuple[End, ...] = (End(),)
    euler_characteristic: int | None = None
    profile: RadialProfile | None = None
    breaks: tuple[float, ...] = ()
    complete: bool = True
    orientation_note: str = "upward"
    params: dict = field(default_factory=dict)

    @property
    def ambient_dim(self) -> int:
        return self.dim_base + 1

    @property
    def origin(self) -> np.ndarray:
        if self.center is None:
            return np.zeros(self.dim_base)
        return np.asarray(self.center, dtype=float)

    @property
    def derivative_mode(self) -> str:
        return "analytic" if self.jacobian is not None else "finite_difference"

    def _as_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim_base == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dim_base:
            raise ValueError(f"expected parameter points with last axis {self.dim_base}, got {x.shape}")
        return x

    def evaluate(self, x) -> np.ndarray:
        return np.asarray(self.map(self._as_points(x)), dtype=float)

    def jac(self, x) -> np.ndarray:
        x = self._as_points(x)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float)
        return self.jac_fd(x)

    def hess(self, x) -> np.ndarray:
        x = self._as_points(x)
        if self.hessian is not None:
            return np.asarray(self.hessian(x), dtype=float)
        return self.hess_fd(x)

    def jac_fd(self, x, h: float | None = None) -> np.ndarray:
        """Central-difference Jacobian, shape (..., n+1, n)."""
        x = self._as_points(x)
        h = self.h_fd if h is None else h
        cols = []
        for i in range(self.dim_base):
            step = np.zeros(self.dim_base)
            step[i] = h
            cols.append((self.evaluate(x + step) - self.evaluate(x - step)) / (2 * h))
        return np.stack(cols, axis=-1)

    def hess_fd(self, x, h: float | None = None) -> np.ndarray:
        """Central differences of the Jacobian (analytic if available), shape (..., n+1, n, n)."""
        x = self._as_points(x)
        h = self.h_fd if h is None else h
        jac = self.jacobian if self.jacobian is not None else (lambda p: self.jac_fd(p, h))
        slices = []
        for j in range(self.dim_base):
            step = np.zeros(self.dim_base)
            step[j] = h
            slices.append((np.asarray(jac(x + step)) - np.asarray(jac(x - step))) / (2 * h))
        H = np.stack(slices, axis=-1)
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    def flipped(self) -> "ImmersionChart":
        note = {"upward": "downward", "downward": "upward", "outward": "inward", "inward": "outward"}
        return replace(self, orientation=-self.orientation,
                       orientation_note=note.get(self.orientation_note, "flipped"))

    def scaled(self, s: float) -> "ImmersionChart":
        """The ambient image scaled by ``s``, reparametrized so parameter lengths scale too."""
        base = self
        jac = None if base.jacobian is None else (lambda x: base.jacobian(x / s))
        hess = None if base.hessian is None else (lambda x: base.hessian(x / s) / s)
        profile = None
        if base.profile is not None:
            p = base.profile
            profile = RadialProfile(f=lambda r: s * p.f(r / s), df=lambda r: p.df(r / s),
                                    d2f=lambda r: p.d2f(r / s) / s,
                                    breaks=tuple(s * b for b in p.breaks))
        center = None if base.center is None else tuple(s * c for c in base.center)
        return replace(base, name=f"{base.name}*{s:g}", map=lambda x: s * base.map(x / s),
                       jacobian=jac, hessian=hess, extent=s * base.extent, center=center,
                       profile=profile, breaks=tuple(s * b for b in base.breaks),
                       h_fd=s * base.h_fd, params={**base.params, "scale": s})

    def moved(self, rotation: np.ndarray, shift: np.ndarray) -> "ImmersionChart":
        """Ambient rigid motion x -> Q x + b applied to the image."""
        Q = np.asarray(rotation, dtype=float)
        b = np.asarray(shift, dtype=float)
        base = self
        jac = None if base.jacobian is None else (lambda x: np.einsum("ak,...kj->...aj", Q, base.jacobian(x)))
        hess = None if base.hessian is None else (
            lambda x: np.einsum("ak,...kij->...aij", Q, base.hessian(x)))
        sign = int(round(np.linalg.det(Q)))
        return replace(base, name=f"{base.name}+motion", map=lambda x: base.map(x) @ Q.T + b,
                       jacobian=jac, hessian=hess, orientation=base.orientation * sign)


@dataclass
class MetricTensor:
    g: np.ndarray
    inverse: np.ndarray
    det: np.ndarray


@dataclass
class CurvatureReport:
    shape_operator: np.ndarray
    principal: np.ndarray
    gauss_curvature: np.ndarray | None
    mean_curvature: np.ndarray
    norm_A: np.ndarray
    spectral_norm_A: np.ndarray
    invariant_sum: np.ndarray | None = None


@dataclass
class GrowthFit:
    exponent_m: float
    constant_C: float
    end_constants: list[float]
    parabolic: bool
    fit_residual: float
    radii: list[float] = field(default_factory=list)
    volumes: list[float] = field(default_factory=list)
    ball_mode: str = "parameter"

    def to_dict(self) -> dict:
        return {
            "exponent_m": self.exponent_m,
            "constant_C": self.constant_C,
            "end_constants": list(self.end_constants),
            "parabolic": self.parabolic,
            "fit_residual": self.fit_residual,
            "radii": list(self.radii),
            "volumes": list(self.volumes),
            "ball_mode": self.ball_mode,
        }


@dataclass(frozen=True)
class Quadrature:
    """Resolution of ball integrals.

    Parameter balls use Gauss-Legendre panels in the radius (breaking at the
    chart's declared kinks) times the trapezoid rule in angle.  Geodesic balls
    use the fast-marching grid with ``substeps**n`` midpoint samples per cell.
    """

    panel_width: float = 0.5
    n_gauss: int = 12
    n_theta: int = 128
    geodesic_h: float = 0.2
    substeps: int = 4


DEFAULT_QUADRATURE = Quadrature()


# ---------------------------------------------------------------- frames


def _cofactor_normal(J: np.ndarray) -> np.ndarray:
    """c_k = det[J | e_k]; orthogonal to the columns of J."""
    n = J.shape[-1]
    if n == 1:
        return np.stack([-J[..., 1, 0], J[..., 0, 0]], axis=-1)
    if n == 2:
        return np.cross(J[..., :, 0], J[..., :, 1])
    comps = []
    for k in range(n + 1):
        minor = np.delete(J, k, axis=-2)
        comps.append((-1) ** (n + k) * np.linalg.det(minor))
    return np.stack(comps, axis=-1)


def _check_rank(g: np.ndarray) -> None:
    lam = np.linalg.eigvalsh(g)[..., 0]
    if np.any(lam < RANK_TOL):
        raise RankDeficient(f"metric smallest eigenvalue {lam.min():.3e} < {RANK_TOL}")


def normal_frame(chart: ImmersionChart, x):
    """Unit normal N and its derivatives dN[..., :, l] = d N / d x_l.

    The derivative is obtained by differentiating c / |c| with the chart's
    second derivatives, not from the Weingarten formula.
    """
    J = chart.jac(x)
    H = chart.hess(x)
    c = _cofactor_normal(J)
    norm = np.linalg.norm(c, axis=-1)
    if np.any(norm < 1e-14):
        raise NormalUndefined("Jacobian columns are linearly dependent")
    n = chart.dim_base
    dcs = []
    for l in range(n):
        dc = np.zeros_like(c)
        for i in range(n):
            Jmod = J.copy()
            Jmod[..., :, i] = H[..., :, i, l]
            dc = dc + _cofactor_normal(Jmod)
        dcs.append(dc)
    dc = np.stack(dcs, axis=-1)
    N = chart.orientation * c / norm[..., None]
    cdc = np.einsum("...k,...kl->...l", c, dc)
    dN = chart.orientation * (dc - c[..., :, None] * cdc[..., None, :] / norm[..., None, None] ** 2)
    dN = dN / norm[..., None, None]
    return J, H, N, dN


def unit_normal(chart: ImmersionChart, x) -> np.ndarray:
    J = chart.jac(x)
    c = _cofactor_normal(J)
    norm = np.linalg.norm(c, axis=-1)
    if np.any(norm < 1e-14):
        raise NormalUndefined("Jacobian columns are linearly dependent")
    return chart.orientation * c / norm[..., None]


def eval_metric(chart: ImmersionChart, x) -> MetricTensor:
    J = chart.jac(x)
    g = np.einsum("...ki,...kj->...ij", J, J)
    _check_rank(g)
    return MetricTensor(g=g, inverse=np.linalg.inv(g), det=np.linalg.det(g))


def second_fundamental_form(chart: ImmersionChart, x):
    J = chart.jac(x)
    H = chart.hess(x)
    g = np.einsum("...ki,...kj->...ij", J, J)
    _check_rank(g)
    c = _cofactor_normal(J)
    norm = np.linalg.norm(c, axis=-1)
    if np.any(norm < 1e-14):
        raise NormalUndefined("Jacobian columns are linearly dependent")
    N = chart.orientation * c / norm[..., None]
    h = np.einsum("...kij,...k->...ij", H, N)
    return g, h


def shape_operator(chart: ImmersionChart, x) -> np.ndarray:
    g, h = second_fundamental_form(chart, x)
    return np.linalg.solve(g, h)


def _principal(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    S = Linv @ h @ np.swapaxes(Linv, -1, -2)
    return np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, -1, -2)))


def _elementary_symmetric(k: np.ndarray, order: int) -> np.ndarray:
    n = k.shape[-1]
    e = [np.ones(k.shape[:-1])] + [np.zeros(k.shape[:-1]) for _ in range(order)]
    for i in range(n):
        for j in range(min(order, i + 1), 0, -1):
            e[j] = e[j] + k[..., i] * e[j - 1]
    return e[order]


def default_coeffs(n: int) -> list[float]:
    return [1.0] * (n // 2)


def _invariant_from_principal(principal: np.ndarray, coeffs: Sequence[float]) -> np.ndarray:
    n = principal.shape[-1]
    terms = n // 2
    coeffs = list(coeffs)
    if len(coeffs) != terms:
        raise ValueError(f"need {terms} coefficients for n={n}, got {len(coeffs)}")
    if any(c <= 0 for c in coeffs):
        raise ValueError("curvature invariant coefficients must be positive")
    if terms >= 2:
        raise UnsupportedDimension("invariant terms with p >= 2 (n >= 4) are not supported")
    out = np.zeros(principal.shape[:-1])
    if terms == 1:
        # Trace of the curvature operator on 2-forms: sum of sectional
        # curvatures kappa_i kappa_j (Gauss equation); equals K when n = 2.
        out = coeffs[0] * _elementary_symmetric(principal, 2)
    return out


def curvatures(chart: ImmersionChart, x, coeffs: Sequence[float] | None = None) -> CurvatureReport:
    g, h = second_fundamental_form(chart, x)
    A = np.linalg.solve(g, h)
    n = chart.dim_base
    principal = _principal(g, h)
    K = np.linalg.det(A) if n == 2 else None
    Hm = np.trace(A, axis1=-2, axis2=-1) / n
    normA = np.sqrt(np.maximum(np.trace(A @ A, axis1=-2, axis2=-1), 0.0))
    spec = np.max(np.abs(principal), axis=-1)
    inv = None
    if n // 2 <= 1:
        inv = _invariant_from_principal(principal, default_coeffs(n) if coeffs is None else coeffs)
    return CurvatureReport(shape_operator=A, principal=principal, gauss_curvature=K,
                           mean_curvature=Hm, norm_A=normA, spectral_norm_A=spec, invariant_sum=inv)


def curvature_invariant(chart: ImmersionChart, x, coeffs: Sequence[float] | None = None) -> np.ndarray:
    """Sum over p of mu_2p times the trace of the curvature operator on 2p-forms."""
    coeffs = default_coeffs(chart.dim_base) if coeffs is None else coeffs
    g, h = second_fundamental_form(chart, x)
    return _invariant_from_principal(_principal(g, h), coeffs)


def area_element(chart: ImmersionChart, x) -> np.ndarray:
    J = chart.jac(x)
    g = np.einsum("...ki,...kj->...ij", J, J)
    return np.sqrt(np.linalg.det(g))


FIELD_NAMES = ("one", "K", "H", "absH", "normA", "invariant")


def field_function(chart: ImmersionChart, name: str, coeffs: Sequence[float] | None = None):
    """Named pointwise scalar fields usable with :func:`integrate_over_ball`."""
    if name == "one":
        return lambda x: np.ones(np.shape(x)[:-1])
    if name == "invariant":
        return lambda x: curvature_invariant(chart, x, coeffs)

    def f(x):
        rep = curvatures(chart, x, coeffs)
        if name == "K":
            if rep.gauss_curvature is None:
                raise UnsupportedDimension("Gauss curvature needs n = 2")
            return rep.gauss_curvature
        if name == "H":
            return rep.mean_curvature
        if name == "absH":
            return np.abs(rep.mean_curvature)
        if name == "normA":
            return rep.norm_A
        raise KeyError(name)

    if name not in FIELD_NAMES:
        raise KeyError(f"unknown field {name!r}")
    return f


# ---------------------------------------------------------------- ball integrals


def _panels(r: float, width: float, breaks: Sequence[float]) -> np.ndarray:
    cuts = sorted({0.0, r, *[b for b in breaks if 0 < b < r]})
    edges = [cuts[0]]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        k = max(1, math.ceil((hi - lo) / width))
        edges.extend(np.linspace(lo, hi, k + 1)[1:])
    return np.asarray(edges)


def _radial_nodes(r: float, quad: Quadrature, breaks: Sequence[float]):
    t, w = np.polynomial.legendre.leggauss(quad.n_gauss)
    edges = _panels(r, quad.panel_width, breaks)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (hi - lo) * t + 0.5 * (hi + lo)).ravel()
    weights = (0.5 * (hi - lo) * w).ravel()
    return nodes, weights


def _end_mask(chart: ImmersionChart, x: np.ndarray, end: End | None) -> np.ndarray:
    if end is None or end.direction is None:
        return np.ones(x.shape[:-1], dtype=bool)
    d = x - chart.origin
    if chart.dim_base == 1:
        return np.sign(d[..., 0]) == np.sign(end.direction)
    ang = np.arctan2(d[..., 1], d[..., 0]) - end.direction
    ang = (ang + np.pi) % (2 * np.pi) - np.pi
    return np.abs(ang) <= end.half_angle


def _parameter_ball(chart: ImmersionChart, f, r: float, quad: Quadrature, end: End | None) -> float:
    n = chart.dim_base
    breaks = tuple(chart.breaks) + (chart.profile.breaks if chart.profile is not None else ())
    if n == 1:
        rad, w = _radial_nodes(r, quad, [abs(b - chart.origin[0]) for b in breaks])
        pts = np.concatenate([chart.origin[0] - rad, chart.origin[0] + rad])[:, None]
        wts = np.concatenate([w, w])
    elif n == 2:
        rad, w = _radial_nodes(r, quad, breaks)
        theta = 2 * np.pi * np.arange(quad.n_theta) / quad.n_theta
        R, TH = np.meshgrid(rad, theta, indexing="ij")
        pts = chart.origin + np.stack([R * np.cos(TH), R * np.sin(TH)], axis=-1)
        wts = (w[:, None] * rad[:, None] * (2 * np.pi / quad.n_theta)) * np.ones_like(TH)
        pts, wts = pts.reshape(-1, 2), wts.ravel()
    else:
        raise UnsupportedDimension("ball integrals support n in {1, 2}")
    vals = np.asarray(f(pts)) * area_element(chart, pts) * _end_mask(chart, pts, end)
    total = float(np.sum(vals * wts))
    if not math.isfinite(total):
        raise ValueError("non-finite ball integral")
    return total


@dataclass
class GeodesicField:
    """Fast-marching distance from the chart centre on a square parameter grid."""

    axes: list[np.ndarray]
    distance: np.ndarray
    h: float
    extent: float

    @property
    def boundary_min(self) -> float:
        d = self.distance
        if d.ndim == 1:
            return float(min(d[0], d[-1]))
        return float(min(d[0].min(), d[-1].min(), d[:, 0].min(), d[:, -1].min()))


@functools.lru_cache(maxsize=32)
def geodesic_field(chart: ImmersionChart, extent: float, h: float) -> GeodesicField:
    """Distance to ``chart.origin`` on the grid ``origin + [-extent, extent]^n``."""
    n = chart.dim_base
    if extent > chart.extent + 1e-12:
        raise TruncationExceeded(f"geodesic grid extent {extent} beyond chart extent {chart.extent}")
    m = int(math.ceil(extent / h))
    axis = np.linspace(-m * h, m * h, 2 * m + 1)
    axes = [chart.origin[i] + axis for i in range(n)]
    if n == 1:
        pts = axes[0][:, None]
        emb = chart.evaluate(pts)
        seg = np.linalg.norm(np.diff(emb, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        dist = np.abs(cum - cum[m])
        return GeodesicField(axes=axes, distance=dist, h=h, extent=m * h)
    if n != 2:
        raise UnsupportedDimension("geodesic balls support n in {1, 2}")
    X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
    emb = chart.evaluate(np.stack([X, Y], axis=-1))
    dist = march_grid(emb, (m, m))
    return GeodesicField(axes=axes, distance=dist, h=h, extent=m * h)


def _geodesic_ball(chart: ImmersionChart, f, r: float, quad: Quadrature, end: End | None,
                   gfield: GeodesicField | None) -> float:
    n = chart.dim_base
    if gfield is None:
        ext = min(chart.extent, max(r * 1.05 + 2 * quad.geodesic_h, r + 4 * quad.geodesic_h))
        gfield = geodesic_field(chart, ext, quad.geodesic_h)
    if gfield.boundary_min <= r:
        raise TruncationExceeded(f"geodesic ball of radius {r} reaches the grid boundary "
                                 f"(boundary distance {gfield.boundary_min:.4g})")
    k = quad.substeps
    h = gfield.h
    sub = (np.arange(k) + 0.5) / k
    D = gfield.distance
    if n == 1:
        ax = gfield.axes[0]
        near = np.nonzero(np.minimum(D[:-1], D[1:]) < r)[0]
        s = sub[None, :]
        x = ax[near, None] + h * s
        d = (1 - s) * D[near, None] + s * D[near + 1, None]
        pts = x.reshape(-1, 1)
        inside = (d.ravel() < r)
        vals = np.asarray(f(pts)) * area_element(chart, pts) * _end_mask(chart, pts, end)
        return float(np.sum(vals * inside) * h / k)
    ax, ay = gfield.axes
    cmin = np.minimum(np.minimum(D[:-1, :-1], D[1:, :-1]), np.minimum(D[:-1, 1:], D[1:, 1:]))
    ci, cj = np.nonzero(cmin < r)
    s, t = np.meshgrid(sub, sub, indexing="ij")
    s, t = s.ravel()[None, :], t.ravel()[None, :]
    d = ((1 - s) * (1 - t) * D[ci, cj][:, None] + s * (1 - t) * D[ci + 1, cj][:, None]
         + (1 - s) * t * D[ci, cj + 1][:, None] + s * t * D[ci + 1, cj + 1][:, None])
    px = ax[ci][:, None] + h * s
    py = ay[cj][:, None] + h * t
    pts = np.stack([px, py], axis=-1).reshape(-1, 2)
    inside = d.ravel() < r
    pts = pts[inside]
    if pts.shape[0] == 0:
        return 0.0
    vals = np.asarray(f(pts)) * area_element(chart, pts) * _end_mask(chart, pts, end)
    return float(np.sum(vals) * (h / k) ** 2)


def integrate_over_ball(chart: ImmersionChart, field, r: float, ball_mode: str = "parameter",
                        quad: Quadrature = DEFAULT_QUADRATURE, coeffs=None, end: End | None = None,
                        gfield: GeodesicField | None = None) -> float:
    """Integral of ``field`` against the area element over B(r) about the chart centre.

    ``field`` is a callable on parameter points or one of :data:`FIELD_NAMES`.
    ``ball_mode`` selects the parameter ball |x - centre| < r or the geodesic
    ball computed by fast marching.
    """
    if r <= 0:
        return 0.0
    f = field_function(chart, field, coeffs) if isinstance(field, str) else field
    if ball_mode == "parameter":
        if r > chart.extent + 1e-12:
            raise TruncationExceeded(f"radius {r} beyond chart extent {chart.extent}")
        return _parameter_ball(chart, f, r, quad, end)
    if ball_mode == "geodesic":
        return _geodesic_ball(chart, f, r, quad, end, gfield)
    raise ValueError(f"unknown ball_mode {ball_mode!r}")


def ball_integrals(chart: ImmersionChart, field, radii: Sequence[float], ball_mode: str = "parameter",
                   quad: Quadrature = DEFAULT_QUADRATURE, coeffs=None, end: End | None = None) -> np.ndarray:
    """Vector of ball integrals; the geodesic distance field is computed once."""
    radii = [float(r) for r in radii]
    gfield = None
    if ball_mode == "geodesic" and radii:
        rmax = max(radii)
        ext = min(chart.extent, max(rmax * 1.05 + 2 * quad.geodesic_h, rmax + 4 * quad.geodesic_h))
        gfield = geodesic_field(chart, ext, quad.geodesic_h)
    return np.array([integrate_over_ball(chart, field, r, ball_mode, quad, coeffs, end, gfield)
                     for r in radii])


def radial_total_curvature(profile: RadialProfile, R) -> np.ndarray:
    """Closed form of the total Gauss curvature over the parameter disc of a radial graph."""
    d = np.asarray(profile.df(np.asarray(R, dtype=float)))
    return 2 * np.pi * (1 - 1 / np.sqrt(1 + d * d))


# ---------------------------------------------------------------- growth and decay


def _fit_inverse_powers(r: np.ndarray, y: np.ndarray, terms: int = 2):
    """Least-squares fit y ~ a0 + a1/r + ... ; returns (a0, residual)."""
    terms = min(terms, len(r) - 1)
    X = np.stack([r ** (-k) for k in range(terms + 1)], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return float(coef[0]), resid


def volume_growth_fit(chart: ImmersionChart, radii: Sequence[float], ball_mode: str = "geodesic",
                      quad: Quadrature = DEFAULT_QUADRATURE, tol_m: float = 0.05) -> GrowthFit:
    """Fit V(r) ~ C r^m on the largest half of the radii and extract end constants."""
    radii = np.asarray(sorted(float(r) for r in radii))
    if len(radii) < 5 or radii[-1] < 10 * radii[0] * (1 - 1e-9):
        raise InsufficientRadii("need >= 5 radii spanning at least one decade")
    vols = ball_integrals(chart, "one", radii, ball_mode, quad)
    if np.any(np.diff(vols) <= 0):
        raise NonMonotoneVolumes(f"ball volumes not increasing: {vols}")
    tail = slice(len(radii) // 2, None)
    lr, lv = np.log(radii[tail]), np.log(vols[tail])
    X = np.stack([np.ones_like(lr), lr], axis=1)
    coef, *_ = np.linalg.lstsq(X, lv, rcond=None)
    residual = float(np.sqrt(np.mean((X @ coef - lv) ** 2)))
    m, C = float(coef[1]), float(np.exp(coef[0]))
    ends: list[float] = []
    if chart.dim_base == 2:
        for end in chart.ends:
            v_end = vols if end.direction is None else ball_integrals(chart, "one", radii, ball_mode, quad, end=end)
            ratio = v_end[tail] / (np.pi * radii[tail] ** 2)
            lam, _ = _fit_inverse_powers(radii[tail], ratio, terms=2)
            ends.append(lam)
    return GrowthFit(exponent_m=m, constant_C=C, end_constants=ends, parabolic=bool(m <= 2 + tol_m),
                     fit_residual=residual, radii=radii.tolist(), volumes=vols.tolist(), ball_mode=ball_mode)


def _tends_to_zero(values: np.ndarray, atol: float = 1e-10, ratio: float = 0.5) -> bool:
    values = np.asarray(values, dtype=float)
    if np.all(values <= atol):
        return True
    tail = values[len(values) // 2:]
    nonincreasing = bool(np.all(np.diff(tail) <= 1e-12 + 1e-9 * np.abs(tail[:-1])))
    return nonincreasing and (tail[-1] <= atol or tail[-1] <= ratio * tail[0])


def boundary_samples(chart: ImmersionChart, r: float, n_theta: int = 256) -> np.ndarray:
    if chart.dim_base == 1:
        return chart.origin + np.array([[-r], [r]])
    if chart.dim_base != 2:
        raise UnsupportedDimension("boundary sampling supports n in {1, 2}")
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    return chart.origin + r * np.stack([np.cos(th), np.sin(th)], axis=-1)


def asymptotic_flatness_report(chart: ImmersionChart, radii: Sequence[float], n_theta: int = 256) -> dict:
    """sup |A| on parameter spheres of the given radii, and the r^2-weighted decay."""
    radii = sorted(float(r) for r in radii)
    sups, weighted = [], []
    for r in radii:
        rep = curvatures(chart, boundary_samples(chart, r, n_theta))
        s = float(np.max(rep.norm_A))
        sups.append(s)
        weighted.append(r * r * s)
    return {
        "radii": radii,
        "sup_norm_A": sups,
        "r2_sup_norm_A": weighted,
        "flat": _tends_to_zero(np.array(sups)),
        "strong_decay": _tends_to_zero(np.array(weighted)),
    }


def sup_norm_A(chart: ImmersionChart, R: float, resolution: int = 161, spectral: bool = False) -> float:
    """Maximum of |A| over a grid on the parameter square of half-width R."""
    if chart.dim_base == 1:
        pts = chart.origin + np.linspace(-R, R, resolution)[:, None]
        extra = [b for b in chart.breaks if abs(b - chart.origin[0]) <= R]
        if extra:
            eps = 1e-9
            pts = np.concatenate([pts, np.array([[b - eps] for b in extra] + [[b + eps] for b in extra])])
    else:
        ax = np.linspace(-R, R, resolution)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        pts = chart.origin + np.stack([X, Y], axis=-1).reshape(-1, 2)
    rep = curvatures(chart, pts)
    vals = rep.spectral_norm_A if spectral else rep.norm_A
    return float(np.max(vals))
