"""Built-in base surfaces and curves.

Every chart here carries analytic first and second derivatives; charts built
from a sampled profile table use spline derivatives.  Finite differences are
only used for user charts that supply nothing but the map.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BadParameters, UnknownSurface
from .surface_geometry import End, ImmersionChart, RadialProfile


def graph_chart(name: str, f: Callable, grad: Callable, hess: Callable, **kw) -> ImmersionChart:
    """Chart (x, y) -> (x, y, f(x, y)) with the upward normal."""

    def m(x):
        return np.concatenate([x, np.asarray(f(x))[..., None]], axis=-1)

    def jac(x):
        J = np.zeros(x.shape[:-1] + (3, 2))
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = 1.0
        J[..., 2, :] = grad(x)
        return J

    def hes(x):
        H = np.zeros(x.shape[:-1] + (3, 2, 2))
        H[..., 2, :, :] = hess(x)
        return H

    kw.setdefault("euler_characteristic", 1)
    kw.setdefault("orientation_note", "upward")
    return ImmersionChart(name=name, dim_base=2, map=m, jacobian=jac, hessian=hes, **kw)


def radial_graph(name: str, profile: RadialProfile, **kw) -> ImmersionChart:
    """Graph of a rotationally symmetric profile z = f(|x|); requires f'(0) = 0."""

    def rho(x):
        return np.sqrt(np.sum(x * x, axis=-1))

    def f(x):
        return profile.f(rho(x))

    def grad(x):
        r = rho(x)
        safe = np.where(r > 0, r, 1.0)
        return (np.where(r > 0, profile.df(r) / safe, 0.0))[..., None] * x

    def hess(x):
        r = rho(x)
        small = r < 1e-8
        safe = np.where(small, 1.0, r)
        d1 = profile.df(r)
        d2 = profile.d2f(r)
        over = np.where(small, d2, d1 / safe)
        u = x / safe[..., None]
        uu = u[..., :, None] * u[..., None, :]
        eye = np.eye(2)
        out = d2[..., None, None] * uu + over[..., None, None] * (eye - uu)
        return np.where(small[..., None, None], d2[..., None, None] * eye, out)

    return graph_chart(name, f, grad, hess, profile=profile, **kw)


def plane() -> ImmersionChart:
    return graph_chart(
        "plane",
        lambda x: np.zeros(x.shape[:-1]),
        lambda x: np.zeros(x.shape),
        lambda x: np.zeros(x.shape[:-1] + (2, 2)),
        profile=RadialProfile(f=lambda r: 0.0 * r, df=lambda r: 0.0 * r, d2f=lambda r: 0.0 * r),
        params={},
    )


def gaussian_profile(h: float, w: float) -> RadialProfile:
    def f(r):
        return h * np.exp(-np.asarray(r) ** 2 / (2 * w * w))

    return RadialProfile(
        f=f,
        df=lambda r: -np.asarray(r) / (w * w) * f(r),
        d2f=lambda r: (np.asarray(r) ** 2 / w ** 4 - 1 / w ** 2) * f(r),
    )


def gaussian_bump(h: float = 1.0, w: float = 1.0) -> ImmersionChart:
    if w <= 0:
        raise BadParameters("bump width w must be positive")
    return radial_graph("gaussian_bump", gaussian_profile(h, w), params={"h": h, "w": w})


def cone_profile(c: float, smoothing: float) -> RadialProfile:
    s2 = smoothing * smoothing

    def f(r):
        r = np.asarray(r)
        return c * (np.sqrt(r * r + s2) - smoothing)

    return RadialProfile(
        f=f,
        df=lambda r: c * np.asarray(r) / np.sqrt(np.asarray(r) ** 2 + s2),
        d2f=lambda r: c * s2 / (np.asarray(r) ** 2 + s2) ** 1.5,
    )


def smoothed_cone(c: float = 1.0, smoothing: float = 1.0) -> ImmersionChart:
    """z = c (sqrt(rho^2 + s^2) - s): a cone of slope c with its tip rounded off."""
    if smoothing <= 0:
        raise BadParameters("cone smoothing must be positive")
    return radial_graph("smoothed_cone", cone_profile(c, smoothing), params={"c": c, "smoothing": smoothing})


def cap_cone_profile(radius: float, angle: float) -> RadialProfile:
    """Spherical cap up to polar angle ``angle`` continued by its tangent cone (C^1)."""
    if not 0 < angle < math.pi / 2:
        raise BadParameters("cap angle must lie in (0, pi/2)")
    rb = radius * math.sin(angle)
    slope = math.tan(angle)
    zb = radius - math.sqrt(radius ** 2 - rb ** 2)

    def f(r):
        r = np.asarray(r, dtype=float)
        inner = radius - np.sqrt(np.maximum(radius ** 2 - np.minimum(r, rb) ** 2, 0.0))
        return np.where(r <= rb, inner, zb + slope * (r - rb))

    def df(r):
        r = np.asarray(r, dtype=float)
        rr = np.minimum(r, rb)
        return np.where(r <= rb, rr / np.sqrt(radius ** 2 - rr ** 2), slope)

    def d2f(r):
        r = np.asarray(r, dtype=float)
        rr = np.minimum(r, rb)
        return np.where(r <= rb, radius ** 2 / (radius ** 2 - rr ** 2) ** 1.5, 0.0)

    return RadialProfile(f=f, df=df, d2f=d2f, breaks=(rb,))


def table_profile(rho, z) -> RadialProfile:
    """Profile interpolated from samples by a clamped cubic spline with f'(0) = 0."""
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    if rho[0] != 0 or np.any(np.diff(rho) <= 0):
        raise BadParameters("profile table must start at rho = 0 and increase")
    spline = CubicSpline(rho, z, bc_type=((1, 0.0), "natural"))
    d1, d2 = spline.derivative(1), spline.derivative(2)
    last = rho[-1]
    slope_end = float(d1(last))

    def f(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= last, spline(np.minimum(r, last)), float(spline(last)) + slope_end * (r - last))

    def df(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= last, d1(np.minimum(r, last)), slope_end)

    def d2f(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= last, d2(np.minimum(r, last)), 0.0)

    return RadialProfile(f=f, df=df, d2f=d2f, breaks=tuple(rho[1:-1]) + (last,))


def rotational_graph(profile="gaussian", **params) -> ImmersionChart:
    """Rotational graph from a named profile or a sample table ``{"rho": [...], "z": [...]}``."""
    if isinstance(profile, RadialProfile):
        prof = profile
    elif isinstance(profile, dict):
        prof = table_profile(profile["rho"], profile["z"])
    elif profile == "gaussian":
        prof = gaussian_profile(params.get("h", 1.0), params.get("w", 1.0))
    elif profile == "cone":
        prof = cone_profile(params.get("c", 1.0), params.get("smoothing", 1.0))
    elif profile == "cap_cone":
        prof = cap_cone_profile(params.get("radius", 1.0), params.get("angle", math.pi / 4))
    else:
        raise BadParameters(f"unknown profile {profile!r}")
    return radial_graph("rotational_graph", prof, params={"profile": profile if isinstance(profile, str) else "table",
                                                          **params})


def saddle_bump(h: float = 1.0, w: float = 1.0) -> ImmersionChart:
    """z = h x y exp(-|x|^2 / 2w^2): negative Gauss curvature near the origin."""
    if w <= 0:
        raise BadParameters("width w must be positive")

    def e(x):
        return np.exp(-np.sum(x * x, axis=-1) / (2 * w * w))

    def f(x):
        return h * x[..., 0] * x[..., 1] * e(x)

    def grad(x):
        X, Y = x[..., 0], x[..., 1]
        E = h * e(x)
        return np.stack([E * Y * (1 - X * X / w ** 2), E * X * (1 - Y * Y / w ** 2)], axis=-1)

    def hess(x):
        X, Y = x[..., 0], x[..., 1]
        E = h * e(x)
        w2 = w * w
        fxx = E * X * Y * (X * X / w2 - 3) / w2
        fyy = E * X * Y * (Y * Y / w2 - 3) / w2
        fxy = E * (1 - X * X / w2) * (1 - Y * Y / w2)
        return np.stack([np.stack([fxx, fxy], -1), np.stack([fxy, fyy], -1)], -2)

    return graph_chart("saddle_bump", f, grad, hess, params={"h": h, "w": w})


def sphere(rho: float = 1.0, orientation: str = "inward") -> ImmersionChart:
    """Polar chart (theta, phi) about the equator point (pi/2, 0); compact, for negative tests."""
    if rho <= 0:
        raise BadParameters("sphere radius must be positive")

    def m(x):
        t, p = x[..., 0], x[..., 1]
        return rho * np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)

    def jac(x):
        t, p = x[..., 0], x[..., 1]
        dt = rho * np.stack([np.cos(t) * np.cos(p), np.cos(t) * np.sin(p), -np.sin(t)], axis=-1)
        dp = rho * np.stack([-np.sin(t) * np.sin(p), np.sin(t) * np.cos(p), np.zeros_like(t)], axis=-1)
        return np.stack([dt, dp], axis=-1)

    def hes(x):
        t, p = x[..., 0], x[..., 1]
        tt = -m(x)
        tp = rho * np.stack([-np.cos(t) * np.sin(p), np.cos(t) * np.cos(p), np.zeros_like(t)], axis=-1)
        pp = rho * np.stack([-np.sin(t) * np.cos(p), -np.sin(t) * np.sin(p), np.zeros_like(t)], axis=-1)
        return np.stack([np.stack([tt, tp], -1), np.stack([tp, pp], -1)], -2)

    # d_theta x d_phi is the outward normal.
    sign = -1 if orientation == "inward" else 1
    return ImmersionChart(name="sphere", dim_base=2, map=m, jacobian=jac, hessian=hes, extent=1.4,
                          center=(math.pi / 2, 0.0), orientation=sign, ends=(), euler_characteristic=2,
                          complete=False, orientation_note=orientation, params={"rho": rho})


def _curve_chart(name, pos, tan, acc, breaks=(), **params) -> ImmersionChart:
    def m(x):
        return pos(x[..., 0])

    def jac(x):
        return tan(x[..., 0])[..., None]

    def hes(x):
        return acc(x[..., 0])[..., None, None]

    return ImmersionChart(name=name, dim_base=1, map=m, jacobian=jac, hessian=hes, breaks=tuple(breaks),
                          ends=(End("left", -1.0), End("right", 1.0)), orientation_note="left",
                          params=params)


def straight_strip() -> ImmersionChart:
    return _curve_chart(
        "straight_strip",
        lambda s: np.stack([s, np.zeros_like(s)], axis=-1),
        lambda s: np.stack([np.ones_like(s), np.zeros_like(s)], axis=-1),
        lambda s: np.zeros(np.shape(s) + (2,)),
    )


def bent_strip(curvature: float = 0.5, angle: float = math.pi) -> ImmersionChart:
    """Arc-length parametrized curve: straight, then a circular arc of total turning
    ``angle`` centred at s = 0, then straight again.  The left normal points to the
    centre of curvature, so the shape operator equals ``curvature`` on the arc.
    """
    if curvature <= 0 or angle <= 0:
        raise BadParameters("curvature and angle must be positive")
    k = curvature
    half = 0.5 * angle / k

    def clip(s):
        return np.clip(s, -half, half)

    def tan(s):
        s = np.asarray(s, dtype=float)
        c = clip(s)
        return np.stack([np.cos(k * c), np.sin(k * c)], axis=-1)

    def pos(s):
        s = np.asarray(s, dtype=float)
        c = clip(s)
        arc = np.stack([np.sin(k * c) / k, (1 - np.cos(k * c)) / k], axis=-1)
        return arc + (s - c)[..., None] * tan(s)

    def acc(s):
        s = np.asarray(s, dtype=float)
        inside = (np.abs(s) <= half).astype(float)
        return k * inside[..., None] * np.stack([-np.sin(k * s), np.cos(k * s)], axis=-1)

    return _curve_chart("bent_strip", pos, tan, acc, breaks=(-half, half), curvature=k, angle=angle)


BUILTINS: dict[str, Callable[..., ImmersionChart]] = {
    "plane": plane,
    "gaussian_bump": gaussian_bump,
    "rotational_graph": rotational_graph,
    "smoothed_cone": smoothed_cone,
    "bent_strip": bent_strip,
    "straight_strip": straight_strip,
    "saddle_bump": saddle_bump,
    "sphere": sphere,
}


def catalog_surface(name: str, params: dict | None = None) -> ImmersionChart:
    params = dict(params or {})
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownSurface(f"unknown surface {name!r}; known: {sorted(BUILTINS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise BadParameters(f"bad parameters for {name}: {exc}") from None
