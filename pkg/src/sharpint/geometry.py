"""Interface paths on the unit torus, curvature flows and the sharp-interface action.

Conventions: the signed distance is positive inside the region, curvature is
positive for convex regions and the normal velocity is positive along the
inward normal, so ``v = theta kappa`` shrinks convex sets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
import json
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

try:  # simplicity and overlap checks
    import shapely
    from shapely.geometry import Polygon
except ImportError:  # pragma: no cover
    shapely = None


class GeometryError(ValueError):
    """Invalid geometric input or a degenerate evolution."""


# ---------------------------------------------------------------------------
# paths


@dataclass
class CirclePath:
    """Circle family ``|x - center| = R(t)`` on ``[0, T]``.

    ``R`` and ``dR`` are callables of time; ``d2R`` is optional and only
    needed for time derivatives of the curvature extension.
    """

    R: Callable
    dR: Callable
    T: float
    center: tuple = (0.5, 0.5)
    d2R: Callable | None = None
    t_ext: float | None = None
    params: dict = field(default_factory=dict)
    kind: str = "circle_family"

    def radius(self, t):
        t = np.asarray(t, dtype=float)
        if self.t_ext is not None and np.any(t > self.t_ext):
            raise GeometryError(f"circle extinct at t = {self.t_ext:.6g}")
        return self.R(t)

    def times(self, nt: int = 201) -> np.ndarray:
        return np.linspace(0.0, self.T, nt)


def circle_linear(R0: float = 0.3, c: float = 0.5, T: float = 0.2, center=(0.5, 0.5)) -> CirclePath:
    """R(t) = R0 - c t."""
    if not R0 - c * T > 0:
        raise GeometryError("radius reaches zero inside [0, T]")
    return CirclePath(lambda t: R0 - c * np.asarray(t, float), lambda t: -c + 0 * np.asarray(t, float), T,
                      center, d2R=lambda t: 0 * np.asarray(t, float),
                      params=dict(family="linear", R0=R0, c=c))


def circle_static(R0: float, T: float, center=(0.5, 0.5)) -> CirclePath:
    return circle_linear(R0, 0.0, T, center)


def evolve_mcf_circle(R0: float, theta: float, T: float, center=(0.5, 0.5)) -> CirclePath:
    """Circle moving by ``v = theta kappa``: R(t) = sqrt(R0^2 - 2 theta t).

    The path stops at the extinction time ``R0^2/(2 theta)`` when it falls
    inside [0, T]; evaluation past it raises.
    """
    if R0 <= 0 or theta < 0:
        raise GeometryError("need R0 > 0 and theta >= 0")
    t_ext = R0 ** 2 / (2 * theta) if theta > 0 else None
    R = lambda t: np.sqrt(np.maximum(R0 ** 2 - 2 * theta * np.asarray(t, float), 0.0))
    dR = lambda t: -theta / R(t)
    d2R = lambda t: -theta ** 2 / R(t) ** 3
    TT = T if t_ext is None else min(T, t_ext)
    return CirclePath(R, dR, TT, center, d2R=d2R, t_ext=t_ext if t_ext is not None and t_ext <= T else None,
                      params=dict(family="mcf", R0=R0, theta=theta))


def circle_from_samples(t, R, center=(0.5, 0.5)) -> CirclePath:
    """Spline-interpolated circle family from sampled radii."""
    sp = CubicSpline(np.asarray(t, float), np.asarray(R, float))
    return CirclePath(sp, sp.derivative(), float(t[-1]) - float(t[0]), center, d2R=sp.derivative(2),
                      params=dict(family="samples"))


@dataclass
class PolygonPath:
    """Time-indexed closed polygons (counter-clockwise, no repeated endpoint).

    ``offsets`` lists translated congruent copies; every copy follows the
    same evolution as the stored representative.
    """

    times: np.ndarray
    curves: list
    offsets: list = field(default_factory=lambda: [(0.0, 0.0)])
    t_ext: float | None = None
    remainder_perimeter: float = 0.0
    params: dict = field(default_factory=dict)
    kind: str = "param_curve_family"

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    def reversed(self) -> "PolygonPath":
        t = self.times[-1] - self.times[::-1]
        return PolygonPath(t, self.curves[::-1], list(self.offsets), None, 0.0,
                           dict(self.params, reversed=True))

    def translated_curves(self, k: int):
        return [c + np.asarray(o)[None, :] for c in [self.curves[k]] for o in self.offsets]


# ---------------------------------------------------------------------------
# polygons


def regular_polygon(R: float, n: int = 256, center=(0.5, 0.5)) -> np.ndarray:
    th = 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + R * np.cos(th), center[1] + R * np.sin(th)])


def ellipse_polygon(a: float, b: float, n: int = 256, center=(0.5, 0.5)) -> np.ndarray:
    """Ellipse with semi-axes a (x) and b (y), resampled to uniform arclength."""
    th = 2 * np.pi * np.arange(8 * n) / (8 * n)
    P = np.column_stack([center[0] + a * np.cos(th), center[1] + b * np.sin(th)])
    return resample_uniform(P, n)


def polygon_area(P: np.ndarray) -> float:
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_perimeter(P: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)))


def resample_uniform(P: np.ndarray, n: int) -> np.ndarray:
    """Periodic cubic-spline resampling to ``n`` points equally spaced in arclength.

    Vertex 0 is kept in place.
    """
    Q = np.vstack([P, P[:1]])
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(Q, axis=0), axis=1))])
    sp = CubicSpline(s, Q, bc_type="periodic")
    # one pass of arclength correction on a fine sample
    fine = np.linspace(0.0, s[-1], 16 * n + 1)
    F = sp(fine)
    sl = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(F, axis=0), axis=1))])
    target = np.linspace(0.0, sl[-1], n + 1)[:-1]
    return sp(np.interp(target, sl, fine))


def three_point_curvature(P: np.ndarray) -> np.ndarray:
    """Signed curvature from the circle through each vertex and its neighbours."""
    a = P - np.roll(P, 1, axis=0)
    b = np.roll(P, -1, axis=0) - P
    c = np.roll(P, -1, axis=0) - np.roll(P, 1, axis=0)
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    den = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1) * np.linalg.norm(c, axis=1)
    return 2.0 * cross / den


def vertex_normals(P: np.ndarray) -> np.ndarray:
    """Inward unit normals (left normals of a counter-clockwise curve)."""
    t = np.roll(P, -1, axis=0) - np.roll(P, 1, axis=0)
    t /= np.linalg.norm(t, axis=1)[:, None]
    return np.column_stack([-t[:, 1], t[:, 0]])


def vertex_arclength(P: np.ndarray) -> np.ndarray:
    """Dual-cell lengths (half of each adjacent edge)."""
    e = np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
    return 0.5 * (e + np.roll(e, 1))


def is_simple(P: np.ndarray) -> bool:
    if shapely is None:  # pragma: no cover
        return True
    return bool(Polygon(P).is_simple)


def _curvature_vector(P: np.ndarray) -> np.ndarray:
    fwd = np.roll(P, -1, axis=0) - P
    bwd = P - np.roll(P, 1, axis=0)
    lf = np.linalg.norm(fwd, axis=1)[:, None]
    lb = np.linalg.norm(bwd, axis=1)[:, None]
    return 2.0 * (fwd / lf - bwd / lb) / (lf + lb)


def evolve_csf_polygon(curve: np.ndarray, theta: float, dt: float | None = None, steps: int | None = None,
                       T: float | None = None, cfl: float = 0.25, area_stop: float = 1e-3,
                       min_vertices: int = 64, check_every: int = 50) -> PolygonPath:
    """Explicit curve-shortening flow ``X_t = theta X_ss`` with uniform re-spacing.

    Parameters
    ----------
    curve : (n, 2) array
        Counter-clockwise simple polygon.
    dt : float, optional
        Fixed step; must satisfy ``dt <= cfl (min edge)^2 / theta``.  When
        omitted the step adapts to the current edge length.
    steps, T : optional
        Stop after this many steps or at this time; otherwise run until the
        enclosed area falls below ``area_stop`` times the initial area, which
        marks the curve extinct.
    min_vertices : int
        The vertex count halves (down to this floor) whenever the mean edge
        length has halved, keeping the time step from collapsing.
    """
    P = np.asarray(curve, dtype=float).copy()
    if P.ndim != 2 or P.shape[1] != 2 or len(P) < 8:
        raise GeometryError("curve must be an (n, 2) array with n >= 8")
    if polygon_area(P) < 0:
        P = P[::-1].copy()
    if not is_simple(P):
        raise GeometryError("initial polygon is not simple")
    if theta <= 0:
        raise GeometryError("theta must be positive")
    n = len(P)
    P = resample_uniform(P, n)
    A0 = polygon_area(P)
    edge0 = polygon_perimeter(P) / n
    if dt is not None and dt > cfl * edge0 ** 2 / theta * (1 + 1e-12):
        raise GeometryError(f"dt = {dt:.3g} exceeds the stability bound {cfl * edge0 ** 2 / theta:.3g}")
    t = 0.0
    times, curves = [0.0], [P.copy()]
    k = 0
    extinct = None
    while True:
        if steps is not None and k >= steps:
            break
        if T is not None and t >= T - 1e-15:
            break
        edge = polygon_perimeter(P) / len(P)
        h = dt if dt is not None else cfl * edge ** 2 / theta
        if dt is not None and h > cfl * edge ** 2 / theta * (1 + 1e-9):
            h = cfl * edge ** 2 / theta  # shrinking curves tighten the bound
        if T is not None:
            h = min(h, T - t)
        area_before = polygon_area(P)
        P = P + h * theta * _curvature_vector(P)
        t += h
        k += 1
        if len(P) // 2 >= min_vertices and polygon_perimeter(P) / len(P) < 0.5 * edge0:
            P = P[::2].copy()
            edge0 = polygon_perimeter(P) / len(P)
        P = resample_uniform(P, len(P))
        area = polygon_area(P)
        if area >= area_before and area > 0:
            raise GeometryError(f"enclosed area failed to decrease at t = {t:.6g}")
        if k % check_every == 0 and not is_simple(P):
            raise GeometryError(f"self-intersection detected at t = {t:.6g}")
        times.append(t)
        curves.append(P.copy())
        if area < area_stop * A0:
            extinct = t
            break
    rem = polygon_perimeter(P) if extinct is not None else 0.0
    return PolygonPath(np.asarray(times), curves, t_ext=extinct, remainder_perimeter=rem,
                       params=dict(theta=theta, cfl=cfl, area_stop=area_stop))


# ---------------------------------------------------------------------------
# distance, curvature, velocity


def _clamp(dt_, w: float, L: float):
    a = np.abs(dt_)
    s = np.clip((a - w) / L, 0.0, 1.0)
    g = s - s ** 3 + 0.5 * s ** 4
    return np.where(a <= w, dt_, np.sign(dt_) * (w + L * g))


def _clamp_derivs(dt_, w: float, L: float):
    """First and second derivative of the clamp with respect to the raw distance."""
    a = np.abs(dt_)
    s = np.clip((a - w) / L, 0.0, 1.0)
    inside = a <= w
    g1 = 1 - 3 * s ** 2 + 2 * s ** 3
    g2 = (-6 * s + 6 * s ** 2) / L
    d1 = np.where(inside, 1.0, np.where(s >= 1.0, 0.0, g1))
    d2 = np.where(inside | (s >= 1.0), 0.0, np.sign(dt_) * g2)
    return d1, d2


def torus_displacement(x, center) -> np.ndarray:
    """Minimal-image displacement ``x - center`` on the unit torus."""
    d = np.asarray(x, float) - np.asarray(center, float)
    return d - np.round(d)


def signed_distance(path, t: float, x, w: float | None = None) -> np.ndarray:
    """Regularized signed distance, positive inside.

    Exact for ``|d| <= w``; outside it saturates smoothly at ``+-(w + w/2)``
    through the polynomial blend ``g(s) = s - s^3 + s^4/2`` (C2 at both ends).
    For circles the default tube is ``w = R/2`` and ``w >= R`` is rejected.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(path, CirclePath):
        R = float(path.radius(t))
        w = 0.5 * R if w is None else w
        if w >= R:
            raise GeometryError(f"tube width {w:.4g} must be below the radius {R:.4g}")
        r = np.linalg.norm(torus_displacement(x, path.center), axis=-1)
        return _clamp(R - r, w, w)
    if isinstance(path, PolygonPath):
        k = int(np.argmin(np.abs(path.times - t)))
        raw = polygon_signed_distance(path.curves[k], x)
        if w is None:
            w = 0.5 / max(np.max(np.abs(three_point_curvature(path.curves[k]))), 1e-300)
        return _clamp(raw, w, w)
    raise GeometryError(f"unsupported path type {type(path).__name__}")


def polygon_signed_distance(P: np.ndarray, x) -> np.ndarray:
    """Signed distance to a polygon (positive inside); needs shapely."""
    if shapely is None:  # pragma: no cover
        raise GeometryError("polygon distances need shapely")
    poly = Polygon(P)
    pts = shapely.points(np.asarray(x, float).reshape(-1, 2))
    dist = shapely.distance(poly.exterior, pts)
    inside = shapely.contains(poly, pts)
    out = np.where(inside, dist, -dist)
    return out.reshape(np.asarray(x).shape[:-1])


def curvature_velocity(path, t: float, k_vertex: int | None = None, dt: float | None = None):
    """Curvature and inward normal velocity.

    Circles: ``kappa = 1/R``, ``v = -R'`` (central difference in time when
    ``dt`` is given, else the analytic derivative).  Polygons: three-point
    curvature at the stored time nearest to ``t`` and normal displacement of
    matched vertices between neighbouring stored times.
    """
    if isinstance(path, CirclePath):
        R = float(path.radius(t))
        if R <= 0:
            raise GeometryError("extinct interface")
        if dt is None:
            v = -float(path.dR(t))
        else:
            v = -(float(path.radius(t + dt)) - float(path.radius(t - dt))) / (2 * dt)
        return 1.0 / R, v
    k = int(np.argmin(np.abs(path.times - t)))
    if k == 0 or k == len(path.times) - 1:
        raise GeometryError("t must be interior to the time grid")
    P = path.curves[k]
    kap = three_point_curvature(P)
    nrm = vertex_normals(P)
    a, b = path.curves[k - 1], path.curves[k + 1]
    if len(a) != len(P) or len(b) != len(P):
        raise GeometryError("vertex count changes around this time")
    v = np.sum((b - a) * nrm, axis=1) / (path.times[k + 1] - path.times[k - 1])
    if k_vertex is not None:
        return float(kap[k_vertex]), float(v[k_vertex])
    return kap, v


def curvature_extension(path: CirclePath, t, x=None):
    """Nearest-point curvature ``K(t,x)``; for circles the constant 1/R(t)."""
    R = path.radius(t)
    return 1.0 / R if x is None else np.full(np.asarray(x).shape[:-1], 1.0 / R)


def drift_A(path: CirclePath, t, r=None, variant: str = "nearest"):
    """``A = d_t d - (1/2) Laplacian d`` for a circle.

    ``nearest``: evaluated at the nearest boundary point, ``R' + 1/(2R)``,
    i.e. ``-(v - kappa/2)`` in the inward-velocity convention.
    ``exact``: pointwise ``R' + 1/(2r)`` (needs ``r``).
    ``flipped``: ``v - kappa/2`` (the opposite sign), exposed for comparison.
    """
    R = path.radius(t)
    dR = path.dR(t)
    if variant == "nearest":
        return dR + 0.5 / R
    if variant == "exact":
        return dR + 0.5 / np.asarray(r)
    if variant == "flipped":
        return -dR - 0.5 / R
    raise GeometryError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# sharp-interface action


def _gauss_legendre(a: float, b: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def action_sharp(path, mu: float, theta: float, nt: int = 64, quadrature: str = "gauss") -> float:
    """S_ac = (1/(4 mu)) int dt int dsigma (v - theta kappa)^2.

    Circles use ``nt``-point Gauss-Legendre in time (or the trapezoid on a
    uniform grid with ``quadrature="trapezoid"``).  Polygon paths use the
    stored snapshots: velocities from matched-vertex displacements over each
    interval, curvature and arclength averaged over its end points.
    """
    if mu <= 0 or theta < 0:
        raise GeometryError("coefficients must be positive")
    if isinstance(path, CirclePath):
        if quadrature == "gauss":
            tq, wq = _gauss_legendre(0.0, path.T, nt)
        else:
            tq = np.linspace(0.0, path.T, nt)
            wq = np.full(nt, tq[1] - tq[0])
            wq[[0, -1]] *= 0.5
        R = path.radius(tq)
        if np.any(R <= 0):
            raise GeometryError("circle extinct inside the interval")
        v = -path.dR(tq)
        integrand = 2 * np.pi * R * (v - theta / R) ** 2
        return float(np.sum(wq * integrand) / (4 * mu))
    total = 0.0
    for k in range(len(path.times) - 1):
        A, B = path.curves[k], path.curves[k + 1]
        if len(A) != len(B):
            if len(A) == 2 * len(B):
                A = A[::2]
            elif len(B) == 2 * len(A):
                B = B[::2]
            else:
                raise GeometryError("unmatched vertex counts in polygon path")
        h = path.times[k + 1] - path.times[k]
        M = 0.5 * (A + B)
        v = np.sum((B - A) * vertex_normals(M), axis=1) / h
        kap = 0.5 * (three_point_curvature(A) + three_point_curvature(B))
        ds = 0.5 * (vertex_arclength(A) + vertex_arclength(B))
        total += h * float(np.sum((v - theta * kap) ** 2 * ds))
    return total * len(path.offsets) / (4 * mu)


def perimeter_history(path) -> np.ndarray:
    if isinstance(path, CirclePath):
        return 2 * np.pi * path.radius(path.times())
    return np.array([polygon_perimeter(c) for c in path.curves])


# ---------------------------------------------------------------------------
# nucleation


@dataclass
class NucleationReport:
    cost_direct: float
    cost_perimeter: float
    target: float
    ratio: float
    initial_perimeter: float
    extinction_time: float
    extinction_bound: float
    within_bound: bool
    converged: bool
    n_ellipses: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def nucleation_path(ell: float, N_delta: int, m_delta: float, theta: float, mu: float, tau: float,
                    n_vertices: int = 512, reuse_congruent: bool = True, center=(0.5, 0.5),
                    rtol: float = 0.05):
    """Chain of ``N_delta`` ellipses covering a segment of length ``ell``.

    Each ellipse has semi-axes ``ell/(2 N_delta)`` and ``m_delta/2``.  The
    chain is evolved by curve-shortening flow until extinction and the
    time-reversed family is the nucleation path.  The reported cost is the
    sharp action of the reversed path (direct quadrature plus the remaining
    perimeter at the stopping area, charged at ``tau`` per unit length);
    the target is ``2 tau ell``.
    """
    if min(ell, m_delta, theta, mu, tau) <= 0 or N_delta < 1:
        raise GeometryError("nucleation parameters must be positive")
    a = ell / (2 * N_delta)
    b = m_delta / 2
    if b > a * (1 + 1e-12):
        raise GeometryError("m_delta must not exceed ell/N_delta")
    xs = center[0] - ell / 2 + (np.arange(N_delta) + 0.5) * (ell / N_delta)
    base = ellipse_polygon(a, b, n_vertices, center=(0.0, 0.0))
    if shapely is not None and N_delta > 1:
        p0 = Polygon(base + [xs[0], center[1]])
        p1 = Polygon(base + [xs[1], center[1]])
        if p0.intersection(p1).area > 1e-9 * p0.area:
            raise GeometryError("adjacent ellipses overlap")
    if reuse_congruent:
        fwd = evolve_csf_polygon(base, theta)
        fwd.offsets = [(x, center[1]) for x in xs]
    else:  # pragma: no cover - identical up to translation
        raise GeometryError("only congruent reuse is implemented for ellipse chains")
    rev = fwd.reversed()
    rev.t_ext = None
    per0 = polygon_perimeter(fwd.curves[0]) * N_delta
    direct = action_sharp(rev, mu, theta) + tau * fwd.remainder_perimeter * N_delta
    per_cost = (theta / mu) * per0
    sigma = float(fwd.t_ext if fwd.t_ext is not None else fwd.times[-1])
    bound = (ell / N_delta) ** 2 / (8 * theta)
    target = 2 * tau * ell
    ratio = direct / target
    rep = NucleationReport(direct, per_cost, target, ratio, per0, sigma, bound, sigma <= bound * (1 + rtol),
                           abs(ratio - 1) <= rtol, N_delta)
    return rev, rep


# ---------------------------------------------------------------------------
# export


def export_path(path, csv_path, json_path, n_vertices: int = 256, nt: int = 101) -> None:
    """Write (t, vertex index, x, y) rows and a JSON manifest.

    Circles are sampled at ``nt`` times with ``n_vertices`` vertices; polygon
    families keep their own vertices and are thinned to ``nt`` frames.
    """
    rows = []
    if isinstance(path, CirclePath):
        times = path.times(nt)
        for t in times:
            P = regular_polygon(float(path.radius(t)), n_vertices, path.center)
            rows.extend((t, i, x, y) for i, (x, y) in enumerate(P))
        meta = dict(kind=path.kind, parameters=path.params, T=path.T, center=list(path.center),
                    extinction_time=path.t_ext)
    else:
        pick = np.unique(np.linspace(0, len(path.times) - 1, min(nt, len(path.times))).round().astype(int))
        for k in pick:
            t, P = path.times[k], path.curves[k]
            j = 0
            for off in path.offsets:
                for x, y in P + np.asarray(off):
                    rows.append((t, j, x, y))
                    j += 1
        meta = dict(kind=path.kind, parameters=path.params, T=path.T, components=len(path.offsets),
                    extinction_time=path.t_ext)
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "vertex", "x", "y"])
        for t, i, x, y in rows:
            wr.writerow([repr(float(t)), i, repr(float(x)), repr(float(y))])
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=float)
