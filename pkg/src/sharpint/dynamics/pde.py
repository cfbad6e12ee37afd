"""Explicit solvers for the nonlocal Kac flow and the reaction-diffusion equation."""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
import hashlib
import json
import math
import os

import numpy as np

from ..instanton import solve_instanton_kac
from ..kernels import convolve_torus, reduce_1d
from ..models import KacModel, ReactionPair, rate_a


class DynamicsError(RuntimeError):
    """CFL violations, NaNs, fronts hitting the boundary."""


@dataclass
class PDETrajectory:
    """Snapshots of a PDE solution with scheme metadata."""

    times: np.ndarray
    snapshots: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]


def _snapshot_steps(T: float, dt: float, n_snap: int):
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise DynamicsError(f"T = {T} is not a multiple of dt = {dt}")
    marks = np.unique(np.round(np.linspace(0, nsteps, n_snap + 1)).astype(int))
    return nsteps, set(marks.tolist())


# ---------------------------------------------------------------------------
# nonlocal Kac flow


def kac_rhs(model: KacModel, m, Jm, Km=None, h: float = 0.0):
    """2 a(K*m) [sinh(beta(J*m + h)) - m cosh(beta(J*m + h))]."""
    b = model.beta * (Jm + h)
    a = np.full_like(m, model.a0) if model.rate_family == "constant" else rate_a(model, Km)
    return 2.0 * a * (np.sinh(b) - m * np.cosh(b))


def _kac_lipschitz(model: KacModel, h: float) -> float:
    amax = model.a0 if model.rate_family == "constant" else 0.5
    return 2.0 * amax * math.cosh(model.beta * (model.J.mass() + abs(h))) * (1.0 + model.beta * model.J.mass())


def evolve_nonlocal(model: KacModel, m0, dt: float, T: float, rescaled: bool = False, eps: float | None = None,
                    L: float = 1.0, h: float = 0.0, n_snap: int = 10, clip_tol: float = 1e-12) -> PDETrajectory:
    """Explicit Euler for the Kac mean-field flow on a periodic grid.

    ``rescaled=True`` integrates ``m_t = eps^-2 rhs(J_eps * m)`` on the unit
    torus.  Otherwise the domain is the torus of side ``L`` with the unscaled
    kernel, i.e. the unit torus with ``eps = 1/L`` and time not rescaled.
    """
    m = np.array(m0, dtype=float)
    if np.any(np.abs(m) > 1):
        raise DynamicsError("initial datum outside [-1, 1]")
    if rescaled:
        if eps is None:
            raise DynamicsError("rescaled flow needs eps")
        scale, keps = eps ** -2, eps
    else:
        scale, keps = 1.0, 1.0 / L
    lip = scale * _kac_lipschitz(model, h)
    if dt * lip > 1.0:
        raise DynamicsError(f"CFL violation: dt = {dt:g} exceeds 1/Lip = {1 / lip:.3g}")
    nsteps, marks = _snapshot_steps(T, dt, n_snap)
    times, snaps = [], []
    max_clip = 0.0
    for k in range(nsteps + 1):
        if k in marks:
            times.append(k * dt)
            snaps.append(m.copy())
        if k == nsteps:
            break
        Jm = convolve_torus(model.J, keps, m)
        Km = None if model.rate_family == "constant" else convolve_torus(model.K, keps, m)
        m = m + dt * scale * kac_rhs(model, m, Jm, Km, h)
        if not np.all(np.isfinite(m)):
            raise DynamicsError(f"NaN at step {k}")
        over = float(np.max(np.abs(m))) - 1.0
        if over > 0:
            max_clip = max(max_clip, over)
            if over > clip_tol:
                raise DynamicsError(f"values left [-1,1] by {over:.3g} at step {k}")
            m = np.clip(m, -1.0, 1.0)
    return PDETrajectory(np.array(times), np.array(snaps),
                         dict(scheme="euler", dt=dt, cfl=dt * lip, rescaled=rescaled, eps=eps, L=L, h=h,
                              max_clip=max_clip, grid=m.shape))


# ---------------------------------------------------------------------------
# planar fronts on the line


def _line_conv(k, m):
    pad = k.half
    mp = np.pad(m, pad, mode="edge")
    return k.h * np.convolve(mp, k.values, mode="valid")


def evolve_line(model: KacModel, m0, grid_h: float, dt: float, T: float, h: float = 0.0, n_snap: int = 10,
                track_front: bool = False) -> PDETrajectory:
    """Unscaled 1-d flow with the reduced kernels; constant extension beyond the ends."""
    Jt = reduce_1d(model.J, grid_h, kind="Jtilde")
    Kt = None if model.rate_family == "constant" else reduce_1d(model.K, grid_h, kind="Ktilde")
    lip = _kac_lipschitz(model, h)
    if dt * lip > 1.0:
        raise DynamicsError(f"CFL violation: dt = {dt:g} exceeds 1/Lip = {1 / lip:.3g}")
    m = np.array(m0, dtype=float)
    n = len(m)
    x = grid_h * (np.arange(n) - (n - 1) / 2)
    nsteps, marks = _snapshot_steps(T, dt, n_snap)
    times, snaps, fronts = [], [], []
    for k in range(nsteps + 1):
        if track_front:
            fronts.append((k * dt, front_position(x, m)))
        if k in marks:
            times.append(k * dt)
            snaps.append(m.copy())
        if k == nsteps:
            break
        Jm = _line_conv(Jt, m)
        Km = None if Kt is None else _line_conv(Kt, m)
        m = m + dt * kac_rhs(model, m, Jm, Km, h)
        if not np.all(np.isfinite(m)):
            raise DynamicsError(f"NaN at step {k}")
    meta = dict(scheme="euler", dt=dt, grid_h=grid_h, h=h)
    if track_front:
        meta["front"] = np.array(fronts)
    return PDETrajectory(np.array(times), np.array(snaps), meta)


def front_position(x, m, level: float = 0.0) -> float:
    """Zero crossing of an increasing front by cubic interpolation through four points."""
    s = m - level
    idx = np.nonzero((s[:-1] < 0) & (s[1:] >= 0))[0]
    if len(idx) != 1:
        raise DynamicsError("front not unique or lost")
    i = int(idx[0])
    lo, hi = max(i - 1, 0), min(i + 3, len(x))
    xs, ys = x[lo:hi], s[lo:hi]
    p = np.polynomial.Polynomial.fit(xs, ys, len(xs) - 1)
    roots = [r.real for r in p.roots() if abs(r.imag) < 1e-12 and x[i] - 1e-12 <= r.real <= x[i + 1] + 1e-12]
    if not roots:
        return float(x[i] - s[i] * (x[i + 1] - x[i]) / (s[i + 1] - s[i]))
    return float(roots[0])


@dataclass
class FrontSpeedResult:
    h: float
    v: float
    fit_residual: float
    positions: np.ndarray = field(repr=False)


def front_speed(model: KacModel, h_field: float, T: float = 400.0, grid_h: float = 1.0 / 32, X: float = 40.0,
                dt: float = 0.05, transient: float = 0.25, inst=None) -> FrontSpeedResult:
    """Speed of the planar front under a constant field, from a linear fit of its position.

    The instanton is placed at the centre of ``[-X, X]``; positions are
    recorded every step and fitted after ``transient * T``.
    """
    if inst is None:
        inst = solve_instanton_kac(model, h=grid_h)
    prof = inst.profile
    n = int(round(X / grid_h))
    x = grid_h * np.arange(-n, n + 1)
    m0 = np.interp(x, prof.xi, prof.values, left=prof.left_limit, right=prof.right_limit)
    tr = evolve_line(model, m0, grid_h, dt, T, h=h_field, n_snap=1, track_front=True)
    fr = tr.meta["front"]
    if np.max(np.abs(fr[:, 1])) > X - 10.0:
        raise DynamicsError("front approaches the domain boundary; enlarge X")
    sel = fr[:, 0] >= transient * T
    coef = np.polyfit(fr[sel, 0], fr[sel, 1], 1)
    res = float(np.max(np.abs(np.polyval(coef, fr[sel, 0]) - fr[sel, 1])))
    return FrontSpeedResult(h_field, float(coef[0]), res, fr)


def linear_response(model: KacModel, fields=(0.002, 0.004), **kw) -> dict:
    """Symmetric-difference slopes dv/dh for each field amplitude, plus the odd-response defect."""
    inst = kw.pop("inst", None)
    if inst is None:
        inst = solve_instanton_kac(model, h=kw.get("grid_h", 1.0 / 32))
    out = {"slopes": [], "odd_defect": [], "speeds": {}}
    for h in fields:
        vp = front_speed(model, h, inst=inst, **kw).v
        vm = front_speed(model, -h, inst=inst, **kw).v
        out["speeds"][h] = vp
        out["speeds"][-h] = vm
        out["slopes"].append((vp - vm) / (2 * h))
        out["odd_defect"].append(abs(vp + vm) / abs(vp))
    s = out["slopes"]
    if len(fields) == 2 and math.isclose(fields[1], 2 * fields[0]):
        out["richardson"] = (4 * s[0] - s[1]) / 3
    return out


# ---------------------------------------------------------------------------
# reaction-diffusion


def laplacian_periodic(u, dx: float):
    out = -2.0 * u.ndim * u
    for ax in range(u.ndim):
        out = out + np.roll(u, 1, ax) + np.roll(u, -1, ax)
    return out / dx ** 2


def evolve_rd(pair: ReactionPair, u0, dt: float, T: float, eps: float = 1.0, n_snap: int = 10) -> PDETrajectory:
    """Explicit scheme for u_t = Lap(u)/2 + eps^-2 (B(u) - D(u)) on the unit torus."""
    u = np.array(u0, dtype=float)
    dx = 1.0 / u.shape[0]
    d = u.ndim
    if dt > dx ** 2 / (2 * d) * (1 + 1e-12):
        raise DynamicsError(f"CFL violation: dt = {dt:g} > dx^2/(2d) = {dx ** 2 / (2 * d):.3g}")
    s = np.linspace(0.0, 1.0, 1001)
    react = float(np.max(np.abs(pair.dB(s) - pair.dD(s))))
    if dt * react / eps ** 2 > 1.0:
        raise DynamicsError("reaction step too large")
    nsteps, marks = _snapshot_steps(T, dt, n_snap)
    times, snaps = [], []
    for k in range(nsteps + 1):
        if k in marks:
            times.append(k * dt)
            snaps.append(u.copy())
        if k == nsteps:
            break
        u = u + dt * (0.5 * laplacian_periodic(u, dx) + (pair.B(u) - pair.D(u)) / eps ** 2)
        if not np.all(np.isfinite(u)):
            raise DynamicsError(f"NaN at step {k}")
    return PDETrajectory(np.array(times), np.array(snaps), dict(scheme="euler", dt=dt, dx=dx, eps=eps,
                                                                  cfl=dt * 2 * d / dx ** 2))


# ---------------------------------------------------------------------------
# circles


def torus_radius(field_, low: float, high: float) -> float:
    """Radius of the equivalent disk: area of the phase fraction (u - low)/(high - low)."""
    frac = (np.asarray(field_) - low) / (high - low)
    area = float(np.mean(frac))
    return math.sqrt(max(area, 0.0) / math.pi)


def level_set_radius(field_, level: float, center=(0.5, 0.5), n_rays: int = 64, r_max: float = 0.49) -> float:
    """Mean radius of the ``level`` contour of a field on the unit torus, sampled along rays.

    Bicubic periodic interpolation along each ray; the crossing nearest the
    centre is located by linear interpolation between ray samples spaced a
    tenth of a grid cell.
    """
    from scipy import ndimage

    f = np.asarray(field_, float)
    n = f.shape[0]
    ang = 2 * np.pi * (np.arange(n_rays) + 0.5) / n_rays
    rr = np.arange(0.0, r_max, 0.1 / n)
    X = center[0] + rr[None, :] * np.cos(ang)[:, None]
    Y = center[1] + rr[None, :] * np.sin(ang)[:, None]
    vals = ndimage.map_coordinates(f, [X.ravel() * n - 0.5, Y.ravel() * n - 0.5], order=3,
                                   mode="grid-wrap").reshape(X.shape) - level
    radii = []
    for v in vals:
        idx = np.nonzero(np.sign(v[:-1]) != np.sign(v[1:]))[0]
        if len(idx) == 0:
            return 0.0
        i = int(idx[0])
        radii.append(rr[i] - v[i] * (rr[i + 1] - rr[i]) / (v[i + 1] - v[i]))
    return float(np.mean(radii))


def circle_data(profile_fn, n: int, R0: float, eps: float, center=(0.5, 0.5)):
    """profile(d/eps) on the n x n torus grid with d = R0 - |x - center| (minimum image)."""
    x = (np.arange(n) + 0.5) / n
    dx = np.abs(x[:, None] - center[0])
    dy = np.abs(x[None, :] - center[1])
    dx = np.minimum(dx, 1 - dx)
    dy = np.minimum(dy, 1 - dy)
    r = np.sqrt(dx ** 2 + dy ** 2)
    return profile_fn((R0 - r) / eps)


@dataclass
class CurvatureFlowCheck:
    times: np.ndarray
    radii: np.ndarray
    predicted: np.ndarray
    slope: float
    slope_target: float
    max_rel_dev: float

    @property
    def slope_rel_err(self) -> float:
        return abs(self.slope - self.slope_target) / abs(self.slope_target)


def check_circle_shrinking(times, radii, R0: float, theta: float) -> CurvatureFlowCheck:
    """Compare R(t)^2 with R0^2 - 2 theta t (slope of a fit and pointwise deviation)."""
    t = np.asarray(times, float)
    R2 = np.asarray(radii, float) ** 2
    pred = R0 ** 2 - 2 * theta * t
    slope = float(np.polyfit(t, R2, 1)[0])
    dev = float(np.max(np.abs(R2 - pred) / pred))
    return CurvatureFlowCheck(t, np.asarray(radii), np.sqrt(pred), slope, -2 * theta, dev)


# ---------------------------------------------------------------------------
# trajectory export


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_trajectory(traj: PDETrajectory, outdir, config: dict) -> tuple[str, str]:
    """CSV rows (t, flattened field) and a JSON manifest, both named by the config hash."""
    os.makedirs(outdir, exist_ok=True)
    key = config_hash(config)
    csv_path = os.path.join(outdir, f"trajectory_{key}.csv")
    json_path = os.path.join(outdir, f"trajectory_{key}.json")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        for t, snap in zip(traj.times, traj.snapshots):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in np.ravel(snap)])
    meta = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in traj.meta.items()}
    meta.pop("front", None)
    with open(json_path, "w") as fh:
        json.dump(dict(config=config, config_hash=key, shape=list(np.shape(traj.snapshots[0])),
                       n_snapshots=len(traj.times), meta=meta), fh, indent=2, sort_keys=True, default=str)
    return csv_path, json_path
