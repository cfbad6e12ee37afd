"""Rescaled Glauber+Kawasaki action.

The action of a density path ``phi`` is

    S = (1/(2 eps)) int int phi(1-phi) |grad H|^2
        + eps^-3 int int [B(phi) g(H) + D(phi) g(-H)],   g(H) = 1 - e^H + H e^H,

where ``H`` solves, slice by slice in time, the nonlinear Poisson equation

    phi_t + div(phi(1-phi) grad H) = Lap(phi)/2 + (B(phi) e^H - D(phi) e^-H)/eps^2.

Each slice is the maximizer of a strictly concave functional ``j_t(H)``, so
``J^H = int j_t(H) dt <= S`` for every trial ``H`` once both are evaluated
with the same discrete operators.  Two geometries are provided: a radial
grid for circle paths (the fast path used for eps-ladders) and the periodic
square grid for validation.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
import csv
import json
import math

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import spsolve

from .geometry import CirclePath, GeometryError, torus_displacement
from .instanton import InstantonResult, profile_interpolant
from .kernels import Profile
from .models import ReactionPair

H_GUARD = 30.0


class GKActionError(RuntimeError):
    """Newton stagnation, guard activation or unresolved grids."""


def g_plus(H):
    """1 - e^H + H e^H, with a series near zero (it is H^2/2 + H^3/3 + ...)."""
    H = np.asarray(H, float)
    out = np.empty_like(H)
    small = np.abs(H) < 0.1
    x = H[small]
    acc = np.zeros_like(x)
    p = x * x
    fac = 2.0
    for n in range(2, 16):  # sum_n (n-1) H^n / n!
        acc += (n - 1) * p / fac
        p = p * x
        fac *= n + 1
    out[small] = acc
    y = H[~small]
    out[~small] = 1.0 - np.exp(y) + y * np.exp(y)
    return out


def g_minus(H):
    """1 - e^-H - H e^-H."""
    return g_plus(-np.asarray(H, float))


# ---------------------------------------------------------------------------
# discrete geometry: radial and periodic


@dataclass
class RadialGrid:
    """Cell-centred radial grid with zero-flux faces at r = 0 and r = r_max."""

    r: np.ndarray
    dr: float

    @classmethod
    def build(cls, r_max: float, dr: float) -> "RadialGrid":
        M = int(math.ceil(r_max / dr))
        return cls((np.arange(M) + 0.5) * dr, dr)

    @property
    def faces(self) -> np.ndarray:
        return np.arange(1, len(self.r)) * self.dr  # interior faces

    @property
    def weight(self) -> np.ndarray:
        return 2 * np.pi * self.r * self.dr

    def face_values(self, a):
        return 0.5 * (a[1:] + a[:-1])

    def div_grad(self, a_face, H):
        """(1/r) d/dr (r a dH/dr) with zero flux at both ends (vector)."""
        flux = self.faces * a_face * np.diff(H) / self.dr
        out = np.zeros_like(H)
        out[:-1] += flux
        out[1:] -= flux
        return out / (self.r * self.dr)

    def div_grad_bands(self, a_face):
        """Banded (upper, diag, lower) form of the same operator."""
        c = self.faces * a_face / self.dr ** 2
        n = len(self.r)
        diag = np.zeros(n)
        diag[:-1] -= c
        diag[1:] -= c
        up = np.zeros(n)
        lo = np.zeros(n)
        up[1:] = c / self.r[:-1]
        lo[:-1] = c / self.r[1:]
        return up, diag / self.r, lo

    def grad_sq_integral(self, a_face, H) -> float:
        """int a |dH/dr|^2 2 pi r dr on faces."""
        return float(np.sum(2 * np.pi * self.faces * self.dr * a_face * (np.diff(H) / self.dr) ** 2))

    def integral(self, v) -> float:
        return float(np.sum(self.weight * v))


@dataclass
class TorusGrid:
    """Periodic ``n x n`` grid of the unit torus; 5-point operators."""

    n: int

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    def face_values(self, a):
        return 0.5 * (a + np.roll(a, -1, 0)), 0.5 * (a + np.roll(a, -1, 1))

    def div_grad(self, a_face, H):
        ax, ay = a_face
        fx = ax * (np.roll(H, -1, 0) - H)
        fy = ay * (np.roll(H, -1, 1) - H)
        return (fx - np.roll(fx, 1, 0) + fy - np.roll(fy, 1, 1)) / self.dx ** 2

    def div_grad_matrix(self, a_face):
        n = self.n
        N = n * n
        idx = np.arange(N).reshape(n, n)
        rows, cols, vals = [], [], []
        for ax, shift in ((0, a_face[0]), (1, a_face[1])):
            nb = np.roll(idx, -1, ax)
            c = shift.ravel() / self.dx ** 2
            i, j = idx.ravel(), nb.ravel()
            rows += [i, j, i, j]
            cols += [j, i, i, j]
            vals += [c, c, -c, -c]
        return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))

    def grad_sq_integral(self, a_face, H) -> float:
        ax, ay = a_face
        gx = (np.roll(H, -1, 0) - H) / self.dx
        gy = (np.roll(H, -1, 1) - H) / self.dx
        return float(self.dx ** 2 * np.sum(ax * gx * gx + ay * gy * gy))

    def integral(self, v) -> float:
        return float(self.dx ** 2 * np.sum(v))


# ---------------------------------------------------------------------------
# slice problem


def _check_density(phi):
    if np.any(phi <= 0) or np.any(phi >= 1):
        raise GKActionError("density leaves (0,1)")


def slice_residual(grid, pair: ReactionPair, eps: float, phi, dphi, H):
    """phi_t + div(a grad H) - Lap(phi)/2 - (B e^H - D e^-H)/eps^2."""
    a = grid.face_values(phi * (1 - phi))
    one = grid.face_values(np.ones_like(phi))
    return (dphi + grid.div_grad(a, H) - 0.5 * grid.div_grad(one, phi)
            - (pair.B(phi) * np.exp(H) - pair.D(phi) * np.exp(-H)) / eps ** 2)


def slice_functional(grid, pair: ReactionPair, eps: float, phi, dphi, H) -> float:
    """j(H) = (1/eps) int [phi_t H + (1/2) grad phi . grad H - (1/2) a |grad H|^2
    - (B(e^H-1) + D(e^-H-1))/eps^2]."""
    a = grid.face_values(phi * (1 - phi))
    one = grid.face_values(np.ones_like(phi))
    lap_phi = grid.div_grad(one, phi)
    val = (grid.integral(dphi * H - 0.5 * lap_phi * H) - 0.5 * grid.grad_sq_integral(a, H)
           - grid.integral(pair.B(phi) * np.expm1(H) + pair.D(phi) * np.expm1(-H)) / eps ** 2)
    return val / eps


def slice_action(grid, pair: ReactionPair, eps: float, phi, H):
    """The three nonnegative terms of the slice action (gradient, B part, D part)."""
    a = grid.face_values(phi * (1 - phi))
    t1 = grid.grad_sq_integral(a, H) / (2 * eps)
    t2 = grid.integral(pair.B(phi) * g_plus(H)) / eps ** 3
    t3 = grid.integral(pair.D(phi) * g_minus(H)) / eps ** 3
    return t1, t2, t3


def solve_slice_newton(grid, pair: ReactionPair, eps: float, phi, dphi, H0=None, tol: float = 1e-10,
                       max_iter: int = 60, max_halvings: int = 40):
    """Damped Newton for one time slice.

    Residuals are measured as ``eps^2 |F|``.  Returns ``(H, info)``.
    """
    _check_density(phi)
    H = np.zeros_like(phi) if H0 is None else np.array(H0, float)
    a = grid.face_values(phi * (1 - phi))
    Bv, Dv = pair.B(phi), pair.D(phi)
    radial = isinstance(grid, RadialGrid)
    if radial:
        up, diag, lo = grid.div_grad_bands(a)
    else:
        K = grid.div_grad_matrix(a)
    F = eps ** 2 * slice_residual(grid, pair, eps, phi, dphi, H)
    hist = [float(np.max(np.abs(F)))]
    for it in range(max_iter):
        if hist[-1] < tol:
            break
        react = (Bv * np.exp(H) + Dv * np.exp(-H))
        if radial:
            ab = np.vstack([eps ** 2 * up, eps ** 2 * diag - react, eps ** 2 * lo])
            step = linalg.solve_banded((1, 1), ab, -F)
        else:
            Jm = eps ** 2 * K - sparse.diags(react.ravel())
            step = spsolve(Jm.tocsc(), -F.ravel()).reshape(H.shape)
        lam = 1.0
        nrm = float(np.linalg.norm(F))
        for _ in range(max_halvings):
            trial = np.clip(H + lam * step, -H_GUARD, H_GUARD)
            Ft = eps ** 2 * slice_residual(grid, pair, eps, phi, dphi, trial)
            if np.linalg.norm(Ft) < (1 - 1e-4 * lam) * nrm or np.max(np.abs(Ft)) < tol:
                break
            lam *= 0.5
        else:
            raise GKActionError(f"Newton stagnation; residual history {hist}")
        H, F = trial, Ft
        hist.append(float(np.max(np.abs(F))))
    else:
        raise GKActionError(f"Newton did not converge; residual history {hist}")
    if np.max(np.abs(H)) >= H_GUARD:
        raise GKActionError("overflow guard active at convergence")
    return H, dict(residual=hist[-1], iterations=len(hist) - 1, history=hist)


# ---------------------------------------------------------------------------
# recovery fields for circle paths


def center_regularized_radius(r, w: float):
    """rho(r) = r for r >= w and an even quartic below, matching value, slope, curvature.

    Returns ``(rho, Lap rho)``; ``d = R - rho`` then has bounded Laplacian.
    """
    r = np.asarray(r, float)
    b = 3.0 / (4.0 * w)
    c = -1.0 / (8.0 * w ** 3)
    a0 = 3.0 * w / 8.0
    inside = r < w
    rho = np.where(inside, a0 + b * r ** 2 + c * r ** 4, r)
    lap = np.where(inside, 4 * b + 16 * c * r ** 2, 1.0 / np.maximum(r, 1e-300))
    return rho, lap


@dataclass
class GKRecovery:
    """Interpolants and conventions for phi = u(d/eps + eps A Q(d/eps))."""

    u: object
    Q: object | None
    h: object | None
    w: float

    @classmethod
    def build(cls, inst: InstantonResult, Q: Profile | None, h: Profile | None, path: CirclePath):
        u = profile_interpolant(inst.profile, slopes=inst.d1.values, tail="limits")
        Qs = profile_interpolant(Q, tail="linear") if Q is not None else None
        hs = profile_interpolant(h, tail="limits") if h is not None else None
        Rmin = float(np.min(path.radius(np.linspace(0.0, path.T, 257))))
        return cls(u, Qs, hs, 0.25 * Rmin)

    def fields(self, path: CirclePath, eps: float, t: float, r):
        """phi, phi_t and the nearest-point drift A(t) at radii r."""
        R = float(path.radius(t))
        dR = float(path.dR(t))
        d2R = float(path.d2R(t)) if path.d2R is not None else 0.0
        A = dR + 0.5 / R
        dA = d2R - 0.5 * dR / R ** 2
        rho, _ = center_regularized_radius(r, self.w)
        s = (R - rho) / eps
        if self.Q is None:
            xi = s
            dxi = dR / eps
        else:
            Qv, dQ = self.Q(s), self.Q(s, 1)
            xi = s + eps * A * Qv
            dxi = (dR / eps) * (1.0 + eps * A * dQ) + eps * dA * Qv
        return self.u(xi), self.u(xi, 1) * dxi, A, s

    def ansatz_H(self, path: CirclePath, eps: float, t: float, r):
        """eps A h(d/eps)."""
        if self.h is None:
            raise GKActionError("ansatz needs the profile h")
        _, _, A, s = self.fields(path, eps, t, r)
        return eps * A * self.h(s)


@dataclass
class GKActionReport:
    eps: float
    route: str
    total: float
    S_grad: float
    S_B: float
    S_D: float
    S_ac: float = float("nan")
    gap: float = float("nan")
    S1: float = float("nan")
    S2: float = float("nan")
    prediction: float = float("nan")
    sup_H_diff: float = float("nan")
    corrected: bool = True
    diagnostics: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["snapshots"] = {k: np.asarray(v, float).tolist() for k, v in self.snapshots.items()}
        return d

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True, default=float)


def write_gk_ladder_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "route", "total", "S_ac", "gap", "sup_H_diff", "corrected"])
        for r in reports:
            w.writerow([repr(float(r.eps)), r.route, repr(float(r.total)), repr(float(r.S_ac)),
                        repr(float(r.gap)), repr(float(r.sup_H_diff)), int(r.corrected)])


def _sharp_integral(path: CirclePath, nt: int = 64) -> float:
    """int dt int dsigma (v - kappa/2)^2 for a circle."""
    tq, wq = np.polynomial.legendre.leggauss(nt)
    tq = 0.5 * path.T * (tq + 1.0)
    wq = 0.5 * path.T * wq
    R = path.radius(tq)
    return float(np.sum(wq * 2 * np.pi * R * (path.dR(tq) + 0.5 / R) ** 2))


def radial_grid_for(path: CirclePath, eps: float, dr_factor: int = 32, margin: float = 48.0) -> RadialGrid:
    Rmax = float(np.max(path.radius(np.linspace(0.0, path.T, 257))))
    return RadialGrid.build(Rmax + margin * eps, eps / dr_factor)


def action_circle_gk(pair: ReactionPair, inst: InstantonResult, Q: Profile | None, path: CirclePath, eps: float,
                     mu: float | None = None, h: Profile | None = None, C_Q: float | None = None,
                     nt: int = 24, dr_factor: int = 32, margin: float = 48.0, grid: RadialGrid | None = None,
                     H_trial=None) -> GKActionReport:
    """Radial Newton-route action of the recovery sequence on a circle path.

    With ``mu`` the sharp action ``(1/(4 mu)) int int (v - kappa/2)^2`` is
    attached; with ``h`` the ansatz field ``eps A h(d/eps)`` is compared with
    the Newton solution and the quadratic (S1) part is reported; with ``C_Q``
    the prediction ``C_Q int int (v-kappa/2)^2`` is attached.  ``H_trial(t, r)``
    additionally evaluates ``J^H`` for a trial field (stored in diagnostics).
    """
    if not isinstance(path, CirclePath):
        raise GeometryError("radial route needs a circle path")
    grid = grid or radial_grid_for(path, eps, dr_factor, margin)
    rec = GKRecovery.build(inst, Q, h, path)
    tq, wq = np.polynomial.legendre.leggauss(nt)
    order = np.argsort(tq)
    tq = 0.5 * path.T * (tq[order] + 1.0)
    wq = 0.5 * path.T * wq[order]
    Sg = SB = SD = 0.0
    S1 = 0.0
    JH = 0.0
    sup_diff = 0.0
    H = None
    iters = []
    snaps = {}
    for k, (t, w) in enumerate(zip(tq, wq)):
        phi, dphi, A, s = rec.fields(path, eps, t, grid.r)
        phi = np.clip(phi, 1e-15, 1 - 1e-15)
        H, info = solve_slice_newton(grid, pair, eps, phi, dphi, H)
        iters.append(info["iterations"])
        t1, t2, t3 = slice_action(grid, pair, eps, phi, H)
        Sg += w * t1
        SB += w * t2
        SD += w * t3
        if rec.h is not None:
            Ha = eps * A * rec.h(s)
            sup_diff = max(sup_diff, float(np.max(np.abs(H - Ha))))
            a = grid.face_values(phi * (1 - phi))
            S1 += w * (grid.grad_sq_integral(a, Ha) / (2 * eps)
                       + grid.integral((pair.B(phi) + pair.D(phi)) * Ha * Ha) / (2 * eps ** 3))
        if H_trial is not None:
            JH += w * slice_functional(grid, pair, eps, phi, dphi, H_trial(t, grid.r))
        if k == nt // 2:
            stride = max(1, len(grid.r) // 256)
            snaps = dict(t=[t], r=grid.r[::stride], H=H[::stride], phi=phi[::stride])
    total = Sg + SB + SD
    I = _sharp_integral(path)
    S_ac = I / (4 * mu) if mu is not None else float("nan")
    gap = abs(total - S_ac) / S_ac if S_ac == S_ac and S_ac != 0 else float("nan")
    rep = GKActionReport(eps, "newton", total, Sg, SB, SD, S_ac, gap, corrected=Q is not None,
                         diagnostics=dict(dr=grid.dr, n_r=len(grid.r), nt=nt, newton_iterations=iters,
                                          w=rec.w),
                         snapshots=snaps)
    if rec.h is not None:
        rep.S1 = S1
        rep.S2 = total - S1
        rep.sup_H_diff = sup_diff
    if C_Q is not None:
        rep.prediction = C_Q * I
    if H_trial is not None:
        rep.diagnostics["J_trial"] = JH
    return rep


def ansatz_circle_gk(pair, inst, Q, h, path, eps, mu=None, C_Q=None, nt: int = 24, dr_factor: int = 32,
                     margin: float = 48.0, grid=None) -> GKActionReport:
    """Ansatz route: the action split evaluated with H = eps A h(d/eps) in place of the Newton field.

    ``total`` is the action formula evaluated at the ansatz field (a lower-order
    approximation of the Newton value); ``S1`` its quadratic part.
    """
    grid = grid or radial_grid_for(path, eps, dr_factor, margin)
    rec = GKRecovery.build(inst, Q, h, path)
    tq, wq = np.polynomial.legendre.leggauss(nt)
    tq = 0.5 * path.T * (tq + 1.0)
    wq = 0.5 * path.T * wq
    Sg = SB = SD = S1 = 0.0
    for t, w in zip(tq, wq):
        phi, _, A, s = rec.fields(path, eps, t, grid.r)
        Ha = eps * A * rec.h(s)
        t1, t2, t3 = slice_action(grid, pair, eps, phi, Ha)
        Sg += w * t1
        SB += w * t2
        SD += w * t3
        a = grid.face_values(phi * (1 - phi))
        S1 += w * (grid.grad_sq_integral(a, Ha) / (2 * eps)
                   + grid.integral((pair.B(phi) + pair.D(phi)) * Ha * Ha) / (2 * eps ** 3))
    total = Sg + SB + SD
    I = _sharp_integral(path)
    S_ac = I / (4 * mu) if mu is not None else float("nan")
    rep = GKActionReport(eps, "ansatz", total, Sg, SB, SD, S_ac,
                         abs(total - S_ac) / S_ac if mu is not None else float("nan"),
                         S1=S1, S2=total - S1, corrected=Q is not None)
    if C_Q is not None:
        rep.prediction = C_Q * I
    return rep


# ---------------------------------------------------------------------------
# torus field paths


@dataclass
class GKFieldPath:
    """Density path on the periodic ``n x n`` grid with optional analytic phi_t."""

    times: np.ndarray
    values: np.ndarray
    eps: float
    dot: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        n = self.values.shape[-1]
        if 1.0 / n > self.eps / 8 * (1 + 1e-12):
            raise GKActionError(f"grid spacing 1/{n} does not resolve eps = {self.eps} (need <= eps/8)")

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.values.shape[-1])

    def time_derivative(self):
        if self.dot is not None:
            return self.dot
        return np.gradient(self.values, self.times, axis=0, edge_order=2)


def _trapezoid_weights(t):
    t = np.asarray(t, float)
    w = np.zeros_like(t)
    w[1:] += 0.5 * np.diff(t)
    w[:-1] += 0.5 * np.diff(t)
    return w


def build_recovery_gk(inst: InstantonResult, Q: Profile | None, path: CirclePath, eps: float,
                      n: int | None = None, times=None, nt: int | None = None, clip_budget: float = 0.0,
                      center_w: float | None = None) -> GKFieldPath:
    """phi = u(d/eps + eps A Q(d/eps)) on the torus, with analytic phi_t.

    Clipping into (0,1) is an error when it moves a value by more than
    ``clip_budget`` (no remainder term is injected by default).
    """
    if not isinstance(path, CirclePath):
        raise GeometryError("recovery sequences are built for circle paths")
    n = int(math.ceil(8.0 / eps)) if n is None else n
    if times is None:
        nt = nt or max(int(math.ceil(path.T / (eps ** 2 / 4))) + 1, 3)
        times = np.linspace(0.0, path.T, nt)
    rec = GKRecovery.build(inst, Q, None, path)
    if center_w is not None:
        rec.w = center_w
    x = (np.arange(n) + 0.5) / n
    X = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
    r = np.linalg.norm(torus_displacement(X, path.center), axis=-1)
    vals, dots = [], []
    for t in times:
        phi, dphi, _, _ = rec.fields(path, eps, t, r)
        clipped = np.clip(phi, 1e-15, 1 - 1e-15)
        if np.max(np.abs(clipped - phi)) > clip_budget + 1e-15:
            raise GKActionError("clipping beyond the remainder budget")
        vals.append(clipped)
        dots.append(dphi)
    return GKFieldPath(np.asarray(times), np.asarray(vals), eps, np.asarray(dots),
                       dict(corrected=Q is not None, kind="recovery_gk", n=n))


def solve_H_newton(pair: ReactionPair, fp: GKFieldPath, tol: float = 1e-10):
    """Newton field H for every time slice of a torus path, warm-started."""
    grid = fp.grid
    dot = fp.time_derivative()
    H = None
    out, infos = [], []
    for k in range(len(fp.times)):
        H, info = solve_slice_newton(grid, pair, fp.eps, fp.values[k], dot[k], H, tol=tol)
        out.append(H)
        infos.append(info)
    return np.asarray(out), infos


def action_eps_gk(pair: ReactionPair, fp: GKFieldPath, H=None, mu: float | None = None,
                  path: CirclePath | None = None) -> GKActionReport:
    """Newton-route action of a torus path (trapezoid in time)."""
    if H is None:
        H, _ = solve_H_newton(pair, fp)
    grid = fp.grid
    w = _trapezoid_weights(fp.times)
    Sg = SB = SD = 0.0
    for k in range(len(fp.times)):
        t1, t2, t3 = slice_action(grid, pair, fp.eps, fp.values[k], H[k])
        Sg += w[k] * t1
        SB += w[k] * t2
        SD += w[k] * t3
    total = Sg + SB + SD
    S_ac = _sharp_integral(path) / (4 * mu) if (mu is not None and path is not None) else float("nan")
    gap = abs(total - S_ac) / S_ac if S_ac == S_ac and S_ac != 0 else float("nan")
    return GKActionReport(fp.eps, "newton", total, Sg, SB, SD, S_ac, gap, corrected=fp.meta.get("corrected", True),
                          diagnostics=dict(n=grid.n, nt=len(fp.times)))


def rate_JH(pair: ReactionPair, fp: GKFieldPath, H, form: str = "slice") -> float:
    """The variational functional J^H for a trial field H on the path's grid.

    ``form="slice"`` uses ``phi_t`` slice by slice (the form maximized by the
    Newton field) with ``(1/2) grad phi . grad H`` for the diffusion term;
    ``form="laplacian"`` writes that term as ``-(1/2) phi Lap H`` (equal to
    round-off by summation by parts); ``form="endpoint"`` moves the time
    derivative onto H with the discrete product rule on the time grid.
    """
    grid = fp.grid
    eps = fp.eps
    H = np.asarray(H, float)
    t = np.asarray(fp.times, float)
    w = _trapezoid_weights(t)
    one = lambda phi: grid.face_values(np.ones_like(phi))
    if form in ("slice", "laplacian"):
        dot = fp.time_derivative()
        total = 0.0
        for k in range(len(t)):
            phi = fp.values[k]
            Hk = H[k]
            a = grid.face_values(phi * (1 - phi))
            if form == "slice":
                diff = -0.5 * grid.integral(grid.div_grad(one(phi), phi) * Hk)
            else:
                diff = -0.5 * grid.integral(phi * grid.div_grad(one(phi), Hk))
            val = (grid.integral(dot[k] * Hk) + diff - 0.5 * grid.grad_sq_integral(a, Hk)
                   - grid.integral(pair.B(phi) * np.expm1(Hk) + pair.D(phi) * np.expm1(-Hk)) / eps ** 2)
            total += w[k] * val / eps
        return float(total)
    if form == "endpoint":
        phi = fp.values
        # sum_k (phi_{k+1}-phi_k)(H_{k+1}+H_k)/2 rewritten as boundary term minus phi-average times dH
        bnd = grid.integral(phi[-1] * H[-1]) - grid.integral(phi[0] * H[0])
        inner = sum(grid.integral(0.5 * (phi[k + 1] + phi[k]) * (H[k + 1] - H[k])) for k in range(len(t) - 1))
        total = (bnd - inner) / eps
        for k in range(len(t)):
            p = phi[k]
            Hk = H[k]
            a = grid.face_values(p * (1 - p))
            val = (-0.5 * grid.integral(p * grid.div_grad(one(p), Hk)) - 0.5 * grid.grad_sq_integral(a, Hk)
                   - grid.integral(pair.B(p) * np.expm1(Hk) + pair.D(p) * np.expm1(-Hk)) / eps ** 2)
            total += w[k] * val / eps
        return float(total)
    raise GKActionError(f"unknown form {form!r}")


def constant_state_H(pair: ReactionPair, rho: float) -> float:
    """Balance H = (1/2) log(D(rho)/B(rho)) for a stationary constant state."""
    return 0.5 * math.log(float(pair.D(rho)) / float(pair.B(rho)))
