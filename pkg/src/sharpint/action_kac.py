"""Rescaled Ising-Kac action on interface paths.

The action is evaluated through the split ``S = S1 + S2 + S3``:

* ``S1 = [F(phi(T)) - F(phi(0))]/2`` with the rescaled excess free energy,
* ``S2 = (1/2) int int G*(phi_t/(beta eps); alpha_eps)``,
* ``S3 = (1/2) int int G(arctanh phi - beta J_eps*phi; alpha_eps)``,

where ``alpha_eps = 2 c_eps sqrt(1-phi^2)/(beta eps^3)`` and
``G(q; a) = a (cosh q - 1)`` with Legendre dual ``G*``.

Two evaluation routes exist: a radial route for circle paths (1-d radial grid,
Gauss-Legendre in time, analytic time derivative) and a generic route for
fields on the periodic square grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
import csv
import json
import math

import numpy as np
from scipy import optimize

from .geometry import CirclePath, GeometryError, _clamp, _clamp_derivs, torus_displacement, action_sharp
from .instanton import InstantonResult, SmoothProfile, kac_interpolant, profile_interpolant
from .kernels import Profile, convolve_torus, radial_convolution_matrix, reduce_1d
from .models import KacModel, effective_rate, free_energy_density, rate_a

CLIP = 1.0 - 1e-12


class ActionError(RuntimeError):
    """Overflow, unresolved grids or invalid inputs in an action evaluation."""


# ---------------------------------------------------------------------------
# Legendre pair


def G(q, alpha):
    """alpha (cosh q - 1), written as 2 alpha sinh^2(q/2)."""
    return 2.0 * alpha * np.sinh(0.5 * np.asarray(q, float)) ** 2


def G_star(p, alpha):
    """p arcsinh(p/alpha) - sqrt(alpha^2 + p^2) + alpha, cancellation-free."""
    x = np.asarray(p, float) / alpha
    return alpha * (x * np.arcsinh(x) - x * x / (np.sqrt(1.0 + x * x) + 1.0))


def fenchel_young_defect(q, p, alpha):
    """q p + G(q) + G*(p): nonnegative, zero iff p = -alpha sinh q."""
    return q * p + G(q, alpha) + G_star(p, alpha)


# ---------------------------------------------------------------------------
# pointwise Lagrangian and Hamiltonian


def lagrangian_eps(u, v, Ju, c, beta: float, eps: float):
    """Closed-form rescaled Lagrangian L_eps(u, v) given J_eps*u and the rate c."""
    u = np.asarray(u, float)
    if np.any(np.abs(u) >= 1):
        raise ActionError("|u| must be below 1")
    w = eps ** 2 * np.asarray(v, float) / (2.0 * c)
    root = np.sqrt(1.0 - u * u + w * w)
    bj = beta * Ju
    return (v / (2 * beta) * np.log((w + root) / (1.0 - u)) - 0.5 * v * Ju
            + c / (beta * eps ** 2) * (np.cosh(bj) - u * np.sinh(bj) - root))


def lagrangian_eps_split(u, v, Ju, c, beta: float, eps: float):
    """The same Lagrangian through the free-energy / G / G* decomposition."""
    u = np.asarray(u, float)
    q = np.arctanh(u) - beta * Ju
    a = 2.0 * c * np.sqrt(1.0 - u * u) / (beta * eps ** 3)
    return eps * (q * v / (2 * beta * eps) + 0.5 * G_star(v / (beta * eps), a) + 0.5 * G(q, a))


def hamiltonian_eps(u, eta, Ju, c, beta: float, eps: float):
    """H_eps(u, eta) = sup_v [eta v - L_eps(u, v)] in closed form."""
    u = np.asarray(u, float)
    bj = beta * Ju
    b2 = bj + 2 * beta * np.asarray(eta, float)
    return c / (beta * eps ** 2) * (np.cosh(b2) - np.cosh(bj) - u * np.sinh(b2) + u * np.sinh(bj))


def zero_cost_velocity(u, Ju, c, beta: float, eps: float):
    """The mean-field velocity -(2c/eps^2) sqrt(1-u^2) sinh(arctanh u - beta J*u)."""
    u = np.asarray(u, float)
    return -(2.0 * c / eps ** 2) * np.sqrt(1.0 - u * u) * np.sinh(np.arctanh(u) - beta * Ju)


def legendre_gap(u, v, Ju, c, beta: float, eps: float, bracket: float | None = None) -> float:
    """|L_eps(u,v) - sup_p (p v - H_eps(u,p))| with the sup by golden-section search."""
    f = lambda p: -(p * v - hamiltonian_eps(u, p, Ju, c, beta, eps))
    # the maximizer solves v = dH/dp; bracket from its closed form
    q = math.atanh(u) - beta * Ju
    a = 2.0 * c * math.sqrt(1.0 - u * u) / (beta * eps ** 3)
    x = v / (beta * eps * a)
    pstar = (q + math.asinh(x)) / (2 * beta)
    width = bracket if bracket is not None else 1.0 + abs(pstar)
    res = optimize.minimize_scalar(f, bracket=(pstar - width, pstar, pstar + width), method="golden",
                                   tol=1e-12)
    return abs(float(lagrangian_eps(u, v, Ju, c, beta, eps)) + float(res.fun))


# ---------------------------------------------------------------------------
# reports


@dataclass
class ActionReport:
    """Decomposed action of one field path."""

    eps: float
    S1: float
    S2: float
    S3: float
    total: float
    S_ac: float = float("nan")
    gap: float = float("nan")
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


def write_ladder_csv(reports, path) -> None:
    """Per-eps table (eps, S1, S2, S3, total, S_ac, gap)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "S1", "S2", "S3", "total", "S_ac", "gap", "corrected"])
        for r in reports:
            w.writerow([repr(float(r.eps)), repr(float(r.S1)), repr(float(r.S2)), repr(float(r.S3)),
                        repr(float(r.total)), repr(float(r.S_ac)), repr(float(r.gap)), int(r.corrected)])


# ---------------------------------------------------------------------------
# field paths on the torus


@dataclass
class FieldPath:
    """Space-time field on the periodic ``n x n`` grid of the unit torus.

    ``dot`` holds the time derivative when it is known analytically;
    otherwise it is formed by centred differences (one-sided at the ends).
    """

    times: np.ndarray
    values: np.ndarray
    eps: float
    dot: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.clip(np.asarray(self.values, float), -CLIP, CLIP)
        n = self.values.shape[-1]
        if 1.0 / n > self.eps / 8 * (1 + 1e-12):
            raise ActionError(f"grid spacing 1/{n} does not resolve eps = {self.eps} (need <= eps/8)")

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    def time_derivative(self) -> np.ndarray:
        if self.dot is not None:
            return self.dot
        return np.gradient(self.values, self.times, axis=0, edge_order=2)


def _rate_field(model: KacModel, eps: float, phi: np.ndarray) -> np.ndarray:
    if model.rate_family == "constant":
        return np.full_like(phi, model.a0)
    return rate_a(model, convolve_torus(model.K, eps, phi))


def free_energy_eps(model: KacModel, field_: np.ndarray, eps: float) -> float:
    """Rescaled excess free energy of a torus field (midpoint rule)."""
    m = np.asarray(field_, float)
    if np.any(np.abs(m) > 1):
        raise ActionError("field outside [-1, 1]")
    cell = (1.0 / m.shape[0]) ** m.ndim
    local = free_energy_density(m, model.beta) - free_energy_density(model.m_beta, model.beta)
    Jm = convolve_torus(model.J, eps, m)
    Jm2 = convolve_torus(model.J, eps, m * m)
    inter = m * m * model.J.mass() - 2.0 * m * Jm + Jm2
    return float(cell * (np.sum(local) / eps + np.sum(inter) / (4.0 * eps)))


def _slice_terms(model, eps, phi, dphi):
    beta = model.beta
    Jphi = convolve_torus(model.J, eps, phi)
    q = np.arctanh(np.clip(phi, -CLIP, CLIP)) - beta * Jphi
    if np.max(np.abs(q)) > 700:
        idx = np.unravel_index(int(np.argmax(np.abs(q))), q.shape)
        raise ActionError(f"cosh overflow at cell {idx}: unresolved interface")
    c = _rate_field(model, eps, phi)
    a = 2.0 * c * np.sqrt(1.0 - phi * phi) / (beta * eps ** 3)
    return G_star(dphi / (beta * eps), a), G(q, a)


def action_eps_kac(model: KacModel, fp: FieldPath, S_ac: float = float("nan")) -> ActionReport:
    """Decomposed action of a torus field path (trapezoid in time)."""
    eps = fp.eps
    dot = fp.time_derivative()
    cell = (1.0 / fp.n) ** (fp.values.ndim - 1)
    t = np.asarray(fp.times, float)
    w = np.zeros_like(t)
    w[1:] += 0.5 * np.diff(t)
    w[:-1] += 0.5 * np.diff(t)
    s2 = s3 = 0.0
    for k in range(len(t)):
        g2, g3 = _slice_terms(model, eps, fp.values[k], dot[k])
        s2 += w[k] * float(np.sum(g2)) * cell
        s3 += w[k] * float(np.sum(g3)) * cell
    S1 = 0.5 * (free_energy_eps(model, fp.values[-1], eps) - free_energy_eps(model, fp.values[0], eps))
    S2, S3 = 0.5 * s2, 0.5 * s3
    tot = S1 + S2 + S3
    gap = abs(tot - S_ac) / S_ac if S_ac == S_ac and S_ac != 0 else float("nan")
    return ActionReport(eps, S1, S2, S3, tot, S_ac, gap, fp.meta.get("corrected", True),
                        dict(route="grid", n=fp.n, nt=len(t)))


# ---------------------------------------------------------------------------
# recovery sequences


def _Q_interp(Q: Profile | None):
    if Q is None:
        return None
    return profile_interpolant(Q, tail="linear")


def _recovery_values(mbar: SmoothProfile, Qs, path: CirclePath, eps: float, t: float, dtil, w=None):
    """phi and phi_t at raw signed distances ``dtil`` for a circle path."""
    R = float(path.radius(t))
    dR = float(path.dR(t))
    w = 0.5 * R if w is None else w
    if w >= R:
        raise GeometryError("tube width must be below the radius")
    d = _clamp(dtil, w, w)
    c1, _ = _clamp_derivs(dtil, w, w)
    dt_d = c1 * dR  # d(R - r)/dt = R'
    K = 1.0 / R
    dK = -dR / R ** 2
    s = d / eps
    if Qs is None:
        xi = s
        dxi = dt_d / eps
    else:
        Qv, dQ = Qs(s), Qs(s, 1)
        xi = s + eps * K * Qv
        dxi = (dt_d / eps) * (1.0 + eps * K * dQ) + eps * dK * Qv
    phi = mbar(xi)
    dphi = mbar(xi, 1) * dxi
    return phi, dphi, xi


def build_recovery_kac(model: KacModel, inst: InstantonResult, Q: Profile | None, path: CirclePath, eps: float,
                       n: int | None = None, times=None, nt: int | None = None) -> FieldPath:
    """phi_eps(t,x) = m(d/eps + eps K Q(d/eps)) on the torus grid, with analytic phi_t.

    ``Q=None`` gives the uncorrected sequence.  Only circle paths are
    supported; the curvature extension is the constant ``1/R(t)``.
    """
    if not isinstance(path, CirclePath):
        raise GeometryError("recovery sequences are built for circle paths")
    n = int(math.ceil(8.0 / eps)) if n is None else n
    if times is None:
        nt = nt or max(int(math.ceil(path.T / (eps ** 2 / 4))) + 1, 3)
        times = np.linspace(0.0, path.T, nt)
    mbar = kac_interpolant(model, inst)
    Qs = _Q_interp(Q)
    x = (np.arange(n) + 0.5) / n
    X = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
    r = np.linalg.norm(torus_displacement(X, path.center), axis=-1)
    vals, dots = [], []
    for t in times:
        R = float(path.radius(t))
        phi, dphi, _ = _recovery_values(mbar, Qs, path, eps, t, R - r)
        vals.append(phi)
        dots.append(dphi)
    return FieldPath(np.asarray(times), np.asarray(vals), eps, np.asarray(dots),
                     dict(corrected=Q is not None, kind="recovery_kac", n=n))


@dataclass
class RadialSetup:
    r: np.ndarray
    dr: float
    weight: np.ndarray
    Jmat: object
    Kmat: object | None


def radial_setup(model: KacModel, eps: float, r_max: float, dr_factor: int = 128, n_theta: int = 96) -> RadialSetup:
    """Cell-centred radial grid and the radial convolution operators for J_eps (and K_eps)."""
    if model.dim != 2:
        raise ActionError("radial route is two-dimensional")
    dr = eps / dr_factor
    M = int(math.ceil(r_max / dr))
    r = (np.arange(M) + 0.5) * dr
    Jm = radial_convolution_matrix(model.J, eps, r, n_theta)
    Km = None if model.rate_family == "constant" else radial_convolution_matrix(model.K, eps, r, n_theta)
    return RadialSetup(r, dr, 2 * np.pi * r * dr, Jm, Km)


def _radial_free_energy(model, st: RadialSetup, phi, eps, inner) -> float:
    local = free_energy_density(phi, model.beta) - free_energy_density(model.m_beta, model.beta)
    Jm = st.Jmat @ phi
    Jm2 = st.Jmat @ (phi * phi)
    dens = local / eps + (phi * phi * model.J.mass() - 2 * phi * Jm + Jm2) / (4 * eps)
    return float(np.sum((st.weight * dens)[inner]))


def action_circle_kac(model: KacModel, inst: InstantonResult, Q: Profile | None, path: CirclePath, eps: float,
                      coeffs=None, nt: int = 24, dr_factor: int = 128, n_theta: int = 96,
                      margin: float = 8.0, setup: RadialSetup | None = None) -> ActionReport:
    """Radial evaluation of the recovery-sequence action for a circle path.

    Time integrals use ``nt``-point Gauss-Legendre; space integrals the
    midpoint rule on a radial grid of spacing ``eps/dr_factor`` covering the
    interface band (``margin`` eps beyond the extreme radii).  With
    ``coeffs`` (a CoefficientSet) the sharp action is attached.
    """
    if not isinstance(path, CirclePath):
        raise GeometryError("radial route needs a circle path")
    tq, wq = np.polynomial.legendre.leggauss(nt)
    tq = 0.5 * path.T * (tq + 1.0)
    wq = 0.5 * path.T * wq
    Rs = path.radius(np.concatenate([tq, [0.0, path.T]]))
    r_out = float(np.max(Rs)) + margin * eps
    st = setup or radial_setup(model, eps, r_out + eps, dr_factor, n_theta)
    inner = st.r <= r_out
    mbar = kac_interpolant(model, inst)
    Qs = _Q_interp(Q)
    beta = model.beta

    def slice_fields(t):
        R = float(path.radius(t))
        return _recovery_values(mbar, Qs, path, eps, t, R - st.r)

    s2 = s3 = 0.0
    qmax = 0.0
    snaps = {}
    mid = nt // 2
    for k, (t, w) in enumerate(zip(tq, wq)):
        phi, dphi, _ = slice_fields(t)
        phi = np.clip(phi, -CLIP, CLIP)
        Jphi = st.Jmat @ phi
        q = np.arctanh(phi) - beta * Jphi
        qmax = max(qmax, float(np.max(np.abs(q[inner]))))
        if qmax > 700:
            raise ActionError(f"cosh overflow at t = {t:.4g}: unresolved interface")
        c = np.full_like(phi, model.a0) if st.Kmat is None else rate_a(model, st.Kmat @ phi)
        a = 2.0 * c * np.sqrt(1.0 - phi * phi) / (beta * eps ** 3)
        g2 = G_star(dphi / (beta * eps), a)
        g3 = G(q, a)
        s2 += w * float(np.sum((st.weight * g2)[inner]))
        s3 += w * float(np.sum((st.weight * g3)[inner]))
        if k == mid:
            stride = max(1, int(inner.sum()) // 256)
            snaps = dict(t=[t], r=st.r[inner][::stride], S2_density=g2[inner][::stride],
                         S3_density=g3[inner][::stride])
    F0 = _radial_free_energy(model, st, np.clip(slice_fields(0.0)[0], -CLIP, CLIP), eps, inner)
    FT = _radial_free_energy(model, st, np.clip(slice_fields(path.T)[0], -CLIP, CLIP), eps, inner)
    S1 = 0.5 * (FT - F0)
    S2, S3 = 0.5 * s2, 0.5 * s3
    tot = S1 + S2 + S3
    S_ac = float("nan")
    if coeffs is not None:
        S_ac = action_sharp(path, coeffs.mu, coeffs.theta, nt=64)
    gap = abs(tot - S_ac) / S_ac if S_ac == S_ac and S_ac != 0 else float("nan")
    return ActionReport(eps, S1, S2, S3, tot, S_ac, gap, Q is not None,
                        dict(route="radial", nt=nt, dr=st.dr, n_r=len(st.r), F0=F0, FT=FT, q_max=qmax), snaps)


# ---------------------------------------------------------------------------
# lower bound


@dataclass
class LowerBoundReport:
    eps: float
    Lambda: float
    Lambda1: float
    Lambda2: float
    Lambda3: float
    remainder: float
    action_total: float
    limit: float = float("nan")


def lower_bound_kac(model: KacModel, inst: InstantonResult, Q: Profile | None, path: CirclePath,
                           eps: float, p_test, coeffs, nt: int = 24, dr_factor: int = 128,
                           setup: RadialSetup | None = None, margin: float = 8.0) -> LowerBoundReport:
    """Legendre lower bound Lambda_eps(phi, g) on a circle recovery path.

    ``g = eps N p(t) [m'/(2 a sqrt(1-m^2))](d/eps)`` with ``p_test(t)`` a
    function of time (constant along the circle).  Returns the exact
    functional, its three-term Taylor split and the recovery action at the
    same quadrature, so that ``Lambda <= S`` can be checked directly.
    """
    tq, wq = np.polynomial.legendre.leggauss(nt)
    tq = 0.5 * path.T * (tq + 1.0)
    wq = 0.5 * path.T * wq
    Rs = path.radius(np.concatenate([tq, [0.0, path.T]]))
    r_out = float(np.max(Rs)) + margin * eps
    st = setup or radial_setup(model, eps, r_out + eps, dr_factor)
    inner = st.r <= r_out
    mbar = kac_interpolant(model, inst)
    Qs = _Q_interp(Q)
    beta = model.beta
    m = inst.profile
    if model.rate_family == "constant":
        abar = np.full_like(m.values, model.a0)
    else:
        abar = effective_rate(model, m, reduce_1d(model.K, m.h, kind="Ktilde"))
    wfun = profile_interpolant(Profile(m.h, inst.d1.values / (2 * abar * np.sqrt(1 - m.values ** 2)), 0, 0),
                               tail="limits")
    L = L1 = L2 = L3 = 0.0
    s2 = s3 = 0.0
    for t, w in zip(tq, wq):
        R = float(path.radius(t))
        phi, dphi, _ = _recovery_values(mbar, Qs, path, eps, t, R - st.r)
        phi = np.clip(phi, -CLIP, CLIP)
        d = _clamp(R - st.r, 0.5 * R, 0.5 * R)
        g = eps * coeffs.N * float(p_test(t)) * wfun(d / eps)
        Ju = st.Jmat @ phi
        c = np.full_like(phi, model.a0) if st.Kmat is None else rate_a(model, st.Kmat @ phi)
        H = hamiltonian_eps(phi, g, Ju, c, beta, eps)
        W = st.weight * inner
        L += w * float(np.sum(W * (dphi * g - H))) / eps
        L1 += w * float(np.sum(W * dphi * g)) / eps
        bj = beta * Ju
        L2 += w * float(np.sum(W * c * np.cosh(bj) * (phi - np.tanh(bj)) * 2 * g)) / eps ** 3
        L3 -= w * float(np.sum(W * c * np.cosh(bj) * (1 - phi * np.tanh(bj)) * 2 * beta * g * g)) / eps ** 3
        q = np.arctanh(phi) - bj
        a = 2.0 * c * np.sqrt(1.0 - phi * phi) / (beta * eps ** 3)
        s2 += w * float(np.sum(W * G_star(dphi / (beta * eps), a)))
        s3 += w * float(np.sum(W * G(q, a)))
    F0 = _radial_free_energy(model, st, np.clip(_recovery_values(mbar, Qs, path, eps, 0.0,
                                                                 float(path.radius(0.0)) - st.r)[0], -CLIP, CLIP),
                             eps, inner)
    FT = _radial_free_energy(model, st, np.clip(_recovery_values(mbar, Qs, path, eps, path.T,
                                                                 float(path.radius(path.T)) - st.r)[0], -CLIP, CLIP),
                             eps, inner)
    total = 0.5 * (FT - F0) + 0.5 * (s2 + s3)
    # sharp limit int int (-v p + theta kappa p - mu p^2) dsigma dt
    tg, wg = np.polynomial.legendre.leggauss(64)
    tg = 0.5 * path.T * (tg + 1.0)
    wg = 0.5 * path.T * wg
    Rg = path.radius(tg)
    pg = np.array([float(p_test(t)) for t in tg])
    lim = float(np.sum(wg * 2 * np.pi * Rg * (path.dR(tg) * pg + coeffs.theta / Rg * pg - coeffs.mu * pg ** 2)))
    return LowerBoundReport(eps, L, L1, L2, L3, L - (L1 + L2 + L3), total, lim)


def optimal_test_function(path: CirclePath, coeffs):
    """p = (theta kappa - v)/(2 mu), whose limit value equals the sharp action."""
    return lambda t: (coeffs.theta / float(path.radius(t)) + float(path.dR(t))) / (2 * coeffs.mu)


def best_multiple(model, inst, Q, path, eps, p_test, coeffs, bracket=(0.0, 2.0), **kw):
    """Maximize Lambda over multiples s * p_test (Lambda is concave in s).

    Returns ``(s_opt, LowerBoundReport)``.
    """
    st = kw.pop("setup", None)
    if st is None:
        Rs = path.radius(np.linspace(0.0, path.T, 64))
        st = radial_setup(model, eps, float(np.max(Rs)) + kw.get("margin", 8.0) * eps + eps,
                          kw.get("dr_factor", 128))
    cache = {}

    def neg(s):
        rep = lower_bound_kac(model, inst, Q, path, eps, lambda t: s * p_test(t), coeffs, setup=st, **kw)
        cache[s] = rep
        return -rep.Lambda

    res = optimize.minimize_scalar(neg, bracket=bracket, method="brent", tol=1e-6)
    s = float(res.x)
    return s, cache.get(s) or lower_bound_kac(model, inst, Q, path, eps, lambda t: s * p_test(t), coeffs,
                                              setup=st, **kw)


def action_ladder_kac(model, inst, Q, path, coeffs, eps_values=(0.08, 0.06, 0.04), **kw):
    """Radial recovery actions along an eps ladder, with gaps to the sharp action."""
    return [action_circle_kac(model, inst, Q, path, float(e), coeffs=coeffs, **kw) for e in eps_values]
