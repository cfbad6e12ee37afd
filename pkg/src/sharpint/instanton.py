"""Standing-wave profiles connecting the two stable phases.

Kac: odd solution of ``m = tanh(beta Jt * m)`` with limits ``+-m_beta``.
GK: increasing solution of ``u''/2 + B(u) - D(u) = 0`` between the stable
roots, obtained from the first integral ``u' = 2 sqrt(W(u))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize
from scipy.interpolate import CubicHermiteSpline, CubicSpline, PchipInterpolator
from scipy.special import expit

from .kernels import (Kernel1D, Profile, convolve_line, reduce_1d, reduce_1d_derivative,
                      reduced_values)
from .models import KacModel, ReactionPair


class InstantonError(RuntimeError):
    """Solver failure (non-convergence, invalid input)."""


@dataclass
class InstantonResult:
    """Converged profile with its first two derivatives and diagnostics."""

    profile: Profile
    residual_sup: float
    alpha_or_rate: float
    meta: dict = field(default_factory=dict)
    d1: Profile | None = None
    d2: Profile | None = None
    Jt: Kernel1D | None = None
    dJt: Kernel1D | None = None

    @property
    def xi(self):
        return self.profile.xi

    @property
    def h(self):
        return self.profile.h


# ---------------------------------------------------------------------------
# Kac


def kac_residual(model: KacModel, m: Profile, Jt: Kernel1D) -> np.ndarray:
    """Pointwise residual m - tanh(beta Jt*m)."""
    return m.values - np.tanh(model.beta * convolve_line(Jt, m).values)


def _shifted_stencil(model: KacModel, h: float, shift: float) -> Kernel1D:
    # samples of Jt(k h + shift) for a translated evaluation grid
    half = int(math.floor(model.J.radius / h)) + 2
    x = h * np.arange(-half, half + 1) + shift
    v = reduced_values(model.J, x, "Jtilde")
    v *= model.J.mass() / (h * v.sum())
    return Kernel1D("Jtilde", h, v, model.J)


def _shifted_derivative_stencil(model: KacModel, h: float, shift: float) -> Kernel1D:
    half = int(math.floor(model.J.radius / h)) + 2
    x = h * np.arange(-half, half + 1) + shift
    return Kernel1D("dJtilde", h, reduced_values(model.J, x, "dJtilde"), model.J)


class SmoothProfile:
    """Piecewise cubic Hermite evaluation of a profile with fixed tails.

    Beyond the sampled range the value is continued by ``tail`` which is
    ``"limits"`` (constant limits, zero slope) or ``"linear"`` (linear
    continuation with the end slopes).
    """

    def __init__(self, x, values, slopes, left, right, tail: str = "limits"):
        self.spline = CubicHermiteSpline(x, values, slopes)
        self.a, self.b = float(x[0]), float(x[-1])
        self.left, self.right = left, right
        self.sl, self.sr = float(slopes[0]), float(slopes[-1])
        self.va, self.vb = float(values[0]), float(values[-1])
        self.tail = tail

    def __call__(self, x, nu: int = 0):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.spline(np.clip(x, self.a, self.b), nu), dtype=float)
        lo, hi = x < self.a, x > self.b
        if self.tail == "limits":
            if nu == 0:
                out = np.where(lo, self.left, np.where(hi, self.right, out))
            else:
                out = np.where(lo | hi, 0.0, out)
        else:
            if nu == 0:
                out = np.where(lo, self.va + self.sl * (x - self.a),
                               np.where(hi, self.vb + self.sr * (x - self.b), out))
            elif nu == 1:
                out = np.where(lo, self.sl, np.where(hi, self.sr, out))
            else:
                out = np.where(lo | hi, 0.0, out)
        return out


def kac_interpolant(model: KacModel, inst: "InstantonResult", refine: int = 8) -> SmoothProfile:
    """m(xi) at arbitrary xi by Nystrom upsampling plus Hermite interpolation.

    Values and slopes at the shifted grids ``xi_k + j h/refine`` come from the
    fixed-point map and its derivative, so the interpolant is accurate to the
    solver tolerance on the refined grid.
    """
    m = inst.profile
    h = m.h
    xs, vs, ds = [m.xi], [m.values], [inst.d1.values]
    for j in range(1, refine):
        sh = j * h / refine
        st = _shifted_stencil(model, h, sh)
        v = np.tanh(model.beta * convolve_line(st, m).values)
        dst = _shifted_derivative_stencil(model, h, sh)
        d = (1.0 - v ** 2) * model.beta * convolve_line(dst, m).values
        xs.append(m.xi + sh)
        vs.append(v)
        ds.append(d)
    x = np.stack(xs, axis=1).ravel()[: -(refine - 1)]
    v = np.stack(vs, axis=1).ravel()[: -(refine - 1)]
    d = np.stack(ds, axis=1).ravel()[: -(refine - 1)]
    return SmoothProfile(x, v, d, m.left_limit, m.right_limit, "limits")


def profile_interpolant(p: Profile, slopes=None, tail: str = "linear") -> SmoothProfile:
    """Hermite (or not-a-knot spline when ``slopes`` is None) evaluation of a profile."""
    if slopes is None:
        slopes = CubicSpline(p.xi, p.values)(p.xi, 1)
    return SmoothProfile(p.xi, p.values, np.asarray(slopes, float), p.left_limit, p.right_limit, tail)


def recenter(model: KacModel, m: Profile, Jt: Kernel1D) -> Profile:
    """Translate ``m`` so that it vanishes at 0.

    The zero of the linear interpolant gives the shift ``s``; the profile is
    resampled at ``xi + s`` through the fixed-point map itself, which is a
    smooth interpolant of a converged solution.
    """
    v = m.values
    i = int(np.searchsorted(v, 0.0))
    if i <= 0 or i >= len(v):
        raise InstantonError("profile does not change sign")
    x0, x1 = m.xi[i - 1], m.xi[i]
    s = x0 - v[i - 1] * (x1 - x0) / (v[i] - v[i - 1])
    if abs(s) < 1e-15:
        return m
    st = _shifted_stencil(model, m.h, s)
    return m.with_values(np.tanh(model.beta * convolve_line(st, m).values))


def solve_instanton_kac(model: KacModel, Xi: float = 20.0, h: float = 1.0 / 64, tol: float = 1e-10,
                        init: str = "tanh", damping: float = 0.5, max_iter: int = 200_000,
                        symmetrize: bool = True) -> InstantonResult:
    """Damped fixed-point iteration for the Kac instanton.

    Parameters
    ----------
    model : KacModel
    Xi, h : float
        Grid half-width and spacing.  ``Xi`` must cover ten kernel supports.
    tol : float
        Target sup-norm residual of ``m - tanh(beta Jt*m)``.
    init : {"tanh", "sign"}
        Initial guess ``m_beta tanh(xi)`` or ``m_beta sign(xi)``.
    symmetrize : bool
        Project every iterate on odd functions (the problem is symmetric for
        radial kernels); otherwise the result is recentred after convergence.
    """
    if Xi < 10 * model.J.width:
        raise InstantonError("cutoff must cover at least ten kernel supports")
    if tol < 1e-12:
        raise InstantonError("tolerance below 1e-12 is not attainable in double precision")
    mb = model.m_beta
    Jt = reduce_1d(model.J, h)
    n = int(round(Xi / h))
    xi = h * np.arange(-n, n + 1)
    if init == "tanh":
        v = mb * np.tanh(xi)
    elif init == "sign":
        v = mb * np.sign(xi)
    else:
        raise InstantonError(f"unknown initial guess {init!r}")
    m = Profile(h, v, -mb, mb, "mbar")
    lam = damping
    prev = np.inf
    it = 0
    res = np.inf
    history = []
    for rnd in range(3):
        while it < max_iter:
            T = np.tanh(model.beta * convolve_line(Jt, m).values)
            r = m.values - T
            res = float(np.max(np.abs(r)))
            history.append(res)
            if res < tol * 0.05:
                break
            if res > prev * (1 + 1e-12):
                lam = max(lam * 0.5, 1.0 / 1024)
            prev = res
            new = m.values - lam * r
            if symmetrize:
                new = 0.5 * (new - new[::-1])
            m = m.with_values(new)
            it += 1
        else:
            raise InstantonError(f"no convergence in {max_iter} iterations (residual {res:.3g})")
        if symmetrize or abs(m.values[n]) < tol * 0.01:
            break
        m = recenter(model, m, Jt)
        prev = np.inf
    res = float(np.max(np.abs(kac_residual(model, m, Jt))))
    if res >= tol:
        raise InstantonError(f"residual {res:.3g} above tolerance {tol:.3g}")
    dJt = reduce_1d_derivative(model.J, h)
    d1, d2 = kac_derivatives(model, m, dJt)
    out = InstantonResult(m, res, float("nan"),
                          dict(model=model.label(), Xi=Xi, h=h, tol=tol, iterations=it, init=init),
                          d1, d2, Jt, dJt)
    try:
        out.alpha_or_rate = -check_asymptotics(out).slope
    except InstantonError:
        pass
    return out


def kac_derivatives(model: KacModel, m: Profile, dJt: Kernel1D):
    """m' and m'' from differentiating the fixed-point relation.

    ``m' = (1-m^2) beta (Jt' * m)`` and
    ``m'' = -2 m m' beta (Jt' * m) + (1-m^2) beta (Jt' * m')``.
    """
    g = model.beta * convolve_line(dJt, m).values
    one = 1.0 - m.values ** 2
    d1 = one * g
    p1 = Profile(m.h, d1, 0.0, 0.0, "mbar'")
    g2 = model.beta * convolve_line(dJt, p1).values
    d2 = -2.0 * m.values * d1 * g + one * g2
    return p1, Profile(m.h, d2, 0.0, 0.0, "mbar''")


def decay_integral(model: KacModel, alpha, h: float = 1.0 / 1024):
    """p * int Jt(xi) exp(-alpha xi) d xi (trapezoid on a fine grid)."""
    Jt = reduce_1d(model.J, h)
    x = Jt.grid
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    val = model.p * Jt.h * (Jt.values[None, :] * np.exp(-alpha[:, None] * x[None, :])).sum(axis=1)
    return val


def solve_decay_rate(model: KacModel, h: float = 1.0 / 1024) -> float:
    """Positive root alpha of p * int Jt(xi) exp(-alpha xi) = 1."""
    g = lambda a: float(decay_integral(model, a, h)[0]) - 1.0
    if g(0.0) >= 0.0:
        raise InstantonError("p >= 1: no positive decay rate")
    hi = 1.0
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e4:
            raise InstantonError("no sign change on the bracket for the decay rate")
    return optimize.brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


@dataclass
class AsymptoticsReport:
    slope: float
    target: float
    rel_gap: float
    window: tuple
    deriv_slope: float
    n_points: int


def fit_log_slope(x, y):
    """Least-squares slope of log(y) against x."""
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return float(coef[0])


def check_asymptotics(result: InstantonResult, alpha: float | None = None,
                      window: tuple | None = None, floor: float = 1e-13) -> AsymptoticsReport:
    """Exponential tail fit of ``limit - profile`` on a window of the right half-line.

    The default window ``[Xi/4, Xi/2]`` is halved until all values exceed
    ``floor``; an error is raised when the window would enter the kernel core.
    """
    p = result.profile
    xi = p.xi
    Xi = p.cutoff
    a, b = window if window is not None else (Xi / 4, Xi / 2)
    y_all = p.right_limit - p.values
    core = 0.5
    while True:
        sel = (xi >= a) & (xi <= b)
        y = y_all[sel]
        if sel.sum() >= 4 and np.all(y > floor):
            break
        a, b = a / 2, b / 2
        if a < core:
            raise InstantonError("tail values underflow before the asymptotic window")
    slope = fit_log_slope(xi[sel], y)
    dslope = float("nan")
    if result.d1 is not None:
        yd = result.d1.values[sel]
        if np.all(yd > floor):
            dslope = fit_log_slope(xi[sel], yd)
    target = float("nan") if alpha is None else alpha
    gap = abs(-slope - target) / target if alpha is not None else float("nan")
    return AsymptoticsReport(slope, target, gap, (a, b), dslope, int(sel.sum()))


# ---------------------------------------------------------------------------
# Glauber + Kawasaki


def _taylor_about(coefs, x0):
    # coefficients of W(x0 + y) in powers of y
    P = Polynomial(np.asarray(coefs, dtype=float))
    out = []
    fac = 1.0
    Q = P
    for k in range(len(coefs)):
        out.append(float(Q(x0)) / fac)
        Q = Q.deriv()
        fac *= (k + 1)
    return np.array(out)


class _WellPotential:
    """W evaluated through its Taylor series at the nearer well.

    Constant and linear Taylor terms vanish at a well; dropping them removes
    the cancellation that would otherwise ruin relative accuracy in the tails.
    """

    def __init__(self, pair: ReactionPair):
        self.pair = pair
        self.lo = _taylor_about(pair.W_coef, pair.rho_minus)
        self.hi = _taylor_about(pair.W_coef, pair.rho_plus)
        self.lo[:2] = 0.0
        self.hi[:2] = 0.0

    def from_offsets(self, y_lo, y_hi, upper):
        """W at ``rho_minus + y_lo`` (where not upper) or ``rho_plus + y_hi``."""
        out = np.where(upper, np.polynomial.polynomial.polyval(y_hi, self.hi),
                       np.polynomial.polynomial.polyval(y_lo, self.lo))
        return out


def solve_instanton_gk(pair: ReactionPair, Xi: float = 80.0, h: float = 1.0 / 16,
                       ds: float = 1.0 / 256) -> InstantonResult:
    """GK instanton by quadrature of the first integral and monotone inversion.

    With ``u = rho_- + (rho_+ - rho_-) sigma(s)`` (``sigma`` the logistic
    function), ``xi(s) = int_0^s u'(s') / (2 sqrt(W(u(s')))) ds'`` has a
    smooth bounded integrand.  The table ``xi(s)`` is built by spline
    quadrature and inverted onto the output grid by monotone cubic
    interpolation.
    """
    if not pair.validated:
        raise InstantonError("reaction pair is not validated")
    rm, rp = pair.rho_minus, pair.rho_plus
    Dl = rp - rm
    Wp = _WellPotential(pair)
    # asymptotic slope d xi / d s = 1 / sqrt(2 W''(rho))
    w2 = min(2 * Wp.lo[2], 2 * Wp.hi[2])
    smax = Xi * math.sqrt(2 * w2) + 40.0
    s = np.arange(-smax, smax + ds / 2, ds)
    sig = expit(s)
    sigm = expit(-s)
    y_lo = Dl * sig
    y_hi = -Dl * sigm
    upper = s > 0
    W = Wp.from_offsets(y_lo, y_hi, upper)
    if np.any(W <= 0):
        raise InstantonError("W <= 0 inside (rho-, rho+): invalid pair")
    g = Dl * sig * sigm / (2.0 * np.sqrt(W))
    sp = CubicSpline(s, g).antiderivative()
    xs = sp(s) - sp(0.0)
    if not np.all(np.diff(xs) > 0):
        raise InstantonError("quadrature of the first integral is not monotone")
    if xs[0] > -Xi or xs[-1] < Xi:
        raise InstantonError("quadrature table does not cover the grid")
    n = int(round(Xi / h))
    xi = h * np.arange(-n, n + 1)
    s_of_xi = PchipInterpolator(xs, s)(xi)
    s_of_xi[n] = 0.0
    yl = Dl * expit(s_of_xi)
    yh = -Dl * expit(-s_of_xi)
    up = s_of_xi > 0
    u = np.where(up, rp + yh, rm + yl)
    u[n] = pair.midpoint
    Wg = Wp.from_offsets(yl, yh, up)
    d1 = 2.0 * np.sqrt(np.maximum(Wg, 0.0))
    d2 = -2.0 * pair.f(u)
    prof = Profile(h, u, rm, rp, "ubar")
    res = gk_residual(pair, prof)
    out = InstantonResult(prof, res, float("nan"), dict(pair=pair.label, Xi=Xi, h=h, ds=ds),
                          Profile(h, d1, 0.0, 0.0, "ubar'"), Profile(h, d2, 0.0, 0.0, "ubar''"))
    # tail offsets kept for accurate decay fits
    out.meta["tail_offset"] = np.where(up, -yh, yl)
    try:
        out.alpha_or_rate = -check_asymptotics(out).slope
    except InstantonError:
        pass
    return out


def fd_second_derivative(v: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central second difference (interior points, NaN at the two edges)."""
    out = np.full_like(v, np.nan)
    out[2:-2] = (-v[4:] + 16 * v[3:-1] - 30 * v[2:-2] + 16 * v[1:-3] - v[:-4]) / (12 * h * h)
    return out


def fd_first_derivative(v: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central first difference (NaN at the two edges)."""
    out = np.full_like(v, np.nan)
    out[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
    return out


def gk_residual(pair: ReactionPair, u: Profile) -> float:
    """Interior sup of |u''/2 + B(u) - D(u)| with u'' by finite differences."""
    d2 = fd_second_derivative(u.values, u.h)
    r = 0.5 * d2 + pair.f(u.values)
    return float(np.nanmax(np.abs(r)))


def first_integral_defect(pair: ReactionPair, res: InstantonResult) -> float:
    """sup |(u')^2/4 - W(u)| with u' by fourth-order finite differences."""
    u = res.profile.values
    d1 = fd_first_derivative(u, res.h)
    return float(np.nanmax(np.abs(d1 ** 2 / 4.0 - pair.W(u))))
