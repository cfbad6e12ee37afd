"""First-order interface correctors.

Kac: ``L(m' Q) = H_hat`` with ``Q(0) = 0``, where ``H_hat`` is the
nu-orthogonal part of ``H = beta 2 a_bar sqrt(1-m^2) (M2 * m')``.

GK: optimal ``psi = u' - (|u'|^2/<u',(-L)u'>) (-L) u'``, the explicit double
integral for ``Q`` and the profile ``h`` solving ``L h = -u' + u''Q' + u'Q''/2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.interpolate import CubicSpline

from .coefficients import LinearOperatorDisc, kac_weight
from .instanton import InstantonResult, fit_log_slope
from .kernels import Profile, second_moment_kernel
from .models import KacModel


class CorrectorError(RuntimeError):
    """Constraint violation or failed solve."""


@dataclass
class CorrectorBundle:
    """Corrector profiles and diagnostics (fields unused by a model stay None)."""

    f: Profile | None = None
    H: Profile | None = None
    H_hat: Profile | None = None
    Q_bar: Profile | None = None
    psi_bar: Profile | None = None
    h: Profile | None = None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Kac


def build_H_hat(model: KacModel, inst: InstantonResult, theta: float, abar=None, rtol: float = 1e-6):
    """f = M2 * m', H = beta 2 a_bar sqrt(1-m^2) f and H_hat = H - theta m'.

    Raises when the projection ``<m',H>_nu / <m',m'>_nu`` differs from
    ``theta`` by more than ``rtol`` (relative).
    """
    m = inst.profile
    d1 = inst.d1.values
    abar, nu = kac_weight(model, inst, abar)
    M2 = second_moment_kernel(model.J, m.h)
    # direct double sum, independent of the convolution helper
    K = M2.half
    n = len(d1)
    fv = np.zeros(n)
    for k in range(-K, K + 1):
        w = M2.values[k + K]
        if k >= 0:
            fv[k:] += w * d1[: n - k]
        else:
            fv[:k] += w * d1[-k:]
    fv *= m.h
    root = np.sqrt(1.0 - m.values ** 2)
    H = model.beta * 2.0 * abar * root * fv
    proj = float(np.sum(nu * d1 * H) / np.sum(nu * d1 * d1))
    if abs(proj - theta) > rtol * abs(theta):
        raise CorrectorError(f"projection identity violated: {proj:.12g} vs theta {theta:.12g}")
    Hh = H - theta * d1
    mk = lambda v, s: Profile(m.h, v, 0.0, 0.0, s)
    return mk(fv, "f"), mk(H, "H"), mk(Hh, "H_hat"), proj


def deflated_solve(L: LinearOperatorDisc, rhs: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Solve ``L psi = rhs`` on the nu-orthogonal complement of ``direction``.

    The bordered system ``[[nu L, nu e], [(nu e)^T, 0]]`` is symmetric and
    nonsingular when ``e`` spans the (near) kernel of ``L``.
    """
    S = L.symmetric_form()
    S = 0.5 * (S + S.T)
    n = S.shape[0]
    c = L.nu * direction
    A = np.empty((n + 1, n + 1))
    A[:n, :n] = S
    A[:n, n] = c
    A[n, :n] = c
    A[n, n] = 0.0
    b = np.concatenate([L.nu * rhs, [0.0]])
    sol = linalg.solve(A, b, assume_a="sym")
    return sol[:n]


def solve_corrector_kac(L: LinearOperatorDisc, inst: InstantonResult, H_hat: Profile,
                        cut: float = 1e-10) -> Profile:
    """Q with L(m' Q) = H_hat and Q(0) = 0.

    The division by m' is carried out where m' exceeds ``cut * max m'``;
    outside that core Q is continued linearly with the slope at the core edge.
    """
    d1 = inst.d1.values
    rhs = H_hat.values
    if not np.any(rhs):
        return Profile(H_hat.h, np.zeros_like(rhs), 0.0, 0.0, "Q_bar")
    psi = deflated_solve(L, rhs, d1)
    n0 = len(d1) // 2
    psi = psi - (psi[n0] / d1[n0]) * d1  # Q(0) = 0
    core = d1 > cut * d1.max()
    idx = np.nonzero(core)[0]
    lo, hi = idx[0], idx[-1]
    if not np.all(core[lo:hi + 1]):
        raise CorrectorError("instanton slope is not single-humped")
    Q = np.zeros_like(d1)
    Q[lo:hi + 1] = psi[lo:hi + 1] / d1[lo:hi + 1]
    xi = inst.xi
    h = inst.h
    # linear continuation using the slope over the last few core cells
    k = 8
    sl = (Q[hi] - Q[hi - k]) / (k * h)
    Q[hi + 1:] = Q[hi] + sl * (xi[hi + 1:] - xi[hi])
    sl = (Q[lo + k] - Q[lo]) / (k * h)
    Q[:lo] = Q[lo] + sl * (xi[:lo] - xi[lo])
    out = Profile(h, Q, 0.0, 0.0, "Q_bar")
    return out


def corrector_growth(Q: Profile, window: float | None = None) -> float:
    """sup (|Q| + |Q'|)/(1+|xi|) over ``|xi| <= window`` (default Xi/2)."""
    xi = Q.xi
    W = Q.cutoff / 2 if window is None else window
    dQ = np.gradient(Q.values, Q.h)
    sel = np.abs(xi) <= W
    return float(np.max((np.abs(Q.values[sel]) + np.abs(dQ[sel])) / (1 + np.abs(xi[sel]))))


def kac_corrector_bundle(model: KacModel, inst: InstantonResult, L: LinearOperatorDisc, theta: float,
                         abar=None) -> CorrectorBundle:
    """Full Kac corrector pipeline with residual diagnostics."""
    f, H, Hh, proj = build_H_hat(model, inst, theta, abar)
    Q = solve_corrector_kac(L, inst, Hh)
    d1 = inst.d1.values
    r = L.apply(d1 * Q.values) - Hh.values
    diag = dict(residual=L.norm(r), orthogonality=L.inner(d1, Hh.values), projection=proj,
                theta=theta, growth=corrector_growth(Q))
    return CorrectorBundle(f=f, H=H, H_hat=Hh, Q_bar=Q, diagnostics=diag)


def quadratic_cost_kac(L: LinearOperatorDisc, inst: InstantonResult, H: Profile, Q: np.ndarray,
                       beta: float) -> float:
    """(1/(4 beta)) int nu [L(m'Q) - H_hat]^2 style residual cost.

    Returns ``(1/(4 beta)) <L(m'Q) - H_hat, L(m'Q) - H_hat>_nu``; it is
    minimal (zero) for the solved corrector and grows for perturbations.
    """
    r = L.apply(inst.d1.values * Q) - H.values
    return L.inner(r, r) / (4.0 * beta)


# ---------------------------------------------------------------------------
# Glauber + Kawasaki


def optimal_psi_gk(inst: InstantonResult, L: LinearOperatorDisc, mu_gk: float | None = None):
    """Optimal psi orthogonal to u' and the constant C* = (1/2)<u'-psi, (-L)^-1 (u'-psi)>.

    The constrained minimizer has ``u' - psi`` parallel to ``(-L) u'``, so
    ``psi = u' - k (-L) u'`` with ``k = |u'|^2 / <u',(-L)u'>``.
    """
    d1 = inst.d1.values
    Ld1 = L.apply(d1)
    num = -L.inner(d1, Ld1)
    nrm = L.inner(d1, d1)
    psi = d1 + (nrm / num) * Ld1
    g = d1 - psi
    sol = linalg.solve(-L.matrix, g, assume_a="sym")
    C = 0.5 * L.inner(g, sol)
    diag = dict(orthogonality=L.inner(d1, psi), C_star=C)
    if mu_gk is not None:
        diag["C_star_times_4mu"] = C * 4.0 * mu_gk
    return Profile(inst.h, psi, 0.0, 0.0, "psi_bar"), diag


def cost_constant_gk(inst: InstantonResult, L: LinearOperatorDisc, Q: Profile) -> float:
    """C_Q = (1/2) <g, (-L)^-1 g> with g = u' - u''Q' - u'Q''/2."""
    d1 = inst.d1.values
    d2 = inst.d2.values
    sp = CubicSpline(Q.xi, Q.values)
    g = d1 - d2 * sp(Q.xi, 1) - 0.5 * d1 * sp(Q.xi, 2)
    sol = linalg.solve(-L.matrix, g, assume_a="sym")
    return 0.5 * L.inner(g, sol)


def solve_corrector_gk(inst: InstantonResult, psi: Profile, cut: float = 1e-12) -> Profile:
    """Q(xi) = 2 int_0^xi (1/u'^2) int_{-inf}^{xi'} u' psi, with Q(0) = 0.

    Where ``u'`` falls below ``cut * max u'`` the slope ``Q'`` is frozen at its
    last reliable value (linear continuation of Q).
    """
    d1 = inst.d1.values
    xi = inst.xi
    if not np.any(psi.values):
        return Profile(psi.h, np.zeros_like(d1), 0.0, 0.0, "Q_bar")
    # cumulate from the nearer tail so G keeps full relative accuracy where u' is tiny
    inner = CubicSpline(xi, d1 * psi.values).antiderivative()
    I = inner(xi)
    total = I[-1] - I[0]
    scale = h_scale = float(np.sum(np.abs(d1 * psi.values)) * psi.h)
    if abs(total) > 1e-6 * max(h_scale, 1e-300):
        raise CorrectorError(f"inner integral does not decay (relative tail {abs(total) / scale:.2g}); "
                             "psi not orthogonal to u'")
    G = np.where(xi <= 0, 2.0 * (I - I[0]), -2.0 * (I[-1] - I))
    ok = d1 > cut * d1.max()
    dQ = np.zeros_like(d1)
    dQ[ok] = G[ok] / d1[ok] ** 2
    idx = np.nonzero(ok)[0]
    lo, hi = idx[0], idx[-1]
    dQ[hi + 1:] = dQ[hi]
    dQ[:lo] = dQ[lo]
    Qs = CubicSpline(xi, dQ).antiderivative()
    Q = Qs(xi) - Qs(0.0)
    return Profile(psi.h, Q, 0.0, 0.0, "Q_bar")


def gk_corrector_operator(inst: InstantonResult, Q: Profile) -> np.ndarray:
    """u''Q' + u'Q''/2 with spline derivatives of Q."""
    sp = CubicSpline(Q.xi, Q.values)
    return inst.d2.values * sp(Q.xi, 1) + 0.5 * inst.d1.values * sp(Q.xi, 2)


def solve_h_gk(inst: InstantonResult, Q: Profile, L: LinearOperatorDisc):
    """Solve L h = -u' + u''Q' + u'Q''/2 and report residual and decay."""
    rhs = -inst.d1.values + gk_corrector_operator(inst, Q)
    hv = linalg.solve(L.matrix, rhs)
    res = float(np.max(np.abs(L.apply(hv) - rhs)))
    xi = inst.xi
    W = inst.profile.cutoff / 2
    i = int(np.argmin(np.abs(xi - W)))
    decay = abs(hv[i]) / np.max(np.abs(hv))
    sel = (xi > W / 2) & (xi < W) & (np.abs(hv) > 1e-300)
    rate = -fit_log_slope(xi[sel], np.abs(hv[sel])) if sel.sum() > 4 else float("nan")
    return Profile(inst.h, hv, 0.0, 0.0, "h"), dict(residual=res, decay_ratio=decay, decay_rate=rate)


def gk_corrector_bundle(inst: InstantonResult, L: LinearOperatorDisc, mu_gk: float) -> CorrectorBundle:
    psi, d = optimal_psi_gk(inst, L, mu_gk)
    Q = solve_corrector_gk(inst, psi)
    hprof, dh = solve_h_gk(inst, Q, L)
    xi = inst.xi
    core = np.abs(xi) <= 20.0
    res_Q = float(np.max(np.abs(gk_corrector_operator(inst, Q) - psi.values)[core]))
    d.update(dh)
    d["Q_residual"] = res_Q
    d["Q_parity"] = float(np.max(np.abs(Q.values - Q.values[::-1])))
    return CorrectorBundle(psi_bar=psi, Q_bar=Q, h=hprof, diagnostics=d)
