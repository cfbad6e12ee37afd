"""Linearized operators and transport coefficients (surface tension, mobility)."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
import math

import numpy as np
from scipy import linalg

from .instanton import InstantonResult, solve_decay_rate, solve_instanton_kac, solve_instanton_gk
from .kernels import (Profile, convolve_zero_tails, reduce_1d, second_moment_kernel,
                      toeplitz_matrix)
from .models import KacModel, ReactionPair, effective_rate, free_energy_density


class CoefficientError(RuntimeError):
    """Inconsistent inputs for a coefficient computation."""


@dataclass
class LinearOperatorDisc:
    """Dense discretization of a linear operator with its weight.

    ``matrix @ v`` applies the operator to grid values ``v``; inner products
    are ``h * sum(nu * a * b)``.
    """

    h: float
    matrix: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    name: str = ""

    def apply(self, v):
        return self.matrix @ v

    def inner(self, a, b) -> float:
        return float(self.h * np.sum(self.nu * a * b))

    def norm(self, a) -> float:
        return math.sqrt(self.inner(a, a))

    def symmetric_form(self) -> np.ndarray:
        """The matrix of the bilinear form (nu L), symmetric by construction."""
        return self.nu[:, None] * self.matrix

    def symmetry_defect(self, a, b) -> float:
        return abs(self.inner(a, self.apply(b)) - self.inner(self.apply(a), b))


@dataclass
class CoefficientSet:
    """Transport data of an interface model.

    Kac fields: m_beta, alpha, tau, tau_alt, N, mu, theta.  GK fields:
    mu_gk, tau_gk.  ``theta`` is stored as ``mu * tau``.
    """

    m_beta: float = float("nan")
    alpha: float = float("nan")
    tau: float = float("nan")
    tau_alt: float = float("nan")
    N: float = float("nan")
    mu: float = float("nan")
    theta: float = float("nan")
    mu_gk: float = float("nan")
    tau_gk: float = float("nan")
    provenance: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        d = asdict(self)
        d.pop("provenance")
        return d


def _check_converged(inst: InstantonResult, tol: float = 1e-7):
    if not inst.residual_sup < tol:
        raise CoefficientError(f"instanton not converged (residual {inst.residual_sup:.3g})")


# ---------------------------------------------------------------------------
# Kac


def surface_tension_kac(model: KacModel, inst: InstantonResult):
    """Surface tension by the second-moment formula and by the free energy.

    Returns
    -------
    tau : float
        ``int m' (M2 * m')``.
    tau_alt : float
        ``int [f(m) - f(m_beta)] + (1/4) int int Jt(x-y) (m(x)-m(y))^2``.
    """
    _check_converged(inst)
    m = inst.profile
    d1 = inst.d1.values
    M2 = second_moment_kernel(model.J, m.h)
    tau = float(m.h * np.sum(d1 * convolve_zero_tails(M2, d1)))
    tau_alt = free_energy_excess_1d(model, m, inst.Jt)
    return tau, tau_alt


def free_energy_excess_1d(model: KacModel, m: Profile, Jt) -> float:
    """Planar excess free energy of a profile (the second route to tau)."""
    mb = model.m_beta
    v = m.values
    local = m.h * float(np.sum(free_energy_density(v, model.beta) - free_energy_density(mb, model.beta)))
    K = Jt.half
    pad = m.padded(K)
    n = len(v)
    inter = 0.0
    for k in range(1, K + 1):
        # pairs at separation k h, both orders, grid cells plus the first K beyond each edge
        diff = pad[k:] - pad[:-k]
        inter += 2.0 * Jt.values[K + k] * float(np.sum(diff * diff))
    inter *= 0.25 * m.h * m.h
    del n
    return local + inter


def mobility_kac(model: KacModel, inst: InstantonResult, abar: np.ndarray | None = None):
    """N = [int (m')^2 / (2 a_bar sqrt(1-m^2))]^-1 and mu = N beta."""
    _check_converged(inst)
    m = inst.profile
    if abar is None:
        abar = effective_rate(model, m, reduce_1d(model.K, m.h, kind="Ktilde"))
    if np.any(abar <= 0):
        raise CoefficientError("effective rate vanishes on the grid")
    w = 1.0 / (2.0 * abar * np.sqrt(1.0 - m.values ** 2))
    N = 1.0 / (m.h * float(np.sum(inst.d1.values ** 2 * w)))
    return N, N * model.beta


def kac_weight(model: KacModel, inst: InstantonResult, abar=None):
    m = inst.profile
    if abar is None:
        abar = effective_rate(model, m, reduce_1d(model.K, m.h, kind="Ktilde"))
    return abar, 1.0 / (2.0 * abar * np.sqrt(1.0 - m.values ** 2))


def assemble_L_kac(model: KacModel, inst: InstantonResult, abar=None) -> LinearOperatorDisc:
    """L psi = (2 a_bar / sqrt(1-m^2)) (-psi + (1-m^2) beta Jt*psi), zero extension.

    The weight is ``nu = 1/(2 a_bar sqrt(1-m^2))``; ``nu L`` equals
    ``-diag(1/(1-m^2)) + beta T`` with ``T`` the symmetric Toeplitz matrix.
    """
    m = inst.profile.values
    abar, nu = kac_weight(model, inst, abar)
    one = 1.0 - m ** 2
    T = toeplitz_matrix(inst.Jt, len(m))
    S = model.beta * T
    S[np.diag_indices_from(S)] -= 1.0 / one
    A = S / nu[:, None]
    return LinearOperatorDisc(inst.h, A, nu, "L_kac")


def spectral_gap_kac(L: LinearOperatorDisc, k: int = 3) -> np.ndarray:
    """Smallest eigenvalues of -L in the nu-inner product (generalized problem)."""
    S = -L.symmetric_form()
    S = 0.5 * (S + S.T)
    w = linalg.eigh(S, np.diag(L.nu), eigvals_only=True, subset_by_index=[0, k - 1])
    return w


def compute_coefficients_kac(model: KacModel, inst: InstantonResult | None = None,
                             Xi: float = 20.0, h: float = 1.0 / 64) -> CoefficientSet:
    """All scalar Kac coefficients, with theta = mu * tau."""
    if inst is None:
        inst = solve_instanton_kac(model, Xi=Xi, h=h)
    tau, tau_alt = surface_tension_kac(model, inst)
    N, mu = mobility_kac(model, inst)
    alpha = solve_decay_rate(model)
    return CoefficientSet(m_beta=model.m_beta, alpha=alpha, tau=tau, tau_alt=tau_alt, N=N, mu=mu,
                          theta=mu * tau,
                          provenance=dict(model=model.label(), Xi=inst.profile.cutoff, h=inst.h))


# ---------------------------------------------------------------------------
# Glauber + Kawasaki


def assemble_L_gk(pair: ReactionPair, inst: InstantonResult) -> LinearOperatorDisc:
    """Flux-form discretization of (u(1-u) psi')' - (B(u)+D(u)) psi, Dirichlet at +-Xi."""
    u = inst.profile
    if np.any(u.values <= 0) or np.any(u.values >= 1):
        raise CoefficientError("instanton leaves (0,1)")
    h = u.h
    pad = u.padded(1)
    mid = 0.5 * (pad[1:] + pad[:-1])
    a = mid * (1.0 - mid)  # n+1 face values
    n = len(u.values)
    A = np.zeros((n, n))
    idx = np.arange(n)
    A[idx, idx] = -(a[:-1] + a[1:]) / h ** 2 - (pair.B(u.values) + pair.D(u.values))
    A[idx[:-1], idx[:-1] + 1] = a[1:-1] / h ** 2
    A[idx[1:], idx[1:] - 1] = a[1:-1] / h ** 2
    return LinearOperatorDisc(h, A, np.ones(n), "L_gk")


def mobility_gk(inst: InstantonResult, L: LinearOperatorDisc):
    """mu = <u', (-L) u'> / (2 |u'|^4) and tau = 1/(2 mu).

    This normalization makes the optimal curvature constant
    ``C* = |u'|^4 / (2 <u',(-L)u'>)`` equal ``1/(4 mu)``, so the sharp-interface
    action is ``(1/(4 mu)) int int (v - kappa/2)^2``.
    """
    d1 = inst.d1.values
    num = -L.inner(d1, L.apply(d1))
    nrm = L.inner(d1, d1)
    mu = num / (2.0 * nrm ** 2)
    return mu, 1.0 / (2.0 * mu)


def compute_coefficients_gk(pair: ReactionPair, inst: InstantonResult | None = None,
                            Xi: float = 80.0, h: float = 1.0 / 16) -> CoefficientSet:
    if inst is None:
        inst = solve_instanton_gk(pair, Xi=Xi, h=h)
    L = assemble_L_gk(pair, inst)
    mu, tau = mobility_gk(inst, L)
    return CoefficientSet(mu_gk=mu, tau_gk=tau, mu=mu, tau=tau, theta=0.5,
                          provenance=dict(pair=pair.label, Xi=inst.profile.cutoff, h=inst.h))
