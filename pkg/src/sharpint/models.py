"""Thermodynamic data of the Ising-Kac model and reaction pairs for Glauber+Kawasaki."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize

from .kernels import Kernel, make_kernel


class ModelError(ValueError):
    """Invalid model parameters."""


# ---------------------------------------------------------------------------
# Curie-Weiss


def curie_weiss_magnetization(beta: float, method: str = "newton", tol: float = 1e-15) -> float:
    """Positive root of m = tanh(beta m).

    Parameters
    ----------
    beta : float
        Inverse temperature, must exceed one.
    method : {"newton", "bisection", "fixed_point"}
        ``newton`` is a bracketed root finder (Brent), ``bisection`` is plain
        bisection on [0, 1] and ``fixed_point`` iterates m <- tanh(beta m)
        from m = 1.
    """
    if not beta > 1.0:
        raise ModelError("no spontaneous magnetization for beta <= 1 (only root is 0)")
    g = lambda m: m - math.tanh(beta * m)
    # g < 0 just above 0 and g(1) > 0
    lo = 0.5 * math.sqrt(max(3.0 * (beta - 1.0) / beta ** 3, 0.0))
    lo = min(lo, 1e-3) if g(lo) >= 0 else lo
    while g(lo) >= 0:
        lo *= 0.5
        if lo < 1e-300:
            raise ModelError("failed to bracket the Curie-Weiss root")
    if method == "newton":
        return optimize.brentq(g, lo, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    if method == "bisection":
        a, b = lo, 1.0
        for _ in range(200):
            mid = 0.5 * (a + b)
            if g(mid) < 0:
                a = mid
            else:
                b = mid
            if b - a < tol:
                break
        return 0.5 * (a + b)
    if method == "fixed_point":
        m = 1.0
        for _ in range(10_000_000):
            new = math.tanh(beta * m)
            if abs(new - m) < tol:
                return new
            m = new
        raise ModelError("fixed-point iteration did not converge")
    raise ModelError(f"unknown method {method!r}")


def entropy(m):
    """i(m) = ((1+m)/2) log((1+m)/2) + ((1-m)/2) log((1-m)/2), continuous at |m| = 1."""
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) > 1.0):
        raise ModelError("magnetization outside [-1, 1]")
    a = 0.5 * (1.0 + m)
    b = 0.5 * (1.0 - m)
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)
        tb = np.where(b > 0, b * np.log(np.where(b > 0, b, 1.0)), 0.0)
    return ta + tb


def free_energy_density(m, beta: float):
    """f_beta(m) = -m^2/2 + entropy(m)/beta."""
    m = np.asarray(m, dtype=float)
    return -0.5 * m * m + entropy(m) / beta


# ---------------------------------------------------------------------------
# Kac model


RATE_FAMILIES = ("constant", "standard_cosh")


@dataclass(frozen=True)
class KacModel:
    """Ising-Kac model: inverse temperature, kernels J and K and a rate family.

    The flip rate at a site is ``a(K*m) exp(-beta J*m sigma)`` with
    ``a = a0`` (``constant``) or ``a(s) = 1/(2 cosh(beta s))`` (``standard_cosh``).
    """

    beta: float = 2.0
    J: Kernel = field(default_factory=lambda: make_kernel("bump", 2))
    K: Kernel = field(default_factory=lambda: make_kernel("annular", 2))
    rate_family: str = "constant"
    a0: float = 0.5

    def __post_init__(self):
        if not self.beta > 1.0:
            raise ModelError("no spontaneous magnetization for beta <= 1 (only root is 0)")
        if self.rate_family not in RATE_FAMILIES:
            raise ModelError(f"unknown rate family {self.rate_family!r}")
        if self.rate_family == "constant" and not self.a0 > 0:
            raise ModelError("constant rate must be positive")
        if self.rate_family == "standard_cosh" and not self.J.vanishes_at_zero:
            raise ModelError("standard_cosh rates require a J kernel with J(0) = 0")
        if self.J.dim != self.K.dim:
            raise ModelError("J and K must live in the same dimension")

    @property
    def dim(self) -> int:
        return self.J.dim

    @property
    def m_beta(self) -> float:
        return _m_beta_cached(self.beta)

    @property
    def p(self) -> float:
        """beta (1 - m_beta^2), the slope of the Curie-Weiss map at m_beta."""
        return self.beta * (1.0 - self.m_beta ** 2)

    def label(self) -> str:
        return (f"beta={self.beta:g},J={self.J.family}/w{self.J.width:g},K={self.K.family}/w{self.K.width:g},"
                f"rate={self.rate_family}" + (f"(a0={self.a0:g})" if self.rate_family == "constant" else ""))


def standard_model(beta: float = 2.0, dim: int = 2) -> KacModel:
    """The model with annular J = K and rate 1/(2 cosh(beta s))."""
    J = make_kernel("annular", dim, force_zero_at_origin=True)
    return KacModel(beta=beta, J=J, K=J, rate_family="standard_cosh")


_MB: dict = {}


def _m_beta_cached(beta: float) -> float:
    if beta not in _MB:
        _MB[beta] = curie_weiss_magnetization(beta)
    return _MB[beta]


def rate_a(model: KacModel, s):
    """Rate function a(s) of the model (vectorized, strictly positive)."""
    s = np.asarray(s, dtype=float)
    if model.rate_family == "constant":
        return np.full_like(s, model.a0)
    return 0.5 / np.cosh(model.beta * s)


def effective_rate(model: KacModel, mbar, Ktilde):
    """a_bar = a(Kt * mbar) for an instanton profile ``mbar`` (a Profile)."""
    from .kernels import convolve_line
    if model.rate_family == "constant":
        return np.full_like(mbar.values, model.a0)
    return rate_a(model, convolve_line(Ktilde, mbar).values)


# ---------------------------------------------------------------------------
# reaction pairs


def _poly(coefs) -> Polynomial:
    return Polynomial(np.asarray([float(c) for c in coefs], dtype=float))


def horner(coefs, x):
    """Evaluate sum c_k x^k by Horner's rule (coefficients in increasing degree)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c in reversed(list(coefs)):
        out = out * x + float(c)
    return out


@dataclass(frozen=True)
class ReactionPair:
    """Birth and death polynomials B, D on [0,1] with derived potential W.

    Coefficients are stored in increasing degree.  ``W`` satisfies
    ``W' = D - B`` with ``W(rho_minus) = 0``.
    """

    B_coef: tuple
    D_coef: tuple
    rho_minus: float | None = None
    rho_zero: float | None = None
    rho_plus: float | None = None
    W_coef: tuple = ()
    validated: bool = False
    issues: tuple = ()
    label: str = ""

    def B(self, x):
        return horner(self.B_coef, x)

    def D(self, x):
        return horner(self.D_coef, x)

    def f(self, x):
        """Reaction term B - D."""
        return self.B(x) - self.D(x)

    def W(self, x):
        return horner(self.W_coef, x)

    def dB(self, x):
        return horner(_poly(self.B_coef).deriv().coef, x)

    def dD(self, x):
        return horner(_poly(self.D_coef).deriv().coef, x)

    @property
    def gamma(self) -> float:
        """min of D' - B' over the two stable roots."""
        vals = [float(self.dD(r) - self.dB(r)) for r in (self.rho_minus, self.rho_plus)]
        return min(vals)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.rho_minus + self.rho_plus)


def _symmetric_cubic(r: Fraction):
    # f(rho) = (rho - 1/2)(r^2 - (rho - 1/2)^2), expanded in powers of rho
    half = Fraction(1, 2)
    # w = rho - 1/2; f = r^2 w - w^3
    # w^3 = rho^3 - 3/2 rho^2 + 3/4 rho - 1/8
    f = [r * r * (-half) + Fraction(1, 8), r * r - Fraction(3, 4), Fraction(3, 2), Fraction(-1)]
    delta = -(half * (r * r - Fraction(1, 4)))  # B(1) = f(1) + delta = 0
    D = [Fraction(0), delta]
    B = [f[0], f[1] + delta, f[2], f[3]]
    return B, D


def make_reaction_pair(kind="symmetric_cubic", r: float = 0.25, B=None, D=None, label: str = "",
                       validate: bool = True) -> ReactionPair:
    """Build and validate a reaction pair.

    Parameters
    ----------
    kind : {"symmetric_cubic", "explicit"}
        The symmetric cubic family uses ``f = (rho-1/2)(r^2-(rho-1/2)^2)``,
        ``D = delta rho`` and ``B = f + D`` with ``delta`` fixed by B(1) = 0.
    r : float
        Half-distance between the stable roots, 0 < r < 1/2.
    B, D : sequences, optional
        Coefficients in increasing degree for ``kind="explicit"``.
    validate : bool
        When False, return an unvalidated pair carrying the list of
        violated conditions instead of raising.
    """
    if kind == "symmetric_cubic":
        if not (0.0 < r < 0.5):
            raise ModelError("symmetric cubic needs 0 < r < 1/2")
        rf = Fraction(r).limit_denominator(10 ** 9)
        Bc, Dc = _symmetric_cubic(rf)
        Bc = tuple(float(c) for c in Bc)
        Dc = tuple(float(c) for c in Dc)
        label = label or f"symmetric_cubic(r={r:g})"
    elif kind == "explicit":
        if B is None or D is None:
            raise ModelError("explicit reaction pair needs B and D coefficients")
        Bc = tuple(float(c) for c in B)
        Dc = tuple(float(c) for c in D)
        label = label or "explicit"
    else:
        raise ModelError(f"unknown reaction pair kind {kind!r}")
    issues, roots, Wc = _check_pair(Bc, Dc)
    if issues:
        if validate:
            raise ModelError("invalid reaction pair: " + "; ".join(issues))
        return ReactionPair(Bc, Dc, validated=False, issues=tuple(issues), label=label)
    return ReactionPair(Bc, Dc, roots[0], roots[1], roots[2], Wc, True, (), label)


def _check_pair(Bc, Dc):
    issues = []
    Bp, Dp = _poly(Bc), _poly(Dc)
    scale = max(1.0, max(abs(c) for c in Bc + Dc))
    if abs(Bp(1.0)) > 1e-12 * scale:
        issues.append(f"B(1) = {Bp(1.0):.3g} != 0")
    if abs(Dp(0.0)) > 1e-12 * scale:
        issues.append(f"D(0) = {Dp(0.0):.3g} != 0")
    x = np.linspace(0.0, 1.0, 20001)[1:-1]
    if np.any(Bp(x) <= 0):
        issues.append("B not strictly positive on (0,1)")
    if np.any(Dp(x) <= 0):
        issues.append("D not strictly positive on (0,1)")
    f = Bp - Dp
    rts = f.roots()
    rts = np.sort(np.real(rts[(np.abs(np.imag(rts)) < 1e-10) & (np.real(rts) > 0) & (np.real(rts) < 1)]))
    if len(rts) != 3:
        issues.append(f"B - D has {len(rts)} roots in (0,1), need 3")
        return issues, None, ()
    df = f.deriv()
    if not (df(rts[0]) < 0 < df(rts[1]) and df(rts[2]) < 0):
        issues.append("roots of B - D are not stable/unstable/stable")
    W = -f.integ()
    W = W - W(rts[0])
    if abs(W(rts[2]) - W(rts[0])) > 1e-12 * scale:
        issues.append(f"wells not degenerate: W(rho+) - W(rho-) = {W(rts[2]) - W(rts[0]):.3g}")
    inner = np.linspace(rts[0], rts[2], 2001)[1:-1]
    if np.any(W(inner) <= 0):
        issues.append("W not positive between the wells")
    return issues, tuple(float(v) for v in rts), tuple(float(c) for c in W.coef)
