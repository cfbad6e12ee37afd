"""Radial interaction kernels, their one-dimensional reductions and convolutions.

A kernel is a smooth non-negative radial profile ``j(s)`` supported in
``[0, width/2)`` with ``width <= 1``.  Two families are built in:

``bump``
    ``j(s) = A exp(-1/(1-(2u)^2))`` with ``u = s/width``.
``annular``
    ``j(s) = A u^2 exp(-1/(1-(2u)^2))``, which vanishes at the origin.

Reductions to one variable integrate out the transverse directions,

    Jt(xi) = int_{R^{d-1}} j(sqrt(xi^2 + |eta|^2)) d eta,
    M2(xi) = int_{R^{d-1}} j(sqrt(xi^2 + |eta|^2)) eta_1^2 / 2 d eta,

and are sampled on uniform symmetric grids.  Discrete stencils are
renormalized to the exact continuous mass so that constants are preserved
exactly by every discrete convolution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import fft as sfft
from scipy import integrate, sparse
from scipy.special import gamma as _gamma

FAMILIES = ("bump", "annular")


class KernelError(ValueError):
    """Invalid kernel construction or unresolved convolution."""


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere S^k in R^(k+1) (S^0 has area 2)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / _gamma((k + 1) / 2.0)


def _bump(u):
    u = np.asarray(u, dtype=float)
    x = 1.0 - 4.0 * u * u
    out = np.zeros_like(x)
    inside = x > 0
    out[inside] = np.exp(-1.0 / x[inside])
    return out


def _bump_dlog_over_u(u):
    # (d/du log bump)/u = -8/(1-4u^2)^2 inside the support
    u = np.asarray(u, dtype=float)
    x = 1.0 - 4.0 * u * u
    out = np.zeros_like(x)
    inside = x > 0
    out[inside] = -8.0 / x[inside] ** 2
    return out


@dataclass(frozen=True)
class Kernel:
    """Radial kernel j on R^dim.

    Attributes
    ----------
    family : str
        ``"bump"`` or ``"annular"``.
    dim : int
        Spatial dimension.
    amplitude : float
        Prefactor A of the shape function.
    width : float
        Support diameter; the profile vanishes for ``s >= width/2``.
    normalized : bool
        True when the d-dimensional integral equals one.
    """

    family: str
    dim: int
    amplitude: float
    width: float = 1.0
    normalized: bool = False

    @property
    def vanishes_at_zero(self) -> bool:
        return self.family == "annular"

    @property
    def radius(self) -> float:
        return 0.5 * self.width

    def shape(self, u):
        if self.family == "bump":
            return _bump(u)
        u = np.asarray(u, dtype=float)
        return u * u * _bump(u)

    def profile(self, s):
        """Evaluate j(s) for s >= 0 (vectorized)."""
        s = np.abs(np.asarray(s, dtype=float))
        return self.amplitude * self.shape(s / self.width)

    def dprofile_over_s(self, s):
        """j'(s)/s, finite at s = 0."""
        u = np.abs(np.asarray(s, dtype=float)) / self.width
        b = _bump(u)
        g = _bump_dlog_over_u(u)
        if self.family == "bump":
            val = b * g
        else:
            val = 2.0 * b + u * u * b * g
        return self.amplitude * val / self.width ** 2

    def __call__(self, z):
        """Evaluate J(z) = j(|z|) for points z of shape (..., dim)."""
        z = np.asarray(z, dtype=float)
        if self.dim == 1 and (z.ndim == 0 or z.shape[-1] != 1):
            return self.profile(z)
        return self.profile(np.sqrt(np.sum(z * z, axis=-1)))

    def mass(self) -> float:
        """d-dimensional integral of j(|z|)."""
        return self.amplitude * _shape_mass(self.family, self.dim) * self.width ** self.dim

    def scaled(self, factor: float) -> "Kernel":
        """Kernel with the same family and a support scaled by ``factor``."""
        w = self.width * factor
        if w > 1.0 + 1e-15:
            raise KernelError("support must stay inside [0, 1/2]")
        return make_kernel(self.family, self.dim, normalize=self.normalized,
                           amplitude=self.amplitude, width=w)


@lru_cache(maxsize=None)
def _shape_mass(family: str, dim: int) -> float:
    # radial integral S_{d-1} int_0^{1/2} shape(u) u^{d-1} du (unit width)
    k = Kernel(family, dim, 1.0)
    val, _ = integrate.quad(lambda u: float(k.shape(u)) * u ** (dim - 1), 0.0, 0.5,
                            epsabs=1e-17, epsrel=1e-13, limit=200)
    return sphere_area(dim - 1) * val


def make_kernel(family: str = "bump", dim: int = 2, normalize: bool = True,
                force_zero_at_origin: bool = False, amplitude: float = 1.0,
                width: float = 1.0) -> Kernel:
    """Build a radial kernel.

    Parameters
    ----------
    family : {"bump", "annular"}
        Built-in family.
    dim : int
        Spatial dimension, at least one.
    normalize : bool
        Rescale the amplitude so that the d-dimensional integral is one.
    force_zero_at_origin : bool
        Require ``j(0) = 0``; only the annular family supports it.
    amplitude : float
        Prefactor used when ``normalize`` is False.  Zero is rejected when
        normalizing since the shape cannot be normalized.
    width : float
        Support diameter in (0, 1].

    Returns
    -------
    Kernel
    """
    if family not in FAMILIES:
        raise KernelError(f"unknown kernel family {family!r}")
    if int(dim) != dim or dim < 1:
        raise KernelError("dimension must be a positive integer")
    if not (0.0 < width <= 1.0):
        raise KernelError("width must lie in (0, 1]")
    if force_zero_at_origin and family != "annular":
        raise KernelError(f"family {family!r} has profile(0) != 0; use 'annular'")
    if amplitude == 0.0 or not np.isfinite(amplitude) or amplitude < 0.0:
        raise KernelError("non-normalizable shape (zero or invalid amplitude)")
    k = Kernel(family, int(dim), float(amplitude), float(width), False)
    if normalize:
        k = Kernel(family, int(dim), float(amplitude) / k.mass(), float(width), True)
    return k


# ---------------------------------------------------------------------------
# one-dimensional reductions


@dataclass(frozen=True)
class Kernel1D:
    """Samples of a reduced kernel on the grid ``k*h``, ``|k| <= half``.

    ``values`` holds the samples, renormalized (for ``Jtilde``/``Ktilde``) so
    that ``h*sum(values)`` equals the continuous integral.
    """

    kind: str
    h: float
    values: np.ndarray = field(repr=False)
    source: Kernel | None = None

    @property
    def half(self) -> int:
        return (len(self.values) - 1) // 2

    @property
    def grid(self) -> np.ndarray:
        return self.h * np.arange(-self.half, self.half + 1)

    @property
    def mass(self) -> float:
        return float(self.h * self.values.sum())

    def __hash__(self):
        return hash((self.kind, self.h, self.values.tobytes()))

    def __eq__(self, other):
        return (isinstance(other, Kernel1D) and self.kind == other.kind and self.h == other.h
                and np.array_equal(self.values, other.values))


def _line_weights(width: float, n: int) -> tuple[np.ndarray, float]:
    eta = np.linspace(-0.5 * width, 0.5 * width, n + 1)
    return eta, eta[1] - eta[0]


def reduced_values(kernel: Kernel, xi, kind: str = "Jtilde", tol: float = 1e-13):
    """Evaluate a one-dimensional reduction at arbitrary points.

    ``kind`` is one of ``Jtilde``, ``M2`` or ``dJtilde`` (the derivative of
    Jtilde).  In d = 2 the transverse integral is a trapezoid rule on the
    full support, refined until successive values agree to ``tol``; the
    integrand vanishes to all orders at the support edge so convergence is
    rapid.  In d >= 3 the radial transverse integral uses adaptive quadrature.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    d = kernel.dim
    if kind == "M2" and d == 1:
        raise KernelError("second-moment reduction undefined in d=1")
    if d == 1:
        if kind == "Jtilde":
            return kernel.profile(xi)
        if kind == "dJtilde":
            return xi * kernel.dprofile_over_s(xi)
        raise KernelError(f"unknown reduction {kind!r}")
    if d == 2:
        scale = max(float(np.max(kernel.profile(0.0))), kernel.amplitude * 1e-3)
        prev = None
        for n in (64, 128, 256, 512, 1024, 2048):
            eta, de = _line_weights(kernel.width, n)
            s = np.sqrt(xi[:, None] ** 2 + eta[None, :] ** 2)
            if kind == "Jtilde":
                g = kernel.profile(s)
            elif kind == "M2":
                g = kernel.profile(s) * eta[None, :] ** 2 / 2.0
            elif kind == "dJtilde":
                g = kernel.dprofile_over_s(s) * xi[:, None]
            else:
                raise KernelError(f"unknown reduction {kind!r}")
            cur = de * g.sum(axis=1)
            if prev is not None and np.max(np.abs(cur - prev)) <= tol * scale:
                return cur
            prev = cur
        raise KernelError("kernel reduction did not converge under refinement")
    # d >= 3: S_{d-2} int_0^R rho^{d-2} g(sqrt(xi^2+rho^2)) d rho
    out = np.empty_like(xi)
    area = sphere_area(d - 2)
    R = kernel.radius
    for i, x in enumerate(xi):
        if abs(x) >= R:
            out[i] = 0.0
            continue
        rmax = math.sqrt(R * R - x * x)
        if kind == "Jtilde":
            f = lambda r: r ** (d - 2) * float(kernel.profile(math.hypot(x, r)))
            c = area
        elif kind == "M2":
            f = lambda r: r ** d * float(kernel.profile(math.hypot(x, r)))
            c = area / (2.0 * (d - 1))
        else:
            f = lambda r: r ** (d - 2) * x * float(kernel.dprofile_over_s(math.hypot(x, r)))
            c = area
        out[i] = c * integrate.quad(f, 0.0, rmax, epsabs=1e-17, epsrel=1e-13, limit=200)[0]
    return out


def _sample(kernel: Kernel, h: float, kind: str) -> Kernel1D:
    half = int(math.floor(kernel.radius / h + 1e-12))
    xi = h * np.arange(0, half + 1)
    v = reduced_values(kernel, xi, kind)
    if kind == "dJtilde":
        full = np.concatenate([-v[:0:-1], v])
    else:
        full = np.concatenate([v[:0:-1], v])
    return Kernel1D(kind, float(h), full, kernel)


def reduce_1d(kernel: Kernel, h: float = 1.0 / 64, kind: str = "Jtilde",
              renormalize: bool = True) -> Kernel1D:
    """Sample the reduction Jt of ``kernel`` on a grid of spacing ``h``.

    With ``renormalize`` the samples are rescaled so the discrete mass
    equals the continuous one (constants become exact discrete fixed points).
    """
    k1 = _sample(kernel, h, "Jtilde")
    if renormalize:
        target = kernel.mass()
        vals = k1.values * (target / k1.mass)
        k1 = Kernel1D(kind, k1.h, vals, kernel)
    elif kind != "Jtilde":
        k1 = Kernel1D(kind, k1.h, k1.values, kernel)
    return k1


def reduce_1d_derivative(kernel: Kernel, h: float = 1.0 / 64) -> Kernel1D:
    """Samples of Jt' (odd), used for spectrally accurate instanton slopes."""
    return _sample(kernel, h, "dJtilde")


def second_moment_kernel(kernel: Kernel, h: float = 1.0 / 64) -> Kernel1D:
    """Samples of M2(xi); error in d = 1."""
    if kernel.dim == 1:
        raise KernelError("second-moment reduction undefined in d=1")
    return _sample(kernel, h, "M2")


# ---------------------------------------------------------------------------
# profiles and line convolution


@dataclass
class Profile:
    """Function of one variable on the grid ``h*k``, ``|k| <= n``.

    ``left_limit`` and ``right_limit`` are used beyond the grid.
    """

    h: float
    values: np.ndarray
    left_limit: float = 0.0
    right_limit: float = 0.0
    name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) % 2 == 0:
            raise ValueError("profile needs an odd number of samples on a symmetric grid")

    @property
    def n(self) -> int:
        return (len(self.values) - 1) // 2

    @property
    def cutoff(self) -> float:
        return self.n * self.h

    @property
    def xi(self) -> np.ndarray:
        return self.h * np.arange(-self.n, self.n + 1)

    def with_values(self, values, left=None, right=None, name=None) -> "Profile":
        return Profile(self.h, values, self.left_limit if left is None else left,
                       self.right_limit if right is None else right,
                       self.name if name is None else name)

    def padded(self, pad: int) -> np.ndarray:
        return np.concatenate([np.full(pad, self.left_limit), self.values,
                               np.full(pad, self.right_limit)])

    def reflect(self) -> "Profile":
        """The profile xi -> p(-xi)."""
        return Profile(self.h, self.values[::-1].copy(), self.right_limit, self.left_limit, self.name)

    def integral(self, weights=None) -> float:
        v = self.values if weights is None else self.values * weights
        return float(self.h * v.sum())

    def __call__(self, x):
        """Linear interpolation with constant tails (used for plotting/IO only)."""
        return np.interp(x, self.xi, self.values, left=self.left_limit, right=self.right_limit)


def convolve_line(k: Kernel1D, p: Profile) -> Profile:
    """Trapezoidal convolution ``h * sum_j k(x_i - x_j) p(x_j)`` on the grid of ``p``.

    Values beyond the grid are taken from the profile limits, so constant
    asymptotes are handled exactly.
    """
    if not math.isclose(k.h, p.h, rel_tol=1e-12):
        raise KernelError(f"incompatible grids: kernel h={k.h}, profile h={p.h}")
    m = k.half
    padded = p.padded(m)
    out = k.h * np.convolve(padded, k.values, mode="valid")
    mass = k.h * k.values.sum()
    return Profile(p.h, out, p.left_limit * mass, p.right_limit * mass, p.name)


def convolve_zero_tails(k: Kernel1D, v: np.ndarray) -> np.ndarray:
    """Grid convolution of a decaying array (zero extension)."""
    return k.h * np.convolve(v, k.values, mode="same")


def toeplitz_matrix(k: Kernel1D, n: int) -> np.ndarray:
    """Dense matrix of ``v -> h*sum_j k(i-j) v_j`` for ``n`` points, zero extension."""
    m = k.half
    col = np.zeros(n)
    top = min(m, n - 1)
    col[: top + 1] = k.values[m: m + top + 1]
    from scipy.linalg import toeplitz
    return k.h * toeplitz(col)


# ---------------------------------------------------------------------------
# torus convolution


def rescaled_stencil(kernel: Kernel, eps: float, n: int, dim: int | None = None) -> np.ndarray:
    """Periodic samples of J_eps(z) = eps^-d J(z/eps) on the grid of the unit torus.

    The samples are rescaled so that ``h^d * sum = mass(kernel)`` exactly.
    """
    d = kernel.dim if dim is None else dim
    h = 1.0 / n
    idx = np.arange(n)
    off = np.minimum(idx, n - idx) * h
    if d == 1:
        r = off
    elif d == 2:
        r = np.sqrt(off[:, None] ** 2 + off[None, :] ** 2)
    else:
        raise KernelError("torus convolution implemented for d = 1, 2")
    vals = kernel.profile(r / eps) / eps ** d
    s = vals.sum() * h ** d
    if s <= 0:
        raise KernelError("rescaled kernel not resolved on the grid")
    return vals * (kernel.mass() / s)


@lru_cache(maxsize=32)
def _stencil_fft(kernel: Kernel, eps: float, shape: tuple) -> np.ndarray:
    n = shape[0]
    st = rescaled_stencil(kernel, eps, n, len(shape))
    return sfft.rfftn(st * (1.0 / n) ** len(shape))


def convolve_torus(kernel: Kernel, eps: float, field: np.ndarray) -> np.ndarray:
    """Periodic convolution of ``field`` on the unit torus with J_eps.

    ``field`` is an array of shape (n,) or (n, n); the grid spacing 1/n must
    not exceed eps/8.
    """
    field = np.asarray(field, dtype=float)
    if not (0.0 < eps < 1.0):
        raise KernelError("eps must lie in (0, 1)")
    n = field.shape[0]
    if any(s != n for s in field.shape):
        raise KernelError("torus fields must be square")
    if field.ndim != kernel.dim:
        raise KernelError(f"field dimension {field.ndim} != kernel dimension {kernel.dim}")
    if 1.0 / n > eps / 8.0 * (1 + 1e-12):
        need = int(math.ceil(8.0 / eps))
        raise KernelError(f"under-resolved kernel: spacing 1/{n} > eps/8; need n >= {need}")
    kf = _stencil_fft(kernel, float(eps), field.shape)
    return sfft.irfftn(sfft.rfftn(field) * kf, s=field.shape)


# ---------------------------------------------------------------------------
# convolution of radial fields in two dimensions


def radial_convolution_matrix(kernel: Kernel, eps: float, r: np.ndarray,
                              n_theta: int = 96) -> sparse.csr_matrix:
    """Sparse operator mapping samples phi(r_j) to (J_eps * phi)(r_i) in 2-d.

    ``r`` is a uniform cell-centred grid ``(j + 1/2) dr``.  The angular
    integral over the part of each circle inside the kernel support is a
    trapezoid rule (the kernel vanishes to all orders at its edge) and the
    radial one is a trapezoid rule with weight ``r'``.  Rows are rescaled to
    the exact kernel mass so that constants are preserved.
    """
    if kernel.dim != 2:
        raise KernelError("radial convolution is two-dimensional")
    r = np.asarray(r, dtype=float)
    dr = r[1] - r[0]
    R = kernel.radius * eps
    band = int(math.ceil(R / dr)) + 1
    rows, cols, vals = [], [], []
    t = np.linspace(-1.0, 1.0, n_theta + 1)
    for i, ri in enumerate(r):
        j0, j1 = max(0, i - band), min(len(r), i + band + 1)
        rp = r[j0:j1]
        # half-angle of the arc of radius rp inside the disk of radius R around ri
        c = (ri * ri + rp * rp - R * R) / (2.0 * ri * rp)
        th = np.arccos(np.clip(c, -1.0, 1.0))
        ok = th > 0
        if not np.any(ok):
            continue
        ang = th[ok][:, None] * t[None, :]
        dist = np.sqrt(np.maximum(ri * ri + rp[ok, None] ** 2 - 2 * ri * rp[ok, None] * np.cos(ang), 0.0))
        g = kernel.profile(dist / eps) / eps ** 2
        w = np.full(n_theta + 1, 1.0)
        w[0] = w[-1] = 0.5
        arc = (g * w).sum(axis=1) * (2 * th[ok] / n_theta)
        v = arc * rp[ok] * dr
        rows.append(np.full(v.size, i))
        cols.append(np.arange(j0, j1)[ok])
        vals.append(v)
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(len(r), len(r)))
    s = np.asarray(A.sum(axis=1)).ravel()
    return sparse.diags(kernel.mass() / s) @ A
