import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from sharpint.kernels import (KernelError, Profile, convolve_line, convolve_torus, make_kernel, reduce_1d,
                              reduced_values, second_moment_kernel)


def radial_mass(k):
    if k.dim == 1:
        return 2 * integrate.quad(k.profile, 0, k.radius, epsabs=1e-14)[0]
    area = 2 * math.pi if k.dim == 2 else 4 * math.pi
    return area * integrate.quad(lambda s: k.profile(s) * s ** (k.dim - 1), 0, k.radius, epsabs=1e-14)[0]


@pytest.mark.parametrize("family", ["bump", "annular"])
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_normalized_mass_against_adaptive_quadrature(family, dim):
    k = make_kernel(family, dim)
    assert abs(radial_mass(k) - 1) < 1e-10


def test_zero_amplitude_is_rejected():
    with pytest.raises(KernelError, match="non-normalizable"):
        make_kernel("bump", 2, amplitude=0.0)


def test_annular_vanishes_at_origin_and_bump_cannot():
    k = make_kernel("annular", 2, force_zero_at_origin=True)
    assert k.profile(0.0) == 0.0 and k.vanishes_at_zero
    with pytest.raises(KernelError):
        make_kernel("bump", 2, force_zero_at_origin=True)


def test_support_and_nonnegativity():
    for fam in ("bump", "annular"):
        k = make_kernel(fam, 2)
        s = np.linspace(0, 1, 2001)
        v = k.profile(s)
        assert np.all(v >= 0)
        assert np.all(v[s >= 0.5] == 0)


def test_reduce_1d_mass_and_evenness():
    k = make_kernel("bump", 2)
    jt = reduce_1d(k, 1 / 64)
    assert abs(jt.mass - 1) < 1e-12
    assert np.array_equal(jt.values, jt.values[::-1])
    raw = reduce_1d(k, 1 / 64, renormalize=False)
    assert abs(raw.mass - 1) < 1e-7


def test_reduction_equals_iterated_integral():
    k = make_kernel("bump", 2)
    for xi in (0.0, 0.13, 0.31):
        direct = integrate.quad(lambda e: k.profile(math.hypot(xi, e)), -0.5, 0.5, epsabs=1e-14)[0]
        assert abs(reduced_values(k, xi)[0] - direct) < 1e-10


def test_reduction_in_one_dimension_is_identity():
    k = make_kernel("bump", 1)
    xi = np.linspace(-0.45, 0.45, 11)
    assert np.allclose(reduced_values(k, xi), k.profile(np.abs(xi)), atol=1e-15)


def test_second_moment_kernel():
    k = make_kernel("bump", 2)
    m2 = second_moment_kernel(k, 1 / 64)
    assert np.all(m2.values >= 0)
    assert reduced_values(k, 0.6, kind="M2")[0] == 0
    # Fubini: int M2 = int j(|z|) z1^2 / 2 dz = (pi/2) int j(s) s^3 ds in d=2
    fub = 0.5 * math.pi * integrate.quad(lambda s: k.profile(s) * s ** 3, 0, 0.5, epsabs=1e-15)[0]
    assert abs(m2.mass - fub) / fub < 1e-6
    with pytest.raises(KernelError, match="undefined in d=1"):
        second_moment_kernel(make_kernel("bump", 1))


def test_convolve_line_constants_and_parity():
    jt = reduce_1d(make_kernel("bump", 2), 1 / 32)
    p = Profile(1 / 32, np.full(161, 0.7), 0.7, 0.7)
    assert np.allclose(convolve_line(jt, p).values, 0.7, atol=1e-14)
    x = p.xi
    q = Profile(1 / 32, np.tanh(x), -1.0, 1.0)
    out = convolve_line(jt, q).values
    assert np.max(np.abs(out + out[::-1])) < 1e-14


def test_convolve_line_grid_mismatch():
    jt = reduce_1d(make_kernel("bump", 2), 1 / 32)
    with pytest.raises(KernelError):
        convolve_line(jt, Profile(1 / 64, np.zeros(11)))


def test_convolve_torus_constant_resolution_and_shift():
    k = make_kernel("bump", 2)
    f = np.full((64, 64), 0.3)
    assert np.allclose(convolve_torus(k, 0.2, f), 0.3, atol=1e-14)
    with pytest.raises(KernelError, match="need n >= "):
        convolve_torus(k, 0.05, f)
    rng = np.random.default_rng(1)
    g = rng.standard_normal((64, 64))
    a = convolve_torus(k, 0.2, np.roll(g, 1, axis=0))
    b = np.roll(convolve_torus(k, 0.2, g), 1, axis=0)
    assert np.max(np.abs(a - b)) < 1e-12
    assert abs(a.mean() - g.mean()) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 16))
def test_convolutions_are_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    k = make_kernel("bump", 1)
    p, q = rng.standard_normal(64), rng.standard_normal(64)
    lhs = convolve_torus(k, 0.25, a * p + b * q)
    rhs = a * convolve_torus(k, 0.25, p) + b * convolve_torus(k, 0.25, q)
    assert np.max(np.abs(lhs - rhs)) < 1e-11 * (1 + abs(a) + abs(b))
    jt = reduce_1d(make_kernel("bump", 2), 1 / 16)
    P, Q = Profile(1 / 16, p[:63]), Profile(1 / 16, q[:63])
    l2 = convolve_line(jt, P.with_values(a * P.values + b * Q.values)).values
    r2 = a * convolve_line(jt, P).values + b * convolve_line(jt, Q).values
    assert np.max(np.abs(l2 - r2)) < 1e-11 * (1 + abs(a) + abs(b))
