import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from sharpint.kernels import make_kernel
from sharpint.models import (KacModel, ModelError, curie_weiss_magnetization, effective_rate, free_energy_density,
                             make_reaction_pair, rate_a, standard_model)


def test_curie_weiss_three_independent_methods():
    vals = [curie_weiss_magnetization(2.0, method=m) for m in ("newton", "bisection", "fixed_point")]
    for v in vals:
        assert abs(v - math.tanh(2 * v)) < 1e-12
    assert max(vals) - min(vals) < 1e-12
    assert abs(vals[0] - 0.9575) < 1e-4
    p = 2 * (1 - vals[0] ** 2)
    assert abs(p - 0.1664) < 1e-4 and p < 1


@pytest.mark.parametrize("beta", [1.0, 0.5])
def test_no_magnetization_at_or_below_critical(beta):
    with pytest.raises(ModelError, match="no spontaneous magnetization"):
        curie_weiss_magnetization(beta)


def test_magnetization_increases_with_beta():
    m = [curie_weiss_magnetization(b) for b in np.linspace(1.05, 6, 40)]
    assert np.all(np.diff(m) > 0)


def test_free_energy_values_and_minimum():
    assert abs(free_energy_density(0.0, 2.0) + math.log(2) / 2) < 1e-15
    assert free_energy_density(1.0, 2.0) == -0.5 and free_energy_density(-1.0, 2.0) == -0.5
    mb = curie_weiss_magnetization(2.0)
    x = np.linspace(-1, 1, 200001)
    f = free_energy_density(x, 2.0)
    assert np.max(np.abs(f - f[::-1])) < 1e-14
    assert abs(abs(x[np.argmin(f)]) - mb) <= x[1] - x[0]
    assert free_energy_density(mb, 2.0) < free_energy_density(0.0, 2.0)
    with pytest.raises(ValueError):
        free_energy_density(1.5, 2.0)


def test_rate_families():
    assert np.all(rate_a(KacModel(a0=0.5), [0.0, 0.3, -0.7]) == 0.5)
    std = standard_model()
    assert rate_a(std, 0.0) == 0.5
    s = np.linspace(-2, 2, 9)
    assert np.allclose(rate_a(std, s), 1 / (2 * np.cosh(2 * s)), rtol=1e-15)
    with pytest.raises(ModelError):
        KacModel(rate_family="standard_cosh", J=make_kernel("bump", 2))


def test_standard_rate_identity_on_the_instanton():
    from sharpint.instanton import solve_instanton_kac
    model = standard_model()
    inst = solve_instanton_kac(model)
    abar = effective_rate(model, inst.profile, inst.Jt)
    assert np.max(np.abs(2 * abar - np.sqrt(1 - inst.profile.values ** 2))) < 1e-6


def test_symmetric_cubic_closed_forms():
    p = make_reaction_pair()
    assert (p.rho_minus, p.rho_plus) == pytest.approx((0.25, 0.75), abs=1e-12)
    assert p.D_coef[1] == 3 / 32
    assert abs(p.W(0.5) - 1 / 1024) < 1e-15
    assert abs(p.gamma - 1 / 8) < 1e-12
    x = np.linspace(0, 1, 101)
    assert np.max(np.abs(p.W(x) - 0.25 * ((x - 0.5) ** 2 - 1 / 16) ** 2)) < 1e-15


def test_explicit_pair_endpoint_violation():
    with pytest.raises(ModelError, match=r"B\(1\)"):
        make_reaction_pair("explicit", B=[0.1, 0.2], D=[0.0, 1.0])
    bad = make_reaction_pair("explicit", B=[0.1, 0.2], D=[0.0, 1.0], validate=False)
    assert not bad.validated and any("B(1)" in s for s in bad.issues)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.45))
def test_validated_pairs_are_bistable(r):
    p = make_reaction_pair(r=r, validate=False)
    assume(p.validated)
    roots = [p.rho_minus, p.rho_zero, p.rho_plus]
    assert 0 < roots[0] < roots[1] < roots[2] < 1
    slopes = [float(p.dB(x) - p.dD(x)) for x in roots]
    assert slopes[0] < 0 < slopes[1] and slopes[2] < 0
    assert abs(p.W(p.rho_plus) - p.W(p.rho_minus)) < 1e-12
    x = np.linspace(p.rho_minus, p.rho_plus, 1001)[1:-1]
    assert np.all(p.W(x) > 0)
    xi = np.linspace(0, 1, 1001)[1:-1]
    assert np.all(p.B(xi) > 0) and np.all(p.D(xi) > 0)
