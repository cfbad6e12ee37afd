import numpy as np
import pytest
from scipy import linalg

from sharpint.coefficients import (CoefficientError, assemble_L_gk, assemble_L_kac, compute_coefficients_gk,
                                   compute_coefficients_kac, mobility_gk, mobility_kac, spectral_gap_kac,
                                   surface_tension_kac)
from sharpint.instanton import InstantonResult, solve_instanton_gk, solve_instanton_kac
from sharpint.kernels import Profile
from sharpint.models import KacModel, make_reaction_pair, standard_model


@pytest.fixture(scope="module")
def kac():
    model = KacModel()
    inst = solve_instanton_kac(model)
    return model, inst, assemble_L_kac(model, inst)


@pytest.fixture(scope="module")
def gk():
    pair = make_reaction_pair()
    inst = solve_instanton_gk(pair)
    return pair, inst, assemble_L_gk(pair, inst)


def test_kac_operator_kernel_symmetry_and_sign(kac):
    model, inst, L = kac
    d1 = inst.d1.values
    assert L.norm(L.apply(d1)) < 1e-6
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.standard_normal((2, len(d1)))
        assert L.symmetry_defect(a, b) < 1e-10 * max(1.0, abs(L.inner(a, L.apply(b))))
    for _ in range(100):
        v = rng.standard_normal(len(d1))
        assert L.inner(v, L.apply(v)) <= 1e-10


def test_kac_spectral_gap(kac):
    _, _, L = kac
    w = spectral_gap_kac(L)
    assert abs(w[0]) < 1e-6
    assert w[1] > 100 * abs(w[0]) and w[1] > 1e-3


def test_two_routes_to_tension(kac):
    model, inst, _ = kac
    tau, tau_alt = surface_tension_kac(model, inst)
    assert tau > 0 and tau_alt > 0
    assert abs(tau - tau_alt) / tau < 5e-3


def test_flat_profile_has_no_tension():
    model = KacModel()
    inst = solve_instanton_kac(model)
    n = len(inst.profile.values)
    flat = InstantonResult(Profile(inst.h, np.full(n, model.m_beta), model.m_beta, model.m_beta), 0.0,
                           float("nan"), d1=Profile(inst.h, np.zeros(n)), Jt=inst.Jt)
    tau, tau_alt = surface_tension_kac(model, flat)
    assert tau == 0.0 and abs(tau_alt) < 1e-15


def test_unconverged_instanton_rejected(kac):
    model, inst, _ = kac
    bad = InstantonResult(inst.profile, 1e-3, inst.alpha_or_rate, d1=inst.d1, Jt=inst.Jt)
    with pytest.raises(CoefficientError):
        surface_tension_kac(model, bad)


def test_mobility_scales_with_constant_rate(kac):
    model, inst, _ = kac
    N1, mu1 = mobility_kac(model, inst)
    N2, mu2 = mobility_kac(KacModel(a0=2 * model.a0), inst)
    assert abs(N2 / N1 - 2) < 1e-12 and abs(mu1 - N1 * model.beta) < 1e-15
    c1 = compute_coefficients_kac(model, inst)
    c2 = compute_coefficients_kac(KacModel(a0=3 * model.a0), inst)
    assert c1.theta == c1.mu * c1.tau
    assert abs(c2.mu / c1.mu - 3) < 1e-12 and c2.tau == c1.tau


def test_standard_rate_mobility_closed_form():
    model = standard_model()
    inst = solve_instanton_kac(model)
    N, _ = mobility_kac(model, inst)
    m = inst.profile.values
    direct = 1 / (inst.h * np.sum(inst.d1.values ** 2 / (1 - m ** 2)))
    assert abs(N - direct) / direct < 1e-6


def test_gk_operator_structure(gk):
    pair, inst, L = gk
    u = inst.profile.values
    one = L.apply(np.ones_like(u))
    assert np.max(np.abs((one + pair.B(u) + pair.D(u))[1:-1])) < 1e-12
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, len(u)))
    assert L.symmetry_defect(a, b) < 1e-10 * max(1.0, abs(L.inner(a, L.apply(b))))
    top = linalg.eigh(L.matrix, eigvals_only=True, subset_by_index=[len(u) - 1, len(u) - 1])[0]
    assert top < 0
    assert top < -np.min(pair.B(u) + pair.D(u)) + 10 * inst.h ** 2


def test_gk_gradient_norm_and_mobility(gk):
    pair, inst, L = gk
    assert abs(L.inner(inst.d1.values, inst.d1.values) - 1 / 48) < 1e-8
    mu, tau = mobility_gk(inst, L)
    assert tau * mu == pytest.approx(0.5, rel=1e-15)
    fine = solve_instanton_gk(pair, h=inst.h / 2)
    mu2, _ = mobility_gk(fine, assemble_L_gk(pair, fine))
    assert abs(mu2 - mu) / mu2 < 0.01
    c = compute_coefficients_gk(pair, inst)
    assert c.mu_gk == mu and c.tau_gk == tau
