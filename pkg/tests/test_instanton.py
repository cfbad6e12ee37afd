import numpy as np
import pytest

from sharpint.instanton import (InstantonError, InstantonResult, check_asymptotics, decay_integral,
                                first_integral_defect, gk_residual, kac_residual, solve_decay_rate,
                                solve_instanton_gk, solve_instanton_kac)
from sharpint.kernels import Profile, reduce_1d
from sharpint.models import KacModel, make_reaction_pair


@pytest.fixture(scope="module")
def kac():
    model = KacModel()
    return model, solve_instanton_kac(model)


@pytest.fixture(scope="module")
def gk():
    pair = make_reaction_pair()
    return pair, solve_instanton_gk(pair)


def test_kac_residual_odd_and_monotone(kac):
    model, inst = kac
    m = inst.profile.values
    assert inst.residual_sup < 1e-8
    assert np.max(np.abs(kac_residual(model, inst.profile, inst.Jt))) < 1e-8
    assert np.max(np.abs(m + m[::-1])) < 1e-8
    # the tails saturate to m_beta in double precision, so strictness is checked in the core
    dm = np.diff(m)
    assert np.all(dm >= 0)
    core = np.abs(inst.xi[:-1]) < 2.0
    assert np.all(dm[core] > 0)
    assert m[len(m) // 2] == 0.0


def test_kac_residual_on_a_refined_grid(kac):
    model, inst = kac
    fine = inst.profile.h / 2
    xi = fine * np.arange(-round(inst.profile.cutoff / fine), round(inst.profile.cutoff / fine) + 1)
    from sharpint.instanton import kac_interpolant
    m = kac_interpolant(model, inst)(xi)
    p = Profile(fine, m, -model.m_beta, model.m_beta)
    assert np.max(np.abs(kac_residual(model, p, reduce_1d(model.J, fine)))) < 1e-7


def test_kac_unique_fixed_point_from_two_guesses(kac):
    model, inst = kac
    other = solve_instanton_kac(model, init="sign")
    assert np.max(np.abs(other.profile.values - inst.profile.values)) < 2e-10


def test_decay_rate_root_and_sensitivity():
    model = KacModel()
    assert decay_integral(model, 0.0)[0] == pytest.approx(model.p, rel=1e-6) and model.p < 1
    alpha = solve_decay_rate(model)
    assert alpha > 0 and abs(decay_integral(model, alpha)[0] - 1) < 1e-10
    narrow = KacModel(J=model.J.scaled(0.5), K=model.K.scaled(0.5))
    assert solve_decay_rate(narrow) > alpha


def test_kac_tail_rate(kac):
    model, inst = kac
    alpha = solve_decay_rate(model)
    rep = check_asymptotics(inst, alpha)
    assert rep.rel_gap < 0.02
    assert abs(-rep.deriv_slope - alpha) / alpha < 0.02


def test_exact_fit_on_synthetic_exponential():
    h, mb, alpha = 1 / 64, 0.9, 1.7
    xi = h * np.arange(-1280, 1281)
    vals = np.sign(xi) * mb * (1 - np.exp(-alpha * np.abs(xi)))
    res = InstantonResult(Profile(h, vals, -mb, mb), 0.0, float("nan"))
    rep = check_asymptotics(res, alpha)
    assert abs(rep.slope + alpha) < 1e-10


def test_gk_closed_form_profile(gk):
    pair, inst = gk
    u = inst.profile.values
    assert np.max(np.abs(u - (0.5 + 0.25 * np.tanh(inst.xi / 4)))) < 1e-6
    mid = len(u) // 2
    assert u[mid] == pair.midpoint and abs(u[mid] - 0.5) < 1e-15
    assert abs(inst.d1.values[mid] - 1 / 16) < 1e-12
    # far tails round to rho_pm; the derivative and the stored tail offsets stay strictly monotone
    assert np.all(np.diff(u) >= 0) and np.all(inst.d1.values > 0)
    off = inst.meta["tail_offset"]
    n = len(u) // 2
    assert np.all(np.diff(off[:n + 1]) > 0) and np.all(np.diff(off[n:]) < 0)


def test_gk_residual_and_first_integral(gk):
    pair, inst = gk
    assert gk_residual(pair, inst.profile) < 1e-8
    assert first_integral_defect(pair, inst) < 1e-8


def test_gk_rejects_unvalidated_pair():
    bad = make_reaction_pair("explicit", B=[0.1, 0.2], D=[0.0, 1.0], validate=False)
    with pytest.raises(InstantonError):
        solve_instanton_gk(bad)


def test_kac_grid_refinement_of_tension_integrals(kac):
    from sharpint.coefficients import surface_tension_kac
    model, inst = kac
    sols = [inst] + [solve_instanton_kac(model, h=inst.h / k) for k in (2, 4)]
    tau = [surface_tension_kac(model, s)[0] for s in sols]
    grad = [s.h * np.sum(s.d1.values ** 2) for s in sols]
    assert abs(tau[1] - tau[0]) / tau[1] < 1e-5
    assert abs(tau[2] - tau[1]) / tau[2] < 1e-6
    assert abs(grad[2] - grad[1]) / grad[2] < 1e-6
