import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sharpint.action_kac import (ActionError, FieldPath, G, G_star, action_circle_kac, action_eps_kac,
                                 build_recovery_kac, fenchel_young_defect, free_energy_eps, hamiltonian_eps,
                                 lagrangian_eps, lagrangian_eps_split, legendre_gap, lower_bound_kac,
                                 optimal_test_function, write_ladder_csv, zero_cost_velocity)
from sharpint.coefficients import assemble_L_kac, compute_coefficients_kac
from sharpint.correctors import kac_corrector_bundle
from sharpint.dynamics import evolve_nonlocal
from sharpint.geometry import circle_linear, circle_static
from sharpint.instanton import solve_instanton_kac
from sharpint.models import KacModel, free_energy_density


@pytest.fixture(scope="module")
def setup():
    model = KacModel()
    inst = solve_instanton_kac(model)
    coeffs = compute_coefficients_kac(model, inst)
    L = assemble_L_kac(model, inst)
    Q = kac_corrector_bundle(model, inst, L, coeffs.theta).Q_bar
    return model, inst, coeffs, Q


def test_fenchel_young_inequality_and_equality():
    rng = np.random.default_rng(0)
    q = rng.uniform(-5, 5, 1000)
    p = rng.uniform(-50, 50, 1000)
    a = rng.uniform(0.01, 10, 1000)
    assert np.all(fenchel_young_defect(q, p, a) >= -1e-12)
    assert np.max(np.abs(fenchel_young_defect(q, -a * np.sinh(q), a))) < 1e-9
    assert np.all(G(q, a) >= 0) and np.all(G_star(p, a) >= 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.95, 0.95), st.floats(-20, 20), st.floats(-0.9, 0.9), st.floats(0.1, 1.0),
       st.floats(0.05, 0.5))
def test_lagrangian_forms_and_duality(u, v, Ju, c, eps):
    beta = 2.0
    Lc = float(lagrangian_eps(u, v, Ju, c, beta, eps))
    Ls = float(lagrangian_eps_split(u, v, Ju, c, beta, eps))
    assert Lc >= -1e-10
    assert abs(Lc - Ls) < 1e-8 * max(1.0, abs(Lc))
    assert legendre_gap(u, v, Ju, c, beta, eps) < 1e-6 * max(1.0, abs(Lc))


def test_lagrangian_vanishes_on_zero_cost_velocity():
    rng = np.random.default_rng(1)
    u = rng.uniform(-0.9, 0.9, 50)
    Ju = rng.uniform(-0.9, 0.9, 50)
    v = zero_cost_velocity(u, Ju, 0.5, 2.0, 0.1)
    assert np.max(np.abs(lagrangian_eps(u, v, Ju, 0.5, 2.0, 0.1))) < 1e-10
    Ju = np.linspace(-0.8, 0.8, 9)
    stat = np.tanh(2.0 * Ju)
    assert np.max(np.abs(lagrangian_eps(stat, 0.0, Ju, 0.5, 2.0, 0.1))) < 1e-12
    with pytest.raises(ActionError):
        lagrangian_eps(1.0, 0.0, 0.0, 0.5, 2.0, 0.1)


def test_hamiltonian_vanishes_at_zero_momentum():
    assert np.max(np.abs(hamiltonian_eps(np.linspace(-0.9, 0.9, 7), 0.0, 0.3, 0.5, 2.0, 0.1))) == 0.0


def test_free_energy_of_constant_fields():
    model = KacModel()
    eps = 0.1
    assert abs(free_energy_eps(model, np.full((80, 80), model.m_beta), eps)) < 1e-12
    zero = free_energy_eps(model, np.zeros((80, 80)), eps)
    exact = (free_energy_density(0.0, 2.0) - free_energy_density(model.m_beta, 2.0)) / eps
    assert abs(zero - exact) < 1e-12 * exact and zero > 0


def test_free_energy_of_a_circle_matches_tension_times_perimeter(setup):
    model, inst, coeffs, _ = setup
    fp = build_recovery_kac(model, inst, None, circle_static(0.3, 0.01), 0.1, times=np.array([0.0]))
    F = free_energy_eps(model, fp.values[0], 0.1)
    assert abs(F - coeffs.tau * 2 * math.pi * 0.3) / (coeffs.tau * 2 * math.pi * 0.3) < 0.05


def test_recovery_field_centering_and_tails(setup):
    model, inst, _, Q = setup
    from sharpint.action_kac import _recovery_values
    from sharpint.instanton import kac_interpolant
    from sharpint.action_kac import _Q_interp
    path = circle_linear(0.3, 0.5, 0.2)
    eps = 0.05
    phi, _, _ = _recovery_values(kac_interpolant(model, inst), _Q_interp(Q), path, eps, 0.1,
                                 np.array([0.0, 0.1, -0.1]))
    assert abs(phi[0]) < 1e-15
    assert abs(phi[1] - model.m_beta) < 1e-8 and abs(phi[2] + model.m_beta) < 1e-8


def test_recovery_resolution_guard(setup):
    model, inst, _, _ = setup
    with pytest.raises(ActionError, match="resolve"):
        build_recovery_kac(model, inst, None, circle_static(0.3, 0.01), 0.1, n=40, times=np.array([0.0]))


def test_pure_phase_has_zero_action():
    model = KacModel()
    vals = np.full((3, 80, 80), model.m_beta)
    rep = action_eps_kac(model, FieldPath(np.array([0.0, 0.01, 0.02]), vals, 0.1))
    assert rep.S1 == 0.0 and abs(rep.S2) < 1e-14 and abs(rep.S3) < 1e-10


def test_discrete_flow_costs_almost_nothing(setup):
    model, inst, _, _ = setup
    eps = 0.1
    fp = build_recovery_kac(model, inst, None, circle_static(0.3, 0.01), eps, times=np.array([0.0]))
    dt = 0.04 * eps ** 2
    tr = evolve_nonlocal(model, fp.values[0], dt, 20 * dt, rescaled=True, eps=eps, n_snap=20)
    flow = action_eps_kac(model, FieldPath(tr.times, tr.snapshots, eps))
    static = action_eps_kac(model, build_recovery_kac(model, inst, None, circle_static(0.3, 20 * dt), eps, nt=21))
    assert flow.S2 >= 0 and flow.S3 >= 0
    assert abs(flow.total) < 1e-3 * static.total


def test_corrector_lowers_the_action(setup):
    model, inst, coeffs, Q = setup
    path = circle_linear(0.3, 0.5, 0.2)
    corr = action_circle_kac(model, inst, Q, path, 0.08, coeffs=coeffs, nt=12)
    raw = action_circle_kac(model, inst, None, path, 0.08, coeffs=coeffs, nt=12)
    assert corr.S2 >= 0 and corr.S3 >= 0
    assert raw.total >= corr.total - 1e-8
    assert corr.gap < 0.1


def test_lower_bound_below_action(setup):
    model, inst, coeffs, Q = setup
    path = circle_linear(0.3, 0.5, 0.2)
    zero = lower_bound_kac(model, inst, Q, path, 0.08, lambda t: 0.0, coeffs, nt=8)
    assert zero.Lambda == 0.0
    p = optimal_test_function(path, coeffs)
    for s in (0.5, 1.0, 1.5):
        rep = lower_bound_kac(model, inst, Q, path, 0.08, lambda t: s * p(t), coeffs, nt=8)
        assert rep.Lambda <= rep.action_total + 1e-8
    from sharpint.geometry import action_sharp
    S_ac = action_sharp(path, coeffs.mu, coeffs.theta)
    full = lower_bound_kac(model, inst, Q, path, 0.08, p, coeffs, nt=8)
    assert abs(full.limit - S_ac) < 1e-10 * S_ac


def test_ladder_csv(tmp_path, setup):
    model, inst, coeffs, Q = setup
    rep = action_circle_kac(model, inst, Q, circle_linear(0.3, 0.5, 0.2), 0.08, coeffs=coeffs, nt=4)
    write_ladder_csv([rep], tmp_path / "ladder.csv")
    lines = (tmp_path / "ladder.csv").read_text().splitlines()
    assert lines[0].split(",")[:7] == ["eps", "S1", "S2", "S3", "total", "S_ac", "gap"]
    assert len(lines) == 2
