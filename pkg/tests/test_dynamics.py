import numpy as np
import pytest

from sharpint.dynamics import (BACKEND, LocalRate, bernstein_rate, block_average, constant_rate,
                               derive_BD, evolve_line, evolve_nonlocal, evolve_rd, flip_rate_check, front_speed,
                               get_backend, gibbs_check, gibbs_weights, hydro_compare_kac, kac_model_1d,
                               level_set_radius, simulate_gk, simulate_glauber_kac)
from sharpint.dynamics.pde import DynamicsError
from sharpint.instanton import solve_instanton_gk, solve_instanton_kac
from sharpint.models import KacModel, make_reaction_pair

needs_compiled = pytest.mark.skipif(BACKEND != "cython", reason="compiled backend not built")


# ---------------------------------------------------------------------------
# mesoscopic flows


def test_pure_phase_is_stationary():
    model = KacModel()
    m0 = np.full((32, 32), model.m_beta)
    tr = evolve_nonlocal(model, m0, 0.05, 1.0, L=4.0)
    assert np.max(np.abs(tr.final - m0)) < 1e-12


def test_instanton_is_a_standing_front():
    model = KacModel()
    gh = 1 / 32
    inst = solve_instanton_kac(model, h=gh)
    tr = evolve_line(model, inst.profile.values, gh, 0.05, 5.0)
    assert np.max(np.abs(tr.final - inst.profile.values)) < 1e-6


def test_cfl_guards():
    model = KacModel()
    with pytest.raises(DynamicsError, match="CFL"):
        evolve_nonlocal(model, np.zeros((16, 16)), 1.0, 1.0, rescaled=True, eps=0.1)
    with pytest.raises(DynamicsError, match="CFL"):
        evolve_rd(make_reaction_pair(), np.full(64, 0.5), 1e-3, 1e-2)


def test_rd_stationary_states():
    pair = make_reaction_pair()
    u0 = np.full((32, 32), pair.rho_plus)
    tr = evolve_rd(pair, u0, 1e-4, 1e-2)
    assert np.max(np.abs(tr.final - u0)) < 1e-14
    eps, n = 0.01, 800
    inst = solve_instanton_gk(pair)
    x = (np.arange(n) + 0.5) / n
    xi = np.minimum(x - 0.25, 0.75 - x) / eps
    u = np.interp(xi, inst.xi, inst.profile.values)
    dx = 1 / n
    trr = evolve_rd(pair, u, dx * dx / 4, 2000 * dx * dx / 4, eps=eps)
    assert np.max(np.abs(trr.final - u)) < 1e-3


def test_front_without_field_does_not_move():
    r = front_speed(KacModel(), 0.0, T=100.0)
    assert abs(r.v) < 1e-6


def test_level_set_radius_of_a_disk():
    n = 256
    x = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    f = np.tanh((0.3 - np.hypot(X - 0.5, Y - 0.5)) / 0.02)
    assert abs(level_set_radius(f, 0.0) - 0.3) < 1e-4


# ---------------------------------------------------------------------------
# rates and reaction pairs


def test_derive_constant_and_neighbour_rates():
    dp = derive_BD(constant_rate(1.0))
    assert np.allclose(dp.B_coef, [1.0, -1.0]) and np.allclose(dp.D_coef, [0.0, 1.0])
    right = LocalRate(((0,), (1,)), (0.0, 0.0, 1.0, 1.0), "eta_1")
    dp = derive_BD(right)
    assert np.allclose(dp.B_coef, [0.0, 1.0, -1.0]) and np.allclose(dp.D_coef, [0.0, 0.0, 1.0])
    assert not dp.validated and dp.issues


def test_bernstein_rate_reproduces_the_pair():
    pair = make_reaction_pair()
    c = bernstein_rate(pair)
    assert c.strictly_positive
    dp = derive_BD(c)
    assert np.allclose(dp.B_coef, pair.B_coef, atol=1e-14) and np.allclose(dp.D_coef, pair.D_coef, atol=1e-14)
    assert dp.validated


def test_local_rate_validation():
    with pytest.raises(DynamicsError):
        LocalRate(((1,),), (1.0, 1.0))
    with pytest.raises(DynamicsError):
        LocalRate(((0,),), (1.0,))
    with pytest.raises(DynamicsError):
        LocalRate(((0,),), (1.0, -1.0))


# ---------------------------------------------------------------------------
# lattice dynamics


def test_block_average():
    v = np.arange(8.0)
    assert np.array_equal(block_average(v, 4), [0.5, 2.5, 4.5, 6.5])


def test_kac_lattice_is_deterministic_under_a_seed():
    model = kac_model_1d()
    a = simulate_glauber_kac(model, 1 / 32, 4.0, 2.0, 7, m0=0.2)
    b = simulate_glauber_kac(model, 1 / 32, 4.0, 2.0, 7, m0=0.2)
    c = simulate_glauber_kac(model, 1 / 32, 4.0, 2.0, 8, m0=0.2)
    assert np.array_equal(a.snapshots, b.snapshots) and a.events == b.events
    assert not np.array_equal(a.snapshots, c.snapshots)


@needs_compiled
def test_backends_give_identical_trajectories():
    model = kac_model_1d()
    kw = dict(m0=0.3, snapshot_times=[0.0, 0.5, 1.0])
    a = simulate_glauber_kac(model, 1 / 32, 4.0, 1.0, 3, backend="python", **kw)
    b = simulate_glauber_kac(model, 1 / 32, 4.0, 1.0, 3, backend="cython", **kw)
    assert np.array_equal(a.snapshots, b.snapshots) and a.events == b.events
    c = bernstein_rate(make_reaction_pair())
    a = simulate_gk(32, c, 0.05, 3, u0=0.4, backend="python")
    b = simulate_gk(32, c, 0.05, 3, u0=0.4, backend="cython")
    assert np.array_equal(a.snapshots, b.snapshots) and a.events == b.events


def test_backend_selection():
    mod, label = get_backend("python")
    assert label == "python"
    with pytest.raises(ValueError):
        get_backend("fortran")


def test_exchange_dynamics_conserves_particles():
    tr = simulate_gk(64, None, 0.05, 1, u0=0.37, snapshot_times=np.linspace(0, 0.05, 6))
    counts = tr.snapshots.reshape(len(tr.times), -1).sum(axis=1)
    assert np.all(counts == counts[0]) and tr.events > 0
    tr2 = simulate_gk(16, None, 0.01, 1, u0=0.5, d=2)
    assert tr2.snapshots[0].sum() == tr2.snapshots[-1].sum()


def test_spin_flip_symmetry_in_law():
    model = kac_model_1d()
    m = [simulate_glauber_kac(model, 1 / 16, 2.0, 1.0, s, m0=0.0).final.mean() for s in range(40)]
    assert abs(np.mean(m)) < 3 * np.std(m) / np.sqrt(len(m)) + 1e-12


def test_gibbs_weights_are_a_distribution():
    w = gibbs_weights(kac_model_1d(), 0.125, 1.0)
    assert w.shape == (256,) and abs(w.sum() - 1) < 1e-12 and np.all(w > 0)
    idx = np.arange(256)
    flipped = 255 - idx
    assert np.allclose(w, w[flipped], rtol=1e-12)


def test_small_system_visits_gibbs_measure():
    tv, events = gibbs_check(kac_model_1d(), T=1.0e6)
    assert tv < 0.02 and events > 1e5


def test_flip_rate_statistics_match_enumeration():
    out = flip_rate_check(bernstein_rate(make_reaction_pair()))
    for k in ("B", "D"):
        assert abs(out[k]["estimate"] - out[k]["exact"]) < 2 * out[k]["stderr"]


def test_kac_hydrodynamic_error_shrinks():
    cmp = hydro_compare_kac()
    assert cmp.decreasing and len(cmp.l1) == 2
