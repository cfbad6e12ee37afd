import math

import numpy as np
import pytest
from scipy import optimize

from sharpint.action_gk import (GKActionError, GKFieldPath, GKRecovery, TorusGrid, action_circle_gk,
                                action_eps_gk, ansatz_circle_gk, build_recovery_gk, center_regularized_radius,
                                constant_state_H, g_minus, g_plus, rate_JH, slice_action, solve_H_newton,
                                solve_slice_newton, write_gk_ladder_csv)
from sharpint.coefficients import assemble_L_gk, mobility_gk
from sharpint.correctors import cost_constant_gk, gk_corrector_bundle
from sharpint.dynamics import evolve_rd
from sharpint.geometry import circle_linear, evolve_mcf_circle
from sharpint.instanton import solve_instanton_gk
from sharpint.kernels import Profile
from sharpint.models import make_reaction_pair


@pytest.fixture(scope="module")
def setup():
    pair = make_reaction_pair()
    inst = solve_instanton_gk(pair)
    L = assemble_L_gk(pair, inst)
    mu, _ = mobility_gk(inst, L)
    b = gk_corrector_bundle(inst, L, mu)
    return pair, inst, L, mu, b


@pytest.fixture(scope="module")
def torus_path(setup):
    pair, inst, _, _, b = setup
    fp = build_recovery_gk(inst, b.Q_bar, circle_linear(0.3, 0.5, 0.2), 0.1, times=np.linspace(0, 0.02, 5))
    H, _ = solve_H_newton(pair, fp)
    return fp, H


def test_convex_weights_nonnegative_and_smooth():
    H = np.linspace(-5, 5, 100001)
    assert np.all(g_plus(H) >= 0) and np.all(g_minus(H) >= 0)
    # series branch meets the closed form at the switch
    x = np.array([0.1 - 1e-12, 0.1 + 1e-12])
    assert abs(np.diff(g_plus(x))[0]) < 1e-12
    assert abs(g_plus(np.array([1e-4]))[0] - 0.5e-8) < 1e-12


def test_zero_trial_field_gives_zero(torus_path, setup):
    pair = setup[0]
    fp, _ = torus_path
    assert rate_JH(pair, fp, np.zeros_like(fp.values)) == 0.0


def test_summation_by_parts_forms_agree(torus_path, setup):
    pair = setup[0]
    fp, H = torus_path
    a = rate_JH(pair, fp, H, form="slice")
    b = rate_JH(pair, fp, H, form="laplacian")
    assert abs(a - b) < 1e-12 * max(1.0, abs(a))


def test_sup_inequality_for_random_fields(torus_path, setup):
    pair = setup[0]
    fp, H = torus_path
    S = action_eps_gk(pair, fp, H).total
    assert abs(rate_JH(pair, fp, H) - S) < 1e-8 * max(1.0, S)
    rng = np.random.default_rng(5)
    n = fp.values.shape[-1]
    x = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    for _ in range(10):
        c = rng.normal(scale=0.05, size=4)
        trial = np.array([c[0] * np.sin(2 * np.pi * X) + c[1] * np.cos(2 * np.pi * Y)
                          + c[2] * np.sin(2 * np.pi * (X + Y)) + c[3] for _ in fp.times])
        assert rate_JH(pair, fp, trial) <= S + 1e-8
        assert rate_JH(pair, fp, H + trial) <= S + 1e-8


def test_integrands_nonnegative_cellwise(torus_path, setup):
    pair = setup[0]
    fp, H = torus_path
    g = TorusGrid(fp.values.shape[-1])
    for k in range(len(fp.times)):
        phi = fp.values[k]
        assert all(np.all(f >= 0) for f in g.face_values(phi * (1 - phi)))
        assert np.all(pair.B(phi) * g_plus(H[k]) >= 0) and np.all(pair.D(phi) * g_minus(H[k]) >= 0)
        assert all(t >= 0 for t in slice_action(g, pair, fp.eps, phi, H[k]))


def test_constant_state_balance():
    pair = make_reaction_pair()
    g = TorusGrid(16)
    for rho in (0.1, 0.4, 0.6, 0.9):
        phi = np.full((16, 16), rho)
        H, info = solve_slice_newton(g, pair, 0.1, phi, np.zeros_like(phi), tol=1e-14)
        assert np.max(np.abs(H - constant_state_H(pair, rho))) < 1e-10
        assert np.ptp(H) < 1e-12


def test_constant_fields_match_scalar_oracle():
    pair = make_reaction_pair()
    eps, rho, rate = 0.1, 0.4, 0.3
    t = np.linspace(0.0, 0.1, 3)
    vals = np.array([np.full((80, 80), rho + rate * s) for s in t])
    fp = GKFieldPath(t, vals, eps, dot=np.full_like(vals, rate))
    rep = action_eps_gk(pair, fp)
    assert rep.S_grad < 1e-20

    def scalar(p):
        f = lambda H: -(rate * H - (pair.B(p) * math.expm1(H) + pair.D(p) * math.expm1(-H)) / eps ** 2) / eps
        return -optimize.minimize_scalar(f, bracket=(-1, 0, 1), tol=1e-12).fun

    w = np.array([0.25, 0.5, 0.25]) * 0.1
    oracle = float(sum(wk * scalar(rho + rate * s) for wk, s in zip(w, t)))
    assert abs(rep.total - oracle) < 1e-8 * oracle


def test_zero_cost_flow_has_vanishing_field(setup):
    pair, inst, _, _, b = setup
    eps = 0.1
    fp = build_recovery_gk(inst, None, circle_linear(0.3, 0.5, 0.2), eps, times=np.array([0.0]))
    dx = 1 / fp.values.shape[-1]
    dt = dx * dx / 4 * eps ** 2
    tr = evolve_rd(pair, fp.values[0], dt, 100 * dt, eps=eps, n_snap=10)
    flow = GKFieldPath(tr.times, tr.snapshots, eps)
    H, _ = solve_H_newton(pair, flow)
    assert np.max(np.abs(H)) < 1e-4
    assert action_eps_gk(pair, flow, H).total < 1e-10


def test_recovery_centering_tails_and_mcf_drift(setup):
    pair, inst, _, _, b = setup
    path = circle_linear(0.3, 0.5, 0.2)
    rec = GKRecovery.build(inst, b.Q_bar, b.h, path)
    R = float(path.radius(0.1))
    phi, _, _, _ = rec.fields(path, 0.001, 0.1, np.array([R, R - 0.1, R + 0.1]))
    assert abs(phi[0] - 0.5) < 1e-15
    assert abs(phi[1] - pair.rho_plus) < 1e-8 and abs(phi[2] - pair.rho_minus) < 1e-8
    mcf = evolve_mcf_circle(0.3, 0.5, 0.05)
    rec = GKRecovery.build(inst, b.Q_bar, b.h, mcf)
    r = np.linspace(0.1, 0.4, 31)
    phi_c, _, A, _ = rec.fields(mcf, 0.05, 0.02, r)
    plain = GKRecovery.build(inst, None, None, mcf).fields(mcf, 0.05, 0.02, r)[0]
    assert abs(A) < 1e-12 and np.max(np.abs(phi_c - plain)) < 1e-12


def test_center_regularization_matches_to_second_order():
    w = 0.05
    rho, lap = center_regularized_radius(np.array([w - 1e-9, w + 1e-9]), w)
    assert abs(rho[1] - rho[0]) < 1e-8
    r = np.linspace(0.0, 0.2, 2001)
    rho, lap = center_regularized_radius(r, w)
    d1 = np.gradient(rho, r)
    assert np.all(d1 >= -1e-12) and np.all(np.isfinite(lap))
    assert rho[0] > 0


def test_uncorrected_not_below_corrected_and_limits(setup):
    pair, inst, L, mu, b = setup
    path = circle_linear(0.3, 0.5, 0.2)
    C0 = cost_constant_gk(inst, L, Profile(inst.h, np.zeros(len(inst.xi))))
    assert C0 > 1 / (4 * mu)
    for eps in (0.02, 0.01):
        corr = action_circle_gk(pair, inst, b.Q_bar, path, eps, mu=mu, h=b.h)
        raw = action_circle_gk(pair, inst, None, path, eps, mu=mu, C_Q=C0)
        assert raw.total >= corr.total
    assert corr.gap < 0.02
    assert abs(raw.total - raw.prediction) / raw.prediction < 0.03


def test_ansatz_route_close_to_newton(setup):
    pair, inst, _, mu, b = setup
    path = circle_linear(0.3, 0.5, 0.2)
    diff = []
    for eps in (0.02, 0.01):
        nw = action_circle_gk(pair, inst, b.Q_bar, path, eps, mu=mu, h=b.h)
        an = ansatz_circle_gk(pair, inst, b.Q_bar, b.h, path, eps, mu=mu)
        diff.append(abs(an.total - nw.total) / nw.total)
        # the quadratic parts coincide by construction of the split
        assert abs(an.S1 - nw.S1) < 1e-2 * nw.S1
    assert diff[1] < diff[0] and diff[1] < 0.05


def test_resolution_guard_and_csv(tmp_path, setup):
    pair, inst, _, mu, b = setup
    with pytest.raises(GKActionError, match="resolve"):
        build_recovery_gk(inst, None, circle_linear(0.3, 0.5, 0.2), 0.1, n=40, times=np.array([0.0]))
    rep = action_circle_gk(pair, inst, b.Q_bar, circle_linear(0.3, 0.5, 0.2), 0.08, mu=mu, h=b.h, nt=4)
    write_gk_ladder_csv([rep], tmp_path / "gk.csv")
    lines = (tmp_path / "gk.csv").read_text().splitlines()
    assert lines[0] == "eps,route,total,S_ac,gap,sup_H_diff,corrected" and len(lines) == 2
