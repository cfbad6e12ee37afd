import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sharpint.geometry import (GeometryError, action_sharp, circle_linear, circle_static, curvature_velocity,
                               drift_A, ellipse_polygon, evolve_csf_polygon, evolve_mcf_circle, export_path,
                               is_simple, nucleation_path, perimeter_history, polygon_area, regular_polygon,
                               signed_distance, three_point_curvature)


def test_signed_distance_on_circles():
    path = circle_static(0.3, 0.1)
    c = np.array(path.center)
    assert abs(signed_distance(path, 0.0, c + [0.3, 0.0])) < 1e-15
    assert abs(signed_distance(path, 0.0, c + [0.0, 0.15]) - 0.15) < 1e-15
    assert signed_distance(path, 0.0, c + [0.0, 0.45]) < 0
    with pytest.raises(GeometryError):
        signed_distance(path, 0.0, c, w=0.35)


def test_signed_distance_has_unit_gradient_in_the_tube():
    path = circle_static(0.3, 0.1)
    r = np.linspace(0.16, 0.44, 57)
    x = np.stack([0.5 + r, np.full_like(r, 0.5)], axis=-1)
    d = signed_distance(path, 0.0, x)
    assert np.allclose(np.diff(d) / np.diff(r), -1.0, atol=1e-12)
    far = signed_distance(path, 0.0, np.array([[0.5, 0.5 + 0.02], [0.5, 0.99]]))
    assert far[0] <= 0.15 * 1.5 + 1e-15 and far[1] >= -0.15 * 1.5 - 1e-15


def test_curvature_and_velocity_of_circles():
    mcf = evolve_mcf_circle(0.3, 0.5, 0.05)
    for t in (0.01, 0.03):
        k, v = curvature_velocity(mcf, t)
        assert abs(v - 0.5 * k) < 1e-12
        k2, v2 = curvature_velocity(mcf, t, dt=1e-5)
        assert abs(v2 - v) < 1e-6
    k, v = curvature_velocity(circle_static(0.25, 1.0), 0.5)
    assert k == 4.0 and v == 0.0


def test_polygon_curvature_converges_at_second_order():
    # vertices of a regular polygon lie on the circle, so the circumscribed circle is exact
    assert np.max(np.abs(three_point_curvature(regular_polygon(0.2, 64)) - 5.0)) < 1e-11
    a, b = 0.2, 0.1
    errs = []
    for n in (64, 128, 256):
        th = 2 * np.pi * np.arange(n) / n
        P = np.column_stack([a * np.cos(th), b * np.sin(th)])
        exact = a * b / (a * a * np.sin(th) ** 2 + b * b * np.cos(th) ** 2) ** 1.5
        errs.append(np.max(np.abs(three_point_curvature(P) - exact)))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_mcf_circle_closed_form():
    p = evolve_mcf_circle(0.3, 0.5, 1.0)
    assert abs(p.t_ext - 0.09) < 1e-15
    t = np.linspace(0, 0.09, 50)
    assert np.max(np.abs(p.radius(t) ** 2 + 2 * 0.5 * t - 0.09)) < 1e-14
    with pytest.raises(GeometryError):
        p.radius(0.1)
    still = evolve_mcf_circle(0.3, 0.0, 1.0)
    assert np.all(still.radius(t) == 0.3)


def test_sharp_action_closed_forms():
    mu, theta = 0.7, 0.5
    assert action_sharp(evolve_mcf_circle(0.3, theta, 0.05), mu, theta) < 1e-10
    T, R0 = 0.2, 0.25
    exact = math.pi * theta ** 2 * T / (2 * mu * R0)
    assert abs(action_sharp(circle_static(R0, T), mu, theta) - exact) < 1e-12
    # reversed flow: (v + theta k)^2 = (v - theta k)^2 + 4 theta k v integrates to (theta/mu) dPer
    fwd = evolve_mcf_circle(0.3, theta, 0.06)
    R = lambda t: np.sqrt(0.09 - 2 * theta * (0.06 - t))
    rev = type(fwd)(R, lambda t: theta / R(t), 0.06, fwd.center)
    dper = 2 * math.pi * (R(0.06) - R(0.0))
    assert abs(action_sharp(rev, mu, theta) - theta / mu * dper) < 1e-3 * theta / mu * dper


def test_perimeter_derivative_identity():
    p = circle_linear(0.3, 0.5, 0.2)
    t = p.times()
    per = perimeter_history(p)
    k, v = curvature_velocity(p, 0.1)
    dper = np.gradient(per, t)[len(t) // 2]
    assert abs(dper + 2 * math.pi * p.radius(0.1) * k * v) < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.4), st.floats(-0.5, 0.5), st.floats(0.01, 1.0), st.floats(0.1, 2.0))
def test_sharp_action_nonnegative(R0, c, theta, mu):
    T = 0.5 * R0 / max(abs(c), 1e-3)
    p = circle_linear(R0, c, min(T, 0.2))
    assert action_sharp(p, mu, theta) >= 0


def test_csf_circle_extinction_and_area_monotone():
    path = evolve_csf_polygon(regular_polygon(0.2, 256), 0.5)
    assert abs(path.t_ext - 0.04) / 0.04 < 0.05
    areas = np.array([polygon_area(c) for c in path.curves])
    assert np.all(np.diff(areas) < 0)
    assert all(is_simple(c) for c in path.curves[:: max(1, len(path.curves) // 20)])


def test_csf_ellipse_no_later_than_enclosing_circle():
    a, b = 0.12, 0.04
    path = evolve_csf_polygon(ellipse_polygon(a, b, 256), 0.5)
    assert path.t_ext <= a ** 2 / (2 * 0.5) * 1.05


def test_csf_rejects_self_intersection():
    bow = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float)
    bow = np.concatenate([bow + 0.01 * k for k in range(3)])
    with pytest.raises(GeometryError):
        evolve_csf_polygon(bow, 0.5)


def test_drift_vanishes_on_mcf_with_half_theta():
    p = evolve_mcf_circle(0.3, 0.5, 0.05)
    assert abs(drift_A(p, 0.02)) < 1e-12
    assert drift_A(p, 0.02, variant="flipped") == -drift_A(p, 0.02)


def test_nucleation_cost_and_extinction_bound():
    theta, mu = 0.5, 0.5
    tau = theta / mu
    ell, Nd = 0.5, 32
    rev, rep = nucleation_path(ell, Nd, ell / (10 * Nd), theta, mu, tau, n_vertices=256)
    assert 0.95 <= rep.ratio <= 1.05 and rep.converged
    assert rep.extinction_time <= rep.extinction_bound * 1.05
    _, fat = nucleation_path(ell, 4, ell / 4, theta, mu, tau, n_vertices=128)
    assert fat.initial_perimeter > 2 * ell and not fat.converged


def test_export_files(tmp_path):
    p = circle_linear(0.3, 0.5, 0.2)
    export_path(p, tmp_path / "p.csv", tmp_path / "p.json", n_vertices=16, nt=5)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,vertex,x,y" and len(lines) == 1 + 5 * 16
    meta = json.loads((tmp_path / "p.json").read_text())
    assert meta["kind"] == "circle_family" and meta["extinction_time"] is None
