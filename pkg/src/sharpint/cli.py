"""Command-line driver: ``sharpint run --config cfg.json`` and ``sharpint sweep``.

Configs are flat JSON objects; every key is listed in :data:`SCHEMA`.  Each run
writes ``manifest.json`` (inputs, versions, hash, timestamp), ``results.csv``
and ``summary.txt`` plus experiment-specific artifacts.  CSV bodies depend on
the config only, so repeated runs give byte-identical tables.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import platform
import sys
import traceback
from dataclasses import dataclass, field

import numpy as np

from . import __version__

EXPERIMENTS = ("instanton", "coefficients", "corrector", "action-kac", "action-gk", "mcf", "nucleation",
               "front-speed", "lattice-kac", "lattice-gk", "hydro-compare")
SWEEPABLE = ("eps", "gamma", "N", "h", "gk_h", "n")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


# key: (type, default, help).  Types: float, int, bool, str, "floats" (list of floats) or a tuple of choices.
SCHEMA = {
    "experiment": (EXPERIMENTS, None, "pipeline to run"),
    "model": (("kac", "gk"), "kac", "particle system for instanton/coefficients/corrector/mcf/hydro-compare"),
    "beta": (float, 2.0, "inverse temperature (> 1)"),
    "dim": (int, 2, "spatial dimension of the Kac kernels"),
    "J": (("bump", "annular"), "bump", "interaction kernel family"),
    "K": (("bump", "annular"), "annular", "rate kernel family"),
    "rate_family": (("constant", "standard_cosh"), "constant", "Kac flip-rate family"),
    "a0": (float, 0.5, "constant flip rate"),
    "pair_r": (float, 0.25, "half-distance of the stable roots of the symmetric cubic pair"),
    "h": (float, 1.0 / 64, "Kac instanton grid spacing"),
    "Xi": (float, 20.0, "Kac instanton half-width"),
    "gk_h": (float, 1.0 / 16, "GK instanton grid spacing"),
    "gk_Xi": (float, 80.0, "GK instanton half-width"),
    "eps": (float, 0.05, "interface width for single-eps experiments"),
    "eps_values": ("floats", [0.08, 0.06, 0.04], "eps ladder for action experiments"),
    "R0": (float, 0.3, "initial circle radius"),
    "speed": (float, 0.5, "shrinking speed of the linear circle path"),
    "T_path": (float, 0.2, "duration of the circle path"),
    "corrected": (bool, True, "use the optimal corrector (False: Q = 0)"),
    "route": (("newton", "ansatz"), "newton", "GK action route"),
    "nt": (int, 24, "time quadrature nodes for actions"),
    "n": (int, 0, "torus grid points per side for mcf (0: automatic)"),
    "dt_factor": (float, 0.08, "Kac flow time step in units of eps^2"),
    "h_fields": ("floats", [0.002, 0.004], "external fields for front-speed"),
    "front_T": (float, 400.0, "front-speed simulation time"),
    "front_grid_h": (float, 1.0 / 32, "front-speed grid spacing"),
    "front_dt": (float, 0.05, "front-speed time step"),
    "ell": (float, 0.5, "nucleation segment length"),
    "N_delta": (int, 32, "number of ellipses in the nucleation chain"),
    "m_delta": (float, 0.0, "ellipse minor axis (0: ell / (10 N_delta))"),
    "gamma": (float, 1.0 / 64, "Kac lattice spacing"),
    "L": (float, 8.0, "Kac torus side (lattice experiments, d = 1)"),
    "N": (int, 128, "GK sites per unit length"),
    "T_sim": (float, 0.5, "lattice simulation time"),
    "runs": (int, 8, "seeds per rung in hydro-compare"),
    "blocks": (int, 16, "coarse-graining cells"),
    "n_snap": (int, 5, "lattice snapshots"),
    "gibbs_T": (float, 0.0, "lattice-kac: also run the 8-site Gibbs check for this long (0: skip)"),
    "seed": (int, 0, "random seed"),
    "outdir": (str, "out", "output directory (not part of the hash)"),
}
TREND = {
    "instanton": ("residual",), "coefficients": ("tau", "mu", "theta"), "corrector": ("residual",),
    "action-kac": ("gap",), "action-gk": ("gap", "sup_H_diff"), "mcf": ("slope_rel_err",),
    "nucleation": ("ratio",), "front-speed": ("slope",), "lattice-kac": ("magnetization",),
    "lattice-gk": ("density",), "hydro-compare": ("l1_fine",),
}


@dataclass
class ExperimentConfig:
    """Validated flat configuration; unset keys take their schema defaults."""

    values: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "experiment" not in raw:
            raise ConfigError("missing required key 'experiment'")
        vals = {}
        for key, (typ, default, _) in SCHEMA.items():
            vals[key] = _coerce(key, typ, raw[key]) if key in raw else default
        return cls(vals)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None

    def to_dict(self) -> dict:
        return dict(self.values)

    def to_json(self) -> str:
        return json.dumps(self.values, sort_keys=True, indent=2)

    def hashed_part(self) -> dict:
        return {k: v for k, v in self.values.items() if k != "outdir"}

    @property
    def hash(self) -> str:
        from .dynamics.pde import config_hash
        return config_hash(self.hashed_part())

    def replace(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(kw)
        return ExperimentConfig.from_dict(d)

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None


def _coerce(key, typ, v):
    if isinstance(typ, tuple):
        if v not in typ:
            raise ConfigError(f"{key} must be one of {list(typ)}, got {v!r}")
        return v
    if typ is bool:
        if not isinstance(v, bool):
            raise ConfigError(f"{key} must be true or false")
        return v
    if typ is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key} must be an integer")
        return v
    if typ is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{key} must be a finite number")
        return float(v)
    if typ is str:
        if not isinstance(v, str):
            raise ConfigError(f"{key} must be a string")
        return v
    if typ == "floats":
        if not isinstance(v, list) or not v or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                       for x in v):
            raise ConfigError(f"{key} must be a non-empty list of numbers")
        return [float(x) for x in v]
    raise ConfigError(f"bad schema entry for {key}")  # pragma: no cover


# ---------------------------------------------------------------------------
# experiment runners


@dataclass
class RunResult:
    rows: list
    summary: dict
    artifacts: list = field(default_factory=list)


def _kac_model(cfg):
    from .kernels import make_kernel
    from .models import KacModel
    J = make_kernel(cfg.J, cfg.dim, force_zero_at_origin=cfg.J == "annular" and cfg.rate_family == "standard_cosh")
    K = make_kernel(cfg.K, cfg.dim)
    return KacModel(beta=cfg.beta, J=J, K=K, rate_family=cfg.rate_family, a0=cfg.a0)


def _pair(cfg):
    from .models import make_reaction_pair
    return make_reaction_pair("symmetric_cubic", r=cfg.pair_r)


def _kac_inst(cfg, model):
    from .instanton import solve_instanton_kac
    return solve_instanton_kac(model, Xi=cfg.Xi, h=cfg.h)


def _gk_setup(cfg):
    from .coefficients import assemble_L_gk, mobility_gk
    from .instanton import solve_instanton_gk
    pair = _pair(cfg)
    inst = solve_instanton_gk(pair, Xi=cfg.gk_Xi, h=cfg.gk_h)
    L = assemble_L_gk(pair, inst)
    mu, tau = mobility_gk(inst, L)
    return pair, inst, L, mu, tau


def _kac_setup(cfg):
    from .coefficients import assemble_L_kac, compute_coefficients_kac
    model = _kac_model(cfg)
    inst = _kac_inst(cfg, model)
    C = compute_coefficients_kac(model, inst)
    L = assemble_L_kac(model, inst)
    return model, inst, C, L


def run_instanton(cfg, outdir):
    if cfg.model == "kac":
        from .instanton import check_asymptotics, solve_decay_rate
        model = _kac_model(cfg)
        inst = _kac_inst(cfg, model)
        v = inst.profile.values
        alpha = solve_decay_rate(model)
        asym = check_asymptotics(inst, alpha)
        row = dict(model="kac", h=inst.h, Xi=inst.profile.cutoff, residual=inst.residual_sup,
                   odd_defect=float(np.max(np.abs(v + v[::-1]))), m_beta=model.m_beta, alpha=alpha,
                   tail_rate=asym.slope, tail_rel_gap=asym.rel_gap)
    else:
        from .instanton import first_integral_defect, gk_residual, solve_instanton_gk
        pair = _pair(cfg)
        inst = solve_instanton_gk(pair, Xi=cfg.gk_Xi, h=cfg.gk_h)
        r = cfg.pair_r
        closed = 0.5 + r * np.tanh(r * inst.xi)
        row = dict(model="gk", h=inst.h, Xi=inst.profile.cutoff, residual=gk_residual(pair, inst.profile),
                   first_integral_defect=first_integral_defect(pair, inst),
                   closed_form_sup=float(np.max(np.abs(inst.profile.values - closed))),
                   grad_norm_sq=float(inst.h * np.sum(inst.d1.values ** 2)))
    path = os.path.join(outdir, "profile.csv")
    _write_csv(path, [dict(xi=x, value=u) for x, u in zip(inst.xi, inst.profile.values)], cfg)
    return RunResult([row], dict(row), [path])


def run_coefficients(cfg, outdir):
    if cfg.model == "kac":
        from .coefficients import compute_coefficients_kac
        model = _kac_model(cfg)
        C = compute_coefficients_kac(model, _kac_inst(cfg, model))
        row = dict(model="kac", h=cfg.h, m_beta=C.m_beta, alpha=C.alpha, tau=C.tau, tau_alt=C.tau_alt, N=C.N,
                   mu=C.mu, theta=C.theta)
    else:
        from .correctors import optimal_psi_gk
        pair, inst, L, mu, tau = _gk_setup(cfg)
        _, diag = optimal_psi_gk(inst, L, mu)
        row = dict(model="gk", h=cfg.gk_h, mu=mu, tau=tau, theta=0.5, C_star=diag["C_star"],
                   C_star_times_4mu=diag["C_star_times_4mu"])
    return RunResult([row], dict(row))


def _scalars(d: dict) -> dict:
    return {k: float(v) for k, v in d.items() if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool)}


def run_corrector(cfg, outdir):
    if cfg.model == "kac":
        from .correctors import kac_corrector_bundle
        model, inst, C, L = _kac_setup(cfg)
        B = kac_corrector_bundle(model, inst, L, C.theta)
    else:
        from .correctors import gk_corrector_bundle
        pair, inst, L, mu, tau = _gk_setup(cfg)
        B = gk_corrector_bundle(inst, L, mu)
        B.diagnostics.setdefault("residual", B.diagnostics.get("Q_residual", float("nan")))
    row = dict(model=cfg.model, **_scalars(B.diagnostics))
    path = os.path.join(outdir, "corrector.csv")
    _write_csv(path, [dict(xi=x, Q=q) for x, q in zip(inst.xi, B.Q_bar.values)], cfg)
    return RunResult([row], dict(row), [path])


def _circle(cfg):
    from .geometry import circle_linear
    return circle_linear(cfg.R0, cfg.speed, cfg.T_path)


def run_action_kac(cfg, outdir):
    from .action_kac import action_circle_kac, write_ladder_csv
    from .correctors import kac_corrector_bundle
    model, inst, C, L = _kac_setup(cfg)
    Q = kac_corrector_bundle(model, inst, L, C.theta).Q_bar if cfg.corrected else None
    path = _circle(cfg)
    reports = [action_circle_kac(model, inst, Q, path, e, coeffs=C, nt=cfg.nt) for e in cfg.eps_values]
    arts = []
    for r in reports:
        p = os.path.join(outdir, f"action_kac_eps{r.eps:g}.json")
        r.to_json(p)
        arts.append(p)
    p = os.path.join(outdir, "action_ladder.csv")
    write_ladder_csv(reports, p)
    arts.append(p)
    rows = [dict(eps=r.eps, S1=r.S1, S2=r.S2, S3=r.S3, total=r.total, S_ac=r.S_ac, gap=r.gap,
                 corrected=int(r.corrected)) for r in reports]
    gaps = [r.gap for r in reports]
    summ = dict(rows[-1], monotone=int(all(b < a for a, b in zip(gaps, gaps[1:]))))
    return RunResult(rows, summ, arts)


def run_action_gk(cfg, outdir):
    from .action_gk import action_circle_gk, ansatz_circle_gk, write_gk_ladder_csv
    from .correctors import cost_constant_gk, gk_corrector_bundle, solve_h_gk
    from .kernels import Profile
    pair, inst, L, mu, tau = _gk_setup(cfg)
    if cfg.corrected:
        B = gk_corrector_bundle(inst, L, mu)
        Q, hprof = B.Q_bar, B.h
    else:
        Q = Profile(inst.h, np.zeros_like(inst.xi), 0.0, 0.0)
        hprof, _ = solve_h_gk(inst, Q, L)
    C_Q = cost_constant_gk(inst, L, Q)
    path = _circle(cfg)
    Qarg = Q if cfg.corrected else None
    reports = []
    for e in cfg.eps_values:
        if cfg.route == "newton":
            reports.append(action_circle_gk(pair, inst, Qarg, path, e, mu=mu, h=hprof, C_Q=C_Q, nt=cfg.nt))
        else:
            reports.append(ansatz_circle_gk(pair, inst, Qarg, hprof, path, e, mu=mu, C_Q=C_Q, nt=cfg.nt))
    arts = []
    for r in reports:
        p = os.path.join(outdir, f"action_gk_eps{r.eps:g}.json")
        r.to_json(p)
        arts.append(p)
    p = os.path.join(outdir, "gk_ladder.csv")
    write_gk_ladder_csv(reports, p)
    arts.append(p)
    rows = [dict(eps=r.eps, route=r.route, total=r.total, S_ac=r.S_ac, gap=r.gap, sup_H_diff=r.sup_H_diff,
                 prediction=r.prediction, corrected=int(r.corrected)) for r in reports]
    return RunResult(rows, dict(rows[-1]), arts)


def run_mcf(cfg, outdir):
    from .dynamics.pde import (check_circle_shrinking, circle_data, evolve_nonlocal, evolve_rd, level_set_radius,
                               torus_radius, write_trajectory)
    from .geometry import evolve_mcf_circle, export_path
    eps, R0 = cfg.eps, cfg.R0
    if cfg.model == "kac":
        from .instanton import kac_interpolant
        model, inst, C, _ = _kac_setup(cfg)
        if model.dim != 2:
            raise ConfigError("mcf needs dim = 2")
        theta = C.theta
        n = cfg.n or int(math.ceil(8.0 / eps))
        u0 = circle_data(kac_interpolant(model, inst), n, R0, eps)
        dt = cfg.dt_factor * eps ** 2
        T = round(R0 ** 2 / (4 * theta) / dt) * dt
        traj = evolve_nonlocal(model, u0, dt, T, rescaled=True, eps=eps, n_snap=20)
        radii = [torus_radius(s, -model.m_beta, model.m_beta) for s in traj.snapshots]
    else:
        from .instanton import profile_interpolant, solve_instanton_gk
        pair = _pair(cfg)
        gi = solve_instanton_gk(pair, Xi=cfg.gk_Xi, h=cfg.gk_h)
        theta = 0.5
        n = cfg.n or int(math.ceil(4.0 / eps))
        u0 = circle_data(profile_interpolant(gi.profile, slopes=gi.d1.values, tail="limits"), n, R0, eps)
        dt = 0.25 / n ** 2
        T = round(R0 ** 2 / (4 * theta) / dt) * dt
        traj = evolve_rd(pair, u0, dt, T, eps=eps, n_snap=20)
        radii = [level_set_radius(s, pair.midpoint) for s in traj.snapshots]
    ck = check_circle_shrinking(traj.times, radii, R0, theta)
    arts = list(write_trajectory(traj, outdir, cfg.hashed_part()))
    sharp = evolve_mcf_circle(R0, theta, float(traj.times[-1]))
    pc, pj = os.path.join(outdir, "path.csv"), os.path.join(outdir, "path.json")
    export_path(sharp, pc, pj, n_vertices=64, nt=21)
    arts += [pc, pj]
    rows = [dict(t=t, R=R, R2=R * R, R2_predicted=p) for t, R, p in zip(ck.times, ck.radii, ck.predicted)]
    summ = dict(model=cfg.model, eps=eps, n=n, theta=theta, slope=ck.slope, slope_target=ck.slope_target,
                slope_rel_err=ck.slope_rel_err, max_rel_dev=ck.max_rel_dev)
    return RunResult(rows, summ, arts)


def run_nucleation(cfg, outdir):
    from .geometry import export_path, nucleation_path
    _, _, C, _ = _kac_setup(cfg)
    m_delta = cfg.m_delta or cfg.ell / (10 * cfg.N_delta)
    rev, rep = nucleation_path(cfg.ell, cfg.N_delta, m_delta, C.theta, C.mu, C.tau)
    pc, pj = os.path.join(outdir, "path.csv"), os.path.join(outdir, "path.json")
    export_path(rev, pc, pj, nt=21)
    row = dict(cost=rep.cost_direct, cost_perimeter=rep.cost_perimeter, target=rep.target, ratio=rep.ratio,
               extinction_time=rep.extinction_time, extinction_bound=rep.extinction_bound,
               within_bound=int(rep.within_bound), converged=int(rep.converged), n_ellipses=rep.n_ellipses)
    return RunResult([row], dict(row), [pc, pj])


def run_front_speed(cfg, outdir):
    from .coefficients import compute_coefficients_kac
    from .dynamics.pde import linear_response
    from .instanton import solve_instanton_kac
    model = _kac_model(cfg)
    inst = solve_instanton_kac(model, h=cfg.front_grid_h)
    C = compute_coefficients_kac(model, _kac_inst(cfg, model))
    target = -2 * model.m_beta * C.mu
    lr = linear_response(model, fields=tuple(cfg.h_fields), grid_h=cfg.front_grid_h, dt=cfg.front_dt,
                         T=cfg.front_T, inst=inst)
    rows = []
    for hf, s, od in zip(cfg.h_fields, lr["slopes"], lr["odd_defect"]):
        rows.append(dict(h=hf, v_plus=lr["speeds"][hf], v_minus=lr["speeds"][-hf], slope=s, target=target,
                         rel_err=abs(s / target - 1), odd_defect=od))
    return RunResult(rows, dict(rows[0]))


def _lattice_rows(tr, kind):
    rows = []
    for t, c in zip(tr.times, tr.coarse):
        for i, v in enumerate(np.ravel(c)):
            rows.append({"t": t, "block": i, kind: v})
    return rows


def run_lattice_kac(cfg, outdir):
    from .dynamics.lattice import _default_m0, gibbs_check, kac_model_1d, simulate_glauber_kac
    model = kac_model_1d(cfg.beta, cfg.a0) if cfg.dim == 1 else _kac_model(cfg)
    times = np.linspace(0.0, cfg.T_sim, cfg.n_snap)
    m0 = _default_m0(cfg.L) if model.dim == 1 else 0.0
    tr = simulate_glauber_kac(model, cfg.gamma, cfg.L, cfg.T_sim, cfg.seed, m0=m0, snapshot_times=times,
                              blocks=cfg.blocks)
    rows = _lattice_rows(tr, "magnetization")
    summ = dict(events=tr.events, sites=tr.meta["sites"], magnetization=float(np.mean(tr.final)))
    if cfg.gibbs_T > 0:
        tv, ev = gibbs_check(kac_model_1d(cfg.beta, cfg.a0), T=cfg.gibbs_T, seed=cfg.seed)
        summ.update(gibbs_tv=tv, gibbs_events=ev)
    return RunResult(rows, summ)


def run_lattice_gk(cfg, outdir):
    from .dynamics.lattice import _default_u0, bernstein_rate, simulate_gk
    c = bernstein_rate(_pair(cfg))
    times = np.linspace(0.0, cfg.T_sim, cfg.n_snap)
    tr = simulate_gk(cfg.N, c, cfg.T_sim, cfg.seed, u0=_default_u0, snapshot_times=times, blocks=cfg.blocks)
    rows = _lattice_rows(tr, "density")
    summ = dict(events=tr.events, births=tr.meta["births"], deaths=tr.meta["deaths"],
                exchanges=tr.meta["exchanges"], density=float(np.mean(tr.final)))
    return RunResult(rows, summ)


def run_hydro_compare(cfg, outdir):
    from .dynamics.lattice import bernstein_rate, hydro_compare_gk, hydro_compare_kac, kac_model_1d
    if cfg.model == "kac":
        hc = hydro_compare_kac(kac_model_1d(cfg.beta, cfg.a0), gammas=(cfg.gamma, cfg.gamma / 2), L=cfg.L,
                               T=cfg.T_sim, runs=cfg.runs, seed=cfg.seed, blocks=cfg.blocks)
    else:
        pair = _pair(cfg)
        hc = hydro_compare_gk(pair, Ns=(cfg.N, 2 * cfg.N), T=cfg.T_sim, runs=cfg.runs, seed=cfg.seed,
                              blocks=cfg.blocks, c_local=bernstein_rate(pair))
    rows = [dict(model=cfg.model, **r) for r in hc.rows()]
    summ = dict(model=cfg.model, l1_coarse=hc.l1[0], l1_fine=hc.l1[1], decreasing=int(hc.decreasing))
    return RunResult(rows, summ)


RUNNERS = {
    "instanton": run_instanton, "coefficients": run_coefficients, "corrector": run_corrector,
    "action-kac": run_action_kac, "action-gk": run_action_gk, "mcf": run_mcf, "nucleation": run_nucleation,
    "front-speed": run_front_speed, "lattice-kac": run_lattice_kac, "lattice-gk": run_lattice_gk,
    "hydro-compare": run_hydro_compare,
}


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path, rows, cfg, extra_cols=()):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    cols = list(extra_cols) + [c for c in cols if c not in extra_cols]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config_hash", "version"] + cols)
        for r in rows:
            w.writerow([cfg.hash, __version__] + [_fmt(r.get(c, "")) for c in cols])


def _versions():
    import scipy
    from .dynamics._backend import BACKEND
    return dict(sharpint=__version__, python=platform.python_version(), numpy=np.__version__,
                scipy=scipy.__version__, kmc_backend=BACKEND)


def _write_manifest(outdir, cfg, outputs, status, extra=None):
    man = dict(config=cfg.to_dict(), config_hash=cfg.hash, versions=_versions(), status=status,
               outputs=sorted(os.path.relpath(p, outdir) for p in outputs),
               created=datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"))
    if extra:
        man.update(extra)
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _write_summary(path, title, summary):
    width = max((len(k) for k in summary), default=0)
    with open(path, "w") as fh:
        fh.write(title + "\n")
        for k, v in summary.items():
            fh.write(f"  {k:<{width}}  {_fmt(v)}\n")


def execute(cfg: ExperimentConfig, outdir: str | None = None) -> RunResult:
    """Run one experiment and write its outputs to ``outdir`` (default ``cfg.outdir``)."""
    outdir = outdir or cfg.outdir
    os.makedirs(outdir, exist_ok=True)
    res = RUNNERS[cfg.experiment](cfg, outdir)
    res_path = os.path.join(outdir, "results.csv")
    _write_csv(res_path, res.rows, cfg)
    summ_path = os.path.join(outdir, "summary.txt")
    _write_summary(summ_path, f"{cfg.experiment} [{cfg.hash}]", res.summary)
    _write_manifest(outdir, cfg, [res_path, summ_path] + res.artifacts, "ok")
    return res


def _successive(vals):
    ratio = [float("nan")] + [b / a if a else float("nan") for a, b in zip(vals, vals[1:])]
    diffs = [b - a for a, b in zip(vals, vals[1:])]
    dratio = [float("nan")] * 2 + [a / b if b else float("nan") for a, b in zip(diffs, diffs[1:])]
    return ratio, dratio[:len(vals)]


def sweep(cfg: ExperimentConfig, param: str, values, outdir: str | None = None):
    """Run ``cfg`` once per value of ``param``; each sub-run has its own directory.

    The ladder table has one row per value, the run summary and, for the
    experiment's trend metrics, the successive ratios ``x_k / x_{k-1}`` and
    difference ratios ``(x_{k-1} - x_{k-2}) / (x_k - x_{k-1})``.
    """
    if param not in SWEEPABLE:
        raise ConfigError(f"parameter {param!r} is not sweepable; choose from {list(SWEEPABLE)}")
    values = list(values)
    if not values:
        raise ConfigError("empty values list")
    outdir = outdir or cfg.outdir
    os.makedirs(outdir, exist_ok=True)
    rows, arts = [], []
    for v in values:
        kw = {param: v}
        if param == "eps":
            kw["eps_values"] = [float(v)]
        sub = cfg.replace(**kw)
        subdir = os.path.join(outdir, "runs", f"{param}={v:g}")
        res = execute(sub, subdir)
        rows.append(dict({param: v, "run_hash": sub.hash}, **res.summary))
        arts.append(os.path.join(subdir, "manifest.json"))
    for key in TREND[cfg.experiment]:
        vals = [float(r.get(key, float("nan"))) for r in rows]
        ratio, dratio = _successive(vals)
        for r, a, b in zip(rows, ratio, dratio):
            r[f"ratio_{key}"] = a
            r[f"diffratio_{key}"] = b
    res_path = os.path.join(outdir, "results.csv")
    _write_csv(res_path, rows, cfg, extra_cols=(param,))
    summ_path = os.path.join(outdir, "summary.txt")
    with open(summ_path, "w") as fh:
        fh.write(f"sweep of {cfg.experiment} over {param} [{cfg.hash}]\n")
        for r in rows:
            fh.write("  " + ", ".join(f"{k}={_fmt(v)}" for k, v in r.items() if k != "run_hash") + "\n")
    _write_manifest(outdir, cfg, [res_path, summ_path] + arts, "ok",
                    dict(sweep=dict(param=param, values=values)))
    return rows


# ---------------------------------------------------------------------------
# entry point


def _parse_values(text: str, param: str):
    text = text.strip()
    if not text:
        return []
    try:
        vals = json.loads(text) if text.startswith("[") else [json.loads(x) for x in text.split(",") if x.strip()]
    except json.JSONDecodeError:
        raise ConfigError(f"cannot parse values {text!r}") from None
    typ = SCHEMA[param][0] if param in SCHEMA else float
    return [_coerce(param, typ, v) for v in vals]


def _fail(code, exc, outdir, context):
    rec = dict(status="error", exit_code=code, error=type(exc).__name__, message=str(exc),
               module=type(exc).__module__, context=context)
    if code == EXIT_NUMERIC:
        rec["traceback"] = traceback.format_exception_only(type(exc), exc)[-1].strip()
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    if outdir:
        try:
            os.makedirs(outdir, exist_ok=True)
            with open(os.path.join(outdir, "error.json"), "w") as fh:
                json.dump(rec, fh, indent=2, sort_keys=True)
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sharpint", description="Sharp-interface numerics experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("run", help="run one experiment")
    pr.add_argument("--config", required=True)
    pr.add_argument("--experiment", choices=EXPERIMENTS, help="override the experiment in the config")
    pr.add_argument("--outdir")
    ps = sub.add_parser("sweep", help="run a ladder over one parameter")
    ps.add_argument("--config", required=True)
    ps.add_argument("--param", required=True)
    ps.add_argument("--values", required=True, help="comma-separated list or JSON array")
    ps.add_argument("--experiment", choices=EXPERIMENTS)
    ps.add_argument("--outdir")
    sub.add_parser("schema", help="print the config keys")
    args = ap.parse_args(argv)
    if args.command == "schema":
        for k, (typ, default, hlp) in SCHEMA.items():
            tname = typ.__name__ if isinstance(typ, type) else ("list" if typ == "floats" else "|".join(typ))
            print(f"{k:<14}{json.dumps(default):<22}{hlp} [{tname}]")
        return EXIT_OK
    outdir = args.outdir
    context = dict(command=args.command, config=args.config)
    try:
        cfg = ExperimentConfig.from_file(args.config)
        if args.experiment:
            cfg = cfg.replace(experiment=args.experiment)
        outdir = outdir or cfg.outdir
        context["experiment"] = cfg.experiment
        if args.command == "run":
            execute(cfg, outdir)
        else:
            context["param"] = args.param
            sweep(cfg, args.param, _parse_values(args.values, args.param), outdir)
    except (ConfigError, ValueError) as exc:
        return _fail(EXIT_CONFIG, exc, outdir, context)
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, exc, outdir, context)
    except Exception as exc:  # unexpected: still leave a machine-readable record
        context["unexpected"] = True
        return _fail(EXIT_NUMERIC, exc, outdir, context)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
