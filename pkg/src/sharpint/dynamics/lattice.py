"""Microscopic kinetic Monte Carlo for the Glauber-Kac spins and Glauber+Kawasaki particles.

Both samplers are exact in law: continuous-time Gillespie steps with the site
rates kept in a binary sum tree and refreshed locally after each event.  All
randomness comes from one seeded generator drawn in fixed-size chunks, so a
seed determines the trajectory independently of the backend.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from ..kernels import make_kernel
from ..models import KacModel, ReactionPair, make_reaction_pair
from ._backend import get_backend
from .pde import DynamicsError, evolve_nonlocal, evolve_rd

CHUNK = 1 << 16
MAX_SITES = 1 << 22


@dataclass
class LatticeTrajectory:
    """Snapshots of a lattice system with their block averages.

    ``coarse[k]`` is the block average of ``snapshots[k]`` (magnetization for
    spins, density for particles) on ``blocks`` cells per axis.
    """

    times: np.ndarray
    snapshots: np.ndarray
    coarse: np.ndarray
    events: int
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.snapshots[-1]


def _tree_size(n: int) -> int:
    P = 1
    while P < n:
        P *= 2
    return P


def _build_tree(rates: np.ndarray, P: int) -> np.ndarray:
    tree = np.zeros(2 * P)
    tree[P:P + rates.size] = rates
    level = P
    while level > 1:
        half = level // 2
        tree[half:level] = tree[level:2 * level:2] + tree[level + 1:2 * level:2]
        level = half
    return tree


class _Uniforms:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.buf = rng.random(CHUNK)
        self.used = 0

    def refill(self):
        self.buf = self.rng.random(CHUNK)
        self.used = 0


def _lattice_shape(n_side: int, d: int):
    if d == 1:
        return n_side, 1
    if d == 2:
        return n_side, n_side
    raise DynamicsError("lattice dynamics implemented for d = 1, 2")


def _site_coords(n_side: int, d: int, spacing: float):
    x = np.arange(n_side) * spacing
    if d == 1:
        return x
    return np.meshgrid(x, x, indexing="ij")


def block_average(values: np.ndarray, blocks: int) -> np.ndarray:
    """Average a periodic lattice array over ``blocks`` equal cells per axis."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    if n % blocks:
        raise DynamicsError(f"{n} sites do not split into {blocks} blocks")
    b = n // blocks
    if v.ndim == 1:
        return v.reshape(blocks, b).mean(axis=1)
    return v.reshape(blocks, b, blocks, b).mean(axis=(1, 3))


# ---------------------------------------------------------------------------
# Glauber-Kac


def kac_stencil(model: KacModel, gamma: float):
    """Lattice offsets and weights ``gamma^d J(gamma k)``, ``gamma^d K(gamma k)``.

    The offset zero is always present so the flipped site's own rate is refreshed.
    """
    d = model.dim
    rad = max(model.J.radius, model.K.radius)
    kmax = int(math.floor(rad / gamma))
    rng1 = np.arange(-kmax, kmax + 1)
    if d == 1:
        off = [(int(k), 0) for k in rng1]
    else:
        off = [(int(a), int(b)) for a in rng1 for b in rng1]
    dxy = np.array(off, dtype=np.intc)
    z = dxy[:, :d] * gamma
    scale = gamma ** d
    wJ = scale * np.asarray(model.J(z), dtype=float)
    wK = scale * np.asarray(model.K(z), dtype=float)
    keep = (wJ != 0) | (wK != 0) | np.all(dxy == 0, axis=1)
    dxy, wJ, wK = dxy[keep], wJ[keep], wK[keep]
    return np.ascontiguousarray(dxy[:, 0]), np.ascontiguousarray(dxy[:, 1]), wJ, wK


def _fields(sigma2d: np.ndarray, sdx, sdy, w):
    out = np.zeros(sigma2d.shape)
    for a, b, c in zip(sdx, sdy, w):
        if c != 0.0:
            out += c * np.roll(sigma2d, (-int(a), -int(b)), axis=(0, 1))
    return out


def _initial_spins(m0, coords, shape, rng) -> np.ndarray:
    mean = np.broadcast_to(np.asarray(m0(coords) if callable(m0) else m0, dtype=float).reshape(-1), shape[0] * shape[1])
    mean = mean.reshape(shape)
    if np.any(np.abs(mean) > 1):
        raise DynamicsError("initial magnetization outside [-1, 1]")
    up = rng.random(shape) < 0.5 * (1.0 + mean)
    return np.where(up, 1, -1).astype(np.int8)


def _kac_rates(model: KacModel, sigma, hJ, hK):
    family = 0 if model.rate_family == "constant" else 1
    a = np.full(sigma.shape, model.a0) if family == 0 else 0.5 / np.cosh(model.beta * hK)
    return a * np.exp(-model.beta * hJ * sigma)


def simulate_glauber_kac(model: KacModel, gamma: float, L: float, T: float, seed: int, m0=0.0,
                         snapshot_times=None, blocks: int | None = None, track_states: bool = False,
                         backend: str | None = None) -> LatticeTrajectory:
    """Glauber dynamics of the Ising-Kac spins on the torus of side ``L`` with spacing ``gamma``.

    Sites sit at ``gamma i``; the flip rate at ``i`` is
    ``a(K*sigma)(i) exp(-beta (J*sigma)(i) sigma_i)`` with the lattice convolution
    ``(J*sigma)(i) = gamma^d sum_j J(gamma (i - j)) sigma_j``.

    Parameters
    ----------
    m0 : float, array or callable
        Mean of the product initial measure, as a function of the site coordinates.
    snapshot_times : sequence, optional
        Defaults to ``(0, T)``.
    blocks : int, optional
        Coarse-graining cells per axis (defaults to one cell per site).
    track_states : bool
        Accumulate the time spent in each configuration (small systems only).
    """
    ratio = L / gamma
    n_side = int(round(ratio))
    if n_side < 1 or abs(ratio - n_side) > 1e-9 * ratio:
        raise DynamicsError("L / gamma must be a positive integer")
    d = model.dim
    n0, n1 = _lattice_shape(n_side, d)
    n = n0 * n1
    if n > MAX_SITES:
        raise DynamicsError(f"memory bound exceeded: {n} sites")
    if track_states and n > 20:
        raise DynamicsError("state tracking needs at most 20 sites")
    kmc, label = get_backend(backend)
    rng = np.random.default_rng(seed)
    coords = _site_coords(n_side, d, gamma)
    sigma2d = _initial_spins(m0, coords, (n0, n1), rng)
    sdx, sdy, wJ, wK = kac_stencil(model, gamma)
    hJ = _fields(sigma2d.astype(float), sdx, sdy, wJ).ravel()
    hK = _fields(sigma2d.astype(float), sdx, sdy, wK).ravel()
    sigma = np.ascontiguousarray(sigma2d.ravel())
    P = _tree_size(n)
    tree = _build_tree(_kac_rates(model, sigma, hJ, hK), P)
    family = 0 if model.rate_family == "constant" else 1
    hist = np.zeros(1 << n) if track_states else np.zeros(0)
    state = int(np.sum((sigma > 0).astype(np.int64) << np.arange(n))) if track_states else 0
    times = np.array([0.0, T] if snapshot_times is None else snapshot_times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > T + 1e-12:
        raise DynamicsError("snapshot times must be sorted inside [0, T]")
    blocks = blocks or n_side
    shape = (n_side,) if d == 1 else (n_side, n_side)
    uni = _Uniforms(rng)
    t, events = 0.0, 0
    snaps, coarse = [], []
    for ts in times:
        while t < ts:
            t, used, ev, state, status = kmc.kac_advance(sigma, hJ, hK, tree, P, n0, n1, sdx, sdy, wJ, wK,
                                                          float(model.beta), float(model.a0), family, uni.buf,
                                                          uni.used, t, float(ts), hist, state)
            uni.used = used
            events += ev
            if status:
                uni.refill()
        snap = sigma.reshape(shape).copy()
        snaps.append(snap)
        coarse.append(block_average(snap, blocks))
    meta = dict(gamma=gamma, L=L, d=d, seed=seed, backend=label, model=model.label(), sites=n,
                stencil=len(sdx), blocks=blocks)
    if track_states:
        meta["state_time"] = hist
    return LatticeTrajectory(times, np.array(snaps), np.array(coarse), events, meta)


def gibbs_weights(model: KacModel, gamma: float, L: float) -> np.ndarray:
    """Exact Gibbs probabilities of every spin configuration on a small 1-d torus.

    The weight is ``exp(beta/2 sum_{i != j} C_ij s_i s_j)`` with ``C`` the folded
    lattice coupling; state ``s`` has spin ``i`` up iff bit ``i`` is set.
    """
    if model.dim != 1:
        raise DynamicsError("enumeration implemented for d = 1")
    n = int(round(L / gamma))
    if n > 20:
        raise DynamicsError("enumeration needs at most 20 sites")
    sdx, _, wJ, _ = kac_stencil(model, gamma)
    C = np.zeros((n, n))
    for k, w in zip(sdx, wJ):
        for i in range(n):
            C[i, (i + k) % n] += w
    np.fill_diagonal(C, 0.0)
    codes = np.arange(1 << n)
    S = np.where((codes[:, None] >> np.arange(n)) & 1, 1.0, -1.0)
    E = 0.5 * model.beta * np.einsum("si,ij,sj->s", S, C, S)
    w = np.exp(E - E.max())
    return w / w.sum()


def gibbs_check(model: KacModel, gamma: float = 0.125, L: float = 1.0, T: float = 2.0e4, seed: int = 0,
                backend: str | None = None):
    """Total-variation distance between time-averaged occupation and the Gibbs measure.

    Returns ``(tv, events)``.
    """
    tr = simulate_glauber_kac(model, gamma, L, T, seed, m0=0.0, track_states=True, backend=backend)
    occ = tr.meta["state_time"] / T
    exact = gibbs_weights(model, gamma, L)
    return 0.5 * float(np.abs(occ - exact).sum()), tr.events


# ---------------------------------------------------------------------------
# Glauber + Kawasaki


@dataclass(frozen=True)
class LocalRate:
    """Glauber rate ``c(eta)`` at the origin as a table over a finite window.

    ``offsets`` are lattice offsets (tuples of length d); bit ``b`` of a table
    index is the occupation at ``offsets[b]``.  The origin must be in the window.
    """

    offsets: tuple
    table: tuple
    label: str = ""

    def __post_init__(self):
        if len(self.table) != 1 << len(self.offsets):
            raise DynamicsError("rate table size must be 2^(window size)")
        if any(not np.isfinite(c) or c < 0 for c in self.table):
            raise DynamicsError("rates must be finite and nonnegative")
        if self.origin_bit < 0:
            raise DynamicsError("window must contain the origin")

    @property
    def dim(self) -> int:
        return len(self.offsets[0])

    @property
    def origin_bit(self) -> int:
        for b, o in enumerate(self.offsets):
            if all(c == 0 for c in o):
                return b
        return -1

    @property
    def strictly_positive(self) -> bool:
        return min(self.table) > 0

    def __call__(self, occ) -> float:
        code = sum(int(bool(v)) << b for b, v in enumerate(occ))
        return self.table[code]


def constant_rate(c: float = 1.0, dim: int = 1) -> LocalRate:
    return LocalRate(((0,) * dim,), (float(c), float(c)), f"const({c:g})")


def _bernstein(coefs, degree: int) -> np.ndarray:
    # power basis -> Bernstein basis of the given degree
    a = np.zeros(degree + 1)
    a[:len(coefs)] = coefs
    out = np.zeros(degree + 1)
    for k in range(degree + 1):
        out[k] = sum(math.comb(k, j) / math.comb(degree, j) * a[j] for j in range(k + 1))
    return out


def bernstein_rate(pair: ReactionPair, max_degree: int = 24, dim: int = 1) -> LocalRate:
    """A strictly positive local rate whose Bernoulli averages reproduce ``pair``.

    With ``B = (1 - rho) b(rho)`` and ``D = rho d(rho)``, write ``b`` and ``d`` in
    the Bernstein basis of degree ``n``; an empty origin with ``k`` occupied
    sites among ``n`` neighbours (``n/2`` on each side along the first axis)
    flips at ``b_k`` and an occupied one at ``d_k``.  The smallest even degree
    giving positive coefficients is used.
    """
    one_minus = Polynomial([1.0, -1.0])
    b_poly, rb = divmod(Polynomial(pair.B_coef), one_minus)
    d_poly, rd = divmod(Polynomial(pair.D_coef), Polynomial([0.0, 1.0]))
    if np.max(np.abs(rb.coef)) > 1e-12 or np.max(np.abs(rd.coef)) > 1e-12:
        raise DynamicsError("need B(1) = 0 and D(0) = 0")
    start = max(len(b_poly.coef), len(d_poly.coef)) - 1
    start += start % 2
    for n in range(max(start, 2), max_degree + 1, 2):
        bk, dk = _bernstein(b_poly.coef, n), _bernstein(d_poly.coef, n)
        if np.all(bk > 0) and np.all(dk > 0):
            break
    else:
        raise DynamicsError(f"no positive Bernstein representation up to degree {max_degree}")
    side = list(range(-n // 2, 0)) + list(range(1, n // 2 + 1))
    offsets = [(0,) + (0,) * (dim - 1)] + [(s,) + (0,) * (dim - 1) for s in side]
    table = []
    for code in range(1 << (n + 1)):
        k = bin(code >> 1).count("1")
        table.append(float(dk[k] if code & 1 else bk[k]))
    return LocalRate(tuple(offsets), tuple(table), f"bernstein({pair.label},n={n})")


@dataclass
class DerivedPair:
    """Birth and death polynomials obtained from a local rate, with validation flags."""

    B_coef: np.ndarray
    D_coef: np.ndarray
    pair: ReactionPair

    @property
    def validated(self) -> bool:
        return self.pair.validated

    @property
    def issues(self) -> tuple:
        return self.pair.issues


def _clean(coef, rtol=1e-12):
    # expansion of rho^k (1 - rho)^(n-k) leaves round-off in the high powers
    c = np.where(np.abs(coef) > rtol * max(1.0, np.max(np.abs(coef))), coef, 0.0)
    c = np.trim_zeros(c, "b")
    return c if c.size else np.zeros(1)


def derive_BD(c_local: LocalRate) -> DerivedPair:
    """Exact ``B(rho) = E[(1 - eta_0) c]``, ``D(rho) = E[eta_0 c]`` under Bernoulli(rho).

    Enumerates all window configurations.  The pair is validated as a reaction
    pair when possible and returned with its flags otherwise.
    """
    k = len(c_local.offsets)
    ob = c_local.origin_bit
    rho, q = Polynomial([0.0, 1.0]), Polynomial([1.0, -1.0])
    B, D = Polynomial([0.0]), Polynomial([0.0])
    for code in range(1 << k):
        c = c_local.table[code]
        if c == 0:
            continue
        ones = bin(code).count("1")
        term = c * rho ** ones * q ** (k - ones)
        if code >> ob & 1:
            D = D + term
        else:
            B = B + term
    Bc, Dc = _clean(B.coef), _clean(D.coef)
    pair = make_reaction_pair("explicit", B=Bc, D=Dc, label=c_local.label, validate=False)
    return DerivedPair(Bc, Dc, pair)


def simulate_gk(N: int, c_local: LocalRate | None, T: float, seed: int, u0=0.5, d: int = 1,
                snapshot_times=None, blocks: int | None = None, bond_rate: float | None = None,
                backend: str | None = None) -> LatticeTrajectory:
    """Glauber + Kawasaki particles on the unit torus with spacing ``1/N``.

    Each nearest-neighbour bond exchanges at rate ``N^2/2`` (diffusion ``Lap/2``)
    unless ``bond_rate`` overrides it; site ``i`` flips at ``c_local`` evaluated
    on the shifted window.  Pass ``c_local=None`` for pure exchange dynamics.
    """
    if N < 2:
        raise DynamicsError("need N >= 2")
    if c_local is not None and c_local.dim != d:
        raise DynamicsError("rate window dimension does not match the lattice")
    n0, n1 = _lattice_shape(N, d)
    n = n0 * n1
    if n > MAX_SITES:
        raise DynamicsError(f"memory bound exceeded: {n} sites")
    kmc, label = get_backend(backend)
    rng = np.random.default_rng(seed)
    coords = _site_coords(N, d, 1.0 / N)
    shape = (N,) if d == 1 else (N, N)
    mean = np.broadcast_to(np.asarray(u0(coords) if callable(u0) else u0, dtype=float), shape)
    if np.any((mean < 0) | (mean > 1)):
        raise DynamicsError("initial density outside [0, 1]")
    eta = np.ascontiguousarray((rng.random(mean.shape) < mean).astype(np.int8).ravel())
    glauber = c_local is not None
    if glauber:
        offs = np.array(c_local.offsets, dtype=np.intc).reshape(len(c_local.offsets), d)
        wdx = np.ascontiguousarray(offs[:, 0])
        wdy = np.ascontiguousarray(offs[:, 1]) if d == 2 else np.zeros(len(offs), dtype=np.intc)
        table = np.array(c_local.table, dtype=float)
        e2 = eta.reshape(n0, n1)
        code = np.zeros((n0, n1), dtype=np.int64)
        for b, (a, c) in enumerate(zip(wdx, wdy)):
            code |= np.roll(e2, (-int(a), -int(c)), axis=(0, 1)).astype(np.int64) << b
        P = _tree_size(n)
        tree = _build_tree(table[code.ravel()], P)
    else:
        wdx = wdy = np.zeros(1, dtype=np.intc)
        table = np.zeros(2)
        P, tree = 1, np.zeros(2)
    counts = np.zeros(3, dtype=np.int64)
    bond_rate = 0.5 * N * N if bond_rate is None else float(bond_rate)
    if not bond_rate > 0:
        raise DynamicsError("bond rate must be positive")
    times = np.array([0.0, T] if snapshot_times is None else snapshot_times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > T + 1e-12:
        raise DynamicsError("snapshot times must be sorted inside [0, T]")
    blocks = blocks or N
    uni = _Uniforms(rng)
    t, events = 0.0, 0
    snaps, coarse = [], []
    for ts in times:
        while t < ts:
            t, used, ev, status = kmc.gk_advance(eta, tree, P, n0, n1, wdx, wdy, table, bond_rate, int(glauber),
                                                 uni.buf, uni.used, t, float(ts), counts)
            uni.used = used
            events += ev
            if status:
                uni.refill()
        snap = eta.reshape(shape).copy()
        snaps.append(snap)
        coarse.append(block_average(snap, blocks))
    meta = dict(N=N, d=d, seed=seed, backend=label, rate=None if c_local is None else c_local.label,
                births=int(counts[0]), deaths=int(counts[1]), exchanges=int(counts[2]), blocks=blocks)
    return LatticeTrajectory(times, np.array(snaps), np.array(coarse), events, meta)


def flip_rate_check(c_local: LocalRate, rho: float = 0.5, N: int = 1 << 22, T: float = 0.025,
                    bond_rate: float = 20.0, seed: int = 0, backend: str | None = None):
    """Empirical birth and death rates per site at density ``rho`` against ``B(rho)``, ``D(rho)``.

    The configuration starts Bernoulli(rho); flips slowly build short-range
    correlations, so the window ``[0, T]`` is kept short and the lattice large.
    Counts divided by ``N T`` estimate the rates, with Poisson errors.

    Returns
    -------
    dict
        ``B`` and ``D`` entries with estimate, stderr and exact value, plus
        ``final_density``.
    """
    tr = simulate_gk(N, c_local, T, seed, u0=rho, bond_rate=bond_rate, backend=backend)
    dp = derive_BD(c_local)
    scale = N * T
    out = {}
    for key, name, poly in (("births", "B", dp.B_coef), ("deaths", "D", dp.D_coef)):
        c = tr.meta[key]
        out[name] = dict(estimate=c / scale, stderr=math.sqrt(max(c, 1)) / scale,
                         exact=float(Polynomial(poly)(rho)))
    out["final_density"] = float(tr.final.mean())
    return out


# ---------------------------------------------------------------------------
# hydrodynamic comparisons


@dataclass
class HydroComparison:
    """Mean L1 distance between coarse-grained lattice fields and the PDE at time T, per ladder rung."""

    ladder: list
    l1: list
    l1_std: list
    runs: int
    T: float
    meta: dict = field(default_factory=dict)

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.l1, self.l1[1:]))

    def rows(self):
        return [dict(rung=r, l1=e, l1_std=s) for r, e, s in zip(self.ladder, self.l1, self.l1_std)]


def kac_model_1d(beta: float = 2.0, a0: float = 0.5) -> KacModel:
    """One-dimensional version of the default Kac model."""
    return KacModel(beta=beta, J=make_kernel("bump", 1), K=make_kernel("annular", 1), rate_family="constant",
                    a0=a0)


def _default_m0(L):
    return lambda x: 0.5 * np.sin(2 * np.pi * np.asarray(x) / L)


def _default_u0(x):
    return 0.5 + 0.3 * np.sin(2 * np.pi * np.asarray(x))


def hydro_compare_kac(model: KacModel | None = None, gammas=(1 / 64, 1 / 128), L: float = 8.0, T: float = 0.5,
                      runs: int = 8, seed: int = 0, blocks: int = 16, m0=None, pde_points_per_unit: int = 64,
                      backend: str | None = None) -> HydroComparison:
    """Glauber-Kac block magnetization vs the nonlocal mean-field flow at time ``T`` (d = 1).

    The L1 error is ``(1/L) int |m_lattice - m_pde| dx`` on ``blocks`` cells,
    averaged over ``runs`` seeds ``seed, seed + 1, ...``.
    """
    model = model or kac_model_1d()
    if model.dim != 1:
        raise DynamicsError("hydrodynamic comparison implemented for d = 1")
    m0 = m0 or _default_m0(L)
    n_pde = int(pde_points_per_unit * L)
    n_pde -= n_pde % blocks
    x = np.arange(n_pde) * (L / n_pde)
    dt = 0.05 / (2 * model.a0 * math.cosh(model.beta * model.J.mass()) * (1 + model.beta * model.J.mass()))
    steps = max(1, int(math.ceil(T / dt)))
    pde = evolve_nonlocal(model, m0(x), T / steps, T, L=L, n_snap=1)
    target = block_average(pde.final, blocks)
    l1, sd = [], []
    for g in gammas:
        errs = []
        for r in range(runs):
            tr = simulate_glauber_kac(model, g, L, T, seed + r, m0=m0, blocks=blocks, backend=backend)
            errs.append(float(np.mean(np.abs(tr.coarse[-1] - target))))
        l1.append(float(np.mean(errs)))
        sd.append(float(np.std(errs, ddof=1)) if runs > 1 else 0.0)
    return HydroComparison(list(gammas), l1, sd, runs, T,
                           dict(kind="kac", L=L, blocks=blocks, pde_n=n_pde, pde_dt=T / steps, seed=seed))


def hydro_compare_gk(pair: ReactionPair | None = None, Ns=(128, 256), T: float = 0.5, runs: int = 8, seed: int = 0,
                     blocks: int = 16, u0=None, c_local: LocalRate | None = None, pde_n: int = 256,
                     backend: str | None = None) -> HydroComparison:
    """Glauber+Kawasaki block density vs the reaction-diffusion flow at time ``T`` (d = 1).

    ``c_local`` defaults to the Bernstein representation of ``pair``.
    """
    pair = pair or make_reaction_pair()
    c_local = c_local or bernstein_rate(pair)
    u0 = u0 or _default_u0
    dp = derive_BD(c_local)
    if not (np.allclose(np.pad(dp.B_coef, (0, 8))[:8], np.pad(pair.B_coef, (0, 8))[:8], atol=1e-12)
            and np.allclose(np.pad(dp.D_coef, (0, 8))[:8], np.pad(pair.D_coef, (0, 8))[:8], atol=1e-12)):
        raise DynamicsError("local rate does not reproduce the reaction pair")
    pde_n -= pde_n % blocks
    x = np.arange(pde_n) / pde_n
    dx = 1.0 / pde_n
    dt = dx * dx / 4
    steps = int(math.ceil(T / dt))
    pde = evolve_rd(pair, u0(x), T / steps, T, n_snap=1)
    target = block_average(pde.final, blocks)
    l1, sd = [], []
    for N in Ns:
        errs = []
        for r in range(runs):
            tr = simulate_gk(N, c_local, T, seed + r, u0=u0, blocks=blocks, backend=backend)
            errs.append(float(np.mean(np.abs(tr.coarse[-1] - target))))
        l1.append(float(np.mean(errs)))
        sd.append(float(np.std(errs, ddof=1)) if runs > 1 else 0.0)
    return HydroComparison(list(Ns), l1, sd, runs, T,
                           dict(kind="gk", blocks=blocks, pde_n=pde_n, pde_dt=T / steps, seed=seed,
                                rate=c_local.label))
