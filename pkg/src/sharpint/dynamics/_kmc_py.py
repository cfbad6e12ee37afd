"""Pure Python mirror of the compiled event loops.

Every floating point operation happens in the same order as in ``_kmc.pyx`` so
that both backends give identical trajectories from identical uniforms.
"""
import math

REACHED = 0
NEED_UNIFORMS = 1


def _tree_set(tree, P, i, value):
    node = P + i
    tree[node] = value
    node >>= 1
    while node >= 1:
        tree[node] = tree[2 * node] + tree[2 * node + 1]
        node >>= 1


def _tree_find(tree, P, n, target):
    node = 1
    while node < P:
        if target < tree[2 * node]:
            node = 2 * node
        else:
            target -= tree[2 * node]
            node = 2 * node + 1
    node -= P
    if node >= n:
        node = n - 1
    while node > 0 and tree[P + node] <= 0.0:
        node -= 1
    return node


def _shift(i, dx, dy, n0, n1):
    x, y = divmod(i, n1)
    return ((x + dx) % n0) * n1 + (y + dy) % n1


def _kac_rate(s, hj, hk, beta, a0, family):
    a = a0
    if family == 1:
        a = 0.5 / math.cosh(beta * hk)
    return a * math.exp(-beta * hj * s)


def kac_advance(sigma, hJ, hK, tree, P, n0, n1, sdx, sdy, wJ, wK, beta, a0, family, U, used, t, t_stop,
                hist, state):
    n = n0 * n1
    sig = sigma.tolist()
    hj, hk, tr = hJ.tolist(), hK.tolist(), tree.tolist()
    offs = list(zip(sdx.tolist(), sdy.tolist(), wJ.tolist(), wK.tolist()))
    us = U.tolist()
    nu = len(us)
    track = len(hist) > 0
    hs = hist.tolist() if track else None
    events = 0
    status = REACHED
    while True:
        if used + 2 > nu:
            status = NEED_UNIFORMS
            break
        total = tr[1]
        u1, u2 = us[used], us[used + 1]
        used += 2
        dt = -math.log(1.0 - u1) / total
        if t + dt >= t_stop:
            if track:
                hs[state] += t_stop - t
            t = t_stop
            break
        if track:
            hs[state] += dt
        t += dt
        k = _tree_find(tr, P, n, u2 * total)
        delta = -2.0 * sig[k]
        sig[k] = -sig[k]
        if track:
            state ^= 1 << k
        targets = [_shift(k, dx, dy, n0, n1) for dx, dy, _, _ in offs]
        for j, (_, _, a, b) in zip(targets, offs):
            hj[j] += a * delta
            hk[j] += b * delta
        for j in targets:
            _tree_set(tr, P, j, _kac_rate(sig[j], hj[j], hk[j], beta, a0, family))
        events += 1
    sigma[:] = sig
    hJ[:], hK[:], tree[:] = hj, hk, tr
    if track:
        hist[:] = hs
    return t, used, events, state, status


def _gk_rate(eta, i, win, table, n0, n1):
    code = 0
    for b, (dx, dy) in enumerate(win):
        if eta[_shift(i, dx, dy, n0, n1)]:
            code |= 1 << b
    return table[code]


def _gk_refresh(eta, tree, P, site, win, table, n0, n1):
    for dx, dy in win:
        i = _shift(site, -dx, -dy, n0, n1)
        _tree_set(tree, P, i, _gk_rate(eta, i, win, table, n0, n1))


def gk_advance(eta, tree, P, n0, n1, wdx, wdy, table, bond_rate, glauber, U, used, t, t_stop, counts):
    n = n0 * n1
    dims = 1 if n1 == 1 else 2
    n_bonds = n * dims
    RK = bond_rate * n_bonds
    et, tr, tab = eta.tolist(), tree.tolist(), table.tolist()
    win = list(zip(wdx.tolist(), wdy.tolist()))
    us = U.tolist()
    nu = len(us)
    cnt = counts.tolist()
    events = 0
    status = REACHED
    while True:
        if used + 2 > nu:
            status = NEED_UNIFORMS
            break
        total = RK
        if glauber:
            total = total + tr[1]
        u1 = us[used]
        x = us[used + 1] * total
        used += 2
        dt = -math.log(1.0 - u1) / total
        if t + dt >= t_stop:
            t = t_stop
            break
        t += dt
        events += 1
        if x < RK:
            b = min(int(x / bond_rate), n_bonds - 1)
            k = b // dims
            j = _shift(k, 1, 0, n0, n1) if b - k * dims == 0 else _shift(k, 0, 1, n0, n1)
            if et[k] != et[j]:
                et[k], et[j] = et[j], et[k]
                cnt[2] += 1
                if glauber:
                    _gk_refresh(et, tr, P, k, win, tab, n0, n1)
                    _gk_refresh(et, tr, P, j, win, tab, n0, n1)
        else:
            k = _tree_find(tr, P, n, x - RK)
            cnt[1 if et[k] else 0] += 1
            et[k] = 1 - et[k]
            _gk_refresh(et, tr, P, k, win, tab, n0, n1)
    eta[:] = et
    tree[:] = tr
    counts[:] = cnt
    return t, used, events, status
