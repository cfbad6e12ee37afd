# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loops for the Glauber-Kac and Glauber+Kawasaki lattice systems.

Both loops are the Gillespie direct method over a complete binary sum tree of
site rates.  Uniforms are read from a caller-supplied buffer so that the pure
Python mirror in ``_kmc_py`` reproduces every trajectory bit for bit.
"""
from libc.math cimport exp, log, cosh

cdef enum:
    REACHED = 0
    NEED_UNIFORMS = 1


cdef inline void _tree_set(double[::1] tree, Py_ssize_t P, Py_ssize_t i, double value) nogil:
    cdef Py_ssize_t node = P + i
    tree[node] = value
    node >>= 1
    while node >= 1:
        tree[node] = tree[2 * node] + tree[2 * node + 1]
        node >>= 1


cdef inline Py_ssize_t _tree_find(double[::1] tree, Py_ssize_t P, Py_ssize_t n, double target) nogil:
    cdef Py_ssize_t node = 1
    while node < P:
        if target < tree[2 * node]:
            node = 2 * node
        else:
            target -= tree[2 * node]
            node = 2 * node + 1
    node -= P
    # rounding can land on an empty padding leaf
    if node >= n:
        node = n - 1
    while node > 0 and tree[P + node] <= 0.0:
        node -= 1
    return node


cdef inline Py_ssize_t _shift(Py_ssize_t i, int dx, int dy, Py_ssize_t n0, Py_ssize_t n1) nogil:
    cdef Py_ssize_t x = i // n1
    cdef Py_ssize_t y = i - x * n1
    x = (x + dx) % n0
    if x < 0:
        x += n0
    y = (y + dy) % n1
    if y < 0:
        y += n1
    return x * n1 + y


cdef inline double _kac_rate(int s, double hj, double hk, double beta, double a0, int family) nogil:
    cdef double a = a0
    if family == 1:
        a = 0.5 / cosh(beta * hk)
    return a * exp(-beta * hj * s)


def kac_advance(signed char[::1] sigma, double[::1] hJ, double[::1] hK, double[::1] tree, Py_ssize_t P,
                Py_ssize_t n0, Py_ssize_t n1, int[::1] sdx, int[::1] sdy, double[::1] wJ, double[::1] wK,
                double beta, double a0, int family, double[::1] U, Py_ssize_t used, double t, double t_stop,
                double[::1] hist, long long state):
    """Advance the spin system until ``t_stop`` or until the uniform buffer runs out.

    Returns ``(t, used, events, state, status)``.
    """
    cdef Py_ssize_t n = n0 * n1
    cdef Py_ssize_t ns = sdx.shape[0]
    cdef Py_ssize_t nu = U.shape[0]
    cdef bint track = hist.shape[0] > 0
    cdef long long events = 0
    cdef double total, dt, u1, u2, delta
    cdef Py_ssize_t k, j, s
    cdef int status = REACHED
    with nogil:
        while True:
            if used + 2 > nu:
                status = NEED_UNIFORMS
                break
            total = tree[1]
            u1 = U[used]
            u2 = U[used + 1]
            used += 2
            dt = -log(1.0 - u1) / total
            if t + dt >= t_stop:
                if track:
                    hist[state] += t_stop - t
                t = t_stop
                break
            if track:
                hist[state] += dt
            t += dt
            k = _tree_find(tree, P, n, u2 * total)
            delta = -2.0 * sigma[k]
            sigma[k] = -sigma[k]
            if track:
                state ^= (<long long> 1) << k
            for s in range(ns):
                j = _shift(k, sdx[s], sdy[s], n0, n1)
                hJ[j] += wJ[s] * delta
                hK[j] += wK[s] * delta
            for s in range(ns):
                j = _shift(k, sdx[s], sdy[s], n0, n1)
                _tree_set(tree, P, j, _kac_rate(sigma[j], hJ[j], hK[j], beta, a0, family))
            events += 1
    return t, used, events, state, status


cdef inline double _gk_rate(signed char[::1] eta, Py_ssize_t i, int[::1] wdx, int[::1] wdy,
                            double[::1] table, Py_ssize_t n0, Py_ssize_t n1) nogil:
    cdef Py_ssize_t b, code = 0
    for b in range(wdx.shape[0]):
        if eta[_shift(i, wdx[b], wdy[b], n0, n1)]:
            code |= (<Py_ssize_t> 1) << b
    return table[code]


cdef inline void _gk_refresh(signed char[::1] eta, double[::1] tree, Py_ssize_t P, Py_ssize_t site,
                             int[::1] wdx, int[::1] wdy, double[::1] table, Py_ssize_t n0, Py_ssize_t n1) nogil:
    cdef Py_ssize_t b, i
    for b in range(wdx.shape[0]):
        i = _shift(site, -wdx[b], -wdy[b], n0, n1)
        _tree_set(tree, P, i, _gk_rate(eta, i, wdx, wdy, table, n0, n1))


def gk_advance(signed char[::1] eta, double[::1] tree, Py_ssize_t P, Py_ssize_t n0, Py_ssize_t n1,
               int[::1] wdx, int[::1] wdy, double[::1] table, double bond_rate, int glauber,
               double[::1] U, Py_ssize_t used, double t, double t_stop, long long[::1] counts):
    """Advance the particle system; ``counts`` accumulates births, deaths, effective exchanges.

    Returns ``(t, used, events, status)``.
    """
    cdef Py_ssize_t n = n0 * n1
    cdef Py_ssize_t dims = 1 if n1 == 1 else 2
    cdef Py_ssize_t n_bonds = n * dims
    cdef double RK = bond_rate * n_bonds
    cdef Py_ssize_t nu = U.shape[0]
    cdef long long events = 0
    cdef double total, dt, u1, x
    cdef Py_ssize_t k, b, j
    cdef signed char tmp
    cdef int status = REACHED
    with nogil:
        while True:
            if used + 2 > nu:
                status = NEED_UNIFORMS
                break
            total = RK
            if glauber:
                total = total + tree[1]
            u1 = U[used]
            x = U[used + 1] * total
            used += 2
            dt = -log(1.0 - u1) / total
            if t + dt >= t_stop:
                t = t_stop
                break
            t += dt
            events += 1
            if x < RK:
                b = <Py_ssize_t> (x / bond_rate)
                if b >= n_bonds:
                    b = n_bonds - 1
                k = b // dims
                if b - k * dims == 0:
                    j = _shift(k, 1, 0, n0, n1)
                else:
                    j = _shift(k, 0, 1, n0, n1)
                if eta[k] != eta[j]:
                    tmp = eta[k]
                    eta[k] = eta[j]
                    eta[j] = tmp
                    counts[2] += 1
                    if glauber:
                        _gk_refresh(eta, tree, P, k, wdx, wdy, table, n0, n1)
                        _gk_refresh(eta, tree, P, j, wdx, wdy, table, n0, n1)
            else:
                k = _tree_find(tree, P, n, x - RK)
                if eta[k]:
                    counts[1] += 1
                else:
                    counts[0] += 1
                eta[k] = 1 - eta[k]
                _gk_refresh(eta, tree, P, k, wdx, wdy, table, n0, n1)
    return t, used, events, status
