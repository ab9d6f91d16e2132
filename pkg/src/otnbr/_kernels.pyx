# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled annealing kernels. Same contract as ``otnbr._kernels_py``."""
from libc.math cimport exp

import numpy as np


cdef inline double _ratio_col(double[:, ::1] M, const double[::1] x, long lo, long k, long ns,
                              long col, double coef, double eps) noexcept nogil:
    """Sum over k and sources of ms^2/m0 for one column after adding coef * x."""
    cdef double total = 0.0, m0, ms
    cdef long r, i
    for r in range(k):
        m0 = M[lo + r, col] + coef * x[lo + r]
        if m0 > eps:
            for i in range(1, ns + 1):
                ms = M[lo + i * k + r, col] + coef * x[lo + i * k + r]
                total += ms * ms / m0
    return total


cdef double _move_delta(const double[::1] x, long u, long v, double[:, ::1] M, const double[:, :, ::1] hr,
                        const long[::1] dest_off, const long[::1] dest_k, const long[::1] dest_ns,
                        bint hr_identity, double eps) noexcept nogil:
    cdef double total = 0.0, coef
    cdef long d, j, lo, k, ns
    cdef long ncol = M.shape[1]
    if u == v:
        return 0.0
    for d in range(dest_off.shape[0]):
        lo = dest_off[d]
        k = dest_k[d]
        ns = dest_ns[d]
        if hr_identity:
            total += _ratio_col(M, x, lo, k, ns, u, -1.0, eps) - _ratio_col(M, x, lo, k, ns, u, 0.0, eps)
            total += _ratio_col(M, x, lo, k, ns, v, 1.0, eps) - _ratio_col(M, x, lo, k, ns, v, 0.0, eps)
        else:
            for j in range(ncol):
                coef = hr[d, v, j] - hr[d, u, j]
                if coef != 0.0:
                    total += _ratio_col(M, x, lo, k, ns, j, coef, eps) - _ratio_col(M, x, lo, k, ns, j, 0.0, eps)
    return total


cdef void _move_apply(const double[::1] x, long u, long v, double[:, ::1] M, const double[:, :, ::1] hr,
                      const long[::1] dest_off, const long[::1] dest_k, const long[::1] dest_ns,
                      bint hr_identity) noexcept nogil:
    cdef long d, j, r, lo, hi
    cdef double coef
    cdef long ncol = M.shape[1]
    for d in range(dest_off.shape[0]):
        lo = dest_off[d]
        hi = lo + (1 + dest_ns[d]) * dest_k[d]
        if hr_identity:
            for r in range(lo, hi):
                M[r, u] -= x[r]
                M[r, v] += x[r]
        else:
            for j in range(ncol):
                coef = hr[d, v, j] - hr[d, u, j]
                if coef != 0.0:
                    for r in range(lo, hi):
                        M[r, j] += coef * x[r]


def move_delta(x, long u, long v, M, hr, dest_off, dest_k, dest_ns, bint hr_identity, double eps):
    return _move_delta(np.ascontiguousarray(x, dtype=np.float64), u, v, M, hr,
                       dest_off, dest_k, dest_ns, hr_identity, eps)


def table_sweep(long[::1] table, const long[::1] positions, const long[::1] donors, const double[::1] uniforms,
                double temperature, const double[:, ::1] V, double[:, ::1] M, const double[:, :, ::1] hr,
                const long[::1] dest_off, const long[::1] dest_k, const long[::1] dest_ns,
                bint hr_identity, double eps, double scale, double cost,
                long[::1] best_table, double best_cost):
    cdef long n, c, u, v, accepted = 0
    cdef double delta
    cdef long[::1] counts = np.zeros(M.shape[1], dtype=np.int_)
    with nogil:
        for n in range(table.shape[0]):
            counts[table[n]] += 1
        for n in range(positions.shape[0]):
            c = positions[n]
            u = table[c]
            v = table[donors[n]]
            if u == v or counts[u] == 1:
                continue
            delta = -scale * _move_delta(V[c], u, v, M, hr, dest_off, dest_k, dest_ns, hr_identity, eps)
            if delta < 0 or uniforms[n] < exp(-delta / temperature):
                _move_apply(V[c], u, v, M, hr, dest_off, dest_k, dest_ns, hr_identity)
                table[c] = v
                counts[u] -= 1
                counts[v] += 1
                cost += delta
                accepted += 1
                if cost < best_cost:
                    best_cost = cost
                    best_table[:] = table
    return cost, best_cost, accepted


def perm_sweep(long[::1] perm, long n_slots, const long[::1] partners, const double[::1] uniforms,
               double temperature, const double[:, ::1] VS, double[:, ::1] M, const double[:, :, ::1] hr,
               const long[::1] dest_off, const long[::1] dest_k, const long[::1] dest_ns,
               bint hr_identity, double eps, double scale, double cost,
               long[::1] best_perm, double best_cost):
    cdef long i, j, u, v, a, b, r, accepted = 0
    cdef double delta
    cdef double[::1] x = np.empty(VS.shape[1], dtype=np.float64)
    with nogil:
        for i in range(perm.shape[0]):
            j = partners[i]
            if i >= n_slots and j >= n_slots:
                continue
            u = perm[i]
            v = perm[j]
            if i < n_slots and j < n_slots:
                for r in range(x.shape[0]):
                    x[r] = VS[i, r] - VS[j, r]
                a = u
                b = v
            elif i < n_slots:
                x[:] = VS[i]
                a = u
                b = v
            else:
                x[:] = VS[j]
                a = v
                b = u
            delta = -scale * _move_delta(x, a, b, M, hr, dest_off, dest_k, dest_ns, hr_identity, eps)
            if delta < 0 or uniforms[i] < exp(-delta / temperature):
                _move_apply(x, a, b, M, hr, dest_off, dest_k, dest_ns, hr_identity)
                perm[i] = v
                perm[j] = u
                cost += delta
                accepted += 1
                if cost < best_cost:
                    best_cost = cost
                    best_perm[:] = perm
    return cost, best_cost, accepted
