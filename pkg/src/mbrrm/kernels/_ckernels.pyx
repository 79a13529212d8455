# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``; same ordering and ties."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2, INFINITY, fabs, fmin, fmax

cnp.import_array()

cdef double TIE_RTOL = 1e-12


def hungarian(cost):
    a = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n_rows = a.shape[0], n_cols = a.shape[1]
    if n_rows == 0 or n_cols == 0:
        return np.full(n_rows, -1, dtype=np.int64)
    if n_rows > n_cols:
        col_of_row_t = hungarian(a.T)
        assign = np.full(n_rows, -1, dtype=np.int64)
        for c in range(n_cols):
            assign[col_of_row_t[c]] = c
        return assign
    cdef const double[:, ::1] A = a
    cdef Py_ssize_t n = n_rows, m = n_cols
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(m + 1)
    cdef double[::1] minv = np.empty(m + 1)
    cdef Py_ssize_t[::1] owner = np.zeros(m + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(m + 1, dtype=np.intp)
    cdef char[::1] used = np.zeros(m + 1, dtype=np.int8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur, ui0
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        for j in range(m + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = owner[j0]
            delta = INFINITY
            j1 = 0
            ui0 = u[i0]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = A[i0 - 1, j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while True:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
            if j0 == 0:
                break
    out = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] res = out
    for j in range(1, m + 1):
        if owner[j]:
            res[owner[j] - 1] = j - 1
    return out


cdef bint _next_composition(Py_ssize_t[::1] t, Py_ssize_t G, Py_ssize_t total):
    # lexicographic successor among compositions of `total` into G parts
    cdef Py_ssize_t i, j, p, tail = 0, head = 0
    if G <= 1:
        return False
    i = G - 1
    while i >= 1:
        tail += t[i]
        if tail > 0:
            break
        i -= 1
    if i < 1:
        return False
    p = i - 1
    t[p] += 1
    for j in range(p + 1):
        head += t[j]
    for j in range(p + 1, G):
        t[j] = 0
    t[G - 1] = total - head
    return True


cdef double _min_rate(const double[:, ::1] coef, Py_ssize_t[::1] t, Py_ssize_t L, Py_ssize_t G):
    cdef Py_ssize_t l, g
    cdef double s, best = INFINITY
    if L == 0:
        return 0.0
    for l in range(L):
        s = 0.0
        for g in range(G):
            s += coef[l, g] * t[g]
        if s < best:
            best = s
    return best


def best_composition(coef, long n_slots):
    c = np.ascontiguousarray(coef, dtype=np.float64)
    cdef const double[:, ::1] C = c
    cdef Py_ssize_t L = c.shape[0], G = c.shape[1]
    t_arr = np.zeros(G, dtype=np.intp)
    cdef Py_ssize_t[::1] t = t_arr
    cdef double val, best = -INFINITY, thresh
    t[G - 1] = n_slots
    while True:
        val = _min_rate(C, t, L, G)
        if val > best:
            best = val
        if not _next_composition(t, G, n_slots):
            break
    thresh = best - TIE_RTOL * fmax(1.0, fabs(best))
    for g in range(G):
        t[g] = 0
    t[G - 1] = n_slots
    while True:
        val = _min_rate(C, t, L, G)
        if val >= thresh:
            return t_arr.astype(np.int64), val
        _next_composition(t, G, n_slots)


cdef double _usc_flat(const double[:, ::1] gain, const double[::1] noise, const double[::1] demands,
                      double carrier_width, double[:, ::1] q, double[::1] cap,
                      Py_ssize_t K, Py_ssize_t L):
    cdef Py_ssize_t k, l, m
    cdef double interf, total = 0.0
    for l in range(L):
        cap[l] = 0.0
    for k in range(K):
        for l in range(L):
            if q[k, l] <= 0.0:
                continue
            interf = 0.0
            for m in range(L):
                if m != l:
                    interf += gain[l, m] * q[k, m]
            cap[l] += log2(1.0 + gain[l, l] * q[k, l] / (interf + noise[l]))
    for l in range(L):
        total += fmin(carrier_width * cap[l] - demands[l], 0.0)
    return total


cdef bint _grid_better(long[::1] a, long[::1] b, Py_ssize_t n):
    # True when candidate a beats incumbent b under (sum, x lex, j lex)
    cdef Py_ssize_t i
    cdef long sa = 0, sb = 0
    for i in range(n):
        sa += a[i]
        sb += b[i]
    if sa != sb:
        return sa < sb
    for i in range(n):
        if (a[i] > 0) != (b[i] > 0):
            return b[i] > 0
    for i in range(n):
        if a[i] != b[i]:
            return a[i] < b[i]
    return False


cdef bint _next_grid(long[::1] j, Py_ssize_t n, long levels, long *total):
    cdef Py_ssize_t i = n - 1
    while i >= 0:
        j[i] += 1
        total[0] += 1
        if total[0] <= levels:
            return True
        total[0] -= j[i]
        j[i] = 0
        i -= 1
    return False


def best_power_grid(gain, noise, demands, long k_carriers, double carrier_width,
                    double p_total, long levels):
    g = np.ascontiguousarray(gain, dtype=np.float64)
    cdef const double[:, ::1] G = g
    cdef const double[::1] N = np.ascontiguousarray(noise, dtype=np.float64)
    cdef const double[::1] D = np.ascontiguousarray(demands, dtype=np.float64)
    cdef Py_ssize_t L = g.shape[0], K = k_carriers, n = K * L, i
    cdef double step = p_total / levels
    q_arr = np.zeros((K, L))
    cdef double[:, ::1] q = q_arr
    cdef double[::1] cap = np.zeros(L)
    j_arr = np.zeros(n, dtype=np.int64)
    cdef long[::1] j = j_arr
    best_arr = np.zeros(n, dtype=np.int64)
    cdef long[::1] bestj = best_arr
    cdef long total = 0
    cdef double val, best = -INFINITY, best_val = -INFINITY, thresh
    cdef bint have = False
    # pass 1: optimum value
    while True:
        for i in range(n):
            q[i // L, i % L] = j[i] * step
        val = _usc_flat(G, N, D, carrier_width, q, cap, K, L)
        if val > best:
            best = val
        if not _next_grid(j, n, levels, &total):
            break
    thresh = best - TIE_RTOL * fmax(1.0, fabs(best))
    # pass 2: tie-break among near-optimal points
    for i in range(n):
        j[i] = 0
    total = 0
    while True:
        for i in range(n):
            q[i // L, i % L] = j[i] * step
        val = _usc_flat(G, N, D, carrier_width, q, cap, K, L)
        if val >= thresh and (not have or _grid_better(j, bestj, n)):
            bestj[:] = j
            best_val = val
            have = True
        if not _next_grid(j, n, levels, &total):
            break
    return best_arr.reshape(K, L), best_val


def marginal_usc_gains(gain, noise, demands, double carrier_width, x, budgets):
    g = np.ascontiguousarray(gain, dtype=np.float64)
    cdef const double[:, ::1] G = g
    cdef const double[::1] N = np.ascontiguousarray(noise, dtype=np.float64)
    cdef const double[::1] D = np.ascontiguousarray(demands, dtype=np.float64)
    xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] X = xa
    cdef const double[::1] B = np.ascontiguousarray(budgets, dtype=np.float64)
    cdef Py_ssize_t K = xa.shape[0], L = xa.shape[1], k, l, kk, ll, m
    cdef double[::1] n_assigned = np.zeros(L)
    q_arr = np.zeros((K, L))
    cdef double[:, ::1] q = q_arr
    interf_arr = np.zeros((K, L))
    cdef double[:, ::1] I = interf_arr
    cdef double[::1] cap = np.zeros(L)
    cdef double[::1] dq = np.zeros(K)
    out_arr = np.full((K, L), -np.inf)
    cdef double[:, ::1] out = out_arr
    cdef double base, new_per, total, s, qk, ik

    for l in range(L):
        for k in range(K):
            n_assigned[l] += X[k, l]
    for k in range(K):
        for l in range(L):
            if n_assigned[l] > 0:
                q[k, l] = X[k, l] * B[l] / n_assigned[l]
    for k in range(K):
        for l in range(L):
            s = 0.0
            for m in range(L):
                if m != l:
                    s += G[l, m] * q[k, m]
            I[k, l] = s
    base = _usc_flat(G, N, D, carrier_width, q, cap, K, L)

    for l in range(L):
        new_per = B[l] / (n_assigned[l] + 1.0)
        for k in range(K):
            if X[k, l] != 0.0:
                continue
            for kk in range(K):
                dq[kk] = (X[kk, l] * new_per if kk != k else new_per) - q[kk, l]
            for ll in range(L):
                cap[ll] = 0.0
            for kk in range(K):
                for ll in range(L):
                    if ll == l:
                        qk = q[kk, ll] + dq[kk]
                        ik = I[kk, ll]
                    else:
                        qk = q[kk, ll]
                        ik = I[kk, ll] + G[ll, l] * dq[kk]
                    if qk > 0.0:
                        cap[ll] += log2(1.0 + G[ll, ll] * qk / (ik + N[ll]))
            total = 0.0
            for ll in range(L):
                total += fmin(carrier_width * cap[ll] - D[ll], 0.0)
            out[k, l] = total - base
    return out_arr
