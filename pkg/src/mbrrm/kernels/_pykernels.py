"""Pure-Python implementations of the hot kernels.

These define the semantics; ``_ckernels.pyx`` mirrors them loop for loop.
Ties are resolved identically in both backends.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

TIE_RTOL = 1e-12


def hungarian(cost) -> np.ndarray:
    """Minimum-cost assignment on a rectangular matrix.

    Returns ``assign`` of length ``n_rows`` with ``assign[i]`` the column
    given to row ``i`` (or -1 when rows outnumber columns and row ``i`` is
    left out). Shortest augmenting path with row/column potentials, O(n^2 m).
    Rows are inserted in index order and column scans keep the first
    minimum, so equal-cost alternatives resolve toward lower column indices.
    """
    a = np.asarray(cost, dtype=float)
    n_rows, n_cols = a.shape
    if n_rows == 0 or n_cols == 0:
        return np.full(n_rows, -1, dtype=np.int64)
    if n_rows > n_cols:
        col_of_row_t = hungarian(a.T)
        assign = np.full(n_rows, -1, dtype=np.int64)
        for c, r in enumerate(col_of_row_t):
            assign[r] = c
        return assign
    n, m = n_rows, n_cols
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    owner = [0] * (m + 1)  # owner[j] = row (1-based) matched to column j
    way = [0] * (m + 1)
    rows = a.tolist()
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            delta = inf
            j1 = 0
            row = rows[i0 - 1]
            ui0 = u[i0]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
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
    assign = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if owner[j]:
            assign[owner[j] - 1] = j - 1
    return assign


def compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``.

    Rows come out in lexicographically increasing order.
    """
    out = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(total + parts - 1 - prev - 1)
        out.append(row)
    return np.array(out, dtype=np.int64).reshape(-1, parts)


def best_composition(coef, n_slots: int) -> tuple[np.ndarray, float]:
    """Integer dwell vector maximizing ``min_l sum_g coef[l, g] * t[g]``.

    ``t`` ranges over all compositions of ``n_slots`` into ``coef.shape[1]``
    parts. Among values within ``TIE_RTOL`` of the optimum the
    lexicographically smallest ``t`` wins.
    """
    coef = np.asarray(coef, dtype=float)
    comps = compositions(n_slots, coef.shape[1])
    if coef.shape[0] == 0:
        vals = np.zeros(len(comps))
    else:
        vals = (comps @ coef.T).min(axis=1)
    best = vals.max()
    idx = int(np.argmax(vals >= best - TIE_RTOL * max(1.0, abs(best))))
    return comps[idx].copy(), float(vals[idx])


def simplex_grid(levels: int, n: int) -> np.ndarray:
    """All non-negative integer vectors of length ``n`` with sum <= ``levels``.

    Lexicographic order.
    """
    # drop the slack part of each composition into n + 1 parts; order is kept
    return compositions(levels, n + 1)[:, :n].copy()


def _batch_usc(gain, noise, demands, carrier_width, q) -> np.ndarray:
    # q: (B, K, L) effective powers
    diag = np.diag(gain)
    off = gain - np.diag(diag)
    interference = q @ off.T
    gamma = diag * q / (interference + noise)
    cap = carrier_width * np.log2(1.0 + gamma).sum(axis=1)
    return np.minimum(cap - demands, 0.0).sum(axis=1)


def best_power_grid(gain, noise, demands, k_carriers: int, carrier_width: float,
                    p_total: float, levels: int) -> tuple[np.ndarray, float]:
    """Exhaustive USC maximization over the power grid ``p = j * p_total / levels``.

    ``j`` is a K*L integer vector (row-major K x L) with ``sum(j) <= levels``;
    the assignment is ``x = (j > 0)``. Ties within ``TIE_RTOL``: smaller
    ``sum(j)``, then lexicographically smaller ``x``, then smaller ``j``.
    Returns ``(j, usc)`` with ``j`` shaped K x L.
    """
    gain = np.asarray(gain, dtype=float)
    L = gain.shape[0]
    K = k_carriers
    grid = simplex_grid(levels, K * L)
    step = p_total / levels
    vals = np.empty(len(grid))
    chunk = 4096
    for start in range(0, len(grid), chunk):
        q = grid[start:start + chunk].reshape(-1, K, L) * step
        vals[start:start + chunk] = _batch_usc(gain, noise, demands, carrier_width, q)
    best = vals.max()
    near = np.flatnonzero(vals >= best - TIE_RTOL * max(1.0, abs(best)))
    pick = min(near, key=lambda i: (int(grid[i].sum()), tuple((grid[i] > 0).tolist()),
                                    tuple(grid[i].tolist())))
    return grid[pick].reshape(K, L).copy(), float(vals[pick])


def marginal_usc_gains(gain, noise, demands, carrier_width: float, x, budgets) -> np.ndarray:
    """USC change from granting each unassigned (carrier, beam) slot.

    Beam ``l`` spreads ``budgets[l]`` evenly over its assigned carriers, both
    before and after the grant. Already-assigned slots score ``-inf``.
    """
    gain = np.asarray(gain, dtype=float)
    x = np.asarray(x, dtype=float)
    budgets = np.asarray(budgets, dtype=float)
    K, L = x.shape
    n_assigned = x.sum(axis=0)
    per = np.where(n_assigned > 0, budgets / np.maximum(n_assigned, 1), 0.0)
    q = x * per
    base = _batch_usc(gain, noise, demands, carrier_width, q[None])[0]

    out = np.full((K, L), -np.inf)
    for l in range(L):
        free = np.flatnonzero(x[:, l] == 0)
        if free.size == 0:
            continue
        new_per = budgets[l] / (n_assigned[l] + 1)
        cand = np.repeat(q[None], free.size, axis=0)
        cand[:, :, l] = x[:, l] * new_per
        cand[np.arange(free.size), free, l] = new_per
        out[free, l] = _batch_usc(gain, noise, demands, carrier_width, cand) - base
    return out
