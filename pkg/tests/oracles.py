"""Independent scalar re-derivations used as test oracles."""

from __future__ import annotations

import itertools
import math


def scalar_sinr(gain, noise, x, p, l, k):
    if not x[k][l]:
        return 0.0
    interf = sum(gain[l][m] * p[k][m] * x[k][m] for m in range(len(gain)) if m != l)
    return gain[l][l] * p[k][l] * x[k][l] / (interf + noise[l])


def scalar_capacity(gain, noise, x, p, bc):
    L, K = len(gain), len(x)
    return [sum(bc * math.log2(1 + scalar_sinr(gain, noise, x, p, l, k)) for k in range(K))
            for l in range(L)]


def scalar_usc(C, D):
    return sum(min(c - d, 0.0) for c, d in zip(C, D))


def scalar_mmse(C, D):
    return sum((c - d) ** 2 for c, d in zip(C, D)) / len(C)


def scalar_min_ratio(C, D):
    return min(c / d for c, d in zip(C, D))


def best_permutation_cost(cost):
    """Minimum total cost over all assignments of rows to distinct columns."""
    n, m = len(cost), len(cost[0])
    best = math.inf
    if n <= m:
        for cols in itertools.permutations(range(m), n):
            best = min(best, sum(cost[i][c] for i, c in enumerate(cols)))
    else:
        for rows in itertools.permutations(range(n), m):
            best = min(best, sum(cost[r][j] for j, r in enumerate(rows)))
    return best


def all_compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in all_compositions(total - first, parts - 1):
            yield (first,) + rest
