"""Dense two-phase simplex with Bland's anti-cycling rule.

Solves ``maximize c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``
and ``x >= 0``. Intended for the small, often degenerate LPs of illumination
design; all comparisons use an absolute pivot tolerance of 1e-9.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9


class LPError(ValueError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    objective: float
    iterations: int


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _iterate(T: np.ndarray, basis: list[int], n_enter: int, max_iter: int) -> int:
    m = T.shape[0] - 1
    for it in range(max_iter):
        reduced = T[-1, :n_enter]
        entering = np.flatnonzero(reduced < -TOL)
        if entering.size == 0:
            return it
        c = int(entering[0])  # Bland: lowest index
        col = T[:m, c]
        rows = np.flatnonzero(col > TOL)
        if rows.size == 0:
            raise Unbounded("objective is unbounded")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + TOL * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))  # Bland: lowest basic index leaves
        _pivot(T, r, c)
        basis[r] = c
    raise LPError(f"simplex did not finish within {max_iter} pivots")


def linprog_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                max_iter: int = 50_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = len(b_ub), len(b_eq)
    m = m_ub + m_eq

    # columns: x (n) | slacks (m_ub) | artificials (m)
    n_art_start = n + m_ub
    T = np.zeros((m + 1, n + m_ub + m + 1))
    T[:m_ub, :n] = A_ub
    T[:m_ub, n:n + m_ub] = np.eye(m_ub)
    T[:m_ub, -1] = b_ub
    T[m_ub:m, :n] = A_eq
    T[m_ub:m, -1] = b_eq
    basis: list[int] = []
    for r in range(m):
        if T[r, -1] < 0:
            T[r, :-1] *= -1.0
            T[r, -1] *= -1.0
        if r < m_ub and T[r, n + r] > 0:
            basis.append(n + r)
        else:
            T[r, n_art_start + r] = 1.0
            basis.append(n_art_start + r)

    iters = 0
    artificial_rows = [r for r in range(m) if basis[r] >= n_art_start]
    if artificial_rows:
        T[-1, :] = 0.0
        T[-1, n_art_start:n_art_start + m] = 1.0
        for r in artificial_rows:
            T[-1] -= T[r]
        iters += _iterate(T, basis, n_art_start + m, max_iter)
        scale = max(1.0, float(np.abs(T[:m, -1]).max(initial=0.0)))
        if T[-1, -1] < -TOL * scale:
            raise Infeasible("constraints admit no non-negative solution")
        keep = []
        for r in range(m):
            if basis[r] >= n_art_start:
                cand = np.flatnonzero(np.abs(T[r, :n_art_start]) > TOL)
                if cand.size:
                    _pivot(T, r, int(cand[0]))
                    basis[r] = int(cand[0])
                    keep.append(r)
                # else: redundant equality, dropped below
            else:
                keep.append(r)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[r] for r in keep]
        m = len(keep)
    T = np.hstack([T[:, :n_art_start], T[:, -1:]])

    T[-1, :] = 0.0
    T[-1, :n] = -c
    for r, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    iters += _iterate(T, basis, n_art_start, max_iter)

    x = np.zeros(n_art_start)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    x = np.maximum(x[:n], 0.0)
    return LPResult(x, float(c @ x), iters)
