"""Demand-matched carrier assignment and power allocation.

Maximizes the unmet system capacity ``sum_l min(C_l - D_l, 0)`` subject to
the total power budget, non-negative powers, binary carrier assignment and
optional per-transponder caps. Power and assignment are optimized in turn:

* :func:`sca_power` freezes each carrier's interference at the previous
  iterate, which leaves a concave problem in the own-beam powers. That
  problem is solved exactly by demand-capped water-filling, and a
  backtracking step on the true objective keeps the sequence monotone.
* :func:`assign_carriers` grants carriers in rounds of a rectangular
  assignment problem over marginal USC gains, or rounds a box relaxation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GuardRailError, ValidationError
from .metrics import AllocationPlan, capacity_from_sinr, sinr_matrix
from .scenario import Scenario
from .serialize import fmt_float

RELAXATION_MODES = ("binary_hungarian", "continuous_relax_round")


@dataclass(frozen=True)
class SolverOptions:
    max_outer_iters: int = 10
    sca_max_iters: int = 50
    sca_tolerance: float = 1e-6
    power_grid_levels: int = 4
    relaxation_mode: str = "binary_hungarian"
    seed: int = 0
    n_colors: int | None = None  # None: best divisor of K for the baseline

    def __post_init__(self) -> None:
        if self.max_outer_iters < 1:
            raise ValidationError("max_outer_iters", "must be >= 1")
        if self.sca_max_iters < 1:
            raise ValidationError("sca_max_iters", "must be >= 1")
        if not self.sca_tolerance > 0:
            raise ValidationError("sca_tolerance", "must be > 0")
        if self.power_grid_levels < 1:
            raise ValidationError("power_grid_levels", "must be >= 1")
        if self.relaxation_mode not in RELAXATION_MODES:
            raise ValidationError("relaxation_mode", f"must be one of {RELAXATION_MODES}")


def plan_usc(s: Scenario, x, p) -> float:
    gamma = sinr_matrix(s.gain, s.noise, x, p)
    C = capacity_from_sinr(gamma, s.carrier_width)
    return float(np.minimum(C - s.demands, 0.0).sum())


# --------------------------------------------------------------------------
# Baselines


def _color_key(colors: list[int], dist: np.ndarray) -> tuple[float, int]:
    L = len(colors)
    best, count = math.inf, 0
    for a in range(L):
        for b in range(a + 1, L):
            if colors[a] == colors[b]:
                d = dist[a, b]
                if d < best - 1e-12:
                    best, count = d, 1
                elif abs(d - best) <= 1e-12:
                    count += 1
    return best, -count


def color_beams(centers: np.ndarray, n_colors: int) -> np.ndarray:
    """Greedy reuse coloring that keeps same-color beams far apart.

    Beams are visited in index order and take the color whose nearest
    same-color beam is farthest away (empty colors count as infinitely far,
    ties go to the lower color). Single-beam recolorings are then applied
    while they raise the minimum same-color distance, or keep it and reduce
    the number of pairs sitting at that minimum. Colors are relabeled by
    first appearance.
    """
    centers = np.asarray(centers, dtype=float)
    L = len(centers)
    dist = np.sqrt(((centers[:, None] - centers[None]) ** 2).sum(-1))
    colors: list[int] = []
    for l in range(L):
        scores = []
        for c in range(n_colors):
            members = [m for m in range(l) if colors[m] == c]
            scores.append(min((dist[l, m] for m in members), default=math.inf))
        colors.append(int(np.argmax(scores)))
    key = _color_key(colors, dist)
    improved = True
    while improved:
        improved = False
        for l in range(L):
            for c in range(n_colors):
                if c == colors[l]:
                    continue
                trial = colors.copy()
                trial[l] = c
                tk = _color_key(trial, dist)
                if tk > key:
                    colors, key, improved = trial, tk, True
    relabel: dict[int, int] = {}
    for c in colors:
        relabel.setdefault(c, len(relabel))
    return np.array([relabel[c] for c in colors], dtype=np.int64)


def uniform_power(plan: AllocationPlan, p_total: float) -> AllocationPlan:
    """Equal power on every assigned slot, summing to ``p_total``."""
    n = int(plan.x.sum())
    if n == 0:
        raise ValueError("uniform_power: no carrier is assigned to any beam")
    return AllocationPlan(plan.x, plan.x * (p_total / n))


def _drop_for_carrier_caps(s: Scenario, x: np.ndarray) -> np.ndarray:
    x = x.copy()
    for tp in s.transponders:
        cols = list(tp.beams)
        excess = int(x[:, cols].sum()) - tp.k_cap
        # drop highest carrier first, round-robin over beams from the highest
        k = s.k_carriers - 1
        while excess > 0 and k >= 0:
            for l in reversed(cols):
                if excess > 0 and x[k, l]:
                    x[k, l] = 0
                    excess -= 1
            k -= 1
    return x


def _scale_for_power_caps(s: Scenario, p: np.ndarray) -> np.ndarray:
    p = p.copy()
    for tp in s.transponders:
        cols = list(tp.beams)
        used = p[:, cols].sum()
        if used > tp.p_cap_w:
            p[:, cols] *= tp.p_cap_w / used
    total = p.sum()
    if total > s.p_total:
        p *= s.p_total / total
    return p


def coloring_baseline(s: Scenario, n_colors: int) -> AllocationPlan:
    """Frequency-reuse plan: color ``c`` owns carriers ``[c*K/n, (c+1)*K/n)``.

    Power is uniform over the used slots and totals ``P_total``, then scaled
    down inside any transponder whose cap it exceeds.
    """
    K = s.k_carriers
    if not 1 <= n_colors <= K or K % n_colors:
        raise ValidationError("n_colors", f"{n_colors} must divide K={K} and lie in [1, K]")
    colors = color_beams(s.centers, n_colors)
    per = K // n_colors
    x = np.zeros((K, s.num_beams), dtype=np.int8)
    for l, c in enumerate(colors):
        x[c * per:(c + 1) * per, l] = 1
    x = _drop_for_carrier_caps(s, x)
    plan = uniform_power(AllocationPlan(x, np.zeros(x.shape)), s.p_total)
    return AllocationPlan(plan.x, _scale_for_power_caps(s, np.array(plan.p)))


def color_count_candidates(s: Scenario) -> list[int]:
    K, L = s.k_carriers, s.num_beams
    return [d for d in range(1, K + 1) if K % d == 0 and d <= max(1, L)]


def best_coloring(s: Scenario) -> tuple[AllocationPlan, int]:
    """Coloring baseline with the reuse factor that scores the highest USC."""
    best = None
    for d in color_count_candidates(s):
        plan = coloring_baseline(s, d)
        u = plan_usc(s, plan.x, plan.p)
        if best is None or u > best[0]:
            best = (u, plan, d)
    return best[1], best[2]


# --------------------------------------------------------------------------
# Power: demand-capped water-filling and SCA


def _demand_levels(a: np.ndarray, mask: np.ndarray, demand_bits: np.ndarray) -> np.ndarray:
    """Lowest water level at which each beam's rate reaches its demand.

    ``demand_bits`` is demand over carrier width (bit/s/Hz summed over
    carriers). Rate at level w is ``sum_k log2(max(1, a_k w))``.
    """
    K, L = a.shape
    out = np.zeros(L)
    for l in range(L):
        gains = np.sort(a[mask[:, l], l])[::-1]
        if gains.size == 0 or demand_bits[l] <= 0:
            continue
        log_a = np.log2(gains)
        csum = np.cumsum(log_a)
        for n in range(1, gains.size + 1):
            log_w = (demand_bits[l] - csum[n - 1]) / n
            upper = -log_a[n] if n < gains.size else math.inf
            if log_w <= upper:
                out[l] = 2.0**log_w
                break
    return out


def _beam_power(a: np.ndarray, mask: np.ndarray, level: np.ndarray) -> np.ndarray:
    inv = np.where(mask, 1.0 / np.where(mask, a, 1.0), np.inf)
    return np.maximum(level[None, :] - inv, 0.0)


def _bisect_level(power_at, target: float, hi: float) -> float:
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if power_at(mid) > target:
            hi = mid
        else:
            lo = mid
    return lo


def capped_waterfill(s: Scenario, a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Maximize ``sum_l min(sum_k B log2(1 + a_kl p_kl), D_l)`` exactly.

    Constraints: ``p >= 0``, ``p = 0`` off the assignment, total power and
    per-transponder power caps. Each beam fills water to
    ``min(global level, its transponder level, its demand level)``.
    """
    mask = np.asarray(x, dtype=bool) & (a > 0)
    demand_levels = _demand_levels(a, mask, s.demands / s.carrier_width)
    cap_level = demand_levels.copy()

    def total(levels: np.ndarray, cols=slice(None)) -> float:
        return float(_beam_power(a[:, cols], mask[:, cols], levels).sum())

    for tp in s.transponders:
        cols = list(tp.beams)
        dl = demand_levels[cols]
        if total(dl, cols) > tp.p_cap_w:
            lvl = _bisect_level(lambda v: total(np.minimum(v, dl), cols), tp.p_cap_w, dl.max())
            cap_level[cols] = np.minimum(dl, lvl)

    if total(cap_level) > s.p_total:
        lvl = _bisect_level(lambda v: total(np.minimum(v, cap_level)), s.p_total,
                            cap_level.max())
        cap_level = np.minimum(cap_level, lvl)
    return _beam_power(a, mask, cap_level)


def _frozen_gain(s: Scenario, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    q = p * x
    off = s.gain - np.diag(np.diag(s.gain))
    interference = q @ off.T
    return np.diag(s.gain)[None, :] / (interference + s.noise)


def _converged(new: float, old: float, tol: float) -> bool:
    return abs(new - old) <= tol * max(abs(old), 1.0)


def sca_power(s: Scenario, x, p0, opts: SolverOptions | None = None,
              trace: list[float] | None = None) -> np.ndarray:
    """Successive convex approximation of the power subproblem for fixed ``x``.

    Each step freezes every interference term at the current powers, solves
    the resulting concave problem with :func:`capped_waterfill`, and moves
    toward that solution with halving step sizes until the true USC does
    not drop. The objective after every accepted step is appended to
    ``trace`` when given.
    """
    opts = opts or SolverOptions()
    x = np.asarray(x, dtype=np.int8)
    p = np.asarray(p0, dtype=float) * x
    violations = _power_violations(s, x, p)
    if violations:
        raise ValidationError("p0", "infeasible initial power: " + "; ".join(violations))
    u = plan_usc(s, x, p)
    if trace is not None:
        trace.append(u)
    for _ in range(opts.sca_max_iters):
        if u >= 0.0:
            break
        target = capped_waterfill(s, _frozen_gain(s, x, p), x)
        step, accepted = 1.0, None
        for _ in range(30):
            cand = p + step * (target - p)
            uc = plan_usc(s, x, cand)
            if uc >= u:
                accepted = (cand, uc)
                break
            step *= 0.5
        if accepted is None:
            break
        p, u_new = accepted
        if trace is not None:
            trace.append(u_new)
        done = _converged(u_new, u, opts.sca_tolerance)
        u = u_new
        if done:
            break
    return p


def _power_violations(s: Scenario, x: np.ndarray, p: np.ndarray) -> list[str]:
    out = []
    if (p < 0).any():
        out.append("negative power")
    if p.sum() > s.p_total * (1 + 1e-9):
        out.append("total power exceeds P_total")
    for tp in s.transponders:
        if p[:, list(tp.beams)].sum() > tp.p_cap_w * (1 + 1e-9):
            out.append(f"transponder {tp.id} power cap exceeded")
    return out


# --------------------------------------------------------------------------
# Carrier assignment


def beam_budgets(s: Scenario, p: np.ndarray) -> np.ndarray:
    """Per-beam power budgets derived from a power matrix.

    Beams with demand but no power get an equal share so they can still be
    offered carriers; the result is scaled back inside all power caps.
    """
    b = np.asarray(p, dtype=float).sum(axis=0)
    starving = (b <= 0) & (s.demands > 0)
    b = np.where(starving, s.p_total / s.num_beams, b)
    return _cap_budgets(s, b)


def _cap_budgets(s: Scenario, b: np.ndarray) -> np.ndarray:
    b = b.copy()
    for tp in s.transponders:
        cols = list(tp.beams)
        if b[cols].sum() > tp.p_cap_w:
            b[cols] *= tp.p_cap_w / b[cols].sum()
    if b.sum() > s.p_total:
        b *= s.p_total / b.sum()
    return b


def spread_budgets(x: np.ndarray, budgets: np.ndarray) -> np.ndarray:
    n = x.sum(axis=0)
    per = np.where(n > 0, budgets / np.maximum(n, 1), 0.0)
    return x * per


def _cap_room(s: Scenario, x: np.ndarray) -> np.ndarray:
    """Per-beam count of further assignments its transponder still allows."""
    room = np.full(s.num_beams, np.iinfo(np.int64).max, dtype=np.int64)
    for tp in s.transponders:
        cols = list(tp.beams)
        room[cols] = tp.k_cap - int(x[:, cols].sum())
    return room


def _assign_hungarian(s: Scenario, budgets: np.ndarray, excluded=()) -> np.ndarray:
    K, L = s.k_carriers, s.num_beams
    x = np.zeros((K, L), dtype=np.int8)
    threshold = 1e-9 * (float(s.demands.sum()) + 1.0)
    for _ in range(K * L):
        gains = kernels.marginal_usc_gains(s.gain, s.noise, s.demands, s.carrier_width,
                                           x, budgets)
        gains[:, _cap_room(s, x) <= 0] = -np.inf
        gains[:, list(excluded)] = -np.inf
        if not (gains > threshold).any():
            break
        utility = np.where(gains > threshold, gains, 0.0)
        assign = kernels.hungarian(-utility)
        picks = [(utility[k, l], k, l) for k, l in enumerate(assign)
                 if l >= 0 and utility[k, l] > 0]
        picks.sort(key=lambda t: (-t[0], t[2], t[1]))
        base = plan_usc(s, x, spread_budgets(x, budgets))
        trial = x.copy()
        for _, k, l in picks:
            if _cap_room(s, trial)[l] > 0:
                trial[k, l] = 1
        if plan_usc(s, trial, spread_budgets(trial, budgets)) > base:
            x = trial
        else:
            # joint grant interferes with itself; keep only the best single slot
            _, k, l = picks[0]
            x[k, l] = 1
    return x


def usc_gradient(s: Scenario, q: np.ndarray) -> np.ndarray:
    """Supergradient of USC with respect to the effective powers ``q = x * p``.

    Beams whose demand is already met contribute no weight.
    """
    gain = s.gain
    diag = np.diag(gain)
    off = gain - np.diag(diag)
    interference = q @ off.T + s.noise
    gamma = diag * q / interference
    C = capacity_from_sinr(gamma, s.carrier_width)
    w = (C < s.demands).astype(float)
    scale = s.carrier_width / math.log(2.0)
    own = w * diag / (interference + diag * q)
    # d/dq[k,m] of beam l's rate, l != m: -gamma/(1+gamma) * g[l,m] / I[k,l]
    cross_coef = w * gamma / (1.0 + gamma) / interference
    cross = cross_coef @ off
    return scale * (own - cross)


def _assign_relaxed(s: Scenario, budgets: np.ndarray, excluded=(), iters: int = 100) -> np.ndarray:
    K, L = s.k_carriers, s.num_beams
    full = np.broadcast_to(budgets / K, (K, L)).copy()
    full[:, list(excluded)] = 0.0
    z = np.full((K, L), 0.5)
    z[:, list(excluded)] = 0.0

    def objective(zz: np.ndarray) -> float:
        return plan_usc(s, np.ones((K, L)), zz * full)

    u = objective(z)
    step = 1.0
    for _ in range(iters):
        grad = usc_gradient(s, z * full) * full
        norm = np.abs(grad).max()
        if norm <= 0:
            break
        d = grad / norm
        d[:, list(excluded)] = 0.0
        moved = False
        for _ in range(40):
            cand = np.clip(z + step * d, 0.0, 1.0)
            uc = objective(cand)
            if uc > u:
                z, u, moved = cand, uc, True
                step = min(step * 2.0, 1.0)
                break
            step *= 0.5
        if not moved:
            break
    order = sorted(((-z[k, l], l, k) for k in range(K) for l in range(L)))
    x = np.zeros((K, L), dtype=np.int8)
    room = _cap_room(s, x)
    for neg, l, k in order:
        if -neg < 0.5:
            break
        if room[l] > 0:
            x[k, l] = 1
            room = _cap_room(s, x)
    return x


def assign_carriers(s: Scenario, p, mode: str = "binary_hungarian") -> np.ndarray:
    """Choose a binary assignment for the power profile ``p``.

    ``p`` fixes the per-beam power budgets; within a beam the budget is
    spread evenly over its carriers while slots are scored.
    """
    if mode not in RELAXATION_MODES:
        raise ValidationError("relaxation_mode", f"must be one of {RELAXATION_MODES}")
    budgets = beam_budgets(s, np.asarray(p, dtype=float))
    if mode == "binary_hungarian":
        return _assign_hungarian(s, budgets)
    return _assign_relaxed(s, budgets)


# --------------------------------------------------------------------------
# Alternating solver


@dataclass
class SolveResult:
    plan: AllocationPlan
    usc: float
    baseline: AllocationPlan
    baseline_usc: float
    n_colors: int
    trace: list[dict] = field(default_factory=list)
    sca_traces: list[list[float]] = field(default_factory=list)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "usc", "assignment_changes", "best_usc"])
        for row in self.trace:
            w.writerow([row["iter"], fmt_float(row["usc"]), row["assignment_changes"],
                        fmt_float(row["best_usc"])])
        return buf.getvalue()


def _feasible_start(s: Scenario, x: np.ndarray, budgets: np.ndarray) -> np.ndarray:
    return _scale_for_power_caps(s, spread_budgets(x, budgets))


def _switch_off_probe(s: Scenario, x: np.ndarray, p: np.ndarray, u: float,
                      opts: SolverOptions, sca_traces: list) -> tuple[np.ndarray, np.ndarray, float]:
    """Try serving without each powered beam in turn; keep the best gain.

    A beam that costs its neighbours more than it delivers can only be shed
    by a move that removes all its carriers at once and hands its power to
    the others; single-slot moves never see that improvement.
    """
    best = (x, p, u)
    budgets = beam_budgets(s, p)
    for l in range(s.num_beams):
        if not x[:, l].any() or budgets[l] <= 0:
            continue
        others = budgets.copy()
        others[l] = 0.0
        if others.sum() <= 0:
            continue
        others *= budgets.sum() / others.sum()
        others = _cap_budgets(s, others)
        if opts.relaxation_mode == "binary_hungarian":
            x_try = _assign_hungarian(s, others, excluded=(l,))
        else:
            x_try = _assign_relaxed(s, others, excluded=(l,))
        if not x_try.any():
            continue
        trace: list[float] = []
        p_try = sca_power(s, x_try, _feasible_start(s, x_try, others), opts, trace)
        sca_traces.append(trace)
        u_try = plan_usc(s, x_try, p_try)
        if u_try > best[2] + 1e-9 * max(1.0, abs(best[2])):
            best = (x_try, p_try, u_try)
    return best


def alternating_solve(s: Scenario, opts: SolverOptions | None = None) -> SolveResult:
    """Alternate carrier assignment and SCA power control from the reuse baseline.

    Every outer iteration re-assigns carriers for the current power profile,
    re-optimizes power, then probes switching single beams off. A round that
    would lower USC ends the loop, so the recorded iterates never decrease.
    Returns the best plan seen; its USC is never below the baseline's.
    """
    opts = opts or SolverOptions()
    if opts.n_colors is None:
        baseline, n_colors = best_coloring(s)
    else:
        n_colors = opts.n_colors
        baseline = coloring_baseline(s, n_colors)
    base_u = plan_usc(s, baseline.x, baseline.p)
    result = SolveResult(plan=baseline, usc=base_u, baseline=baseline, baseline_usc=base_u,
                         n_colors=n_colors)

    x = np.array(baseline.x)
    sca = []
    p = sca_power(s, x, baseline.p, opts, sca)
    result.sca_traces.append(sca)
    u = plan_usc(s, x, p)
    if u > result.usc:
        result.plan, result.usc = AllocationPlan(x, p), u
    result.trace.append({"iter": 0, "usc": u, "assignment_changes": 0,
                         "best_usc": result.usc})

    for it in range(1, opts.max_outer_iters + 1):
        if result.usc >= 0.0:
            break
        x_new = assign_carriers(s, p, opts.relaxation_mode).astype(np.int8)
        if x_new.sum() == 0:
            break
        p0 = _feasible_start(s, x_new, beam_budgets(s, p))
        sca = []
        p_new = sca_power(s, x_new, p0, opts, sca)
        result.sca_traces.append(sca)
        u_new = plan_usc(s, x_new, p_new)
        x_new, p_new, u_new = _switch_off_probe(s, x_new, p_new, u_new, opts,
                                                result.sca_traces)
        if u_new < u:
            break  # a worse round ends the search; iterates stay monotone
        changes = int((x_new != x).sum())
        if u_new > result.usc:
            result.plan, result.usc = AllocationPlan(x_new, p_new), u_new
        result.trace.append({"iter": it, "usc": u_new, "assignment_changes": changes,
                             "best_usc": result.usc})
        stalled = changes == 0 or _converged(u_new, u, opts.sca_tolerance)
        x, p, u = x_new, p_new, u_new
        if stalled:
            break
    # drop unpowered assignments so x mirrors where power flows
    plan = result.plan
    result.plan = AllocationPlan(np.where(plan.p > 0, plan.x, 0), plan.p)
    return result


# --------------------------------------------------------------------------
# Exhaustive oracle

MAX_ORACLE_SLOTS = 9
MAX_ORACLE_LEVELS = 5


def _pick_grid(grid: np.ndarray, vals: np.ndarray) -> int:
    best = vals.max()
    near = np.flatnonzero(vals >= best - kernels.TIE_RTOL * max(1.0, abs(best)))
    return int(min(near, key=lambda i: (int(grid[i].sum()), tuple((grid[i] > 0).tolist()),
                                        tuple(grid[i].tolist()))))


def brute_force_plan(s: Scenario, levels: int = 4) -> AllocationPlan:
    """Exhaustive optimum of the USC problem on a discrete power grid.

    Powers take values ``j * P_total / levels`` with ``sum(j) <= levels``.
    For a given power matrix every assignment containing its support scores
    the same (unpowered carriers neither serve nor interfere), and the
    support itself is the lexicographically smallest of them, so the search
    runs over power matrices with ``x = (p > 0)``. Ties: lower total power,
    then lexicographic ``x``, then lexicographic grid index vector.
    """
    K, L = s.k_carriers, s.num_beams
    if K * L > MAX_ORACLE_SLOTS or not 1 <= levels <= MAX_ORACLE_LEVELS:
        raise GuardRailError(
            f"brute force limited to K*L <= {MAX_ORACLE_SLOTS} and levels <= "
            f"{MAX_ORACLE_LEVELS}; got K*L={K * L}, levels={levels}")
    step = s.p_total / levels
    if not s.transponders:
        j, _ = kernels.best_power_grid(s.gain, s.noise, s.demands, K, s.carrier_width,
                                       s.p_total, levels)
    else:
        grid = kernels.simplex_grid(levels, K * L)
        cube = grid.reshape(-1, K, L)
        vals = np.array([plan_usc(s, c > 0, c * step) for c in cube])
        for tp in s.transponders:
            cols = list(tp.beams)
            over_p = cube[:, :, cols].sum(axis=(1, 2)) * step > tp.p_cap_w * (1 + 1e-12)
            over_k = (cube[:, :, cols] > 0).sum(axis=(1, 2)) > tp.k_cap
            vals[over_p | over_k] = -np.inf
        j = cube[_pick_grid(grid, vals)]
    j = np.asarray(j)
    return AllocationPlan((j > 0).astype(np.int8), j * step)
