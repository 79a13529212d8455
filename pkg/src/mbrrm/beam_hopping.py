"""Beam illumination design: snapshots, dwell counts, and sequencing.

A window of ``n_slots = T_H / T_s`` slots is shared among snapshots (sets of
simultaneously lit beams). Each lit beam uses the full band with an equal
share of the total power. Offered capacity is the window-average rate, so
``C_l = sum_g t_g * R[l, g] / n_slots`` and the design goal is the largest
worst-case ratio ``min_l C_l / D_l``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GuardRailError, ParseError, ValidationError
from .metrics import sinr_matrix
from .scenario import Scenario
from .simplex import linprog_max

DEFAULT_SNAPSHOT_CAP = 4096
MAX_ORACLE_SNAPSHOTS = 5
MAX_ORACLE_SLOTS = 12


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    snapshots: tuple[tuple[int, ...], ...]
    rates: np.ndarray  # L x G, bit/s while lit

    @property
    def size(self) -> int:
        return len(self.snapshots)

    def subset(self, indices) -> "SnapshotSet":
        idx = list(indices)
        return SnapshotSet(tuple(self.snapshots[i] for i in idx), self.rates[:, idx])


def snapshot_rates(s: Scenario, snapshots) -> np.ndarray:
    """Full-band rate of every beam in every snapshot (zero when dark)."""
    L = s.num_beams
    R = np.zeros((L, len(snapshots)))
    for g, active in enumerate(snapshots):
        x = np.zeros((1, L))
        x[0, list(active)] = 1.0
        p = x * (s.p_total / len(active))
        gamma = sinr_matrix(s.gain, s.noise, x, p)[0]
        R[:, g] = s.b_total * np.log2(1.0 + gamma)
    return R


def enumerate_snapshots(s: Scenario, max_active: int, min_distance: float = 0.0,
                        cap: int = DEFAULT_SNAPSHOT_CAP) -> SnapshotSet:
    """Every non-empty beam subset of size ``<= max_active`` whose lit beams
    are pairwise at least ``min_distance`` apart. Ordered by size, then
    lexicographically."""
    if max_active < 1:
        raise ValidationError("max_active", "must be >= 1")
    dist = s.distances()
    found: list[tuple[int, ...]] = []
    for size in range(1, min(max_active, s.num_beams) + 1):
        for combo in itertools.combinations(range(s.num_beams), size):
            if all(dist[a, b] >= min_distance for a, b in itertools.combinations(combo, 2)):
                found.append(combo)
                if len(found) > cap:
                    raise GuardRailError(
                        f"more than {cap} snapshots; pass a snapshot file or tighten "
                        "max_active / min_distance")
    return SnapshotSet(tuple(found), snapshot_rates(s, found))


def snapshots_from_json(s: Scenario, text: str) -> SnapshotSet:
    """Snapshot file: JSON list of beam-id lists."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"snapshot file is not valid JSON: {exc}") from exc
    if not isinstance(doc, list) or not doc:
        raise ValidationError("snapshots", "expected a non-empty list of beam-id lists")
    index = {b: i for i, b in enumerate(s.beam_ids)}
    snaps = []
    for g, ids in enumerate(doc):
        if not isinstance(ids, list) or not ids:
            raise ValidationError(f"snapshots[{g}]", "expected a non-empty list of beam ids")
        try:
            snaps.append(tuple(sorted({index[str(b)] for b in ids})))
        except KeyError as exc:
            raise ValidationError(f"snapshots[{g}]", f"unknown beam id {exc}") from exc
    return SnapshotSet(tuple(snaps), snapshot_rates(s, snaps))


def slot_count(window: float, slot_duration: float) -> int:
    if not window > 0:
        raise ValidationError("window", "must be positive")
    if not slot_duration > 0:
        raise ValidationError("slot_duration", "must be positive")
    n = window / slot_duration
    if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
        raise ValidationError("window", "must be a positive whole number of slots")
    return int(round(n))


def _ratio_coefficients(ss: SnapshotSet, demands, n_slots: int) -> np.ndarray:
    """Rows ``R[l] / (n_slots * D_l)`` for beams with positive demand."""
    D = np.asarray(demands, dtype=float)
    if D.shape != (ss.rates.shape[0],):
        raise ValidationError("demands", "one demand per beam is required")
    if np.any(D < 0):
        raise ValidationError("demands", "must be >= 0")
    keep = D > 0
    if not keep.any():
        raise ValidationError("demands", "at least one beam needs positive demand")
    return ss.rates[keep] / (n_slots * D[keep, None])


def pattern_eta(ss: SnapshotSet, demands, t) -> float:
    coef = _ratio_coefficients(ss, demands, int(np.sum(t)))
    return float((coef @ np.asarray(t, dtype=float)).min())


@dataclass(frozen=True)
class LPRelaxation:
    t: np.ndarray
    eta: float


def lp_relax(ss: SnapshotSet, demands, window: float, slot_duration: float) -> LPRelaxation:
    """Continuous dwell times maximizing the worst demand ratio.

    Variables ``(t_1..t_G, eta)``; constraints ``eta <= C_l / D_l`` for every
    beam with demand and ``sum_g t_g = T_H / T_s``.
    """
    if ss.size == 0:
        raise ValidationError("snapshots", "need at least one snapshot")
    n = slot_count(window, slot_duration)
    coef = _ratio_coefficients(ss, demands, n)
    G = ss.size
    c = np.zeros(G + 1)
    c[-1] = 1.0
    A_ub = np.hstack([-coef, np.ones((coef.shape[0], 1))])
    A_eq = np.concatenate([np.ones(G), [0.0]])[None, :]
    res = linprog_max(c, A_ub, np.zeros(coef.shape[0]), A_eq, [float(n)])
    t = res.x[:G]
    t *= n / t.sum()
    return LPRelaxation(t, float(res.x[-1]))


def largest_remainder(weights, total: int) -> np.ndarray:
    """Integer split of ``total`` proportional to ``weights``; remainders go
    to the largest fractional parts, lower index first on ties."""
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        raise ValidationError("weights", "need a positive total weight")
    exact = total * w / w.sum()
    base = np.floor(exact).astype(np.int64)
    left = total - int(base.sum())
    frac = exact - base
    order = sorted(range(len(w)), key=lambda i: (-round(frac[i], 12), i))
    for i in order[:left]:
        base[i] += 1
    return base


def _lex_best(rows: np.ndarray, tol: float) -> int:
    """Index of the lexicographically largest row, comparing with tolerance."""
    alive = np.arange(rows.shape[0])
    for col in range(rows.shape[1]):
        vals = rows[alive, col]
        alive = alive[vals >= vals.max() - tol]
        if alive.size == 1:
            break
    return int(alive[0])


def _lex_greater(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    for x, y in zip(a, b):
        if x > y + tol:
            return True
        if x < y - tol:
            return False
    return False


def round_dwell(t, n_slots: int, ss: SnapshotSet, demands) -> np.ndarray:
    """Integer dwell counts from a continuous solution.

    Largest-remainder rounding keeps the slot total, then single-slot
    transfers between snapshots are applied while they improve the sorted
    vector of demand ratios (worst beam first) lexicographically; the
    steepest such move is taken, lowest (from, to) pair on ties.
    """
    t = np.asarray(t, dtype=float)
    if t.sum() <= 0:
        raise ValidationError("t", "continuous dwell times must have positive sum")
    ti = largest_remainder(np.maximum(t, 0.0), n_slots)
    coef = _ratio_coefficients(ss, demands, n_slots)
    G = coef.shape[1]
    if G == 1:
        return ti
    delta = coef[:, None, :] - coef[:, :, None]  # [l, from, to]: coef[to] - coef[from]
    pairs = [(a, b) for a in range(G) for b in range(G) if a != b]
    src = np.array([a for a, _ in pairs])
    dst = np.array([b for _, b in pairs])
    move = delta[:, src, dst].T  # (pairs, L')
    for _ in range(10 * n_slots * G):
        r = coef @ ti
        tol = 1e-12 * max(1.0, float(np.abs(r).max()))
        cur = np.sort(r)
        ok = ti[src] > 0
        if not ok.any():
            break
        cand = np.sort(r[None, :] + move[ok], axis=1)
        best = _lex_best(cand, tol)
        if not _lex_greater(cand[best], cur, tol):
            break
        k = np.flatnonzero(ok)[best]
        ti[src[k]] -= 1
        ti[dst[k]] += 1
    return ti


def bh_brute_force(ss: SnapshotSet, demands, n_slots: int) -> np.ndarray:
    """Exhaustive optimum over all compositions of ``n_slots``; lexicographically
    smallest dwell vector among ties."""
    if ss.size > MAX_ORACLE_SNAPSHOTS or n_slots > MAX_ORACLE_SLOTS:
        raise GuardRailError(
            f"brute force limited to G <= {MAX_ORACLE_SNAPSHOTS} and N_s <= "
            f"{MAX_ORACLE_SLOTS}; got G={ss.size}, N_s={n_slots}")
    if n_slots < 1:
        raise ValidationError("n_slots", "must be >= 1")
    t, _ = kernels.best_composition(_ratio_coefficients(ss, demands, n_slots), n_slots)
    return np.asarray(t, dtype=np.int64)


def proportional_baseline(ss: SnapshotSet, demands, n_slots: int) -> np.ndarray:
    """Each beam lit alone for a share of slots proportional to its demand."""
    D = np.asarray(demands, dtype=float)
    single = {snap[0]: g for g, snap in enumerate(ss.snapshots) if len(snap) == 1}
    missing = [l for l in range(len(D)) if l not in single]
    if missing:
        raise ValidationError("snapshots", f"no single-beam snapshot for beams {missing}")
    share = largest_remainder(D, n_slots)
    t = np.zeros(ss.size, dtype=np.int64)
    for l, g in single.items():
        t[g] = share[l]
    return t


# --------------------------------------------------------------------------
# Patterns and sequencing


@dataclass(frozen=True, eq=False)
class IlluminationPattern:
    t: np.ndarray
    slot_duration: float
    window: float
    capacity: np.ndarray
    eta: float

    def __post_init__(self) -> None:
        if abs(int(np.sum(self.t)) * self.slot_duration - self.window) > 1e-9 * self.window:
            raise ValidationError("t", "dwell counts must fill the window exactly")


def make_pattern(ss: SnapshotSet, demands, t, slot_duration: float) -> IlluminationPattern:
    t = np.asarray(t, dtype=np.int64)
    if np.any(t < 0):
        raise ValidationError("t", "dwell counts must be >= 0")
    n = int(t.sum())
    cap = ss.rates @ t / n
    return IlluminationPattern(t, slot_duration, n * slot_duration, cap,
                               pattern_eta(ss, demands, t))


def sequence_interleaved(t) -> list[int]:
    """Spread each snapshot's dwells evenly (smooth weighted round-robin)."""
    t = [int(v) for v in t]
    n = sum(t)
    credit = [0] * len(t)
    seq = []
    for _ in range(n):
        for g in range(len(t)):
            credit[g] += t[g]
        g = max(range(len(t)), key=lambda i: (credit[i], -i))
        credit[g] -= n
        seq.append(g)
    return seq


def sequence_blocked(t) -> list[int]:
    return [g for g, k in enumerate(t) for _ in range(int(k))]


@dataclass
class AuditReport:
    sequence: list[int]
    switches: list[int]
    max_gap: list[int | None]
    dark_beams: list[int]
    violations: list[str] = field(default_factory=list)

    @property
    def worst_gap(self) -> int:
        return max((g for g in self.max_gap if g is not None), default=0)

    @property
    def worst_switches(self) -> int:
        return max(self.switches, default=0)

    def to_document(self) -> dict:
        return {"switches": self.switches, "max_gap": self.max_gap,
                "dark_beams": self.dark_beams, "violations": self.violations}


def audit_pattern(ss: SnapshotSet, t, ordering: str = "interleaved",
                  max_switches_per_window: int | None = None,
                  max_revisit_gap_slots: int | None = None) -> AuditReport:
    """Expand dwell counts into a cyclic slot sequence and audit it.

    Per beam: on/off switches over one periodic window and the longest
    cyclic run of dark slots between illuminations. Beams never lit are
    listed as dark and have no gap. Limits are checked, never enforced.
    """
    if ordering == "interleaved":
        seq = sequence_interleaved(t)
    elif ordering == "blocked":
        seq = sequence_blocked(t)
    else:
        raise ValidationError("ordering", "must be 'interleaved' or 'blocked'")
    L = ss.rates.shape[0]
    n = len(seq)
    lit = np.zeros((L, n), dtype=bool)
    for slot, g in enumerate(seq):
        lit[list(ss.snapshots[g]), slot] = True
    switches, gaps, dark = [], [], []
    for l in range(L):
        row = lit[l]
        switches.append(int((row != np.roll(row, 1)).sum()))
        if not row.any():
            gaps.append(None)
            dark.append(l)
            continue
        start = int(np.argmax(row))  # rotate so the run search starts lit
        rolled = np.roll(row, -start)
        longest = run = 0
        for on in rolled:
            run = 0 if on else run + 1
            longest = max(longest, run)
        gaps.append(longest)
    report = AuditReport(seq, switches, gaps, dark)
    if max_switches_per_window is not None:
        for l, sw in enumerate(switches):
            if sw > max_switches_per_window:
                report.violations.append(f"beam {l}: {sw} switches > {max_switches_per_window}")
    if max_revisit_gap_slots is not None:
        for l, gp in enumerate(gaps):
            if gp is not None and gp > max_revisit_gap_slots:
                report.violations.append(f"beam {l}: gap {gp} > {max_revisit_gap_slots}")
    return report


BH_METHODS = ("proportional", "lp", "bruteforce")


@dataclass
class BHResult:
    method: str
    snapshots: SnapshotSet
    pattern: IlluminationPattern
    audit: AuditReport
    eta_lp: float | None = None

    def to_document(self, beam_ids) -> dict:
        doc = {
            "method": self.method,
            "snapshots": [[beam_ids[l] for l in snap] for snap in self.snapshots.snapshots],
            "t": [int(v) for v in self.pattern.t],
            "eta": self.pattern.eta,
            "slot_duration_s": self.pattern.slot_duration,
            "window_s": self.pattern.window,
            "capacity_bps": self.pattern.capacity.tolist(),
            "sequence": self.audit.sequence,
            "audit": {"switches": self.audit.switches, "max_gap": self.audit.max_gap,
                      "dark_beams": self.audit.dark_beams,
                      "violations": self.audit.violations},
        }
        if self.eta_lp is not None:
            doc["eta_lp"] = self.eta_lp
        return doc


def design_pattern(ss: SnapshotSet, demands, window: float, slot_duration: float,
                   method: str = "lp", **audit_limits) -> BHResult:
    """Run one of the illumination designs and audit its sequence."""
    n = slot_count(window, slot_duration)
    eta_lp = None
    if method == "proportional":
        t = proportional_baseline(ss, demands, n)
    elif method == "lp":
        relax = lp_relax(ss, demands, window, slot_duration)
        eta_lp = relax.eta
        t = round_dwell(relax.t, n, ss, demands)
    elif method == "bruteforce":
        t = bh_brute_force(ss, demands, n)
    else:
        raise ValidationError("method", f"must be one of {BH_METHODS}")
    pattern = make_pattern(ss, demands, t, slot_duration)
    return BHResult(method, ss, pattern, audit_pattern(ss, t, **audit_limits), eta_lp)
