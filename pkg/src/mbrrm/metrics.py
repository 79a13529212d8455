"""SINR, offered capacity, and the demand-matching objectives."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .scenario import Scenario
from .serialize import dumps, fmt_float

FEASIBILITY_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class AllocationPlan:
    """Carrier assignment ``x`` and carrier powers ``p``, both K x L."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=np.int8)
        p = np.array(self.p, dtype=float)
        if x.ndim != 2 or x.shape != p.shape:
            raise ValidationError("plan", f"x {x.shape} and p {p.shape} must be equal K x L")
        x.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def total_power(self) -> float:
        return float(self.p.sum())

    def to_document(self) -> dict:
        return {"x": self.x.astype(int).tolist(), "p_w": self.p.tolist()}

    @classmethod
    def from_document(cls, doc: dict) -> "AllocationPlan":
        try:
            return cls(np.array(doc["x"]), np.array(doc["p_w"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError("plan", f"malformed plan document: {exc}") from exc


def plan_violations(s: Scenario, plan: AllocationPlan, rtol: float = FEASIBILITY_RTOL) -> list[str]:
    """List every constraint the plan breaks (empty when feasible)."""
    out = []
    K, L = s.k_carriers, s.num_beams
    if plan.x.shape != (K, L):
        return [f"shape: expected {(K, L)}, got {plan.x.shape}"]
    if not np.isin(plan.x, (0, 1)).all():
        out.append("C3: x not binary")
    if not np.all(np.isfinite(plan.p)) or (plan.p < 0).any():
        out.append("C2: negative or non-finite power")
    if ((plan.p > 0) & (plan.x == 0)).any():
        out.append("power on unassigned carrier")
    if plan.p.sum() > s.p_total * (1 + rtol):
        out.append(f"C1: total power {plan.p.sum()!r} > {s.p_total!r}")
    for tp in s.transponders:
        cols = list(tp.beams)
        if plan.p[:, cols].sum() > tp.p_cap_w * (1 + rtol):
            out.append(f"transponder {tp.id}: power cap exceeded")
        if plan.x[:, cols].sum() > tp.k_cap:
            out.append(f"transponder {tp.id}: carrier cap exceeded")
    return out


def sinr_matrix(gain: np.ndarray, noise: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """SINR of every super-user on every carrier, shape K x L.

    ``gain[l, m]`` couples beam m into beam l. Interference sums only the
    off-diagonal couplings so no cancellation occurs.
    """
    q = np.asarray(p, dtype=float) * np.asarray(x)
    diag = np.diag(gain)
    off = gain - np.diag(diag)
    interference = q @ off.T
    return diag * q / (interference + noise)


def sinr(s: Scenario, plan: AllocationPlan, l: int, k: int) -> float:
    if not (0 <= l < s.num_beams):
        raise IndexError(f"beam index {l} out of range [0, {s.num_beams})")
    if not (0 <= k < s.k_carriers):
        raise IndexError(f"carrier index {k} out of range [0, {s.k_carriers})")
    if not plan.x[k, l]:
        return 0.0
    q = plan.p[k] * plan.x[k]
    interference = sum(s.gain[l, m] * q[m] for m in range(s.num_beams) if m != l)
    return float(s.gain[l, l] * q[l] / (interference + s.noise[l]))


def capacity_from_sinr(gamma: np.ndarray, carrier_width: float) -> np.ndarray:
    return carrier_width * np.log2(1.0 + gamma).sum(axis=0)


def offered_capacity(s: Scenario, plan: AllocationPlan) -> np.ndarray:
    """Per-beam offered capacity in bit/s."""
    gamma = sinr_matrix(s.gain, s.noise, plan.x, plan.p)
    return capacity_from_sinr(gamma, s.carrier_width)


def _pair(C, D) -> tuple[np.ndarray, np.ndarray]:
    C = np.asarray(C, dtype=float)
    D = np.asarray(D, dtype=float)
    if C.shape != D.shape:
        raise ValueError(f"capacity and demand lengths differ: {C.shape} vs {D.shape}")
    return C, D


def usc(C, D) -> float:
    """Unmet system capacity: sum of shortfalls, always <= 0."""
    C, D = _pair(C, D)
    return float(np.minimum(C - D, 0.0).sum())


def mmse(C, D) -> float:
    C, D = _pair(C, D)
    return float(np.mean((C - D) ** 2))


def min_ratio(C, D) -> float:
    C, D = _pair(C, D)
    if np.any(D <= 0):
        raise ValueError("min_ratio needs strictly positive demands")
    return float(np.min(C / D))


@dataclass(frozen=True)
class MetricsReport:
    beam_ids: tuple[str, ...]
    capacity: np.ndarray
    demands: np.ndarray
    usc: float
    mmse: float
    min_ratio: float | None
    satisfaction: np.ndarray

    def to_document(self) -> dict:
        return {
            "beams": [
                {"id": b, "capacity_bps": float(c), "demand_bps": float(d),
                 "satisfaction": None if np.isnan(r) else float(r)}
                for b, c, d, r in zip(self.beam_ids, self.capacity, self.demands,
                                      self.satisfaction)
            ],
            "usc_bps": self.usc,
            "mmse": self.mmse,
            "min_ratio": self.min_ratio,
        }

    def to_json(self) -> str:
        return dumps(self.to_document())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["beam", "capacity_bps", "demand_bps", "satisfaction", "usc_bps",
                    "mmse", "min_ratio"])
        for b, c, d, r in zip(self.beam_ids, self.capacity, self.demands, self.satisfaction):
            w.writerow([b, fmt_float(c), fmt_float(d), "" if np.isnan(r) else fmt_float(r),
                        "", "", ""])
        w.writerow(["summary", fmt_float(self.capacity.sum()), fmt_float(self.demands.sum()),
                    "", fmt_float(self.usc), fmt_float(self.mmse),
                    "" if self.min_ratio is None else fmt_float(self.min_ratio)])
        return buf.getvalue()


def metrics_report(s: Scenario, plan: AllocationPlan) -> MetricsReport:
    C = offered_capacity(s, plan)
    D = np.asarray(s.demands)
    with np.errstate(divide="ignore", invalid="ignore"):
        sat = np.where(D > 0, C / np.where(D > 0, D, 1.0), np.nan)
    return MetricsReport(
        beam_ids=s.beam_ids,
        capacity=C,
        demands=D.copy(),
        usc=usc(C, D),
        mmse=mmse(C, D),
        min_ratio=min_ratio(C, D) if np.all(D > 0) else None,
        satisfaction=sat,
    )
