"""User scheduling under shared ModCods and regularized zero-forcing precoding."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParseError, SingularChannelError, ValidationError
from .scenario import Scenario, UserChannelSet


# --------------------------------------------------------------------------
# ModCod table


@dataclass(frozen=True)
class ModCodTable:
    """Rows of (SINR threshold in dB, spectral efficiency in bit/s/Hz)."""

    thresholds_db: tuple[float, ...]
    efficiencies: tuple[float, ...]

    def __post_init__(self) -> None:
        th, ef = tuple(map(float, self.thresholds_db)), tuple(map(float, self.efficiencies))
        if not th or len(th) != len(ef):
            raise ValidationError("modcod", "table needs equal, non-empty columns")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValidationError("threshold_db", "thresholds must be strictly increasing")
        if any(b <= a for a, b in zip(ef, ef[1:])):
            raise ValidationError("spectral_efficiency", "efficiencies must be strictly increasing")
        object.__setattr__(self, "thresholds_db", th)
        object.__setattr__(self, "efficiencies", ef)

    def index(self, sinr_db: float) -> int:
        """Highest row whose threshold is <= ``sinr_db``; -1 if unservable."""
        idx = -1
        for i, t in enumerate(self.thresholds_db):
            if t <= sinr_db:
                idx = i
            else:
                break
        return idx

    def lookup(self, sinr_db: float) -> float | None:
        i = self.index(sinr_db)
        return None if i < 0 else self.efficiencies[i]

    @classmethod
    def from_csv(cls, text: str) -> "ModCodTable":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["threshold_db", "spectral_efficiency"]:
            raise ParseError("ModCod CSV must start with header threshold_db,spectral_efficiency")
        th, ef = [], []
        for n, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                th.append(float(row[0]))
                ef.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise ParseError(f"ModCod CSV line {n}: {exc}") from exc
        return cls(tuple(th), tuple(ef))

    def to_csv(self) -> str:
        lines = ["threshold_db,spectral_efficiency"]
        lines += [f"{t!r},{e!r}" for t, e in zip(self.thresholds_db, self.efficiencies)]
        return "\n".join(lines) + "\n"


# Synthetic demo rows, not taken from any standard; replace via CSV.
DEMO_MODCOD = ModCodTable((-2.0, 2.0, 6.0, 10.0, 14.0), (0.5, 1.0, 2.0, 3.0, 4.0))


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


# --------------------------------------------------------------------------
# Precoding


@dataclass(frozen=True, eq=False)
class PrecodingMatrix:
    """Column ``i`` of ``W`` precodes the user served in beam ``i``."""

    W: np.ndarray
    alpha: float
    scale: float

    @property
    def power(self) -> float:
        return float(np.real(np.trace(self.W @ self.W.conj().T)))


def default_alpha(s: Scenario) -> float:
    """MMSE-style regularizer ``L * mean(noise) / P_total``."""
    return s.num_beams * float(np.mean(s.noise)) / s.p_total


def rzf(H, alpha: float, p_total: float) -> PrecodingMatrix:
    """Regularized zero-forcing precoder scaled to total power ``p_total``.

    ``H`` stacks the served users' conjugated channel vectors as rows
    (n users x L feeds); ``W = eta * H^H (H H^H + alpha I)^-1`` with
    ``eta`` chosen so that ``trace(W W^H) = p_total``.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ValueError("H must be a 2-D matrix")
    if alpha < 0:
        raise ValidationError("alpha", "regularization must be >= 0")
    if p_total <= 0:
        raise ValidationError("p_total", "must be positive")
    n = H.shape[0]
    A = H @ H.conj().T + alpha * np.eye(n)
    if alpha == 0 and (n > H.shape[1] or np.linalg.cond(A) > 1e13):
        raise SingularChannelError("H H^H is singular; use alpha > 0")
    try:
        W0 = np.linalg.solve(A, H).conj().T  # A is Hermitian: H^H A^-1 = (A^-1 H)^H
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError(str(exc)) from exc
    norm = float(np.real(np.trace(W0 @ W0.conj().T)))
    if not norm > 0:
        raise SingularChannelError("precoder has zero norm")
    scale = math.sqrt(p_total / norm)
    return PrecodingMatrix(scale * W0, float(alpha), scale)


def precoded_sinr(H, W, noise) -> np.ndarray:
    """SINR of each served user: own term over leaked terms plus noise."""
    H = np.asarray(H, dtype=complex)
    W = np.asarray(W, dtype=complex)
    if H.ndim != 2 or W.ndim != 2 or H.shape[1] != W.shape[0] or W.shape[1] != H.shape[0]:
        raise ValueError(f"shape mismatch: H {H.shape}, W {W.shape}")
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (H.shape[0],))
    power = np.abs(H @ W) ** 2
    signal = np.diag(power)
    leak = power.sum(axis=1) - signal
    return signal / (leak + noise)


# --------------------------------------------------------------------------
# Semi-orthogonal user selection


def _residual(h: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    r = h.astype(complex).copy()
    for q in basis:
        r = r - (q.conj() @ r) * q
    return r


def projection_correlation(h: np.ndarray, basis: list[np.ndarray]) -> float:
    """Fraction of ``h``'s norm lying in the span of an orthonormal basis."""
    norm = np.linalg.norm(h)
    if norm == 0:
        return 1.0
    resid = np.linalg.norm(_residual(h, basis))
    return float(math.sqrt(max(0.0, 1.0 - (resid / norm) ** 2)))


def sus_select(candidates, eps: float = 0.4, max_users: int | None = None) -> list[int]:
    """Greedy semi-orthogonal user selection.

    Starts from the strongest channel. Each step drops candidates whose
    normalized projection onto the span of the chosen channels is ``>= eps``
    and adds the survivor with the largest residual norm. Returns candidate
    indices in selection order.
    """
    H = np.asarray(candidates, dtype=complex)
    if H.ndim != 2 or H.shape[0] == 0:
        raise ValueError("candidates must be a non-empty list of vectors")
    if not 0 < eps <= 1:
        raise ValidationError("eps", "must lie in (0, 1]")
    limit = H.shape[1] if max_users is None else min(max_users, H.shape[1])
    norms = np.linalg.norm(H, axis=1)
    first = int(np.argmax(norms))
    selected = [first]
    basis = [H[first] / norms[first]] if norms[first] > 0 else []
    remaining = [i for i in range(H.shape[0]) if i != first]
    while len(selected) < limit and remaining:
        remaining = [i for i in remaining
                     if norms[i] > 0 and projection_correlation(H[i], basis) < eps]
        if not remaining:
            break
        resid = {i: _residual(H[i], basis) for i in remaining}
        best = max(remaining, key=lambda i: (np.linalg.norm(resid[i]), -i))
        selected.append(best)
        basis.append(resid[best] / np.linalg.norm(resid[best]))
        remaining.remove(best)
    return selected


# --------------------------------------------------------------------------
# Frame scheduling


@dataclass(frozen=True)
class Frame:
    beam: int
    users: tuple[tuple[int, int], ...]
    sinr_db: tuple[float, ...]
    efficiency: float
    loss: float


@dataclass
class FramePlan:
    frames: list[Frame]
    unservable: list[tuple[int, int]]
    frame_size: int

    @property
    def total_loss(self) -> float:
        return float(sum(f.loss for f in self.frames))

    @property
    def throughput(self) -> float:
        """Sum of frame efficiency over every scheduled user (bit/s/Hz)."""
        return float(sum(f.efficiency * len(f.users) for f in self.frames))

    def to_document(self) -> dict:
        return {
            "frame_size": self.frame_size,
            "frames": [
                {"beam": f.beam, "users": [list(u) for u in f.users],
                 "sinr_db": list(f.sinr_db), "efficiency": f.efficiency, "loss": f.loss}
                for f in self.frames
            ],
            "unservable": [list(u) for u in self.unservable],
            "total_loss": self.total_loss,
            "throughput": self.throughput,
        }


def _make_frame(beam: int, members: list[tuple[tuple[int, int], float]],
                table: ModCodTable) -> Frame:
    sinrs = [v for _, v in members]
    eff = table.lookup(min(sinrs))
    own = [table.lookup(v) for v in sinrs]
    return Frame(beam, tuple(u for u, _ in members), tuple(sinrs), eff,
                 float(sum(o - eff for o in own)))


def similarity_schedule(user_sinrs_db: Sequence[Sequence[float]], frame_size: int,
                        table: ModCodTable = DEMO_MODCOD) -> FramePlan:
    """Pack each beam's users into frames of similar SINR.

    Users of a beam are sorted by SINR (descending, ties by index) and cut
    into consecutive frames of ``frame_size``; each frame runs the ModCod of
    its weakest member. Users below the first table threshold are reported
    as unservable and left out.
    """
    if frame_size < 1:
        raise ValidationError("frame_size", "must be >= 1")
    frames, unservable = [], []
    for b, sinrs in enumerate(user_sinrs_db):
        servable = []
        for n, v in enumerate(sinrs):
            if table.index(float(v)) < 0:
                unservable.append((b, n))
            else:
                servable.append(((b, n), float(v)))
        servable.sort(key=lambda item: (-item[1], item[0][1]))
        for start in range(0, len(servable), frame_size):
            frames.append(_make_frame(b, servable[start:start + frame_size], table))
    return FramePlan(frames, unservable, frame_size)


def grouping_throughput(groups: Sequence[Sequence[float]], table: ModCodTable) -> float:
    """Throughput of an arbitrary grouping of (servable) SINRs in dB."""
    return float(sum(table.lookup(min(g)) * len(g) for g in groups if len(g)))


# --------------------------------------------------------------------------
# Coupled scheduling and precoding


@dataclass(frozen=True, eq=False)
class SlotResult:
    users: tuple[int | None, ...]  # user index served per beam, None when idle
    precoder: PrecodingMatrix       # L x L, zero column for idle beams
    sinr: np.ndarray                # per beam, NaN when idle


@dataclass
class JointScheduleResult:
    slots: list[SlotResult]
    frame_plan: FramePlan
    user_sinr: list[np.ndarray]
    rounds_run: int
    converged: bool
    history: list[list[tuple[int | None, ...]]] = field(default_factory=list)

    def to_document(self) -> dict:
        return {
            "rounds_run": self.rounds_run,
            "converged": self.converged,
            "slots": [
                {"users": list(sl.users),
                 "sinr_db": [None if np.isnan(v) else float(to_db(v)) for v in sl.sinr],
                 "alpha": sl.precoder.alpha, "scale": sl.precoder.scale}
                for sl in self.slots
            ],
            "user_sinr_db": [[float(to_db(v)) for v in u] for u in self.user_sinr],
            "frame_plan": self.frame_plan.to_document(),
        }


def initial_user_sinr(s: Scenario, channels: UserChannelSet) -> list[np.ndarray]:
    """Unprecoded SINR with ``P_total / L`` radiated per beam."""
    per_beam = s.p_total / s.num_beams
    out = []
    for l in range(s.num_beams):
        g = np.abs(channels.channels[l]) ** 2 * per_beam
        own = g[:, l]
        out.append(own / (g.sum(axis=1) - own + s.noise[l]))
    return out


def _build_slots(s: Scenario, channels: UserChannelSet, sinr: list[np.ndarray],
                 eps: float) -> list[tuple[int | None, ...]]:
    L = s.num_beams
    queues = [sorted(range(len(v)), key=lambda n: (-v[n], n)) for v in sinr]
    slots = []
    for _ in range(max(len(q) for q in queues)):
        basis: list[np.ndarray] = []
        picks: list[int | None] = []
        for l in range(L):
            if not queues[l]:
                picks.append(None)
                continue
            choice = queues[l][0]
            for n in queues[l]:
                if projection_correlation(channels.channels[l][n], basis) < eps:
                    choice = n
                    break
            queues[l].remove(choice)
            picks.append(choice)
            r = _residual(channels.channels[l][choice], basis)
            if np.linalg.norm(r) > 0:
                basis.append(r / np.linalg.norm(r))
        slots.append(tuple(picks))
    return slots


def joint_schedule_precode(s: Scenario, channels: UserChannelSet, alpha: float | None = None,
                           rounds: int = 3, eps: float = 0.4, frame_size: int = 2,
                           table: ModCodTable = DEMO_MODCOD) -> JointScheduleResult:
    """Schedule one user per beam per slot, precode, and iterate on the SINRs.

    Each round sweeps every user once: slot ``i`` takes, per beam, the
    best-ranked unscheduled user that is semi-orthogonal to the users already
    placed in the slot (falling back to the queue head). The slot's RZF
    precoder then yields fresh SINRs which rank the users in the next round.
    Stops early when a round reproduces the previous selection.
    """
    if rounds < 1:
        raise ValidationError("rounds", "must be >= 1")
    if channels.num_beams != s.num_beams:
        raise ValidationError("channels", "one channel list per beam is required")
    if alpha is None:
        alpha = default_alpha(s)
    L = s.num_beams
    sinr = initial_user_sinr(s, channels)
    history: list[list[tuple[int | None, ...]]] = []
    slot_results: list[SlotResult] = []
    converged = False
    for _ in range(rounds):
        selection = _build_slots(s, channels, sinr, eps)
        if history and selection == history[-1]:
            converged = True
            break
        history.append(selection)
        new_sinr = [v.copy() for v in sinr]
        slot_results = []
        for picks in selection:
            active = [l for l in range(L) if picks[l] is not None]
            H = np.array([channels.channels[l][picks[l]].conj() for l in active])
            pre = rzf(H, alpha, s.p_total)
            got = precoded_sinr(H, pre.W, s.noise[active])
            W = np.zeros((L, L), dtype=complex)
            per_beam = np.full(L, np.nan)
            for i, l in enumerate(active):
                W[:, l] = pre.W[:, i]
                per_beam[l] = got[i]
                new_sinr[l][picks[l]] = got[i]
            slot_results.append(SlotResult(picks, PrecodingMatrix(W, pre.alpha, pre.scale),
                                           per_beam))
        sinr = new_sinr
    plan = similarity_schedule([to_db(v) for v in sinr], frame_size, table)
    return JointScheduleResult(slot_results, plan, sinr, len(history), converged, history)
