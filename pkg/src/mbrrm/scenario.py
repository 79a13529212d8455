"""System model: beams, super-user gains, budgets, and scenario synthesis.

A :class:`Scenario` holds one representative super-user per beam. Entry
``gain[l, m]`` is the linear power gain from beam ``m``'s transmission to
beam ``l``'s super-user, with the rain margin already applied.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any

import numpy as np

from .errors import ParseError, ValidationError
from .prng import Xoshiro256

# Gaussian beam: g(d) = g_peak * exp(-BEAM_SHAPE * d**2 / theta**2). With
# BEAM_SHAPE = 4 ln 2 the gain halves at d = theta / 2, i.e. theta is the full
# 3 dB beamwidth measured in the same planar units as the beam centers.
BEAM_SHAPE = 4.0 * math.log(2.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Transponder:
    """A payload unit serving a group of beams under shared caps.

    ``p_cap_w`` bounds the summed carrier power of its beams and ``k_cap``
    bounds the number of (carrier, beam) assignments among its beams.
    """

    id: str
    beams: tuple[int, ...]
    p_cap_w: float
    k_cap: int


@dataclass(frozen=True)
class BeamModel:
    """Gaussian beam profile used to synthesize gains and user channels."""

    g_peak: float
    theta_3db: float
    rain_margin_db: float = 0.0

    def gain(self, distance) -> np.ndarray:
        d = np.asarray(distance, dtype=float)
        rain = 10.0 ** (-self.rain_margin_db / 10.0)
        return self.g_peak * rain * np.exp(-BEAM_SHAPE * d**2 / self.theta_3db**2)


@dataclass(frozen=True, eq=False)
class Scenario:
    beam_ids: tuple[str, ...]
    centers: np.ndarray
    demands: np.ndarray
    users_per_beam: np.ndarray
    gain: np.ndarray
    noise: np.ndarray
    b_total: float
    k_carriers: int
    p_total: float
    transponders: tuple[Transponder, ...] = ()
    rain_margin_db: float = 0.0
    beam_model: BeamModel | None = None
    transponder_of: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        set_ = object.__setattr__
        set_(self, "centers", _frozen(np.asarray(self.centers, dtype=float).reshape(-1, 2)))
        set_(self, "demands", _frozen(np.asarray(self.demands, dtype=float)))
        set_(self, "users_per_beam", _frozen(np.asarray(self.users_per_beam, dtype=np.int64)))
        set_(self, "gain", _frozen(np.asarray(self.gain, dtype=float)))
        set_(self, "noise", _frozen(np.asarray(self.noise, dtype=float)))
        set_(self, "beam_ids", tuple(self.beam_ids))
        set_(self, "transponders", tuple(self.transponders))
        _validate(self)
        owner = np.full(self.num_beams, -1, dtype=np.int64)
        for t, tp in enumerate(self.transponders):
            owner[list(tp.beams)] = t
        set_(self, "transponder_of", _frozen(owner))

    @property
    def num_beams(self) -> int:
        return len(self.demands)

    @property
    def carrier_width(self) -> float:
        return self.b_total / self.k_carriers

    def with_demands(self, demands) -> "Scenario":
        return replace(self, demands=np.asarray(demands, dtype=float))

    def distances(self) -> np.ndarray:
        diff = self.centers[:, None, :] - self.centers[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))


def _validate(s: Scenario) -> None:
    L = len(s.demands)
    if L < 1:
        raise ValidationError("beams", "at least one beam is required")
    if len(s.beam_ids) != L or len(set(s.beam_ids)) != L:
        raise ValidationError("beams[].id", "beam ids must be unique, one per beam")
    for name, arr in (("centers", s.centers), ("users_per_beam", s.users_per_beam),
                      ("noise", s.noise)):
        if arr.shape[0] != L:
            raise ValidationError(name, f"expected {L} entries, got {arr.shape[0]}")
    if not np.all(np.isfinite(s.demands)) or np.any(s.demands < 0):
        bad = int(np.argmax(~(np.isfinite(s.demands) & (s.demands >= 0))))
        raise ValidationError(f"beams[{bad}].demand_bps", "demand must be finite and >= 0")
    if np.any(s.users_per_beam < 1):
        bad = int(np.argmax(s.users_per_beam < 1))
        raise ValidationError(f"beams[{bad}].users", "each beam needs at least one user")
    if not np.all(np.isfinite(s.noise)) or np.any(s.noise <= 0):
        bad = int(np.argmax(~(np.isfinite(s.noise) & (s.noise > 0))))
        raise ValidationError(f"beams[{bad}].noise_w", "noise power must be positive")
    if s.gain.shape != (L, L):
        raise ValidationError("gain_matrix", f"expected {L}x{L}, got {s.gain.shape}")
    if not np.all(np.isfinite(s.gain)) or np.any(s.gain < 0):
        l, m = np.argwhere(~(np.isfinite(s.gain) & (s.gain >= 0)))[0]
        raise ValidationError(f"gain_matrix[{l}][{m}]", "gains must be finite and >= 0")
    diag = np.diag(s.gain)
    if np.any(diag <= 0):
        l = int(np.argmax(diag <= 0))
        raise ValidationError(f"gain_matrix[{l}][{l}]", "own-beam gain must be positive")
    dominated = s.gain > diag[:, None]
    if np.any(dominated):
        l, m = np.argwhere(dominated)[0]
        raise ValidationError(
            f"gain_matrix[{l}][{m}]",
            f"diagonal dominance violated: g[{l}][{m}]={s.gain[l, m]!r} > g[{l}][{l}]={diag[l]!r}",
        )
    if not (isinstance(s.k_carriers, (int, np.integer)) and s.k_carriers >= 1):
        raise ValidationError("spectrum.k_carriers", "must be a positive integer")
    if not (math.isfinite(s.b_total) and s.b_total > 0):
        raise ValidationError("spectrum.b_total_hz", "must be positive")
    quotient = Fraction(s.b_total) / int(s.k_carriers)
    if Fraction(float(quotient)) != quotient:
        raise ValidationError(
            "spectrum.b_total_hz",
            f"{s.b_total!r} Hz is not exactly divisible into {s.k_carriers} carriers",
        )
    if not (math.isfinite(s.p_total) and s.p_total > 0):
        raise ValidationError("power.p_total_w", "must be positive")
    if s.rain_margin_db < 0:
        raise ValidationError("rain_margin_db", "must be >= 0")
    if s.transponders:
        seen: list[int] = []
        for t, tp in enumerate(s.transponders):
            if not (tp.p_cap_w > 0 and tp.p_cap_w <= s.p_total):
                raise ValidationError(f"power.transponders[{t}].p_cap_w",
                                      "must lie in (0, p_total_w]")
            if tp.k_cap < 1:
                raise ValidationError(f"power.transponders[{t}].k_cap", "must be >= 1")
            seen.extend(tp.beams)
        if sorted(seen) != list(range(L)):
            raise ValidationError("beams[].transponder",
                                  "transponders must partition the beams exactly once")


# --------------------------------------------------------------------------
# JSON documents


def _require(obj: dict, key: str, where: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"{where}{key}", "missing required field")
    return obj[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(where, f"expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ValidationError(where, f"expected an integer, got {value!r}")
    return value


def scenario_from_document(doc: dict) -> Scenario:
    """Build a validated :class:`Scenario` from a decoded JSON object."""
    if not isinstance(doc, dict):
        raise ValidationError("<root>", "scenario document must be a JSON object")
    beams = _require(doc, "beams", "")
    if not isinstance(beams, list) or not beams:
        raise ValidationError("beams", "must be a non-empty list")
    ids, centers, demands, users, noise, tp_ref = [], [], [], [], [], []
    for i, b in enumerate(beams):
        w = f"beams[{i}]."
        ids.append(str(_require(b, "id", w)))
        c = _require(b, "center", w)
        if not isinstance(c, list) or len(c) != 2:
            raise ValidationError(w + "center", "expected [x, y]")
        centers.append([_number(c[0], w + "center[0]"), _number(c[1], w + "center[1]")])
        demands.append(_number(_require(b, "demand_bps", w), w + "demand_bps"))
        users.append(_integer(_require(b, "users", w), w + "users"))
        noise.append(_number(_require(b, "noise_w", w), w + "noise_w"))
        tp_ref.append(b.get("transponder"))
    L = len(beams)

    rows = _require(doc, "gain_matrix", "")
    if not isinstance(rows, list) or len(rows) != L:
        raise ValidationError("gain_matrix", f"expected {L} rows")
    gain = []
    for l, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != L:
            raise ValidationError(f"gain_matrix[{l}]", f"expected {L} entries")
        gain.append([_number(v, f"gain_matrix[{l}][{m}]") for m, v in enumerate(row)])

    spectrum = _require(doc, "spectrum", "")
    b_total = _number(_require(spectrum, "b_total_hz", "spectrum."), "spectrum.b_total_hz")
    k = _integer(_require(spectrum, "k_carriers", "spectrum."), "spectrum.k_carriers")
    power = _require(doc, "power", "")
    p_total = _number(_require(power, "p_total_w", "power."), "power.p_total_w")

    transponders: list[Transponder] = []
    tp_docs = power.get("transponders") or []
    if tp_docs:
        index = {}
        for t, tp in enumerate(tp_docs):
            w = f"power.transponders[{t}]."
            tid = str(_require(tp, "id", w))
            index[tid] = t
            transponders.append(Transponder(
                tid, (), _number(_require(tp, "p_cap_w", w), w + "p_cap_w"),
                _integer(_require(tp, "k_cap", w), w + "k_cap")))
        members: list[list[int]] = [[] for _ in transponders]
        for i, ref in enumerate(tp_ref):
            if ref is None or str(ref) not in index:
                raise ValidationError(f"beams[{i}].transponder",
                                      f"unknown or missing transponder {ref!r}")
            members[index[str(ref)]].append(i)
        transponders = [replace(tp, beams=tuple(m)) for tp, m in zip(transponders, members)]
    elif any(ref is not None for ref in tp_ref):
        raise ValidationError("power.transponders", "beams reference undeclared transponders")

    model = None
    if doc.get("beam_model") is not None:
        bm = doc["beam_model"]
        model = BeamModel(
            _number(_require(bm, "g_peak", "beam_model."), "beam_model.g_peak"),
            _number(_require(bm, "theta_3db", "beam_model."), "beam_model.theta_3db"),
            _number(bm.get("rain_margin_db", 0.0), "beam_model.rain_margin_db"),
        )
    return Scenario(
        beam_ids=tuple(ids), centers=np.array(centers), demands=np.array(demands),
        users_per_beam=np.array(users), gain=np.array(gain), noise=np.array(noise),
        b_total=b_total, k_carriers=k, p_total=p_total, transponders=tuple(transponders),
        rain_margin_db=_number(doc.get("rain_margin_db", 0.0), "rain_margin_db"),
        beam_model=model,
    )


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario JSON document.

    Raises :class:`ParseError` for malformed JSON and :class:`ValidationError`
    (naming the field) when an invariant is violated.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario is not valid JSON: {exc}") from exc
    return scenario_from_document(doc)


def scenario_to_document(s: Scenario) -> dict:
    tp_name = {l: s.transponders[t].id for t in range(len(s.transponders))
               for l in s.transponders[t].beams}
    beams = []
    for l in range(s.num_beams):
        b = {
            "id": s.beam_ids[l],
            "center": [float(s.centers[l, 0]), float(s.centers[l, 1])],
            "demand_bps": float(s.demands[l]),
            "users": int(s.users_per_beam[l]),
            "noise_w": float(s.noise[l]),
        }
        if l in tp_name:
            b["transponder"] = tp_name[l]
        beams.append(b)
    power: dict[str, Any] = {"p_total_w": float(s.p_total)}
    if s.transponders:
        power["transponders"] = [
            {"id": tp.id, "p_cap_w": float(tp.p_cap_w), "k_cap": int(tp.k_cap)}
            for tp in s.transponders
        ]
    doc: dict[str, Any] = {
        "beams": beams,
        "gain_matrix": [[float(v) for v in row] for row in s.gain],
        "spectrum": {"b_total_hz": float(s.b_total), "k_carriers": int(s.k_carriers)},
        "power": power,
        "rain_margin_db": float(s.rain_margin_db),
    }
    if s.beam_model is not None:
        doc["beam_model"] = {
            "g_peak": s.beam_model.g_peak,
            "theta_3db": s.beam_model.theta_3db,
            "rain_margin_db": s.beam_model.rain_margin_db,
        }
    return doc


# --------------------------------------------------------------------------
# Synthesis


@dataclass(frozen=True)
class ScenarioParams:
    """Knobs for :func:`generate_scenario`. Lengths are in beam-center units."""

    num_beams: int
    seed: int = 0
    layout: str = "hex"
    spacing: float = 1.0
    theta_3db: float = 1.0
    g_peak: float = 1.0
    rain_margin_db: float = 3.0
    noise_w: float = 0.5
    demand_min_bps: float = 5e8
    demand_max_bps: float = 4e9
    users_min: int = 1
    users_max: int = 4
    k_carriers: int = 4
    carrier_width_hz: float = 125e6
    p_total_w: float = 200.0
    n_transponders: int = 0
    transponder_p_cap_frac: float = 0.6
    transponder_k_cap: int | None = None


def hex_centers(n: int, spacing: float = 1.0) -> np.ndarray:
    """First ``n`` cells of a hexagonal spiral (center, ring 1, ring 2, ...)."""
    dirs = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
    cells = [(0, 0)]
    ring = 1
    while len(cells) < n:
        q, r = -ring, ring  # dirs[4] scaled by ring
        for dq, dr in dirs:
            for _ in range(ring):
                cells.append((q, r))
                q, r = q + dq, r + dr
        ring += 1
    cells = cells[:n]
    return np.array([[spacing * (q + r / 2.0), spacing * r * math.sqrt(3.0) / 2.0]
                     for q, r in cells])


def _check_params(p: ScenarioParams) -> None:
    if p.num_beams < 1:
        raise ValidationError("num_beams", "must be >= 1")
    if p.layout not in ("hex", "line"):
        raise ValidationError("layout", "must be 'hex' or 'line'")
    for name in ("spacing", "theta_3db", "g_peak", "noise_w", "carrier_width_hz",
                 "p_total_w", "demand_min_bps"):
        if not getattr(p, name) > 0:
            raise ValidationError(name, "must be positive")
    if p.demand_max_bps < p.demand_min_bps:
        raise ValidationError("demand_max_bps", "must be >= demand_min_bps")
    if not 1 <= p.users_min <= p.users_max:
        raise ValidationError("users_min", "need 1 <= users_min <= users_max")
    if p.k_carriers < 1:
        raise ValidationError("k_carriers", "must be >= 1")
    if p.rain_margin_db < 0:
        raise ValidationError("rain_margin_db", "must be >= 0")
    if not 0 <= p.n_transponders <= p.num_beams:
        raise ValidationError("n_transponders", "must lie in [0, num_beams]")
    if p.n_transponders and not 0 < p.transponder_p_cap_frac <= 1:
        raise ValidationError("transponder_p_cap_frac", "must lie in (0, 1]")


def generate_scenario(params: ScenarioParams) -> Scenario:
    """Synthesize a reproducible scenario.

    Draw order from one xoshiro256** stream: for each beam in index order,
    its demand (log-uniform) and then its user count (uniform integer).
    Super-users sit at beam centers, so ``gain[l, m]`` is the beam model
    evaluated at the distance between centers ``l`` and ``m``.
    """
    _check_params(params)
    L = params.num_beams
    if params.layout == "hex":
        centers = hex_centers(L, params.spacing)
    else:
        centers = np.column_stack([params.spacing * np.arange(L), np.zeros(L)])
    rng = Xoshiro256(params.seed)
    lo, hi = math.log(params.demand_min_bps), math.log(params.demand_max_bps)
    demands, users = [], []
    for _ in range(L):
        demands.append(math.exp(rng.uniform(lo, hi)))
        users.append(rng.integers(params.users_min, params.users_max))

    model = BeamModel(params.g_peak, params.theta_3db, params.rain_margin_db)
    diff = centers[:, None, :] - centers[None, :, :]
    gain = model.gain(np.sqrt((diff**2).sum(axis=-1)))

    transponders: tuple[Transponder, ...] = ()
    if params.n_transponders:
        n = params.n_transponders
        transponders = tuple(
            Transponder(
                id=f"t{t}",
                beams=tuple(range(t, L, n)),
                p_cap_w=params.p_total_w * params.transponder_p_cap_frac,
                k_cap=(params.transponder_k_cap if params.transponder_k_cap is not None
                       else params.k_carriers * len(range(t, L, n))),
            )
            for t in range(n)
        )
    return Scenario(
        beam_ids=tuple(f"b{l}" for l in range(L)),
        centers=centers,
        demands=np.array(demands),
        users_per_beam=np.array(users),
        gain=gain,
        noise=np.full(L, params.noise_w),
        b_total=params.k_carriers * params.carrier_width_hz,
        k_carriers=params.k_carriers,
        p_total=params.p_total_w,
        transponders=transponders,
        rain_margin_db=params.rain_margin_db,
        beam_model=model,
    )


@dataclass(frozen=True, eq=False)
class UserChannelSet:
    """Per-beam user channel vectors.

    ``channels[l]`` is an ``(N_l, L)`` complex array; row ``n`` is the vector
    h of user ``n`` in beam ``l`` (entry m = response to feed/beam m).
    """

    channels: tuple[np.ndarray, ...]
    positions: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(_frozen(c) for c in self.channels))
        object.__setattr__(self, "positions", tuple(_frozen(p) for p in self.positions))

    @property
    def num_beams(self) -> int:
        return len(self.channels)

    def user(self, beam: int, index: int) -> np.ndarray:
        return self.channels[beam][index]


def generate_user_channels(s: Scenario, seed: int) -> UserChannelSet:
    """Sample user positions and channel vectors for every beam.

    Users fall uniformly in a disk of radius theta_3db/2 around their beam
    center; ``|h[m]|**2`` is the beam-model gain from beam m at that
    position and each entry gets an independent uniform phase. Draw order:
    per beam, per user: radius, angle, then the L phases. Scenarios without
    a beam model (loaded from files that omit it) place users at the beam
    center with ``|h[m]|**2 = gain[l, m]``.
    """
    rng = Xoshiro256(seed)
    L = s.num_beams
    model = s.beam_model
    channels, positions = [], []
    for l in range(L):
        n_users = int(s.users_per_beam[l])
        h = np.empty((n_users, L), dtype=complex)
        pos = np.empty((n_users, 2))
        for n in range(n_users):
            if model is not None:
                radius = 0.5 * model.theta_3db * math.sqrt(rng.random())
                angle = 2.0 * math.pi * rng.random()
                pos[n] = s.centers[l] + radius * np.array([math.cos(angle), math.sin(angle)])
                d = np.sqrt(((s.centers - pos[n]) ** 2).sum(axis=1))
                mag = np.sqrt(model.gain(d))
            else:
                pos[n] = s.centers[l]
                mag = np.sqrt(s.gain[l])
            phases = np.array([2.0 * math.pi * rng.random() for _ in range(L)])
            h[n] = mag * np.exp(1j * phases)
        channels.append(h)
        positions.append(pos)
    return UserChannelSet(tuple(channels), tuple(positions))
