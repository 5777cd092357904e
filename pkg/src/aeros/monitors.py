"""Post-hoc runtime monitors over simulation traces.

Every monitor is a pure function of a Trace (plus, for degradation checks,
two aggregate statistics records). Thresholds are applied exactly as the
requirement text states them: a "< 10%" bound fails at 10%.

Verdict statuses:

* ``pass`` / ``fail``: the measured value was compared with the threshold.
* ``vacuous``: the entity class the requirement talks about is absent, so
  the verdict carries no evidential weight.
* ``inconclusive``: the trace is shorter than the requirement's window.
"""

from __future__ import annotations

import enum
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

from .sim import COMM_RANGE, HIGH_IMPACT_SPEED, ArenaConfig, FaultKind, Floor, Role
from .trace import Trace

STATIONARY_AFTER_S = 10.0
NO_MOVE_LIMIT_S = 100.0
ENCOUNTER_RADIUS = 2.0
ENCOUNTER_WINDOW_S = 1000.0
BASELINE_FLOOR = 1


class Category(str, enum.Enum):
    PERFORMANCE = "performance"
    ADAPTABILITY = "adaptability"
    HUMAN_SAFETY = "human_safety"
    ENVIRONMENT = "environment"


class ReqMode(str, enum.Enum):
    FAULTLESS = "faultless"
    GRACEFUL_DEGRADATION = "graceful_degradation"
    WORST_CASE = "worst_case"


class Status(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    VACUOUS = "vacuous"
    INCONCLUSIVE = "inconclusive"


class CatalogError(ValueError):
    pass


# ------------------------------------------------------------------ catalog


@dataclass(frozen=True)
class Limit:
    quantity: str
    op: str
    value: Any
    unit: str = ""


@dataclass(frozen=True)
class FaultContext:
    kind: FaultKind
    fraction_pct: float


@dataclass(frozen=True)
class RequirementSpec:
    """One machine-checkable requirement.

    ``scope`` says which campaign cells it is evaluated on: ``faultless``,
    ``faulty``, ``all`` trace-bearing cells, or ``config`` (evaluated once
    per environment from configuration alone).
    """

    id: str
    category: Category
    mode: ReqMode
    scope: str
    monitor: str
    limits: tuple[Limit, ...]
    text: str
    params: dict[str, Any] = field(default_factory=dict)
    window_s: float | str | None = None
    fault: FaultContext | None = None

    @property
    def limit(self) -> Limit:
        return self.limits[0]

    def numbers(self) -> list[float]:
        """Every numeric value the checker uses, for auditing against the text."""
        out: list[float] = []
        for lim in self.limits:
            if isinstance(lim.value, (int, float)) and not isinstance(lim.value, bool):
                out.append(float(lim.value))
        for v in self.params.values():
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                out.append(float(v))
        if isinstance(self.window_s, (int, float)):
            out.append(float(self.window_s))
        if self.fault is not None:
            out.append(float(self.fault.fraction_pct))
        return sorted(out)


@dataclass(frozen=True)
class DataRequirement:
    id: str
    kind: str
    text: str


def _spec(rec: dict[str, Any]) -> RequirementSpec:
    fault = rec.get("fault")
    try:
        return RequirementSpec(
            id=rec["id"],
            category=Category(rec["category"]),
            mode=ReqMode(rec["mode"]),
            scope=rec["scope"],
            monitor=rec["monitor"],
            limits=tuple(Limit(**lim) for lim in rec["limits"]),
            text=rec["text"],
            params=dict(rec.get("params") or {}),
            window_s=rec.get("window_s"),
            fault=None if fault is None else FaultContext(FaultKind(fault["kind"]),
                                                          fault["fraction_pct"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CatalogError(f"bad catalog record {rec.get('id', '?')}: {exc}") from exc


def _jsonl(text: str, where: str) -> list[dict[str, Any]]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise CatalogError(f"{where}:{n}: {exc.msg}") from exc
    return out


def _read_data(name: str, path: str | Path | None) -> tuple[str, str]:
    if path is not None:
        return Path(path).read_text(encoding="utf-8"), str(path)
    res = resources.files("aeros") / "data" / name
    return res.read_text(encoding="utf-8"), name


def load_catalog(path: str | Path | None = None) -> tuple[RequirementSpec, ...]:
    """Load the requirement catalog; the shipped one when ``path`` is None."""
    text, where = _read_data("requirements.jsonl", path)
    specs = tuple(_spec(r) for r in _jsonl(text, where))
    ids = [s.id for s in specs]
    dup = [i for i, c in Counter(ids).items() if c > 1]
    if dup:
        raise CatalogError(f"duplicate requirement ids {dup}")
    return specs


def load_data_requirements(path: str | Path | None = None) -> tuple[DataRequirement, ...]:
    text, where = _read_data("data_requirements.jsonl", path)
    return tuple(DataRequirement(r["id"], r["kind"], r["text"]) for r in _jsonl(text, where))


def catalog_digest(path: str | Path | None = None) -> str:
    import hashlib

    text, _ = _read_data("requirements.jsonl", path)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# phrasings that make a bound strict; "at least every T" fails once T elapses
_STRICT_WORDS = ("<", "less than", "at least every")
_NUMBER = re.compile(r"(?<![\w.])\d+(?:\.\d+)?")


def text_numbers(text: str) -> list[float]:
    return sorted(float(m) for m in _NUMBER.findall(text))


def audit(catalog: Iterable[RequirementSpec], transcription: str | Path) -> list[str]:
    """Compare catalog numbers with a hand transcription of the requirement text.

    The transcription holds ``<id>\\t<text>`` lines. Returns a list of
    discrepancies; empty means the catalog agrees exactly.
    """
    expected: dict[str, str] = {}
    for line in Path(transcription).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        rid, _, text = line.partition("\t")
        expected[rid.strip()] = text.strip()
    found = {s.id: s for s in catalog}
    problems = []
    for rid in sorted(set(expected) - set(found)):
        problems.append(f"{rid}: missing from catalog")
    for rid in sorted(set(found) - set(expected)):
        problems.append(f"{rid}: not in transcription")
    for rid in sorted(set(expected) & set(found)):
        spec, text = found[rid], expected[rid]
        if spec.text != text:
            problems.append(f"{rid}: text differs from transcription")
        want, got = text_numbers(text), spec.numbers()
        if want != got:
            problems.append(f"{rid}: numbers {got} != transcribed {want}")
        for lim in spec.limits:
            if lim.op == "<" and not any(w in text for w in _STRICT_WORDS):
                problems.append(f"{rid}: strict bound on {lim.quantity} not in text")
    return problems


# ------------------------------------------------------------------ verdicts


@dataclass(frozen=True)
class EvidenceRef:
    """A replayable pointer into a trace: what was seen, where, and when."""

    tick: int
    kind: str
    entities: tuple[str, ...] = ()
    value: float = 0.0

    def __str__(self) -> str:
        ents = ",".join(self.entities)
        return f"t{self.tick}:{self.kind}:{ents}={self.value:g}"


@dataclass(frozen=True)
class MonitorVerdict:
    requirement_id: str
    status: Status
    measured: float
    threshold: float | tuple[float, float]
    comparison: str
    margin: float
    evidence: tuple[EvidenceRef, ...] = ()
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status in (Status.PASS, Status.VACUOUS)

    @property
    def failed(self) -> bool:
        return self.status is Status.FAIL

    def to_record(self) -> dict[str, Any]:
        thr = list(self.threshold) if isinstance(self.threshold, tuple) else self.threshold
        return {
            "requirement": self.requirement_id,
            "status": self.status.value,
            "measured": self.measured,
            "threshold": thr,
            "comparison": self.comparison,
            "margin": self.margin,
            "evidence": [str(e) for e in self.evidence],
            "note": self.note,
        }


def compare(measured: float, op: str, threshold: Any) -> tuple[bool, float]:
    """(satisfied, margin); a positive margin means room to spare."""
    if op == "<":
        return measured < threshold, threshold - measured
    if op == "<=":
        return measured <= threshold, threshold - measured
    if op == "in":
        lo, hi = threshold
        return lo <= measured <= hi, min(measured - lo, hi - measured)
    if op == "==":
        return measured == threshold, 0.0 if measured == threshold else -1.0
    raise ValueError(f"unknown comparison {op!r}")


def _verdict(rid: str, measured: float, op: str, threshold: Any,
             evidence: Iterable[EvidenceRef] = (), note: str = "",
             vacuous: bool = False) -> MonitorVerdict:
    ok, margin = compare(measured, op, threshold)
    if vacuous:
        status = Status.VACUOUS
    else:
        status = Status.PASS if ok else Status.FAIL
    return MonitorVerdict(rid, status, measured, threshold, op, margin,
                          tuple(evidence), note)


def _inconclusive(rid: str, op: str, threshold: Any, note: str) -> MonitorVerdict:
    return MonitorVerdict(rid, Status.INCONCLUSIVE, math.nan, threshold, op, math.nan, (), note)


def _window_ticks(trace: Trace, window_s: float) -> int:
    return max(1, int(round(window_s / trace.dt)))


def _windows(trace: Trace, window_s: float) -> list[tuple[int, int]]:
    """Tiled [start, end) frame-index ranges; a trailing partial window is kept."""
    w = _window_ticks(trace, window_s)
    return [(s, min(s + w, trace.n_ticks)) for s in range(0, trace.n_ticks, w)]


def _day_s(trace: Trace) -> float:
    return float(trace.meta.get("day_s") or trace.duration_s or 1.0)


def _windowed_count(rid: str, trace: Trace, ticks: list[tuple[int, EvidenceRef]],
                    window_s: float, limit: float, label: str) -> MonitorVerdict:
    """Largest per-window count, compared with a strict ``<`` bound.

    A trace shorter than one window is inconclusive unless it already
    exceeds the bound (a partial count can only grow).
    """
    first = trace.frames[0].tick if trace.frames else 1
    w = _window_ticks(trace, window_s)
    per: dict[int, list[EvidenceRef]] = {}
    for tick, ev in ticks:
        per.setdefault((tick - first) // w, []).append(ev)
    worst = max(per.values(), key=len) if per else []
    full = trace.n_ticks // w
    note = f"{label} per {window_s:g} s window, tiled; {full} full window(s)"
    if full == 0 and len(worst) < limit:
        return _inconclusive(rid, "<", limit, note + "; trace shorter than window")
    return _verdict(rid, float(len(worst)), "<", limit, worst, note)


# ------------------------------------------------------------- collisions


def high_impact_events(trace: Trace, speed_threshold: float = HIGH_IMPACT_SPEED):
    return [e for e in trace.events
            if e.kind == "collision" and e.payload[0] > speed_threshold]


def monitor_collisions(trace: Trace, speed_threshold: float = HIGH_IMPACT_SPEED,
                       window_s: float | None = None, limit: float = 1,
                       requirement_id: str = "RQ1.1") -> MonitorVerdict:
    """Count collisions faster than ``speed_threshold`` per window.

    ``limit`` is 1 for the faultless bound and 2 for the faulty one.
    """
    window = window_s if window_s is not None else _day_s(trace)
    hits = [(e.tick, EvidenceRef(e.tick, "collision", tuple(e.entities), e.payload[0]))
            for e in high_impact_events(trace, speed_threshold)]
    return _windowed_count(requirement_id, trace, hits, window, limit,
                           f"collisions faster than {speed_threshold:g} m/s")


# ------------------------------------------------------------- stationary


def _in_delivery(arena: ArenaConfig, x: float, y: float) -> bool:
    return arena.in_delivery(x, y)


@dataclass(frozen=True)
class StationaryProfile:
    """Per-tick stationary counts and the longest still intervals."""

    counts: tuple[int, ...]
    n_agents: int
    peak_tick: int
    peak_ids: tuple[int, ...]
    longest_s: float
    longest: EvidenceRef | None
    agent_seconds: float


def stationary_profile(trace: Trace, after_s: float = STATIONARY_AFTER_S) -> StationaryProfile:
    """Scan the trace once.

    An agent is stationary at a tick when it has not moved (displacement
    above the movement epsilon) for more than ``after_s`` and stands outside
    the delivery site. The still-interval length counts consecutive
    unmoved ticks outside the delivery site.
    """
    after = int(round(after_s / trace.dt))
    still: dict[int, int] = {}
    counts = []
    peak, peak_tick, peak_ids = -1, 0, ()
    longest, longest_ref = 0, None
    total = 0
    for fr in trace.frames:
        now = []
        for a in fr.agents:
            if a.moved or _in_delivery(trace.arena, a.x, a.y):
                still[a.id] = 0
                continue
            c = still.get(a.id, 0) + 1
            still[a.id] = c
            if c > longest:
                longest = c
                longest_ref = EvidenceRef(fr.tick, "no_move", (f"a{a.id}",), c * trace.dt)
            if c > after:
                now.append(a.id)
        counts.append(len(now))
        total += len(now)
        if len(now) > peak:
            peak, peak_tick, peak_ids = len(now), fr.tick, tuple(now)
    n = len(trace.frames[0].agents) if trace.frames else 0
    return StationaryProfile(tuple(counts), n, peak_tick, peak_ids,
                             longest * trace.dt, longest_ref, total * trace.dt)


def monitor_stationary(trace: Trace) -> dict[str, MonitorVerdict]:
    """RQ2.1 (< 10% stationary), RQ2.2 (move every 100 s), RQ2.7 (< 20%)."""
    prof = stationary_profile(trace)
    out: dict[str, MonitorVerdict] = {}
    if prof.n_agents == 0:
        for rid, op, thr in (("RQ2.1", "<", 10.0), ("RQ2.2", "<", NO_MOVE_LIMIT_S),
                             ("RQ2.7", "<", 20.0)):
            out[rid] = _verdict(rid, 0.0, op, thr, note="no agents", vacuous=True)
        return out
    peak = max(prof.counts, default=0)
    evidence = tuple(EvidenceRef(prof.peak_tick, "stationary", (f"a{i}",), STATIONARY_AFTER_S)
                     for i in prof.peak_ids)
    # exact integer comparison: count/n < pct/100  <=>  100*count < pct*n
    for rid, pct in (("RQ2.1", 10), ("RQ2.7", 20)):
        frac = 100.0 * peak / prof.n_agents
        ok = 100 * peak < pct * prof.n_agents
        out[rid] = MonitorVerdict(
            rid, Status.PASS if ok else Status.FAIL, frac, float(pct), "<", pct - frac,
            () if ok else evidence,
            f"peak {peak}/{prof.n_agents} agents stationary at tick {prof.peak_tick}")
    # agent_velocity = 0 and t_counter >= 100: the interval must stay below 100 s
    limit_ticks = int(round(NO_MOVE_LIMIT_S / trace.dt))
    ok = int(round(prof.longest_s / trace.dt)) < limit_ticks
    out["RQ2.2"] = MonitorVerdict(
        "RQ2.2", Status.PASS if ok else Status.FAIL, prof.longest_s, NO_MOVE_LIMIT_S, "<",
        NO_MOVE_LIMIT_S - prof.longest_s, () if ok else (prof.longest,),
        "longest unmoved interval outside the delivery site")
    return out


# ------------------------------------------------------------- humans


def _humans(trace: Trace, role: Role | None = None):
    if not trace.frames:
        return ()
    return tuple(h for h in trace.frames[0].humans if role is None or h.role is role)


def encounter_onsets(trace: Trace, radius: float = ENCOUNTER_RADIUS) -> list[EvidenceRef]:
    """Start of each maximal episode of an agent within ``radius`` of a human."""
    inside: set[tuple[int, int]] = set()
    out = []
    r2 = radius * radius
    for fr in trace.frames:
        now = set()
        for a in fr.agents:
            for h in fr.humans:
                if (a.x - h.x) ** 2 + (a.y - h.y) ** 2 <= r2:
                    now.add((a.id, h.id))
        for a_id, h_id in sorted(now - inside):
            out.append(EvidenceRef(fr.tick, "encounter", (f"a{a_id}", f"h{h_id}"), radius))
        inside = now
    return out


def _speed_near(trace: Trace, rid: str, role: Role, radius: float, cap: float) -> MonitorVerdict:
    people = _humans(trace, role)
    if not people or not trace.frames or not trace.frames[0].agents:
        return _verdict(rid, 0.0, "<", cap, note=f"no {role.value} humans in scenario",
                        vacuous=True)
    r2 = radius * radius
    worst = 0.0
    evidence = []
    for fr in trace.frames:
        for a in fr.agents:
            for h in fr.humans:
                if h.role is not role:
                    continue
                if (a.x - h.x) ** 2 + (a.y - h.y) ** 2 <= r2:
                    worst = max(worst, a.speed)
                    if not a.speed < cap:
                        evidence.append(EvidenceRef(fr.tick, "speed", (f"a{a.id}", f"h{h.id}"),
                                                    a.speed))
    return _verdict(rid, worst, "<", cap, evidence[:50],
                    f"max speed within {radius:g} m of a {role.value} human; "
                    f"{len(evidence)} violating samples")


def monitor_human_proximity(trace: Trace, faulty: bool | None = None) -> dict[str, MonitorVerdict]:
    """RQ4.1/RQ4.2 speed caps and RQ4.3/RQ4.10 encounter counts.

    ``faulty`` selects which encounter bound applies; by default both are
    evaluated.
    """
    out = {
        "RQ4.1": _speed_near(trace, "RQ4.1", Role.TRAINED, 2.0, 0.5),
        "RQ4.2": _speed_near(trace, "RQ4.2", Role.ATTENDEE, 3.0, 0.25),
    }
    onsets = [(e.tick, e) for e in encounter_onsets(trace)]
    for rid, limit, want in (("RQ4.3", 10, False), ("RQ4.10", 20, True)):
        if faulty is not None and faulty is not want:
            continue
        if not _humans(trace):
            out[rid] = _verdict(rid, 0.0, "<", float(limit), note="no humans in scenario",
                                vacuous=True)
            continue
        out[rid] = _windowed_count(rid, trace, onsets, ENCOUNTER_WINDOW_S, limit,
                                   "human encounter episodes within 2 m")
    return out


# ------------------------------------------------------------- interaction


def monitor_interaction_caps(trace: Trace) -> dict[str, MonitorVerdict]:
    """RQ4.4 intervention requesters, RQ4.5 supervision ratio, RQ4.6/4.7 attendee load."""
    out: dict[str, MonitorVerdict] = {}
    trained = _humans(trace, Role.TRAINED)
    attendees = _humans(trace, Role.ATTENDEE)
    n_agents = len(trace.frames[0].agents) if trace.frames else 0

    if not trained:
        out["RQ4.4"] = _verdict("RQ4.4", 0.0, "<", 5.0, note="no trained humans", vacuous=True)
    else:
        peak, ev = 0, []
        for fr in trace.frames:
            ids = [a.id for a in fr.agents if a.request_intervention]
            if len(ids) > peak:
                peak = len(ids)
                ev = [EvidenceRef(fr.tick, "intervention", tuple(f"a{i}" for i in ids),
                                  float(len(ids)))]
        out["RQ4.4"] = _verdict("RQ4.4", float(peak), "<", 5.0, ev if peak >= 5 else (),
                                "peak simultaneous intervention requesters")

    if n_agents == 0:
        out["RQ4.5"] = _verdict("RQ4.5", 0.0, "in", (5.0, 20.0), note="no agents", vacuous=True)
    elif not trained:
        out["RQ4.5"] = MonitorVerdict("RQ4.5", Status.FAIL, math.inf, (5.0, 20.0), "in",
                                      -math.inf, (EvidenceRef(0, "config", (), float(n_agents)),),
                                      f"{n_agents} agents but no trained human to monitor them")
    else:
        ratio = n_agents / len(trained)
        v = _verdict("RQ4.5", ratio, "in", (5.0, 20.0), note="agents per trained human")
        if v.failed:
            v = MonitorVerdict(v.requirement_id, v.status, v.measured, v.threshold, v.comparison,
                               v.margin, (EvidenceRef(0, "config", (), ratio),), v.note)
        out["RQ4.5"] = v

    if not attendees:
        out["RQ4.6"] = _verdict("RQ4.6", 0.0, "<=", 1.0, note="no attendees", vacuous=True)
        out["RQ4.7"] = _verdict("RQ4.7", 0.0, "<", 5.0, note="no attendees", vacuous=True)
        return out
    peak, ev = 0, []
    for fr in trace.frames:
        ids = [a.id for a in fr.agents if a.request_input]
        if len(ids) > peak:
            peak = len(ids)
            ev = [EvidenceRef(fr.tick, "input_request", tuple(f"a{i}" for i in ids),
                              float(len(ids)))]
    out["RQ4.6"] = _verdict("RQ4.6", float(peak), "<=", 1.0, ev if peak > 1 else (),
                            "peak simultaneous attendee-input requesters")
    peak, ev = 0, []
    r2 = COMM_RANGE * COMM_RANGE
    for fr in trace.frames:
        for h in fr.humans:
            if h.role is not Role.ATTENDEE:
                continue
            ids = [a.id for a in fr.agents
                   if a.request_input and not a.comm_fault
                   and (a.x - h.x) ** 2 + (a.y - h.y) ** 2 <= r2]
            if len(ids) > peak:
                peak = len(ids)
                ev = [EvidenceRef(fr.tick, "informing", tuple(f"a{i}" for i in ids) + (f"h{h.id}",),
                                  float(len(ids)))]
    out["RQ4.7"] = _verdict("RQ4.7", float(peak), "<", 5.0, ev if peak >= 5 else (),
                            "peak agents sending to one attendee within radio range")
    return out


# ------------------------------------------------------------- environment


def density(n_agents: int, n_boxes: int, arena: ArenaConfig) -> float:
    return (n_agents + n_boxes) / arena.area


def monitor_environment(trace: Trace | None, arena: ArenaConfig,
                        n_agents: int | None = None, n_boxes: int | None = None
                        ) -> dict[str, MonitorVerdict]:
    """RQ3.1 density over the run; RQ3.2 to RQ3.5 are envelope checks."""
    if trace is not None and trace.frames:
        n_agents = len(trace.frames[0].agents) if n_agents is None else n_agents
        n_boxes = trace.n_boxes if n_boxes is None else n_boxes
    n_agents = n_agents or 0
    n_boxes = n_boxes or 0
    p_o = density(n_agents, n_boxes, arena)
    cfg = (EvidenceRef(0, "config", (), 0.0),)
    out = {
        "RQ3.1": _verdict("RQ3.1", p_o, "in", (0.0, 4.0), note="(boxes + agents) per m^2"),
        "RQ3.2": _verdict("RQ3.2", arena.incline_deg, "in", (0.0, 20.0), note="floor incline, degrees"),
        "RQ3.3": _verdict("RQ3.3", 1.0 if arena.floor is Floor.DRY else 0.0, "==", 1.0,
                          note=f"floor {arena.floor.value}"),
        "RQ3.4": _verdict("RQ3.4", arena.max_step_height_cm, "<=", 0.5, note="largest step, cm"),
        "RQ3.5": _verdict("RQ3.5", 1.0 if arena.humans_have_locators else 0.0, "==", 1.0,
                          note="human locators"),
    }
    return {k: (v if v.passed else MonitorVerdict(v.requirement_id, v.status, v.measured,
                                                   v.threshold, v.comparison, v.margin, cfg, v.note))
            for k, v in out.items()}


def monitor_weight_envelope(agent_mass_kg: float, accel_max: float,
                            box_weights: Iterable[float]) -> dict[str, MonitorVerdict]:
    """RQ1.5 (mass < 3 kg, acceleration cap < 4) and RQ1.6 (boxes < 2 kg)."""
    cfg = (EvidenceRef(0, "config", (), 0.0),)
    mass_ok = agent_mass_kg < 3.0
    acc_ok = accel_max < 4.0
    worst = min(3.0 - agent_mass_kg, 4.0 - accel_max)
    rq15 = MonitorVerdict(
        "RQ1.5", Status.PASS if mass_ok and acc_ok else Status.FAIL,
        agent_mass_kg, 3.0, "<", worst, () if mass_ok and acc_ok else cfg,
        f"agent mass {agent_mass_kg:g} kg; acceleration cap {accel_max:g} m/s^2 (bound 4)",
    )
    weights = list(box_weights)
    if not weights:
        rq16 = _verdict("RQ1.6", 0.0, "<", 2.0, note="no boxes", vacuous=True)
    else:
        heavy = max(weights)
        rq16 = _verdict("RQ1.6", heavy, "<", 2.0,
                        () if heavy < 2.0 else tuple(EvidenceRef(0, "box", (f"b{i}",), w)
                                                     for i, w in enumerate(weights) if not w < 2.0),
                        "heaviest box, kg")
    return {"RQ1.5": rq15, "RQ1.6": rq16}


def weight_envelope(trace: Trace) -> dict[str, MonitorVerdict]:
    return monitor_weight_envelope(float(trace.meta.get("agent_mass_kg", 0.0)),
                                   float(trace.meta.get("accel_max", 0.0)), trace.box_weights)


# ------------------------------------------------------------- degradation


@dataclass(frozen=True)
class AggregateStats:
    """Run-level statistics compared by graceful-degradation checks."""

    duration_s: float
    dt: float
    high_impact_collisions: int = 0
    stationary_agents: int = 0
    stationary_time_s: float = 0.0
    human_encounters: int = 0
    environment: str = ""
    layout_seed: int | None = None
    stationary_ticks: int = 0

    def stat(self, name: str) -> float:
        return getattr(self, name)

    def exact(self, name: str) -> Fraction:
        # time is compared in whole ticks; both runs share dt, so ratios are unchanged
        if name == "stationary_time_s":
            return Fraction(self.stationary_ticks)
        return _exact(self.stat(name))


def _exact(x: float | int | Fraction) -> Fraction:
    """Exact value as written: 0.1 means 1/10, not its binary approximation."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(repr(float(x)))


def aggregate_stats(trace: Trace, environment: str = "",
                    layout_seed: int | None = None) -> AggregateStats:
    prof = stationary_profile(trace)
    return AggregateStats(
        duration_s=trace.duration_s,
        dt=trace.dt,
        high_impact_collisions=len(high_impact_events(trace)),
        stationary_agents=max(prof.counts, default=0),
        stationary_time_s=prof.agent_seconds,
        human_encounters=len(encounter_onsets(trace)),
        environment=environment,
        layout_seed=layout_seed,
        stationary_ticks=sum(prof.counts),
    )


class DegradationError(ValueError):
    pass


def degradation_check(baseline: AggregateStats | float, faulty: AggregateStats | float,
                      max_increase: float, stat: str = "human_encounters",
                      requirement_id: str = "RQ4.8",
                      baseline_floor: float = BASELINE_FLOOR) -> MonitorVerdict:
    """Relative increase (faulty - baseline) / max(baseline, floor), in percent.

    Passes iff the increase is strictly below ``max_increase`` percent.
    Stats records must cover the same window with the same time step and,
    when both carry them, the same environment and layout seed.
    """
    if isinstance(baseline, AggregateStats) and isinstance(faulty, AggregateStats):
        if baseline.duration_s != faulty.duration_s or baseline.dt != faulty.dt:
            raise DegradationError("baseline and faulty runs cover different windows")
        if baseline.environment != faulty.environment:
            raise DegradationError("baseline and faulty runs use different environments")
        if (baseline.layout_seed is not None and faulty.layout_seed is not None
                and baseline.layout_seed != faulty.layout_seed):
            raise DegradationError("baseline and faulty runs use different layout seeds")
        b, f = baseline.stat(stat), faulty.stat(stat)
        eb, ef = baseline.exact(stat), faulty.exact(stat)
        floor = _exact(baseline_floor)
        if stat == "stationary_time_s":
            floor = floor / _exact(baseline.dt)
    elif isinstance(baseline, AggregateStats) or isinstance(faulty, AggregateStats):
        raise DegradationError("cannot pair aggregate stats with a bare number")
    else:
        b, f = baseline, faulty
        eb, ef, floor = _exact(b), _exact(f), _exact(baseline_floor)
    denom = max(eb, floor)
    inc = (ef - eb) * 100 / denom
    ok = inc < _exact(max_increase)
    measured = float(inc)
    status = Status.PASS if ok else Status.FAIL
    ev = () if ok else (EvidenceRef(0, "increase", (stat,), measured),)
    return MonitorVerdict(requirement_id, status, measured, float(max_increase), "<",
                          float(_exact(max_increase) - inc), ev,
                          f"{stat}: baseline {b:g}, faulty {f:g}, floor {baseline_floor:g}")


# ------------------------------------------------------------- dispatch


def _fault_kinds(trace: Trace) -> set[str]:
    return {k for k, ids in (trace.meta.get("faulted") or {}).items() if ids}


def evaluate_trace(catalog: Iterable[RequirementSpec], trace: Trace,
                   faulty: bool | None = None,
                   include_config: bool = True) -> list[MonitorVerdict]:
    """Evaluate every single-trace requirement whose scope fits this run.

    ``faulty`` defaults to whether any fault was injected. Degradation
    requirements need a baseline and are handled by the campaign.
    """
    if faulty is None:
        faulty = bool(_fault_kinds(trace))
    specs = {s.id: s for s in catalog}
    results: dict[str, MonitorVerdict] = {}
    wanted = {rid for rid, s in specs.items()
              if s.monitor != "degradation"
              and (s.scope == "all" or (s.scope == "config" and include_config)
                   or (s.scope == "faultless" and not faulty)
                   or (s.scope == "faulty" and faulty))}
    kinds = {specs[r].monitor for r in wanted}
    if "collisions" in kinds:
        for rid in ("RQ1.1", "RQ1.4"):
            if rid in wanted:
                s = specs[rid]
                win = s.window_s if isinstance(s.window_s, (int, float)) else None
                results[rid] = monitor_collisions(
                    trace, float(s.params.get("speed_threshold_mps", HIGH_IMPACT_SPEED)),
                    win, float(s.limit.value), rid)
    if "stationary" in kinds:
        results.update(monitor_stationary(trace))
    if "human_proximity" in kinds:
        results.update(monitor_human_proximity(trace))
    if "interaction_caps" in kinds:
        results.update(monitor_interaction_caps(trace))
    if "environment" in kinds:
        results.update(monitor_environment(trace, trace.arena))
    if "weight_envelope" in kinds:
        results.update(weight_envelope(trace))
    return [results[r] for r in sorted(wanted, key=requirement_sort_key) if r in results]


def requirement_sort_key(rid: str) -> tuple[int, ...]:
    return tuple(int(p) for p in re.findall(r"\d+", rid))


# ------------------------------------------------------------- failure events


class Level(str, enum.Enum):
    AGENT = "agent"
    NEIGHBOURHOOD = "neighbourhood"
    SWARM = "swarm"


LEVEL_RANK = {Level.AGENT: 0, Level.NEIGHBOURHOOD: 1, Level.SWARM: 2}


@dataclass(frozen=True)
class FailureEvent:
    id: str
    level: Level
    tick: int
    description: str
    causal_parent: str | None = None


def derive_failure_events(trace: Trace) -> list[FailureEvent]:
    """Lift trace facts into an agent -> neighbourhood -> swarm failure chain.

    Agent level: injected faults and agents that stop moving. Neighbourhood
    level: two or more stationary agents within radio range of each other.
    Swarm level: a stationary-fraction breach (RQ2.1), parented by the
    neighbourhood congestion that preceded it.
    """
    events: list[FailureEvent] = []
    for e in trace.events:
        if e.kind == "fault":
            kind = "communication" if e.payload and e.payload[0] == 1.0 else "motor"
            events.append(FailureEvent(f"F{len(events)}", Level.AGENT, e.tick,
                                       f"{kind} fault on {e.entities[0]}"))
    after = int(round(STATIONARY_AFTER_S / trace.dt))
    still: dict[int, int] = {}
    first_stuck: dict[int, str] = {}
    congestion: str | None = None
    r2 = COMM_RANGE * COMM_RANGE
    for fr in trace.frames:
        stuck = []
        for a in fr.agents:
            if a.moved or trace.arena.in_delivery(a.x, a.y):
                still[a.id] = 0
                continue
            still[a.id] = still.get(a.id, 0) + 1
            if still[a.id] > after:
                stuck.append(a)
                if a.id not in first_stuck:
                    parent = next((ev.id for ev in reversed(events)
                                   if ev.level is Level.AGENT and ev.description.endswith(f"a{a.id}")),
                                  None)
                    eid = f"F{len(events)}"
                    events.append(FailureEvent(eid, Level.AGENT, fr.tick,
                                               f"a{a.id} stationary outside the delivery site",
                                               parent))
                    first_stuck[a.id] = eid
        if congestion is None and len(stuck) >= 2:
            a, b = stuck[0], stuck[1]
            if (a.x - b.x) ** 2 + (a.y - b.y) ** 2 <= r2:
                congestion = f"F{len(events)}"
                events.append(FailureEvent(congestion, Level.NEIGHBOURHOOD, fr.tick,
                                           f"local congestion: a{a.id} and a{b.id} stationary",
                                           first_stuck[a.id]))
        n = len(fr.agents)
        if congestion is not None and n and 100 * len(stuck) >= 10 * n:
            events.append(FailureEvent(f"F{len(events)}", Level.SWARM, fr.tick,
                                       f"{len(stuck)}/{n} agents stationary: critical paths blocked",
                                       congestion))
            break
    return events
