"""Simulation traces: in-memory frames plus the line-delimited file format.

File layout (UTF-8, ``\\n`` line ends)::

    #aeros-trace<TAB>1
    #meta<TAB>{json header}
    <tick>\\t<kind>\\t<entity ids, comma separated>\\t<numeric payload, comma separated>

Kinds are ``agent`` (one per agent per tick), ``human`` (one per human per
tick), and event kinds (``collision``, ``pickup``, ``release``,
``delivery``, ``fault``, ``estop``). Floats are written with six decimals
so the text is identical on every IEEE-754 platform.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, TextIO

from .sim import MODE_INDEX, ArenaConfig, Event, Floor, Mode, Rect, Role

FORMAT_VERSION = 1
MODES = tuple(Mode)


@dataclass(frozen=True, slots=True)
class AgentSample:
    id: int
    x: float
    y: float
    speed: float
    heading: float = 0.0
    mode: Mode = Mode.EXPLORE
    carried: int = -1
    moved: bool = True
    request_intervention: bool = False
    request_input: bool = False
    comm_fault: bool = False
    motor_fault: bool = False


@dataclass(frozen=True, slots=True)
class HumanSample:
    id: int
    role: Role
    x: float
    y: float


@dataclass(frozen=True, slots=True)
class Frame:
    tick: int
    agents: tuple[AgentSample, ...]
    humans: tuple[HumanSample, ...] = ()


@dataclass
class Trace:
    """Everything monitors may look at after a run.

    ``frames[k]`` is the state after tick ``frames[k].tick``; a trace of N
    ticks covers N * dt seconds.
    """

    dt: float
    arena: ArenaConfig
    frames: list[Frame] = field(default_factory=list)
    events: list[Any] = field(default_factory=list)
    n_boxes: int = 0
    box_weights: tuple[float, ...] = ()
    box_feet: tuple[tuple[float, float], ...] = ()
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n_ticks(self) -> int:
        return len(self.frames)

    @property
    def duration_s(self) -> float:
        return self.n_ticks * self.dt

    @property
    def agent_ids(self) -> tuple[int, ...]:
        return tuple(a.id for a in self.frames[0].agents) if self.frames else ()

    @property
    def roles(self) -> set[Role]:
        return {h.role for f in self.frames[:1] for h in f.humans}

    def events_of(self, kind: str) -> list[Any]:
        return [e for e in self.events if e.kind == kind]


def _f(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _arena_record(a: ArenaConfig) -> dict[str, Any]:
    return {
        "width": a.width, "height": a.height, "incline_deg": a.incline_deg,
        "floor": a.floor.value, "max_step_height_cm": a.max_step_height_cm,
        "delivery_zones": [[z.x0, z.y0, z.x1, z.y1] for z in a.delivery_zones],
        "deposit_zones": [[z.x0, z.y0, z.x1, z.y1] for z in a.deposit_zones],
        "humans_have_locators": a.humans_have_locators,
    }


def _arena_from(rec: dict[str, Any]) -> ArenaConfig:
    return ArenaConfig(
        rec["width"], rec["height"], rec["incline_deg"], Floor(rec["floor"]),
        rec["max_step_height_cm"],
        tuple(Rect(*z) for z in rec["delivery_zones"]),
        tuple(Rect(*z) for z in rec["deposit_zones"]),
        rec["humans_have_locators"],
    )


def agent_line(tick: int, a: AgentSample) -> str:
    return (f"{tick}\tagent\ta{a.id}\t{_f(a.x)},{_f(a.y)},{_f(a.speed)},{_f(a.heading)},"
            f"{MODE_INDEX[a.mode]},{a.carried},{int(a.moved)},{int(a.request_intervention)},"
            f"{int(a.request_input)},{int(a.comm_fault)},{int(a.motor_fault)}")


def event_line(e: Any) -> str:
    return f"{e.tick}\t{e.kind}\t{','.join(e.entities)}\t{','.join(_f(v) for v in e.payload)}"


class TraceWriter:
    """Streams frames and events to a text sink and hashes what it writes."""

    def __init__(self, sink: TextIO, header: dict[str, Any]):
        self._sink = sink
        self._hash = hashlib.sha256()
        self._emit(f"#aeros-trace\t{FORMAT_VERSION}")
        self._emit("#meta\t" + json.dumps(header, sort_keys=True, separators=(",", ":")))

    def _emit(self, line: str) -> None:
        data = line + "\n"
        self._hash.update(data.encode("utf-8"))
        self._sink.write(data)

    def frame(self, frame: Frame) -> None:
        t = frame.tick
        for a in frame.agents:
            self._emit(agent_line(t, a))
        for h in frame.humans:
            self._emit(f"{t}\thuman\th{h.id}\t{_f(h.x)},{_f(h.y)},{1 if h.role is Role.TRAINED else 0}")

    def events(self, events: Iterable[Any]) -> None:
        for e in events:
            self._emit(event_line(e))

    @property
    def digest(self) -> str:
        return self._hash.hexdigest()


def header_for(trace: Trace) -> dict[str, Any]:
    return {
        "dt": trace.dt,
        "arena": _arena_record(trace.arena),
        "n_boxes": trace.n_boxes,
        "box_weights": list(trace.box_weights),
        "box_feet": [list(f) for f in trace.box_feet],
        "meta": trace.meta,
    }


def dumps(trace: Trace) -> str:
    buf = io.StringIO()
    w = TraceWriter(buf, header_for(trace))
    by_tick: dict[int, list[Any]] = {}
    for e in trace.events:
        by_tick.setdefault(e.tick, []).append(e)
    for fr in trace.frames:
        w.frame(fr)
        w.events(by_tick.pop(fr.tick, []))
    for t in sorted(by_tick):
        w.events(by_tick[t])
    return buf.getvalue()


def digest(trace: Trace) -> str:
    return hashlib.sha256(dumps(trace).encode("utf-8")).hexdigest()


def write(trace: Trace, path: str | Path) -> str:
    text = dumps(trace)
    Path(path).write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class TraceFormatError(ValueError):
    pass


def loads(text: str) -> Trace:
    from .sim import CollisionEvent

    lines = text.splitlines()
    if not lines or not lines[0].startswith("#aeros-trace"):
        raise TraceFormatError("missing trace signature line")
    header: dict[str, Any] | None = None
    frames: dict[int, tuple[list[AgentSample], list[HumanSample]]] = {}
    events: list[Any] = []
    for n, line in enumerate(lines[1:], 2):
        if line.startswith("#meta\t"):
            header = json.loads(line[6:])
            continue
        if line.startswith("#") or not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise TraceFormatError(f"line {n}: expected 4 tab-separated fields")
        tick = int(parts[0])
        kind = parts[1]
        ids = tuple(parts[2].split(",")) if parts[2] else ()
        nums = [float(v) for v in parts[3].split(",")] if parts[3] else []
        if kind == "agent":
            ag, _ = frames.setdefault(tick, ([], []))
            ag.append(AgentSample(
                int(ids[0][1:]), nums[0], nums[1], nums[2], nums[3], MODES[int(nums[4])],
                int(nums[5]), bool(nums[6]), bool(nums[7]), bool(nums[8]), bool(nums[9]),
                bool(nums[10]),
            ))
        elif kind == "human":
            _, hu = frames.setdefault(tick, ([], []))
            hu.append(HumanSample(int(ids[0][1:]), Role.TRAINED if nums[2] else Role.ATTENDEE,
                                  nums[0], nums[1]))
        elif kind == "collision":
            events.append(CollisionEvent(tick, (ids[0], ids[1]), nums[0],
                                         "high" if nums[1] else "low"))
        else:
            events.append(Event(tick, kind, ids, tuple(nums)))
    if header is None:
        raise TraceFormatError("missing #meta header")
    return Trace(
        dt=header["dt"],
        arena=_arena_from(header["arena"]),
        frames=[Frame(t, tuple(a), tuple(h)) for t, (a, h) in sorted(frames.items())],
        events=events,
        n_boxes=header["n_boxes"],
        box_weights=tuple(header["box_weights"]),
        box_feet=tuple(tuple(f) for f in header["box_feet"]),
        meta=header["meta"],
    )


def read(path: str | Path) -> Trace:
    return loads(Path(path).read_text(encoding="utf-8"))
