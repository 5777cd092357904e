"""Hand-built traces and the requirement fixture table used across tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from aeros.monitors import (
    Status,
    aggregate_stats,
    degradation_check,
    evaluate_trace,
    load_catalog,
)
from aeros.sim import ArenaConfig, CollisionEvent, Floor, Rect, Role, classify
from aeros.trace import AgentSample, Frame, HumanSample, Trace

DT = 0.1
ARENA = ArenaConfig(4.0, 4.0, 0.0, Floor.DRY, 0.2, (Rect(3, 0, 4, 1),), (Rect(0, 3, 1, 4),), True)
TRAINED = HumanSample(0, Role.TRAINED, 0.0, 0.0)
ATTENDEE = HumanSample(1, Role.ATTENDEE, 4.0, 4.0)
CATALOG = {s.id: s for s in load_catalog()}


def agent(i: int, x: float = 2.0, y: float = 2.0, speed: float = 0.2, moved: bool = True,
          **kw) -> AgentSample:
    return AgentSample(i, x, y, speed, moved=moved, **kw)


def spread(n: int) -> list[AgentSample]:
    """n moving agents on a line through the middle of the arena, clear of humans."""
    return [agent(i, 1.5 + 0.1 * (i % 10), 1.5 + 0.1 * (i // 10)) for i in range(n)]


def build(frames: list[list[AgentSample]], humans=(TRAINED, ATTENDEE), events=(),
          arena: ArenaConfig = ARENA, n_boxes: int = 1, box_weights=(1.5,),
          day_s: float | None = None, mass: float = 2.9, accel: float = 3.5) -> Trace:
    return Trace(
        dt=DT, arena=arena,
        frames=[Frame(t + 1, tuple(ags), tuple(humans)) for t, ags in enumerate(frames)],
        events=list(events), n_boxes=n_boxes, box_weights=tuple(box_weights),
        meta={"day_s": day_s if day_s is not None else len(frames) * DT,
              "agent_mass_kg": mass, "accel_max": accel},
    )


def constant(ticks: int, agents: list[AgentSample], **kw) -> Trace:
    return build([agents] * ticks, **kw)


def collisions(ticks: int, speeds_at: dict[int, float], **kw) -> Trace:
    events = [CollisionEvent(t, ("a0", "a1"), v, classify(v)) for t, v in speeds_at.items()]
    return constant(ticks, spread(10), events=events, **kw)


def still(n_agents: int, n_still: int, still_ticks: int, total: int | None = None,
          **kw) -> Trace:
    """``n_still`` agents stop moving for ``still_ticks`` consecutive ticks."""
    total = total or still_ticks + 5
    frames = []
    for t in range(total):
        row = []
        for a in spread(n_agents):
            stopped = a.id < n_still and t < still_ticks
            row.append(agent(a.id, a.x, a.y, 0.0 if stopped else 0.2, moved=not stopped))
        frames.append(row)
    return build(frames, **kw)


def encounters(n: int, ticks: int, humans=(TRAINED,)) -> Trace:
    """One agent that steps within 2 m of the trained human ``n`` times."""
    inside = {5 + 2 * k for k in range(n)}
    frames = [[agent(0, 1.0 if t in inside else 3.5, 0.0 if t in inside else 3.5)]
              for t in range(ticks)]
    return build(frames, humans=humans)


def near(role: Role, distance: float, speed: float) -> Trace:
    h = TRAINED if role is Role.TRAINED else ATTENDEE
    x = h.x + distance if h.x == 0 else h.x - distance
    return constant(10, [agent(0, x, h.y, speed)], humans=(TRAINED, ATTENDEE))


def flags(n: int, n_flagged: int, field: str, within_m: float = 2.0, **kw) -> Trace:
    """``n_flagged`` of ``n`` agents raise a request flag near the attendee."""
    row = [agent(i, 4.0 - within_m, 4.0 - 0.05 * i, **({field: True} if i < n_flagged else {}))
           for i in range(n)]
    return constant(10, row, **kw)


def stats_pair(stat: str, base: int, faulty: int):
    """Synthetic baseline/faulty traces whose aggregate ``stat`` equals the given counts."""
    def make(count: int) -> Trace:
        if stat == "high_impact_collisions":
            return collisions(50, {5 + i: 0.6 for i in range(count)})
        if stat == "human_encounters":
            return encounters(count, 60)
        if stat == "stationary_agents":
            return still(10, count, 150, total=150)
        if stat == "stationary_time_s":
            # one agent, stationary for 100 + count ticks: (count) ticks above 10 s
            return still(10, 1 if count else 0, 100 + count, total=200)
        raise KeyError(stat)

    return make(base), make(faulty)


# ------------------------------------------------------------------ fixture table


@dataclass(frozen=True)
class Fixture:
    rid: str
    label: str
    make: Callable[[], object]
    faulty: bool
    status: Status
    measured: float


def verdict_of(fx: Fixture):
    spec = CATALOG[fx.rid]
    if spec.monitor == "degradation":
        base, faulty = fx.make()
        return degradation_check(aggregate_stats(base), aggregate_stats(faulty),
                                 float(spec.limit.value), spec.params["stat"], spec.id)
    trace = fx.make()
    vs = {v.requirement_id: v for v in evaluate_trace([spec], trace, faulty=fx.faulty)}
    return vs[fx.rid]


P, F = Status.PASS, Status.FAIL
T = Role.TRAINED
A = Role.ATTENDEE

FIXTURES: list[Fixture] = [
    # collisions: a 200 s trace tiled into two 100 s "days"
    Fixture("RQ1.1", "0.5 m/s is not high impact", lambda: collisions(2000, {7: 0.5}, day_s=100), False, P, 0),
    Fixture("RQ1.1", "one 0.6 m/s impact", lambda: collisions(2000, {7: 0.6}, day_s=100), False, F, 1),
    Fixture("RQ1.1", "impacts in separate days", lambda: collisions(2000, {7: 0.6, 1500: 0.6}, day_s=100), False, F, 1),
    Fixture("RQ1.2", "0 -> 0 impacts", lambda: stats_pair("high_impact_collisions", 0, 0), True, P, 0),
    Fixture("RQ1.2", "0 -> 1 impacts", lambda: stats_pair("high_impact_collisions", 0, 1), True, F, 100),
    Fixture("RQ1.3", "2 -> 2 impacts", lambda: stats_pair("high_impact_collisions", 2, 2), True, P, 0),
    Fixture("RQ1.3", "2 -> 3 impacts", lambda: stats_pair("high_impact_collisions", 2, 3), True, F, 50),
    Fixture("RQ1.4", "one impact under faults", lambda: collisions(2000, {7: 0.6}, day_s=100), True, P, 1),
    Fixture("RQ1.4", "two impacts in one day", lambda: collisions(2000, {7: 0.6, 900: 0.9}, day_s=100), True, F, 2),
    Fixture("RQ1.5", "2.9 kg agents", lambda: constant(5, spread(10), mass=2.9), False, P, 2.9),
    Fixture("RQ1.5", "3.0 kg agents", lambda: constant(5, spread(10), mass=3.0), False, F, 3.0),
    Fixture("RQ1.6", "1.99 kg box", lambda: constant(5, spread(10), box_weights=(1.99,)), False, P, 1.99),
    Fixture("RQ1.6", "2.0 kg box", lambda: constant(5, spread(10), box_weights=(1.0, 2.0)), False, F, 2.0),
    # stationary
    Fixture("RQ2.1", "1 of 20 stationary", lambda: still(20, 1, 150), False, P, 5),
    Fixture("RQ2.1", "1 of 10 stationary", lambda: still(10, 1, 150), False, F, 10),
    Fixture("RQ2.1", "still for exactly 10 s", lambda: still(10, 3, 100), False, P, 0),
    Fixture("RQ2.2", "unmoved 99.9 s", lambda: still(20, 1, 999), False, P, 99.9),
    Fixture("RQ2.2", "unmoved 100 s", lambda: still(20, 1, 1000), False, F, 100),
    Fixture("RQ2.3", "0 -> 0 stationary agents", lambda: stats_pair("stationary_agents", 0, 0), True, P, 0),
    Fixture("RQ2.3", "0 -> 1 stationary agents", lambda: stats_pair("stationary_agents", 0, 1), True, F, 100),
    Fixture("RQ2.4", "20 -> 20 ticks stationary", lambda: stats_pair("stationary_time_s", 20, 20), True, P, 0),
    Fixture("RQ2.4", "20 -> 22 ticks stationary", lambda: stats_pair("stationary_time_s", 20, 22), True, F, 10),
    Fixture("RQ2.5", "1 -> 1 stationary agents", lambda: stats_pair("stationary_agents", 1, 1), True, P, 0),
    Fixture("RQ2.5", "1 -> 2 stationary agents", lambda: stats_pair("stationary_agents", 1, 2), True, F, 100),
    Fixture("RQ2.6", "30 -> 32 ticks stationary", lambda: stats_pair("stationary_time_s", 30, 32), True, P, 100 * 2 / 30),
    Fixture("RQ2.6", "30 -> 33 ticks stationary", lambda: stats_pair("stationary_time_s", 30, 33), True, F, 10),
    Fixture("RQ2.7", "1 of 10 stationary under faults", lambda: still(10, 1, 150), True, P, 10),
    Fixture("RQ2.7", "2 of 10 stationary under faults", lambda: still(10, 2, 150), True, F, 20),
    # environment envelope
    Fixture("RQ3.1", "density exactly 4", lambda: constant(5, spread(10), n_boxes=54), False, P, 4.0),
    Fixture("RQ3.1", "density above 4", lambda: constant(5, spread(10), n_boxes=55), False, F, 65 / 16),
    Fixture("RQ3.2", "20 degree incline", lambda: constant(5, spread(2), arena=_arena(incline_deg=20.0)), False, P, 20),
    Fixture("RQ3.2", "25 degree incline", lambda: constant(5, spread(2), arena=_arena(incline_deg=25.0)), False, F, 25),
    Fixture("RQ3.3", "dry floor", lambda: constant(5, spread(2)), False, P, 1),
    Fixture("RQ3.3", "wet floor", lambda: constant(5, spread(2), arena=_arena(floor=Floor.WET)), False, F, 0),
    Fixture("RQ3.4", "0.5 cm step", lambda: constant(5, spread(2), arena=_arena(max_step_height_cm=0.5)), False, P, 0.5),
    Fixture("RQ3.4", "0.6 cm step", lambda: constant(5, spread(2), arena=_arena(max_step_height_cm=0.6)), False, F, 0.6),
    Fixture("RQ3.5", "locators on", lambda: constant(5, spread(2)), False, P, 1),
    Fixture("RQ3.5", "locators off", lambda: constant(5, spread(2), arena=_arena(humans_have_locators=False)), False, F, 0),
    # humans
    Fixture("RQ4.1", "0.49 m/s at 2 m", lambda: near(T, 2.0, 0.49), False, P, 0.49),
    Fixture("RQ4.1", "0.5 m/s at 2 m", lambda: near(T, 2.0, 0.5), False, F, 0.5),
    Fixture("RQ4.1", "0.5 m/s just outside 2 m", lambda: near(T, 2.01, 0.5), False, P, 0.0),
    Fixture("RQ4.2", "0.24 m/s at 3 m", lambda: near(A, 3.0, 0.24), False, P, 0.24),
    Fixture("RQ4.2", "0.25 m/s at 3 m", lambda: near(A, 3.0, 0.25), False, F, 0.25),
    Fixture("RQ4.3", "9 encounters in 1000 s", lambda: encounters(9, 10000), False, P, 9),
    Fixture("RQ4.3", "10 encounters", lambda: encounters(10, 100), False, F, 10),
    Fixture("RQ4.4", "4 requesting intervention", lambda: flags(10, 4, "request_intervention"), False, P, 4),
    Fixture("RQ4.4", "5 requesting intervention", lambda: flags(10, 5, "request_intervention"), False, F, 5),
    Fixture("RQ4.5", "10 agents per trained human", lambda: constant(5, spread(10)), False, P, 10),
    Fixture("RQ4.5", "21 agents per trained human", lambda: constant(5, spread(21)), False, F, 21),
    Fixture("RQ4.5", "4 agents per trained human", lambda: constant(5, spread(4)), False, F, 4),
    Fixture("RQ4.6", "1 requesting input", lambda: flags(10, 1, "request_input"), False, P, 1),
    Fixture("RQ4.6", "2 requesting input", lambda: flags(10, 2, "request_input"), False, F, 2),
    Fixture("RQ4.7", "4 informing within 5 m", lambda: flags(10, 4, "request_input", within_m=4.9), False, P, 4),
    Fixture("RQ4.7", "5 informing within 5 m", lambda: flags(10, 5, "request_input", within_m=4.9), False, F, 5),
    Fixture("RQ4.8", "10 -> 10 encounters", lambda: stats_pair("human_encounters", 10, 10), True, P, 0),
    Fixture("RQ4.8", "10 -> 11 encounters", lambda: stats_pair("human_encounters", 10, 11), True, F, 10),
    Fixture("RQ4.9", "20 -> 21 encounters", lambda: stats_pair("human_encounters", 20, 21), True, P, 5),
    Fixture("RQ4.9", "20 -> 22 encounters", lambda: stats_pair("human_encounters", 20, 22), True, F, 10),
    Fixture("RQ4.10", "19 encounters under faults", lambda: encounters(19, 10000), True, P, 19),
    Fixture("RQ4.10", "20 encounters under faults", lambda: encounters(20, 100), True, F, 20),
]


def _arena(**kw) -> ArenaConfig:
    from dataclasses import replace

    return replace(ARENA, **kw)
