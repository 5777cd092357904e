"""Closed-loop run: sense -> decide -> fault -> step, recorded as a Trace."""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import TextIO

from .behavior import VIOLATING, ControllerState, decide
from .config import Scenario
from .faults import apply_fault, assign_faults
from .sim import Event, FaultKind, WorldState, place_world, sense_all, step
from .trace import AgentSample, Frame, HumanSample, Trace, TraceWriter, header_for


@dataclass
class RunResult:
    scenario: Scenario
    trace: Trace
    world: WorldState
    digest: str
    aborted: bool = False
    faulted: dict[str, frozenset[int]] = field(default_factory=dict)


def initial_world(scenario: Scenario) -> WorldState:
    return place_world(
        scenario.arena, scenario.n_agents, scenario.n_boxes, scenario.humans,
        scenario.seed, scenario.physics, scenario.box_weight_kg, scenario.dt,
        keep_clear=scenario.behavior.human_keepout,
    )


def behavior_for(scenario: Scenario):
    if scenario.controller == "no-speed-cap":
        return replace(scenario.behavior, enforce_speed_limit=VIOLATING.enforce_speed_limit,
                       human_keepout=VIOLATING.human_keepout,
                       cruise_speed=VIOLATING.cruise_speed)
    return scenario.behavior


def run_scenario(scenario: Scenario, sink: TextIO | None = None,
                 max_ticks: int | None = None) -> RunResult:
    """Simulate ``scenario`` and return its trace.

    The trace text is streamed to ``sink`` when given; its SHA-256 is
    returned either way. An emergency stop (``estop_s``) ends the run early
    and marks the result aborted.
    """
    world = initial_world(scenario)
    params = behavior_for(scenario)
    n = scenario.n_agents
    assignments: list[tuple] = []
    faulted: dict[str, frozenset[int]] = {}
    for spec in scenario.faults:
        ids = assign_faults(n, spec) if n else frozenset()
        assignments.append((spec, ids))
        faulted[spec.kind.value] = faulted.get(spec.kind.value, frozenset()) | ids
    states = {a.id: ControllerState(seed=scenario.seed) for a in world.agents}
    trace = Trace(
        dt=scenario.dt,
        arena=scenario.arena,
        n_boxes=len(world.boxes),
        box_weights=tuple(b.weight_kg for b in world.boxes),
        box_feet=world.boxes[0].foot_offsets if world.boxes else (),
        meta={
            "scenario": scenario.id,
            "seed": scenario.seed,
            "controller": scenario.controller,
            "agent_mass_kg": scenario.physics.agent_mass_kg,
            "accel_max": scenario.physics.accel_max,
            "v_max": scenario.physics.v_max,
            "day_s": scenario.day_s,
            "faulted": {k: sorted(v) for k, v in sorted(faulted.items())},
        },
    )
    writer = TraceWriter(sink if sink is not None else _Null(), header_for(trace))
    humans = tuple(HumanSample(h.id, h.role, h.x, h.y) for h in world.humans)
    total = scenario.ticks if max_ticks is None else min(max_ticks, scenario.ticks)
    estop_tick = None if scenario.estop_s is None else int(round(scenario.estop_s / scenario.dt))
    aborted = False
    active_prev: dict[int, frozenset[FaultKind]] = {}

    for _ in range(total):
        tick = world.tick
        if estop_tick is not None and tick >= estop_tick:
            ev = Event(tick, "estop", (), (tick * scenario.dt,))
            trace.events.append(ev)
            writer.events([ev])
            aborted = True
            break
        world, onsets = _activate(world, assignments, active_prev)
        commands = {}
        modes = {}
        seen = sense_all(world, params.sensing_radius)
        for a in world.agents:
            p = seen[a.id]
            cmd, st = decide(p, states[a.id], params)
            if a.active_faults:
                cmd, _ = apply_fault(a, cmd, p.neighbors, world.dt)
            states[a.id] = st
            commands[a.id] = cmd
            modes[a.id] = st.mode
        world, events = step(world, commands, modes)
        events = list(onsets) + list(events)
        frame = Frame(world.tick, tuple(
            AgentSample(
                a.id, a.x, a.y, a.speed, a.heading, a.controller_state,
                -1 if a.carried_box is None else a.carried_box,
                a.last_move_tick == world.tick,
                a.requesting_intervention, a.requesting_input,
                FaultKind.FULL_COMMUNICATION in a.active_faults,
                FaultKind.HALF_WHEELS_MOTOR in a.active_faults,
            ) for a in world.agents), humans)
        trace.frames.append(frame)
        trace.events.extend(events)
        writer.frame(frame)
        writer.events(events)

    return RunResult(scenario, trace, world, writer.digest, aborted, faulted)


def _activate(world: WorldState, assignments, active_prev):
    """Set each agent's active fault set for the coming tick."""
    if not assignments:
        return world, ()
    tick = world.tick + 1
    agents = []
    onsets = []
    for a in world.agents:
        kinds = frozenset(spec.kind for spec, ids in assignments
                          if a.id in ids and spec.active(tick))
        if kinds != a.active_faults:
            a = replace(a, active_faults=kinds)
            if kinds - active_prev.get(a.id, frozenset()):
                for k in sorted(kinds - active_prev.get(a.id, frozenset())):
                    onsets.append(Event(tick, "fault", (f"a{a.id}",),
                                        (1.0 if k is FaultKind.FULL_COMMUNICATION else 2.0,)))
        active_prev[a.id] = kinds
        agents.append(a)
    return replace(world, agents=tuple(agents)), tuple(onsets)


class _Null(io.TextIOBase):
    def write(self, s: str) -> int:
        return len(s)
