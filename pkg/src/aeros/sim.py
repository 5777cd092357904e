"""Discrete-time 2D simulator for the cloakroom arena.

Agents are discs driven by per-tick actuation commands; boxes are squares
with a foot at each corner that ride on top of the agent carrying them;
humans are static discs. Collisions are tracked as contact episodes so a
long push between two bodies counts once.
"""

from __future__ import annotations

import enum
import math
import random
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from typing import Any

DT = 0.1
ACCEL_CEILING = 4.0  # m/s^2, hard ceiling for any configured cap
HIGH_IMPACT_SPEED = 0.5  # m/s
COMM_RANGE = 5.0  # m
EPS_MOVE = 0.01  # m per tick
CONTACT_TOL = 1e-6
AGENT_RADIUS = 0.15
HUMAN_RADIUS = 0.25
BOX_SIZE = 0.2


class SimError(ValueError):
    """Rejected command or world configuration."""


class Floor(str, enum.Enum):
    DRY = "dry"
    WET = "wet"


class Role(str, enum.Enum):
    TRAINED = "trained"
    ATTENDEE = "attendee"


class FaultKind(str, enum.Enum):
    FULL_COMMUNICATION = "FullCommunication"
    HALF_WHEELS_MOTOR = "HalfWheelsMotor"


class Mode(str, enum.Enum):
    EXPLORE = "EXPLORE"
    ACQUIRE = "ACQUIRE"
    TRANSPORT = "TRANSPORT"
    DELIVER = "DELIVER"
    AVOID = "AVOID"
    AWAIT_INTERVENTION = "AWAIT_INTERVENTION"


MODE_INDEX = {m: i for i, m in enumerate(Mode)}


@dataclass(frozen=True, slots=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise SimError(f"degenerate rectangle {self}")

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def overlaps(self, other: Rect) -> bool:
        return (
            self.x0 < other.x1 and other.x0 < self.x1
            and self.y0 < other.y1 and other.y0 < self.y1
        )

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def shrunk(self, margin: float) -> Rect | None:
        if 2 * margin >= min(self.x1 - self.x0, self.y1 - self.y0):
            return None
        return Rect(self.x0 + margin, self.y0 + margin, self.x1 - margin, self.y1 - margin)


@dataclass(frozen=True, slots=True)
class ArenaConfig:
    width: float = 4.0
    height: float = 4.0
    incline_deg: float = 0.0
    floor: Floor = Floor.DRY
    max_step_height_cm: float = 0.0
    delivery_zones: tuple[Rect, ...] = ()
    deposit_zones: tuple[Rect, ...] = ()
    humans_have_locators: bool = True

    def validate(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise SimError("arena width and height must be positive")
        zones = self.delivery_zones + self.deposit_zones
        for z in zones:
            if z.x0 < 0 or z.y0 < 0 or z.x1 > self.width or z.y1 > self.height:
                raise SimError(f"zone {z} lies outside the arena")
        for i, a in enumerate(zones):
            for b in zones[i + 1:]:
                if a.overlaps(b):
                    raise SimError(f"zones {a} and {b} overlap")

    @property
    def area(self) -> float:
        return self.width * self.height

    def in_delivery(self, x: float, y: float) -> bool:
        return any(z.contains(x, y) for z in self.delivery_zones)


@dataclass(frozen=True, slots=True)
class AgentState:
    id: int
    x: float
    y: float
    heading: float = 0.0
    speed: float = 0.0
    carried_box: int | None = None
    controller_state: Mode = Mode.EXPLORE
    last_move_tick: int = 0
    active_faults: frozenset[FaultKind] = frozenset()
    stored_bytes: int = 0
    requesting_intervention: bool = False
    requesting_input: bool = False

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def comm_faulted(self) -> bool:
        return FaultKind.FULL_COMMUNICATION in self.active_faults


def square_feet(size: float = BOX_SIZE) -> tuple[tuple[float, float], ...]:
    h = size / 2
    return ((-h, -h), (h, -h), (h, h), (-h, h))


@dataclass(frozen=True, slots=True)
class BoxState:
    id: int
    x: float
    y: float
    weight_kg: float = 1.5
    foot_offsets: tuple[tuple[float, float], ...] = field(default_factory=square_feet)
    carried_by: int | None = None

    def __post_init__(self) -> None:
        if len(self.foot_offsets) != 4:
            raise SimError(f"box {self.id} must have exactly 4 feet")

    def feet(self) -> tuple[tuple[float, float], ...]:
        return tuple((self.x + dx, self.y + dy) for dx, dy in self.foot_offsets)


def feet_inside(feet, zones) -> bool:
    """True when every foot lies inside one single zone."""
    return any(all(z.contains(fx, fy) for fx, fy in feet) for z in zones)


@dataclass(frozen=True, slots=True)
class HumanState:
    id: int
    role: Role
    x: float
    y: float
    has_locator: bool = True


@dataclass(frozen=True, slots=True)
class CollisionEvent:
    tick: int
    participants: tuple[str, str]
    impact_speed: float
    classification: str

    kind = "collision"

    @property
    def entities(self) -> tuple[str, ...]:
        return self.participants

    @property
    def payload(self) -> tuple[float, ...]:
        return (self.impact_speed, 1.0 if self.classification == "high" else 0.0)


@dataclass(frozen=True, slots=True)
class Event:
    tick: int
    kind: str
    entities: tuple[str, ...]
    payload: tuple[float, ...] = ()


def classify(impact_speed: float) -> str:
    return "high" if impact_speed > HIGH_IMPACT_SPEED else "low"


@dataclass(frozen=True, slots=True)
class Physics:
    v_max: float = 0.5
    accel_max: float = 3.5
    max_turn_rate: float = 6.0
    agent_radius: float = AGENT_RADIUS
    human_radius: float = HUMAN_RADIUS
    agent_mass_kg: float = 2.9
    pickup_range: float = 0.25

    def validate(self) -> None:
        if not (0 < self.v_max and math.isfinite(self.v_max)):
            raise SimError("v_max must be positive")
        if not (0 < self.accel_max <= ACCEL_CEILING):
            raise SimError(f"accel_max must lie in (0, {ACCEL_CEILING}] m/s^2")
        if self.agent_radius <= 0 or self.human_radius <= 0:
            raise SimError("entity radii must be positive")


@dataclass(frozen=True, slots=True)
class WorldState:
    tick: int
    dt: float
    arena: ArenaConfig
    agents: tuple[AgentState, ...]
    boxes: tuple[BoxState, ...] = ()
    humans: tuple[HumanState, ...] = ()
    physics: Physics = Physics()
    rng_seed: int = 0
    event_log: tuple[Any, ...] = ()
    contacts: frozenset[tuple[str, str]] = frozenset()

    def agent(self, agent_id: int) -> AgentState:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise SimError(f"unknown agent id {agent_id!r}")


@dataclass(frozen=True, slots=True)
class Command:
    """Low-level actuation applied by ``step``.

    Mirrors the behaviour layer's command; ``step`` accepts any object
    exposing these attributes.
    """

    desired_speed: float = 0.0
    desired_heading: float = 0.0
    request_intervention: bool = False
    request_attendee_input: bool = False
    pick_up: int | None = None
    release: bool = False


# --------------------------------------------------------------- bodies


def _bodies(world: WorldState):
    """(tag, x, y, radius, vx, vy) for every collidable body."""
    ph = world.physics
    out = []
    for a in world.agents:
        out.append((f"a{a.id}", a.x, a.y, ph.agent_radius,
                    a.speed * math.cos(a.heading), a.speed * math.sin(a.heading)))
    for h in world.humans:
        out.append((f"h{h.id}", h.x, h.y, ph.human_radius, 0.0, 0.0))
    return out


def _pair(t1: str, t2: str) -> tuple[str, str]:
    return (t1, t2) if t1 < t2 else (t2, t1)


def contact_pairs(world: WorldState) -> dict[tuple[str, str], float]:
    """Pairs currently in contact mapped to their relative speed.

    Uses a uniform grid so the cost stays near-linear in the body count.
    """
    bodies = _bodies(world)
    if len(bodies) < 2:
        return {}
    cell = 2 * max(b[3] for b in bodies) + CONTACT_TOL
    grid: dict[tuple[int, int], list[int]] = {}
    for i, b in enumerate(bodies):
        grid.setdefault((int(math.floor(b[1] / cell)), int(math.floor(b[2] / cell))), []).append(i)
    out: dict[tuple[str, str], float] = {}
    for (cx, cy), members in grid.items():
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                others = grid.get((cx + dx, cy + dy))
                if not others:
                    continue
                for i in members:
                    bi = bodies[i]
                    for j in others:
                        if j <= i:
                            continue
                        bj = bodies[j]
                        reach = bi[3] + bj[3] + CONTACT_TOL
                        ddx = bi[1] - bj[1]
                        ddy = bi[2] - bj[2]
                        if ddx * ddx + ddy * ddy < reach * reach:
                            out[_pair(bi[0], bj[0])] = math.hypot(bi[4] - bj[4], bi[5] - bj[5])
    return out


def detect_collisions(world: WorldState) -> list[CollisionEvent]:
    """Contacts that began this tick, one event per new episode."""
    events = []
    for pair, rel in sorted(contact_pairs(world).items()):
        if pair in world.contacts:
            continue
        events.append(CollisionEvent(world.tick, pair, rel, classify(rel)))
    return events


# --------------------------------------------------------------- sensing


def neighborhood(world: WorldState, agent_id: int) -> list[int]:
    """Agents within communication range, excluding comm-faulted links."""
    me = world.agent(agent_id)
    if me.comm_faulted:
        return []
    r2 = COMM_RANGE * COMM_RANGE
    out = []
    for a in world.agents:
        if a.id == agent_id or a.comm_faulted:
            continue
        dx = a.x - me.x
        dy = a.y - me.y
        if dx * dx + dy * dy <= r2:
            out.append(a.id)
    return out


@dataclass(frozen=True, slots=True)
class SeenAgent:
    id: int
    x: float
    y: float
    mode: Mode
    requesting_input: bool


@dataclass(frozen=True, slots=True)
class SeenHuman:
    id: int
    role: Role
    x: float
    y: float
    distance: float


@dataclass(frozen=True, slots=True)
class SeenBox:
    id: int
    x: float
    y: float
    weight_kg: float
    in_delivery: bool


@dataclass(frozen=True, slots=True)
class Perception:
    agent_id: int
    tick: int
    dt: float
    x: float
    y: float
    heading: float
    speed: float
    v_max: float
    radius: float
    arena_width: float
    arena_height: float
    carried_box: int | None = None
    carried_feet: tuple[tuple[float, float], ...] = ()
    ticks_since_move: int = 0
    obstacles: tuple[tuple[float, float, float], ...] = ()
    neighbors: tuple[SeenAgent, ...] = ()
    humans: tuple[SeenHuman, ...] = ()
    boxes: tuple[SeenBox, ...] = ()
    delivery_zones: tuple[Rect, ...] = ()
    deposit_zones: tuple[Rect, ...] = ()


def sense(world: WorldState, agent_id: int, sensing_radius: float = 1.5) -> Perception:
    """Local view of one agent.

    Cameras and time-of-flight sensors see bodies and boxes inside
    ``sensing_radius``; neighbour summaries arrive over the radio and obey
    the comm-fault rule; human locators report any human within radio range.
    """
    world.agent(agent_id)
    return sense_all(world, sensing_radius, only=agent_id)[agent_id]


def sense_all(world: WorldState, sensing_radius: float = 1.5,
              only: int | None = None) -> dict[int, Perception]:
    """Perceptions for every agent (or just ``only``), sharing per-tick work."""
    ph = world.physics
    arena = world.arena
    s2 = sensing_radius * sensing_radius
    c2 = COMM_RANGE * COMM_RANGE
    zones = arena.delivery_zones
    free = []
    feet_of: dict[int, tuple[tuple[float, float], ...]] = {}
    for b in world.boxes:
        if b.carried_by is None:
            free.append((b, None))
        else:
            feet_of[b.carried_by] = b.feet()
    free_seen: list[tuple[BoxState, SeenBox | None]] = free
    radios = [a for a in world.agents if not a.comm_faulted]
    out: dict[int, Perception] = {}
    for me in world.agents:
        if only is not None and me.id != only:
            continue
        mx, my = me.x, me.y
        obstacles = []
        for a in world.agents:
            if a.id == me.id:
                continue
            dx = a.x - mx
            dy = a.y - my
            if dx * dx + dy * dy <= s2:
                obstacles.append((a.x, a.y, ph.agent_radius))
        neighbors = []
        if not me.comm_faulted:
            for a in radios:
                if a.id == me.id:
                    continue
                dx = a.x - mx
                dy = a.y - my
                if dx * dx + dy * dy <= c2:
                    neighbors.append(SeenAgent(a.id, a.x, a.y, a.controller_state,
                                               a.requesting_input))
        humans = []
        for h in world.humans:
            d = math.hypot(h.x - mx, h.y - my)
            if (d <= COMM_RANGE and h.has_locator) or d <= sensing_radius:
                humans.append(SeenHuman(h.id, h.role, h.x, h.y, d))
        boxes = []
        for k, (b, seen) in enumerate(free_seen):
            dx = b.x - mx
            dy = b.y - my
            if dx * dx + dy * dy <= s2:
                if seen is None:
                    seen = SeenBox(b.id, b.x, b.y, b.weight_kg, feet_inside(b.feet(), zones))
                    free_seen[k] = (b, seen)
                boxes.append(seen)
        out[me.id] = Perception(
            me.id, world.tick, world.dt, mx, my, me.heading, me.speed, ph.v_max,
            ph.agent_radius, arena.width, arena.height, me.carried_box,
            feet_of.get(me.id, ()), world.tick - me.last_move_tick,
            tuple(obstacles), tuple(neighbors), tuple(humans), tuple(boxes),
            zones, arena.deposit_zones,
        )
    return out


# --------------------------------------------------------------- stepping


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2 * math.pi) - math.pi


def _check_commands(world: WorldState, commands: Mapping[int, Any]) -> None:
    ids = {a.id for a in world.agents}
    unknown = set(commands) - ids
    if unknown:
        raise SimError(f"command for unknown agent id(s) {sorted(unknown)}")
    missing = ids - set(commands)
    if missing:
        raise SimError(f"missing command for agent id(s) {sorted(missing)}")
    for aid, c in commands.items():
        if not (math.isfinite(c.desired_speed) and math.isfinite(c.desired_heading)):
            raise SimError(f"non-finite command for agent {aid}")


def integrate(world: WorldState, commands: Mapping[int, Any]) -> WorldState:
    """Advance kinematics one tick; overlaps are left unresolved.

    Velocity is updated first (acceleration and speed caps), then the
    position is advanced with that velocity over ``dt``.
    """
    _check_commands(world, commands)
    ph = world.physics
    dt = world.dt
    dv = ph.accel_max * dt
    turn = ph.max_turn_rate * dt
    r = ph.agent_radius
    agents = []
    for a in world.agents:
        c = commands[a.id]
        target = min(max(c.desired_speed, 0.0), ph.v_max)
        speed = min(max(target, a.speed - dv), a.speed + dv)
        speed = min(max(speed, 0.0), ph.v_max)
        err = _wrap(c.desired_heading - a.heading)
        heading = _wrap(a.heading + max(-turn, min(turn, err)))
        x = a.x + speed * math.cos(heading) * dt
        y = a.y + speed * math.sin(heading) * dt
        x = min(max(x, r), world.arena.width - r)
        y = min(max(y, r), world.arena.height - r)
        agents.append(AgentState(
            a.id, x, y, heading, speed, a.carried_box, a.controller_state,
            a.last_move_tick, a.active_faults, a.stored_bytes,
            bool(c.request_intervention), bool(c.request_attendee_input),
        ))
    return replace(world, tick=world.tick + 1, agents=tuple(agents), event_log=())


def resolve(world: WorldState, pairs) -> WorldState:
    """Push overlapping bodies apart; humans never move."""
    if not pairs:
        return world
    ph = world.physics
    pos = {f"a{a.id}": [a.x, a.y] for a in world.agents}
    fixed = {f"h{h.id}": (h.x, h.y) for h in world.humans}
    radius = {t: ph.agent_radius for t in pos}
    radius.update({t: ph.human_radius for t in fixed})
    for t1, t2 in sorted(pairs):
        p1 = pos.get(t1) or list(fixed[t1])
        p2 = pos.get(t2) or list(fixed[t2])
        dx = p2[0] - p1[0]
        dy = p2[1] - p1[1]
        d = math.hypot(dx, dy)
        overlap = radius[t1] + radius[t2] - d
        if overlap <= 0:
            continue
        if d == 0:
            dx, dy, d = 1.0, 0.0, 1.0
        ux, uy = dx / d, dy / d
        m1, m2 = t1 in pos, t2 in pos
        if m1 and m2:
            s1 = s2 = overlap / 2
        else:
            s1, s2 = (overlap, 0.0) if m1 else (0.0, overlap)
        if m1:
            pos[t1][0] -= ux * s1
            pos[t1][1] -= uy * s1
        if m2:
            pos[t2][0] += ux * s2
            pos[t2][1] += uy * s2
    r = ph.agent_radius
    agents = []
    for a in world.agents:
        x, y = pos[f"a{a.id}"]
        x = min(max(x, r), world.arena.width - r)
        y = min(max(y, r), world.arena.height - r)
        agents.append(a if (x == a.x and y == a.y) else replace(a, x=x, y=y))
    return replace(world, agents=tuple(agents))


def step(world: WorldState, commands: Mapping[int, Any],
         modes: Mapping[int, Mode] | None = None) -> tuple[WorldState, tuple[Any, ...]]:
    """One tick: integrate, detect new contacts, resolve overlaps, move boxes."""
    start = {a.id: (a.x, a.y) for a in world.agents}
    moved = integrate(world, commands)
    pairs = contact_pairs(moved)
    events: list[Any] = []
    for pair in sorted(pairs):
        if pair not in world.contacts:
            rel = pairs[pair]
            events.append(CollisionEvent(moved.tick, pair, rel, classify(rel)))
    settled = resolve(moved, pairs)
    tick = settled.tick
    eps2 = EPS_MOVE * EPS_MOVE
    agents = []
    for a in settled.agents:
        x0, y0 = start[a.id]
        last = tick if (a.x - x0) ** 2 + (a.y - y0) ** 2 > eps2 else a.last_move_tick
        mode = modes.get(a.id, a.controller_state) if modes is not None else a.controller_state
        if last != a.last_move_tick or mode is not a.controller_state:
            a = AgentState(a.id, a.x, a.y, a.heading, a.speed, a.carried_box, mode, last,
                           a.active_faults, a.stored_bytes, a.requesting_intervention,
                           a.requesting_input)
        agents.append(a)
    agents_t, boxes_t, box_events = _handle_boxes(settled, agents, commands)
    events.extend(box_events)
    out = replace(settled, agents=agents_t, boxes=boxes_t,
                  event_log=tuple(events), contacts=frozenset(pairs))
    return out, out.event_log


def _handle_boxes(world: WorldState, agents: list[AgentState], commands):
    by_id = {a.id: a for a in agents}
    boxes = {b.id: b for b in world.boxes}
    events: list[Event] = []
    tick = world.tick
    zones = world.arena.delivery_zones
    for aid in sorted(by_id):
        a = by_id[aid]
        c = commands[aid]
        if a.carried_box is not None and c.release:
            b = replace(boxes[a.carried_box], x=a.x, y=a.y, carried_by=None)
            boxes[b.id] = b
            by_id[aid] = replace(a, carried_box=None)
            events.append(Event(tick, "release", (f"a{aid}", f"b{b.id}"), (a.x, a.y)))
            if feet_inside(b.feet(), zones):
                events.append(Event(tick, "delivery", (f"a{aid}", f"b{b.id}"), (a.x, a.y)))
        elif a.carried_box is None and c.pick_up is not None:
            b = boxes.get(c.pick_up)
            if b is None or b.carried_by is not None:
                continue
            if math.hypot(b.x - a.x, b.y - a.y) > world.physics.pickup_range:
                continue
            boxes[b.id] = replace(b, x=a.x, y=a.y, carried_by=aid)
            by_id[aid] = replace(a, carried_box=b.id)
            events.append(Event(tick, "pickup", (f"a{aid}", f"b{b.id}"), (b.x, b.y)))
    for a in by_id.values():
        if a.carried_box is not None:
            b = boxes[a.carried_box]
            if b.x != a.x or b.y != a.y:
                boxes[b.id] = BoxState(b.id, a.x, a.y, b.weight_kg, b.foot_offsets, b.carried_by)
    return (tuple(by_id[a.id] for a in agents),
            tuple(boxes[b.id] for b in world.boxes), events)


# --------------------------------------------------------------- layout


def place_world(arena: ArenaConfig, n_agents: int, n_boxes: int,
                humans: tuple[HumanState, ...], seed: int,
                physics: Physics = Physics(), box_weight_kg: float = 1.5,
                dt: float = DT, keep_clear: float = 2.3) -> WorldState:
    """Seeded initial layout.

    Boxes are packed on a grid inside the deposit zones; agents are dropped
    at random free spots outside every zone and away from humans.
    """
    arena.validate()
    physics.validate()
    if not dt > 0:
        raise SimError("dt must be positive")
    if humans and not arena.humans_have_locators:
        raise SimError("humans present but locators are disabled (RQ3.5 envelope)")
    for h in humans:
        if not h.has_locator and arena.humans_have_locators:
            raise SimError(f"human {h.id} lacks a locator")
    rng = random.Random(seed)
    boxes = []
    slots = []
    for z in arena.deposit_zones:
        nx = int((z.x1 - z.x0) / BOX_SIZE + 1e-9)
        ny = int((z.y1 - z.y0) / BOX_SIZE + 1e-9)
        for j in range(ny):
            for i in range(nx):
                slots.append((z.x0 + BOX_SIZE * (i + 0.5), z.y0 + BOX_SIZE * (j + 0.5)))
    if n_boxes > len(slots):
        raise SimError(f"{n_boxes} boxes do not fit in the deposit zones ({len(slots)} slots)")
    for bid, (x, y) in enumerate(slots[:n_boxes]):
        boxes.append(BoxState(bid, x, y, box_weight_kg))
    r = physics.agent_radius
    zones = arena.delivery_zones + arena.deposit_zones
    agents: list[AgentState] = []
    for aid in range(n_agents):
        for attempt in range(5000):
            x = rng.uniform(r, arena.width - r)
            y = rng.uniform(r, arena.height - r)
            clear = keep_clear if attempt < 2000 else 0.0
            if attempt < 4000 and any(z.contains(x, y) for z in zones):
                continue
            if any(math.hypot(h.x - x, h.y - y) < max(clear, r + physics.human_radius)
                   for h in humans):
                continue
            if any(math.hypot(o.x - x, o.y - y) < 2 * r + 0.05 for o in agents):
                continue
            agents.append(AgentState(aid, x, y, heading=rng.uniform(-math.pi, math.pi)))
            break
        else:
            raise SimError(f"no free spot for agent {aid}; arena too crowded")
    return WorldState(0, dt, arena, tuple(agents), tuple(boxes), tuple(humans),
                      physics, seed)
