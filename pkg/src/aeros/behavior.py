"""Per-agent finite-state controller for the cloakroom task.

Modes::

    EXPLORE ──box seen──> ACQUIRE ──picked up──> TRANSPORT ──feet in zone──> DELIVER
       ^                     |                                                  |
       └──── box gone ───────┘<──────────────── released ───────────────────────┘

    any task mode ──obstacle/human too close──> AVOID ──clear──> previous mode
    any mode ──no movement > stuck timeout──> AWAIT_INTERVENTION ──timer──> task mode

``decide`` is a pure function of (perception, controller state, params):
everything that varies over time lives in the returned ControllerState.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .sim import Mode, Perception, Role, feet_inside

TRAINED_RADIUS = 2.0
TRAINED_SPEED = 0.5
ATTENDEE_RADIUS = 3.0
ATTENDEE_SPEED = 0.25

TASK_MODES = (Mode.EXPLORE, Mode.ACQUIRE, Mode.TRANSPORT, Mode.DELIVER)


@dataclass(frozen=True, slots=True)
class BehaviorParams:
    sensing_radius: float = 1.5
    avoid_distance: float = 0.6
    cruise_speed: float = 0.35
    avoid_speed: float = 0.22
    # slowest deliberate speed; halved by a motor fault it still clears the
    # 0.01 m/tick movement epsilon, so a crawling agent never reads as stationary
    min_speed: float = 0.22
    wall_margin: float = 0.3
    stuck_timeout_s: float = 60.0
    intervention_s: float = 20.0
    human_keepout: float = 2.3
    speed_guard_m: float = 0.15
    speed_guard_factor: float = 0.9
    wander_period_s: float = 3.0
    max_box_weight_kg: float = 2.0
    attendee_request_range: float = 3.5
    attendee_request_s: float = 2.0
    give_up_s: float = 5.0
    scatter_s: float = 4.0
    enforce_speed_limit: bool = True


# Seeded-violation variant: human speed caps and keep-out switched off.
VIOLATING = BehaviorParams(enforce_speed_limit=False, human_keepout=0.0, cruise_speed=math.inf)


@dataclass(frozen=True, slots=True)
class ControllerState:
    mode: Mode = Mode.EXPLORE
    target: int | None = None
    resume: Mode = Mode.EXPLORE
    mode_ticks: int = 0
    since_intervention: int = 10**9
    input_ticks: int = 0
    scatter: int = 0
    seed: int = 0


@dataclass(frozen=True, slots=True)
class ActuationCommand:
    desired_speed: float = 0.0
    desired_heading: float = 0.0
    request_intervention: bool = False
    request_attendee_input: bool = False
    pick_up: int | None = None
    release: bool = False


STOP = ActuationCommand()

_STATE_FIELDS = tuple(f.name for f in fields(ControllerState))


def _with(state: ControllerState, **kw) -> ControllerState:
    # dataclasses.replace is slow on the per-tick path
    return ControllerState(*[kw[f] if f in kw else getattr(state, f) for f in _STATE_FIELDS])


def speed_limit(perception: Perception) -> float:
    """Tightest speed cap implied by the humans in view."""
    limit = perception.v_max
    for h in perception.humans:
        if h.role is Role.TRAINED and h.distance <= TRAINED_RADIUS:
            limit = min(limit, TRAINED_SPEED)
        elif h.role is Role.ATTENDEE and h.distance <= ATTENDEE_RADIUS:
            limit = min(limit, ATTENDEE_SPEED)
    return limit


def _guarded_limit(p: Perception, params: BehaviorParams) -> float:
    # Anticipate next-tick distances so the cap binds before the boundary.
    if not params.enforce_speed_limit:
        return p.v_max
    limit = p.v_max
    for h in p.humans:
        d = h.distance - params.speed_guard_m
        if h.role is Role.TRAINED and d <= TRAINED_RADIUS:
            limit = min(limit, TRAINED_SPEED * params.speed_guard_factor)
        elif h.role is Role.ATTENDEE and d <= ATTENDEE_RADIUS:
            limit = min(limit, ATTENDEE_SPEED * params.speed_guard_factor)
    return min(limit, speed_limit(p))


def _mix(*parts: int) -> int:
    # splitmix64 over the parts; deterministic across platforms
    z = 0x9E3779B97F4A7C15
    for v in parts:
        z = (z + (v & 0xFFFFFFFFFFFFFFFF) + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        z ^= z >> 31
    return z


def _angle_diff(a: float, b: float) -> float:
    return (a - b + math.pi) % (2 * math.pi) - math.pi


def _repulsion(p: Perception, heading: float, params: BehaviorParams):
    """Summed push away from close bodies, walls and human keep-out discs.

    Returns (vx, vy, blocking) where ``blocking`` is set when something lies
    in the direction of travel closer than the avoid distance, or a human
    keep-out disc has been entered.
    """
    vx = vy = 0.0
    blocking = False
    hx, hy = math.cos(heading), math.sin(heading)
    cx, cy = math.cos(p.heading), math.sin(p.heading)
    if params.human_keepout > 0:
        for h in p.humans:
            if h.distance < params.human_keepout:
                d = max(h.distance, 1e-6)
                w = 2.0 + 4.0 * (params.human_keepout - d) / params.human_keepout
                vx += (p.x - h.x) / d * w
                vy += (p.y - h.y) / d * w
                blocking = True
    reach = params.avoid_distance
    for ox, oy, _r in p.obstacles:
        dx, dy = p.x - ox, p.y - oy
        d = math.hypot(dx, dy)
        if d >= reach or d == 0.0:
            continue
        w = (reach - d) / (reach - 2 * p.radius if reach > 2 * p.radius else reach)
        vx += dx / d * w
        vy += dy / d * w
        if dx * hx + dy * hy < 0 or (p.speed > 0 and dx * cx + dy * cy < 0):
            blocking = True
    m = p.radius + params.wall_margin
    for gap, nx, ny in ((p.x, 1.0, 0.0), (p.arena_width - p.x, -1.0, 0.0),
                        (p.y, 0.0, 1.0), (p.arena_height - p.y, 0.0, -1.0)):
        if gap < m:
            w = (m - gap) / params.wall_margin
            vx += nx * w
            vy += ny * w
            if hx * nx + hy * ny < -0.3:
                blocking = True
    return vx, vy, blocking


def _wander(p: Perception, state: ControllerState, params: BehaviorParams) -> float:
    period = max(1, round(params.wander_period_s / p.dt))
    h = _mix(state.seed, p.agent_id, p.tick // period)
    if h % 3 == 0 and state.scatter == 0 and p.deposit_zones and p.carried_box is None:
        zone = min(p.deposit_zones, key=lambda z: math.hypot(z.center[0] - p.x, z.center[1] - p.y))
        if not zone.contains(p.x, p.y):
            jitter = ((h >> 8) % 1000 / 1000.0 - 0.5)
            return math.atan2(zone.center[1] - p.y, zone.center[0] - p.x) + jitter
    return (h >> 16) % 62832 / 10000.0


def _delivery_target(p: Perception, box_id: int) -> tuple[float, float]:
    zone = min(p.delivery_zones, key=lambda z: math.hypot(z.center[0] - p.x, z.center[1] - p.y))
    inner = zone.shrunk(0.2) or zone
    h = _mix(box_id, 7)
    fx = (h & 0xFFFF) / 0xFFFF
    fy = ((h >> 16) & 0xFFFF) / 0xFFFF
    return (inner.x0 + fx * (inner.x1 - inner.x0), inner.y0 + fy * (inner.y1 - inner.y0))


def _enter(state: ControllerState, mode: Mode, **kw) -> ControllerState:
    if mode is state.mode:
        return _with(state, mode_ticks=state.mode_ticks + 1, **kw)
    return _with(state, mode=mode, mode_ticks=0, **kw)


def _finite(p: Perception) -> bool:
    return all(math.isfinite(v) for v in (p.x, p.y, p.heading, p.speed, p.v_max, p.dt)) and p.dt > 0


def decide(perception: Perception, state: ControllerState,
           params: BehaviorParams = BehaviorParams()) -> tuple[ActuationCommand, ControllerState]:
    p = perception
    if not _finite(p) or p.v_max <= 0:
        return STOP, state
    limit = min(_guarded_limit(p, params), params.cruise_speed)
    since = state.since_intervention + 1
    carrying = p.carried_box is not None

    if state.mode is Mode.AWAIT_INTERVENTION:
        if state.mode_ticks + 1 >= round(params.intervention_s / p.dt):
            resume = Mode.TRANSPORT if carrying else Mode.EXPLORE
            return (ActuationCommand(0.0, p.heading),
                    _with(state, mode=resume, mode_ticks=0, since_intervention=0,
                            resume=resume, target=None, input_ticks=0))
        return (ActuationCommand(0.0, p.heading, request_intervention=True),
                _enter(state, Mode.AWAIT_INTERVENTION, since_intervention=since))

    stuck_ticks = round(params.stuck_timeout_s / p.dt)
    if p.ticks_since_move > stuck_ticks and since > stuck_ticks:
        return (ActuationCommand(0.0, p.heading, request_intervention=True),
                _with(state, mode=Mode.AWAIT_INTERVENTION, mode_ticks=0,
                        since_intervention=since, input_ticks=0))

    input_ticks = max(0, state.input_ticks - 1)
    scatter = max(0, state.scatter - 1)
    task = state.resume if state.mode is Mode.AVOID else state.mode
    target = state.target
    if (state.mode is Mode.AVOID and not carrying
            and state.mode_ticks >= round(params.give_up_s / p.dt)):
        # jammed: drop the target and scatter for a while
        scatter = round(params.scatter_s / p.dt)
        task, target = Mode.EXPLORE, None
    if task is Mode.TRANSPORT and not carrying:
        task = Mode.EXPLORE
    if carrying and task in (Mode.EXPLORE, Mode.ACQUIRE):
        task = Mode.TRANSPORT
    base = _with(state, since_intervention=since, input_ticks=input_ticks,
                   scatter=scatter, target=target)
    cmd, nxt = _task(p, base, task, limit, params)

    if nxt.mode is Mode.DELIVER or cmd.release:
        return cmd, nxt
    vx, vy, blocking = _repulsion(p, cmd.desired_heading, params)
    if not blocking:
        return cmd, nxt
    gx, gy = math.cos(cmd.desired_heading), math.sin(cmd.desired_heading)
    # keep-right convention: rotate the push clockwise to break symmetric jams
    rx = vx * _COS_BIAS + vy * _SIN_BIAS
    ry = -vx * _SIN_BIAS + vy * _COS_BIAS
    heading = math.atan2(0.5 * gy + ry, 0.5 * gx + rx)
    avoid = ActuationCommand(min(params.avoid_speed, limit), heading,
                             request_attendee_input=cmd.request_attendee_input)
    kept = state if nxt.scatter == 0 or state.mode is not Mode.AVOID else _with(state, mode_ticks=0)
    return avoid, _enter(kept, Mode.AVOID, resume=nxt.mode, target=nxt.target,
                         since_intervention=since, input_ticks=nxt.input_ticks,
                         scatter=nxt.scatter)


_COS_BIAS = math.cos(math.pi / 6)
_SIN_BIAS = math.sin(math.pi / 6)


def _task(p: Perception, state: ControllerState, task: Mode, limit: float,
          params: BehaviorParams) -> tuple[ActuationCommand, ControllerState]:
    """Command and next state for the task layer alone (no avoidance)."""
    carrying = p.carried_box is not None
    asking = state.input_ticks > 0
    if task is Mode.DELIVER:
        if carrying:
            return (ActuationCommand(0.0, p.heading, release=True, request_attendee_input=asking),
                    _enter(state, Mode.DELIVER, resume=Mode.DELIVER))
        return (ActuationCommand(limit, p.heading + math.pi, request_attendee_input=asking),
                _enter(state, Mode.EXPLORE, target=None, resume=Mode.EXPLORE))

    if task is Mode.TRANSPORT:
        if not p.delivery_zones:
            return (ActuationCommand(0.0, p.heading, request_attendee_input=asking),
                    _enter(state, Mode.TRANSPORT, resume=Mode.TRANSPORT))
        tx, ty = _delivery_target(p, p.carried_box)
        d = math.hypot(tx - p.x, ty - p.y)
        if p.carried_feet and feet_inside(p.carried_feet, p.delivery_zones) and d < 0.15:
            return (ActuationCommand(0.0, p.heading, release=True, request_attendee_input=asking),
                    _enter(state, Mode.DELIVER, resume=Mode.DELIVER))
        return (ActuationCommand(min(limit, max(params.min_speed, d)), math.atan2(ty - p.y, tx - p.x),
                                 request_attendee_input=asking),
                _enter(state, Mode.TRANSPORT, target=p.carried_box, resume=Mode.TRANSPORT))

    candidates = [] if state.scatter else [
        b for b in p.boxes
        if not b.in_delivery and b.weight_kg < params.max_box_weight_kg
        and not _in_keepout(b.x, b.y, p, params)
    ]
    if task is Mode.ACQUIRE:
        target = next((b for b in candidates if b.id == state.target), None)
        if target is not None:
            d = math.hypot(target.x - p.x, target.y - p.y)
            heading = math.atan2(target.y - p.y, target.x - p.x)
            if d <= 0.2:
                input_ticks = state.input_ticks
                if not asking and _may_request_input(p, params):
                    asking = True
                    input_ticks = round(params.attendee_request_s / p.dt)
                return (ActuationCommand(0.0, heading, request_attendee_input=asking,
                                         pick_up=target.id),
                        _enter(state, Mode.ACQUIRE, input_ticks=input_ticks, resume=Mode.ACQUIRE))
            return (ActuationCommand(min(limit, max(params.min_speed, d)), heading,
                                     request_attendee_input=asking),
                    _enter(state, Mode.ACQUIRE, resume=Mode.ACQUIRE))

    if candidates:
        best = min(candidates, key=lambda b: (math.hypot(b.x - p.x, b.y - p.y), b.id))
        heading = math.atan2(best.y - p.y, best.x - p.x)
        return (ActuationCommand(limit, heading, request_attendee_input=asking),
                _enter(state, Mode.ACQUIRE, target=best.id, resume=Mode.ACQUIRE))
    return (ActuationCommand(limit, _wander(p, state, params), request_attendee_input=asking),
            _enter(state, Mode.EXPLORE, target=None, resume=Mode.EXPLORE))


def _in_keepout(x: float, y: float, p: Perception, params: BehaviorParams) -> bool:
    return any(math.hypot(h.x - x, h.y - y) < params.human_keepout for h in p.humans)


def _may_request_input(p: Perception, params: BehaviorParams) -> bool:
    attendees = [h for h in p.humans if h.role is Role.ATTENDEE]
    if not any(h.distance <= params.attendee_request_range for h in attendees):
        return False
    # at most one requester: defer to anyone already asking, and to any
    # lower-id neighbour that could start asking this same tick
    for n in p.neighbors:
        if n.requesting_input:
            return False
        if n.id < p.agent_id and any(
                math.hypot(n.x - h.x, n.y - h.y) <= params.attendee_request_range
                for h in attendees):
            return False
    return True
