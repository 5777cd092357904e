import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeros.sim import (
    CONTACT_TOL,
    EPS_MOVE,
    AgentState,
    ArenaConfig,
    BoxState,
    Command,
    FaultKind,
    HumanState,
    Physics,
    Rect,
    Role,
    SimError,
    WorldState,
    classify,
    contact_pairs,
    integrate,
    neighborhood,
    place_world,
    sense,
    step,
)

ZONED = ArenaConfig(delivery_zones=(Rect(3, 0, 4, 1),), deposit_zones=(Rect(0, 3, 1, 4),))
SMALL = ArenaConfig(1.6, 1.6, delivery_zones=(Rect(1.2, 0, 1.6, 0.4),),
                    deposit_zones=(Rect(0, 1.2, 0.4, 1.6),))


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def oracle_kinematics(world, commands):
    """Independent velocity-then-position update."""
    ph, dt = world.physics, world.dt
    out = {}
    for a in world.agents:
        c = commands[a.id]
        want = min(max(c.desired_speed, 0.0), ph.v_max)
        v = min(max(want, a.speed - ph.accel_max * dt), a.speed + ph.accel_max * dt)
        v = min(max(v, 0.0), ph.v_max)
        turn = ph.max_turn_rate * dt
        h = _wrap(a.heading + max(-turn, min(turn, _wrap(c.desired_heading - a.heading))))
        x = min(max(a.x + v * math.cos(h) * dt, ph.agent_radius), world.arena.width - ph.agent_radius)
        y = min(max(a.y + v * math.sin(h) * dt, ph.agent_radius), world.arena.height - ph.agent_radius)
        out[a.id] = (x, y, v, h)
    return out


def oracle_contacts(world, kin):
    """All-pairs contact set with relative speeds."""
    ph = world.physics
    bodies = [(f"a{i}", x, y, ph.agent_radius, v * math.cos(h), v * math.sin(h))
              for i, (x, y, v, h) in kin.items()]
    bodies += [(f"h{h.id}", h.x, h.y, ph.human_radius, 0.0, 0.0) for h in world.humans]
    pairs = {}
    for i in range(len(bodies)):
        for j in range(i + 1, len(bodies)):
            a, b = bodies[i], bodies[j]
            if math.hypot(a[1] - b[1], a[2] - b[2]) < a[3] + b[3] + CONTACT_TOL:
                key = tuple(sorted((a[0], b[0])))
                pairs[key] = math.hypot(a[4] - b[4], a[5] - b[5])
    return pairs


def micro_world(rng: random.Random) -> WorldState:
    n_ent = rng.randint(2, 5)
    n_h = rng.randint(0, min(2, n_ent - 1))
    humans = tuple(HumanState(i, rng.choice(list(Role)), rng.uniform(0.3, 1.3), rng.uniform(0.3, 1.3))
                   for i in range(n_h))
    agents = tuple(AgentState(i, rng.uniform(0.15, 1.45), rng.uniform(0.15, 1.45),
                              rng.uniform(-math.pi, math.pi), rng.uniform(0, 0.5))
                   for i in range(n_ent - n_h))
    return WorldState(0, 0.1, SMALL, agents, (), humans)


def run_oracle_world(seed: int) -> tuple[int, int]:
    rng = random.Random(seed)
    world = micro_world(rng)
    engine_total = oracle_total = 0
    for _ in range(rng.randint(1, 100)):
        cmds = {a.id: Command(rng.uniform(0, 0.6), rng.uniform(-math.pi, math.pi))
                for a in world.agents}
        kin = oracle_kinematics(world, cmds)
        pairs = oracle_contacts(world, kin)
        expected = {p: v for p, v in pairs.items() if p not in world.contacts}
        world, events = step(world, cmds)
        got = {e.participants: e.impact_speed for e in events if e.kind == "collision"}
        assert got.keys() == expected.keys()
        for p in got:
            assert got[p] == pytest.approx(expected[p], abs=1e-9)
        engine_total += len(got)
        oracle_total += len(expected)
    return engine_total, oracle_total


def test_collision_oracle_100_micro_worlds():
    totals = [run_oracle_world(seed) for seed in range(100)]
    assert all(e == o for e, o in totals)
    assert sum(e for e, _ in totals) > 50  # the worlds are dense enough to collide


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_collision_oracle_property(seed):
    e, o = run_oracle_world(seed)
    assert e == o


def test_integrate_matches_oracle_kinematics():
    rng = random.Random(3)
    world = micro_world(rng)
    cmds = {a.id: Command(0.4, 1.0) for a in world.agents}
    kin = oracle_kinematics(world, cmds)
    nxt = integrate(world, cmds)
    for a in nxt.agents:
        assert (a.x, a.y, a.speed) == pytest.approx(kin[a.id][:3])


@given(
    speed=st.floats(0, 0.5), heading=st.floats(-math.pi, math.pi),
    want=st.floats(-5, 5), want_h=st.floats(-10, 10),
    x=st.floats(0.15, 3.85), y=st.floats(0.15, 3.85),
)
def test_integrate_respects_caps(speed, heading, want, want_h, x, y):
    world = WorldState(0, 0.1, ArenaConfig(), (AgentState(0, x, y, heading, speed),))
    a = integrate(world, {0: Command(want, want_h)}).agents[0]
    ph = world.physics
    assert 0.0 <= a.speed <= ph.v_max
    assert abs(a.speed - speed) <= ph.accel_max * world.dt + 1e-12
    assert ph.agent_radius <= a.x <= 4 - ph.agent_radius
    assert ph.agent_radius <= a.y <= 4 - ph.agent_radius


def test_contact_is_one_episode():
    agents = (AgentState(0, 1.0, 1.0), AgentState(1, 1.25, 1.0))
    world = WorldState(0, 0.1, ArenaConfig(), agents)
    cmds = {0: Command(), 1: Command()}
    n = 0
    for _ in range(20):
        world, events = step(world, cmds)
        n += sum(e.kind == "collision" for e in events)
    assert n == 1


def test_high_impact_is_strictly_above_half_metre_per_second():
    assert classify(0.5) == "low"
    assert classify(0.5000001) == "high"


def test_head_on_impact_speed_is_relative():
    agents = (AgentState(0, 1.0, 1.0, 0.0, 0.5), AgentState(1, 1.35, 1.0, math.pi, 0.5))
    world = WorldState(0, 0.1, ArenaConfig(), agents)
    _, events = step(world, {0: Command(0.5, 0.0), 1: Command(0.5, math.pi)})
    (e,) = [e for e in events if e.kind == "collision"]
    assert e.impact_speed == pytest.approx(1.0)
    assert e.classification == "high"


def test_resolve_pushes_agents_apart_and_humans_stay():
    agents = (AgentState(0, 1.0, 1.0),)
    humans = (HumanState(0, Role.TRAINED, 1.2, 1.0),)
    world, _ = step(WorldState(0, 0.1, ArenaConfig(), agents, (), humans), {0: Command()})
    a = world.agents[0]
    assert world.humans[0].x == 1.2
    assert math.hypot(a.x - 1.2, a.y - 1.0) >= 0.4 - 1e-9


def test_movement_epsilon_sets_last_move_tick():
    world = WorldState(0, 0.1, ArenaConfig(), (AgentState(0, 2.0, 2.0, 0.0, 0.09),))
    world, _ = step(world, {0: Command(0.09, 0.0)})  # 0.009 m: below epsilon
    assert world.agents[0].last_move_tick == 0
    world, _ = step(world, {0: Command(0.2, 0.0)})
    assert world.agents[0].x - 2.0 > EPS_MOVE
    assert world.agents[0].last_move_tick == 2


def test_comm_fault_severs_both_directions():
    agents = (AgentState(0, 1, 1), AgentState(1, 2, 2, active_faults=frozenset({FaultKind.FULL_COMMUNICATION})),
              AgentState(2, 3, 3))
    world = WorldState(0, 0.1, ArenaConfig(), agents)
    assert neighborhood(world, 0) == [2]
    assert neighborhood(world, 1) == []


def test_neighbourhood_range_is_inclusive_five_metres():
    agents = (AgentState(0, 1, 1), AgentState(1, 6, 1), AgentState(2, 6.01, 1.1))
    world = WorldState(0, 0.1, ArenaConfig(10, 10), agents)
    assert neighborhood(world, 0) == [1]


def test_sensing_is_local():
    """An agent's view ignores anything beyond radio and sensing range."""
    arena = ArenaConfig(20, 20)
    near = (AgentState(0, 2, 2), AgentState(1, 3, 2))
    a = WorldState(0, 0.1, arena, near + (AgentState(2, 15, 15),))
    b = WorldState(0, 0.1, arena, near + (AgentState(2, 18, 12, 1.0, 0.3),))
    assert sense(a, 0) == sense(b, 0)
    assert sense(a, 0) != sense(WorldState(0, 0.1, arena, near + (AgentState(2, 4, 4),)), 0)


def test_human_locator_range():
    humans = (HumanState(0, Role.TRAINED, 6.5, 2.0), HumanState(1, Role.ATTENDEE, 8.0, 2.0))
    world = WorldState(0, 0.1, ArenaConfig(10, 10), (AgentState(0, 2, 2),), (), humans)
    seen = sense(world, 0).humans
    assert [h.id for h in seen] == [0]
    assert seen[0].distance == pytest.approx(4.5)


def test_sense_unknown_agent():
    with pytest.raises(SimError):
        sense(WorldState(0, 0.1, ArenaConfig(), ()), 3)


def test_pickup_release_and_delivery():
    box = BoxState(0, 3.5, 0.5)
    world = WorldState(0, 0.1, ZONED, (AgentState(0, 3.5, 0.5),), (box,))
    world, ev = step(world, {0: Command(pick_up=0)})
    assert [e.kind for e in ev] == ["pickup"]
    assert world.boxes[0].carried_by == 0
    world, ev = step(world, {0: Command(release=True)})
    assert [e.kind for e in ev] == ["release", "delivery"]


def test_release_outside_zone_is_not_delivery():
    world = WorldState(0, 0.1, ZONED, (AgentState(0, 2, 2, carried_box=0),),
                       (BoxState(0, 2, 2, carried_by=0),))
    _, ev = step(world, {0: Command(release=True)})
    assert [e.kind for e in ev] == ["release"]


def test_box_must_have_four_feet():
    with pytest.raises(SimError):
        BoxState(0, 1, 1, foot_offsets=((0, 0),) * 3)


def test_acceleration_ceiling():
    with pytest.raises(SimError):
        Physics(accel_max=4.5).validate()
    Physics(accel_max=4.0).validate()


def test_place_world_is_seeded():
    a = place_world(ZONED, 10, 20, (), seed=4)
    b = place_world(ZONED, 10, 20, (), seed=4)
    c = place_world(ZONED, 10, 20, (), seed=5)
    assert a == b
    assert a.agents != c.agents
    assert len(a.boxes) == 20


def test_place_world_rejects_overcrowding():
    with pytest.raises(SimError):
        place_world(ArenaConfig(1, 1, deposit_zones=(Rect(0, 0, 1, 1),)), 30, 0, (), seed=1)


def test_place_world_requires_locators_with_humans():
    arena = ArenaConfig(humans_have_locators=False)
    with pytest.raises(SimError):
        place_world(arena, 2, 0, (HumanState(0, Role.TRAINED, 0, 0),), seed=1)


def test_grid_contacts_match_all_pairs_for_crowds():
    rng = random.Random(11)
    agents = tuple(AgentState(i, rng.uniform(0.15, 3.85), rng.uniform(0.15, 3.85)) for i in range(60))
    world = WorldState(0, 0.1, ArenaConfig(), agents)
    kin = {a.id: (a.x, a.y, 0.0, 0.0) for a in agents}
    assert contact_pairs(world).keys() == oracle_contacts(world, kin).keys()
