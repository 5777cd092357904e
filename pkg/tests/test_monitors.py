import json
import math
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeros.monitors import (
    AggregateStats,
    CatalogError,
    DegradationError,
    Level,
    Limit,
    Status,
    aggregate_stats,
    audit,
    compare,
    degradation_check,
    evaluate_trace,
    load_catalog,
    monitor_collisions,
    stationary_profile,
)
from aeros.monitors import derive_failure_events
from aeros.sim import CollisionEvent, Event, Role, classify

from helpers import (
    ATTENDEE,
    CATALOG,
    FIXTURES,
    TRAINED,
    agent,
    build,
    collisions,
    constant,
    spread,
    verdict_of,
)

TRANSCRIPTION = Path(__file__).parent / "data" / "requirements_transcription.tsv"


# ------------------------------------------------------------------ catalog


def test_catalog_has_twenty_eight_requirements():
    assert len(load_catalog()) == 28


def test_catalog_matches_transcription():
    assert audit(load_catalog(), TRANSCRIPTION) == []


@pytest.mark.parametrize("mutate", [
    lambda s: replace(s, limits=(replace(s.limit, value=2),) + s.limits[1:]),
    lambda s: replace(s, text=s.text + " daily"),
    lambda s: replace(s, params={**s.params, "speed_threshold_mps": 0.6}),
])
def test_audit_catches_a_mutated_value(mutate):
    cat = list(load_catalog())
    cat[0] = mutate(cat[0])
    assert any(p.startswith(cat[0].id) for p in audit(cat, TRANSCRIPTION))


def test_audit_catches_missing_and_extra(tmp_path):
    cat = list(load_catalog())
    assert audit(cat[1:], TRANSCRIPTION) == [f"{cat[0].id}: missing from catalog"]
    extra = replace(cat[0], id="RQ9.9")
    assert "RQ9.9: not in transcription" in audit(cat + [extra], TRANSCRIPTION)


def test_catalog_rejects_duplicates_and_bad_lines(tmp_path):
    line = json.dumps({"id": "X", "category": "nope"})
    p = tmp_path / "bad.jsonl"
    p.write_text(line + "\n")
    with pytest.raises(CatalogError):
        load_catalog(p)
    p.write_text("{broken\n")
    with pytest.raises(CatalogError, match="bad.jsonl:1"):
        load_catalog(p)


# ------------------------------------------------------------------ fixture table


def test_fixture_table_covers_every_requirement():
    assert {fx.rid for fx in FIXTURES} == set(CATALOG)
    for rid in CATALOG:
        statuses = {fx.status for fx in FIXTURES if fx.rid == rid}
        assert {Status.PASS, Status.FAIL} <= statuses, rid


@pytest.mark.parametrize("fx", FIXTURES, ids=[f"{fx.rid}-{fx.label}" for fx in FIXTURES])
def test_requirement_fixture(fx):
    v = verdict_of(fx)
    assert v.status is fx.status, v
    assert math.isclose(v.measured, fx.measured, abs_tol=1e-9), v
    if v.status is Status.FAIL:
        assert v.margin <= 0


# ------------------------------------------------------------------ comparison


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_strict_bound_rejects_equality(m, t):
    ok, margin = compare(m, "<", t)
    assert ok == (m < t)
    assert not compare(t, "<", t)[0]
    assert compare(t, "<=", t)[0]
    assert margin == t - m


@given(st.floats(0, 10), st.floats(0, 10), st.floats(-1, 11))
def test_range_comparison(a, b, m):
    lo, hi = min(a, b), max(a, b)
    assert compare(m, "in", (lo, hi))[0] == (lo <= m <= hi)


def test_unknown_operator():
    with pytest.raises(ValueError):
        compare(1, "~", 2)


# ------------------------------------------------------------------ degradation


def test_nine_percent_passes_and_eleven_fails():
    assert degradation_check(100, 109, 10).status is Status.PASS
    assert degradation_check(100, 111, 10).status is Status.FAIL
    assert degradation_check(100, 110, 10).status is Status.FAIL


def test_tenth_of_a_percent_is_exact():
    # 1000 -> 1001 is exactly 0.1 %, which is not strictly below 0.1 %
    assert degradation_check(1000, 1001, 0.1).status is Status.FAIL
    assert degradation_check(10000, 10009, 0.1).status is Status.PASS


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 500))
def test_degradation_matches_integer_oracle(b, f, pct):
    # (f - b) * 100 / max(b, 1) < pct  <=>  (f - b) * 100 < pct * max(b, 1)
    want = (f - b) * 100 < pct * max(b, 1)
    v = degradation_check(b, f, pct)
    assert (v.status is Status.PASS) == want
    assert v.measured == pytest.approx(float(Fraction((f - b) * 100, max(b, 1))))


def test_zero_baseline_uses_floor():
    v = degradation_check(0, 1, 10)
    assert v.measured == 100.0 and v.failed


def _stats(**kw):
    base = dict(duration_s=100.0, dt=0.1, environment="desk", layout_seed=1)
    base.update(kw)
    return AggregateStats(**base)


def test_degradation_refuses_mismatched_pairs():
    with pytest.raises(DegradationError):
        degradation_check(_stats(), _stats(duration_s=50.0), 10)
    with pytest.raises(DegradationError):
        degradation_check(_stats(), _stats(environment="lab"), 10)
    with pytest.raises(DegradationError):
        degradation_check(_stats(), _stats(layout_seed=2), 10)
    with pytest.raises(DegradationError):
        degradation_check(_stats(), 3, 10)


def test_stationary_time_is_compared_in_ticks():
    # 0.3 s vs 0.4 s of agent time: ticks 3 -> 4, floor 1 s = 10 ticks
    v = degradation_check(_stats(stationary_time_s=0.3, stationary_ticks=3),
                          _stats(stationary_time_s=0.4, stationary_ticks=4),
                          10, "stationary_time_s")
    assert v.measured == pytest.approx(10.0) and v.failed


# ------------------------------------------------------------------ windows


@given(st.lists(st.integers(1, 999), max_size=12), st.integers(5, 40), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_windowed_count_matches_brute_force(ticks, window_ticks, limit):
    n = 1000
    trace = collisions(n, {t: 0.7 for t in ticks})
    v = monitor_collisions(trace, window_s=window_ticks * 0.1, limit=limit)
    per = {}
    for t in set(ticks):
        per[(t - 1) // window_ticks] = per.get((t - 1) // window_ticks, 0) + 1
    worst = max(per.values(), default=0)
    assert v.measured == worst
    assert v.failed == (worst >= limit)


def test_short_trace_is_inconclusive_until_it_fails():
    quiet = collisions(50, {}, day_s=100)
    assert monitor_collisions(quiet).status is Status.INCONCLUSIVE
    loud = collisions(50, {3: 0.9}, day_s=100)
    assert monitor_collisions(loud).status is Status.FAIL


def test_trailing_partial_window_is_counted():
    trace = collisions(1500, {1200: 0.9}, day_s=100)
    assert monitor_collisions(trace).failed


# ------------------------------------------------------------------ stationary


@given(st.lists(st.lists(st.booleans(), min_size=3, max_size=3), min_size=1, max_size=300))
@settings(max_examples=60, deadline=None)
def test_stationary_counts_follow_consecutive_stillness(moves):
    frames = [[agent(i, 1.5, 1.5 + 0.3 * i, moved=m) for i, m in enumerate(row)] for row in moves]
    prof = stationary_profile(build(frames))
    run = [0, 0, 0]
    for row, count in zip(moves, prof.counts):
        run = [0 if m else r + 1 for m, r in zip(row, run)]
        assert count == sum(r > 100 for r in run)
    assert prof.longest_s == pytest.approx(0.1 * _longest(moves))


def _longest(moves):
    best, run = 0, [0, 0, 0]
    for row in moves:
        run = [0 if m else r + 1 for m, r in zip(row, run)]
        best = max(best, *run)
    return best


def test_agents_in_delivery_zone_are_not_stationary():
    row = [agent(0, 3.5, 0.5, moved=False)] + spread(9)[1:]
    prof = stationary_profile(constant(200, row))
    assert max(prof.counts) == 0


# ------------------------------------------------------------------ scope and vacuity


def test_human_requirements_are_vacuous_without_humans():
    trace = constant(20, spread(10), humans=())
    vs = {v.requirement_id: v for v in evaluate_trace(CATALOG.values(), trace, faulty=False)}
    for rid in ("RQ4.1", "RQ4.2"):
        assert vs[rid].status is Status.VACUOUS and vs[rid].passed


def test_trained_only_requirements_vacuous_without_trained_humans():
    trace = constant(20, spread(10), humans=(ATTENDEE,))
    vs = {v.requirement_id: v for v in evaluate_trace(CATALOG.values(), trace, faulty=False)}
    assert vs["RQ4.1"].status is Status.VACUOUS
    assert vs["RQ4.2"].status is not Status.VACUOUS


def test_scope_selects_faulty_and_faultless_requirements():
    trace = constant(20, spread(10))
    clean = {v.requirement_id for v in evaluate_trace(CATALOG.values(), trace, faulty=False)}
    broken = {v.requirement_id for v in evaluate_trace(CATALOG.values(), trace, faulty=True)}
    assert "RQ1.1" in clean and "RQ1.1" not in broken
    assert "RQ1.4" in broken and "RQ1.4" not in clean
    scopes = {s.id: s.scope for s in CATALOG.values()}
    assert all(scopes[r] != "faulty" for r in clean)


def test_evidence_points_at_offending_ticks():
    v = monitor_collisions(collisions(2000, {7: 0.9}, day_s=100))
    assert v.failed and [e.tick for e in v.evidence] == [7]


# ------------------------------------------------------------------ failure events


def test_failure_chain_from_motor_fault_to_swarm():
    frames = []
    for t in range(200):
        frames.append([agent(i, 1.5 + 0.3 * (i % 5), 1.5 + 0.3 * (i // 5),
                             moved=not (i < 2 and t > 5)) for i in range(10)])
    fault = Event(3, "fault", ("a0",), (2.0,))
    trace = build(frames, events=[fault])
    events = derive_failure_events(trace)
    levels = [e.level for e in events]
    assert levels[0] is Level.AGENT and Level.NEIGHBOURHOOD in levels and levels[-1] is Level.SWARM
    by_id = {e.id: e for e in events}
    node = events[-1]
    chain = [node]
    while node.causal_parent:
        node = by_id[node.causal_parent]
        chain.append(node)
    assert [e.level for e in reversed(chain)] == [Level.AGENT, Level.AGENT,
                                                  Level.NEIGHBOURHOOD, Level.SWARM]
    assert "motor fault" in chain[-1].description


def test_healthy_trace_has_no_failure_events():
    assert derive_failure_events(constant(200, spread(10))) == []


def test_collision_classification():
    e = CollisionEvent(1, ("a0", "h0"), 0.51, classify(0.51))
    assert e.classification == "high"
    assert Role.TRAINED is TRAINED.role


def test_limit_is_first_listed():
    spec = CATALOG["RQ1.1"]
    assert isinstance(spec.limit, Limit) and spec.limit.op == "<"
    assert aggregate_stats(constant(5, spread(3))).high_impact_collisions == 0
