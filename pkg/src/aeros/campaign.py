"""Test matrices, campaign execution, verification log, deployment runs.

A matrix is the cross product environments x ({faultless} + fault specs) x
reps. Each cell has its own seed (used for fault assignment) and a layout
seed shared by every cell of the same environment and repetition, so a
faulty cell and its faultless baseline start from the same world and
differ only in the injected fault.
"""

from __future__ import annotations

import hashlib
import json
import math
import traceback
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from . import __version__
from .artefacts import ErroneousBehaviourEntry
from .config import CampaignConfig, Environment, Scenario
from .faults import FaultSpec
from .monitors import (
    AggregateStats,
    MonitorVerdict,
    RequirementSpec,
    Status,
    aggregate_stats,
    catalog_digest,
    degradation_check,
    derive_failure_events,
    evaluate_trace,
    load_data_requirements,
    monitor_environment,
    monitor_weight_envelope,
    requirement_sort_key,
)
from .runner import run_scenario
from .sim import Floor
from .trace import Trace

MIN_REPS = 5


# ------------------------------------------------------------------ matrix


def derive_seed(*parts: Any) -> int:
    """Stable 63-bit seed from arbitrary labels."""
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:8], "big") >> 1


def fault_label(spec: FaultSpec | None) -> str:
    if spec is None:
        return "none"
    return f"{spec.kind.value}@{spec.fraction:g}"


@dataclass(frozen=True)
class Cell:
    id: str
    environment: str
    fault: FaultSpec | None
    rep: int
    seed: int
    layout_seed: int

    @property
    def faulty(self) -> bool:
        return self.fault is not None


@dataclass(frozen=True)
class TestMatrix:
    __test__ = False  # not a pytest class

    id: str
    cells: tuple[Cell, ...]
    environments: tuple[str, ...]
    reps_per_cell: int

    def __post_init__(self) -> None:
        seeds = [c.seed for c in self.cells]
        if len(set(seeds)) != len(seeds):
            raise ValueError("cell seeds must be pairwise distinct")
        ids = [c.id for c in self.cells]
        if len(set(ids)) != len(ids):
            raise ValueError("cell ids must be unique")

    def baseline_for(self, cell: Cell) -> Cell | None:
        """Faultless cell with the same environment and layout seed."""
        for c in self.cells:
            if (c.fault is None and c.environment == cell.environment
                    and c.layout_seed == cell.layout_seed):
                return c
        return None

    def per_environment(self) -> Counter:
        return Counter(c.environment for c in self.cells)


def generate_matrix(environments: Sequence[Environment | str], fault_specs: Sequence[FaultSpec],
                    reps: int, seed: int = 0, matrix_id: str = "matrix") -> TestMatrix:
    """environments x ({faultless} + fault_specs) x reps, balanced by construction."""
    names = [e if isinstance(e, str) else e.name for e in environments]
    if not names:
        raise ValueError("at least one environment is required")
    if len(set(names)) != len(names):
        raise ValueError("environment names must be unique")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cells = []
    for env in names:
        for rep in range(reps):
            layout = derive_seed(matrix_id, seed, "layout", env, rep)
            for spec in (None, *fault_specs):
                cid = f"{env}/{fault_label(spec)}/r{rep:02d}"
                cells.append(Cell(cid, env, spec, rep, derive_seed(matrix_id, seed, "cell", cid),
                                  layout))
    return TestMatrix(matrix_id, tuple(cells), tuple(names), reps)


def matrix_record(matrix: TestMatrix) -> dict[str, Any]:
    return {
        "id": matrix.id,
        "environments": list(matrix.environments),
        "reps_per_cell": matrix.reps_per_cell,
        "cells": [{
            "id": c.id, "environment": c.environment, "rep": c.rep, "seed": c.seed,
            "layout_seed": c.layout_seed,
            "fault": None if c.fault is None else {
                "kind": c.fault.kind.value, "fraction": c.fault.fraction,
                "onset_tick": c.fault.onset_tick, "duration": c.fault.duration},
        } for c in matrix.cells],
    }


def matrix_from_record(rec: Mapping[str, Any]) -> TestMatrix:
    cells = []
    for c in rec["cells"]:
        f = c.get("fault")
        spec = None if f is None else FaultSpec(f["kind"], f["fraction"], f.get("onset_tick", 0),
                                                f.get("duration"))
        cells.append(Cell(c["id"], c["environment"], spec, c["rep"], c["seed"], c["layout_seed"]))
    return TestMatrix(rec["id"], tuple(cells), tuple(rec["environments"]), rec["reps_per_cell"])


# ------------------------------------------------------------------ validation


@dataclass(frozen=True)
class Discrepancy:
    requirement: str
    detail: str
    justification: str


@dataclass(frozen=True)
class EvaluationValidationResult:
    matrix_id: str
    satisfied: tuple[str, ...]
    discrepancies: tuple[Discrepancy, ...]

    @property
    def ok(self) -> bool:
        return not self.discrepancies

    def flagged(self, requirement: str) -> bool:
        return any(d.requirement == requirement for d in self.discrepancies)


def validate_evaluation(matrix: TestMatrix, environments: Sequence[Environment],
                        catalog: Iterable[RequirementSpec] = (),
                        min_reps: int = MIN_REPS,
                        justifications: Mapping[str, str] | None = None
                        ) -> EvaluationValidationResult:
    """Check a matrix against the relevance/completeness/accuracy/balance rules.

    Discrepancies are results, each with a justification: the caller's
    override when given, otherwise a statement of what the gap means for
    the evidence.
    """
    just = dict(justifications or {})
    envs = {e.name: e for e in environments}
    used = [envs[n] for n in matrix.environments if n in envs]
    found: dict[str, list[str]] = {}

    def flag(rid: str, detail: str) -> None:
        found.setdefault(rid, []).append(detail)

    for name in matrix.environments:
        if name not in envs:
            flag("RQ5.1", f"environment {name!r} has no configuration to check")
    for e in used:
        if not 0.0 <= e.arena.incline_deg <= 20.0:
            flag("RQ5.1", f"environment {e.name!r} incline {e.arena.incline_deg:g} deg outside 0-20")
        if e.arena.floor is not Floor.DRY:
            flag("RQ5.2", f"environment {e.name!r} floor is {e.arena.floor.value}")

    kinds = {c.fault.kind for c in matrix.cells if c.fault is not None}
    if not any(k.value == "FullCommunication" for k in kinds):
        flag("RQ6.1", "no cell injects full communication faults")
    reps = Counter((c.environment, fault_label(c.fault)) for c in matrix.cells)
    low = sorted(k for k, n in reps.items() if n < min_reps)
    if low:
        flag("RQ6.2", f"{len(low)} condition(s) repeated fewer than {min_reps} times, "
                      f"e.g. {low[0][0]}/{low[0][1]} x{reps[low[0]]}")
    if len(set(matrix.environments)) < 2:
        flag("RQ6.3", "only one test environment")

    needed = {s.fault.kind for s in catalog if s.fault is not None}
    for k in sorted(needed - kinds, key=lambda k: k.value):
        flag("RQ8.1", f"no cell exercises {k.value}, named by a degradation requirement")
    modes = {fault_label(c.fault) for c in matrix.cells}
    for env in matrix.environments:
        have = {fault_label(c.fault) for c in matrix.cells if c.environment == env}
        for m in sorted(modes - have):
            flag("RQ8.1", f"environment {env!r} never runs condition {m}")
    if len(set(reps.values())) > 1:
        flag("RQ8.1", "conditions are repeated unequally: "
                      + ", ".join(f"{e}/{m} x{n}" for (e, m), n in sorted(reps.items())))
    per_env = Counter({n: 0 for n in matrix.environments})
    per_env.update(c.environment for c in matrix.cells)
    if len(set(per_env.values())) > 1:
        flag("RQ8.2", "unequal cells per environment: "
                      + ", ".join(f"{e}={n}" for e, n in sorted(per_env.items())))

    default_just = {
        "RQ5.1": "results from these environments fall outside the incline envelope and cannot "
                 "evidence it",
        "RQ5.2": "results from non-dry environments fall outside the operating envelope",
        "RQ6.1": "communication-fault requirements stay unverified until such cells are added",
        "RQ6.2": "too few repetitions to treat the results as representative of typical use",
        "RQ6.3": "a single environment gives no evidence of environmental variety",
        "RQ8.1": "unrepresented failure modes leave their degradation requirements unverified",
        "RQ8.2": "unequal repetition biases pooled results toward the larger environments",
    }
    discrepancies = tuple(
        Discrepancy(rid, d, just.get(rid) or default_just[rid])
        for rid in sorted(found, key=requirement_sort_key) for d in found[rid]
    )
    all_ids = [r.id for r in load_data_requirements()]
    satisfied = tuple(r for r in all_ids if r not in found)
    return EvaluationValidationResult(matrix.id, satisfied, discrepancies)


# ------------------------------------------------------------------ metrics


@dataclass(frozen=True)
class PerformanceMetrics:
    deliveries: int
    delivery_rate_per_hour: float
    mean_completion_s: float
    distance_m: float
    released_outside: int = 0


def _feet_inside(x: float, y: float, feet, zones) -> bool:
    return any(all(z.contains(x + dx, y + dy) for dx, dy in feet) for z in zones)


def performance_metrics(trace: Trace) -> PerformanceMetrics:
    """Deliveries per hour, mean pickup-to-delivery time and distance travelled.

    A release counts as a delivery only when all four box feet lie inside a
    delivery zone and no agent carries the box in the following frame.
    """
    frame_at = {f.tick: i for i, f in enumerate(trace.frames)}
    zones = trace.arena.delivery_zones
    picked: dict[str, int] = {}
    done = 0
    outside = 0
    times = []
    for e in sorted((e for e in trace.events if e.kind in ("pickup", "release")),
                    key=lambda e: (e.tick, e.kind != "pickup")):
        box = e.entities[1]
        if e.kind == "pickup":
            picked[box] = e.tick
            continue
        x, y = e.payload[0], e.payload[1]
        if not _feet_inside(x, y, trace.box_feet, zones):
            outside += 1
            continue
        i = frame_at.get(e.tick)
        nxt = trace.frames[i + 1] if i is not None and i + 1 < len(trace.frames) else None
        bid = int(box[1:])
        if nxt is not None and any(a.carried == bid for a in nxt.agents):
            continue
        done += 1
        if box in picked:
            times.append((e.tick - picked.pop(box)) * trace.dt)
    dist = 0.0
    prev: dict[int, tuple[float, float]] = {}
    for fr in trace.frames:
        for a in fr.agents:
            if a.id in prev:
                px, py = prev[a.id]
                dist += math.hypot(a.x - px, a.y - py)
            prev[a.id] = (a.x, a.y)
    hours = trace.duration_s / 3600.0
    return PerformanceMetrics(
        deliveries=done,
        delivery_rate_per_hour=done / hours if hours > 0 else 0.0,
        mean_completion_s=sum(times) / len(times) if times else math.nan,
        distance_m=dist,
        released_outside=outside,
    )


# ------------------------------------------------------------------ log


def config_digest(scenario: Scenario) -> str:
    text = json.dumps(scenario.to_record(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class VerificationLogEntry:
    """One line of the verification log.

    ``kind`` is ``cell`` for a simulated trial, ``degradation`` for a
    faulty/baseline pairing and ``config`` for per-environment envelope
    checks.
    """

    kind: str
    scenario_id: str
    config_digest: str
    seed: int
    verdicts: tuple[MonitorVerdict, ...]
    metrics: dict[str, Any] = field(default_factory=dict)
    timestamp: str = ""
    environment: str = ""
    layout_seed: int | None = None
    fault: str = "none"
    baseline: str | None = None
    trace_digest: str | None = None

    def to_record(self) -> dict[str, Any]:
        return {
            "type": "entry",
            "kind": self.kind,
            "scenario_id": self.scenario_id,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "layout_seed": self.layout_seed,
            "environment": self.environment,
            "fault": self.fault,
            "baseline": self.baseline,
            "trace_digest": self.trace_digest,
            "verdicts": [v.to_record() for v in self.verdicts],
            "metrics": self.metrics,
            "timestamp": self.timestamp,
        }


def _dump(rec: Mapping[str, Any]) -> str:
    def default(o: Any) -> Any:
        if isinstance(o, float):
            return str(o)
        raise TypeError(type(o))

    return json.dumps(_finite_json(rec), sort_keys=True, separators=(",", ":"), default=default)


def _finite_json(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_json(v) for v in obj]
    return obj


class VerificationLog:
    """Append-only JSONL log with a header line.

    Opening an existing file checks its header and then only appends.
    """

    def __init__(self, path: str | Path | None = None, header: Mapping[str, Any] | None = None):
        self.path = None if path is None else Path(path)
        self.header = dict(header or {})
        self.header.setdefault("type", "header")
        self.header.setdefault("tool", "aeros-harness")
        self.header.setdefault("tool_version", __version__)
        self.entries: list[VerificationLogEntry] = []
        self._lines: list[str] = [_dump(self.header)]
        if self.path is not None:
            if self.path.exists() and self.path.stat().st_size > 0:
                first = self.path.read_text(encoding="utf-8").splitlines()[0]
                if json.loads(first).get("type") != "header":
                    raise ValueError(f"{self.path} is not a verification log")
                self._lines = self.path.read_text(encoding="utf-8").splitlines()
            else:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self.path.write_text(self._lines[0] + "\n", encoding="utf-8")

    def append(self, entry: VerificationLogEntry) -> None:
        line = _dump(entry.to_record())
        self.entries.append(entry)
        self._lines.append(line)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def text(self) -> str:
        return "\n".join(self._lines) + "\n"


def read_log(path: str | Path) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path} is empty")
    header = json.loads(lines[0])
    if header.get("type") != "header":
        raise ValueError(f"{path} has no log header")
    return header, [json.loads(x) for x in lines[1:] if x.strip()]


# ------------------------------------------------------------------ running


@dataclass(frozen=True)
class CellOutcome:
    cell: Cell
    scenario: Scenario
    verdicts: tuple[MonitorVerdict, ...] = ()
    stats: AggregateStats | None = None
    metrics: PerformanceMetrics | None = None
    trace_digest: str | None = None
    error: str | None = None


@dataclass(frozen=True)
class PairedVerdict:
    requirement_id: str
    cell_id: str
    baseline_id: str | None
    layout_seed: int
    verdict: MonitorVerdict


@dataclass
class CampaignResult:
    matrix: TestMatrix
    log: VerificationLog
    outcomes: list[CellOutcome]
    degradation: list[PairedVerdict]
    config_verdicts: dict[str, list[MonitorVerdict]]
    erroneous: list[ErroneousBehaviourEntry]

    def verdicts(self) -> list[MonitorVerdict]:
        out = [v for o in self.outcomes for v in o.verdicts]
        out += [p.verdict for p in self.degradation]
        out += [v for vs in self.config_verdicts.values() for v in vs]
        return out

    @property
    def failures(self) -> list[MonitorVerdict]:
        return [v for v in self.verdicts() if v.failed]


def cell_scenario(config: CampaignConfig, env: Environment, cell: Cell) -> Scenario:
    faults = () if cell.fault is None else (cell.fault.with_seed(cell.seed),)
    return config.scenario(env, cell.layout_seed, faults, scenario_id=cell.id)


def _run_cell(args: tuple) -> CellOutcome:
    cell, scenario, catalog, trace_dir = args
    try:
        if trace_dir is not None:
            path = Path(trace_dir) / (cell.id.replace("/", "__") + ".trace")
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", encoding="utf-8", newline="\n") as fh:
                res = run_scenario(scenario, sink=fh)
        else:
            res = run_scenario(scenario)
        verdicts = evaluate_trace(catalog, res.trace, faulty=cell.faulty, include_config=False)
        stats = aggregate_stats(res.trace, cell.environment, cell.layout_seed)
        return CellOutcome(cell, scenario, tuple(verdicts), stats,
                           performance_metrics(res.trace), res.digest)
    except Exception as exc:  # a crashed trial is a result, not an abort
        tb = traceback.format_exc(limit=3).strip().splitlines()
        return CellOutcome(cell, scenario, error=f"{type(exc).__name__}: {exc} | {tb[-1]}")


def config_checks(config: CampaignConfig, env: Environment) -> list[MonitorVerdict]:
    """RQ1.5, RQ1.6 and RQ3.x evaluated from configuration alone."""
    out = monitor_weight_envelope(config.physics.agent_mass_kg, config.physics.accel_max,
                                  [config.box_weight_kg] * config.n_boxes)
    out.update(monitor_environment(None, env.arena, config.n_agents, config.n_boxes))
    return [out[k] for k in sorted(out, key=requirement_sort_key)]


def run_campaign(matrix: TestMatrix, catalog: Sequence[RequirementSpec], config: CampaignConfig,
                 log: VerificationLog | str | Path | None = None, workers: int = 1,
                 trace_dir: str | Path | None = None,
                 clock: Callable[[], str] = _now,
                 progress: Callable[[CellOutcome], None] | None = None) -> CampaignResult:
    """Simulate every cell, evaluate monitors and pair degradation verdicts.

    Log order is canonical (matrix order), independent of worker timing.
    """
    envs = {e.name: e for e in config.environments}
    missing = [n for n in matrix.environments if n not in envs]
    if missing:
        raise ValueError(f"matrix names unknown environment(s) {missing}")
    if not isinstance(log, VerificationLog):
        log = VerificationLog(log, {
            "campaign": config.id, "matrix": matrix.id, "catalog_digest": catalog_digest(),
            "controller": config.controller, "duration_s": config.duration_s,
        })
    jobs = [(c, cell_scenario(config, envs[c.environment], c), tuple(catalog),
             None if trace_dir is None else str(trace_dir)) for c in matrix.cells]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, jobs))
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_run_cell(job))
            if progress is not None:
                progress(outcomes[-1])

    erroneous: list[ErroneousBehaviourEntry] = []
    by_id = {o.cell.id: o for o in outcomes}
    for o in outcomes:
        if o.error is not None:
            erroneous.append(ErroneousBehaviourEntry(
                o.cell.id, f"trial crashed: {o.error}", anticipated=False,
                requirements=(), evidence=(f"cell:{o.cell.id}",)))
            log.append(VerificationLogEntry(
                "crash", o.cell.id, config_digest(o.scenario), o.cell.seed, (),
                {"error": o.error}, clock(), o.cell.environment, o.cell.layout_seed,
                fault_label(o.cell.fault)))
            continue
        log.append(VerificationLogEntry(
            "cell", o.cell.id, config_digest(o.scenario), o.cell.seed, o.verdicts,
            _metrics_record(o.metrics), clock(), o.cell.environment, o.cell.layout_seed,
            fault_label(o.cell.fault), trace_digest=o.trace_digest))

    specs = [s for s in catalog if s.monitor == "degradation"]
    paired: list[PairedVerdict] = []
    for o in outcomes:
        if o.cell.fault is None:
            continue
        base_cell = matrix.baseline_for(o.cell)
        base = by_id.get(base_cell.id) if base_cell is not None else None
        for s in sorted(specs, key=lambda s: requirement_sort_key(s.id)):
            if s.fault is None or s.fault.kind is not o.cell.fault.kind:
                continue
            stat = s.params["stat"]
            if base is None or base.stats is None or o.stats is None:
                v = MonitorVerdict(s.id, Status.INCONCLUSIVE, math.nan, float(s.limit.value), "<",
                                   math.nan, (), "no seed-matched baseline result")
            else:
                v = degradation_check(base.stats, o.stats, float(s.limit.value), stat, s.id)
            paired.append(PairedVerdict(s.id, o.cell.id, None if base_cell is None else base_cell.id,
                                        o.cell.layout_seed, v))
    for p in paired:
        o = by_id[p.cell_id]
        log.append(VerificationLogEntry(
            "degradation", p.cell_id, config_digest(o.scenario), o.cell.seed, (p.verdict,), {},
            clock(), o.cell.environment, p.layout_seed, fault_label(o.cell.fault),
            baseline=p.baseline_id))

    config_verdicts: dict[str, list[MonitorVerdict]] = {}
    wanted = {s.id for s in catalog if s.scope == "config"}
    for name in matrix.environments:
        vs = [v for v in config_checks(config, envs[name]) if v.requirement_id in wanted]
        config_verdicts[name] = vs
        rec = {"environment": name, "n_agents": config.n_agents, "n_boxes": config.n_boxes}
        digest = hashlib.sha256(_dump(rec).encode()).hexdigest()
        log.append(VerificationLogEntry("config", f"{name}/config", digest, 0, tuple(vs), {},
                                        clock(), name))
    return CampaignResult(matrix, log, outcomes, paired, config_verdicts, erroneous)


def _metrics_record(m: PerformanceMetrics | None) -> dict[str, Any]:
    if m is None:
        return {}
    return {"deliveries": m.deliveries, "delivery_rate_per_hour": m.delivery_rate_per_hour,
            "mean_completion_s": m.mean_completion_s, "distance_m": round(m.distance_m, 6),
            "released_outside": m.released_outside}


# ------------------------------------------------------------------ deployment


@dataclass(frozen=True)
class IntegrationResults:
    """Integration testing record for one operational scenario."""

    scenario_id: str
    aborted: bool
    simulated_s: float
    deployment_grade: bool
    verdicts: tuple[MonitorVerdict, ...]
    metrics: PerformanceMetrics
    trace_digest: str

    @property
    def violations(self) -> tuple[MonitorVerdict, ...]:
        return tuple(v for v in self.verdicts if v.failed)

    def to_record(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "status": "aborted" if self.aborted else "completed",
            "simulated_s": self.simulated_s,
            "deployment_grade": self.deployment_grade,
            "violations": len(self.violations),
            "verdicts": [v.to_record() for v in self.verdicts],
            "metrics": _metrics_record(self.metrics),
            "trace_digest": self.trace_digest,
        }


@dataclass(frozen=True)
class DeploymentResult:
    results: IntegrationResults
    erroneous: tuple[ErroneousBehaviourEntry, ...]
    trace: Trace


def run_deployment_scenario(scenario: Scenario, catalog: Sequence[RequirementSpec],
                            sink=None) -> DeploymentResult:
    """Run one operational scenario and compare what happened with what was expected.

    Every failing requirement becomes an erroneous-behaviour entry, marked
    anticipated when the scenario listed it. Anticipated items that did not
    occur are logged too, so the gap is visible both ways. An emergency stop
    ends the run early; the results are then partial and marked aborted.
    """
    res = run_scenario(scenario, sink=sink)
    trace = res.trace
    verdicts = list(evaluate_trace(catalog, trace, include_config=True))
    grade = (bool(trace.frames and trace.frames[0].humans)
             and scenario.duration_s >= scenario.day_s and scenario.n_agents >= 10)
    gg = IntegrationResults(scenario.id, res.aborted, trace.duration_s, grade, tuple(verdicts),
                            performance_metrics(trace), res.digest)
    anticipated = set(scenario.anticipated)
    entries: list[ErroneousBehaviourEntry] = []
    for v in verdicts:
        if not v.failed:
            continue
        entries.append(ErroneousBehaviourEntry(
            scenario.id,
            f"{v.requirement_id} violated in operation: measured {v.measured:g} "
            f"against {v.comparison} {v.threshold}; {v.note}",
            anticipated=v.requirement_id in anticipated,
            requirements=(v.requirement_id,),
            evidence=tuple(str(e) for e in v.evidence[:20]),
        ))
    failed = {v.requirement_id for v in verdicts if v.failed}
    for rid in sorted(anticipated - failed, key=requirement_sort_key):
        entries.append(ErroneousBehaviourEntry(
            scenario.id, f"{rid}: anticipated gap not observed in this run",
            anticipated=True, requirements=(rid,), evidence=()))
    chain = derive_failure_events(trace)
    swarm = [e for e in chain if e.level.value == "swarm"]
    if swarm:
        entries.append(ErroneousBehaviourEntry(
            scenario.id, f"swarm-level failure: {swarm[0].description}",
            anticipated="RQ2.1" in anticipated, requirements=("RQ2.1",),
            evidence=tuple(f"{e.id}:{e.level.value}:t{e.tick}:{e.description}" for e in chain[:20])))
    if res.aborted:
        entries.append(ErroneousBehaviourEntry(
            scenario.id, f"emergency stop at {trace.duration_s:g} s; results are partial",
            anticipated=False, requirements=(), evidence=("estop",)))
    return DeploymentResult(gg, tuple(entries), trace)
