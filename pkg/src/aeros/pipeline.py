"""Build the complete artefact set and all six arguments from one campaign."""

from __future__ import annotations

import hashlib
import json
import shutil
from collections import Counter
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from . import behavior as behavior_module
from .artefacts import (
    STAGE_OUTPUT,
    ArgumentDocument,
    ErroneousBehaviourLog,
    Registry,
    instantiate_argument,
)
from .campaign import (
    CampaignResult,
    DeploymentResult,
    matrix_record,
    validate_evaluation,
)
from .config import CampaignConfig, Scenario
from .monitors import RequirementSpec, load_data_requirements
from .sim import COMM_RANGE

PATTERN_FILES = tuple(f"stage{s}.json" for s in STAGE_OUTPUT)


def _json(obj: Any) -> str:
    def default(o: Any) -> Any:
        if hasattr(o, "value"):
            return o.value
        if isinstance(o, (set, frozenset, tuple)):
            return list(o)
        raise TypeError(type(o).__name__)

    return json.dumps(obj, indent=1, sort_keys=True, default=default, ensure_ascii=False) + "\n"


def copy_patterns(dest: Path) -> Path:
    dest.mkdir(parents=True, exist_ok=True)
    for name in PATTERN_FILES:
        src = resources.files("aeros") / "patterns" / name
        (dest / name).write_text(src.read_text(encoding="utf-8"), encoding="utf-8")
    return dest


def _catalog_text(catalog: Sequence[RequirementSpec]) -> str:
    lines = []
    for s in catalog:
        rec = {"id": s.id, "category": s.category.value, "mode": s.mode.value, "scope": s.scope,
               "monitor": s.monitor, "params": s.params, "window_s": s.window_s,
               "limits": [asdict(lim) for lim in s.limits], "text": s.text,
               "fault": None if s.fault is None else asdict(s.fault)}
        lines.append(json.dumps(rec, sort_keys=True, default=lambda o: getattr(o, "value", str(o)),
                                ensure_ascii=False))
    return "\n".join(lines) + "\n"


SYSTEM_SAFETY_REQUIREMENTS = """\
System safety requirements: swarm cloakroom
SSR1  Robots shall not cause injury to people through collision or crushing.
SSR2  Robots shall not block critical paths such as exits and walkways.
SSR3  The swarm shall operate only inside its defined environmental envelope.
SSR4  Robots shall keep safe speeds and separation near trained staff and attendees.

Hazard propagation considered: an agent fault (motor or communication) can cause
local congestion in its neighbourhood, which can grow into swarm-level blocking
of critical paths.
"""

EB_DESCRIPTION = """\
Emergent behaviour: decentralised box collection and delivery
Each robot wanders, picks up a free box it perceives, carries it to a delivery
zone and releases it there. No robot holds a global plan. Expected output: boxes
accumulate in the delivery zones at a steady rate without collisions at speed,
without robots stalling and while respecting human speed and proximity limits.
"""

ALLOCATION = {
    "SSR1": ["RQ1.1", "RQ1.2", "RQ1.3", "RQ1.4", "RQ1.5", "RQ1.6"],
    "SSR2": ["RQ2.1", "RQ2.2", "RQ2.3", "RQ2.4", "RQ2.5", "RQ2.6", "RQ2.7"],
    "SSR3": ["RQ3.1", "RQ3.2", "RQ3.3", "RQ3.4", "RQ3.5"],
    "SSR4": ["RQ4.1", "RQ4.2", "RQ4.3", "RQ4.4", "RQ4.5", "RQ4.6", "RQ4.7", "RQ4.8",
             "RQ4.9", "RQ4.10"],
}

ASSUMPTIONS = """\
Sensing and metric assumptions
- Humans are static discs and always carry working locators.
- Incline, floor and step height are envelope metadata and are not simulated as dynamics.
- Communication range is {comm} m; a communication fault silences both directions.
- A run of the desk campaign counts as one operational day unless a day length is configured.
- Rep count per condition ({reps}) is a configuration default; "representative of typical use"
  has no quantitative bar.
- RQ1.5 reads "acceleration < 4m/s", a speed unit. It is checked as an acceleration cap in
  m/s^2 and the requirement text is reported as written.
- The delivery site of RQ2.1 is taken to be the delivery zone where boxes count as delivered.
- Requesting attendee input is a boolean command flag. An agent informs an attendee (RQ4.7)
  when it raises that flag within communication range of the attendee.
- RQ1.2 and RQ1.3 bound the increase at 0.1 % where the adaptability and human-safety
  analogues use 10 %. Both are checked as written.
- Faults persist from onset to the end of the run unless a duration is configured.
- Letters J, K, T, Z and DD name no artefact and are reserved.
"""


@dataclass
class PipelineOutput:
    registry: Registry
    arguments: dict[int, ArgumentDocument]


def build_artefacts(out_dir: str | Path, config: CampaignConfig, result: CampaignResult,
                    catalog: Sequence[RequirementSpec],
                    deployment: DeploymentResult | None = None,
                    operational: Scenario | None = None) -> PipelineOutput:
    """Register A..HH under ``out_dir`` and instantiate the six arguments.

    Re-running over an existing registry is idempotent for unchanged
    content and refuses changed content.
    """
    out = Path(out_dir)
    reg = Registry(out / "registry")
    work = out / "artefacts"
    work.mkdir(parents=True, exist_ok=True)
    patterns = copy_patterns(out / "patterns")
    docs: dict[int, ArgumentDocument] = {}

    def put(letter: str, name: str, text: str) -> None:
        p = work / name
        p.write_text(text, encoding="utf-8")
        reg.register(letter, p)

    def argue(stage: int) -> None:
        doc = instantiate_argument(stage, reg, pattern_path=patterns / f"stage{stage}.json")
        docs[stage] = doc
        put(STAGE_OUTPUT[stage], f"{STAGE_OUTPUT[stage]}_argument.json", doc.to_json())
        (work / f"{STAGE_OUTPUT[stage]}_argument.txt").write_text(doc.render(), encoding="utf-8")

    envs = {e.name: e for e in config.environments}
    # stage 1
    put("A", "A_system_safety_requirements.txt", SYSTEM_SAFETY_REQUIREMENTS)
    put("B", "B_environment.json", _json({"environments": [
        {"name": e.name, "arena": asdict(e.arena), "humans": [asdict(h) for h in e.humans]}
        for e in config.environments]}))
    put("C", "C_system.json", _json({
        "n_agents": config.n_agents, "physics": asdict(config.physics),
        "n_boxes": config.n_boxes, "box_weight_kg": config.box_weight_kg,
        "controller": config.controller}))
    put("D", "D_eb_description.txt", EB_DESCRIPTION)
    put("E", "E_allocated_requirements.json", _json(ALLOCATION))
    reg.register("F", patterns / "stage1.json")
    argue(1)
    # stage 2
    put("H", "H_requirements.jsonl", _catalog_text(catalog))
    argue(2)
    # stage 3
    data_reqs = load_data_requirements()
    put("L.0", "L0_data_requirements.jsonl",
        "".join(json.dumps({"id": d.id, "kind": d.kind, "text": d.text}, sort_keys=True,
                           ensure_ascii=False) + "\n" for d in data_reqs))
    put("L.1", "L1_availability.json", _json({
        "source": "simulation only", "comm_range_m": COMM_RANGE,
        "sensing_radius_m": config.behavior.sensing_radius,
        "humans_have_locators": all(e.arena.humans_have_locators for e in config.environments),
        "environments": sorted(envs)}))
    validation = validate_evaluation(result.matrix, config.environments, catalog, config.min_reps)
    put("M", "M_justification.json", _json({
        "satisfied": list(validation.satisfied),
        "discrepancies": [asdict(d) for d in validation.discrepancies]}))
    put("N", "N_test_environment.json", _json({
        "campaign": config.id, "duration_s": config.duration_s, "dt": config.dt,
        "environments": sorted(envs), "faults": [asdict(f) for f in config.faults]}))
    metrics = [o.metrics for o in result.outcomes if o.metrics is not None]
    put("O", "O_metrics.json", _json({
        "definitions": {
            "deliveries": "boxes released with all feet inside a delivery zone",
            "delivery_rate_per_hour": "deliveries per simulated hour",
            "mean_completion_s": "mean pickup-to-release time",
            "distance_m": "total distance travelled by all agents"},
        "campaign_totals": {
            "cells": len(metrics),
            "deliveries": sum(m.deliveries for m in metrics),
            "distance_m": round(sum(m.distance_m for m in metrics), 6)}}))
    put("P", "P_verification_scenarios.json", _json({"matrix": matrix_record(result.matrix)}))
    put("Q", "Q_assumptions.txt", ASSUMPTIONS.format(comm=COMM_RANGE, reps=result.matrix.reps_per_cell))
    put("S", "S_validation.json", _json({"ok": validation.ok, "satisfied": list(validation.satisfied),
                                         "discrepancies": [asdict(d) for d in validation.discrepancies]}))
    argue(3)
    # stage 4
    params = asdict(config.behavior)
    put("U", "U_candidate.json", _json({"controller": config.controller, "params": params}))
    put("V", "V_development_log.txt",
        "Model development log\n"
        "- Finite-state controller: wander, approach, carry, avoid, await intervention.\n"
        "- Speed caps applied after every decision with a margin below each limit.\n"
        "- Avoidance and approach speeds kept high enough that a motor-faulted agent\n"
        "  still registers as moving.\n"
        "- Attendee input requests arbitrated by agent id among neighbours.\n")
    src = Path(behavior_module.__file__).read_bytes()
    put("W", "W_algorithm.json", _json({
        "controller": config.controller, "params": params,
        "source_sha256": hashlib.sha256(src).hexdigest()}))
    faultless = [o for o in result.outcomes if o.cell.fault is None and o.error is None]
    status = Counter(v.status.value for o in faultless for v in o.verdicts)
    put("Y", "Y_internal_tests.json", _json({"faultless_cells": len(faultless),
                                             "verdict_status_counts": dict(sorted(status.items()))}))
    argue(4)
    # stage 5
    records = [{"cell": o.cell.id, **v.to_record()} for o in result.outcomes for v in o.verdicts]
    records += [{"cell": p.cell_id, "baseline": p.baseline_id, **p.verdict.to_record()}
                for p in result.degradation]
    records += [{"cell": f"{env}/config", **v.to_record()}
                for env, vs in result.config_verdicts.items() for v in vs]
    put("AA", "AA_verification_results.jsonl",
        "".join(json.dumps(r, sort_keys=True, default=str) + "\n" for r in records))
    bb = work / "BB_verification_log.jsonl"
    if result.log.path is not None and result.log.path.resolve() != bb.resolve():
        shutil.copyfile(result.log.path, bb)
    else:
        bb.write_text(result.log.text(), encoding="utf-8")
    reg.register("BB", bb)
    argue(5)
    # stage 6
    ee = ErroneousBehaviourLog(work / "EE_erroneous_behaviour.jsonl")
    if not ee.entries():
        ee.append(result.erroneous)
        if deployment is not None:
            ee.append(deployment.erroneous)
    reg.register("EE", ee.path)
    put("FF", "FF_operational_scenarios.json", _json(
        {"scenarios": [] if operational is None else [operational.to_record()]}))
    put("GG", "GG_integration_results.json", _json(
        {"results": [] if deployment is None else [deployment.results.to_record()]}))
    argue(6)
    return PipelineOutput(reg, docs)
