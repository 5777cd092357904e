from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

from aeros.campaign import CampaignResult, TestMatrix, generate_matrix, run_campaign
from aeros.config import CampaignConfig, Scenario, desk_campaign, load_scenario
from aeros.monitors import load_catalog
from aeros.pipeline import PipelineOutput, build_artefacts
from aeros.campaign import run_deployment_scenario

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


@dataclass
class DeskRun:
    config: CampaignConfig
    matrix: TestMatrix
    result: CampaignResult
    operational: Scenario
    pipeline: PipelineOutput
    out: Path


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory, catalog) -> DeskRun:
    """One full desk campaign: 3 environments x 3 conditions x 5 reps, 1000 s cells."""
    out = tmp_path_factory.mktemp("desk")
    cfg = desk_campaign(reps=5)
    matrix = generate_matrix(cfg.environments, cfg.faults, cfg.reps, cfg.seed, cfg.id)
    result = run_campaign(matrix, catalog, cfg, log=out / "verification_log.jsonl")
    ops = load_scenario(CONFIGS / "corridor_pileup.cfg")
    deployment = run_deployment_scenario(ops, catalog)
    po = build_artefacts(out, cfg, result, catalog, deployment, ops)
    return DeskRun(cfg, matrix, result, ops, po, out)


@pytest.fixture(scope="session")
def violator_run(tmp_path_factory, catalog):
    """Seeded-violation controller over every environment and condition, short cells."""
    cfg = desk_campaign(reps=2, duration_s=300.0, controller="no-speed-cap", id="violator")
    matrix = generate_matrix(cfg.environments, cfg.faults, cfg.reps, cfg.seed, cfg.id)
    return cfg, run_campaign(matrix, catalog, cfg)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.RESULTS:
            terminalreporter.write_line(line)
