"""Command-line entry point.

Exit codes: 0 when every non-vacuous verdict passes, 1 when at least one
fails, 2 for configuration or usage errors. All outputs land under the
output directory (``--out``, else ``$AEROS_OUT``, else ``./aeros-out``).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .artefacts import (
    STAGE_OUTPUT,
    ArtefactError,
    ErroneousBehaviourLog,
    Registry,
    instantiate_argument,
    trace as trace_requirement,
)
from .campaign import (
    generate_matrix,
    matrix_from_record,
    matrix_record,
    read_log,
    run_campaign,
    run_deployment_scenario,
    validate_evaluation,
)
from .config import DEFAULT_DAY_S, CampaignConfig, ConfigError, Scenario, load_campaign, load_scenario
from .monitors import (
    CatalogError,
    MonitorVerdict,
    Status,
    evaluate_trace,
    load_catalog,
    requirement_sort_key,
)
from .pipeline import build_artefacts
from .runner import run_scenario

OUT_ENV = "AEROS_OUT"
OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    configs: list[str]
    seeds: list[int]
    out: str
    tool_version: str = __version__
    outputs: dict[str, str] = field(default_factory=dict)  # relative path -> sha256

    def add(self, path: Path) -> None:
        rel = str(path.resolve().relative_to(Path(self.out).resolve()))
        self.outputs[rel] = hashlib.sha256(path.read_bytes()).hexdigest()

    def write(self) -> Path:
        rec = asdict(self)
        body = json.dumps(rec, sort_keys=True)
        rec["digest"] = hashlib.sha256(body.encode()).hexdigest()
        path = Path(self.out) / f"manifest.{self.command.replace(' ', '-')}.json"
        path.write_text(json.dumps(rec, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "aeros-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _catalog(args: argparse.Namespace):
    return load_catalog(args.catalog) if getattr(args, "catalog", None) else load_catalog()


def _failed(verdicts: Sequence[MonitorVerdict]) -> bool:
    return any(v.failed for v in verdicts)


def _summary(verdicts: Sequence[MonitorVerdict]) -> str:
    c = Counter(v.status.value for v in verdicts)
    return ", ".join(f"{k} {c.get(k, 0)}" for k in ("pass", "fail", "vacuous", "inconclusive"))


def _write(path: Path, text: str, manifest: RunManifest) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    manifest.add(path)
    return path


def _scenario_overrides(sc: Scenario, args: argparse.Namespace) -> Scenario:
    kw: dict[str, Any] = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.duration is not None:
        kw["duration_s"] = args.duration
    if args.agents is not None:
        kw["n_agents"] = args.agents
    return replace(sc, **kw) if kw else sc


def _campaign_overrides(cfg: CampaignConfig, args: argparse.Namespace) -> CampaignConfig:
    kw: dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        kw["duration_s"] = args.duration
    if getattr(args, "agents", None) is not None:
        kw["n_agents"] = args.agents
    if getattr(args, "long_run", False):
        kw["duration_s"] = cfg.day_s or DEFAULT_DAY_S
        kw["day_s"] = cfg.day_s or DEFAULT_DAY_S
    return replace(cfg, **kw) if kw else cfg


# ------------------------------------------------------------------ commands


def cmd_simulate(args: argparse.Namespace) -> int:
    sc = _scenario_overrides(load_scenario(args.scenario), args)
    catalog = _catalog(args)
    out = _out_dir(args)
    m = RunManifest("simulate", [args.scenario], [sc.seed], str(out))
    path = out / f"{sc.id}.s{sc.seed}.trace"
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        res = run_scenario(sc, sink=fh)
    m.add(path)
    verdicts = evaluate_trace(catalog, res.trace, faulty=bool(sc.faults), include_config=True)
    _write(out / f"{sc.id}.s{sc.seed}.verdicts.jsonl",
           "".join(json.dumps(v.to_record(), sort_keys=True, default=str) + "\n" for v in verdicts), m)
    m.write()
    print(f"trace {path} sha256 {res.digest}")
    if res.aborted:
        print(f"aborted at {res.trace.duration_s:g} s")
    for v in verdicts:
        if v.status is not Status.PASS:
            print(f"  {v.requirement_id} {v.status.value}: measured {v.measured:g} "
                  f"{v.comparison} {v.threshold} {v.note}".rstrip())
    print(_summary(verdicts))
    return FAILED if _failed(verdicts) else OK


def _matrix_for(cfg: CampaignConfig):
    return generate_matrix(cfg.environments, cfg.faults, cfg.reps, cfg.seed, cfg.id)


def cmd_campaign_gen(args: argparse.Namespace) -> int:
    cfg = _campaign_overrides(load_campaign(args.config), args)
    out = _out_dir(args)
    m = RunManifest("campaign gen", [args.config], [cfg.seed], str(out))
    matrix = _matrix_for(cfg)
    path = _write(out / "matrix.json", json.dumps(matrix_record(matrix), indent=1) + "\n", m)
    m.write()
    print(f"{len(matrix.cells)} cells -> {path}")
    return OK


def _print_validation(res) -> None:
    for rid in res.satisfied:
        print(f"  {rid} satisfied")
    for d in res.discrepancies:
        print(f"  {d.requirement} DISCREPANCY: {d.detail} (justification: {d.justification})")


def cmd_campaign_validate(args: argparse.Namespace) -> int:
    cfg = _campaign_overrides(load_campaign(args.config), args)
    matrix = _load_matrix(args.matrix) if args.matrix else _matrix_for(cfg)
    res = validate_evaluation(matrix, cfg.environments, _catalog(args), cfg.min_reps)
    _print_validation(res)
    return OK if res.ok else FAILED


def _load_matrix(path: str):
    try:
        return matrix_from_record(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"{path}: not a readable matrix ({exc})") from None


def cmd_campaign_run(args: argparse.Namespace) -> int:
    cfg = _campaign_overrides(load_campaign(args.config), args)
    ops = load_scenario(args.operational) if args.operational else None
    catalog = _catalog(args)
    out = _out_dir(args)
    matrix = _load_matrix(args.matrix) if args.matrix else _matrix_for(cfg)
    m = RunManifest("campaign run", [args.config] + ([args.operational] if ops else []),
                    sorted(c.seed for c in matrix.cells), str(out))
    log_path = out / "verification_log.jsonl"
    if log_path.exists() or (out / "registry").exists():
        raise UsageError(f"{out} already holds a campaign; logs are append-only, "
                         "choose a fresh --out")

    def progress(o) -> None:
        mark = "error" if o.error else _summary(o.verdicts)
        print(f"  {o.cell.id}: {mark}", flush=True)

    result = run_campaign(matrix, catalog, cfg, log=log_path, workers=args.workers,
                          trace_dir=out / "traces" if args.traces else None, progress=progress)
    m.add(log_path)
    deployment = run_deployment_scenario(ops, catalog) if ops is not None else None
    if not args.no_artefacts:
        po = build_artefacts(out, cfg, result, catalog, deployment, ops)
        m.add(po.registry.journal)
        for letter in po.registry.letters():
            m.add(po.registry.path(letter))
    m.write()
    verdicts = result.verdicts()
    print(_summary(verdicts))
    for rid, n in sorted(Counter(v.requirement_id for v in result.failures).items(),
                         key=lambda kv: requirement_sort_key(kv[0])):
        print(f"  {rid} failed in {n} verdict(s)")
    return FAILED if _failed(verdicts) or any(o.error for o in result.outcomes) else OK


def cmd_deploy_run(args: argparse.Namespace) -> int:
    sc = _scenario_overrides(load_scenario(args.scenario), args)
    out = _out_dir(args)
    m = RunManifest("deploy-scenario run", [args.scenario], [sc.seed], str(out))
    res = run_deployment_scenario(sc, _catalog(args))
    _write(out / f"{sc.id}.integration.json",
           json.dumps(res.results.to_record(), indent=1, sort_keys=True, default=str) + "\n", m)
    ee = ErroneousBehaviourLog(out / "erroneous_behaviour.jsonl")
    ee.append(res.erroneous)
    m.add(ee.path)
    m.write()
    status = "aborted" if res.results.aborted else "completed"
    print(f"{sc.id}: {status} after {res.results.simulated_s:g} s, "
          f"{len(res.results.violations)} violation(s), {len(res.erroneous)} erroneous-behaviour entr"
          f"{'y' if len(res.erroneous) == 1 else 'ies'}")
    for e in res.erroneous:
        tag = "anticipated" if e.anticipated else "UNANTICIPATED"
        print(f"  [{tag}] {e.description}")
    return FAILED if res.results.violations else OK


def cmd_report(args: argparse.Namespace) -> int:
    catalog = {s.id: s for s in _catalog(args)}
    if args.requirement and args.requirement not in catalog:
        raise UsageError(f"unknown requirement {args.requirement}")
    out = Path(args.out or os.environ.get(OUT_ENV) or "aeros-out")
    log_path = Path(args.log) if args.log else out / "verification_log.jsonl"
    by_req: dict[str, list[tuple[str, dict]]] = defaultdict(list)
    if log_path.exists():
        _, entries = read_log(log_path)
        for e in entries:
            for v in e["verdicts"]:
                by_req[v["requirement"]].append((e["scenario_id"], v))
    elif args.requirement is None:
        raise UsageError(f"no verification log at {log_path}")
    ids = [args.requirement] if args.requirement else sorted(catalog, key=requirement_sort_key)
    failed = False
    counted = Counter()
    for rid in ids:
        rows = by_req.get(rid, [])
        c = Counter(v["status"] for _, v in rows)
        counted.update(c)
        failed |= c.get("fail", 0) > 0
        print(f"{rid}: {catalog[rid].text}")
        note = _bound_note(catalog[rid], catalog.values())
        if note:
            print(f"  note: {note}")
        if not rows:
            print("  no verdicts recorded")
            continue
        print("  " + ", ".join(f"{k} {c.get(k, 0)}" for k in ("pass", "fail", "vacuous", "inconclusive")))
        if args.requirement:
            for sid, v in rows:
                if v["status"] == "fail":
                    print(f"  FAIL {sid}: measured {v['measured']} {v['comparison']} {v['threshold']}")
    if not args.requirement:
        print("total: " + ", ".join(f"{k} {counted.get(k, 0)}"
                                    for k in ("pass", "fail", "vacuous", "inconclusive")))
    return FAILED if failed else OK


def _bound_note(spec, catalog) -> str:
    """Flag a degradation bound that is far stricter than its analogues."""
    if spec.monitor != "degradation":
        return ""
    loosest = max(float(s.limit.value) for s in catalog if s.monitor == "degradation")
    if float(spec.limit.value) >= loosest:
        return ""
    return (f"increase bound {spec.limit.value:g} % is stricter than the {loosest:g} % "
            "used by other degradation requirements; checked as written")


def _registry(args: argparse.Namespace) -> Registry:
    out = Path(args.out or os.environ.get(OUT_ENV) or "aeros-out")
    root = out / "registry"
    if not (root / "registry.jsonl").exists():
        raise UsageError(f"no artefact registry under {out}; run `campaign run` first")
    return Registry(root)


def cmd_argue(args: argparse.Namespace) -> int:
    reg = _registry(args)
    stages = [args.stage] if args.stage else sorted(STAGE_OUTPUT)
    for stage in stages:
        pattern = reg.root.parent / "patterns" / f"stage{stage}.json"
        doc = instantiate_argument(stage, reg, pattern_path=pattern if pattern.exists() else None)
        print(doc.render())
    return OK


def cmd_trace(args: argparse.Namespace) -> int:
    reg = _registry(args)
    try:
        chain = trace_requirement(args.requirement, reg)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    for link in chain:
        print(f"{link.kind:14} {link.ref}  {link.detail}")
    return OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aeros", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser, overrides: bool = True) -> None:
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./aeros-out)")
        sp.add_argument("--catalog", help="requirement catalog JSONL (default: shipped catalog)")
        if overrides:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--duration", type=float, help="simulated seconds per run")
            sp.add_argument("--agents", type=int)

    s = sub.add_parser("simulate", help="run one scenario and check its trace")
    s.add_argument("scenario")
    common(s)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("campaign", help="generate, validate or run a test campaign")
    csub = c.add_subparsers(dest="action", required=True)
    for name, func, helptext in (("gen", cmd_campaign_gen, "write the test matrix"),
                                 ("validate", cmd_campaign_validate, "check matrix balance and coverage"),
                                 ("run", cmd_campaign_run, "simulate every cell and build artefacts")):
        sp = csub.add_parser(name, help=helptext)
        sp.add_argument("config")
        common(sp)
        sp.add_argument("--long-run", action="store_true",
                        help="one full operational day per cell instead of the desk duration")
        if name != "gen":
            sp.add_argument("--matrix", help="matrix JSON from `campaign gen`")
        if name == "run":
            sp.add_argument("--workers", type=int, default=1)
            sp.add_argument("--traces", action="store_true", help="keep per-cell trace files")
            sp.add_argument("--operational", help="operational scenario for integration testing")
            sp.add_argument("--no-artefacts", action="store_true")
        sp.set_defaults(func=func)

    d = sub.add_parser("deploy-scenario", help="integration-test an operational scenario")
    dsub = d.add_subparsers(dest="action", required=True)
    dr = dsub.add_parser("run")
    dr.add_argument("scenario")
    common(dr)
    dr.set_defaults(func=cmd_deploy_run)

    r = sub.add_parser("report", help="summarise verdicts from a verification log")
    r.add_argument("--requirement")
    r.add_argument("--log", help="verification log (default <out>/verification_log.jsonl)")
    common(r, overrides=False)
    r.set_defaults(func=cmd_report)

    a = sub.add_parser("argue", help="instantiate assurance arguments from the registry")
    a.add_argument("--stage", type=int, choices=sorted(STAGE_OUTPUT))
    common(a, overrides=False)
    a.set_defaults(func=cmd_argue)

    t = sub.add_parser("trace", help="evidence chain for one requirement")
    t.add_argument("requirement")
    common(t, overrides=False)
    t.set_defaults(func=cmd_trace)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else OK
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return USAGE
    try:
        return args.func(args)
    except (ConfigError, CatalogError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except ArtefactError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
