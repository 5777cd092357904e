"""Scenario and campaign configuration files.

Both are INI-style keyed text. A scenario file::

    [scenario]
    id = lab
    seed = 7
    duration_s = 1000

    [arena]
    width = 4
    height = 4
    delivery_zones = 3,0,4,1
    deposit_zones = 0,3,1,4
    humans = trained@0,0; attendee@4,4

    [swarm]
    agents = 10

    [fault.comm]
    kind = FullCommunication
    fraction = 0.1

A campaign file replaces ``[scenario]``/``[arena]`` with ``[campaign]`` and
one ``[env.<name>]`` section per test environment.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable

from .behavior import BehaviorParams
from .faults import FaultError, FaultSpec
from .sim import DT, ArenaConfig, FaultKind, Floor, HumanState, Physics, Rect, Role, SimError

DEFAULT_DAY_S = 28_800.0


class ConfigError(ValueError):
    """Malformed configuration, carrying the offending file line."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Scenario:
    id: str = "scenario"
    seed: int = 0
    duration_s: float = 1000.0
    dt: float = DT
    day_s: float = DEFAULT_DAY_S
    estop_s: float | None = None
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    humans: tuple[HumanState, ...] = ()
    n_agents: int = 10
    physics: Physics = field(default_factory=Physics)
    n_boxes: int = 20
    box_weight_kg: float = 1.5
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    controller: str = "compliant"
    faults: tuple[FaultSpec, ...] = ()
    anticipated: tuple[str, ...] = ()

    @property
    def ticks(self) -> int:
        return int(round(self.duration_s / self.dt))

    def to_record(self) -> dict[str, Any]:
        """Canonical JSON-able view, used for digests and logs."""
        return _plain(self)


def _plain(obj: Any) -> Any:
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (frozenset, set)):
        return sorted(_plain(v) for v in obj)
    if isinstance(obj, (Floor, Role, FaultKind)):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


@dataclass(frozen=True)
class Environment:
    name: str
    arena: ArenaConfig
    humans: tuple[HumanState, ...] = ()


@dataclass(frozen=True)
class CampaignConfig:
    id: str = "desk"
    reps: int = 10
    seed: int = 2024
    duration_s: float = 1000.0
    dt: float = DT
    day_s: float | None = None  # None: one run is one operational day
    n_agents: int = 10
    physics: Physics = field(default_factory=Physics)
    n_boxes: int = 20
    box_weight_kg: float = 1.5
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    controller: str = "compliant"
    min_reps: int = 5
    environments: tuple[Environment, ...] = ()
    faults: tuple[FaultSpec, ...] = ()

    def scenario(self, env: Environment, seed: int, faults: tuple[FaultSpec, ...] = (),
                 scenario_id: str | None = None) -> Scenario:
        return Scenario(
            id=scenario_id or env.name,
            seed=seed,
            duration_s=self.duration_s,
            dt=self.dt,
            day_s=self.day_s if self.day_s is not None else self.duration_s,
            arena=env.arena,
            humans=env.humans,
            n_agents=self.n_agents,
            physics=self.physics,
            n_boxes=self.n_boxes,
            box_weight_kg=self.box_weight_kg,
            behavior=self.behavior,
            controller=self.controller,
            faults=faults,
        )


# ------------------------------------------------------------------ parsing


class _Source:
    def __init__(self, text: str, path: str | None):
        self.path = path
        self.text = text
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"))
        self.cp.optionxform = str  # type: ignore[assignment]
        try:
            self.cp.read_string(text, source=path or "<config>")
        except configparser.ParsingError as exc:
            line = exc.errors[0][0] if exc.errors else None
            raise ConfigError(f"unparseable line {exc.errors[0][1] if exc.errors else ''}",
                              path, line) from None
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(str(exc).splitlines()[0], path, line) from None
        self._lines = self._index(text)

    @staticmethod
    def _index(text: str) -> dict[tuple[str, str | None], int]:
        where: dict[tuple[str, str | None], int] = {}
        section = None
        for n, raw in enumerate(text.splitlines(), 1):
            s = raw.strip()
            m = re.match(r"^\[([^\]]+)\]", s)
            if m:
                section = m.group(1).strip()
                where[(section, None)] = n
                continue
            m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
            if m and section is not None:
                where.setdefault((section, m.group(1).strip()), n)
        return where

    def error(self, msg: str, section: str, key: str | None = None) -> ConfigError:
        line = self._lines.get((section, key), self._lines.get((section, None)))
        return ConfigError(f"[{section}] {key + ': ' if key else ''}{msg}", self.path, line)

    def get(self, section: str, key: str, conv: Callable[[str], Any], default: Any) -> Any:
        if not self.cp.has_section(section) or not self.cp.has_option(section, key):
            return default
        raw = self.cp.get(section, key).strip()
        try:
            return conv(raw)
        except (ValueError, TypeError, SimError, FaultError) as exc:
            raise self.error(f"bad value {raw!r} ({exc})", section, key) from None

    def check_keys(self, section: str, allowed: set[str]) -> None:
        for key in self.cp.options(section):
            if key not in allowed:
                raise self.error("unknown key", section, key)


def _bool(raw: str) -> bool:
    v = raw.lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError("expected yes/no")


def _finite(raw: str) -> float:
    v = float(raw)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _seconds_or_inf(raw: str) -> float | None:
    if raw.lower() in ("inf", "none", "unbounded", ""):
        return None
    return _finite(raw)


def _rects(raw: str) -> tuple[Rect, ...]:
    out = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        nums = [_finite(v) for v in part.split(",")]
        if len(nums) != 4:
            raise ValueError("a zone is x0,y0,x1,y1")
        out.append(Rect(*nums))
    return tuple(out)


def _humans(raw: str) -> tuple[HumanState, ...]:
    out = []
    for i, part in enumerate(p for p in raw.split(";") if p.strip()):
        role, _, where = part.strip().partition("@")
        xy = [_finite(v) for v in where.split(",")]
        if len(xy) != 2:
            raise ValueError("a human is role@x,y")
        out.append(HumanState(i, Role(role.strip()), xy[0], xy[1]))
    return tuple(out)


def _names(raw: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in raw.replace(";", ",").split(",") if v.strip())


_ARENA_KEYS = {"width", "height", "incline_deg", "floor", "max_step_height_cm",
               "delivery_zones", "deposit_zones", "humans_have_locators", "humans"}


def _arena(src: _Source, section: str) -> tuple[ArenaConfig, tuple[HumanState, ...]]:
    src.check_keys(section, _ARENA_KEYS)
    d = ArenaConfig()
    arena = ArenaConfig(
        width=src.get(section, "width", _finite, d.width),
        height=src.get(section, "height", _finite, d.height),
        incline_deg=src.get(section, "incline_deg", _finite, d.incline_deg),
        floor=src.get(section, "floor", Floor, d.floor),
        max_step_height_cm=src.get(section, "max_step_height_cm", _finite, d.max_step_height_cm),
        delivery_zones=src.get(section, "delivery_zones", _rects, (Rect(3, 0, 4, 1),)),
        deposit_zones=src.get(section, "deposit_zones", _rects, (Rect(0, 3, 1, 4),)),
        humans_have_locators=src.get(section, "humans_have_locators", _bool, True),
    )
    try:
        arena.validate()
    except SimError as exc:
        raise src.error(str(exc), section) from None
    humans = src.get(section, "humans", _humans, ())
    humans = tuple(replace(h, has_locator=arena.humans_have_locators) for h in humans)
    return arena, humans


_SWARM_KEYS = {"agents", "v_max", "accel_max", "max_turn_rate", "agent_radius",
               "human_radius", "agent_mass_kg", "controller"}


def _swarm(src: _Source) -> tuple[int, Physics, str]:
    s = "swarm"
    if not src.cp.has_section(s):
        return 10, Physics(), "compliant"
    src.check_keys(s, _SWARM_KEYS)
    d = Physics()
    n = src.get(s, "agents", int, 10)
    if n < 0:
        raise src.error("agent count must be >= 0", s, "agents")
    ph = Physics(
        v_max=src.get(s, "v_max", _finite, d.v_max),
        accel_max=src.get(s, "accel_max", _finite, d.accel_max),
        max_turn_rate=src.get(s, "max_turn_rate", _finite, d.max_turn_rate),
        agent_radius=src.get(s, "agent_radius", _finite, d.agent_radius),
        human_radius=src.get(s, "human_radius", _finite, d.human_radius),
        agent_mass_kg=src.get(s, "agent_mass_kg", _finite, d.agent_mass_kg),
    )
    try:
        ph.validate()
    except SimError as exc:
        raise src.error(str(exc), s) from None
    controller = src.get(s, "controller", str, "compliant")
    if controller not in CONTROLLERS:
        raise src.error(f"unknown controller {controller!r}", s, "controller")
    return n, ph, controller


CONTROLLERS = ("compliant", "no-speed-cap")


def _boxes(src: _Source) -> tuple[int, float]:
    s = "boxes"
    if not src.cp.has_section(s):
        return 20, 1.5
    src.check_keys(s, {"count", "weight_kg"})
    n = src.get(s, "count", int, 20)
    if n < 0:
        raise src.error("box count must be >= 0", s, "count")
    return n, src.get(s, "weight_kg", _finite, 1.5)


def _behavior(src: _Source) -> BehaviorParams:
    s = "behavior"
    d = BehaviorParams()
    if not src.cp.has_section(s):
        return d
    allowed = {f.name for f in fields(BehaviorParams)}
    src.check_keys(s, allowed)
    kw = {}
    for f in fields(BehaviorParams):
        conv = _bool if isinstance(getattr(d, f.name), bool) else _finite
        kw[f.name] = src.get(s, f.name, conv, getattr(d, f.name))
    return BehaviorParams(**kw)


def _faults(src: _Source, dt: float) -> tuple[FaultSpec, ...]:
    out = []
    for section in src.cp.sections():
        if not section.startswith("fault"):
            continue
        src.check_keys(section, {"kind", "fraction", "onset_s", "duration_s", "seed"})
        if not src.cp.has_option(section, "kind"):
            raise src.error("missing kind", section)
        kind = src.get(section, "kind", FaultKind, None)
        fraction = src.get(section, "fraction", _finite, 0.0)
        onset = src.get(section, "onset_s", _finite, 0.0)
        duration = src.get(section, "duration_s", _seconds_or_inf, None)
        seed = src.get(section, "seed", int, 0)
        try:
            out.append(FaultSpec(kind, fraction, int(round(onset / dt)),
                                 None if duration is None else int(round(duration / dt)), seed))
        except FaultError as exc:
            raise src.error(str(exc), section, "fraction") from None
    return tuple(out)


_SCENARIO_KEYS = {"id", "seed", "duration_s", "dt", "day_s", "estop_s", "anticipated"}


def parse_scenario(text: str, path: str | None = None) -> Scenario:
    src = _Source(text, path)
    for section in src.cp.sections():
        if section not in ("scenario", "arena", "swarm", "boxes", "behavior") \
                and not section.startswith("fault"):
            raise src.error("unknown section", section)
    s = "scenario"
    if src.cp.has_section(s):
        src.check_keys(s, _SCENARIO_KEYS)
    dt = src.get(s, "dt", _finite, DT)
    if dt <= 0:
        raise src.error("dt must be positive", s, "dt")
    duration = src.get(s, "duration_s", _finite, 1000.0)
    if duration <= 0:
        raise src.error("duration must be positive", s, "duration_s")
    if src.cp.has_section("arena"):
        arena, humans = _arena(src, "arena")
    else:
        arena, humans = ArenaConfig(delivery_zones=(Rect(3, 0, 4, 1),),
                                    deposit_zones=(Rect(0, 3, 1, 4),)), ()
    if humans and not arena.humans_have_locators:
        raise src.error("humans present but humans_have_locators = no; "
                        "the swarm may only operate where humans carry locators",
                        "arena", "humans_have_locators")
    n_agents, physics, controller = _swarm(src)
    n_boxes, weight = _boxes(src)
    return Scenario(
        id=src.get(s, "id", str, "scenario"),
        seed=src.get(s, "seed", int, 0),
        duration_s=duration,
        dt=dt,
        day_s=src.get(s, "day_s", _finite, DEFAULT_DAY_S),
        estop_s=src.get(s, "estop_s", _seconds_or_inf, None),
        arena=arena,
        humans=humans,
        n_agents=n_agents,
        physics=physics,
        n_boxes=n_boxes,
        box_weight_kg=weight,
        behavior=_behavior(src),
        controller=controller,
        faults=_faults(src, dt),
        anticipated=src.get(s, "anticipated", _names, ()),
    )


_CAMPAIGN_KEYS = {"id", "reps", "seed", "duration_s", "dt", "day_s", "min_reps"}


def parse_campaign(text: str, path: str | None = None) -> CampaignConfig:
    src = _Source(text, path)
    for section in src.cp.sections():
        if section not in ("campaign", "swarm", "boxes", "behavior") \
                and not section.startswith(("fault", "env.")):
            raise src.error("unknown section", section)
    c = "campaign"
    if src.cp.has_section(c):
        src.check_keys(c, _CAMPAIGN_KEYS)
    dt = src.get(c, "dt", _finite, DT)
    if dt <= 0:
        raise src.error("dt must be positive", c, "dt")
    reps = src.get(c, "reps", int, 10)
    if reps < 1:
        raise src.error("reps must be >= 1", c, "reps")
    envs = []
    for section in src.cp.sections():
        if section.startswith("env."):
            arena, humans = _arena(src, section)
            if humans and not arena.humans_have_locators:
                raise src.error("humans present but humans_have_locators = no",
                                section, "humans_have_locators")
            envs.append(Environment(section[4:], arena, humans))
    if not envs:
        raise ConfigError("campaign needs at least one [env.<name>] section", path, None)
    n_agents, physics, controller = _swarm(src)
    n_boxes, weight = _boxes(src)
    return CampaignConfig(
        id=src.get(c, "id", str, "desk"),
        reps=reps,
        seed=src.get(c, "seed", int, 2024),
        duration_s=src.get(c, "duration_s", _finite, 1000.0),
        dt=dt,
        day_s=src.get(c, "day_s", _finite, None),
        n_agents=n_agents,
        physics=physics,
        n_boxes=n_boxes,
        box_weight_kg=weight,
        behavior=_behavior(src),
        controller=controller,
        min_reps=src.get(c, "min_reps", int, 5),
        environments=tuple(envs),
        faults=_faults(src, dt),
    )


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror}", str(p)) from None
    return parse_scenario(text, str(p))


def load_campaign(path: str | Path) -> CampaignConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror}", str(p)) from None
    return parse_campaign(text, str(p))


# ------------------------------------------------------------------ defaults

LAB = Environment(
    "lab",
    ArenaConfig(4.0, 4.0, 0.0, Floor.DRY, 0.2, (Rect(3, 0, 4, 1),), (Rect(0, 3, 1, 4),), True),
    (HumanState(0, Role.TRAINED, 0.0, 0.0), HumanState(1, Role.ATTENDEE, 4.0, 4.0)),
)
RAMP = Environment(
    "ramp",
    ArenaConfig(4.0, 4.0, 12.0, Floor.DRY, 0.4, (Rect(3, 0, 4, 1),), (Rect(0, 3, 1, 4),), True),
    (HumanState(0, Role.TRAINED, 0.0, 0.0), HumanState(1, Role.ATTENDEE, 4.0, 4.0)),
)
STOREROOM = Environment(
    "storeroom",
    ArenaConfig(4.0, 4.0, 5.0, Floor.DRY, 0.0, (Rect(3, 3, 4, 4),), (Rect(0, 3, 1, 4),), True),
    (HumanState(0, Role.TRAINED, 2.0, 0.0),),
)
DESK_ENVIRONMENTS = (LAB, RAMP, STOREROOM)


def desk_faults() -> tuple[FaultSpec, ...]:
    return (FaultSpec(FaultKind.FULL_COMMUNICATION, 0.10),
            FaultSpec(FaultKind.HALF_WHEELS_MOTOR, 0.50))


def desk_campaign(**overrides: Any) -> CampaignConfig:
    """3 environments x (faultless + 2 fault kinds) x 10 reps."""
    base = CampaignConfig(environments=DESK_ENVIRONMENTS, faults=desk_faults())
    return replace(base, **overrides)


def lab_scenario(**overrides: Any) -> Scenario:
    base = Scenario(id="lab", arena=LAB.arena, humans=LAB.humans, day_s=1000.0)
    return replace(base, **overrides)
