"""Fault models applied to a fraction of the swarm."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Any

from .sim import AgentState, FaultKind

MOTOR_SPEED_FACTOR = 0.5
MOTOR_HEADING_BIAS = 0.2  # rad/s, positive = counter-clockwise drift


class FaultError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class FaultSpec:
    kind: FaultKind
    fraction: float
    onset_tick: int = 0
    duration: int | None = None  # ticks; None = persists to the end of the run
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.kind, FaultKind):
            object.__setattr__(self, "kind", FaultKind(self.kind))
        if not (0.0 <= self.fraction <= 1.0) or math.isnan(self.fraction):
            raise FaultError(f"fault fraction {self.fraction} outside [0, 1]")
        if self.onset_tick < 0:
            raise FaultError("onset_tick must be >= 0")
        if self.duration is not None and self.duration < 0:
            raise FaultError("duration must be >= 0")

    def active(self, tick: int) -> bool:
        if tick < self.onset_tick:
            return False
        return self.duration is None or tick < self.onset_tick + self.duration

    def with_seed(self, seed: int) -> FaultSpec:
        return replace(self, seed=seed)


def fault_count(n_agents: int, fraction: float) -> int:
    """Round-half-up count of faulty agents."""
    exact = Decimal(repr(fraction)) * n_agents
    return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def assign_faults(n_agents: int, spec: FaultSpec) -> frozenset[int]:
    """Pick which agent ids (0..n-1) carry the fault, uniformly by seed."""
    if n_agents < 1:
        raise FaultError("n_agents must be >= 1")
    if not (0.0 <= spec.fraction <= 1.0):
        raise FaultError(f"fault fraction {spec.fraction} outside [0, 1]")
    k = fault_count(n_agents, spec.fraction)
    rng = random.Random(f"{spec.kind.value}:{spec.seed}")
    return frozenset(rng.sample(range(n_agents), k))


def apply_fault(agent: AgentState, command: Any, comm_view: Any = (), dt: float = 0.1):
    """Degrade one agent's command and radio view according to its faults.

    Comm faults blank the neighbour view and suppress every broadcast the
    agent would make (intervention and attendee requests). Motor faults
    halve the achievable speed and add a constant heading drift.
    """
    faults = agent.active_faults
    if not faults:
        return command, comm_view
    if FaultKind.FULL_COMMUNICATION in faults:
        comm_view = ()
        command = replace(command, request_intervention=False, request_attendee_input=False)
    if FaultKind.HALF_WHEELS_MOTOR in faults:
        command = replace(
            command,
            desired_speed=command.desired_speed * MOTOR_SPEED_FACTOR,
            desired_heading=command.desired_heading + MOTOR_HEADING_BIAS * dt,
        )
    return command, comm_view
