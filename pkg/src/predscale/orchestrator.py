"""Cluster lifecycle: bounded, stepwise scaling with cooldown and boot delay."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

from .alarm import Action


class Phase(str, enum.Enum):
    BOOTING = "booting"
    ACTIVE = "active"
    TERMINATED = "terminated"


class Outcome(str, enum.Enum):
    EFFECTIVE = "EFFECTIVE"
    REJECTED_COOLDOWN = "REJECTED_COOLDOWN"
    REJECTED_BOUNDS = "REJECTED_BOUNDS"


@dataclass(frozen=True)
class Instance:
    id: str
    phase: Phase
    created_at: int
    serving_since: Optional[int] = None
    terminated_at: Optional[int] = None


@dataclass(frozen=True)
class OrchestratorConfig:
    min_size: int = 2
    max_size: int = 5
    step: int = 1
    cooldown: int = 1200
    boot_delay: int = 360

    def __post_init__(self):
        if not 1 <= self.min_size <= self.max_size:
            raise ValueError(f"need 1 <= min_size <= max_size, got {self.min_size}, {self.max_size}")
        if self.step < 1 or self.cooldown < 0 or self.boot_delay < 0:
            raise ValueError(f"invalid orchestrator config {self!r}")


@dataclass(frozen=True)
class ActionOutcome:
    action: Action
    outcome: Outcome
    timestamp: int
    instance_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class ClusterState:
    instances: tuple[Instance, ...]
    config: OrchestratorConfig = field(default_factory=OrchestratorConfig)
    last_effective_action: Optional[int] = None
    next_serial: int = 0

    @classmethod
    def initial(cls, config: OrchestratorConfig = OrchestratorConfig(), now: int = 0) -> "ClusterState":
        """``min_size`` instances that are already serving at ``now``."""
        born = now - config.boot_delay
        instances = tuple(
            Instance(_instance_id(k), Phase.ACTIVE, born, now) for k in range(config.min_size)
        )
        return cls(instances, config, None, config.min_size)

    @property
    def size(self) -> int:
        """Instances counted against the bounds: booting and active."""
        return sum(1 for i in self.instances if i.phase is not Phase.TERMINATED)

    @property
    def active_count(self) -> int:
        return sum(1 for i in self.instances if i.phase is Phase.ACTIVE)


def _instance_id(serial: int) -> str:
    return f"vm-{serial + 1:03d}"


def handle_notification(cluster: ClusterState, action: Action, now: int) -> tuple[ClusterState, ActionOutcome]:
    action = Action(action)
    cfg = cluster.config
    last = cluster.last_effective_action
    if last is not None and now - last < cfg.cooldown:
        return cluster, ActionOutcome(action, Outcome.REJECTED_COOLDOWN, now)

    if action is Action.SCALE_OUT:
        if cluster.size + cfg.step > cfg.max_size:
            return cluster, ActionOutcome(action, Outcome.REJECTED_BOUNDS, now)
        serial = cluster.next_serial
        new = tuple(Instance(_instance_id(serial + k), Phase.BOOTING, now) for k in range(cfg.step))
        cluster = replace(
            cluster,
            instances=cluster.instances + new,
            last_effective_action=now,
            next_serial=serial + cfg.step,
        )
        return cluster, ActionOutcome(action, Outcome.EFFECTIVE, now, tuple(i.id for i in new))

    if cluster.size - cfg.step < cfg.min_size:
        return cluster, ActionOutcome(action, Outcome.REJECTED_BOUNDS, now)
    victims = _scale_in_victims(cluster, cfg.step)
    instances = tuple(
        replace(i, phase=Phase.TERMINATED, terminated_at=now) if i.id in victims else i
        for i in cluster.instances
    )
    cluster = replace(cluster, instances=instances, last_effective_action=now)
    return cluster, ActionOutcome(action, Outcome.EFFECTIVE, now, tuple(sorted(victims)))


def _scale_in_victims(cluster: ClusterState, n: int) -> set[str]:
    # booting instances go first (they serve nothing yet), newest first;
    # then the most recently activated
    booting = sorted(
        (i for i in cluster.instances if i.phase is Phase.BOOTING),
        key=lambda i: (i.created_at, i.id),
        reverse=True,
    )
    active = sorted(
        (i for i in cluster.instances if i.phase is Phase.ACTIVE),
        key=lambda i: (i.serving_since, i.id),
        reverse=True,
    )
    return {i.id for i in (booting + active)[:n]}


def tick(cluster: ClusterState, now: int) -> ClusterState:
    delay = cluster.config.boot_delay
    changed = False
    instances = []
    for inst in cluster.instances:
        if inst.phase is Phase.BOOTING and now >= inst.created_at + delay:
            inst = replace(inst, phase=Phase.ACTIVE, serving_since=inst.created_at + delay)
            changed = True
        instances.append(inst)
    return replace(cluster, instances=tuple(instances)) if changed else cluster


def active_instances(cluster: ClusterState, now: int | None = None) -> list[Instance]:
    """Active instances ordered by id.

    ``now`` is accepted for symmetry with :func:`tick`; activation happens in
    ``tick`` so the state already reflects the clock.
    """
    return sorted((i for i in cluster.instances if i.phase is Phase.ACTIVE), key=lambda i: i.id)


class Orchestrator:
    """Mutable wrapper that serialises ticks and notifications and keeps a log."""

    def __init__(self, config: OrchestratorConfig = OrchestratorConfig(), now: int = 0):
        self.state = ClusterState.initial(config, now)
        self.log: list[ActionOutcome] = []

    def tick(self, now: int) -> list[Instance]:
        """Advance boot timers; return the instances that became active."""
        before = {i.id for i in active_instances(self.state)}
        self.state = tick(self.state, now)
        return [i for i in active_instances(self.state) if i.id not in before]

    def handle(self, action: Action, now: int) -> ActionOutcome:
        self.state, outcome = handle_notification(self.state, action, now)
        self.log.append(outcome)
        return outcome

    def active(self) -> list[Instance]:
        return active_instances(self.state)

    @property
    def effective_actions(self) -> list[ActionOutcome]:
        return [o for o in self.log if o.outcome is Outcome.EFFECTIVE]
