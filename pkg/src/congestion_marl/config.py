"""Scenario configuration: resources, learners, reward scheme and scheduled events."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .abstraction import AbstractionSpec, parse_contiguous_spec, parse_explicit_spec
from .agents import LearnerConfig
from .core import ConfigError, Domain, Resource
from .rewards import RewardScheme, Scheme

# Nine-lane traffic scenario used throughout the lane experiments.
TLD_CAPACITIES = (167, 83, 33, 17, 9, 17, 33, 83, 167)
TLD_WEIGHTS = (1, 5, 10, 1, 5, 10, 1, 5, 10)
# Lanes 3 and 9 lose half their capacity and swap weighting with a neighbour.
TLD_ACCIDENT_CAPACITIES = (167, 83, 17, 17, 9, 17, 33, 83, 83)
TLD_ACCIDENT_WEIGHTS = (1, 10, 5, 1, 5, 10, 1, 10, 5)


@dataclass(frozen=True)
class ScheduledEvent:
    """A change to the world applied before the (0-based) episode ``episode`` starts."""

    episode: int
    new_capacities: Optional[tuple[int, ...]] = None
    new_weights: Optional[tuple[float, ...]] = None
    reset_epsilon: bool = False

    def __post_init__(self):
        if int(self.episode) != self.episode or self.episode < 1:
            raise ConfigError(f"event episode must be a positive integer, got {self.episode}")
        if self.new_capacities is not None:
            object.__setattr__(self, "new_capacities", tuple(int(c) for c in self.new_capacities))
        if self.new_weights is not None:
            object.__setattr__(self, "new_weights", tuple(float(w) for w in self.new_weights))


def parse_abstraction(text: str, num_resources: int) -> AbstractionSpec:
    """Accept either ``"2+1+3"`` or ``"0,3,6;1,4,7;2,5,8"``."""
    if any(ch in text for ch in ",;"):
        return parse_explicit_spec(text, num_resources)
    return parse_contiguous_spec(text, num_resources)


@dataclass(frozen=True)
class DomainConfig:
    kind: Domain
    resources: tuple[Resource, ...]
    num_agents: int
    num_timesteps: int = 5
    num_episodes: int = 10000
    reward_scheme: Scheme = Scheme.G
    abstraction: Optional[AbstractionSpec] = None
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    noncompliant_fraction: float = 0.0
    events: tuple[ScheduledEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", Domain.parse(self.kind))
        object.__setattr__(self, "reward_scheme", Scheme.parse(self.reward_scheme))
        object.__setattr__(self, "resources", tuple(self.resources))
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.episode)))
        n = len(self.resources)
        if n == 0:
            raise ConfigError("at least one resource is required")
        for name in ("num_agents", "num_timesteps", "num_episodes"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value}")
        if not 0.0 <= self.noncompliant_fraction <= 1.0:
            raise ConfigError(f"noncompliant_fraction must lie in [0, 1], got {self.noncompliant_fraction}")
        if self.kind is Domain.BPD:
            _check_beach(self.resources)
        if self.reward_scheme is Scheme.A:
            if self.abstraction is None:
                raise ConfigError("reward scheme A requires an abstraction")
            if self.abstraction.num_resources != n:
                raise ConfigError(
                    f"abstraction {self.abstraction.label} covers {self.abstraction.num_resources} "
                    f"resources, scenario has {n}"
                )
        for event in self.events:
            for vec in (event.new_capacities, event.new_weights):
                if vec is not None and len(vec) != n:
                    raise ConfigError(
                        f"event at episode {event.episode}: vector of length {len(vec)} for {n} resources"
                    )

    @property
    def num_resources(self) -> int:
        return len(self.resources)

    @property
    def scheme(self) -> RewardScheme:
        abstraction = self.abstraction if self.reward_scheme is Scheme.A else None
        return RewardScheme(self.reward_scheme, abstraction)

    @property
    def label(self) -> str:
        return self.scheme.label

    @property
    def num_noncompliant(self) -> int:
        return math.ceil(self.noncompliant_fraction * self.num_agents - 1e-9)

    def with_resources(self, resources: Sequence[Resource]) -> "DomainConfig":
        return replace(self, resources=tuple(resources))


def _check_beach(resources: Sequence[Resource]) -> None:
    if any(r.weight != 1.0 for r in resources):
        raise ConfigError("BPD sections must all have weight 1")
    if len({r.capacity for r in resources}) != 1:
        raise ConfigError("BPD sections must all share one capacity")


def beach(num_agents: int = 100, num_sections: int = 6, capacity: int = 6, **kwargs) -> DomainConfig:
    resources = tuple(Resource(1.0, capacity) for _ in range(num_sections))
    return DomainConfig(Domain.BPD, resources, num_agents, **kwargs)


def traffic(
    num_agents: int = 500,
    capacities: Sequence[int] = TLD_CAPACITIES,
    weights: Sequence[float] = TLD_WEIGHTS,
    **kwargs,
) -> DomainConfig:
    if len(capacities) != len(weights):
        raise ConfigError(f"{len(capacities)} capacities but {len(weights)} weights")
    resources = tuple(Resource(w, c) for w, c in zip(weights, capacities))
    return DomainConfig(Domain.TLD, resources, num_agents, **kwargs)


def accident_event(episode: int = 2000) -> ScheduledEvent:
    return ScheduledEvent(episode, TLD_ACCIDENT_CAPACITIES, TLD_ACCIDENT_WEIGHTS, reset_epsilon=True)
