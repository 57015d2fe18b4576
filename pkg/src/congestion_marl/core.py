"""Resources, world state and the reward family shared by every learning signal."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit


class ConfigError(ValueError):
    """Raised for invalid scenario, abstraction or experiment configuration."""


class Domain(enum.IntEnum):
    BPD = 0
    TLD = 1

    @classmethod
    def parse(cls, value: "Domain | str | int") -> "Domain":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ConfigError(f"unknown domain kind {value!r} (expected bpd or tld)") from None
        return cls(value)


@dataclass(frozen=True)
class Resource:
    """A congestible resource. Attendance is not stored here, see :class:`WorldState`."""

    weight: float = 1.0
    capacity: int = 1

    def __post_init__(self):
        if not self.weight >= 0:
            raise ConfigError(f"resource weight must be >= 0, got {self.weight}")
        if int(self.capacity) != self.capacity or self.capacity < 1:
            raise ConfigError(f"resource capacity must be a positive integer, got {self.capacity}")
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "capacity", int(self.capacity))


def resource_arrays(resources) -> tuple[np.ndarray, np.ndarray]:
    """Split a resource list into contiguous ``(weights, capacities)`` arrays."""
    weights = np.array([r.weight for r in resources], dtype=np.float64)
    capacities = np.array([r.capacity for r in resources], dtype=np.int64)
    return weights, capacities


@njit(cache=True)
def _f(kind, w, psi, x):
    if kind == 0:
        return x * math.exp(-x / psi)
    if x <= psi:
        return w * math.exp(-1.0)
    return w * math.exp(-x / psi)


def reward_family_f(kind, w: float, psi, x) -> float:
    """Reward of a single resource with weight ``w``, capacity ``psi`` and attendance ``x``.

    BPD: ``x * exp(-x / psi)`` (the weight is ignored, beach sections all weigh 1).
    TLD: ``w / e`` while ``x <= psi``, ``w * exp(-x / psi)`` once congested.

    ``psi`` may be a real number when evaluating group-level signals.
    """
    return _f(int(Domain.parse(kind)), float(w), float(psi), float(x))


def is_congested(psi, x) -> bool:
    return x > psi


def recompute_attendance(positions, num_resources: int) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size and (positions.min() < 0 or positions.max() >= num_resources):
        raise IndexError(
            f"agent position out of range [0, {num_resources}): corrupted state {positions.tolist()}"
        )
    return np.bincount(positions, minlength=num_resources).astype(np.int64)


@dataclass
class WorldState:
    attendance: np.ndarray
    agent_positions: np.ndarray
    timestep: int = 0
    episode: int = 0

    @classmethod
    def from_positions(cls, positions, num_resources: int, timestep: int = 0, episode: int = 0):
        positions = np.array(positions, dtype=np.int64)
        return cls(recompute_attendance(positions, num_resources), positions, timestep, episode)

    def check(self) -> None:
        expected = recompute_attendance(self.agent_positions, len(self.attendance))
        assert np.array_equal(expected, self.attendance), "attendance out of sync with positions"
        assert int(self.attendance.sum()) == len(self.agent_positions)

