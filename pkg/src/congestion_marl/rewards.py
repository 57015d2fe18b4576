"""Local, global, difference and abstract rewards.

The compiled helpers here are shared by the public functions and by the
simulation kernel, so both paths produce bit-identical values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .abstraction import AbstractionSpec
from .core import ConfigError, Domain, _f, resource_arrays


class Scheme(str, enum.Enum):
    L = "L"
    G = "G"
    D = "D"
    A = "A"

    @property
    def code(self) -> int:
        return _SCHEME_CODES[self]

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ConfigError(f"unknown reward scheme {value!r} (expected L, G, D or A)") from None


_SCHEME_CODES = {Scheme.L: 0, Scheme.G: 1, Scheme.D: 2, Scheme.A: 3}


@dataclass(frozen=True)
class RewardScheme:
    tag: Scheme
    abstraction: Optional[AbstractionSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "tag", Scheme.parse(self.tag))
        if (self.tag is Scheme.A) != (self.abstraction is not None):
            raise ConfigError("reward scheme A requires an abstraction, and only A accepts one")

    @property
    def label(self) -> str:
        return self.abstraction.label if self.abstraction is not None else self.tag.value


@njit(cache=True)
def _global(kind, weights, capacities, attendance):
    g = 0.0
    for s in range(weights.size):
        g += _f(kind, weights[s], float(capacities[s]), float(attendance[s]))
    return g


@njit(cache=True)
def _difference(kind, w, psi, x):
    return _f(kind, w, psi, x) - _f(kind, w, psi, x - 1.0)


@njit(cache=True)
def _group_signals(kind, weights, capacities, attendance, group_index, num_groups):
    wsum = np.zeros(num_groups)
    count = np.zeros(num_groups)
    cap = np.zeros(num_groups)
    att = np.zeros(num_groups)
    for s in range(weights.size):
        b = group_index[s]
        wsum[b] += weights[s]
        count[b] += 1.0
        cap[b] += capacities[s]
        att[b] += attendance[s]
    h = np.empty(num_groups)
    for b in range(num_groups):
        h[b] = -_f(kind, wsum[b] / count[b], cap[b], att[b])
    return h


@njit(cache=True)
def resource_rewards(kind, scheme, weights, capacities, attendance, group_index, num_groups, out):
    """Fill ``out[s]`` with the reward an agent on resource ``s`` receives; return G.

    Resources with zero attendance get 0 under D since nobody is there to reward.
    """
    g = _global(kind, weights, capacities, attendance)
    n = weights.size
    if scheme == 1:
        for s in range(n):
            out[s] = g
        return g
    if scheme == 3:
        h = _group_signals(kind, weights, capacities, attendance, group_index, num_groups)
    for s in range(n):
        w = weights[s]
        psi = float(capacities[s])
        x = float(attendance[s])
        if scheme == 0:
            out[s] = _f(kind, w, psi, x)
        elif scheme == 2:
            out[s] = _difference(kind, w, psi, x) if x > 0 else 0.0
        elif x <= psi:
            out[s] = _f(kind, w, psi, x)
        else:
            out[s] = h[group_index[s]]
    return g


def _prep(kind, resources, attendance):
    weights, capacities = resource_arrays(resources)
    attendance = np.asarray(attendance, dtype=np.int64)
    if attendance.shape != weights.shape:
        raise ValueError(f"attendance has {attendance.size} entries for {weights.size} resources")
    return int(Domain.parse(kind)), weights, capacities, attendance


def local_reward(kind, resources: Sequence, attendance, s: int) -> float:
    k, w, c, x = _prep(kind, resources, attendance)
    return _f(k, w[s], float(c[s]), float(x[s]))


def global_reward(kind, resources: Sequence, attendance) -> float:
    k, w, c, x = _prep(kind, resources, attendance)
    return _global(k, w, c, x)


def difference_reward(kind, resources: Sequence, attendance, s: int) -> float:
    """L at the current attendance minus L with one agent fewer on ``s``."""
    k, w, c, x = _prep(kind, resources, attendance)
    assert x[s] >= 1, f"difference reward requested for empty resource {s}"
    return _difference(k, w[s], float(c[s]), float(x[s]))


def group_signal_h(kind, spec: AbstractionSpec, group_index: int, resources: Sequence, attendance) -> float:
    k, w, c, x = _prep(kind, resources, attendance)
    h = _group_signals(k, w, c, x, spec.group_index, spec.num_groups)
    return float(h[group_index])


def abstract_reward(kind, spec: AbstractionSpec, resources: Sequence, attendance, s: int) -> float:
    # congestion is tested on the resource, the punishment comes from its group
    k, w, c, x = _prep(kind, resources, attendance)
    if x[s] <= c[s]:
        return _f(k, w[s], float(c[s]), float(x[s]))
    return group_signal_h(kind, spec, spec.group_of(s), resources, attendance)


def agent_reward(scheme, kind, spec, resources: Sequence, attendance, agent_position: int) -> float:
    scheme = Scheme.parse(scheme.tag if isinstance(scheme, RewardScheme) else scheme)
    if scheme is Scheme.L:
        return local_reward(kind, resources, attendance, agent_position)
    if scheme is Scheme.G:
        return global_reward(kind, resources, attendance)
    if scheme is Scheme.D:
        return difference_reward(kind, resources, attendance, agent_position)
    if spec is None:
        raise ConfigError("reward scheme A requires an abstraction")
    return abstract_reward(kind, spec, resources, attendance, agent_position)


def optimal_welfare(kind, resources: Sequence, num_agents: int) -> tuple[float, np.ndarray]:
    """Exact maximum of G over all ways to place ``num_agents`` agents.

    Dynamic programme over resources; O(n * N^2) time. Returns the best value
    and one attendance vector attaining it.
    """
    k, weights, capacities, _ = _prep(kind, resources, np.zeros(len(resources)))
    n_max = int(num_agents)
    xs = np.arange(n_max + 1)
    best = np.full(n_max + 1, -np.inf)
    best[0] = 0.0
    choices = []
    # table[total, x] = best[total - x] + f_s(x)
    lower = xs[:, None] - xs[None, :]
    valid = lower >= 0
    for s in range(len(resources)):
        fs = np.array([_f(k, weights[s], float(capacities[s]), float(x)) for x in xs])
        table = np.where(valid, best[np.clip(lower, 0, None)] + fs[None, :], -np.inf)
        arg = table.argmax(axis=1)
        choices.append(arg)
        best = table[xs, arg]
    attendance = np.zeros(len(resources), dtype=np.int64)
    remaining = n_max
    for s in range(len(resources) - 1, -1, -1):
        attendance[s] = choices[s][remaining]
        remaining -= attendance[s]
    return float(best[n_max]), attendance
