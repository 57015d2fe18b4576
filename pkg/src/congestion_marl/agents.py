"""Independent tabular Q-learners with epsilon-greedy exploration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import ConfigError

ACTIONS = (-1, 0, 1)  # left, stay, right
Q_INIT = -1.0


@dataclass(frozen=True)
class LearnerConfig:
    alpha0: float = 0.1
    gamma: float = 1.0
    epsilon0: float = 0.05
    alpha_decay: float = 0.9999
    epsilon_decay: float = 0.9999
    # "timestep" decays alpha/epsilon after every joint step, "episode" once per episode
    decay_per: str = "timestep"
    # no bootstrap on the last step of an episode; False bootstraps across the reset
    terminal_last_step: bool = True

    def __post_init__(self):
        checks = {
            "alpha0": 0 < self.alpha0 <= 1,
            "gamma": 0 <= self.gamma <= 1,
            "epsilon0": 0 <= self.epsilon0 <= 1,
            "alpha_decay": 0 < self.alpha_decay <= 1,
            "epsilon_decay": 0 < self.epsilon_decay <= 1,
        }
        if self.decay_per not in ("timestep", "episode"):
            raise ConfigError(f"decay_per must be 'timestep' or 'episode', got {self.decay_per!r}")
        for name, ok in checks.items():
            if not ok:
                raise ConfigError(f"learner parameter {name}={getattr(self, name)} out of range")


def new_q_table(num_resources: int) -> np.ndarray:
    """Q-values indexed ``[resource, action + 1]``, all initialised to -1."""
    return np.full((num_resources, len(ACTIONS)), Q_INIT)


@dataclass
class Agent:
    q: np.ndarray
    position: int
    initial_position: int
    compliant: bool = True

    @classmethod
    def at(cls, position: int, num_resources: int, compliant: bool = True) -> "Agent":
        return cls(new_q_table(num_resources), int(position), int(position), compliant)


@njit(cache=True)
def choose_action(q_row, epsilon, u_explore, u_pick):
    """Epsilon-greedy choice from two uniform draws in [0, 1).

    ``u_explore < epsilon`` explores and ``u_pick`` selects the action;
    otherwise ``u_pick`` selects uniformly among the tied maxima.
    """
    if u_explore < epsilon:
        return int(u_pick * 3.0) - 1
    best = q_row[0]
    for j in range(1, 3):
        if q_row[j] > best:
            best = q_row[j]
    ties = 0
    for j in range(3):
        if q_row[j] == best:
            ties += 1
    k = int(u_pick * ties)
    for j in range(3):
        if q_row[j] == best:
            if k == 0:
                return j - 1
            k -= 1
    return 0


@njit(cache=True)
def td_update(q, s_prev, action, reward, s_new, alpha, gamma):
    row = q[s_new]
    target = row[0]
    for j in range(1, 3):
        if row[j] > target:
            target = row[j]
    j = action + 1
    q[s_prev, j] += alpha * (reward + gamma * target - q[s_prev, j])


def select_action(agent: Agent, epsilon: float, rng: np.random.Generator) -> int:
    u = rng.random(2)
    return choose_action(agent.q[agent.position], epsilon, u[0], u[1])


def q_update(agent: Agent, s_prev: int, a: int, reward: float, s_new: int, alpha: float, gamma: float) -> np.ndarray:
    td_update(agent.q, s_prev, a, float(reward), s_new, float(alpha), float(gamma))
    return agent.q


def decay_schedules(alpha: float, epsilon: float, config: LearnerConfig) -> tuple[float, float]:
    return alpha * config.alpha_decay, epsilon * config.epsilon_decay
