"""Episode simulation: simultaneous moves, rewards, Q-updates and schedule decay.

Two engines share the same random stream and arithmetic:

* a readable reference built from :func:`run_timestep` / :func:`run_episode`
  over :class:`~congestion_marl.agents.Agent` objects;
* a compiled kernel (:func:`simulate_run`) used by the experiment harness.

Every timestep consumes ``rng.random((num_agents, 2))``: column 0 decides
exploration, column 1 picks the action (or breaks a tie). Draws belonging to
non-compliant agents are discarded so the stream layout never depends on
compliance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .agents import Agent, choose_action, decay_schedules, td_update
from .config import DomainConfig, ScheduledEvent
from .core import ConfigError, Resource, WorldState, recompute_attendance, resource_arrays
from .rewards import global_reward, resource_rewards

# Cap on uniforms drawn per chunk (32 MiB of float64).
_CHUNK_DRAWS = 1 << 22


def initial_placement(num_agents: int, num_resources: int) -> np.ndarray:
    """Spread agents evenly, agent ``i`` starting on resource ``i mod n``.

    Resource ``s`` receives ``num_agents // n`` agents plus one when
    ``s < num_agents % n``.
    """
    if num_resources < 1:
        raise ValueError("num_resources must be >= 1")
    return np.arange(num_agents, dtype=np.int64) % num_resources


def apply_move(position: int, action: int, num_resources: int) -> int:
    return min(max(position + action, 0), num_resources - 1)


def compliance_mask(num_agents: int, num_noncompliant: int) -> np.ndarray:
    mask = np.ones(num_agents, dtype=np.bool_)
    mask[:num_noncompliant] = False
    return mask


def make_agents(config: DomainConfig) -> list[Agent]:
    positions = initial_placement(config.num_agents, config.num_resources)
    compliant = compliance_mask(config.num_agents, config.num_noncompliant)
    return [Agent.at(p, config.num_resources, bool(c)) for p, c in zip(positions, compliant)]


@dataclass
class Schedule:
    """Global learning rate and exploration rate, shared by all agents."""

    alpha: float
    epsilon: float

    @classmethod
    def initial(cls, config: DomainConfig) -> "Schedule":
        return cls(config.learner.alpha0, config.learner.epsilon0)


@dataclass
class EpisodeTrace:
    global_reward: np.ndarray  # G after every timestep

    @property
    def final_G(self) -> float:
        return float(self.global_reward[-1])


def run_timestep(state: WorldState, agents: list[Agent], config: DomainConfig,
                 alpha: float, epsilon: float, rng: np.random.Generator, final: bool = False):
    """Advance one joint step. Returns ``(state, rewards, alpha, epsilon)``.

    All agents choose from the pre-move state, then all moves commit, then
    rewards are computed for the post-move configuration. ``final`` marks the
    last step of an episode.
    """
    n = config.num_resources
    learner = config.learner
    u = rng.random((len(agents), 2))
    prev = np.empty(len(agents), dtype=np.int64)
    actions = np.zeros(len(agents), dtype=np.int64)
    for i, agent in enumerate(agents):
        prev[i] = agent.position
        if agent.compliant:
            actions[i] = choose_action(agent.q[agent.position], epsilon, u[i, 0], u[i, 1])
    for i, agent in enumerate(agents):
        agent.position = apply_move(agent.position, int(actions[i]), n)

    positions = np.array([a.position for a in agents], dtype=np.int64)
    attendance = recompute_attendance(positions, n)
    weights, capacities = resource_arrays(config.resources)
    group_index, num_groups = _groups(config)
    per_resource = np.zeros(n)
    resource_rewards(int(config.kind), config.scheme.tag.code, weights, capacities, attendance,
                     group_index, num_groups, per_resource)
    rewards = per_resource[positions]

    gamma = 0.0 if final and learner.terminal_last_step else learner.gamma
    for i, agent in enumerate(agents):
        if agent.compliant:
            td_update(agent.q, prev[i], actions[i], rewards[i], agent.position, alpha, gamma)
    if learner.decay_per == "timestep":
        alpha, epsilon = decay_schedules(alpha, epsilon, learner)
    new_state = WorldState(attendance, positions, state.timestep + 1, state.episode)
    return new_state, rewards, alpha, epsilon


def run_episode(agents: list[Agent], config: DomainConfig, schedules: Schedule,
                rng: np.random.Generator, episode: int = 0) -> EpisodeTrace:
    """Run one episode from the agents' initial positions; ``schedules`` is updated in place."""
    for agent in agents:
        agent.position = agent.initial_position
    state = WorldState.from_positions([a.position for a in agents], config.num_resources, 0, episode)
    steps = config.num_timesteps
    trace = np.empty(steps)
    for t in range(steps):
        state, _, schedules.alpha, schedules.epsilon = run_timestep(
            state, agents, config, schedules.alpha, schedules.epsilon, rng, final=t == steps - 1)
        trace[t] = global_reward(config.kind, config.resources, state.attendance)
    if config.learner.decay_per == "episode":
        schedules.alpha, schedules.epsilon = decay_schedules(schedules.alpha, schedules.epsilon, config.learner)
    for agent in agents:
        agent.position = agent.initial_position
    return EpisodeTrace(trace)


def apply_event(event: ScheduledEvent, config: DomainConfig, epsilon: float) -> tuple[DomainConfig, float]:
    resources = config.resources
    n = len(resources)
    for vec in (event.new_capacities, event.new_weights):
        if vec is not None and len(vec) != n:
            raise ConfigError(f"event at episode {event.episode}: vector of length {len(vec)} for {n} resources")
    if event.new_capacities is not None or event.new_weights is not None:
        capacities = event.new_capacities or tuple(r.capacity for r in resources)
        weights = event.new_weights or tuple(r.weight for r in resources)
        config = config.with_resources(Resource(w, c) for w, c in zip(weights, capacities))
    if event.reset_epsilon:
        epsilon = config.learner.epsilon0
    return config, epsilon


def _groups(config: DomainConfig) -> tuple[np.ndarray, int]:
    spec = config.scheme.abstraction
    if spec is None:
        return np.zeros(config.num_resources, dtype=np.int64), 1
    return np.ascontiguousarray(spec.group_index), spec.num_groups


def _segments(config: DomainConfig):
    """Yield ``(start, stop, events_at_start)`` episode ranges split at event boundaries."""
    by_episode: dict[int, list[ScheduledEvent]] = {}
    for event in config.events:
        if event.episode < config.num_episodes:
            by_episode.setdefault(event.episode, []).append(event)
    bounds = [0] + sorted(by_episode) + [config.num_episodes]
    for start, stop in zip(bounds[:-1], bounds[1:]):
        yield start, stop, by_episode.get(start, [])


@njit(cache=True, nogil=True)
def _run_episodes(kind, scheme, weights, capacities, group_index, num_groups,
                  q, initial, compliant, uniforms, alpha, epsilon,
                  alpha_decay, epsilon_decay, gamma, decay_per_step, terminal_last, trace):
    num_episodes, num_timesteps, num_agents = uniforms.shape[0], uniforms.shape[1], uniforms.shape[2]
    n = weights.size
    pos = np.empty(num_agents, dtype=np.int64)
    prev = np.empty(num_agents, dtype=np.int64)
    act = np.zeros(num_agents, dtype=np.int64)
    attendance = np.zeros(n, dtype=np.int64)
    per_resource = np.zeros(n)
    for e in range(num_episodes):
        for i in range(num_agents):
            pos[i] = initial[i]
        for t in range(num_timesteps):
            for i in range(num_agents):
                s = pos[i]
                prev[i] = s
                if compliant[i]:
                    a = choose_action(q[i, s], epsilon, uniforms[e, t, i, 0], uniforms[e, t, i, 1])
                    act[i] = a
                    pos[i] = min(max(s + a, 0), n - 1)
            attendance[:] = 0
            for i in range(num_agents):
                attendance[pos[i]] += 1
            g = resource_rewards(kind, scheme, weights, capacities, attendance,
                                 group_index, num_groups, per_resource)
            g_boot = 0.0 if terminal_last and t == num_timesteps - 1 else gamma
            for i in range(num_agents):
                if compliant[i]:
                    td_update(q[i], prev[i], act[i], per_resource[pos[i]], pos[i], alpha, g_boot)
            trace[e, t] = g
            if decay_per_step:
                alpha = alpha * alpha_decay
                epsilon = epsilon * epsilon_decay
        if not decay_per_step:
            alpha = alpha * alpha_decay
            epsilon = epsilon * epsilon_decay
    return alpha, epsilon


@dataclass
class RunResult:
    trace: np.ndarray  # (num_episodes, num_timesteps) global reward
    q: np.ndarray  # (num_agents, num_resources, 3)
    alpha: float
    epsilon: float

    @property
    def final_G(self) -> np.ndarray:
        return self.trace[:, -1]


def simulate_run(config: DomainConfig, rng: np.random.Generator) -> RunResult:
    """One full learning run with the compiled kernel."""
    n, num_agents, steps = config.num_resources, config.num_agents, config.num_timesteps
    initial = initial_placement(num_agents, n)
    compliant = compliance_mask(num_agents, config.num_noncompliant)
    q = np.full((num_agents, n, 3), -1.0)
    trace = np.empty((config.num_episodes, steps))
    alpha, epsilon = config.learner.alpha0, config.learner.epsilon0
    chunk = max(1, _CHUNK_DRAWS // (steps * num_agents * 2))
    group_index, num_groups = _groups(config)
    learner = config.learner
    for start, stop, events in _segments(config):
        for event in events:
            config, epsilon = apply_event(event, config, epsilon)
        weights, capacities = resource_arrays(config.resources)
        for lo in range(start, stop, chunk):
            hi = min(lo + chunk, stop)
            uniforms = rng.random((hi - lo, steps, num_agents, 2))
            alpha, epsilon = _run_episodes(
                int(config.kind), config.scheme.tag.code, weights, capacities, group_index, num_groups,
                q, initial, compliant, uniforms, alpha, epsilon,
                learner.alpha_decay, learner.epsilon_decay, learner.gamma,
                learner.decay_per == "timestep", learner.terminal_last_step, trace[lo:hi])
    return RunResult(trace, q, alpha, epsilon)


def simulate_run_reference(config: DomainConfig, rng: np.random.Generator) -> RunResult:
    """Same contract as :func:`simulate_run`, built from the per-agent Python API."""
    agents = make_agents(config)
    schedules = Schedule.initial(config)
    trace = np.empty((config.num_episodes, config.num_timesteps))
    for start, stop, events in _segments(config):
        for event in events:
            config, schedules.epsilon = apply_event(event, config, schedules.epsilon)
        for e in range(start, stop):
            trace[e] = run_episode(agents, config, schedules, rng, e).global_reward
    q = np.stack([a.q for a in agents]) if agents else np.empty((0, config.num_resources, 3))
    return RunResult(trace, q, schedules.alpha, schedules.epsilon)
