import numpy as np
import pytest
from scipy.stats import chisquare

from congestion_marl.agents import (
    Agent, LearnerConfig, choose_action, decay_schedules, new_q_table, q_update, select_action,
)
from congestion_marl.core import ConfigError

DRAWS = 100_000


def frequencies(agent, epsilon, seed):
    rng = np.random.default_rng(seed)
    actions = [select_action(agent, epsilon, rng) for _ in range(DRAWS)]
    return np.bincount(np.array(actions) + 1, minlength=3)


def test_q_table_initialised_to_minus_one():
    q = new_q_table(6)
    assert q.shape == (6, 3) and (q == -1.0).all()


def test_pure_exploration_is_uniform():
    agent = Agent.at(2, 6)
    agent.q[2] = [-1.0, 5.0, -1.0]
    counts = frequencies(agent, 1.0, seed=1)
    assert chisquare(counts).pvalue > 1e-3


def test_greedy_unique_argmax():
    agent = Agent.at(0, 3)
    agent.q[0] = [-1.0, -0.5, -1.0]
    counts = frequencies(agent, 0.0, seed=2)
    assert counts.tolist() == [0, DRAWS, 0]


def test_greedy_ties_broken_uniformly():
    agent = Agent.at(1, 3)
    counts = frequencies(agent, 0.0, seed=3)
    assert chisquare(counts).pvalue > 1e-3


def test_two_way_tie():
    q_row = np.array([0.5, -1.0, 0.5])
    picks = [choose_action(q_row, 0.0, 0.9, u) for u in np.linspace(0, 1, 1000, endpoint=False)]
    assert set(picks) == {-1, 1}
    assert picks.count(-1) == 500


def test_q_update_hand_evaluated():
    agent = Agent.at(0, 6)
    before = agent.q.copy()
    q_update(agent, 0, 0, 2.20728, 0, alpha=0.1, gamma=1.0)
    assert agent.q[0, 1] == pytest.approx(-0.779272, abs=1e-12)
    changed = agent.q != before
    assert changed.sum() == 1 and changed[0, 1]


def test_q_update_bootstraps_from_new_state():
    agent = Agent.at(0, 3)
    agent.q[2] = [3.0, 7.0, -2.0]
    q_update(agent, 1, 1, 1.0, 2, alpha=0.5, gamma=0.9)
    assert agent.q[1, 2] == pytest.approx(-1 + 0.5 * (1.0 + 0.9 * 7.0 + 1), rel=1e-15)


def test_q_update_zero_alpha_is_identity():
    agent = Agent.at(0, 4)
    agent.q[:] = np.arange(12).reshape(4, 3)
    before = agent.q.copy()
    q_update(agent, 2, -1, 123.0, 3, alpha=0.0, gamma=1.0)
    assert np.array_equal(agent.q, before)


def test_q_update_zero_td_error():
    agent = Agent.at(0, 2)
    agent.q[0] = [0.25, -0.5, 1.5]
    before = agent.q.copy()
    q_update(agent, 0, 1, 1.5, 1, alpha=0.3, gamma=0.0)
    assert np.array_equal(agent.q, before)


def test_decay_schedules():
    config = LearnerConfig()
    alpha, epsilon = decay_schedules(0.1, 0.05, config)
    assert alpha == pytest.approx(0.09999, rel=1e-15)
    assert epsilon == pytest.approx(0.049995, rel=1e-15)
    assert decay_schedules(0.1, 0.05, LearnerConfig(alpha_decay=1.0, epsilon_decay=1.0)) == (0.1, 0.05)


def test_epsilon_after_fifty_thousand_steps():
    config = LearnerConfig()
    epsilon = 0.05
    for _ in range(50_000):
        _, epsilon = decay_schedules(0.1, epsilon, config)
    assert epsilon == pytest.approx(3.36813130529976418e-4, rel=1e-9)


@pytest.mark.parametrize("kwargs", [
    {"alpha0": 0.0}, {"alpha0": 1.5}, {"gamma": -0.1}, {"epsilon0": 2.0},
    {"alpha_decay": 0.0}, {"epsilon_decay": 1.01}, {"decay_per": "run"},
])
def test_learner_config_validation(kwargs):
    with pytest.raises(ConfigError):
        LearnerConfig(**kwargs)
