import json

import numpy as np
import pytest

from congestion_marl.cli import main
from congestion_marl.config import beach
from congestion_marl.core import ConfigError
from congestion_marl.harness import (
    ExperimentConfig, LearningCurve, experiment_from_dict, mean_and_stderr, run_experiment, run_rng,
    sweep, sweep_from_dict, write_csv,
)


def small(**kwargs):
    domain = dict(num_agents=20, num_episodes=30, reward_scheme="D")
    domain.update(kwargs.pop("domain", {}))
    return ExperimentConfig(beach(**domain), **{"num_runs": 3, **kwargs})


def test_single_run_has_zero_stderr():
    curve = run_experiment(small(num_runs=1))
    assert curve.mean_G.shape == (30,) and (curve.stderr_G == 0).all()


def test_stderr_uses_sample_variance():
    samples = np.array([[1.0, 2.0], [3.0, 2.0], [5.0, 2.0]])
    mean, stderr = mean_and_stderr(samples)
    assert mean.tolist() == [3.0, 2.0]
    assert stderr.tolist() == pytest.approx([2.0 / np.sqrt(3), 0.0])


def test_identical_seeds_give_identical_runs():
    a = run_rng(42, 0).random(5)
    b = run_rng(42, 0).random(5)
    c = run_rng(42, 1).random(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_curve_independent_of_worker_count():
    serial = run_experiment(small())
    threaded = run_experiment(small(workers=3))
    assert np.array_equal(serial.mean_G, threaded.mean_G)
    assert np.array_equal(serial.stderr_G, threaded.stderr_G)
    assert (serial.stderr_G >= 0).all()


def test_full_trace_record():
    curve = run_experiment(small(record="full_trace", domain=dict(num_timesteps=4)))
    assert curve.trace_mean_G.shape == (30, 4)
    assert np.array_equal(curve.trace_mean_G[:, -1], curve.mean_G)


def test_write_csv(tmp_path):
    path = tmp_path / "one.csv"
    write_csv(LearningCurve(np.array([5.0]), np.array([0.0]), 1), path)
    assert path.read_text() == "episode,mean_G,stderr_G\n0,5.0,0.0\n"


def test_write_csv_precision_and_length(tmp_path):
    mean = np.linspace(0, 11.04, 10000) + 1e-9
    path = tmp_path / "long.csv"
    write_csv(LearningCurve(mean, np.zeros_like(mean), 30), path)
    lines = path.read_text().splitlines()
    assert len(lines) == 10001
    assert np.array_equal(np.loadtxt(path, delimiter=",", skiprows=1)[:, 1], mean)


def test_write_csv_empty_path():
    with pytest.raises(OSError, match="empty output path"):
        write_csv(LearningCurve(np.zeros(1), np.zeros(1), 1), "")


def test_csv_reproducible_byte_for_byte(tmp_path):
    write_csv(run_experiment(small(base_seed=9)), tmp_path / "a.csv")
    write_csv(run_experiment(small(base_seed=9)), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_sweep_writes_curves_and_summary(tmp_path):
    configs = [small(), small(domain=dict(reward_scheme="G"))]
    curves = sweep(configs, ["D", "G"], tmp_path)
    assert set(curves) == {"D", "G"}
    assert (tmp_path / "D.csv").exists() and (tmp_path / "G.csv").exists()
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == "label,converged_mean_G,final_mean_G,final_stderr_G,num_runs"
    assert len(summary) == 3


def test_single_config_sweep_equals_run(tmp_path):
    config = small()
    sweep([config], ["only"], tmp_path)
    write_csv(run_experiment(config), tmp_path / "direct.csv")
    assert (tmp_path / "only.csv").read_bytes() == (tmp_path / "direct.csv").read_bytes()


def test_sweep_rejects_duplicate_labels(tmp_path):
    with pytest.raises(ConfigError, match="duplicate"):
        sweep([small(), small()], ["a", "a"], tmp_path)
    with pytest.raises(ConfigError):
        sweep([], [], tmp_path)


def test_experiment_from_dict():
    config = experiment_from_dict({
        "domain": {"kind": "tld", "reward_scheme": "A", "abstraction": "0,3,6;1,4,7;2,5,8",
                   "num_episodes": 100, "learner": {"alpha0": 0.2},
                   "events": [{"episode": 50, "new_capacities": [1] * 9, "reset_epsilon": True}]},
        "num_runs": 2, "base_seed": 5,
    })
    assert config.domain.num_resources == 9 and config.domain.num_agents == 500
    assert config.domain.learner.alpha0 == 0.2
    assert config.domain.events[0].episode == 50
    assert config.domain.label == "A-0,3,6;1,4,7;2,5,8"


@pytest.mark.parametrize("doc", [
    {"domain": {"colour": "red"}},
    {"domain": {"learner": {"beta": 1}}},
    {"runs": 3},
    {"domain": {"capacities": [1, 2], "weights": [1]}},
    {"num_runs": 0},
    {"record": "everything"},
])
def test_bad_documents(doc):
    with pytest.raises(ConfigError):
        experiment_from_dict(doc)


def test_sweep_from_dict_merges_defaults():
    configs, labels = sweep_from_dict({
        "defaults": {"num_runs": 2, "domain": {"kind": "tld", "num_episodes": 10, "reward_scheme": "D"}},
        "experiments": [
            {"label": "p25", "domain": {"noncompliant_fraction": 0.75}},
            {"domain": {"reward_scheme": "A", "abstraction": "1+8"}},
        ],
    })
    assert labels == ["p25", "A-1+8"]
    assert configs[0].domain.noncompliant_fraction == 0.75 and configs[0].num_runs == 2
    assert configs[1].domain.num_episodes == 10


# --- CLI -------------------------------------------------------------------------

def test_cli_run_with_flags(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    rc = main(["run", "--domain", "bpd", "--reward", "A", "--abstraction", "2+1+3", "--agents", "30",
               "--episodes", "20", "--runs", "2", "--seed", "3", "--out", str(out)])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 21
    assert "A-2+1+3" in capsys.readouterr().err


def test_cli_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"domain": {"kind": "tld", "num_agents": 40, "num_episodes": 15,
                                          "reward_scheme": "D"}, "num_runs": 2}))
    out = tmp_path / "o.csv"
    rc = main(["run", "--config", str(cfg), "--episodes", "8", "--capacities", "5,5,5",
               "--weights", "1,2,3", "--accident-episode", "4", "--accident-capacities", "2,2,2",
               "--accident-reset-epsilon", "--record", "full_trace", "--out", str(out)])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 9
    assert len((tmp_path / "o_trace.csv").read_text().splitlines()) == 1 + 8 * 5


def test_cli_stdout_when_no_out(capsys):
    assert main(["run", "--agents", "10", "--episodes", "3", "--runs", "1"]) == 0
    assert capsys.readouterr().out.startswith("episode,mean_G,stderr_G\n0,")


@pytest.mark.parametrize("argv", [
    ["run", "--reward", "A"],
    ["run", "--abstraction", "4+3"],
    ["run", "--abstraction-explicit", "0,0;1,2,3,4,5"],
    ["run", "--domain", "bpd", "--capacities", "3,4"],
    ["run", "--accident-capacities", "1,2"],
    ["run", "--config", "/nonexistent/file.json"],
])
def test_cli_configuration_errors(argv, capsys):
    assert main(argv) == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_sweep(tmp_path):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({
        "defaults": {"num_runs": 2, "domain": {"num_agents": 20, "num_episodes": 10}},
        "experiments": [{"label": "L", "domain": {"reward_scheme": "L"}},
                        {"label": "A", "domain": {"reward_scheme": "A", "abstraction": "3+3"}}],
    }))
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "out")]) == 0
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["A.csv", "L.csv", "summary.csv"]
