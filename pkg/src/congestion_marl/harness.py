"""Multi-run experiments, learning-curve aggregation, CSV output and config files."""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .abstraction import parse_explicit_spec
from .agents import LearnerConfig
from .config import TLD_CAPACITIES, TLD_WEIGHTS, DomainConfig, ScheduledEvent, parse_abstraction
from .core import ConfigError, Domain, Resource
from .environment import RunResult, simulate_run

logger = logging.getLogger(__name__)

RECORD_MODES = ("final_timestep_G", "full_trace")
CONVERGED_WINDOW = 100


@dataclass(frozen=True)
class ExperimentConfig:
    domain: DomainConfig
    num_runs: int = 30
    base_seed: int = 0
    output_path: Optional[str] = None
    record: str = "final_timestep_G"
    workers: int = 1

    def __post_init__(self):
        if int(self.num_runs) != self.num_runs or self.num_runs < 1:
            raise ConfigError(f"num_runs must be >= 1, got {self.num_runs}")
        if not 0 <= int(self.base_seed) < 2**64:
            raise ConfigError(f"base_seed must be an unsigned 64-bit integer, got {self.base_seed}")
        if self.record not in RECORD_MODES:
            raise ConfigError(f"record must be one of {RECORD_MODES}, got {self.record!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


@dataclass
class LearningCurve:
    mean_G: np.ndarray
    stderr_G: np.ndarray
    num_runs: int
    # (num_episodes, num_timesteps), only with record="full_trace"
    trace_mean_G: Optional[np.ndarray] = None
    trace_stderr_G: Optional[np.ndarray] = None

    @property
    def num_episodes(self) -> int:
        return len(self.mean_G)

    def converged(self, window: int = CONVERGED_WINDOW) -> float:
        """Mean of ``mean_G`` over the final ``window`` episodes."""
        return float(np.mean(self.mean_G[-window:]))


def run_rng(base_seed: int, run_index: int) -> np.random.Generator:
    """Independent stream for one run, split from ``base_seed`` by run index."""
    seq = np.random.SeedSequence(int(base_seed), spawn_key=(int(run_index),))
    return np.random.Generator(np.random.PCG64(seq))


def mean_and_stderr(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate over axis 0; stderr uses the n-1 sample variance and is 0 for n=1."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=0, ddof=1) / math.sqrt(n)


def run_experiment(config: ExperimentConfig) -> LearningCurve:
    domain = config.domain

    def one(run_index: int) -> RunResult:
        return simulate_run(domain, run_rng(config.base_seed, run_index))

    logger.info("running %d runs of %s %s (%d agents, %d steps x %d episodes)",
                config.num_runs, domain.kind.name, domain.label, domain.num_agents,
                domain.num_timesteps, domain.num_episodes)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(one, range(config.num_runs)))
    else:
        results = [one(r) for r in range(config.num_runs)]

    traces = np.stack([r.trace for r in results])
    mean, stderr = mean_and_stderr(traces[:, :, -1])
    curve = LearningCurve(mean, stderr, config.num_runs)
    if config.record == "full_trace":
        curve.trace_mean_G, curve.trace_stderr_G = mean_and_stderr(traces)
    return curve


def _fmt(value: float) -> str:
    # repr is the shortest string that round-trips a double
    return repr(float(value))


def _open_for_write(path) -> io.TextIOBase:
    if path is None or str(path) == "":
        raise OSError("cannot write CSV: empty output path")
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc


def format_csv(curve: LearningCurve) -> str:
    lines = ["episode,mean_G,stderr_G"]
    lines += [f"{e},{_fmt(m)},{_fmt(s)}" for e, (m, s) in enumerate(zip(curve.mean_G, curve.stderr_G))]
    return "\n".join(lines) + "\n"


def write_csv(curve: LearningCurve, path) -> None:
    with _open_for_write(path) as fh:
        fh.write(format_csv(curve))


def write_trace_csv(curve: LearningCurve, path) -> None:
    if curve.trace_mean_G is None:
        raise ValueError("curve has no per-timestep trace (record='full_trace' was not used)")
    with _open_for_write(path) as fh:
        fh.write("episode,timestep,mean_G,stderr_G\n")
        episodes, steps = curve.trace_mean_G.shape
        for e in range(episodes):
            for t in range(steps):
                fh.write(f"{e},{t},{_fmt(curve.trace_mean_G[e, t])},{_fmt(curve.trace_stderr_G[e, t])}\n")


def trace_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_trace" + path.suffix)


def label_filename(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._+-]", "_", label) + ".csv"


def sweep(configs: Sequence[ExperimentConfig], labels: Sequence[str], out_dir) -> dict[str, LearningCurve]:
    """Run every config, writing ``<label>.csv`` per config and ``summary.csv``."""
    if not configs:
        raise ConfigError("sweep needs at least one experiment")
    if len(configs) != len(labels):
        raise ConfigError(f"{len(configs)} configs but {len(labels)} labels")
    seen = set()
    for label in labels:
        if label in seen:
            raise ConfigError(f"duplicate sweep label {label!r}")
        seen.add(label)
    filenames = [label_filename(l) for l in labels]
    if len(set(filenames)) != len(filenames):
        raise ConfigError("sweep labels collide after filename sanitising")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = {}
    for config, label, filename in zip(configs, labels, filenames):
        curve = run_experiment(config)
        write_csv(curve, out_dir / filename)
        if curve.trace_mean_G is not None:
            write_trace_csv(curve, trace_path(out_dir / filename))
        curves[label] = curve
        logger.info("%s: converged mean_G %.4f", label, curve.converged())

    with _open_for_write(out_dir / "summary.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", "converged_mean_G", "final_mean_G", "final_stderr_G", "num_runs"])
        for label, curve in curves.items():
            writer.writerow([label, _fmt(curve.converged()), _fmt(curve.mean_G[-1]),
                             _fmt(curve.stderr_G[-1]), curve.num_runs])
    return curves


# --- config documents -------------------------------------------------------

_RESOURCE_KEYS = ("resources", "capacities", "weights", "sections", "capacity")
# keys that fix the number of resources; overriding one discards the others
_LAYOUT_KEYS = ("resources", "capacities", "sections")


def _resources_from(doc: Mapping[str, Any], kind: Domain) -> tuple[Resource, ...]:
    if "resources" in doc:
        return tuple(Resource(r.get("weight", 1.0), r["capacity"]) for r in doc["resources"])
    if "capacities" in doc:
        capacities = list(doc["capacities"])
        weights = list(doc.get("weights", [1.0] * len(capacities)))
        if len(weights) != len(capacities):
            raise ConfigError(f"{len(capacities)} capacities but {len(weights)} weights")
        return tuple(Resource(w, c) for w, c in zip(weights, capacities))
    if kind is Domain.TLD and "sections" not in doc and "capacity" not in doc:
        weights = doc.get("weights", TLD_WEIGHTS)
        return tuple(Resource(w, c) for w, c in zip(weights, TLD_CAPACITIES))
    sections = int(doc.get("sections", len(doc["weights"]) if "weights" in doc else 6))
    capacity = int(doc.get("capacity", 6))
    weights = list(doc.get("weights", [1.0] * sections))
    if len(weights) != sections:
        raise ConfigError(f"{sections} sections but {len(weights)} weights")
    return tuple(Resource(w, capacity) for w in weights)


def domain_from_dict(doc: Mapping[str, Any]) -> DomainConfig:
    known = {f.name for f in fields(DomainConfig)} | set(_RESOURCE_KEYS) | {"abstraction_explicit"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown domain field(s): {', '.join(sorted(unknown))}")
    kind = Domain.parse(doc.get("kind", "bpd"))
    resources = _resources_from(doc, kind)
    n = len(resources)

    abstraction = None
    if doc.get("abstraction_explicit"):
        abstraction = parse_explicit_spec(str(doc["abstraction_explicit"]), n)
    elif doc.get("abstraction"):
        abstraction = parse_abstraction(str(doc["abstraction"]), n)

    learner_doc = dict(doc.get("learner") or {})
    learner_known = {f.name for f in fields(LearnerConfig)}
    if set(learner_doc) - learner_known:
        raise ConfigError(f"unknown learner field(s): {', '.join(sorted(set(learner_doc) - learner_known))}")

    events = []
    for ev in doc.get("events") or []:
        try:
            events.append(ScheduledEvent(**ev))
        except TypeError as exc:
            raise ConfigError(f"bad event {ev!r}: {exc}") from None

    default_agents = 500 if kind is Domain.TLD else 100
    return DomainConfig(
        kind=kind,
        resources=resources,
        num_agents=int(doc.get("num_agents", default_agents)),
        num_timesteps=int(doc.get("num_timesteps", 5)),
        num_episodes=int(doc.get("num_episodes", 10000)),
        reward_scheme=doc.get("reward_scheme", "G"),
        abstraction=abstraction,
        learner=LearnerConfig(**learner_doc),
        noncompliant_fraction=float(doc.get("noncompliant_fraction", 0.0)),
        events=tuple(events),
    )


def experiment_from_dict(doc: Mapping[str, Any]) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)} | {"label"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown experiment field(s): {', '.join(sorted(unknown))}")
    return ExperimentConfig(
        domain=domain_from_dict(doc.get("domain") or {}),
        num_runs=int(doc.get("num_runs", 30)),
        base_seed=int(doc.get("base_seed", 0)),
        output_path=doc.get("output_path"),
        record=doc.get("record", "final_timestep_G"),
        workers=int(doc.get("workers", 1)),
    )


def merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; resource keys in ``override`` replace all of ``base``'s."""
    out = copy.deepcopy(dict(base))
    if any(k in override for k in _LAYOUT_KEYS):
        for k in _RESOURCE_KEYS:
            out.pop(k, None)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_document(path) -> dict[str, Any]:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def sweep_from_dict(doc: Mapping[str, Any]) -> tuple[list[ExperimentConfig], list[str]]:
    """``{"defaults": {...}, "experiments": [{"label": ..., ...}, ...]}``."""
    entries = doc.get("experiments")
    if not entries:
        raise ConfigError("sweep config needs a non-empty 'experiments' list")
    defaults = doc.get("defaults") or {}
    configs, labels = [], []
    for i, entry in enumerate(entries):
        merged = merge(defaults, entry)
        config = experiment_from_dict(merged)
        labels.append(str(merged.get("label") or config.domain.label or f"exp{i}"))
        configs.append(config)
    return configs, labels


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))
