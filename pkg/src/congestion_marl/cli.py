"""``sim`` command line: run one experiment or a sweep of them."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .core import ConfigError
from .harness import (
    experiment_from_dict,
    format_csv,
    load_document,
    merge,
    run_experiment,
    sweep,
    sweep_from_dict,
    trace_path,
    write_csv,
    write_trace_csv,
)

log = logging.getLogger("congestion_marl")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim", description="Multiagent Q-learning on congestion problems (beach and traffic lanes).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write its learning curve as CSV")
    run.add_argument("--config", type=Path, help="JSON experiment config; flags override its values")
    run.add_argument("--domain", choices=["bpd", "tld"])
    run.add_argument("--reward", choices=["L", "G", "D", "A"], type=str.upper)
    group = run.add_mutually_exclusive_group()
    group.add_argument("--abstraction", metavar="SPEC", help='contiguous groups, e.g. "2+1+3"')
    group.add_argument("--abstraction-explicit", metavar="SPEC", help='explicit groups, e.g. "0,3,6;1,4,7;2,5,8"')
    run.add_argument("--agents", type=int)
    run.add_argument("--sections", type=int, help="number of resources sharing --capacity")
    caps = run.add_mutually_exclusive_group()
    caps.add_argument("--capacity", type=int)
    caps.add_argument("--capacities", type=_int_list, metavar="LIST")
    run.add_argument("--weights", type=_float_list, metavar="LIST")
    run.add_argument("--timesteps", type=int)
    run.add_argument("--episodes", type=int)
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=_u64, metavar="U64")
    run.add_argument("--noncompliant", type=float, metavar="FRACTION")
    run.add_argument("--accident-episode", type=int, metavar="N")
    run.add_argument("--accident-capacities", type=_int_list, metavar="LIST")
    run.add_argument("--accident-weights", type=_float_list, metavar="LIST")
    run.add_argument("--accident-reset-epsilon", action="store_true")
    run.add_argument("--record", choices=["final_timestep_G", "full_trace"])
    run.add_argument("--workers", type=int, help="threads running independent runs")
    run.add_argument("--out", metavar="PATH", help="CSV destination (default: stdout)")

    sw = sub.add_parser("sweep", help="run several labelled experiments from one config file")
    sw.add_argument("--config", type=Path, required=True)
    sw.add_argument("--out-dir", type=Path, required=True)
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    domain: dict = {}
    flags = {
        "domain": "kind", "reward": "reward_scheme", "agents": "num_agents", "sections": "sections",
        "capacity": "capacity", "capacities": "capacities", "weights": "weights",
        "timesteps": "num_timesteps", "episodes": "num_episodes", "noncompliant": "noncompliant_fraction",
    }
    for flag, key in flags.items():
        value = getattr(args, flag)
        if value is not None:
            domain[key] = value
    if args.abstraction is not None:
        domain["abstraction"] = args.abstraction
        domain["abstraction_explicit"] = None
    if args.abstraction_explicit is not None:
        domain["abstraction_explicit"] = args.abstraction_explicit
        domain["abstraction"] = None

    doc: dict = {"domain": domain}
    for flag, key in {"runs": "num_runs", "seed": "base_seed", "out": "output_path",
                      "record": "record", "workers": "workers"}.items():
        value = getattr(args, flag)
        if value is not None:
            doc[key] = value
    return doc


def _accident(args: argparse.Namespace):
    given = (args.accident_capacities, args.accident_weights, args.accident_reset_epsilon or None)
    if args.accident_episode is None:
        if any(v is not None for v in given):
            raise ConfigError("--accident-* options need --accident-episode")
        return None
    return {
        "episode": args.accident_episode,
        "new_capacities": args.accident_capacities,
        "new_weights": args.accident_weights,
        "reset_epsilon": bool(args.accident_reset_epsilon),
    }


def cmd_run(args: argparse.Namespace) -> int:
    base = load_document(args.config) if args.config else {}
    doc = merge(base, overrides_from_args(args))
    event = _accident(args)
    if event is not None:
        doc["domain"].setdefault("events", [])
        doc["domain"]["events"] = list(doc["domain"]["events"] or []) + [event]
    config = experiment_from_dict(doc)

    start = time.perf_counter()
    curve = run_experiment(config)
    elapsed = time.perf_counter() - start
    if config.output_path:
        write_csv(curve, config.output_path)
        if curve.trace_mean_G is not None:
            write_trace_csv(curve, trace_path(config.output_path))
    else:
        sys.stdout.write(format_csv(curve))
    print(f"{config.domain.kind.name} {config.domain.label}: final mean_G {curve.mean_G[-1]:.4f} "
          f"(stderr {curve.stderr_G[-1]:.4f}), converged {curve.converged():.4f}, "
          f"{config.num_runs} runs in {elapsed:.1f}s", file=sys.stderr)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    configs, labels = sweep_from_dict(load_document(args.config))
    curves = sweep(configs, labels, args.out_dir)
    for label, curve in curves.items():
        print(f"{label}: converged mean_G {curve.converged():.4f}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_sweep(args)
    except ConfigError as exc:
        print(f"sim: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"sim: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
