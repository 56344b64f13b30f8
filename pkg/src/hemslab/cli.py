"""Command line interface.

    hemslab synth     --out DIR [--days N] [--holdout-days N] [--seed N]
    hemslab train     --config scenario.ini [--episodes N] [--seed N]
                      [--modes mixed|m0|m1|m2] [--out DIR]
    hemslab evaluate  --config scenario.ini --checkpoint FILE
                      [--modes ...] [--start STEP] [--out DIR]
    hemslab compare   --config scenario.ini --checkpoint FILE
                      [--modes ...] [--episodes N] [--out DIR]

Output directory resolution: --out beats $HEMSLAB_OUT beats the scenario's
[output] dir beats runs/<name> next to the scenario file.

Exit codes: 0 success, 1 unexpected internal error, 2 bad data or
configuration, 3 incompatible checkpoint, 4 infeasible schedule.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .agent import greedy_rollout, train, write_curve_csv
from .appliances import PreferenceMode
from .environment import HomeEnvironment
from .errors import (
    CompatibilityError,
    DataError,
    HemslabError,
    InfeasibleError,
)
from .neural import backend_name, load_checkpoint, save_checkpoint
from .oracle import oracle_schedule
from .scenario import Scenario, load_scenario
from .synth import generate_scenario

log = logging.getLogger("hemslab")

_MODE_FLAGS = {"m0": PreferenceMode.MODE0, "m1": PreferenceMode.MODE1,
               "m2": PreferenceMode.MODE2}


def _resolve_out(flag_out: str | None, scenario: Scenario) -> Path:
    if flag_out:
        return Path(flag_out)
    env_out = os.environ.get("HEMSLAB_OUT")
    if env_out:
        return Path(env_out)
    if scenario.output_dir is not None:
        return scenario.output_dir
    return scenario.path.parent / "runs" / scenario.name


def _resolve_modes(flag: str | None, scenario: Scenario, env: HomeEnvironment,
                   start: int):
    """Mode assignment for one episode.

    Fixed flags map every appliance to that mode. 'mixed' samples one mode
    per appliance through the environment's own seeded stream, so repeated
    runs with the same seed see the same assignment."""
    if flag in _MODE_FLAGS:
        return {a: _MODE_FLAGS[flag] for a in env.appliance_ids}
    if flag == "mixed" or (flag is None and scenario.mode_policy == "sample"):
        env.reset(start, "sample")
        return dict(env.modes)
    if flag is None and isinstance(scenario.mode_policy, dict):
        return dict(scenario.mode_policy)
    raise ValueError(f"unknown mode flag {flag!r}")


def _modes_label(modes: dict[str, PreferenceMode]) -> str:
    return ";".join(f"{a}={int(m)}" for a, m in sorted(modes.items()))


def _load_compatible_checkpoint(path: str, env: HomeEnvironment):
    if not Path(path).is_file():
        raise DataError(f"checkpoint not found: {path}")
    net, opt = load_checkpoint(path)
    if net.input_dim != env.observation_size or net.n_actions != env.n_actions:
        raise CompatibilityError(
            f"{path}: checkpoint expects {net.input_dim} observation features "
            f"and {net.n_actions} actions, but this scenario produces "
            f"{env.observation_size} and {env.n_actions}; the roster differs"
        )
    return net, opt


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_synth(args: argparse.Namespace) -> int:
    ini = generate_scenario(
        args.out, days=args.days, holdout_days=args.holdout_days,
        seed=args.seed, name=args.name, episodes=args.episodes,
    )
    log.info("wrote scenario %s (%d days, %d held out)", ini, args.days,
             args.holdout_days)
    print(ini)
    return 0


def _write_manifest(path: Path, scenario: Scenario, cfg, env: HomeEnvironment,
                    modes_flag: str | None, result) -> None:
    """Deterministic run record: same scenario, seed, and backend give a
    byte-identical file (no timestamps, no wall-clock)."""
    entries = {
        "backend": backend_name(),
        "batch_size": cfg.batch_size,
        "discount": cfg.discount,
        "episodes": cfg.episodes,
        "epsilon_decay": cfg.epsilon_decay,
        "epsilon_max": cfg.epsilon_max,
        "epsilon_min": cfg.epsilon_min,
        "gradient_steps": result.gradient_steps,
        "grid_origin": scenario.grid.origin.isoformat(),
        "hidden1": cfg.hidden1,
        "hidden2": cfg.hidden2,
        "holdout_days": scenario.holdout_days,
        "learning_rate": cfg.learning_rate,
        "modes": modes_flag if modes_flag else (
            "sample" if scenario.mode_policy == "sample" else "fixed"),
        "n_actions": env.n_actions,
        "observation_size": env.observation_size,
        "package_version": __version__,
        "replay_capacity": cfg.replay_capacity,
        "roster": ",".join(env.appliance_ids),
        "scenario": scenario.name,
        "seed": cfg.seed,
        "step_minutes": scenario.grid.step_minutes,
        "steps_per_episode": scenario.grid.steps_per_episode,
        "target_sync_period": cfg.target_sync_period,
        "target_syncs": result.target_syncs,
    }
    with open(path, "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={entries[key]}\n")


def _cmd_train(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    cfg = scenario.training
    if args.episodes is not None:
        cfg = dataclasses.replace(cfg, episodes=args.episodes)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    env = scenario.build_environment(seed=cfg.seed)
    train_starts, holdout = scenario.split_starts()

    if args.modes in _MODE_FLAGS:
        modes = {a: _MODE_FLAGS[args.modes] for a in env.appliance_ids}
    elif args.modes == "mixed" or scenario.mode_policy == "sample":
        modes = "sample"
    else:
        modes = scenario.mode_policy

    log.info("training %d episodes on %d starts (%d held out), backend=%s",
             cfg.episodes, len(train_starts), len(holdout), backend_name())

    def progress(point):
        if point.episode % 50 == 0 or point.episode == cfg.episodes - 1:
            log.info("episode %4d  epsilon=%.3f  reward=%.3f  loss=%.5f",
                     point.episode, point.epsilon, point.cum_reward,
                     point.loss_mean)

    result = train(env, cfg, episode_starts=train_starts, modes=modes,
                   on_episode=progress)

    out = _resolve_out(args.out, scenario)
    out.mkdir(parents=True, exist_ok=True)
    write_curve_csv(out / "curve.csv", result.curve)
    save_checkpoint(out / "checkpoint.bin", result.net, result.opt)
    _write_manifest(out / "manifest.txt", scenario, cfg, env, args.modes, result)
    log.info("finished in %.1f s (%d gradient steps); outputs in %s",
             result.seconds, result.gradient_steps, out)
    print(out / "checkpoint.bin")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    env = scenario.build_environment()
    net, _ = _load_compatible_checkpoint(args.checkpoint, env)
    train_starts, holdout = scenario.split_starts()
    if args.start is not None:
        start = args.start
    else:
        start = holdout[0] if holdout else train_starts[0]
    modes = _resolve_modes(args.modes, scenario, env, start)

    trace, costs, cum_reward, _ = greedy_rollout(net, env, start, modes)
    oracle = oracle_schedule(env, modes, start)

    out = _resolve_out(args.out, scenario)
    out.mkdir(parents=True, exist_ok=True)
    trace.write_csv(out / "trace.csv")
    oracle.write_csv(out / "oracle.csv")
    with open(out / "costs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["appliance_id", "mode", "agent_cost", "oracle_cost"])
        for a in env.appliance_ids:
            w.writerow([a, int(modes[a]), repr(costs[a]),
                        repr(oracle.appliances[a].cost)])
        w.writerow(["TOTAL", "", repr(costs["TOTAL"]), repr(oracle.total_cost)])

    gap = ((costs["TOTAL"] - oracle.total_cost) / oracle.total_cost
           if oracle.total_cost else float("inf"))
    log.info("start=%d modes=%s agent=%.4f oracle=%.4f gap=%+.2f%% reward=%.3f",
             start, _modes_label(modes), costs["TOTAL"], oracle.total_cost,
             100.0 * gap, cum_reward)
    print(out / "costs.csv")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    env = scenario.build_environment()
    net, _ = _load_compatible_checkpoint(args.checkpoint, env)
    _, holdout = scenario.split_starts()
    if not holdout:
        raise DataError(
            f"{scenario.path}: [data] holdout_days is 0; compare needs held-out days"
        )
    starts = holdout[:args.episodes] if args.episodes is not None else holdout

    out = _resolve_out(args.out, scenario)
    out.mkdir(parents=True, exist_ok=True)
    gaps = []
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "start", "modes", "agent_cost", "oracle_cost",
                    "gap", "agent_seconds", "oracle_seconds"])
        for i, start in enumerate(starts):
            modes = _resolve_modes(args.modes, scenario, env, start)
            _, costs, _, agent_seconds = greedy_rollout(net, env, start, modes)
            t0 = time.perf_counter()
            oracle = oracle_schedule(env, modes, start)
            oracle_seconds = time.perf_counter() - t0
            agent_cost = costs["TOTAL"]
            oracle_cost = oracle.total_cost
            gap = ((agent_cost - oracle_cost) / oracle_cost
                   if oracle_cost else float("inf"))
            gaps.append(gap)
            w.writerow([i, start, _modes_label(modes), repr(agent_cost),
                        repr(oracle_cost), repr(gap), repr(agent_seconds),
                        repr(oracle_seconds)])
            log.info("episode %2d start=%5d agent=%.4f oracle=%.4f gap=%+.2f%%",
                     i, start, agent_cost, oracle_cost, 100.0 * gap)
    log.info("mean gap over %d episodes: %+.2f%%", len(gaps),
             100.0 * sum(gaps) / len(gaps))
    print(out / "compare.csv")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hemslab",
        description="Home energy management lab: simulate, train, compare.",
    )
    parser.add_argument("--version", action="version", version=f"hemslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scenario directory")
    p.add_argument("--out", required=True, help="directory to write the scenario into")
    p.add_argument("--days", type=int, default=20)
    p.add_argument("--holdout-days", type=int, default=12)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--name", default=None)
    p.add_argument("--episodes", type=int, default=1500,
                   help="training episodes to write into the scenario")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train the controller on a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--modes", choices=["mixed", "m0", "m1", "m2"], default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="greedy rollout of one episode vs the oracle")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--modes", choices=["mixed", "m0", "m1", "m2"], default=None)
    p.add_argument("--start", type=int, default=None,
                   help="episode start step (default: first held-out day)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="agent vs oracle across held-out days")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--modes", choices=["mixed", "m0", "m1", "m2"], default=None)
    p.add_argument("--episodes", type=int, default=None,
                   help="number of held-out episodes (default: all)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        log.error("%s", exc)
        return 2
    except CompatibilityError as exc:
        log.error("%s", exc)
        return 3
    except InfeasibleError as exc:
        log.error("%s", exc)
        return 4
    except HemslabError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
