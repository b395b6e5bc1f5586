"""Experiment runner: simulate / train / evaluate / sweep / validate-collision.

Every run writes CSV data files plus a manifest.json holding the full config
snapshot, seeds, and output names, so the manifest alone reproduces the run.
Exit codes: 0 success, 1 usage, 2 config validation, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (ConfigError, SimulationConfig, config_to_dict,
                     default_config, load_config)
from .engine import run_episode
from .sps import collision_probability, monte_carlo_collision
from .traffic import KIND_NAMES
from .agents import MpdqnAgent, RandomPolicy, evolve
from .agents import mpdqn as mpdqn_mod

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

POLICIES = ("random", "ga", "mpdqn")
SWEEP_AXES = ("n_vehicles", "message_size_bits", "omega1", "rri_fixed")

EPISODE_COLUMNS = ["seed", "episode", "e_bar_mj", "phi_bar_ms", "mean_reward",
                   "collisions", "drops"] + [f"aoi_{k}_ms" for k in KIND_NAMES]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # shortest round-trip, locale-independent
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(out_dir: Path, subcommand: str, cfg: SimulationConfig,
                    seeds: list[int], outputs: list[str], started: float) -> None:
    manifest = {
        "artifact_version": __version__,
        "subcommand": subcommand,
        "config": config_to_dict(cfg),
        "seeds": seeds,
        "outputs": outputs,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_cfg(args) -> SimulationConfig:
    cfg = load_config(args.config) if args.config else default_config()
    overrides = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        field_types = {f.name: f.type for f in dataclasses.fields(SimulationConfig)}
        if key not in field_types:
            raise ConfigError(f"unknown key {key!r}", key=key)
        kind = field_types[key]
        if kind in ("bool", bool):
            overrides[key] = value.strip().lower() in ("true", "1", "yes", "on")
        elif kind in ("int", int):
            overrides[key] = int(value)
        elif kind in ("float", float):
            overrides[key] = float(value)
        else:
            overrides[key] = tuple(int(p) for p in value.split(",") if p.strip())
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg.validate()


def _make_agent(policy: str, cfg: SimulationConfig, seed: int, checkpoint: str | None):
    """Build the policy for one seeded run; the seed tree covers agent init."""
    root = np.random.SeedSequence(seed)
    agent_seq, sim_seq = root.spawn(2)
    rng = np.random.default_rng(agent_seq)
    if policy == "random":
        agent = RandomPolicy(cfg, rng)
    elif policy == "ga":
        agent, _ = evolve(cfg, agent_seq)
    elif policy == "mpdqn":
        if not checkpoint:
            raise UsageError("--checkpoint is required for the mpdqn policy")
        agent = MpdqnAgent.load(checkpoint, cfg, rng)
        agent.explore = False
    else:
        raise UsageError(f"unknown policy {policy!r}")
    # cfg.rri_fixed, when set, is enforced inside the engine for every policy
    return agent, sim_seq


def _run_seed(cfg: SimulationConfig, policy: str, checkpoint: str | None, seed: int):
    """One seed's full set of episodes; returns episode_metrics rows."""
    agent, sim_seq = _make_agent(policy, cfg, seed, checkpoint)
    episode_seeds = sim_seq.spawn(cfg.episodes)
    rows = []
    for ep in range(cfg.episodes):
        m = run_episode(cfg, agent, episode_seeds[ep], record_epochs=False)
        agent.end_episode()
        rows.append([seed, ep, m.e_bar_mj, m.phi_bar_ms, m.mean_reward,
                     m.collisions, sum(m.drops)] + list(m.queue_aoi_ms))
    return rows


def _run_seeds_parallel(cfg, policy, checkpoint, seeds, workers: int | None):
    if len(seeds) == 1 or workers == 1:
        return [_run_seed(cfg, policy, checkpoint, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=min(len(seeds), workers or 4)) as pool:
        futures = [pool.submit(_run_seed, cfg, policy, checkpoint, s) for s in seeds]
        return [f.result() for f in futures]


# ---------------------------------------------------------------- subcommands
def cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    seeds = args.seeds if args.seeds else [cfg.seed]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    per_seed = _run_seeds_parallel(cfg, args.policy, args.checkpoint, seeds, args.workers)
    rows = [row for seed_rows in per_seed for row in seed_rows]
    _write_csv(out / "episode_metrics.csv", EPISODE_COLUMNS, rows)
    _write_manifest(out, "simulate", cfg, seeds, ["episode_metrics.csv"], started)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    outputs = ["reward_curve.csv", "checkpoint_final.npz"]

    def progress(ep, metrics, agent):
        if args.checkpoint_every and (ep + 1) % args.checkpoint_every == 0:
            name = f"checkpoint_ep{ep + 1:05d}.npz"
            agent.save(out / name)
            outputs.append(name)
        if not args.quiet:
            print(f"episode {ep + 1}/{cfg.episodes} reward={metrics.mean_reward:.4f}",
                  file=sys.stderr)

    agent, curve = mpdqn_mod.train(cfg, progress=progress)
    agent.save(out / "checkpoint_final.npz")
    _write_csv(out / "reward_curve.csv",
               ["episode", "mean_reward", "loss_q", "loss_x", "epsilon"], curve)
    _write_manifest(out, "train", cfg, [cfg.seed], outputs, started)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    seeds = args.seeds if args.seeds else [cfg.seed]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    rows = []
    for policy in args.policies:
        if policy == "mpdqn" and not args.checkpoint:
            raise UsageError("--checkpoint is required to evaluate mpdqn")
        for seed in seeds:
            seed_rows = _run_seed(cfg, policy, args.checkpoint, seed)
            rewards = [r[4] for r in seed_rows]
            phis = [r[3] for r in seed_rows]
            energies = [r[2] for r in seed_rows]
            rows.append([policy, seed, len(seed_rows),
                         float(np.mean(rewards)), float(np.mean(phis)),
                         float(np.mean(energies))])
    _write_csv(out / "evaluation.csv",
               ["policy", "seed", "episodes", "mean_reward", "phi_bar_ms", "e_bar_mj"],
               rows)
    _write_manifest(out, "evaluate", cfg, seeds, ["evaluation.csv"], started)
    return EXIT_OK


def _axis_value(axis: str, raw: str):
    if axis == "omega1":
        return float(raw)
    return int(raw)


def cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    if args.axis not in SWEEP_AXES:
        raise UsageError(f"unknown axis {args.axis!r}; choose from {SWEEP_AXES}")
    if not args.values:
        raise UsageError("sweep needs at least one --values entry")
    values = [_axis_value(args.axis, v) for v in args.values]
    if args.noma is not None:
        cfg = dataclasses.replace(cfg, noma_enabled=args.noma == "on")
    seeds = args.seeds if args.seeds else [cfg.seed]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    summary = []
    outputs = ["summary.csv"]
    for value in values:
        overrides = {args.axis: value}
        if args.axis == "omega1":
            overrides["omega2"] = 1.0 - value  # paired weights
        run_cfg = dataclasses.replace(cfg, **overrides).validate()
        sub = out / f"{args.axis}={value}"
        sub.mkdir(parents=True, exist_ok=True)
        per_seed = _run_seeds_parallel(run_cfg, args.policy, args.checkpoint, seeds,
                                       args.workers)
        rows = [row for seed_rows in per_seed for row in seed_rows]
        _write_csv(sub / "episode_metrics.csv", EPISODE_COLUMNS, rows)
        outputs.append(f"{args.axis}={value}/episode_metrics.csv")
        for seed, seed_rows in zip(seeds, per_seed):
            summary.append([args.axis, value, seed,
                            float(np.mean([r[3] for r in seed_rows])),
                            float(np.mean([r[2] for r in seed_rows])),
                            float(np.mean([r[4] for r in seed_rows])),
                            len(seed_rows)])
    _write_csv(out / "summary.csv",
               ["axis", "value", "seed", "phi_bar_ms", "e_bar_mj", "mean_reward",
                "episodes"], summary)
    _write_manifest(out, "sweep", cfg, seeds, outputs, started)
    return EXIT_OK


def cmd_validate_collision(args) -> int:
    cfg = _load_cfg(args)
    if args.trials < 10_000:
        raise UsageError("--trials must be >= 10000")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    rows = []
    for n_v in args.n_vehicles:
        for rri in args.rri:
            for p_rk in args.p_rk:
                csr = cfg.csr(rri)
                analytic = collision_probability(args.pi, rri, csr, n_v, p_rk)
                estimate = monte_carlo_collision(args.pi, rri, csr, n_v, p_rk,
                                                 args.trials, rng)
                rel = abs(analytic - estimate) / analytic if analytic > 0 else 0.0
                rows.append([n_v, rri, csr, p_rk, args.pi, analytic, estimate, rel])
    _write_csv(out / "collision_validation.csv",
               ["n_vehicles", "rri", "csr", "p_rk", "pi", "analytic_p_col",
                "monte_carlo_p_col", "rel_error"], rows)
    _write_manifest(out, "validate-collision", cfg, [cfg.seed],
                    ["collision_validation.csv"], started)
    return EXIT_OK


# ---------------------------------------------------------------- entry point
def build_parser() -> _Parser:
    parser = _Parser(prog="cv2xsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario file (key=value lines)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field (repeatable)")
        p.add_argument("--out", required=True, help="output directory")

    p_sim = sub.add_parser("simulate", help="run seeded episodes under one policy")
    common(p_sim)
    p_sim.add_argument("--policy", choices=POLICIES, default="random")
    p_sim.add_argument("--checkpoint", help="MPDQN checkpoint (.npz) for --policy mpdqn")
    p_sim.add_argument("--seeds", type=int, nargs="+")
    p_sim.add_argument("--workers", type=int, default=None,
                       help="parallel seed workers (default: up to 4)")
    p_sim.set_defaults(func=cmd_simulate)

    p_train = sub.add_parser("train", help="train the MPDQN agent")
    common(p_train)
    p_train.add_argument("--checkpoint-every", type=int, default=100)
    p_train.add_argument("--quiet", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="compare policies on common seeds")
    common(p_eval)
    p_eval.add_argument("--policies", nargs="+", choices=POLICIES,
                        default=list(POLICIES))
    p_eval.add_argument("--checkpoint", help="MPDQN checkpoint (.npz)")
    p_eval.add_argument("--seeds", type=int, nargs="+")
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="repeat simulate across one config axis")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", nargs="+", required=True)
    p_sweep.add_argument("--policy", choices=POLICIES, default="random")
    p_sweep.add_argument("--checkpoint")
    p_sweep.add_argument("--noma", choices=("on", "off"), default=None)
    p_sweep.add_argument("--seeds", type=int, nargs="+")
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_col = sub.add_parser("validate-collision",
                           help="analytic collision probability vs Monte Carlo")
    common(p_col)
    p_col.add_argument("--trials", type=int, default=100_000)
    p_col.add_argument("--pi", type=float, default=0.004,
                       help="per-slot readiness probability")
    p_col.add_argument("--n-vehicles", type=int, nargs="+", dest="n_vehicles",
                       default=[1, 5, 10, 20])
    p_col.add_argument("--rri", type=int, nargs="+", default=[20, 50, 100])
    p_col.add_argument("--p-rk", type=float, nargs="+", dest="p_rk",
                       default=[0.0, 0.8, 1.0])
    p_col.set_defaults(func=cmd_validate_collision)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
