"""Command line entry point: ``td3fg <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .demos import BatchConfig, generate_demo_set, pretrain_generator, save_demos, windowed_mean
from .errors import TD3fGError
from .harness import (
    PRESET_NAMES,
    ExperimentConfig,
    RunLog,
    emit_csv,
    emit_svg_curves,
    evaluate,
    load_or_generate_demos,
    preset,
    read_csv,
    run_experiment,
    run_sweep,
)
from .nn import load_net, save_net

log = logging.getLogger("td3fg")


def resolve_config(args) -> ExperimentConfig:
    config = preset(args.preset)
    if args.config:
        config = ExperimentConfig.load(args.config, config)
    if args.env:
        config = dataclasses.replace(config, env=args.env)
    if args.steps is not None:
        config = config.with_total_steps(args.steps)
    return config


def add_common(p, out_help, steps_help="total environment steps (horizons rescale with it)"):
    p.add_argument("--preset", default="td3fg", choices=PRESET_NAMES)
    p.add_argument("--config", help="key = value config file applied over the preset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help=out_help)
    p.add_argument("--steps", type=int, help=steps_help)
    p.add_argument("--env", help="environment name")


def cmd_gen_demos(args) -> int:
    config = resolve_config(args)
    mix = args.mix or config.demo_mix
    demos = generate_demo_set(config.env_spec(), mix, args.seed)
    path = save_demos(demos, args.out or "demos.txt")
    stats = demos.stats
    print(f"wrote {len(demos)} trajectories to {path}: max {stats.max:.2f} min {stats.min:.2f} mean {stats.mean:.2f}")
    return 0


def cmd_pretrain(args) -> int:
    config = resolve_config(args)
    if args.demos:
        config = dataclasses.replace(config, demo_file=args.demos)
    iters = args.steps if args.steps is not None else config.pretrain_iters
    demos = load_or_generate_demos(config)
    net, history = pretrain_generator(
        demos, iters, BatchConfig(config.pretrain_n_traj, config.pretrain_n_trans), config.net_cfg(), seed=args.seed
    )
    path = save_net(net, args.out or "generator.npz")
    if history:
        w = windowed_mean(history)
        print(f"generator saved to {path}; windowed mse {w[0]:.4f} -> {w[-1]:.4f}")
    else:
        print(f"generator saved to {path} (no iterations)")
    return 0


def cmd_train(args) -> int:
    config = resolve_config(args)
    out = Path(args.out or Path(config.out_dir) / config.name)
    out.mkdir(parents=True, exist_ok=True)
    runlog, nets = run_experiment(config, args.seed, return_agent=True)
    emit_csv(runlog, out / f"seed{args.seed}.csv")
    (out / f"seed{args.seed}.json").write_text(runlog.to_json())
    (out / "config.txt").write_text(config.to_text())
    save_net(nets.actor, out / f"actor_seed{args.seed}.npz")
    print(json.dumps(runlog.summary()))
    return 1 if runlog.aborted_at is not None else 0


def cmd_eval(args) -> int:
    config = resolve_config(args)
    actor = load_net(args.checkpoint)
    result = evaluate(actor, config.env_spec(), args.episodes, args.seed)
    print(json.dumps(result._asdict()))
    return 0


def cmd_plot(args) -> int:
    logs = [RunLog({"name": Path(p).stem}, i, read_csv(p)) for i, p in enumerate(args.csv)]
    path = emit_svg_curves(logs, args.out or "curves.svg", labels=[Path(p).stem for p in args.csv])
    print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    config = resolve_config(args)
    seeds = tuple(args.seeds) if args.seeds else config.seeds
    out = args.out or str(Path(config.out_dir) / config.name)
    logs = run_sweep(config, seeds, out, jobs=args.jobs)
    finals = [rl.final_return for rl in logs]
    print(f"{config.name}: median final return {float(np.median(finals)):.2f} over seeds {list(seeds)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="td3fg", description="Generator-guided TD3 experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", help="roll out scripted demonstrators and save them")
    add_common(p, "demo file to write")
    p.add_argument("--mix", help="tier counts, e.g. expert:60,suboptimal:30,failing:10")
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("pretrain", help="behavior-clone the generator and save a checkpoint")
    add_common(p, "checkpoint path (.npz)", "pretraining iterations")
    p.add_argument("--demos", help="demo file (generated from the config when omitted)")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="run one seed and write CSV, JSON log and actor checkpoint")
    add_common(p, "output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved actor without exploration noise")
    add_common(p, "unused")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="draw learning curves from CSV logs as SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", help="SVG path")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("sweep", help="run a preset over several seeds")
    add_common(p, "output directory")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TD3fGError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
