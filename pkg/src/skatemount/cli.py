"""``skatemount`` command line: train, eval, plot and validate."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import checkpoint as ckpt_io
from .config import DEFAULT_CONFIG, check_config_file, config_hash, dump_config
from .evaluate import evaluate_policy
from .metrics import MetricsWriter
from .plotting import plot_reward_curves
from .trainer import DimensionMismatchError, train_stage

OUTPUT_DIR_ENV = "SKATEMOUNT_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "runs"

EXIT_OK, EXIT_CONFIG, EXIT_EXISTS, EXIT_DIMS, EXIT_CHECKPOINT, EXIT_INTERRUPT = 0, 1, 2, 3, 4, 130

log = logging.getLogger("skatemount")


def default_config_path() -> Path:
    return Path(__file__).with_name(DEFAULT_CONFIG)


def metrics_path(out: Path, stage_id: str) -> Path:
    return out / f"metrics_{stage_id}.csv"


def checkpoint_path(out: Path, stage_id: str) -> Path:
    return out / f"{stage_id}.ckpt"


def _output_dir(args, cfg=None) -> Path:
    if args.output_dir:
        return Path(args.output_dir)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))


def _print_report(errors, warnings, stream=None):
    stream = stream or sys.stderr
    for path, msg in errors:
        print(f"error: {path}: {msg}", file=stream)
    for path, msg in warnings:
        print(f"warning: {path}: {msg}", file=stream)


def _load_config(args):
    """Returns the validated config, or None after printing the violations."""
    path = Path(args.config) if args.config else default_config_path()
    cfg, errors, warns = check_config_file(path)
    if errors:
        print(f"invalid configuration {path}:", file=sys.stderr)
        _print_report(errors, warns)
        return None
    _print_report([], warns)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "num_envs", None) is not None:
        cfg.num_envs = args.num_envs
    return cfg


def _refuse_existing(paths, force: bool) -> bool:
    existing = [p for p in paths if p.exists()]
    if existing and not force:
        print("refusing to overwrite existing output (use --force):", file=sys.stderr)
        for p in existing:
            print(f"  {p}", file=sys.stderr)
        return True
    return False


def _load_checkpoint(path):
    try:
        return ckpt_io.load(path)
    except OSError as exc:
        print(f"cannot read checkpoint {path}: {exc.strerror}", file=sys.stderr)
    except ckpt_io.CheckpointError as exc:
        print(f"invalid checkpoint {path}: {exc}", file=sys.stderr)
    return None


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _load_config(args)
    if cfg is None:
        return EXIT_CONFIG
    if args.stage is not None:
        try:
            stages = [cfg.stage(args.stage)]
        except KeyError as exc:
            print(exc.args[0], file=sys.stderr)
            return EXIT_CONFIG
    else:
        stages = list(cfg.stages)
    if args.iterations is not None:
        stages = [dataclasses.replace(s, iterations=args.iterations) for s in stages]
        cfg.stages = [next((t for t in stages if t.id == s.id), s) for s in cfg.stages]
    out = _output_dir(args, cfg)
    targets = [metrics_path(out, s.id) for s in stages] + [checkpoint_path(out, s.id) for s in stages]
    if _refuse_existing(targets, args.force):
        return EXIT_EXISTS
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(cfg))
    digest = config_hash(cfg)

    warm = None
    resume = args.resume or cfg.warm_start
    if resume:
        warm = _load_checkpoint(resume)
        if warm is None:
            return EXIT_CHECKPOINT
    stage_order = [s.id for s in cfg.stages]
    for stage in stages:
        mpath, cpath = metrics_path(out, stage.id), checkpoint_path(out, stage.id)
        print(f"[{stage.id}] {stage.iterations} iterations, {cfg.num_envs} envs -> {mpath}", file=sys.stderr)
        try:
            with MetricsWriter(mpath, digest, cfg.seed, stage.id) as writer:
                def on_iteration(stats, writer=writer, sid=stage.id):
                    writer.write(stats)
                    if args.verbose:
                        print(f"[{sid}] it {stats.iteration:4d}  reward {stats.mean_ep_reward:8.3f}  "
                              f"len {stats.mean_ep_len:6.1f}  kl {stats.kl:.4f}  lr {stats.learning_rate:.2e}",
                              file=sys.stderr)

                result, _ = train_stage(
                    stage, cfg.ppo, num_envs=cfg.num_envs, seed=cfg.seed, stream=stage_order.index(stage.id),
                    warm_start=warm, robot_params=cfg.robot, board_params=cfg.skateboard, sim=cfg.sim,
                    num_workers=cfg.num_workers, on_iteration=on_iteration,
                    checkpoint_every=cfg.checkpoint_every, on_checkpoint=lambda c, p=cpath: ckpt_io.save(c, p),
                    record_wall_time=cfg.record_wall_time)
        except DimensionMismatchError as exc:
            print(f"cannot warm-start stage {stage.id}: {exc}", file=sys.stderr)
            return EXIT_DIMS
        except KeyboardInterrupt:
            print(f"interrupted during {stage.id}; last checkpoint kept at {cpath}", file=sys.stderr)
            return EXIT_INTERRUPT
        warm = result
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    if cfg is None:
        return EXIT_CONFIG
    ckpt = _load_checkpoint(args.checkpoint)
    if ckpt is None:
        return EXIT_CHECKPOINT
    stage_id = args.stage or cfg.stages[0].id
    try:
        stage = cfg.stage(stage_id)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_CONFIG
    out = _output_dir(args, cfg)
    summary_file = out / f"eval_{stage_id}.json"
    traj_dir = out / f"trajectories_{stage_id}" if args.trajectories else None
    if _refuse_existing([summary_file] + ([traj_dir] if traj_dir else []), args.force):
        return EXIT_EXISTS
    try:
        summary = evaluate_policy(ckpt.policy, stage, args.episodes, seed=cfg.seed,
                                  deterministic=args.deterministic, num_envs=cfg.num_envs,
                                  robot_params=cfg.robot, board_params=cfg.skateboard, sim=cfg.sim,
                                  trajectory_dir=traj_dir)
    except ValueError as exc:
        print(f"cannot evaluate: {exc}", file=sys.stderr)
        return EXIT_DIMS
    result = {"checkpoint": str(args.checkpoint), "stage": stage_id, "deterministic": args.deterministic,
              **summary.as_dict()}
    out.mkdir(parents=True, exist_ok=True)
    summary_file.write_text(json.dumps(result, indent=2) + "\n")
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_plot(args) -> int:
    out = _output_dir(args)
    target = out / "reward_curves.png"
    if _refuse_existing([target], args.force):
        return EXIT_EXISTS
    try:
        written, skipped = plot_reward_curves(args.metrics, target)
    except (OSError, ValueError) as exc:
        print(f"cannot plot: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if skipped:
        print(f"warning: skipped {skipped} malformed row(s)", file=sys.stderr)
    if written is None:
        print("warning: no data rows in the given metrics files; nothing written", file=sys.stderr)
    else:
        print(written)
    return EXIT_OK


def cmd_validate(args) -> int:
    path = Path(args.config) if args.config else default_config_path()
    if not path.is_file():
        print(f"no such configuration file: {path}", file=sys.stderr)
        return EXIT_CONFIG
    _, errors, warns = check_config_file(path)
    _print_report(errors, warns, sys.stdout)
    if errors:
        print(f"{path}: {len(errors)} violation(s)")
        return EXIT_CONFIG
    print(f"{path}: valid")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skatemount", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, output=True):
        sp.add_argument("--config", help="run configuration YAML (default: the shipped default config)")
        if output:
            sp.add_argument("--output-dir", help=f"output directory (default: ${OUTPUT_DIR_ENV} or ./runs)")
            sp.add_argument("--force", action="store_true", help="overwrite existing outputs")

    t = sub.add_parser("train", help="train one stage or the whole curriculum")
    common(t)
    t.add_argument("--stage", help="run only this stage id")
    t.add_argument("--resume", help="warm-start from this checkpoint")
    t.add_argument("--seed", type=int)
    t.add_argument("--num-envs", type=int)
    t.add_argument("--iterations", type=int, help="override the iteration count of the selected stages")
    t.add_argument("-v", "--verbose", action="store_true", help="print one line per iteration")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    common(e)
    e.add_argument("checkpoint")
    e.add_argument("--stage")
    e.add_argument("--episodes", type=int, default=64)
    e.add_argument("--deterministic", action="store_true", help="use the mean action (no exploration noise)")
    e.add_argument("--seed", type=int)
    e.add_argument("--num-envs", type=int)
    e.add_argument("--trajectories", action="store_true", help="write one .npz trajectory per episode")
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plot", help="plot reward curves from metrics files")
    pl.add_argument("metrics", nargs="+")
    pl.add_argument("--output-dir")
    pl.add_argument("--force", action="store_true")
    pl.set_defaults(func=cmd_plot)

    v = sub.add_parser("validate", help="check a configuration file without running anything")
    common(v, output=False)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
