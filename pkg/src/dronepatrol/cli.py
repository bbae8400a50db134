"""Command-line entry point: ``dronepatrol <subcommand> [options]``."""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

from .config import POLICIES, PRESETS, ConfigError, RunConfig, load_config, make_env
from .harness import compare, export, prepare_dir, run_episode, write_frames, write_loss_curve, write_summary
from .learner import collect_random_rollouts, load_transitions, pretrain, save_transitions
from .qnet import CheckpointError, load_checkpoint, save_checkpoint
from .policies import UnsupportedConfiguration

log = logging.getLogger("dronepatrol")

TRANSFER_HORIZON = 144


def _common(seed_required: bool = False) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI file layered over the shipped base.cfg")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named bundle of overrides, e.g. desk")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--seed", type=int, required=seed_required, help="run seed")
    p.add_argument("--map", choices=("test", "train", "demand", "custom"), help="environment map")
    p.add_argument("--horizon", type=int, help="episode length T")
    p.add_argument("--n-drones", type=int, help="swarm size")
    p.add_argument("--out", help="output path")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dronepatrol",
                                     description="Drone-swarm patrolling simulator and Q-learning toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("collect", parents=[_common()], help="record random-rollout transitions (.npz)")
    p.add_argument("--steps", type=int, help="rollout length (default learner.collect_steps)")

    p = sub.add_parser("train", parents=[_common(seed_required=True)], help="pretrain the Q-network")
    p.add_argument("--data", help="transitions from `collect`; collected on the fly when omitted")
    p.add_argument("--epochs", type=int)
    p.add_argument("--loss", help="loss curve CSV (default: next to the checkpoint)")

    rl = argparse.ArgumentParser(add_help=False)
    rl.add_argument("--checkpoint", help="Q-network checkpoint for the rl policies")
    rl.add_argument("--data", help="transitions to preload into the online replay buffers")
    rl.add_argument("--frozen", action="store_true", help="disable online learning")
    rl.add_argument("--switch-step", type=int, help="step at which the coordinator drops out")
    rl.add_argument("--frame-every", type=int, help="snapshot idleness x importance every n steps")

    p = sub.add_parser("eval", parents=[_common(seed_required=True), rl], help="run one episode")
    p.add_argument("--policy", choices=POLICIES)

    p = sub.add_parser("compare", parents=[_common(), rl], help="compare policies on one environment")
    p.add_argument("--policies", default="random,greedy,sweeping",
                   help="comma-separated list from: " + ", ".join(POLICIES))

    p = sub.add_parser("transfer", parents=[_common(), rl],
                       help="frozen checkpoint on the demand map against a random swarm")

    p = sub.add_parser("render", parents=[_common(), rl], help="dump idleness x importance frames")
    p.add_argument("--policy", choices=POLICIES)
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    flags = {
        "run.seed": args.seed, "environment.map": args.map, "run.horizon": args.horizon,
        "run.n_drones": args.n_drones, "run.policy": getattr(args, "policy", None),
        "run.switch_step": getattr(args, "switch_step", None),
        "run.frame_every": getattr(args, "frame_every", None),
        "learner.epochs": getattr(args, "epochs", None),
        "learner.collect_steps": getattr(args, "steps", None),
    }
    out.update({k: v for k, v in flags.items() if v is not None})
    if getattr(args, "frozen", False):
        out["learner.online_learning"] = "false"
    return out


def _config(args, **defaults) -> RunConfig:
    ov = {k: v for k, v in defaults.items()}
    ov.update(_overrides(args))
    return load_config(args.config, ov, args.preset)


def _read_checkpoint(path, cfg: RunConfig):
    if not path:
        return None, None
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from None
    params, opt, _ = load_checkpoint(data, expect_dims=cfg.train.net_dims)
    return params, opt


def _needs_rl(cfg: RunConfig, params):
    if cfg.policy.startswith("rl") and params is None:
        raise ConfigError(f"policy {cfg.policy!r} needs --checkpoint")


def _buffers(args, cfg: RunConfig):
    if not getattr(args, "data", None):
        return None
    bufs = load_transitions(args.data, cfg.train.buffer_capacity, cfg.n_drones)
    if len(bufs) != cfg.n_drones:
        raise ConfigError(f"{args.data} holds data for {len(bufs)} drones, swarm has {cfg.n_drones}")
    return bufs


def _episode(cfg, args, params, opt, env=None):
    return run_episode(cfg, params, env=env, opt=opt, buffers=_buffers(args, cfg) if params else None)


def cmd_collect(args) -> int:
    cfg = _config(args, **{"environment.map": "train"})
    out = Path(args.out or Path(cfg.output_dir) / "transitions.npz")
    if out.exists() and not args.force:
        raise FileExistsError(f"{out} exists (use --force)")
    out.parent.mkdir(parents=True, exist_ok=True)
    bufs = collect_random_rollouts(make_env(cfg.with_(horizon=cfg.collect_steps)), cfg.collect_drones,
                                   cfg.collect_steps, cfg.seed, eta=cfg.eta, delta=cfg.delta, fill=cfg.fill,
                                   weights=cfg.weights, preupdate_arrival=cfg.preupdate_arrival,
                                   capacity=cfg.train.buffer_capacity)
    save_transitions(bufs, out)
    print(f"wrote {sum(len(b) for b in bufs)} transitions to {out}")
    return 0


def train_from_config(cfg: RunConfig, buffers=None, progress=None):
    """Collect (unless ``buffers`` is given) and pretrain; returns ``(TrainResult, buffers)``."""
    if buffers is None:
        env = make_env(cfg.with_(horizon=cfg.collect_steps))
        buffers = collect_random_rollouts(env, cfg.collect_drones, cfg.collect_steps, cfg.seed,
                                          eta=cfg.eta, delta=cfg.delta, fill=cfg.fill, weights=cfg.weights,
                                          preupdate_arrival=cfg.preupdate_arrival,
                                          capacity=cfg.train.buffer_capacity)
    return pretrain(buffers, cfg.train, progress=progress), buffers


def train_config_hash(cfg: RunConfig) -> str:
    """Short digest identifying the training settings and the reward they were trained on."""
    text = repr((cfg.train, cfg.preupdate_arrival, cfg.eta, cfg.delta, cfg.fill))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def checkpoint_bytes(result, cfg: RunConfig) -> bytes:
    t = cfg.train
    meta = {"seed": cfg.seed, "grid": f"{cfg.grid.n_x}x{cfg.grid.n_y}",
            "epochs": t.epochs, "iterations": t.iterations, "batch_size": t.batch_size,
            "gamma": repr(t.gamma), "learning_rate": repr(t.learning_rate),
            "target_period": t.target_period, "map": cfg.env_map,
            "preupdate_arrival": str(cfg.preupdate_arrival).lower(),
            "train_config_hash": train_config_hash(cfg)}
    return save_checkpoint(result.params, result.opt, meta)


def cmd_train(args) -> int:
    cfg = _config(args, **{"environment.map": "train"})
    out = Path(args.out or Path(cfg.output_dir) / "q.ckpt")
    loss_path = Path(args.loss) if args.loss else out.with_suffix(".loss.csv")
    for p in (out, loss_path):
        if p.exists() and not args.force:
            raise FileExistsError(f"{p} exists (use --force)")
    out.parent.mkdir(parents=True, exist_ok=True)
    bufs = load_transitions(args.data, cfg.train.buffer_capacity) if args.data else None

    def progress(epoch, loss):
        if (epoch + 1) % max(1, cfg.train.epochs // 10) == 0:
            log.info("epoch %d/%d  loss %.6g", epoch + 1, cfg.train.epochs, loss)

    result, _ = train_from_config(cfg, bufs, progress)
    out.write_bytes(checkpoint_bytes(result, cfg))
    write_loss_curve(result.losses, loss_path)
    print(f"wrote {out} ({result.steps} gradient steps, final loss {result.losses[-1]:.6g}) and {loss_path}")
    return 0


def _print_table(records):
    print(f"{'policy':<18}{'mean_score':>12}{'mean_cov':>10}{'max_cov_%':>11}{'covered_%':>11}")
    for r in records:
        share = "" if r.max_coverage_pct is None else f"{r.max_coverage_pct:.1f}"
        print(f"{r.policy:<18}{r.mean_score:>12.4f}{r.mean_coverage:>10.4f}{share:>11}{r.map_covered:>11.1f}")


def cmd_eval(args) -> int:
    cfg = _config(args)
    params, opt = _read_checkpoint(args.checkpoint, cfg)
    _needs_rl(cfg, params)
    out = prepare_dir(args.out or cfg.output_dir, args.force)
    metrics, traj = _episode(cfg, args, params, opt)
    export(metrics, traj, out, cfg, force=True)
    _print_table([metrics])
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in POLICIES:
            raise ConfigError(f"unknown policy {p!r}; choose from {', '.join(POLICIES)}")
    params, opt = _read_checkpoint(args.checkpoint, cfg)
    configs = [cfg.with_(policy=p) for p in policies]
    for c in configs:
        _needs_rl(c, params)
    out = prepare_dir(args.out or cfg.output_dir, args.force)
    records = compare(configs, params, opt=opt, buffers=_buffers(args, cfg) if params else None)
    write_summary(records, out / "summary.csv")
    _print_table(records)
    return 0


def cmd_transfer(args) -> int:
    cfg = _config(args, **{"environment.map": "demand", "run.horizon": TRANSFER_HORIZON})
    cfg = cfg.with_(online_learning=False, policy="rl")
    params, opt = _read_checkpoint(args.checkpoint, cfg)
    _needs_rl(cfg, params)
    out = prepare_dir(args.out or cfg.output_dir, args.force)
    records = compare([cfg, cfg.with_(policy="random")], params, opt=opt)
    write_summary(records, out / "summary.csv")
    _print_table(records)
    rl, rnd = records
    if rnd.mean_score > 0:
        print(f"frozen rl / random mean score: {rl.mean_score / rnd.mean_score:.3f}")
    else:
        print(f"frozen rl / random mean score: undefined (random mean score {rnd.mean_score:.4g} <= 0)")
    return 0


def cmd_render(args) -> int:
    cfg = _config(args)
    if cfg.frame_every == 0:
        cfg = cfg.with_(frame_every=max(1, cfg.horizon // 20))
    params, opt = _read_checkpoint(args.checkpoint, cfg)
    _needs_rl(cfg, params)
    out = prepare_dir(args.out or Path(cfg.output_dir) / "frames", args.force)
    _, traj = _episode(cfg, args, params, opt)
    files = write_frames(traj.frames, out)
    print(f"wrote {len(files)} frames to {out}")
    return 0


COMMANDS = {"collect": cmd_collect, "train": cmd_train, "eval": cmd_eval, "compare": cmd_compare,
            "transfer": cmd_transfer, "render": cmd_render}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError, UnsupportedConfiguration, FileExistsError, OSError, ValueError) as exc:
        print(f"dronepatrol {args.command}: error: {exc}", file=sys.stderr)
        return 1


__all__ = ["main", "build_parser", "train_from_config", "checkpoint_bytes", "train_config_hash"]

if __name__ == "__main__":
    sys.exit(main())
