"""Episode runner, swarm comparison and CSV export."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, dump_config, make_env
from .learner import COORDINATED, SwarmAgent, online_step
from .policies import SweepState, greedy_policy, random_policy, sweep_policy, sweeping_roles
from .qnet import QParams
from .world import World, random_starts

log = logging.getLogger(__name__)


@dataclass(eq=False)
class MetricsRecord:
    policy: str
    score: np.ndarray        # R^k per step
    coverage: np.ndarray     # C^{k+1} after each step
    visited_pct: np.ndarray  # % of free cells seen up to and including P_{k+1}
    max_coverage_pct: float | None = None

    @property
    def steps(self) -> np.ndarray:
        return np.arange(len(self.score))

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.score)

    @property
    def mean_score(self) -> float:
        return float(np.mean(self.score))

    @property
    def mean_coverage(self) -> float:
        return float(np.mean(self.coverage))

    @property
    def map_covered(self) -> float:
        return float(self.visited_pct[-1])

    def summary(self) -> dict:
        return {
            "policy": self.policy,
            "mean_score": self.mean_score,
            "mean_coverage": self.mean_coverage,
            "max_coverage_time_pct": self.max_coverage_pct,
            "map_covered_pct": self.map_covered,
        }


@dataclass(eq=False)
class TrajectoryLog:
    positions: np.ndarray            # (T+1, N, 2): P_0 .. P_T
    actions: np.ndarray              # (T, N)
    modes: list = field(default_factory=list)
    frames: dict = field(default_factory=dict)  # step -> I^k * T^k


def _starts(cfg: RunConfig, env):
    if cfg.starts is not None:
        return list(cfg.starts)
    return random_starts(env.grid, cfg.n_drones, np.random.default_rng([cfg.seed, 11]))


def run_episode(cfg: RunConfig, params: QParams | None = None, *, env=None, agent=None,
                target=None, opt=None, buffers=None):
    """Simulate ``cfg.horizon`` ticks and return ``(MetricsRecord, TrajectoryLog)``.

    RL policies need ``params`` (or a ready ``agent``); a missing checkpoint is
    a configuration error raised before the first tick.
    """
    env = env if env is not None else make_env(cfg)
    if env.grid != cfg.grid:
        raise ValueError("environment grid differs from the configured grid")
    starts = _starts(cfg, env)
    world = World.create(env, starts, cfg.eta, cfg.delta, cfg.fill,
                         weights=cfg.weights, preupdate_arrival=cfg.preupdate_arrival)
    rng = np.random.default_rng([cfg.seed, 12])
    n, T = cfg.n_drones, cfg.horizon

    rl = cfg.policy.startswith("rl")
    roles = sweeping_roles(n) if cfg.policy == "sweeping" else [cfg.policy] * n
    sweeps = {d: SweepState.start(cfg.grid, starts[d]) for d, r in enumerate(roles) if r == "sweep"}
    if rl and agent is None:
        if params is None:
            raise ValueError(f"policy {cfg.policy!r} needs Q-network parameters")
        agent = SwarmAgent.create(params, n, cfg.train, learn=cfg.online_learning,
                                  buffers=buffers, target=target, opt=opt)
    if cfg.policy == "rl-decentralized" and agent.mode == COORDINATED:
        agent.decentralize()

    positions = np.zeros((T + 1, n, 2), dtype=np.int64)
    positions[0] = starts
    actions = np.zeros((T, n), dtype=np.int64)
    score, coverage, visited = np.zeros(T), np.zeros(T), np.zeros(T)
    traj = TrajectoryLog(positions, actions)

    for k in range(T):
        if cfg.frame_every and k % cfg.frame_every == 0:
            traj.frames[k] = world.idleness.values * env.importance(k)
        if rl:
            if cfg.switch_step is not None and k == cfg.switch_step:
                agent.decentralize()
            step = online_step(world, agent, rng)
            out = step.outcome
            traj.modes.append(step.mode)
        else:
            acts = []
            for d, (p, role) in enumerate(zip(world.positions, roles)):
                if role == "random":
                    acts.append(random_policy(cfg.grid, p, rng))
                elif role == "greedy":
                    acts.append(greedy_policy(cfg.grid, world.idleness, env, p, k))
                else:
                    a, sweeps[d] = sweep_policy(cfg.grid, sweeps[d])
                    acts.append(a)
            out = world.advance(acts)
            traj.modes.append(cfg.policy)
        positions[k + 1] = out.next_positions
        actions[k] = out.actions
        score[k] = out.score
        coverage[k] = out.coverage
        visited[k] = world.visited_pct()

    metrics = MetricsRecord(cfg.policy, score, coverage, visited)
    traj.agent = agent
    return metrics, traj


def replay_scores(cfg: RunConfig, traj: TrajectoryLog, env=None) -> np.ndarray:
    """Recompute every step score from the logged positions alone.

    Plain loops over cells, independent of the kernels and the world object.
    """
    env = env if env is not None else make_env(cfg)
    grid = cfg.grid
    obst = grid.obstacles
    idle = {(i, j): (0.0 if (i, j) in obst else cfg.fill)
            for i in range(grid.n_x) for j in range(grid.n_y)}

    def hood(p):
        i, j = int(p[0]), int(p[1])
        for c in ((i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if 0 <= c[0] < grid.n_x and 0 <= c[1] < grid.n_y:
                yield c

    out = np.zeros(len(traj.actions))
    for k in range(len(traj.actions)):
        t_now, t_next = env.importance(k), env.importance(k + 1)
        before, after = traj.positions[k], traj.positions[k + 1]
        occupied = {(int(p[0]), int(p[1])) for p in after}
        new = {}
        for c, v in idle.items():
            if c in obst:
                new[c] = 0.0
            elif c in occupied:
                new[c] = cfg.eta * v
            else:
                new[c] = min(1.0, v + cfg.delta)
        arrival = idle if cfg.preupdate_arrival else new
        total = 0.0
        for p0, p1 in zip(before, after):
            gain_t = sum(arrival[c] * t_next[c] for c in hood(p1)) - sum(idle[c] * t_now[c] for c in hood(p0))
            gain_i = sum(new[c] for c in hood(p1)) - sum(idle[c] for c in hood(p0))
            total += cfg.weights.alpha_T * gain_t + cfg.weights.alpha_I * gain_i
        out[k] = total
        idle = new
    return out


def strict_max_share(coverages) -> np.ndarray:
    """Percentage of steps on which each run has the strictly largest coverage."""
    c = np.asarray(coverages, dtype=float)
    if c.ndim != 2 or c.shape[1] == 0:
        raise ValueError("need a (runs, steps) coverage matrix")
    top = c.max(axis=0)
    winners = c == top
    unique = winners.sum(axis=0) == 1
    return 100.0 * (winners & unique).sum(axis=1) / c.shape[1]


def _comparable(a: RunConfig, b: RunConfig) -> bool:
    keys = ("grid", "env_map", "effective_env_seed", "beta1", "beta2", "bounds", "disturbances",
            "hotspots", "noise", "horizon", "seed", "n_drones", "starts", "eta", "delta", "fill",
            "weights", "preupdate_arrival")
    return all(getattr(a, k) == getattr(b, k) for k in keys)


def compare(configs, params: QParams | None = None, labels=None, *, opt=None, buffers=None):
    """Run every config on the shared environment and fill in the strict-max coverage share.

    RL runs each start from ``params``/``opt`` and from a private copy of ``buffers``.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("nothing to compare")
    for c in configs[1:]:
        if not _comparable(configs[0], c):
            raise ValueError("compared runs must share grid, environment, horizon, seed and swarm")
    env = make_env(configs[0])
    records = []
    for c in configs:
        bufs = [b.copy() for b in buffers] if buffers else None
        records.append(run_episode(c, params, env=env, opt=opt, buffers=bufs)[0])
    share = strict_max_share([r.coverage for r in records])
    for r, s, name in zip(records, share, labels or [None] * len(records)):
        r.max_coverage_pct = float(s)
        if name:
            r.policy = name
    return records


# export ----------------------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return "" if x is None else str(x)


def _write_csv(path: Path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_num(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def prepare_dir(path, force: bool) -> Path:
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise FileExistsError(f"output directory {path} is not empty (use --force)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_summary(records, path):
    rows = [[r.policy, r.mean_score, r.mean_coverage, r.max_coverage_pct, r.map_covered] for r in records]
    _write_csv(Path(path), ["policy", "mean_score", "mean_coverage", "max_coverage_time_pct",
                            "map_covered_pct"], rows)


def export(metrics: MetricsRecord, traj: TrajectoryLog, directory, cfg: RunConfig | None = None,
           force: bool = False) -> list[Path]:
    """Write metrics.csv, summary.csv, trajectory.csv and optional frames/NNNN.csv."""
    out = prepare_dir(directory, force)
    written = []
    p = out / "metrics.csv"
    _write_csv(p, ["step", "score", "cumulative_score", "coverage", "visited_pct"],
               zip(metrics.steps, metrics.score, metrics.cumulative, metrics.coverage,
                   metrics.visited_pct))
    written.append(p)
    p = out / "summary.csv"
    write_summary([metrics], p)
    written.append(p)
    p = out / "trajectory.csv"
    n = traj.positions.shape[1]
    rows = ((k, d, traj.positions[k + 1, d, 0], traj.positions[k + 1, d, 1])
            for k in range(len(traj.actions)) for d in range(n))
    _write_csv(p, ["step", "drone", "i", "j"], rows)
    written.append(p)
    if traj.frames:
        written += write_frames(traj.frames, out / "frames")
    if cfg is not None:
        p = out / "config.cfg"
        p.write_text(dump_config(cfg, [tuple(c) for c in traj.positions[0]]), encoding="utf-8")
        written.append(p)
    return written


def write_frames(frames: dict, directory) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for k in sorted(frames):
        p = d / f"{k:04d}.csv"
        f = frames[k]
        _write_csv(p, [f"j{j}" for j in range(f.shape[1])], f.tolist())
        written.append(p)
    return written


def write_loss_curve(losses, path):
    _write_csv(Path(path), ["epoch", "mean_loss"], enumerate(losses))


__all__ = [
    "MetricsRecord", "TrajectoryLog", "run_episode", "replay_scores", "compare",
    "strict_max_share", "export", "write_summary", "write_frames", "write_loss_curve",
    "prepare_dir",
]
