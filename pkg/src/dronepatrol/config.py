"""Run configuration: INI file with one section per module, plus command-line overrides."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .environment import (
    Disturbance,
    ObservationBounds,
    SyntheticEnv,
    demand_map,
    test_map,
    training_map,
)
from .gridmap import Cell, GridSpec
from .learner import TrainConfig
from .statereward import ScoreWeights

POLICIES = ("random", "greedy", "sweeping", "rl", "rl-decentralized")
MAPS = ("test", "train", "demand", "custom")

PRESETS = {
    "desk": {
        "qnet.net_dims": "13,128,64,5",
        "qnet.learning_rate": "1e-3",
        "learner.epochs": "2000",
        "learner.iterations": "10",
        "learner.gamma": "0.9",
        "learner.target_period": "10",
    },
}


class ConfigError(ValueError):
    pass


def _cells(text: str) -> list[Cell]:
    out = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        i, j = item.split(":")
        out.append(Cell(int(i), int(j)))
    return out


def _fmt_cells(cells) -> str:
    return ", ".join(f"{c[0]}:{c[1]}" for c in cells)


def _opt_int(text: str) -> Optional[int]:
    text = text.strip()
    return int(text) if text else None


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = field(default_factory=lambda: GridSpec(20.0, 30.0, 20, 30))
    env_map: str = "test"
    env_seed: Optional[int] = None
    beta1: float = 0.7
    beta2: float = 5.0
    bounds: ObservationBounds = field(default_factory=ObservationBounds)
    disturbances: tuple = ()
    hotspots: int = 8
    noise: float = 0.1
    policy: str = "random"
    n_drones: int = 4
    starts: Optional[tuple] = None
    horizon: int = 2000
    eta: float = 0.1
    delta: float = 0.025
    fill: float = 1.0
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    preupdate_arrival: bool = True
    train: TrainConfig = field(default_factory=TrainConfig)
    online_learning: bool = True
    switch_step: Optional[int] = None
    collect_drones: int = 4
    collect_steps: int = 2000
    frame_every: int = 0
    output_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {', '.join(POLICIES)}")
        if self.env_map not in MAPS:
            raise ConfigError(f"unknown map {self.env_map!r}; choose from {', '.join(MAPS)}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.n_drones < 1:
            raise ConfigError("need at least one drone")
        if self.starts is not None:
            starts = tuple(Cell(int(c[0]), int(c[1])) for c in self.starts)
            if len(starts) != self.n_drones:
                raise ConfigError(f"{len(starts)} start cells given for {self.n_drones} drones")
            if len(set(starts)) != len(starts):
                raise ConfigError("start cells must be distinct")
            for c in starts:
                if not self.grid.is_free(c):
                    raise ConfigError(f"start cell {tuple(c)} is off the map or an obstacle")
            object.__setattr__(self, "starts", starts)
        if self.switch_step is not None and self.switch_step < 0:
            raise ConfigError("switch_step must be >= 0")
        if self.frame_every < 0:
            raise ConfigError("frame_every must be >= 0")

    @property
    def effective_env_seed(self) -> int:
        return self.seed if self.env_seed is None else self.env_seed

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def make_env(cfg: RunConfig):
    seed = cfg.effective_env_seed
    kw = dict(horizon=cfg.horizon, beta1=cfg.beta1, beta2=cfg.beta2, bounds=cfg.bounds)
    if cfg.env_map == "test":
        return test_map(cfg.grid, seed, **kw)
    if cfg.env_map == "train":
        return training_map(cfg.grid, seed, **kw)
    if cfg.env_map == "demand":
        return demand_map(cfg.grid, seed, cfg.horizon, cfg.hotspots, cfg.noise, cfg.bounds)
    dist = tuple(Disturbance(kind, Cell(i, j), cfg.beta1, cfg.beta2) for kind, i, j in cfg.disturbances)
    return SyntheticEnv(cfg.grid, dist, cfg.horizon, cfg.bounds)


def _defaults_text() -> str:
    return resources.files("dronepatrol").joinpath("base.cfg").read_text(encoding="utf-8")


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(inline_comment_prefixes=None)
    p.optionxform = str  # keep alpha_T / alpha_I case
    return p


def load_config(path: str | Path | None = None, overrides: dict | None = None,
                preset: str | None = None) -> RunConfig:
    """Read ``base.cfg`` defaults, then ``path``, then a preset, then ``section.key`` overrides."""
    p = _parser()
    p.read_string(_defaults_text())
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        p.read(path, encoding="utf-8")
    if preset and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    merged = dict(PRESETS[preset]) if preset else {}
    merged.update(overrides or {})
    for dotted, value in merged.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if not p.has_section(section) or key not in p[section]:
            raise ConfigError(f"unknown config key {dotted!r}")
        p[section][key] = str(value)
    return from_parser(p)


def from_parser(p: configparser.ConfigParser) -> RunConfig:
    try:
        run, g, env, idl, rew, qn, lr = (p[s] for s in
                                         ("run", "grid", "environment", "idleness", "reward", "qnet", "learner"))
        grid = GridSpec(g.getfloat("height"), g.getfloat("width"), g.getint("n_x"), g.getint("n_y"),
                        frozenset(_cells(g.get("obstacles", ""))))
        dist = []
        for item in env.get("disturbances", "").split(","):
            if item.strip():
                kind, i, j = item.strip().split(":")
                dist.append((kind.strip().lower(), int(i), int(j)))
        weights = ScoreWeights(rew.getfloat("alpha_T"), rew.getfloat("alpha_I"))
        train = TrainConfig(
            epochs=lr.getint("epochs"), iterations=lr.getint("iterations"),
            batch_size=lr.getint("batch_size"), gamma=lr.getfloat("gamma"),
            learning_rate=qn.getfloat("learning_rate"), target_period=lr.getint("target_period"),
            buffer_capacity=lr.getint("buffer_capacity"), seed=run.getint("seed"),
            weights=weights, epsilon=lr.getfloat("epsilon"),
            net_dims=tuple(int(x) for x in qn.get("net_dims").split(",")),
            update_period=lr.getint("update_period"),
        )
        starts = _cells(run.get("starts", ""))
        return RunConfig(
            grid=grid, env_map=env.get("map").strip(), env_seed=_opt_int(env.get("env_seed", "")),
            beta1=env.getfloat("beta1"), beta2=env.getfloat("beta2"),
            bounds=ObservationBounds(env.getfloat("z_lo"), env.getfloat("z_hi")),
            disturbances=tuple(dist), hotspots=env.getint("hotspots"), noise=env.getfloat("noise"),
            policy=run.get("policy").strip(), n_drones=run.getint("n_drones"),
            starts=tuple(starts) if starts else None, horizon=run.getint("horizon"),
            eta=idl.getfloat("eta"), delta=idl.getfloat("delta"), fill=idl.getfloat("fill"),
            weights=weights, preupdate_arrival=rew.getboolean("reward_uses_preupdate_arrival"),
            train=train, online_learning=lr.getboolean("online_learning"),
            switch_step=_opt_int(run.get("switch_step", "")),
            collect_drones=lr.getint("collect_drones"), collect_steps=lr.getint("collect_steps"),
            frame_every=run.getint("frame_every"), output_dir=run.get("output_dir"),
            seed=run.getint("seed"),
        )
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from None


def dump_config(cfg: RunConfig, starts=None) -> str:
    """Effective configuration as INI text; ``starts`` records the cells actually used."""
    t = cfg.train
    sections = {
        "run": {
            "seed": cfg.seed, "policy": cfg.policy, "n_drones": cfg.n_drones,
            "horizon": cfg.horizon, "starts": _fmt_cells(starts or cfg.starts or ()),
            "switch_step": "" if cfg.switch_step is None else cfg.switch_step,
            "frame_every": cfg.frame_every, "output_dir": cfg.output_dir,
        },
        "grid": {
            "height": repr(cfg.grid.height), "width": repr(cfg.grid.width),
            "n_x": cfg.grid.n_x, "n_y": cfg.grid.n_y,
            "obstacles": _fmt_cells(sorted(cfg.grid.obstacles)),
        },
        "environment": {
            "map": cfg.env_map, "env_seed": cfg.effective_env_seed,
            "beta1": repr(cfg.beta1), "beta2": repr(cfg.beta2),
            "z_lo": repr(cfg.bounds.z_lo), "z_hi": repr(cfg.bounds.z_hi),
            "disturbances": ", ".join(f"{k}:{i}:{j}" for k, i, j in cfg.disturbances),
            "hotspots": cfg.hotspots, "noise": repr(cfg.noise),
        },
        "idleness": {"eta": repr(cfg.eta), "delta": repr(cfg.delta), "fill": repr(cfg.fill)},
        "reward": {
            "alpha_T": repr(cfg.weights.alpha_T), "alpha_I": repr(cfg.weights.alpha_I),
            "reward_uses_preupdate_arrival": str(cfg.preupdate_arrival).lower(),
        },
        "qnet": {"net_dims": ",".join(str(d) for d in t.net_dims), "learning_rate": repr(t.learning_rate)},
        "learner": {
            "epochs": t.epochs, "iterations": t.iterations, "batch_size": t.batch_size,
            "gamma": repr(t.gamma), "target_period": t.target_period,
            "buffer_capacity": t.buffer_capacity, "epsilon": repr(t.epsilon),
            "update_period": t.update_period, "online_learning": str(cfg.online_learning).lower(),
            "collect_drones": cfg.collect_drones, "collect_steps": cfg.collect_steps,
        },
    }
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {v}" for k, v in items.items()]
        lines.append("")
    return "\n".join(lines)
