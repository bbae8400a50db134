"""Experience collection, replay buffers, offline pretraining and the online loop."""
from __future__ import annotations

import io
import logging
import zipfile
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .gridmap import N_ACTIONS, Action
from .policies import JointInfeasibleError, joint_action_solve, random_policy, rl_decentralized
from .qnet import (
    DESK_DIMS,
    FULL_DIMS,
    Batch,
    OptimizerState,
    QParams,
    forward,
    hard_update,
    init_params,
    loss_and_grad,
    optimizer_step,
)
from .statereward import STATE_DIM, ScoreWeights
from .world import StepOutcome, World, random_starts

log = logging.getLogger(__name__)

COORDINATED = "coordinated"
DECENTRALIZED = "decentralized"


class Transition(NamedTuple):
    s: np.ndarray
    u: int
    r: float
    s_next: np.ndarray
    feasible_next: np.ndarray


class ReplayBuffer:
    """Bounded FIFO of transitions backed by growable ring arrays."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("buffer capacity must be positive")
        self.capacity = int(capacity)
        self._size = 0
        self._head = 0  # index of the oldest entry
        self._alloc(min(self.capacity, 1024))

    def _alloc(self, n):
        self._s = np.zeros((n, STATE_DIM))
        self._u = np.zeros(n, dtype=np.int64)
        self._r = np.zeros(n)
        self._s2 = np.zeros((n, STATE_DIM))
        self._m = np.zeros((n, N_ACTIONS), dtype=bool)

    def _grow(self):
        old = self.ordered()
        n = min(self.capacity, 2 * len(self._u))
        self._alloc(n)
        k = len(old.u)
        self._s[:k], self._u[:k], self._r[:k], self._s2[:k], self._m[:k] = old
        self._head = 0

    def __len__(self):
        return self._size

    def append(self, t: Transition):
        if not t.feasible_next[Action.STAY]:
            raise ValueError("stay must always be feasible")
        if self._size == len(self._u) and self._size < self.capacity:
            self._grow()
        if self._size < self.capacity:
            slot = (self._head + self._size) % len(self._u)
            self._size += 1
        else:
            slot = self._head
            self._head = (self._head + 1) % len(self._u)
        self._s[slot] = t.s
        self._u[slot] = int(t.u)
        self._r[slot] = t.r
        self._s2[slot] = t.s_next
        self._m[slot] = t.feasible_next

    def _slots(self, idx):
        return (self._head + np.asarray(idx, dtype=np.int64)) % len(self._u)

    def take(self, idx) -> Batch:
        """Entries at FIFO positions ``idx`` (0 is the oldest)."""
        sl = self._slots(idx)
        return Batch(self._s[sl], self._u[sl], self._r[sl], self._s2[sl], self._m[sl])

    def ordered(self) -> Batch:
        return self.take(np.arange(self._size))

    def transitions(self) -> list[Transition]:
        b = self.ordered()
        return [Transition(*(f[i] for f in b)) for i in range(len(b.u))]

    def copy(self) -> "ReplayBuffer":
        out = ReplayBuffer(self.capacity)
        for t in self.transitions():
            out.append(t)
        return out


def sample_batch(buffers, size: int, rng: np.random.Generator) -> Batch:
    """Uniform draw without replacement from the union of ``buffers``."""
    sizes = np.array([len(b) for b in buffers], dtype=np.int64)
    total = int(sizes.sum())
    if size > total:
        raise ValueError(f"batch of {size} requested from {total} buffered transitions")
    picks = rng.choice(total, size=size, replace=False)
    edges = np.cumsum(sizes)
    owner = np.searchsorted(edges, picks, side="right")
    offset = picks - (edges - sizes)[owner]
    out = Batch(np.empty((size, STATE_DIM)), np.empty(size, dtype=np.int64), np.empty(size),
                np.empty((size, STATE_DIM)), np.empty((size, N_ACTIONS), dtype=bool))
    for b, buf in enumerate(buffers):
        sel = owner == b
        if sel.any():
            for dst, src in zip(out, buf.take(offset[sel])):
                dst[sel] = src
    return out


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30000
    iterations: int = 30
    batch_size: int = 32
    gamma: float = 0.95
    learning_rate: float = 1e-4
    target_period: int = 100
    buffer_capacity: int = 100_000
    seed: int = 0
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    epsilon: float = 0.05
    net_dims: tuple = FULL_DIMS
    update_period: int = 1

    def __post_init__(self):
        object.__setattr__(self, "net_dims", tuple(int(d) for d in self.net_dims))
        for name in ("epochs", "iterations", "batch_size", "target_period",
                     "buffer_capacity", "update_period"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")

    @classmethod
    def desk(cls, **kw) -> "TrainConfig":
        """Reduced preset for CI: small net, 2000 epochs of 10 iterations, shorter discount horizon."""
        base = dict(epochs=2000, iterations=10, net_dims=DESK_DIMS, learning_rate=1e-3,
                    gamma=0.9, target_period=10)
        base.update(kw)
        return cls(**base)


def collect_random_rollouts(env, n_drones: int, horizon: int, seed: int, *, eta=0.1, delta=0.025,
                            fill=1.0, weights: ScoreWeights | None = None,
                            preupdate_arrival=True, capacity=100_000, starts=None):
    """Run uniformly random drones and record one transition per drone per step."""
    rng = np.random.default_rng([seed, 1])
    if starts is None:
        starts = random_starts(env.grid, n_drones, rng)
    world = World.create(env, starts, eta, delta, fill,
                         weights=weights or ScoreWeights(), preupdate_arrival=preupdate_arrival)
    buffers = [ReplayBuffer(capacity) for _ in range(n_drones)]
    for _ in range(horizon):
        s = world.states()
        acts = [random_policy(world.grid, p, rng) for p in world.positions]
        out = world.advance(acts)
        _record(world, buffers, s, out)
    return buffers


def _record(world: World, buffers, states, out: StepOutcome):
    nxt = world.states()
    masks = world.masks()
    for d, buf in enumerate(buffers):
        buf.append(Transition(states[d], out.actions[d], float(out.rewards[d]), nxt[d], masks[d]))


_FIELDS = ("s", "u", "r", "s_next", "feasible_next")


def save_transitions(buffers, path) -> None:
    """Write per-drone buffers to an ``.npz`` archive with fixed timestamps.

    Arrays are the concatenated fields plus ``drone`` (owner index per row),
    oldest first within each drone.
    """
    parts = [b.ordered() for b in buffers]
    arrays = {name: np.concatenate([p[i] for p in parts]) for i, name in enumerate(_FIELDS)}
    arrays["drone"] = np.concatenate([np.full(len(p.u), d, dtype=np.int64) for d, p in enumerate(parts)])
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())


def load_transitions(path, capacity: int = 100_000, n_drones: int | None = None) -> list[ReplayBuffer]:
    try:
        with np.load(path, allow_pickle=False) as data:
            fields = [data[name] for name in _FIELDS]
            owner = data["drone"]
    except (OSError, KeyError, ValueError) as exc:
        raise ValueError(f"cannot read transitions from {path}: {exc}") from None
    n = int(owner.max()) + 1 if len(owner) else 0
    if n_drones is not None:
        n = max(n, n_drones)
    buffers = [ReplayBuffer(capacity) for _ in range(n)]
    for row in range(len(owner)):
        buffers[owner[row]].append(Transition(*(f[row] for f in fields)))
    return buffers


@dataclass(eq=False)
class TrainResult:
    params: QParams
    target: QParams
    opt: OptimizerState
    losses: list
    steps: int

    def __iter__(self):
        # unpacks as (params, loss curve)
        return iter((self.params, self.losses))


def train_epoch(params, target, opt, buffers, config: TrainConfig, rng) -> float:
    total = 0.0
    for _ in range(config.iterations):
        batch = sample_batch(buffers, config.batch_size, rng)
        loss, grads = loss_and_grad(params, target, batch, config.gamma)
        optimizer_step(params, grads, opt)
        total += loss
    return total / config.iterations


def pretrain(buffers, config: TrainConfig, params: QParams | None = None,
             progress=None) -> TrainResult:
    """Double-DQN fit on the pooled buffers; target net hard-updated every ``target_period`` epochs."""
    if sum(len(b) for b in buffers) < config.batch_size:
        raise ValueError("not enough buffered transitions for one batch")
    init_rng = np.random.default_rng([config.seed, 2])
    rng = np.random.default_rng([config.seed, 3])
    params = params.copy() if params is not None else init_params(config.net_dims, init_rng)
    target = hard_update(None, params)
    opt = OptimizerState.for_params(params, lr=config.learning_rate)
    losses = []
    for epoch in range(config.epochs):
        losses.append(train_epoch(params, target, opt, buffers, config, rng))
        if (epoch + 1) % config.target_period == 0:
            target = hard_update(target, params)
        if progress is not None:
            progress(epoch, losses[-1])
    return TrainResult(params, target, opt, losses, opt.step)


@dataclass(eq=False)
class SwarmAgent:
    """Q-parameters as held by the drones.

    In coordinated mode every drone points at the same parameter object. On
    a coordinator outage each drone keeps its own copy of the last broadcast
    parameters and trains, if at all, only on its own buffer.
    """

    params: list
    targets: list
    opts: list
    buffers: list
    config: TrainConfig
    mode: str = COORDINATED
    learn: bool = True
    epochs: list = field(default_factory=list)

    @classmethod
    def create(cls, params: QParams, n_drones: int, config: TrainConfig, *, learn=True,
               buffers=None, target: QParams | None = None, opt: OptimizerState | None = None):
        target = target.copy() if target is not None else hard_update(None, params)
        opt = opt.copy() if opt is not None else OptimizerState.for_params(params, config.learning_rate)
        buffers = buffers or [ReplayBuffer(config.buffer_capacity) for _ in range(n_drones)]
        if len(buffers) != n_drones:
            raise ValueError("one buffer per drone required")
        return cls([params] * n_drones, [target] * n_drones, [opt] * n_drones,
                   list(buffers), config, COORDINATED, learn, [0] * n_drones)

    def decentralize(self):
        if self.mode == DECENTRALIZED:
            return
        self.params = [p.copy() for p in self.params]
        self.targets = [t.copy() for t in self.targets]
        self.opts = [o.copy() for o in self.opts]
        self.mode = DECENTRALIZED
        log.info("coordinator lost: drones continue on their last parameters")

    def _fit(self, d, buffers, rng):
        cfg = self.config
        train_epoch(self.params[d], self.targets[d], self.opts[d], buffers, cfg, rng)
        self.epochs[d] += 1
        if self.epochs[d] % cfg.target_period == 0:
            self.targets[d] = hard_update(self.targets[d], self.params[d])

    def update(self, rng):
        cfg = self.config
        if self.mode == COORDINATED:
            if sum(len(b) for b in self.buffers) >= cfg.batch_size:
                self._fit(0, self.buffers, rng)
                # keep the shared references in sync after a target refresh
                n = len(self.params)
                self.targets = [self.targets[0]] * n
                self.epochs = [self.epochs[0]] * n
        else:
            for d, buf in enumerate(self.buffers):
                if len(buf) >= cfg.batch_size:
                    self._fit(d, [buf], rng)


class OnlineStep(NamedTuple):
    actions: tuple
    outcome: StepOutcome
    mode: str
    fallback: bool


def online_step(world: World, agent: SwarmAgent, rng: np.random.Generator) -> OnlineStep:
    """One tick of the online loop: optional update, act, move, store transitions."""
    cfg = agent.config
    if agent.learn and world.k % cfg.update_period == 0:
        agent.update(rng)
    states = world.states()
    masks = world.masks()
    fallback = False
    if agent.mode == COORDINATED:
        q = forward(agent.params[0], states)
        try:
            actions = joint_action_solve(q, world.positions, world.grid)
        except JointInfeasibleError as exc:
            log.warning("joint solve failed at step %d (%s); acting decentralized", world.k, exc)
            fallback = True
    if agent.mode == DECENTRALIZED or fallback:
        actions = [rl_decentralized(agent.params[d], states[d], masks[d], cfg.epsilon, rng)
                   for d in range(world.n_drones)]
    out = world.advance(actions)
    _record(world, agent.buffers, states, out)
    return OnlineStep(out.actions, out, agent.mode, fallback)
