"""Mutable swarm state advanced one tick at a time.

Tick order: states are read from (I^k, T^k), actions are chosen, drones
move, idleness advances to I^{k+1}, then rewards and coverage are scored.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .gridmap import Cell, GridSpec, apply_action, feasible_mask
from .idleness import IdlenessMap, coverage_score, init_idleness, step_idleness
from .statereward import ScoreWeights, build_states, swarm_rewards


class StepOutcome(NamedTuple):
    k: int
    positions: tuple        # P_k
    next_positions: tuple   # P_{k+1}
    actions: tuple
    pre: IdlenessMap
    post: IdlenessMap
    rewards: np.ndarray
    score: float
    coverage: float


def random_starts(grid: GridSpec, n: int, rng: np.random.Generator) -> list[Cell]:
    free = grid.free_cells
    if n > len(free):
        raise ValueError(f"{n} drones do not fit on {len(free)} free cells")
    return [free[int(p)] for p in rng.choice(len(free), size=n, replace=False)]


@dataclass(eq=False)
class World:
    env: object
    positions: list
    idleness: IdlenessMap
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    preupdate_arrival: bool = True
    k: int = 0

    def __post_init__(self):
        grid = self.env.grid
        self.positions = [grid.check(p) for p in self.positions]
        for p in self.positions:
            if p in grid.obstacles:
                raise ValueError(f"drone starts on obstacle {tuple(p)}")
        self.visited = np.zeros(grid.shape, dtype=bool)
        for p in self.positions:
            self.visited[p] = True
        self._states = None

    @classmethod
    def create(cls, env, positions, eta=0.1, delta=0.025, fill=1.0, **kw) -> "World":
        return cls(env, list(positions), init_idleness(env.grid, eta, delta, fill), **kw)

    @property
    def grid(self) -> GridSpec:
        return self.env.grid

    @property
    def n_drones(self) -> int:
        return len(self.positions)

    def states(self) -> np.ndarray:
        if self._states is None or self._states[0] != self.k:
            s = build_states(self.env, self.idleness, self.positions, self.k)
            s.setflags(write=False)
            self._states = (self.k, s)
        return self._states[1]

    def masks(self) -> np.ndarray:
        return np.array([feasible_mask(self.grid, p) for p in self.positions])

    def coverage(self) -> float:
        return coverage_score(self.idleness, self.grid)

    def visited_pct(self) -> float:
        free = self.grid.obstacle_mask == 0
        return 100.0 * float(self.visited[free].sum()) / self.grid.n_free

    def advance(self, actions) -> StepOutcome:
        if len(actions) != self.n_drones:
            raise ValueError(f"need {self.n_drones} actions, got {len(actions)}")
        before = tuple(self.positions)
        after = tuple(apply_action(self.grid, p, a) for p, a in zip(before, actions))
        pre = self.idleness
        post = step_idleness(pre, self.grid, after)
        rewards = swarm_rewards(pre, post, self.env, before, after, self.k,
                                self.weights, self.preupdate_arrival)
        score = 0.0
        for r in rewards:
            score += float(r)
        outcome = StepOutcome(self.k, before, after, tuple(int(a) for a in actions),
                              pre, post, rewards, score, coverage_score(post, self.grid))
        self.positions = list(after)
        self.idleness = post
        for p in after:
            self.visited[p] = True
        self.k += 1
        return outcome
