"""Grid partitioning of the monitored map, cell geometry and the per-cell action model."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np


class Cell(NamedTuple):
    i: int
    j: int


class WorldPoint(NamedTuple):
    x: float
    y: float


class Action(IntEnum):
    """Canonical action encoding; the integer value is the Q-network output index."""

    STAY = 0
    UP = 1
    DOWN = 2
    LEFT = 3
    RIGHT = 4

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]

    def opposite(self) -> "Action":
        return _OPPOSITE[self]


# "Up" decreases the row index (x axis points down the map)
_DELTAS = {
    Action.STAY: (0, 0),
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}
_OPPOSITE = {
    Action.STAY: Action.STAY,
    Action.UP: Action.DOWN,
    Action.DOWN: Action.UP,
    Action.LEFT: Action.RIGHT,
    Action.RIGHT: Action.LEFT,
}
ACTIONS = tuple(Action)
N_ACTIONS = len(ACTIONS)
ACTION_ORDER_TAG = "stay,up,down,left,right"


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Rectangular ``height x width`` map split into ``n_x`` rows and ``n_y`` columns."""

    height: float
    width: float
    n_x: int
    n_y: int
    obstacles: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise GridError(f"grid needs at least one row and column, got {self.n_x}x{self.n_y}")
        if not (self.height > 0 and self.width > 0):
            raise GridError(f"map dimensions must be positive, got H={self.height}, W={self.width}")
        obs = frozenset(Cell(int(i), int(j)) for i, j in self.obstacles)
        for c in obs:
            if not (0 <= c.i < self.n_x and 0 <= c.j < self.n_y):
                raise GridError(f"obstacle {tuple(c)} outside {self.n_x}x{self.n_y} grid")
        if len(obs) >= self.n_x * self.n_y:
            raise GridError("grid has no free cell")
        object.__setattr__(self, "obstacles", obs)

    @classmethod
    def square_cells(cls, n_x: int, n_y: int, obstacles=()) -> "GridSpec":
        """Grid whose cells are unit squares (H = n_x, W = n_y)."""
        return cls(float(n_x), float(n_y), n_x, n_y, frozenset(obstacles))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_x, self.n_y)

    @property
    def n_cells(self) -> int:
        return self.n_x * self.n_y

    @property
    def n_free(self) -> int:
        return self.n_cells - len(self.obstacles)

    @cached_property
    def obstacle_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=np.uint8)
        for c in self.obstacles:
            mask[c] = 1
        mask.setflags(write=False)
        return mask

    @cached_property
    def free_cells(self) -> tuple[Cell, ...]:
        return tuple(
            Cell(i, j)
            for i in range(self.n_x)
            for j in range(self.n_y)
            if (i, j) not in self.obstacles
        )

    def in_bounds(self, c) -> bool:
        return 0 <= c[0] < self.n_x and 0 <= c[1] < self.n_y

    def is_free(self, c) -> bool:
        return self.in_bounds(c) and Cell(c[0], c[1]) not in self.obstacles

    def check(self, c) -> Cell:
        if not self.in_bounds(c):
            raise GridError(f"cell {tuple(c)} outside {self.n_x}x{self.n_y} grid")
        return Cell(int(c[0]), int(c[1]))


def cell_center(spec: GridSpec, c) -> WorldPoint:
    i, j = spec.check(c)
    return WorldPoint(
        (2 * i + 1) * spec.height / (2 * spec.n_x),
        (2 * j + 1) * spec.width / (2 * spec.n_y),
    )


def destination(c, a: Action) -> Cell:
    di, dj = _DELTAS[Action(a)]
    return Cell(c[0] + di, c[1] + dj)


def feasible_actions(spec: GridSpec, c) -> list[Action]:
    c = spec.check(c)
    if c in spec.obstacles:
        raise GridError(f"cell {tuple(c)} is an obstacle")
    return [a for a in ACTIONS if spec.is_free(destination(c, a))]


def feasible_mask(spec: GridSpec, c) -> np.ndarray:
    mask = np.zeros(N_ACTIONS, dtype=bool)
    for a in feasible_actions(spec, c):
        mask[a] = True
    return mask


def apply_action(spec: GridSpec, c, a) -> Cell:
    c = spec.check(c)
    dest = destination(c, a)
    if c in spec.obstacles or not spec.is_free(dest):
        raise GridError(f"action {Action(a).name} infeasible at {tuple(c)}")
    return dest


def adjacency(spec: GridSpec, c) -> list[Optional[Cell]]:
    """Field-of-view slots [center, up, down, left, right]; off-map slots are None.

    Obstacle cells stay present, their importance is zero anyway.
    """
    c = spec.check(c)
    out = []
    for a in ACTIONS:
        d = destination(c, a)
        out.append(d if spec.in_bounds(d) else None)
    return out
