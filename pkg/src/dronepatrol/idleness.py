"""Shared idleness map: forgetting on visit, linear recovery otherwise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .gridmap import Cell, GridSpec


class IdlenessError(ValueError):
    pass


def _check_factor(name, v):
    if not 0.0 < v < 1.0:
        raise IdlenessError(f"{name} must lie strictly inside (0, 1), got {v}")


@dataclass(frozen=True, eq=False)
class IdlenessMap:
    values: np.ndarray
    eta: float
    delta: float

    def __post_init__(self):
        _check_factor("eta", self.eta)
        _check_factor("delta", self.delta)
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, c) -> float:
        return float(self.values[c[0], c[1]])


def init_idleness(grid: GridSpec, eta: float, delta: float, fill: float = 1.0) -> IdlenessMap:
    if not 0.0 <= fill <= 1.0:
        raise IdlenessError(f"fill must be in [0, 1], got {fill}")
    _check_factor("eta", eta)
    _check_factor("delta", delta)
    values = np.full(grid.shape, float(fill))
    values[grid.obstacle_mask.astype(bool)] = 0.0
    return IdlenessMap(values, eta, delta)


def step_idleness(imap: IdlenessMap, grid: GridSpec, visited) -> IdlenessMap:
    """Advance the map one step given the cells occupied after the move.

    ``visited`` may repeat a cell (two drones sharing it); the forgetting
    factor is still applied once.
    """
    cells = [Cell(int(c[0]), int(c[1])) for c in visited]
    for c in cells:
        grid.check(c)
        if c in grid.obstacles:
            raise IdlenessError(f"visited cell {tuple(c)} is an obstacle")
    vi = np.fromiter((c.i for c in cells), dtype=np.int64, count=len(cells))
    vj = np.fromiter((c.j for c in cells), dtype=np.int64, count=len(cells))
    out = kernels.step_idleness(imap.values, grid.obstacle_mask, vi, vj, imap.eta, imap.delta)
    return IdlenessMap(out, imap.eta, imap.delta)


def coverage_score(imap: IdlenessMap, grid: GridSpec) -> float:
    if grid.n_free == 0:
        raise IdlenessError("coverage undefined: every cell is an obstacle")
    free = grid.obstacle_mask == 0
    return 1.0 - float(imap.values[free].sum()) / grid.n_free
