"""Action selection: baseline swarms, the per-drone epsilon policy and the joint coordinator."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .gridmap import ACTIONS, Action, Cell, GridSpec, destination, feasible_actions
from .qnet import forward, masked_argmax

EXHAUSTIVE_MAX_DRONES = 6


class UnsupportedConfiguration(ValueError):
    pass


class JointInfeasibleError(ValueError):
    """No joint action sends every drone to a different cell."""

    def __init__(self, drones, cells):
        self.drones = tuple(drones)
        self.cells = tuple(cells)
        super().__init__(
            f"drones {list(self.drones)} can only reach {len(self.cells)} distinct cells "
            f"{[tuple(c) for c in self.cells]}"
        )


def random_policy(grid: GridSpec, c, rng: np.random.Generator) -> Action:
    acts = feasible_actions(grid, c)
    return acts[int(rng.integers(len(acts)))]


def greedy_policy(grid: GridSpec, imap, env, c, k: int) -> Action:
    """Move to the reachable cell with the largest idleness-weighted importance."""
    weighted = imap.values * env.importance(k)
    best, best_val = Action.STAY, -np.inf
    for a in feasible_actions(grid, c):
        v = weighted[destination(c, a)]
        if v > best_val:
            best, best_val = a, v
    return best


@lru_cache(maxsize=16)
def serpentine(grid: GridSpec) -> tuple[Cell, ...]:
    path = []
    for i in range(grid.n_x):
        cols = range(grid.n_y) if i % 2 == 0 else range(grid.n_y - 1, -1, -1)
        path += [Cell(i, j) for j in cols]
    return tuple(path)


@dataclass(frozen=True)
class SweepState:
    """Cursor on the serpentine path; the sweeper bounces at both ends."""

    index: int
    direction: int = 1

    @classmethod
    def start(cls, grid: GridSpec, cell) -> "SweepState":
        if grid.obstacles:
            raise UnsupportedConfiguration("sweeping requires an obstacle-free grid")
        path = serpentine(grid)
        idx = path.index(Cell(*cell))
        return cls(idx, -1 if idx == len(path) - 1 and len(path) > 1 else 1)

    def cell(self, grid: GridSpec) -> Cell:
        return serpentine(grid)[self.index]


def sweep_policy(grid: GridSpec, state: SweepState) -> tuple[Action, SweepState]:
    if grid.obstacles:
        raise UnsupportedConfiguration("sweeping requires an obstacle-free grid")
    n = grid.n_cells
    if n == 1:
        return Action.STAY, state
    nxt, direction = state.index + state.direction, state.direction
    if not 0 <= nxt < n:
        direction = -direction
        nxt = state.index + direction
    path = serpentine(grid)
    here, there = path[state.index], path[nxt]
    move = (there.i - here.i, there.j - here.j)
    action = next(a for a in ACTIONS if a.delta == move)
    return action, SweepState(nxt, direction)


def rl_decentralized(params, s, mask, epsilon: float, rng: np.random.Generator) -> Action:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("no feasible action")
    # always consume one uniform draw so streams stay aligned across epsilon values
    explore = rng.random() < epsilon
    if explore:
        options = np.flatnonzero(mask)
        return Action(int(options[int(rng.integers(len(options)))]))
    return Action(int(masked_argmax(forward(params, s), mask)[0]))


def _destinations(grid: GridSpec, positions) -> np.ndarray:
    dest = np.full((len(positions), 5), -1, dtype=np.int64)
    for d, p in enumerate(positions):
        for a in feasible_actions(grid, p):
            c = destination(p, a)
            dest[d, a] = c.i * grid.n_y + c.j
    return dest


def _hall_violator(dest: np.ndarray) -> list[int]:
    """Drones that cannot all be matched to distinct cells (Hall's condition fails)."""
    n = dest.shape[0]
    options = [[int(c) for c in dest[d] if c >= 0] for d in range(n)]
    owner: dict[int, int] = {}

    def augment(d, seen):
        for c in options[d]:
            if c in seen:
                continue
            seen.add(c)
            if c not in owner or augment(owner[c], seen):
                owner[c] = d
                return True
        return False

    for d in range(n):
        if not augment(d, set()):
            # drones reachable by alternating paths from d form the violating set
            group, frontier = {d}, [d]
            while frontier:
                e = frontier.pop()
                for c in options[e]:
                    o = owner.get(c)
                    if o is not None and o not in group:
                        group.add(o)
                        frontier.append(o)
            return sorted(group)
    return []


def _raise_infeasible(grid: GridSpec, dest: np.ndarray):
    drones = _hall_violator(dest) or list(range(dest.shape[0]))
    cells = sorted({int(c) for d in drones for c in dest[d] if c >= 0})
    raise JointInfeasibleError(drones, [Cell(c // grid.n_y, c % grid.n_y) for c in cells])


def _assignment_value(q, dest, drones, taken) -> float | None:
    """Exact optimum of the sub-problem over ``drones`` with ``taken`` cells excluded."""
    if not drones:
        return 0.0
    cells = sorted({int(c) for d in drones for c in dest[d] if c >= 0 and c not in taken})
    if len(cells) < len(drones):
        return None
    col = {c: k for k, c in enumerate(cells)}
    cost = np.full((len(drones), len(cells)), np.inf)
    for r, d in enumerate(drones):
        for a in range(5):
            c = int(dest[d, a])
            if c >= 0 and c not in taken:
                cost[r, col[c]] = -q[d, a]
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError:
        return None
    if len(rows) < len(drones) or not np.all(np.isfinite(cost[rows, cols])):
        return None
    return float(-cost[rows, cols].sum())


def _joint_assignment(q: np.ndarray, dest: np.ndarray) -> list[int] | None:
    n = q.shape[0]
    best = _assignment_value(q, dest, list(range(n)), set())
    if best is None:
        return None
    tol = 1e-9 * max(1.0, abs(best))
    # fix drones one at a time to the smallest action that keeps the optimum reachable
    chosen, taken, fixed_sum = [], set(), 0.0
    for d in range(n):
        rest = list(range(d + 1, n))
        for a in range(5):
            c = int(dest[d, a])
            if c < 0 or c in taken:
                continue
            sub = _assignment_value(q, dest, rest, taken | {c})
            if sub is not None and fixed_sum + q[d, a] + sub >= best - tol:
                chosen.append(a)
                taken.add(c)
                fixed_sum += q[d, a]
                break
    return chosen


def joint_action_solve(q_vectors, positions, grid: GridSpec, method: str = "auto") -> list[Action]:
    """Maximize the summed Q-values subject to pairwise-distinct next cells.

    ``method`` is ``"exhaustive"`` (product search, exact, lexicographic
    tie-break), ``"assignment"`` (exact bipartite matching of drones to their
    reachable cells) or ``"auto"`` (exhaustive up to six drones).
    """
    q = np.ascontiguousarray(q_vectors, dtype=float)
    if q.ndim != 2 or q.shape[1] != 5 or q.shape[0] != len(positions):
        raise ValueError(f"expected q-values of shape ({len(positions)}, 5), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("q-values must be finite")
    dest = _destinations(grid, positions)
    if method == "auto":
        method = "exhaustive" if len(positions) <= EXHAUSTIVE_MAX_DRONES else "assignment"
    if method == "exhaustive":
        acts, _, ok = kernels.joint_exhaustive(q, dest)
        if not ok:
            _raise_infeasible(grid, dest)
        return [Action(int(a)) for a in acts]
    if method == "assignment":
        acts = _joint_assignment(q, dest)
        if acts is None:
            _raise_infeasible(grid, dest)
        return [Action(a) for a in acts]
    raise ValueError(f"unknown joint solver method {method!r}")


def joint_value(q_vectors, actions) -> float:
    total = 0.0
    for d, a in enumerate(actions):
        total += float(q_vectors[d][int(a)])
    return total


def sweeping_roles(n_drones: int) -> list[str]:
    """One sweeper, one random drone, the rest greedy (2 greedy for a 4-drone swarm)."""
    if n_drones < 1:
        raise ValueError("need at least one drone")
    if n_drones == 1:
        return ["sweep"]
    return ["sweep"] + ["greedy"] * (n_drones - 2) + ["random"]
