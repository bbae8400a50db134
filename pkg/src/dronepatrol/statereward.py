"""Per-drone state encoding, per-drone reward and the swarm patrolling score.

State layout (13 entries)::

    0-1   i/n_x, j/n_y                 own cell
    2-6   I*T over [center, up, down, left, right]
    7-10  mean idleness down, up, left, right
    11-12 centre of mass of the other drones, normalized
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .gridmap import Cell, GridSpec
from .idleness import IdlenessMap

STATE_DIM = 13


class RewardError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreWeights:
    alpha_T: float = 1.0
    alpha_I: float = 1.0

    def __post_init__(self):
        # zero is allowed so either term can be switched off in experiments
        if self.alpha_T < 0 or self.alpha_I < 0:
            raise ValueError("score weights must be non-negative")


def positions_array(positions) -> tuple[np.ndarray, np.ndarray]:
    pi = np.fromiter((int(p[0]) for p in positions), dtype=np.int64, count=len(positions))
    pj = np.fromiter((int(p[1]) for p in positions), dtype=np.int64, count=len(positions))
    return pi, pj


def _weighted(env, imap: IdlenessMap, k: int) -> np.ndarray:
    return imap.values * env.importance(k)


def fov_values(env, imap: IdlenessMap, c, k: int) -> np.ndarray:
    c = env.grid.check(c)
    pi, pj = positions_array([c])
    states = kernels.build_states(imap.values, _weighted(env, imap, k),
                                  env.grid.obstacle_mask, pi, pj)
    return states[0, 2:7].copy()


def directional_idleness(imap: IdlenessMap, grid: GridSpec, c) -> tuple[float, float, float, float]:
    """Mean idleness of free cells strictly below, above, left and right of ``c``."""
    c = grid.check(c)
    pi, pj = positions_array([c])
    states = kernels.build_states(imap.values, imap.values, grid.obstacle_mask, pi, pj)
    down, up, left, right = states[0, 7:11]
    return float(down), float(up), float(left), float(right)


def center_of_mass(positions, d: int) -> tuple[float, float]:
    n = len(positions)
    if n < 2:
        raise ValueError("centre of mass of the other drones needs at least two drones")
    others = [p for e, p in enumerate(positions) if e != d]
    return (sum(p[0] for p in others) / (n - 1), sum(p[1] for p in others) / (n - 1))


def build_states(env, imap: IdlenessMap, positions, k: int) -> np.ndarray:
    """States of every drone at once, shape ``(N, 13)``.

    A single drone uses its own cell as the centre of mass.
    """
    pi, pj = positions_array(positions)
    return kernels.build_states(imap.values, _weighted(env, imap, k),
                                env.grid.obstacle_mask, pi, pj)


def build_state(env, imap: IdlenessMap, positions, d: int, k: int) -> np.ndarray:
    return build_states(env, imap, positions, k)[d]


def _check_pair(pre: IdlenessMap, post: IdlenessMap):
    if pre.values.shape != post.values.shape or pre.eta != post.eta or pre.delta != post.delta:
        raise RewardError("pre/post idleness maps do not belong to the same sequence")


def swarm_rewards(pre: IdlenessMap, post: IdlenessMap, env, positions_k, positions_k1, k: int,
                  weights: ScoreWeights, preupdate_arrival: bool = True) -> np.ndarray:
    """Reward of every drone for the transition ``positions_k -> positions_k1``.

    The importance gain on arrival weights next-step importance by idleness.
    With ``preupdate_arrival`` the weighting uses the map before the visit,
    so a drone is credited with the importance it actually collects;
    otherwise the post-update map is used and the arrival term cancels
    against the next step's departure term.
    """
    _check_pair(pre, post)
    if len(positions_k) != len(positions_k1):
        raise RewardError("position lists differ in length")
    t_now = env.importance(k)
    t_next = env.importance(k + 1)
    arrival_idle = pre.values if preupdate_arrival else post.values
    pi0, pj0 = positions_array(positions_k)
    pi1, pj1 = positions_array(positions_k1)
    gain_T = (kernels.neighborhood_sums(arrival_idle * t_next, pi1, pj1)
              - kernels.neighborhood_sums(pre.values * t_now, pi0, pj0))
    gain_I = (kernels.neighborhood_sums(post.values, pi1, pj1)
              - kernels.neighborhood_sums(pre.values, pi0, pj0))
    return weights.alpha_T * gain_T + weights.alpha_I * gain_I


def drone_reward(pre: IdlenessMap, post: IdlenessMap, env, p_k, p_k1, k: int,
                 weights: ScoreWeights, preupdate_arrival: bool = True) -> float:
    p_k, p_k1 = Cell(*p_k), Cell(*p_k1)
    if abs(p_k.i - p_k1.i) + abs(p_k.j - p_k1.j) > 1:
        raise RewardError(f"{tuple(p_k1)} is not one move away from {tuple(p_k)}")
    r = swarm_rewards(pre, post, env, [p_k], [p_k1], k, weights, preupdate_arrival)
    return float(r[0])


def swarm_score(pre: IdlenessMap, post: IdlenessMap, env, positions_k, positions_k1, k: int,
                weights: ScoreWeights, preupdate_arrival: bool = True) -> float:
    r = swarm_rewards(pre, post, env, positions_k, positions_k1, k, weights, preupdate_arrival)
    total = 0.0
    for v in r:
        total += float(v)
    return total
