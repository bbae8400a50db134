"""Traffic observation generators and their normalization to temporal importance.

Two environments share one protocol: ``observation_field(k)`` returns the raw
traffic variable for every cell at step ``k`` and ``importance(k)`` the same
field mapped into [0, 1] (zero on obstacles).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .gridmap import Cell, GridSpec


class Kind(str, Enum):
    BIG = "big"
    SMALL = "small"


@dataclass(frozen=True)
class ObservationBounds:
    z_lo: float = 0.0
    z_hi: float = 1.0

    def __post_init__(self):
        if not (self.z_hi > self.z_lo >= 0):
            raise ValueError(f"need z_hi > z_lo >= 0, got ({self.z_lo}, {self.z_hi})")


@dataclass(frozen=True)
class Disturbance:
    kind: Kind
    origin: Cell
    beta1: float = 0.7
    beta2: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "origin", Cell(int(self.origin[0]), int(self.origin[1])))
        if self.beta1 <= 0 or self.beta2 <= 0:
            raise ValueError("beta1 and beta2 must be positive")


def amplitude(d: Disturbance, k: int, horizon: int) -> float:
    if d.kind is Kind.BIG:
        return math.exp(-k / (d.beta1 * horizon))
    return max(0.0, math.sin(2.0 * d.beta2 * math.pi * k / horizon))


def temporal_importance(bounds: ObservationBounds, grid: GridSpec, c, z: float) -> float:
    if Cell(c[0], c[1]) in grid.obstacles:
        return 0.0
    z = min(max(z, bounds.z_lo), bounds.z_hi)
    return (z - bounds.z_lo) / (bounds.z_hi - bounds.z_lo)


def normalize_field(bounds: ObservationBounds, grid: GridSpec, z: np.ndarray) -> np.ndarray:
    """Vectorized ``temporal_importance`` over a whole observation field."""
    t = (np.clip(z, bounds.z_lo, bounds.z_hi) - bounds.z_lo) / (bounds.z_hi - bounds.z_lo)
    t[grid.obstacle_mask.astype(bool)] = 0.0
    return t


def _gaussian(grid: GridSpec, origin, scale: float = 1.0) -> np.ndarray:
    ii = np.arange(grid.n_x, dtype=float)[:, None] - origin[0]
    jj = np.arange(grid.n_y, dtype=float)[None, :] - origin[1]
    return np.exp(-0.5 * (ii * ii + jj * jj) / (scale * scale))


class _FieldCache:
    # importance(k) is queried for k and k+1 on consecutive steps
    def _init_cache(self):
        object.__setattr__(self, "_importance", lru_cache(maxsize=8)(self._compute_importance))

    def importance(self, k: int) -> np.ndarray:
        return self._importance(int(k))

    def _compute_importance(self, k: int) -> np.ndarray:
        t = normalize_field(self.bounds, self.grid, self.observation_field(k))
        t.setflags(write=False)
        return t


@dataclass(frozen=True, eq=False)
class SyntheticEnv(_FieldCache):
    grid: GridSpec
    disturbances: tuple
    horizon: int
    bounds: ObservationBounds = field(default_factory=ObservationBounds)

    def __post_init__(self):
        object.__setattr__(self, "disturbances", tuple(self.disturbances))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for d in self.disturbances:
            if not self.grid.in_bounds(d.origin):
                raise ValueError(f"disturbance origin {tuple(d.origin)} out of bounds")
        kernels = tuple(_gaussian(self.grid, d.origin) for d in self.disturbances)
        object.__setattr__(self, "_kernels", kernels)
        self._init_cache()

    def observation_field(self, k: int) -> np.ndarray:
        # the horizon only sets the time scale; k == horizon is evaluated for the last reward
        if k < 0:
            raise ValueError(f"step must be non-negative, got {k}")
        z = np.zeros(self.grid.shape)
        for d, g in zip(self.disturbances, self._kernels):
            z += amplitude(d, k, self.horizon) * g
        return z

    def describe(self) -> dict:
        return {
            "kind": "synthetic",
            "horizon": self.horizon,
            "disturbances": [(d.kind.value, d.origin.i, d.origin.j) for d in self.disturbances],
            "beta1": self.disturbances[0].beta1 if self.disturbances else 0.7,
            "beta2": self.disturbances[0].beta2 if self.disturbances else 5.0,
            "z_lo": self.bounds.z_lo,
            "z_hi": self.bounds.z_hi,
        }


def raw_observation(env: SyntheticEnv, c, k: int) -> float:
    c = env.grid.check(c)
    total = 0.0
    for d in env.disturbances:
        di, dj = c.i - d.origin.i, c.j - d.origin.j
        total += amplitude(d, k, env.horizon) * math.exp(-0.5 * (di * di + dj * dj))
    return total


def _place(grid: GridSpec, n_big: int, n_small: int, seed: int, horizon: int,
           beta1: float, beta2: float, bounds: ObservationBounds) -> SyntheticEnv:
    free = grid.free_cells
    if len(free) < n_big + n_small:
        raise ValueError(f"grid has {len(free)} free cells, need {n_big + n_small}")
    # stream keyed on the disturbance counts so train and test maps differ for one seed
    rng = np.random.default_rng([seed, n_big, n_small])
    picks = rng.choice(len(free), size=n_big + n_small, replace=False)
    kinds = [Kind.BIG] * n_big + [Kind.SMALL] * n_small
    dist = [Disturbance(kd, free[p], beta1, beta2) for kd, p in zip(kinds, picks)]
    return SyntheticEnv(grid, tuple(dist), horizon, bounds)


def training_map(grid: GridSpec, seed: int, horizon: int = 2000, beta1: float = 0.7,
                 beta2: float = 5.0, bounds: ObservationBounds | None = None) -> SyntheticEnv:
    """Map used to collect pretraining data: 4 big + 3 small disturbances."""
    return _place(grid, 4, 3, seed, horizon, beta1, beta2, bounds or ObservationBounds())


def test_map(grid: GridSpec, seed: int, horizon: int = 2000, beta1: float = 0.7,
             beta2: float = 5.0, bounds: ObservationBounds | None = None) -> SyntheticEnv:
    """Evaluation map: 2 big + 3 small disturbances."""
    return _place(grid, 2, 3, seed, horizon, beta1, beta2, bounds or ObservationBounds())


test_map.__test__ = False  # keep pytest from collecting it


@dataclass(frozen=True)
class Hotspot:
    start: int
    origin: Cell
    peak: float
    radius: float
    duration: int

    def __post_init__(self):
        object.__setattr__(self, "origin", Cell(int(self.origin[0]), int(self.origin[1])))
        if self.peak < 0:
            raise ValueError("hotspot peak must be >= 0")
        if self.duration < 1:
            raise ValueError("hotspot duration must be >= 1")
        if self.radius <= 0:
            raise ValueError("hotspot radius must be positive")

    def ramp(self, k: int) -> float:
        """Trapezoid in time: linear rise, plateau, linear fall over the active window."""
        t = k - self.start
        if t < 0 or t >= self.duration:
            return 0.0
        edge = max(1, self.duration // 4)
        if t < edge:
            return (t + 1) / edge
        if t >= self.duration - edge:
            return (self.duration - t) / edge
        return 1.0


@dataclass(frozen=True, eq=False)
class DemandEnv(_FieldCache):
    """Stochastic-demand stand-in for a real traffic feed.

    Noise is drawn per step from a generator keyed on ``(seed, k)``, so every
    query of the same step sees the same field regardless of call order.
    """

    grid: GridSpec
    hotspots: tuple
    seed: int
    bounds: ObservationBounds = field(default_factory=ObservationBounds)
    noise: float = 0.1
    horizon: int = 144

    def __post_init__(self):
        object.__setattr__(self, "hotspots", tuple(self.hotspots))
        if not 0 <= self.noise <= 1:
            raise ValueError("noise level must be in [0, 1]")
        for h in self.hotspots:
            if not self.grid.in_bounds(h.origin):
                raise ValueError(f"hotspot origin {tuple(h.origin)} out of bounds")
        kernels = tuple(_gaussian(self.grid, h.origin, h.radius) for h in self.hotspots)
        object.__setattr__(self, "_kernels", kernels)
        self._init_cache()

    def observation_field(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError(f"step must be non-negative, got {k}")
        z = np.zeros(self.grid.shape)
        top = 0.0
        for h, g in zip(self.hotspots, self._kernels):
            r = h.ramp(k)
            if r > 0.0:
                z += (h.peak * r) * g
                top = max(top, h.peak)
        if self.noise > 0 and top > 0:
            rng = np.random.default_rng([self.seed, k])
            z += (self.noise * top) * rng.uniform(-1.0, 1.0, size=self.grid.shape)
        np.maximum(z, 0.0, out=z)
        return z

    def describe(self) -> dict:
        return {
            "kind": "demand",
            "seed": self.seed,
            "noise": self.noise,
            "horizon": self.horizon,
            "hotspots": [(h.start, h.origin.i, h.origin.j, h.peak, h.radius, h.duration)
                         for h in self.hotspots],
            "z_lo": self.bounds.z_lo,
            "z_hi": self.bounds.z_hi,
        }


def demand_observation(env: DemandEnv, c, k: int) -> float:
    c = env.grid.check(c)
    return float(env.observation_field(k)[c])


def demand_map(grid: GridSpec, seed: int, horizon: int = 144, n_hotspots: int = 8,
               noise: float = 0.1, bounds: ObservationBounds | None = None) -> DemandEnv:
    """Random rush-hour schedule: hotspots switch on and off at seeded times and places."""
    rng = np.random.default_rng([seed, 144])
    free = grid.free_cells
    hotspots = []
    for _ in range(n_hotspots):
        duration = int(rng.integers(max(2, horizon // 3), max(3, horizon) + 1))
        start = int(rng.integers(0, max(1, horizon - duration // 2)))
        origin = free[int(rng.integers(len(free)))]
        hotspots.append(Hotspot(start, origin, float(rng.uniform(0.5, 1.0)),
                                float(rng.uniform(1.0, 2.5)), duration))
    return DemandEnv(grid, tuple(hotspots), seed, bounds or ObservationBounds(), noise, horizon)
