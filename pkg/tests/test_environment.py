import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dronepatrol.environment import (
    DemandEnv,
    Disturbance,
    Hotspot,
    Kind,
    ObservationBounds,
    SyntheticEnv,
    amplitude,
    demand_map,
    demand_observation,
    raw_observation,
    temporal_importance,
    test_map as make_test_map,
    training_map,
)
from dronepatrol.gridmap import GridSpec

GRID = GridSpec(20.0, 30.0, 20, 30)


def test_amplitude_examples():
    assert amplitude(Disturbance("big", (0, 0)), 0, 2000) == 1.0
    assert amplitude(Disturbance("small", (0, 0)), 0, 2000) == 0.0
    # frozen from an independent evaluation of exp(-1400 / (0.7 * 2000))
    assert amplitude(Disturbance("big", (0, 0), 0.7, 5.0), 1400, 2000) == pytest.approx(0.36787944117144233, abs=1e-15)


@given(st.integers(0, 1999))
def test_amplitude_bounded(k):
    for kind in Kind:
        a = amplitude(Disturbance(kind, (0, 0)), k, 2000)
        assert 0.0 <= a <= 1.0


@given(st.integers(0, 1998))
def test_big_amplitude_strictly_decreasing(k):
    d = Disturbance("big", (0, 0))
    assert amplitude(d, k + 1, 2000) < amplitude(d, k, 2000)


@given(st.integers(0, 1599))
def test_small_amplitude_period(k):
    # period T / beta2 = 400 steps for T=2000, beta2=5
    d = Disturbance("small", (0, 0))
    assert amplitude(d, k + 400, 2000) == pytest.approx(amplitude(d, k, 2000), abs=1e-9)


def test_raw_observation_examples():
    empty = SyntheticEnv(GRID, (), 2000)
    assert raw_observation(empty, (3, 4), 10) == 0.0
    assert not empty.observation_field(7).any()
    one = SyntheticEnv(GRID, (Disturbance("big", (5, 5)),), 2000)
    assert raw_observation(one, (5, 5), 0) == 1.0
    assert raw_observation(one, (5, 6), 0) == pytest.approx(0.6065306597126334, abs=1e-15)


def test_field_matches_loop_oracle():
    env = make_test_map(GridSpec.square_cells(8, 9), seed=3, horizon=100)
    sources = [(d.kind.value, d.origin.i, d.origin.j) for d in env.disturbances]
    for k in (0, 13, 99):
        ref = oracles.gaussian_field(8, 9, sources, k, 100, 0.7, 5.0)
        np.testing.assert_allclose(env.observation_field(k), ref, rtol=0, atol=1e-12)
        for c in ((0, 0), (4, 5), (7, 8)):
            assert raw_observation(env, c, k) == pytest.approx(ref[c[0]][c[1]], abs=1e-12)


def test_importance_examples():
    b = ObservationBounds(0.2, 0.8)
    g = GridSpec.square_cells(3, 3, {(1, 1)})
    assert temporal_importance(b, g, (0, 0), 0.2) == 0.0
    assert temporal_importance(b, g, (0, 0), 0.8) == 1.0
    assert temporal_importance(b, g, (1, 1), 0.5) == 0.0
    assert temporal_importance(b, g, (0, 0), 5.0) == 1.0


@given(st.floats(0, 3), st.floats(0, 3))
def test_importance_monotone(z1, z2):
    b = ObservationBounds()
    lo, hi = sorted((z1, z2))
    assert temporal_importance(b, GRID, (1, 1), lo) <= temporal_importance(b, GRID, (1, 1), hi)


def test_bounds_validation():
    with pytest.raises(ValueError):
        ObservationBounds(1.0, 1.0)


def test_importance_field_zero_on_obstacles():
    g = GridSpec.square_cells(6, 6, {(2, 2), (2, 3)})
    env = SyntheticEnv(g, (Disturbance("big", (2, 2)),), 100)
    t = env.importance(0)
    assert t[2, 2] == 0.0 and t[2, 3] == 0.0
    assert t.min() >= 0.0 and t.max() <= 1.0


def test_map_composition():
    tr = training_map(GRID, 0)
    te = make_test_map(GRID, 0)
    kinds = lambda env: sorted(d.kind.value for d in env.disturbances)  # noqa: E731
    assert kinds(tr) == ["big"] * 4 + ["small"] * 3
    assert kinds(te) == ["big"] * 2 + ["small"] * 3
    assert len({d.origin for d in tr.disturbances}) == 7
    assert all(d.beta1 == 0.7 and d.beta2 == 5.0 for d in tr.disturbances)


def test_map_seeding():
    a = [d.origin for d in training_map(GRID, 4).disturbances]
    b = [d.origin for d in training_map(GRID, 4).disturbances]
    c = [d.origin for d in training_map(GRID, 5).disturbances]
    assert a == b and a != c


def test_map_too_small():
    with pytest.raises(ValueError):
        training_map(GridSpec.square_cells(2, 3), 0)


def test_map_avoids_obstacles():
    g = GridSpec.square_cells(3, 3, {(0, 0), (1, 1)})
    env = training_map(g, 0, horizon=10)
    assert all(d.origin not in g.obstacles for d in env.disturbances)


def test_observation_invariant_to_source_order():
    env = make_test_map(GRID, 2)
    rev = SyntheticEnv(GRID, tuple(reversed(env.disturbances)), env.horizon)
    for k in (0, 50, 777):
        np.testing.assert_allclose(env.observation_field(k), rev.observation_field(k), atol=1e-15)


def test_observation_deterministic_bitwise():
    a = make_test_map(GRID, 1).observation_field(123)
    b = make_test_map(GRID, 1).observation_field(123)
    assert a.tobytes() == b.tobytes()


def test_importance_array_read_only():
    t = make_test_map(GRID, 1).importance(3)
    with pytest.raises(ValueError):
        t[0, 0] = 1.0


def test_demand_examples():
    g = GridSpec.square_cells(5, 5)
    quiet = DemandEnv(g, (Hotspot(10, (2, 2), 1.0, 1.0, 4),), seed=0, noise=0.0)
    assert demand_observation(quiet, (2, 2), 0) == 0.0
    plateau = DemandEnv(g, (Hotspot(0, (2, 2), 1.0, 1.0, 8),), seed=0, noise=0.0)
    assert demand_observation(plateau, (2, 2), 4) == 1.0
    noisy_a = demand_map(GridSpec(20.0, 30.0, 20, 30), seed=9)
    noisy_b = demand_map(GridSpec(20.0, 30.0, 20, 30), seed=9)
    for k in (0, 50, 143):
        assert noisy_a.observation_field(k).tobytes() == noisy_b.observation_field(k).tobytes()


def test_demand_noise_bounded_and_nonnegative():
    g = GridSpec.square_cells(6, 6)
    h = Hotspot(0, (3, 3), 0.8, 1.5, 20)
    clean = DemandEnv(g, (h,), seed=1, noise=0.0)
    noisy = DemandEnv(g, (h,), seed=1, noise=0.1)
    for k in range(0, 20, 3):
        z0, z1 = clean.observation_field(k), noisy.observation_field(k)
        assert z1.min() >= 0.0
        assert np.all(np.abs(z1 - z0) <= 0.1 * 0.8 + 1e-12)


def test_hotspot_ramp_shape():
    h = Hotspot(4, (0, 0), 1.0, 1.0, 8)
    assert [h.ramp(k) for k in range(3, 13)] == [0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.0]


@pytest.mark.parametrize("kw", [dict(peak=-1.0), dict(duration=0), dict(radius=0.0)])
def test_hotspot_validation(kw):
    base = dict(start=0, origin=(0, 0), peak=1.0, radius=1.0, duration=3)
    base.update(kw)
    with pytest.raises(ValueError):
        Hotspot(**base)


def test_small_amplitude_mid_lobe():
    d = Disturbance("small", (0, 0), 0.7, 5.0)
    assert amplitude(d, 37, 2000) == max(0.0, math.sin(2 * 5.0 * math.pi * 37 / 2000))
