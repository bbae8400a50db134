import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

import oracles
from dronepatrol.gridmap import Action, GridSpec, destination, feasible_actions
from dronepatrol.idleness import IdlenessMap, init_idleness
from dronepatrol.policies import (
    JointInfeasibleError,
    SweepState,
    UnsupportedConfiguration,
    greedy_policy,
    joint_action_solve,
    joint_value,
    random_policy,
    rl_decentralized,
    sweep_policy,
    sweeping_roles,
)
from dronepatrol.qnet import QParams


class FieldEnv:
    """Importance given directly as an array."""

    def __init__(self, grid, field):
        self.grid = grid
        self.field = np.asarray(field, dtype=float)

    def importance(self, k):
        return self.field


def bias_net(q):
    """A network whose output is ``q`` regardless of the input."""
    return QParams([np.zeros((13, 5))], [np.asarray(q, dtype=float)])


def test_random_corner_uniform():
    g = GridSpec.square_cells(5, 5)
    rng = np.random.default_rng(0)
    draws = [random_policy(g, (0, 0), rng) for _ in range(10_000)]
    assert set(draws) == {Action.STAY, Action.DOWN, Action.RIGHT}
    counts = [draws.count(a) for a in (Action.STAY, Action.DOWN, Action.RIGHT)]
    assert chisquare(counts).pvalue > 1e-3


def test_random_single_option_and_seeded():
    boxed = GridSpec.square_cells(1, 1)
    rng = np.random.default_rng(1)
    assert all(random_policy(boxed, (0, 0), rng) == Action.STAY for _ in range(20))
    g = GridSpec.square_cells(4, 4)
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    assert [random_policy(g, (1, 2), r1) for _ in range(30)] == [random_policy(g, (1, 2), r2) for _ in range(30)]


def test_greedy_tie_goes_to_stay():
    g = GridSpec.square_cells(3, 3)
    env = FieldEnv(g, np.full((3, 3), 0.5))
    assert greedy_policy(g, init_idleness(g, 0.1, 0.025), env, (1, 1), 0) == Action.STAY


def test_greedy_strict_argmax():
    g = GridSpec.square_cells(3, 3)
    field = np.full((3, 3), 0.1)
    field[1, 2] = 0.9
    assert greedy_policy(g, init_idleness(g, 0.1, 0.025), FieldEnv(g, field), (1, 1), 0) == Action.RIGHT


def test_greedy_weights_by_idleness():
    g = GridSpec.square_cells(3, 3)
    idle = np.full((3, 3), 1.0)
    idle[1, 2] = 0.05  # high importance but just visited
    field = np.full((3, 3), 0.3)
    field[1, 2] = 0.9
    imap = IdlenessMap(idle, 0.1, 0.025)
    assert greedy_policy(g, imap, FieldEnv(g, field), (1, 1), 0) == Action.STAY


@st.composite
def greedy_cases(draw):
    n_x, n_y = draw(st.integers(1, 4)), draw(st.integers(1, 4))
    cells = [(i, j) for i in range(n_x) for j in range(n_y)]
    obstacles = draw(st.sets(st.sampled_from(cells), max_size=len(cells) - 1))
    free = [c for c in cells if c not in obstacles]
    c = draw(st.sampled_from(free))
    rng = np.random.default_rng(draw(st.integers(0, 2**31)))
    field = rng.random((n_x, n_y))
    idle = rng.random((n_x, n_y))
    for o in obstacles:
        field[o] = idle[o] = 0.0
    return GridSpec.square_cells(n_x, n_y, obstacles), c, field, idle


@given(greedy_cases())
def test_greedy_matches_brute_force(case):
    g, c, field, idle = case
    a = greedy_policy(g, IdlenessMap(idle, 0.1, 0.025), FieldEnv(g, field), c, 0)
    assert a in feasible_actions(g, c)
    best = None
    for b, (di, dj) in enumerate(oracles.MOVES):
        cell = (c[0] + di, c[1] + dj)
        if 0 <= cell[0] < g.n_x and 0 <= cell[1] < g.n_y and cell not in g.obstacles:
            v = idle[cell] * field[cell]
            if best is None or v > best[0]:
                best = (v, b)
    assert int(a) == best[1]


def test_sweep_two_by_two_cycle():
    g = GridSpec.square_cells(2, 2)
    state = SweepState.start(g, (0, 0))
    seen = [tuple(state.cell(g))]
    for _ in range(8):
        a, state = sweep_policy(g, state)
        nxt = tuple(state.cell(g))
        assert tuple(destination(seen[-1], a)) == nxt
        seen.append(nxt)
    assert seen == [(0, 0), (0, 1), (1, 1), (1, 0), (1, 1), (0, 1), (0, 0), (0, 1), (1, 1)]


@pytest.mark.parametrize("shape", [(3, 4), (5, 2), (1, 6), (4, 4)])
def test_sweep_covers_and_has_period(shape):
    g = GridSpec.square_cells(*shape)
    n = g.n_cells
    state = SweepState.start(g, (0, 0))
    cells = [tuple(state.cell(g))]
    for _ in range(3 * (2 * n - 2)):
        _, state = sweep_policy(g, state)
        cells.append(tuple(state.cell(g)))
    assert len(set(cells[:n])) == n
    period = 2 * n - 2
    assert cells[period:2 * period] == cells[:period]


def test_sweep_full_grid_coverage():
    g = GridSpec(20.0, 30.0, 20, 30)
    state = SweepState.start(g, (7, 11))
    seen = {tuple(state.cell(g))}
    for _ in range(2000):
        _, state = sweep_policy(g, state)
        seen.add(tuple(state.cell(g)))
    assert len(seen) == 600


def test_sweep_rejects_obstacles():
    g = GridSpec.square_cells(3, 3, {(1, 1)})
    with pytest.raises(UnsupportedConfiguration):
        SweepState.start(g, (0, 0))


def test_decentralized_masked_argmax():
    net = bias_net([0.1, 0.9, 0.2, 0.3, 0.4])
    mask = np.array([1, 0, 1, 1, 1], bool)
    rng = np.random.default_rng(0)
    assert rl_decentralized(net, np.zeros(13), mask, 0.0, rng) == Action.RIGHT
    assert rl_decentralized(net, np.zeros(13), np.ones(5, bool), 0.0, rng) == Action.UP


def test_decentralized_full_exploration_uniform():
    net = bias_net([0.0, 9.0, 0.0, 0.0, 0.0])
    mask = np.array([1, 1, 0, 1, 0], bool)
    rng = np.random.default_rng(3)
    draws = [int(rl_decentralized(net, np.zeros(13), mask, 1.0, rng)) for _ in range(6000)]
    counts = [draws.count(a) for a in (0, 1, 3)]
    assert sum(counts) == 6000
    assert chisquare(counts).pvalue > 1e-3


def test_decentralized_empty_mask():
    with pytest.raises(ValueError):
        rl_decentralized(bias_net(np.zeros(5)), np.zeros(13), np.zeros(5, bool), 0.0, np.random.default_rng(0))


def test_joint_single_drone_is_feasible_argmax():
    g = GridSpec.square_cells(3, 3)
    q = np.array([[0.0, 5.0, 1.0, 0.5, 2.0]])
    assert joint_action_solve(q, [(0, 1)], g) == [Action.RIGHT]


def test_joint_two_drones_contend_for_one_cell():
    g = GridSpec.square_cells(1, 3)
    # drones at (0,0) and (0,2) both want (0,1)
    q = np.array([[0.0, -9, -9, -9, 1.0], [0.0, -9, -9, 3.0, -9]])
    for method in ("exhaustive", "assignment"):
        acts = joint_action_solve(q, [(0, 0), (0, 2)], g, method)
        assert acts == [Action.STAY, Action.LEFT]
        assert joint_value(q, acts) == oracles.joint_best(q, [(0, 0), (0, 2)], 1, 3) == 3.0


def test_joint_swap_allowed():
    g = GridSpec.square_cells(1, 2)
    q = np.array([[0.0, 0, 0, 0, 1.0], [0.0, 0, 0, 1.0, 0]])
    for method in ("exhaustive", "assignment"):
        assert joint_action_solve(q, [(0, 0), (0, 1)], g, method) == [Action.RIGHT, Action.LEFT]


def test_joint_distinct_starts_always_feasible():
    g = GridSpec.square_cells(3, 3, {(0, 1), (1, 0), (1, 1)})
    # a walled-in drone can still stay put
    assert joint_action_solve(np.zeros((2, 5)), [(0, 0), (2, 2)], g) == [Action.STAY, Action.STAY]


@pytest.mark.parametrize("method", ["exhaustive", "assignment"])
def test_joint_infeasible_names_violator_set(method):
    # coincident drones left over from decentralized operation: three drones share a
    # two-cell pocket at the left end, while a fourth roams freely on the right
    g = GridSpec.square_cells(1, 4, {(0, 2)})
    with pytest.raises(JointInfeasibleError) as err:
        joint_action_solve(np.zeros((4, 5)), [(0, 0), (0, 1), (0, 1), (0, 3)], g, method)
    assert err.value.drones == (0, 1, 2)
    assert [tuple(c) for c in err.value.cells] == [(0, 0), (0, 1)]
    assert "[0, 1, 2]" in str(err.value)


@st.composite
def joint_fixtures(draw, max_n=4):
    n_x, n_y = draw(st.integers(2, 4)), draw(st.integers(2, 4))
    cells = [(i, j) for i in range(n_x) for j in range(n_y)]
    obstacles = draw(st.sets(st.sampled_from(cells), max_size=3))
    free = [c for c in cells if c not in obstacles]
    n = draw(st.integers(1, min(max_n, len(free))))
    pos = draw(st.lists(st.sampled_from(free), min_size=n, max_size=n, unique=True))
    rng = np.random.default_rng(draw(st.integers(0, 2**31)))
    q = rng.normal(size=(n, 5))
    if draw(st.booleans()):
        q = np.round(q)  # plenty of ties
    return GridSpec.square_cells(n_x, n_y, obstacles), pos, q


@given(joint_fixtures(), st.sampled_from(["exhaustive", "assignment"]))
def test_joint_matches_exhaustive_oracle(fix, method):
    g, pos, q = fix
    best = oracles.joint_best(q, pos, g.n_x, g.n_y, g.obstacles)
    acts = joint_action_solve(q, pos, g, method)
    dests = [tuple(destination(p, a)) for p, a in zip(pos, acts)]
    assert all(a in feasible_actions(g, p) for p, a in zip(pos, acts))
    assert len(set(dests)) == len(dests)
    assert joint_value(q, acts) == pytest.approx(best, abs=1e-9)


@given(joint_fixtures())
def test_joint_methods_choose_same_tuple(fix):
    g, pos, q = fix
    assert joint_action_solve(q, pos, g, "exhaustive") == joint_action_solve(q, pos, g, "assignment")


@given(joint_fixtures(), st.floats(0.01, 100.0))
def test_joint_scale_invariant(fix, scale):
    g, pos, q = fix
    q = np.round(q, 3)
    assert joint_action_solve(q, pos, g) == joint_action_solve(q * scale, pos, g)


def test_joint_lexicographic_tie_break():
    g = GridSpec.square_cells(3, 3)
    acts = joint_action_solve(np.zeros((2, 5)), [(1, 1), (0, 0)], g)
    assert acts == [Action.STAY, Action.STAY]
    # ties that force a move: the smallest tuple wins
    q = np.array([[0.0, 1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, 0.0]])
    assert joint_action_solve(q, [(1, 1), (2, 2)], g) == [Action.UP, Action.STAY]


def test_joint_large_swarm_uses_assignment():
    g = GridSpec.square_cells(6, 6)
    rng = np.random.default_rng(4)
    pos = [(i, j) for i in range(0, 6, 2) for j in range(0, 6, 2)][:8]
    q = rng.normal(size=(8, 5))
    acts = joint_action_solve(q, pos, g)
    dests = {tuple(destination(p, a)) for p, a in zip(pos, acts)}
    assert len(dests) == 8
    assert joint_value(q, acts) == pytest.approx(joint_value(q, joint_action_solve(q, pos, g, "exhaustive")), abs=1e-12)


def test_joint_rejects_bad_input():
    g = GridSpec.square_cells(3, 3)
    with pytest.raises(ValueError):
        joint_action_solve(np.zeros((2, 4)), [(0, 0), (1, 1)], g)
    with pytest.raises(ValueError):
        joint_action_solve(np.array([[np.nan, 0, 0, 0, 0]]), [(0, 0)], g)
    with pytest.raises(ValueError):
        joint_action_solve(np.zeros((1, 5)), [(0, 0)], g, "magic")


def test_sweeping_roles():
    assert sweeping_roles(4) == ["sweep", "greedy", "greedy", "random"]
    assert sweeping_roles(2) == ["sweep", "random"]
    assert sweeping_roles(1) == ["sweep"]
    roles = sweeping_roles(7)
    assert roles.count("sweep") == 1 and roles.count("random") == 1 and roles.count("greedy") == 5
    with pytest.raises(ValueError):
        sweeping_roles(0)
