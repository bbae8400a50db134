"""Pure-Python implementation of the per-step kernels.

Mirrors ``_ckernels.pyx`` function for function. Summation runs left to right
in the same order as the compiled loops so both backends agree to rounding.
"""
import itertools

import numpy as np

# adjacency / action offsets in canonical order: stay, up, down, left, right
_DI = (0, -1, 1, 0, 0)
_DJ = (0, 0, 0, -1, 1)


def step_idleness(values, obstacle, vis_i, vis_j, eta, delta):
    out = np.minimum(1.0, values + delta)
    # a cell holding several drones is discounted once
    seen = set()
    for i, j in zip(vis_i, vis_j):
        i, j = int(i), int(j)
        if (i, j) not in seen:
            seen.add((i, j))
            out[i, j] = eta * values[i, j]
    out[obstacle.astype(bool)] = 0.0
    return out


def neighborhood_sums(field, pos_i, pos_j):
    n_x, n_y = field.shape
    out = np.zeros(len(pos_i))
    for d in range(len(pos_i)):
        i, j = int(pos_i[d]), int(pos_j[d])
        s = 0.0
        for a in range(5):
            ii, jj = i + _DI[a], j + _DJ[a]
            if 0 <= ii < n_x and 0 <= jj < n_y:
                s += field[ii, jj]
        out[d] = s
    return out


def _mean(vals):
    s = 0.0
    for v in vals:
        s += v
    return s / len(vals) if len(vals) else 0.0


def build_states(values, weighted, obstacle, pos_i, pos_j):
    n_x, n_y = values.shape
    n = len(pos_i)
    free = obstacle == 0
    out = np.zeros((n, 13))
    si = 0.0
    sj = 0.0
    for d in range(n):
        si += pos_i[d]
        sj += pos_j[d]
    for d in range(n):
        i, j = int(pos_i[d]), int(pos_j[d])
        row = out[d]
        row[0] = i / n_x
        row[1] = j / n_y
        for a in range(5):
            ii, jj = i + _DI[a], j + _DJ[a]
            if 0 <= ii < n_x and 0 <= jj < n_y:
                row[2 + a] = weighted[ii, jj]
        col, colf = values[:, j], free[:, j]
        lin, linf = values[i, :], free[i, :]
        row[7] = _mean([col[r] for r in range(i + 1, n_x) if colf[r]])
        row[8] = _mean([col[r] for r in range(0, i) if colf[r]])
        row[9] = _mean([lin[c] for c in range(0, j) if linf[c]])
        row[10] = _mean([lin[c] for c in range(j + 1, n_y) if linf[c]])
        if n > 1:
            row[11] = (si - i) / (n - 1) / n_x
            row[12] = (sj - j) / (n - 1) / n_y
        else:
            row[11] = i / n_x
            row[12] = j / n_y
    return out


def joint_exhaustive(q, dest):
    """Best joint action with pairwise-distinct destinations.

    ``dest[d, a]`` is the destination cell id of action ``a`` for drone ``d``
    or -1 when infeasible. Ties resolve to the lexicographically smallest
    action tuple.
    """
    n = q.shape[0]
    options = [[a for a in range(5) if dest[d, a] >= 0] for d in range(n)]
    best = None
    best_val = 0.0
    for combo in itertools.product(*options):
        cells = [dest[d, a] for d, a in enumerate(combo)]
        if len(set(cells)) < n:
            continue
        total = 0.0
        for d, a in enumerate(combo):
            total += q[d, a]
        if best is None or total > best_val:
            best, best_val = combo, total
    if best is None:
        return np.full(n, -1, dtype=np.int64), float("-inf"), False
    return np.asarray(best, dtype=np.int64), best_val, True
