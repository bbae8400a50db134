# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-step kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef int DI[5]
cdef int DJ[5]
DI[:] = [0, -1, 1, 0, 0]
DJ[:] = [0, 0, 0, -1, 1]


def step_idleness(const double[:, :] values, const unsigned char[:, :] obstacle,
                  const long[:] vis_i, const long[:] vis_j, double eta, double delta):
    cdef Py_ssize_t n_x = values.shape[0], n_y = values.shape[1]
    cdef Py_ssize_t i, j, d, e
    cdef bint dup
    out_arr = np.empty((n_x, n_y))
    cdef double[:, :] out = out_arr
    cdef double v
    for i in range(n_x):
        for j in range(n_y):
            v = values[i, j] + delta
            out[i, j] = v if v < 1.0 else 1.0
    for d in range(vis_i.shape[0]):
        dup = False
        for e in range(d):
            if vis_i[e] == vis_i[d] and vis_j[e] == vis_j[d]:
                dup = True
                break
        if not dup:
            out[vis_i[d], vis_j[d]] = eta * values[vis_i[d], vis_j[d]]
    for i in range(n_x):
        for j in range(n_y):
            if obstacle[i, j]:
                out[i, j] = 0.0
    return out_arr


def neighborhood_sums(const double[:, :] field, const long[:] pos_i, const long[:] pos_j):
    cdef Py_ssize_t n_x = field.shape[0], n_y = field.shape[1]
    cdef Py_ssize_t n = pos_i.shape[0], d
    cdef int a, ii, jj
    cdef double s
    out_arr = np.zeros(n)
    cdef double[:] out = out_arr
    for d in range(n):
        s = 0.0
        for a in range(5):
            ii = pos_i[d] + DI[a]
            jj = pos_j[d] + DJ[a]
            if 0 <= ii < n_x and 0 <= jj < n_y:
                s += field[ii, jj]
        out[d] = s
    return out_arr


def build_states(const double[:, :] values, const double[:, :] weighted,
                 const unsigned char[:, :] obstacle, const long[:] pos_i, const long[:] pos_j):
    cdef Py_ssize_t n_x = values.shape[0], n_y = values.shape[1]
    cdef Py_ssize_t n = pos_i.shape[0], d, r
    cdef long i, j
    cdef int a, ii, jj, cnt
    cdef double s, si = 0.0, sj = 0.0
    out_arr = np.zeros((n, 13))
    cdef double[:, :] out = out_arr
    for d in range(n):
        si += pos_i[d]
        sj += pos_j[d]
    for d in range(n):
        i = pos_i[d]
        j = pos_j[d]
        out[d, 0] = <double>i / n_x
        out[d, 1] = <double>j / n_y
        for a in range(5):
            ii = i + DI[a]
            jj = j + DJ[a]
            if 0 <= ii < n_x and 0 <= jj < n_y:
                out[d, 2 + a] = weighted[ii, jj]
        # down
        s = 0.0
        cnt = 0
        for r in range(i + 1, n_x):
            if not obstacle[r, j]:
                s += values[r, j]
                cnt += 1
        out[d, 7] = s / cnt if cnt else 0.0
        # up
        s = 0.0
        cnt = 0
        for r in range(0, i):
            if not obstacle[r, j]:
                s += values[r, j]
                cnt += 1
        out[d, 8] = s / cnt if cnt else 0.0
        # left
        s = 0.0
        cnt = 0
        for r in range(0, j):
            if not obstacle[i, r]:
                s += values[i, r]
                cnt += 1
        out[d, 9] = s / cnt if cnt else 0.0
        # right
        s = 0.0
        cnt = 0
        for r in range(j + 1, n_y):
            if not obstacle[i, r]:
                s += values[i, r]
                cnt += 1
        out[d, 10] = s / cnt if cnt else 0.0
        if n > 1:
            out[d, 11] = (si - i) / (n - 1) / n_x
            out[d, 12] = (sj - j) / (n - 1) / n_y
        else:
            out[d, 11] = <double>i / n_x
            out[d, 12] = <double>j / n_y
    return out_arr


def joint_exhaustive(const double[:, :] q, const long[:, :] dest):
    cdef Py_ssize_t n = q.shape[0]
    cdef Py_ssize_t d, e, pos
    cdef bint found = False, ok
    cdef double total, best_val = 0.0
    combo_arr = np.zeros(n, dtype=np.int64)
    best_arr = np.full(n, -1, dtype=np.int64)
    cdef long[:] combo = combo_arr
    cdef long[:] best = best_arr

    for d in range(n):
        combo[d] = -1
    # odometer over feasible actions; the last drone is the fastest digit,
    # which enumerates tuples in lexicographic order
    pos = 0
    while pos >= 0:
        combo[pos] += 1
        while combo[pos] < 5 and dest[pos, combo[pos]] < 0:
            combo[pos] += 1
        if combo[pos] >= 5:
            combo[pos] = -1
            pos -= 1
            continue
        ok = True
        for e in range(pos):
            if dest[e, combo[e]] == dest[pos, combo[pos]]:
                ok = False
                break
        if not ok:
            continue
        if pos < n - 1:
            pos += 1
            continue
        total = 0.0
        for d in range(n):
            total += q[d, combo[d]]
        if not found or total > best_val:
            found = True
            best_val = total
            for d in range(n):
                best[d] = combo[d]
    if not found:
        return best_arr, float("-inf"), False
    return best_arr, best_val, True
