# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_kernels_py``; see that module for the contract.

Scalar loops over the same recursions; tie-breaking in ``heuristic_path``
matches the pure version exactly so both backends return identical paths.
"""

from libc.math cimport pow

import numpy as np


def schedule_cost(slots, no_show, apow):
    cdef long[::1] s = np.ascontiguousarray(slots, dtype=np.int64)
    cdef double[::1] ns = np.ascontiguousarray(no_show, dtype=np.float64)
    cdef double[::1] ap = np.ascontiguousarray(apow, dtype=np.float64)
    cdef Py_ssize_t k_periods = s.shape[0]
    cdef double[::1] dist = np.zeros(k_periods + 1)
    cdef double total = 1.0 - ap[0]
    cdef double miss, acc
    cdef Py_ssize_t k, l
    dist[0] = 1.0
    for k in range(1, k_periods + 1):
        miss = ns[s[k - 1]]
        for l in range(k, 0, -1):
            dist[l] = miss * dist[l - 1]
        dist[0] = 1.0 - miss
        acc = 0.0
        for l in range(k + 1):
            acc += dist[l] * ap[l]
        total += 1.0 - acc
    return total


def heuristic_path(no_show, slot_duals, alpha):
    cdef double[::1] ns = np.ascontiguousarray(no_show, dtype=np.float64)
    cdef double[:, ::1] duals = np.ascontiguousarray(slot_duals, dtype=np.float64)
    cdef double a = alpha
    cdef Py_ssize_t k_periods = duals.shape[0]
    cdef Py_ssize_t n_nodes = duals.shape[1]
    cdef double[::1] prev_cost = np.empty(max(n_nodes, 1))
    cdef double[::1] prev_delta = np.empty(max(n_nodes, 1))
    cdef double[::1] new_cost = np.empty(n_nodes)
    cdef double[::1] new_delta = np.empty(n_nodes)
    cdef long[:, ::1] parent = np.zeros((k_periods, n_nodes), dtype=np.int64)
    cdef Py_ssize_t n_prev = 1
    cdef Py_ssize_t k, t, j, best, end
    cdef double miss, cd, cc, best_cost, best_delta
    prev_cost[0] = 1.0 - a
    prev_delta[0] = 1.0
    for k in range(k_periods):
        for t in range(n_nodes):
            miss = ns[t]
            best = 0
            best_cost = 0.0
            best_delta = 0.0
            for j in range(n_prev):
                cd = 1.0 + miss * prev_delta[j]
                cc = prev_cost[j] + (1.0 - pow(a, cd)) + duals[k, t]
                if j == 0 or cc < best_cost or (cc == best_cost and cd < best_delta):
                    best = j
                    best_cost = cc
                    best_delta = cd
            new_cost[t] = best_cost
            new_delta[t] = best_delta
            parent[k, t] = best
        prev_cost[:n_nodes] = new_cost
        prev_delta[:n_nodes] = new_delta
        n_prev = n_nodes
    end = 0
    for t in range(1, n_nodes):
        if prev_cost[t] < prev_cost[end] or (
            prev_cost[t] == prev_cost[end] and prev_delta[t] < prev_delta[end]
        ):
            end = t
    slots = np.empty(k_periods, dtype=np.int64)
    cdef long[::1] sv = slots
    cdef Py_ssize_t node = end
    for k in range(k_periods - 1, -1, -1):
        sv[k] = node
        node = parent[k, node]
    return float(prev_cost[end]), slots


def simulate_schedule(uniforms, show_prob, apow):
    cdef double[:, ::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef double[::1] ps = np.ascontiguousarray(show_prob, dtype=np.float64)
    cdef double[::1] ap = np.ascontiguousarray(apow, dtype=np.float64)
    cdef Py_ssize_t trials = u.shape[0]
    cdef Py_ssize_t k_periods = u.shape[1]
    out = np.empty(trials)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, k
    cdef long interval
    cdef double acc, base
    base = 1.0 - ap[0]
    for i in range(trials):
        interval = 0
        acc = base
        for k in range(k_periods):
            if u[i, k] < ps[k]:
                interval = 0
            else:
                interval += 1
            acc += 1.0 - ap[interval]
        ov[i] = acc
    return out
