"""Pure-Python/numpy implementations of the hot numeric kernels.

``apptsched._kernels`` is the compiled twin; ``_backend`` picks whichever is
importable.  The two implementations must keep identical signatures and
identical branching/tie-breaking semantics so results agree to float
round-off regardless of backend.

Conventions shared by all kernels:
  * slots are 0-based here (0..T-1 real, T fictitious); public APIs are
    1-based and convert at the boundary,
  * ``apow[l]`` holds alpha**(l+1) for l = 0..K, so the uncontrolled
    probability after an interval of l periods plus the post-appointment
    period is ``1 - apow[l]``.
"""

import numpy as np


def schedule_cost(slots, no_show, apow):
    """Expected aggregate uncontrolled probability of one patient schedule.

    Runs the time-since-last-visit recursion over the K periods and sums the
    per-period uncontrolled probabilities, including the period-0 term.
    """
    k_periods = slots.shape[0]
    dist = np.zeros(k_periods + 1)
    dist[0] = 1.0
    total = 1.0 - apow[0]
    for k in range(1, k_periods + 1):
        miss = no_show[slots[k - 1]]
        dist[1 : k + 1] = miss * dist[0:k]
        dist[0] = 1.0 - miss
        total += 1.0 - float(np.dot(dist[: k + 1], apow[: k + 1]))
    return total


def heuristic_path(no_show, slot_duals, alpha):
    """Cheapest schedule under the expected-interval approximation.

    Dynamic program over the layered period/slot network keeping a single
    (adjusted cost, expected interval) state per node; the per-period cost is
    ``1 - alpha**E[interval]`` plus the node's dual price.  Ties are broken
    by smaller expected interval, then smaller predecessor slot.

    Returns ``(cost, slots)`` where ``cost`` includes the period-0 term and
    all dual prices along the path, and ``slots`` is the 0-based slot choice
    per period.
    """
    k_periods, n_nodes = slot_duals.shape
    cost = np.empty(n_nodes)
    delta = np.empty(n_nodes)
    parent = np.zeros((k_periods, n_nodes), dtype=np.int64)
    # virtual source: guaranteed visit just before period 1
    prev_cost = np.array([1.0 - alpha])
    prev_delta = np.array([1.0])
    for k in range(k_periods):
        new_cost = np.empty(n_nodes)
        new_delta = np.empty(n_nodes)
        for t in range(n_nodes):
            miss = no_show[t]
            cand_delta = 1.0 + miss * prev_delta
            cand_cost = prev_cost + (1.0 - alpha**cand_delta) + slot_duals[k, t]
            best = 0
            for j in range(1, cand_cost.shape[0]):
                if cand_cost[j] < cand_cost[best] or (
                    cand_cost[j] == cand_cost[best] and cand_delta[j] < cand_delta[best]
                ):
                    best = j
            new_cost[t] = cand_cost[best]
            new_delta[t] = cand_delta[best]
            parent[k, t] = best
        prev_cost, prev_delta = new_cost, new_delta
        cost, delta = new_cost, new_delta
    end = 0
    for t in range(1, n_nodes):
        if cost[t] < cost[end] or (cost[t] == cost[end] and delta[t] < delta[end]):
            end = t
    slots = np.empty(k_periods, dtype=np.int64)
    node = end
    for k in range(k_periods - 1, -1, -1):
        slots[k] = node
        node = parent[k, node]
    return float(cost[end]), slots


def simulate_schedule(uniforms, show_prob, apow):
    """Per-trial realized aggregate uncontrolled probability.

    ``uniforms`` has shape (trials, K); a trial attends period k's
    appointment iff ``uniforms[i, k] < show_prob[k]``.
    """
    trials, k_periods = uniforms.shape
    interval = np.zeros(trials, dtype=np.int64)
    out = np.full(trials, 1.0 - apow[0])
    for k in range(k_periods):
        shows = uniforms[:, k] < show_prob[k]
        interval = np.where(shows, 0, interval + 1)
        out += 1.0 - apow[interval]
    return out
