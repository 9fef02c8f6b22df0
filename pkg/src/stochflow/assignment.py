"""Exact minimum-cost bipartite assignment (Jonker-Volgenant, O(n^3)).

Shortest-augmenting-path formulation with dual potentials. Ties in the
column selection are broken toward the lowest column index (np.argmin),
which makes the solver deterministic on degenerate inputs.
"""

from __future__ import annotations

import numpy as np


def min_cost_assignment(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve the square assignment problem.

    Returns (col_of_row, total_cost) where col_of_row[i] is the column
    assigned to row i, minimizing sum cost[i, col_of_row[i]].
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    n = cost.shape[0]

    # 1-indexed duals and matching; index 0 is the virtual start column.
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_at = np.zeros(n + 1, dtype=np.int64)   # row matched to each column
    way = np.zeros(n + 1, dtype=np.int64)

    for i in range(1, n + 1):
        row_at[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_at[j0]
            cur = cost[i0 - 1, :] - u[i0] - v[1:]
            free = ~used[1:]
            improved = free & (cur < minv[1:])
            minv[1:][improved] = cur[improved]
            way[1:][improved] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[row_at[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if row_at[j0] == 0:
                break
        while j0 != 0:
            j_prev = way[j0]
            row_at[j0] = row_at[j_prev]
            j0 = j_prev

    col_of_row = np.zeros(n, dtype=np.int64)
    for j in range(1, n + 1):
        if row_at[j] > 0:
            col_of_row[row_at[j] - 1] = j - 1
    total = float(cost[np.arange(n), col_of_row].sum())
    return col_of_row, total
