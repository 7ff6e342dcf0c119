"""Minimum-cost bipartite assignment (Kuhn-Munkres with row potentials)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# infeasible entry; any real cost sum over <= n pairs stays far below it
GATED = 1e6


@dataclass
class Assignment:
    matches: list = field(default_factory=list)
    unmatched_rows: list = field(default_factory=list)
    unmatched_cols: list = field(default_factory=list)

    def total(self, cost) -> float:
        cost = np.asarray(cost, dtype=float)
        return float(sum(cost[r, c] for r, c in sorted(self.matches)))


def _solve_square(cost: np.ndarray) -> np.ndarray:
    # Shortest augmenting path with dual potentials, O(n^3).
    # Returns col_of_row. Index 0 is a virtual column used as the path root.
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of_col = np.zeros(n + 1, dtype=int)  # 0 = free, otherwise row + 1
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            free = ~used
            free[0] = False
            cur = np.full(n + 1, np.inf)
            cur[1:] = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))  # first minimum: lowest column wins ties
            delta = masked[j1]
            u[row_of_col[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        while True:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        col_of_row[row_of_col[j] - 1] = j - 1
    return col_of_row


def hungarian(cost) -> Assignment:
    """Minimum-total-cost assignment for a (possibly rectangular) cost matrix.

    The matrix is padded to square with ``GATED``. Pairs landing on padding or
    on a gated entry are reported as unmatched.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return Assignment([], list(range(n_rows)), list(range(n_cols)))
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite; encode infeasible pairs with GATED")
    n = max(n_rows, n_cols)
    square = np.full((n, n), GATED)
    square[:n_rows, :n_cols] = np.minimum(cost, GATED)
    col_of_row = _solve_square(square)

    matches = []
    for r in range(n_rows):
        c = int(col_of_row[r])
        if c < n_cols and cost[r, c] < GATED:
            matches.append((r, c))
    matched_r = {r for r, _ in matches}
    matched_c = {c for _, c in matches}
    return Assignment(
        matches,
        [r for r in range(n_rows) if r not in matched_r],
        [c for c in range(n_cols) if c not in matched_c],
    )


def max_weight_matching(weight) -> Assignment:
    """Maximum-total-weight matching; pairs with weight <= 0 are never reported.

    Unlike ``hungarian`` on gated costs this does not favour cardinality: a
    single heavy pair beats two light ones.
    """
    weight = np.asarray(weight, dtype=float)
    n_rows, n_cols = weight.shape
    if n_rows == 0 or n_cols == 0:
        return Assignment([], list(range(n_rows)), list(range(n_cols)))
    n = max(n_rows, n_cols)
    square = np.zeros((n, n))
    square[:n_rows, :n_cols] = -np.maximum(weight, 0.0)
    col_of_row = _solve_square(square)
    matches = [(r, int(col_of_row[r])) for r in range(n_rows)
               if col_of_row[r] < n_cols and weight[r, col_of_row[r]] > 0]
    matched_r = {r for r, _ in matches}
    matched_c = {c for _, c in matches}
    return Assignment(
        matches,
        [r for r in range(n_rows) if r not in matched_r],
        [c for c in range(n_cols) if c not in matched_c],
    )


def brute_force_min_cost(cost) -> float:
    """Exhaustive minimum over injections of the shorter side (small matrices only)."""
    cost = np.asarray(cost, dtype=float)
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return 0.0
    if max(n_rows, n_cols) > 9:
        raise ValueError("brute force limited to 9x9")
    best = np.inf
    if n_rows <= n_cols:
        for cols in itertools.permutations(range(n_cols), n_rows):
            s = sum(cost[r, c] for r, c in enumerate(cols))
            best = min(best, s)
    else:
        for rows in itertools.permutations(range(n_rows), n_cols):
            s = sum(cost[r, c] for r, c in sorted(zip(rows, range(n_cols))))
            best = min(best, s)
    return float(best)
