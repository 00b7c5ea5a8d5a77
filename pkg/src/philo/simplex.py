"""Dense-tableau primal simplex with Bland's rule.

Solves ``max c @ x  s.t.  A @ x <= b, x >= 0`` for ``b >= 0``, so the slack
basis is a feasible start and no phase one is needed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import IterLimit, PhiloError

MAX_PIVOTS = 10 ** 6


class Unbounded(PhiloError):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    dual: np.ndarray
    basis: np.ndarray
    pivots: int
    gap: float
    max_reduced_cost: float


def _refactor(A_full, b, c_full, basis):
    B = A_full[:, basis]
    body = np.linalg.solve(B, np.column_stack([A_full, b]))
    y = np.linalg.solve(B.T, c_full[basis])
    obj_row = np.empty(A_full.shape[1] + 1)
    obj_row[:-1] = y @ A_full - c_full
    obj_row[-1] = y @ b
    return np.vstack([body, obj_row])


def simplex_max(c, A, b, tol: float = 1e-9, max_pivots: int = MAX_PIVOTS,
                refactor_every: int = 200) -> SimplexResult:
    """Maximize ``c @ x`` over ``{x >= 0 : A @ x <= b}`` with ``b >= 0``.

    Entering column is the lowest-index one with a negative reduced cost and
    the leaving row breaks ratio ties by lowest basic index, which rules out
    cycling. The tableau is rebuilt from the original data every
    ``refactor_every`` pivots and once more at the end, and the reported
    solution, duals and gap come from that final factorisation.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    r, n = A.shape
    if np.any(b < -tol):
        raise ValueError("simplex_max needs b >= 0")
    b = np.maximum(b, 0.0)
    A_full = np.hstack([A, np.eye(r)])
    c_full = np.concatenate([c, np.zeros(r)])
    basis = np.arange(n, n + r)

    tab = np.zeros((r + 1, n + r + 1))
    tab[:r, :n + r] = A_full
    tab[:r, -1] = b
    tab[r, :n] = -c

    pivots = 0
    since_refactor = 0
    while True:
        red = tab[r, :-1]
        entering = np.flatnonzero(red < -tol)
        if entering.size == 0:
            if since_refactor:
                tab = _refactor(A_full, b, c_full, basis)
                since_refactor = 0
                if np.any(tab[r, :-1] < -tol):
                    continue
            break
        if pivots >= max_pivots:
            raise IterLimit(f"simplex exceeded {max_pivots} pivots")
        j = entering[0]
        col = tab[:r, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            raise Unbounded("LP is unbounded")
        rhs = np.maximum(tab[rows, -1], 0.0)
        ratios = rhs / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        leave = ties[np.argmin(basis[ties])]

        tab[leave] /= tab[leave, j]
        factor = tab[:, j].copy()
        factor[leave] = 0.0
        tab -= np.outer(factor, tab[leave])
        tab[:, j] = 0.0
        tab[leave, j] = 1.0
        basis[leave] = j
        pivots += 1
        since_refactor += 1
        if since_refactor >= refactor_every:
            tab = _refactor(A_full, b, c_full, basis)
            since_refactor = 0

    B = A_full[:, basis]
    x_full = np.zeros(n + r)
    x_full[basis] = np.linalg.solve(B, b)
    x_full[np.abs(x_full) < 1e-13] = 0.0
    x_full = np.maximum(x_full, 0.0)
    y = np.linalg.solve(B.T, c_full[basis])
    x = x_full[:n]
    primal = float(c @ x)
    dual_obj = float(b @ y)
    reduced = c_full - y @ A_full
    gap = abs(dual_obj - primal) / max(1.0, abs(primal))
    return SimplexResult(
        x=x,
        objective=primal,
        dual=y,
        basis=basis.copy(),
        pivots=pivots,
        gap=gap,
        max_reduced_cost=float(reduced.max()) if reduced.size else 0.0,
    )
