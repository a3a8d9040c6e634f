"""Bounded-budget local refinement of a point inside a box.

Projected limited-memory quasi-Newton descent: inverse-Hessian pairs
(memory 5), backtracking Armijo line search (c = 1e-4, step halving),
and projection of every iterate onto the box.  The evaluation budget
counts function and gradient calls separately, one each; the total
never exceeds ``budget + 1`` (the extra call is the initial value
needed for the report).  A budget of zero returns the start point.

Descent is strictly monotone: a trial point is accepted only if it does
not increase the objective, so ``final y <= f(x0)`` always holds.  NaN
trial values count as rejected steps; after 30 halvings the search
stops.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .expr import as_objective

__all__ = ["LocalOptReport", "local_opt"]

ARMIJO_C = 1e-4
MEMORY = 5
MAX_HALVINGS = 30
GRAD_TOL = 1e-8
IMPROVE_TOL = 1e-12
CURVATURE_EPS = 1e-10


@dataclass
class LocalOptReport:
    x: np.ndarray
    y: float
    evaluations: int
    converged: bool


def _lbfgs_direction(memory, g):
    """Two-loop recursion over stored (s, y) pairs."""
    if not memory:
        return -g
    q = g.copy()
    alphas = []
    for s, yk, rho in reversed(memory):
        a = rho * float(np.dot(s, q))
        q -= a * yk
        alphas.append(a)
    s, yk, _ = memory[-1]
    gamma = float(np.dot(s, yk)) / float(np.dot(yk, yk))
    q *= gamma
    for (s, yk, rho), a in zip(memory, reversed(alphas)):
        b = rho * float(np.dot(yk, q))
        q += (a - b) * s
    return -q


def local_opt(f, x0, box, budget):
    """Refine ``x0`` within ``box`` using at most ``budget`` evaluations.

    ``f`` may be an expression or a compiled objective (whose counters
    then absorb the evaluations).
    """
    obj = as_objective(f)
    budget = int(budget)
    if budget < 0:
        raise ValueError("budget must be >= 0")
    x = np.asarray(x0, dtype=float).copy()
    if not box.encloses(x):
        raise ValueError("start point lies outside the box")

    start = obj.total_evaluations
    limit = budget + 1

    def used():
        return obj.total_evaluations - start

    y = obj.value(x)
    converged = False
    if budget == 0 or not np.isfinite(y):
        return LocalOptReport(x, y, used(), False)

    g = obj.gradient(x)
    if not np.all(np.isfinite(g)):
        return LocalOptReport(x, y, used(), False)

    memory = deque(maxlen=MEMORY)
    while True:
        pg = x - box.clip(x - g)
        if float(np.max(np.abs(pg))) < GRAD_TOL:
            converged = True
            break

        d = _lbfgs_direction(memory, g)
        if float(np.dot(d, g)) >= 0.0:
            d = -g

        alpha = 1.0
        accepted = False
        out_of_budget = False
        for _ in range(MAX_HALVINGS):
            if used() >= limit:
                out_of_budget = True
                break
            x_new = box.clip(x + alpha * d)
            y_new = obj.value(x_new)
            slope = float(np.dot(g, x_new - x))
            # require non-ascent even when projection spoils the slope
            if y_new == y_new and y_new <= y + ARMIJO_C * min(slope, 0.0):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break

        improvement = y - y_new
        if improvement < IMPROVE_TOL * (1.0 + abs(y)):
            x, y = x_new, y_new
            converged = True
            break
        if used() >= limit:
            x, y = x_new, y_new
            break
        g_new = obj.gradient(x_new)
        if not np.all(np.isfinite(g_new)):
            x, y = x_new, y_new
            break
        s = x_new - x
        yk = g_new - g
        sy = float(np.dot(s, yk))
        if sy > CURVATURE_EPS * float(np.linalg.norm(s)) * float(np.linalg.norm(yk)):
            memory.append((s, yk, 1.0 / sy))
        x, y, g = x_new, y_new, g_new

    return LocalOptReport(x, y, used(), converged)
