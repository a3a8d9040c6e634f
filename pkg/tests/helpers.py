"""Shared oracles and random generators for the test suite.

Everything here is deliberately independent of the library internals it
checks: membership counting, finite differences, and the reference
benchmark formulas are written directly against numpy.
"""

import numpy as np

from treebound import BoxDomain
from treebound import expr as ex

# operations used when drawing random expressions; kink ops are added
# only when requested so the smooth generator stays differentiable
_SMOOTH_OPS = ["add", "add", "sub", "mul", "mul", "div", "pow",
               "sin", "cos", "exp", "log", "sqrt", "neg"]
_KINK_OPS = ["abs", "max", "min"]


def random_expression(rng, dims, depth, kinks=False):
    """Random expression over x0..x{dims-1}, depth-bounded."""
    if depth <= 0 or rng.random() < 0.25:
        if rng.random() < 0.7:
            return ex.var(int(rng.integers(dims)))
        return ex.const(round(float(rng.uniform(-3.0, 3.0)), 3))
    ops = _SMOOTH_OPS + _KINK_OPS if kinks else _SMOOTH_OPS
    op = ops[int(rng.integers(len(ops)))]
    a = random_expression(rng, dims, depth - 1, kinks)
    if op == "pow":
        return ex.pow_int(a, int(rng.integers(2, 5)))
    if op in ("neg", "sin", "cos", "exp", "log", "sqrt", "abs"):
        build = {"neg": ex.neg, "sin": ex.sin, "cos": ex.cos, "exp": ex.exp,
                 "log": ex.log, "sqrt": ex.sqrt, "abs": ex.absolute}[op]
        return build(a)
    b = random_expression(rng, dims, depth - 1, kinks)
    build = {"add": ex.add, "sub": ex.sub, "mul": ex.mul, "div": ex.div,
             "max": ex.maximum, "min": ex.minimum}[op]
    return build(a, b)


def random_box(rng, dims, center_scale=4.0, max_half=2.0):
    center = rng.uniform(-center_scale, center_scale, size=dims)
    half = rng.uniform(0.05, max_half, size=dims)
    return BoxDomain(center - half, center + half)


def central_diff(f, x, d, h):
    xp = np.array(x, dtype=float)
    xm = np.array(x, dtype=float)
    xp[d] += h
    xm[d] -= h
    return (ex.evaluate(f, xp) - ex.evaluate(f, xm)) / (2.0 * h)


def second_central_diff(f, x, d, h):
    xp = np.array(x, dtype=float)
    xm = np.array(x, dtype=float)
    xp[d] += h
    xm[d] -= h
    return (ex.evaluate(f, xp) - 2.0 * ex.evaluate(f, x)
            + ex.evaluate(f, xm)) / (h * h)


def converged_second_diff(f, x, d, agree_tol=2.5e-5):
    """Second central difference with a self-certifying step size.

    Halves h until two successive stencils agree to ``agree_tol``
    (relative); returns None when the stencil never converges, i.e. the
    point cannot serve as a finite-difference oracle in doubles.
    """
    h = 1e-3 * (1.0 + abs(x[d]))
    prev = second_central_diff(f, x, d, h)
    for _ in range(7):
        h *= 0.5
        cur = second_central_diff(f, x, d, h)
        if not (np.isfinite(prev) and np.isfinite(cur)):
            return None
        if abs(cur - prev) <= agree_tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    return None


def within_enclosure(value, interval):
    """Is a (non-NaN) point value inside the enclosure, allowing the
    documented outward rounding slack of 1e-12 * (1 + |bound|)?"""
    lo, hi = interval.lo, interval.hi
    if np.isfinite(lo):
        lo_ok = value >= lo - 1e-12 * (1.0 + abs(lo))
    else:
        lo_ok = value >= lo
    if np.isfinite(hi):
        hi_ok = value <= hi + 1e-12 * (1.0 + abs(hi))
    else:
        hi_ok = value <= hi
    return bool(lo_ok and hi_ok)


def membership_counts(boxes, points):
    """How many of the boxes contain each point (half-open convention)."""
    points = np.asarray(points, dtype=float)
    counts = np.zeros(len(points), dtype=int)
    for box in boxes:
        above = np.all(points >= box.lows, axis=1)
        below = np.all((points < box.highs)
                       | (box.closed_hi & (points == box.highs)), axis=1)
        counts += (above & below).astype(int)
    return counts


# ---------------------------------------------------------------------------
# reference benchmark formulas (independent numpy implementations)

def ackley_reference(x):
    x = np.asarray(x, dtype=float)
    n = x.size
    return (-20.0 * np.exp(-0.2 * np.sqrt(np.sum(x * x) / n))
            - np.exp(np.sum(np.cos(2.0 * np.pi * x)) / n)
            + 20.0 + np.e)


def levy_reference(x):
    x = np.asarray(x, dtype=float)
    w = 1.0 + (x - 1.0) / 4.0
    head = np.sin(np.pi * w[0]) ** 2
    mid = np.sum((w[:-1] - 1.0) ** 2
                 * (1.0 + 10.0 * np.sin(np.pi * w[:-1] + 1.0) ** 2))
    tail = (w[-1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * w[-1]) ** 2)
    return head + mid + tail


def michalewicz_reference_grid(points_per_axis=2001):
    """Dense-grid minimum of the 2-d Michalewicz function (m = 10)."""
    axis = np.linspace(0.0, np.pi, points_per_axis)
    x0, x1 = np.meshgrid(axis, axis, indexing="ij")
    val = -(np.sin(x0) * np.sin(1.0 * x0 ** 2 / np.pi) ** 20
            + np.sin(x1) * np.sin(2.0 * x1 ** 2 / np.pi) ** 20)
    return float(val.min())
