"""Interval arithmetic over expression trees, and axis-aligned box geometry.

``eval_interval`` is the natural interval extension: the expression is
evaluated with interval operands, so the result encloses every point
value over the box (sound, not necessarily tight).  Enclosures are
computed with ordinary double arithmetic; callers should allow an
outward slack of ``1e-12 * (1 + |bound|)`` when asserting exactness.

An operation whose real image is empty (e.g. log over a non-positive
box) poisons the result: the whole line ``[-inf, +inf]`` flagged as
invalid.  NaN is never stored in an interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import DimensionMismatch, _postorder

__all__ = [
    "Interval",
    "BoxDomain",
    "eval_interval",
    "lower_bound",
    "log_volume",
    "partition",
    "LOWER_BOUND_CLAMP",
]

_INF = math.inf
_TWO_PI = 2.0 * math.pi
LOWER_BOUND_CLAMP = 1e12
_WIDTH_FLOOR = 1e-300


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; endpoints may be infinite."""

    lo: float
    hi: float
    poison: bool = False

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if self.poison or math.isnan(lo) or math.isnan(hi):
            object.__setattr__(self, "lo", -_INF)
            object.__setattr__(self, "hi", _INF)
            object.__setattr__(self, "poison", True)
            return
        if lo > hi:
            raise ValueError(f"interval bounds out of order: [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @staticmethod
    def poisoned():
        return Interval(-_INF, _INF, poison=True)

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, value):
        return self.lo <= value <= self.hi

    def __repr__(self):
        if self.poison:
            return "Interval(poisoned)"
        return f"Interval({self.lo}, {self.hi})"


_POISON = Interval.poisoned()


def _mk(lo, hi):
    if math.isnan(lo) or math.isnan(hi):
        return _POISON
    if lo > hi:
        lo, hi = hi, lo
    return Interval(lo, hi)


def _iadd(a, b):
    return _mk(a.lo + b.lo, a.hi + b.hi)


def _isub(a, b):
    return _mk(a.lo - b.hi, a.hi - b.lo)


def _ineg(a):
    return Interval(-a.hi, -a.lo)


def _prod(p, q):
    # 0 * inf is 0 under the interval convention
    if p == 0.0 or q == 0.0:
        return 0.0
    return p * q


def _imul(a, b):
    c = (_prod(a.lo, b.lo), _prod(a.lo, b.hi),
         _prod(a.hi, b.lo), _prod(a.hi, b.hi))
    return _mk(min(c), max(c))


def _idiv(a, b):
    if b.lo <= 0.0 <= b.hi:
        # divisor spans zero: unbounded, but not invalid
        return Interval(-_INF, _INF)
    inv = _mk(1.0 / b.hi, 1.0 / b.lo)
    return _imul(a, inv)


def _safe_pow(v, k):
    try:
        return v ** k
    except OverflowError:
        return -_INF if (v < 0.0 and k % 2) else _INF


def _ipow(a, k):
    if k == 0:
        return Interval(1.0, 1.0)
    if k < 0:
        return _idiv(Interval(1.0, 1.0), _ipow(a, -k))
    plo, phi = _safe_pow(a.lo, k), _safe_pow(a.hi, k)
    if k % 2 == 1:
        return _mk(plo, phi)
    if a.lo >= 0.0:
        return _mk(plo, phi)
    if a.hi <= 0.0:
        return _mk(phi, plo)
    return _mk(0.0, max(plo, phi))


def _crit_inside(lo, hi, c):
    """Does some c + 2*pi*k (k integer) fall inside [lo, hi]?

    Widened by a few ulps so near-misses err toward the loose (sound)
    side.
    """
    k = math.floor((lo - c) / _TWO_PI)
    for kk in (k, k + 1, k + 2):
        t = c + _TWO_PI * kk
        tol = 4e-16 * (1.0 + abs(t))
        if lo - tol <= t <= hi + tol:
            return True
    return False


def _isin(a):
    if a.hi - a.lo >= _TWO_PI:
        return Interval(-1.0, 1.0)
    if not (math.isfinite(a.lo) and math.isfinite(a.hi)):
        # degenerate infinite endpoint: no real argument value exists
        return _POISON
    slo, shi = math.sin(a.lo), math.sin(a.hi)
    lo, hi = min(slo, shi), max(slo, shi)
    if _crit_inside(a.lo, a.hi, 0.5 * math.pi):
        hi = 1.0
    if _crit_inside(a.lo, a.hi, -0.5 * math.pi):
        lo = -1.0
    return Interval(lo, hi)


def _icos(a):
    if a.hi - a.lo >= _TWO_PI:
        return Interval(-1.0, 1.0)
    if not (math.isfinite(a.lo) and math.isfinite(a.hi)):
        return _POISON
    clo, chi = math.cos(a.lo), math.cos(a.hi)
    lo, hi = min(clo, chi), max(clo, chi)
    if _crit_inside(a.lo, a.hi, 0.0):
        hi = 1.0
    if _crit_inside(a.lo, a.hi, math.pi):
        lo = -1.0
    return Interval(lo, hi)


def _safe_exp(v):
    try:
        return math.exp(v)
    except OverflowError:
        return _INF


def _iexp(a):
    return Interval(_safe_exp(a.lo), _safe_exp(a.hi))


def _ilog(a):
    if a.hi <= 0.0:
        return _POISON
    hi = math.log(a.hi)
    if a.lo <= 0.0:
        return Interval(-_INF, hi)
    return Interval(math.log(a.lo), hi)


def _isqrt(a):
    if a.hi < 0.0:
        return _POISON
    hi = math.sqrt(a.hi)
    if a.lo < 0.0:
        return Interval(0.0, hi)
    return Interval(math.sqrt(a.lo), hi)


def _iabs(a):
    if a.lo >= 0.0:
        return a
    if a.hi <= 0.0:
        return Interval(-a.hi, -a.lo)
    return Interval(0.0, max(-a.lo, a.hi))


def _imax(a, b):
    return Interval(max(a.lo, b.lo), max(a.hi, b.hi))


def _imin(a, b):
    return Interval(min(a.lo, b.lo), min(a.hi, b.hi))


def _istep(a):
    if a.hi < 0.0:
        return Interval(0.0, 0.0)
    if a.lo >= 0.0:
        return Interval(1.0, 1.0)
    return Interval(0.0, 1.0)


# ---------------------------------------------------------------------------
# boxes

class BoxDomain:
    """Axis-aligned box: one finite interval per dimension.

    Boxes produced by :func:`partition` carry per-dimension upper-face
    closure flags implementing the half-open membership convention: a
    split face belongs to the piece on its upper side, while faces that
    coincide with the parent's boundary stay closed.  This makes point
    membership across the pieces a partition function.
    """

    __slots__ = ("lows", "highs", "closed_hi")

    def __init__(self, lows, highs, closed_hi=None):
        lows = np.asarray(lows, dtype=float)
        highs = np.asarray(highs, dtype=float)
        if lows.ndim != 1 or lows.shape != highs.shape or lows.size < 1:
            raise ValueError("bounds must be equal-length 1-d sequences")
        if not (np.all(np.isfinite(lows)) and np.all(np.isfinite(highs))):
            raise ValueError("box bounds must be finite")
        if np.any(lows > highs):
            raise ValueError("box has lo > hi in some dimension")
        if closed_hi is None:
            closed_hi = np.ones(lows.size, dtype=bool)
        else:
            closed_hi = np.asarray(closed_hi, dtype=bool).copy()
        lows = lows.copy()
        highs = highs.copy()
        for arr in (lows, highs, closed_hi):
            arr.setflags(write=False)
        self.lows = lows
        self.highs = highs
        self.closed_hi = closed_hi

    @classmethod
    def cube(cls, lo, hi, dims):
        return cls(np.full(dims, float(lo)), np.full(dims, float(hi)))

    @classmethod
    def from_intervals(cls, pairs):
        pairs = [(iv.lo, iv.hi) if isinstance(iv, Interval) else tuple(iv)
                 for iv in pairs]
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    @property
    def dims(self):
        return self.lows.size

    @property
    def widths(self):
        return self.highs - self.lows

    @property
    def midpoint(self):
        return 0.5 * (self.lows + self.highs)

    @property
    def intervals(self):
        return tuple(Interval(lo, hi) for lo, hi in zip(self.lows, self.highs))

    def interval(self, d):
        return Interval(self.lows[d], self.highs[d])

    def contains(self, x):
        """Membership under the half-open convention (see class docstring)."""
        x = np.asarray(x, dtype=float)
        if x.shape != self.lows.shape:
            return False
        above = x >= self.lows
        below = (x < self.highs) | (self.closed_hi & (x == self.highs))
        return bool(np.all(above) and np.all(below))

    def encloses(self, x):
        """Closed membership, ignoring face-closure flags."""
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lows) and np.all(x <= self.highs))

    def clip(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lows, self.highs)

    def sample(self, rng):
        return rng.uniform(self.lows, self.highs)

    def split(self, d):
        """Bisect dimension ``d`` at its midpoint; the lower piece gets an
        open upper face at ``d``."""
        mid = 0.5 * (self.lows[d] + self.highs[d])
        left_hi = self.highs.copy()
        left_hi[d] = mid
        left_closed = self.closed_hi.copy()
        left_closed[d] = False
        right_lo = self.lows.copy()
        right_lo[d] = mid
        return (BoxDomain(self.lows, left_hi, left_closed),
                BoxDomain(right_lo, self.highs, self.closed_hi))

    def widest_dim(self):
        return int(np.argmax(self.widths))

    def recenter(self, center):
        """Box with the same side lengths centered at ``center``."""
        half = 0.5 * self.widths
        c = np.asarray(center, dtype=float)
        return BoxDomain(c - half, c + half)

    def intersect(self, other):
        lows = np.maximum(self.lows, other.lows)
        highs = np.minimum(self.highs, other.highs)
        if np.any(lows > highs):
            raise ValueError("boxes do not intersect")
        return BoxDomain(lows, highs)

    def __eq__(self, other):
        return (isinstance(other, BoxDomain)
                and np.array_equal(self.lows, other.lows)
                and np.array_equal(self.highs, other.highs))

    def __hash__(self):
        return hash((self.lows.tobytes(), self.highs.tobytes()))

    def __repr__(self):
        pairs = ", ".join(f"[{lo}, {hi}]"
                          for lo, hi in zip(self.lows, self.highs))
        return f"BoxDomain({pairs})"


def log_volume(box):
    """Sum of log side lengths; degenerate widths are floored at 1e-300
    so the result stays finite."""
    return float(np.sum(np.log(np.maximum(box.widths, _WIDTH_FLOOR))))


def partition(box, k, rng=None):
    """Split ``box`` into ``k`` interior-disjoint boxes covering it.

    Recursive bisection: repeatedly split the largest-volume piece at
    the midpoint of its widest dimension.  Deterministic; the ``rng``
    argument is accepted for interface symmetry and unused.
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    pieces = [box]
    vols = [log_volume(box)]
    while len(pieces) < k:
        i = int(np.argmax(vols))
        left, right = pieces[i].split(pieces[i].widest_dim())
        pieces[i:i + 1] = [left, right]
        vols[i:i + 1] = [log_volume(left), log_volume(right)]
    return pieces


# ---------------------------------------------------------------------------
# expression enclosure

def eval_interval(f, box):
    """Sound enclosure of ``f`` over ``box`` by natural interval extension."""
    if f.dims != box.dims:
        raise DimensionMismatch(
            f"expression over {f.dims} dimension(s), box has {box.dims}")
    vals = {}
    for node in _postorder(f):
        k = node.kind
        if k == "const":
            v = _mk(node.payload, node.payload)
        elif k == "var":
            v = Interval(box.lows[node.payload], box.highs[node.payload])
        else:
            a = vals[id(node.args[0])]
            b = vals[id(node.args[1])] if len(node.args) > 1 else None
            if a.poison or (b is not None and b.poison):
                v = _POISON
            elif k == "add":
                v = _iadd(a, b)
            elif k == "sub":
                v = _isub(a, b)
            elif k == "mul":
                v = _imul(a, b)
            elif k == "div":
                v = _idiv(a, b)
            elif k == "neg":
                v = _ineg(a)
            elif k == "pow":
                v = _ipow(a, node.payload)
            elif k == "sin":
                v = _isin(a)
            elif k == "cos":
                v = _icos(a)
            elif k == "exp":
                v = _iexp(a)
            elif k == "log":
                v = _ilog(a)
            elif k == "sqrt":
                v = _isqrt(a)
            elif k == "abs":
                v = _iabs(a)
            elif k == "max":
                v = _imax(a, b)
            elif k == "min":
                v = _imin(a, b)
            elif k == "step":
                v = _istep(a)
            else:
                raise ValueError(f"unknown node kind {k!r}")
        vals[id(node)] = v
    return vals[id(f)]


def lower_bound(f, box):
    """Finite lower bound of ``f`` over ``box``: the interval extension's
    low endpoint clamped into [-1e12, 1e12]."""
    lo = eval_interval(f, box).lo
    return float(min(max(lo, -LOWER_BOUND_CLAMP), LOWER_BOUND_CLAMP))
