"""Countable ordered product domains and the difference/divergence operators.

Every coordinate of the product domain is one of three kinds:

* ``FiniteCyclic(k)`` -- k positions 0..k-1; stepping past either end wraps.
* ``HalfInfiniteMin`` -- positions 0,1,2,...; decrementing 0 gives the
  sentinel ``STAR``, and incrementing ``STAR`` gives 0 again.
* ``BiInfinite`` -- all integers.

A domain where only a maximum exists is normalised to ``HalfInfiniteMin`` by
reversing the order at construction (positions count downward from the max),
so no max-only kind is ever stored.

Points are stored as position indices, never raw values; any order-preserving
re-encoding of the underlying values therefore cannot change an operator
output.  Functions are extended by the convention h(x) = 0 whenever any
coordinate of x is ``STAR``.
"""

from dataclasses import dataclass

import numpy as np


class _Star:
    """Sentinel for the below-minimum state of a HalfInfiniteMin coordinate."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "STAR"


STAR = _Star()


@dataclass(frozen=True)
class FiniteCyclic:
    size: int

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(
                "FiniteCyclic needs more than one element, got size=%d" % self.size
            )


@dataclass(frozen=True)
class HalfInfiniteMin:
    pass


@dataclass(frozen=True)
class BiInfinite:
    pass


def half_infinite_max():
    """Domain with only a maximum, normalised by order reversal.

    Positions count downward from the maximum, so the result is an ordinary
    ``HalfInfiniteMin``; the reversal is a relabeling concern of ingestion,
    not of the operator algebra.
    """
    return HalfInfiniteMin()


class ProductDomain:
    """Product of per-coordinate domains with increment/decrement operators."""

    def __init__(self, coords):
        coords = tuple(coords)
        if len(coords) < 1:
            raise ValueError("product domain needs at least one coordinate")
        for c in coords:
            if not isinstance(c, (FiniteCyclic, HalfInfiniteMin, BiInfinite)):
                raise TypeError("unknown coordinate domain %r" % (c,))
        self.coords = coords
        self.d = len(coords)

    def __repr__(self):
        return "ProductDomain(%s)" % (list(self.coords),)

    def __eq__(self, other):
        return isinstance(other, ProductDomain) and self.coords == other.coords

    def is_valid(self, x):
        """True when x is a valid (non-extended) point of the domain."""
        if len(x) != self.d:
            return False
        for pos, c in zip(x, self.coords):
            if pos is STAR:
                return False
            if not isinstance(pos, (int, np.integer)):
                return False
            if isinstance(c, FiniteCyclic) and not (0 <= pos < c.size):
                return False
            if isinstance(c, HalfInfiniteMin) and pos < 0:
                return False
        return True

    def _check_axis(self, axis):
        if not 0 <= axis < self.d:
            raise IndexError("axis %d out of range for d=%d" % (axis, self.d))

    def succ(self, x, axis):
        """x^{axis+}: increment one coordinate.  Never produces STAR."""
        self._check_axis(axis)
        x = tuple(x)
        pos, c = x[axis], self.coords[axis]
        if pos is STAR:
            new = 0
        elif isinstance(c, FiniteCyclic):
            new = (pos + 1) % c.size
        else:
            new = pos + 1
        return x[:axis] + (new,) + x[axis + 1:]

    def pred(self, x, axis):
        """x^{axis-}: decrement one coordinate; may introduce STAR."""
        self._check_axis(axis)
        x = tuple(x)
        pos, c = x[axis], self.coords[axis]
        if isinstance(c, FiniteCyclic):
            new = (pos - 1) % c.size
        elif isinstance(c, HalfInfiniteMin):
            new = STAR if pos == 0 else pos - 1
        else:
            new = pos - 1
        return x[:axis] + (new,) + x[axis + 1:]

    # Vectorised views used by the loss implementations: datasets are (n, d)
    # integer position arrays, and star-ness is carried as a boolean mask.

    def succ_positions(self, X, axis):
        """Column `axis` of X incremented, with cyclic wrap where needed."""
        col = X[:, axis] + 1
        c = self.coords[axis]
        if isinstance(c, FiniteCyclic):
            col = col % c.size
        return col

    def pred_positions(self, X, axis):
        """Column `axis` decremented; second return is the STAR mask."""
        col = X[:, axis] - 1
        c = self.coords[axis]
        if isinstance(c, FiniteCyclic):
            return col % c.size, np.zeros(len(X), dtype=bool)
        if isinstance(c, HalfInfiniteMin):
            return col, X[:, axis] == 0
        return col, np.zeros(len(X), dtype=bool)

    def validate_positions(self, X):
        """Raise if any row of the (n, d) position array is invalid."""
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError("expected (n, %d) position array, got %r" % (self.d, X.shape))
        if not np.issubdtype(X.dtype, np.integer):
            raise ValueError("positions must be integers")
        for j, c in enumerate(self.coords):
            if isinstance(c, FiniteCyclic):
                if X[:, j].min(initial=0) < 0 or X[:, j].max(initial=0) >= c.size:
                    raise ValueError("column %d outside FiniteCyclic(%d)" % (j, c.size))
            elif isinstance(c, HalfInfiniteMin):
                if len(X) and X[:, j].min() < 0:
                    raise ValueError("column %d has negative positions" % j)
        return X


def is_extended(x):
    """True when any coordinate of x is the STAR sentinel."""
    return any(pos is STAR for pos in x)


def eval_extended(h, x):
    """Evaluate h with the h(STAR-point) = 0 convention."""
    if is_extended(x):
        return 0.0
    return h(x)


def forward_difference(domain, h, x):
    """Vector of h(x^{i+}) - h(x) over axes i."""
    hx = eval_extended(h, x)
    return np.array(
        [eval_extended(h, domain.succ(x, i)) - hx for i in range(domain.d)]
    )


def backward_difference(domain, h, x):
    """Vector of h(x) - h(x^{i-}) over axes i, with h(STAR) = 0."""
    hx = eval_extended(h, x)
    return np.array(
        [hx - eval_extended(h, domain.pred(x, i)) for i in range(domain.d)]
    )


def forward_divergence(domain, h_vec, x):
    """Sum over axes of h_i(x^{i+}) - h_i(x) for a vector field h."""
    total = 0.0
    for i in range(domain.d):
        up = domain.succ(x, i)
        hi_up = 0.0 if is_extended(up) else h_vec(up)[i]
        hi_x = 0.0 if is_extended(x) else h_vec(x)[i]
        total += hi_up - hi_x
    return total


def binary_grid_domain(d):
    """{0,1}^d as FiniteCyclic(2) coordinates (spin lattices)."""
    return ProductDomain([FiniteCyclic(2)] * d)


def count_domain(d):
    """Nonnegative-integer counts in d coordinates."""
    return ProductDomain([HalfInfiniteMin()] * d)
