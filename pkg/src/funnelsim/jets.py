"""Truncated Taylor (jet) arithmetic on time signals.

A jet bundles a signal value with its first k time derivatives, stored in
derivative normalization (coefficient j is the j-th derivative itself, not
the Taylor coefficient).  The gain recursion of the controller consumes one
derivative order per stage, so arithmetic between jets of unequal order
truncates to the smaller order instead of raising.
"""

import math

import numpy as np

__all__ = [
    "Jet",
    "jet_add",
    "jet_sub",
    "jet_mul",
    "jet_scale",
    "jet_reciprocal",
    "jet_sqnorm",
]

# binomial table covering every order the controller can request (r <= 4 plus slack)
_BINOM = [[math.comb(n, k) for k in range(n + 1)] for n in range(12)]


def _binom(n, k):
    if n < len(_BINOM):
        return _BINOM[n][k]
    return math.comb(n, k)


class Jet:
    """Vector signal value plus time derivatives.

    ``coeffs`` has shape ``(order + 1, dim)``; row j holds the j-th derivative.
    A 1-D input is interpreted as a scalar jet (dim 1).
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        arr = np.asarray(coeffs, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("jet coefficients must form a (order+1, dim) array")
        self.coeffs = arr

    @classmethod
    def constant(cls, value, order):
        """Jet of a signal that is constant in time: all derivatives zero."""
        val = np.atleast_1d(np.asarray(value, dtype=float))
        coeffs = np.zeros((order + 1, val.shape[0]))
        coeffs[0] = val
        return cls(coeffs)

    @property
    def order(self):
        return self.coeffs.shape[0] - 1

    @property
    def dim(self):
        return self.coeffs.shape[1]

    @property
    def value(self):
        """The order-0 coefficient, an array of shape (dim,)."""
        return self.coeffs[0]

    @property
    def is_scalar(self):
        return self.coeffs.shape[1] == 1

    def truncated(self, order):
        if order >= self.order:
            return self
        return Jet(self.coeffs[: order + 1])

    def derivative(self):
        """Jet of the time derivative (one order lower)."""
        if self.order < 1:
            raise ValueError("derivative of an order-0 jet is not represented")
        return Jet(self.coeffs[1:])

    def __add__(self, other):
        return jet_add(self, other)

    def __sub__(self, other):
        return jet_sub(self, other)

    def __neg__(self):
        return Jet(-self.coeffs)

    def __repr__(self):
        return f"Jet(order={self.order}, dim={self.dim}, value={self.value})"


def _common_order(a, b):
    return min(a.order, b.order)


def jet_add(a, b):
    """Componentwise sum, truncated to the smaller order."""
    if a.dim != b.dim:
        raise ValueError(f"jet dimension mismatch: {a.dim} vs {b.dim}")
    k = _common_order(a, b)
    return Jet(a.coeffs[: k + 1] + b.coeffs[: k + 1])


def jet_sub(a, b):
    if a.dim != b.dim:
        raise ValueError(f"jet dimension mismatch: {a.dim} vs {b.dim}")
    k = _common_order(a, b)
    return Jet(a.coeffs[: k + 1] - b.coeffs[: k + 1])


def jet_mul(a, b):
    """Leibniz product of two scalar jets."""
    if not (a.is_scalar and b.is_scalar):
        raise ValueError("jet_mul requires scalar jets; use jet_scale for vectors")
    k = _common_order(a, b)
    ac = a.coeffs[:, 0]
    bc = b.coeffs[:, 0]
    out = np.empty(k + 1)
    for j in range(k + 1):
        s = 0.0
        for i in range(j + 1):
            s += _binom(j, i) * ac[i] * bc[j - i]
        out[j] = s
    return Jet(out)


def jet_scale(s, v):
    """Leibniz product of a scalar jet with a (possibly vector) jet."""
    if not s.is_scalar:
        raise ValueError("first operand of jet_scale must be scalar")
    k = _common_order(s, v)
    sc = s.coeffs[:, 0]
    out = np.zeros((k + 1, v.dim))
    for j in range(k + 1):
        for i in range(j + 1):
            out[j] += _binom(j, i) * sc[i] * v.coeffs[j - i]
    return Jet(out)


def jet_reciprocal(a):
    """Jet of 1/a for a scalar jet with nonzero value.

    Uses the recursive division formula: with r0 = 1/a0, the higher
    coefficients follow from (a * r)^(j) = 0 for j >= 1.
    """
    if not a.is_scalar:
        raise ValueError("jet_reciprocal requires a scalar jet")
    ac = a.coeffs[:, 0]
    if ac[0] == 0.0:
        raise ZeroDivisionError("jet value is zero (funnel boundary hit)")
    k = a.order
    out = np.empty(k + 1)
    out[0] = 1.0 / ac[0]
    for j in range(1, k + 1):
        s = 0.0
        for i in range(1, j + 1):
            s += _binom(j, i) * ac[i] * out[j - i]
        out[j] = -s / ac[0]
    return Jet(out)


def jet_sqnorm(a):
    """Scalar jet of the squared Euclidean norm <a(t), a(t)>."""
    k = a.order
    out = np.empty(k + 1)
    for j in range(k + 1):
        s = 0.0
        for i in range(j + 1):
            s += _binom(j, i) * float(np.dot(a.coeffs[i], a.coeffs[j - i]))
        out[j] = s
    return Jet(out)
