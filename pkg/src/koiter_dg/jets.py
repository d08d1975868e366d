"""Truncated bivariate Taylor series ("jets").

A :class:`Jet` of order ``K`` stores the normalized Taylor coefficients
``c[i, j]`` of a function ``f`` about a base point, so that

    f(x + dx) = sum_{i+j<=K} c[i, j] dx1**i dx2**j + O(|dx|**(K+1)).

Coefficients are kept in a flat leading axis ordered by total degree,
``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...``.  Every trailing axis is
a batch axis (quadrature points, elements, basis functions) and follows
numpy broadcasting.

Jets make the differential geometry of a chart exact to rounding: the chart
is written once with the elementary functions below, and metric, curvature,
Christoffel symbols and all their partial derivatives fall out of the
arithmetic.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np

from ._kernels import series_mul

__all__ = [
    "Jet",
    "nterms",
    "multi_indices",
    "index_of",
    "variable",
    "constant",
    "sin",
    "cos",
    "exp",
    "sqrt",
    "value",
]


def nterms(order: int) -> int:
    """Number of coefficients of a jet of the given order."""
    return (order + 1) * (order + 2) // 2


@lru_cache(maxsize=None)
def multi_indices(order: int) -> tuple[tuple[int, int], ...]:
    """Multi-indices ``(i, j)`` in storage order up to total degree ``order``."""
    out = []
    for d in range(order + 1):
        for i in range(d, -1, -1):
            out.append((i, d - i))
    return tuple(out)


def index_of(i: int, j: int) -> int:
    """Flat storage index of the multi-index ``(i, j)``."""
    d = i + j
    return nterms(d - 1) + (d - i) if d > 0 else 0


@lru_cache(maxsize=None)
def _mul_table(order: int):
    mi = multi_indices(order)
    p, q, r = [], [], []
    for a, (i1, j1) in enumerate(mi):
        for b, (i2, j2) in enumerate(mi):
            if i1 + j1 + i2 + j2 <= order:
                p.append(a)
                q.append(b)
                r.append(index_of(i1 + i2, j1 + j2))
    return np.array(p, dtype=np.int64), np.array(q, dtype=np.int64), np.array(r, dtype=np.int64)


@lru_cache(maxsize=None)
def _diff_table(order: int, axis: int):
    src, fac = [], []
    for i, j in multi_indices(order - 1):
        if axis == 0:
            src.append(index_of(i + 1, j))
            fac.append(i + 1.0)
        else:
            src.append(index_of(i, j + 1))
            fac.append(j + 1.0)
    return np.array(src, dtype=np.int64), np.array(fac)


class Jet:
    """Truncated Taylor series with batched coefficients.

    Parameters
    ----------
    coeffs : ndarray
        Array of shape ``(nterms(order), *batch)``.
    order : int
        Truncation order.
    """

    __slots__ = ("c", "order")
    __array_priority__ = 100.0

    def __init__(self, coeffs, order: int):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != nterms(order):
            raise ValueError(f"expected {nterms(order)} coefficients for order {order}, got {coeffs.shape[0]}")
        self.c = coeffs
        self.order = order

    # -- basic accessors ----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[1:]

    @property
    def val(self) -> np.ndarray:
        """Value at the base point."""
        return self.c[0]

    def coef(self, i: int, j: int) -> np.ndarray:
        """Normalized Taylor coefficient of ``dx1**i dx2**j``."""
        return self.c[index_of(i, j)]

    def partial(self, i: int, j: int) -> np.ndarray:
        """Partial derivative ``d^{i+j} f / dx1^i dx2^j`` at the base point."""
        return factorial(i) * factorial(j) * self.c[index_of(i, j)]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        return Jet(self.c[: nterms(order)], order)

    def d(self, axis: int) -> "Jet":
        """Partial derivative along ``axis`` (0 or 1); the order drops by one."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = _diff_table(self.order, axis)
        fac = fac.reshape((-1,) + (1,) * (self.c.ndim - 1))
        return Jet(self.c[src] * fac, self.order - 1)

    def expand(self, axis: int = -1) -> "Jet":
        """Insert a trailing batch axis (numpy ``expand_dims`` on the batch part)."""
        ax = axis if axis < 0 else axis + 1
        return Jet(np.expand_dims(self.c, ax), self.order)

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.c[(slice(None),) + idx], self.order)

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, shape={self.shape})"

    # -- arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            return self.c[: nterms(k)], other.c[: nterms(k)], k
        return None

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is not None:
            a, b, k = pair
            return Jet(a + b, k)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        out = np.array(np.broadcast_to(self.c, self.c.shape[:1] + shape))
        out[0] += other
        return Jet(out, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        pair = self._coerce(other)
        if pair is not None:
            a, b, k = pair
            if k == 0:
                return Jet(a * b, 0)
            p, q, r = _mul_table(k)
            return Jet(series_mul(a, b, p, q, r, nterms(k)), k)
        other = np.asarray(other, dtype=float)
        return Jet(self.c * other[None], self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 0:
            return _compose(self, lambda x0, k: comb_real(n, k) * x0 ** (n - k))
        out = constant(np.ones(self.shape), self.order)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def reciprocal(self) -> "Jet":
        return _compose(self, lambda x0, k: (-1.0) ** k * x0 ** (-k - 1))

    def sqrt(self) -> "Jet":
        return _compose(self, lambda x0, k: comb_real(0.5, k) * x0 ** (0.5 - k))

    def sin(self) -> "Jet":
        return _compose(self, lambda x0, k: _sin_derivative(x0, k) / factorial(k))

    def cos(self) -> "Jet":
        return _compose(self, lambda x0, k: _sin_derivative(x0, k + 1) / factorial(k))

    def exp(self) -> "Jet":
        return _compose(self, lambda x0, k: np.exp(x0) / factorial(k))


def comb_real(a: float, k: int) -> float:
    """Generalized binomial coefficient ``a choose k`` for real ``a``."""
    out = 1.0
    for i in range(k):
        out *= (a - i) / (i + 1)
    return out


def _sin_derivative(x0, k):
    return [np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)][k % 4](x0)


def _compose(f: Jet, taylor) -> Jet:
    """Evaluate ``h(f)`` from the Taylor coefficients ``taylor(f0, k) = h^(k)(f0)/k!``."""
    x0 = f.c[0]
    g = Jet(f.c.copy(), f.order)
    g.c[0] = 0.0
    out = np.zeros_like(f.c)
    out[0] = taylor(x0, 0)
    power = None
    for k in range(1, f.order + 1):
        power = g if power is None else power * g
        out = out + taylor(x0, k)[None] * _pad(power.c, f.c.shape[0])
    return Jet(out, f.order)


def _pad(c, n):
    if c.shape[0] == n:
        return c
    out = np.zeros((n,) + c.shape[1:])
    out[: c.shape[0]] = c
    return out


def variable(x, axis: int, order: int) -> Jet:
    """Coordinate function ``x_axis`` expanded at the points ``x``."""
    x = np.asarray(x, dtype=float)
    c = np.zeros((nterms(order),) + x.shape)
    c[0] = x
    if order >= 1:
        c[1 + axis] = 1.0
    return Jet(c, order)


def constant(v, order: int) -> Jet:
    """Constant function with value ``v``."""
    v = np.asarray(v, dtype=float)
    c = np.zeros((nterms(order),) + v.shape)
    c[0] = v
    return Jet(c, order)


def _dispatch(name):
    def fn(x):
        if isinstance(x, Jet):
            return getattr(x, name)()
        return getattr(np, name)(x)

    fn.__name__ = name
    fn.__doc__ = f"``{name}`` for arrays or jets."
    return fn


sin = _dispatch("sin")
cos = _dispatch("cos")
exp = _dispatch("exp")
sqrt = _dispatch("sqrt")


def value(x):
    """Base-point value of a jet, or the array itself."""
    return x.val if isinstance(x, Jet) else np.asarray(x)
