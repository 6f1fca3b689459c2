"""Truncated Taylor series ("jets") of scalar functions.

A :class:`Jet` of order ``m`` stores the Taylor coefficients ``c[0..m]`` of a
function at a fixed expansion point, so ``f(x0 + h) = sum c[k] h**k + O(h**(m+1))``.
Coefficients may be real or complex numpy arrays of any common shape, which
lets one jet carry a whole batch of expansion points.
"""
from __future__ import annotations

import math

import numpy as np


class Jet:
    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = np.asarray(coeffs)
        if c.ndim == 0:
            c = c[None]
        if not np.iscomplexobj(c):
            c = c.astype(float)
        self.c = c

    @classmethod
    def variable(cls, x0, order: int) -> "Jet":
        """The identity function expanded at ``x0``."""
        x0 = np.asarray(x0)
        c = np.zeros((order + 1,) + x0.shape, dtype=np.result_type(x0, float))
        c[0] = x0
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        value = np.asarray(value)
        c = np.zeros((order + 1,) + value.shape, dtype=np.result_type(value, float))
        c[0] = value
        return cls(c)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @property
    def value(self):
        return self.c[0]

    def derivative(self, k: int = 1):
        """k-th derivative at the expansion point."""
        return math.factorial(k) * self.c[k]

    def __repr__(self):
        return f"Jet(order={self.order}, c={self.c!r})"

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError(f"jet orders differ: {self.order} vs {other.order}")
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return Jet(self.c + other.c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * np.asarray(other))
        other = self._coerce(other)
        m = self.order
        out = np.zeros(np.broadcast_shapes(self.c.shape, other.c.shape),
                       dtype=np.result_type(self.c, other.c))
        for k in range(m + 1):
            out[k] = sum(self.c[j] * other.c[k - j] for j in range(k + 1))
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / np.asarray(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def reciprocal(self) -> "Jet":
        a = self.c
        out = np.zeros_like(a, dtype=np.result_type(a, float))
        out[0] = 1.0 / a[0]
        for k in range(1, self.order + 1):
            out[k] = -sum(a[j] * out[k - j] for j in range(1, k + 1)) / a[0]
        return Jet(out)

    def __pow__(self, alpha):
        return self.power(alpha)

    def power(self, alpha: float) -> "Jet":
        """``self ** alpha`` for real ``alpha``; needs a nonzero constant term."""
        a = self.c
        out = np.zeros_like(a, dtype=np.result_type(a, float))
        out[0] = a[0] ** alpha
        for k in range(1, self.order + 1):
            out[k] = sum((alpha * j - (k - j)) * a[j] * out[k - j] for j in range(1, k + 1)) / (k * a[0])
        return Jet(out)

    def exp(self) -> "Jet":
        a = self.c
        out = np.zeros_like(a, dtype=np.result_type(a, float))
        out[0] = np.exp(a[0])
        for k in range(1, self.order + 1):
            out[k] = sum(j * a[j] * out[k - j] for j in range(1, k + 1)) / k
        return Jet(out)

    def _sinh_cosh(self):
        a = self.c
        s = np.zeros_like(a, dtype=np.result_type(a, float))
        ch = np.zeros_like(s)
        s[0], ch[0] = np.sinh(a[0]), np.cosh(a[0])
        for k in range(1, self.order + 1):
            s[k] = sum(j * a[j] * ch[k - j] for j in range(1, k + 1)) / k
            ch[k] = sum(j * a[j] * s[k - j] for j in range(1, k + 1)) / k
        return Jet(s), Jet(ch)

    def sinh(self) -> "Jet":
        return self._sinh_cosh()[0]

    def cosh(self) -> "Jet":
        return self._sinh_cosh()[1]

    def diff(self) -> "Jet":
        """Jet of the derivative, one order lower."""
        k = np.arange(1, self.order + 1).reshape((-1,) + (1,) * (self.c.ndim - 1))
        return Jet(self.c[1:] * k)

    def compose(self, inner: "Jet") -> "Jet":
        """Jet of ``self(inner(x))``; ``self`` must be expanded at ``inner.value``."""
        inner = self._coerce(inner)
        h = Jet(inner.c.copy())
        h.c[0] = 0.0
        out = Jet.constant(self.c[self.order], self.order)
        for k in range(self.order - 1, -1, -1):
            out = out * h + self.c[k]
        return out
