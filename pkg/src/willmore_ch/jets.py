"""Truncated bivariate Taylor polynomials ("jets").

A jet of degree ``D`` at a batch of base points stores the coefficients
``c[i, j]`` of ``ds**i dz**j`` for ``i + j <= D``. Arithmetic is exact up to
truncation, which is all that is needed to push analytic derivatives through
the Fermi-chart Laplacian twice.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

__all__ = ["Jet", "s_jet", "z_jet", "constant_jet"]


def _pairs(degree):
    return [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]


_PRODUCT_CACHE: dict = {}


def _product_terms(degree):
    terms = _PRODUCT_CACHE.get(degree)
    if terms is None:
        terms = []
        for i, j in _pairs(degree):
            for a in range(i + 1):
                for b in range(j + 1):
                    terms.append((i, j, a, b, i - a, j - b))
        _PRODUCT_CACHE[degree] = terms
    return terms


@dataclass(frozen=True)
class Jet:
    coef: np.ndarray  # shape (D+1, D+1, *batch); entries with i + j > D are 0
    degree: int

    @property
    def shape(self):
        return self.coef.shape[2:]

    @property
    def value(self):
        return self.coef[0, 0]

    def partial(self, i, j):
        """d^i/ds^i d^j/dz^j at the base point."""
        return factorial(i) * factorial(j) * self.coef[i, j]

    def truncate(self, degree):
        if degree >= self.degree:
            return self
        c = self.coef[: degree + 1, : degree + 1].copy()
        for i in range(degree + 1):
            c[i, degree + 1 - i:] = 0.0
        return Jet(c, degree)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            d = min(self.degree, other.degree)
            return self.truncate(d), other.truncate(d)
        return self, constant_jet(other, self.degree, self.shape)

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a.coef + b.coef, a.degree)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coef, self.degree)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coef * np.asarray(other), self.degree)
        a, b = self._coerce(other)
        d = a.degree
        out = np.zeros(np.broadcast_shapes(a.coef.shape, b.coef.shape))
        for i, j, p, q, r, w in _product_terms(d):
            out[i, j] += a.coef[p, q] * b.coef[r, w]
        return Jet(out, d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coef / np.asarray(other), self.degree)
        return self * other.reciprocal()

    def __pow__(self, n: int):
        if n == 0:
            return constant_jet(1.0, self.degree, self.shape)
        out = self
        for _ in range(n - 1):
            out = out * self
        return out

    def nilpotent(self):
        """The jet minus its base value."""
        c = self.coef.copy()
        c[0, 0] = 0.0
        return Jet(c, self.degree)

    def compose(self, stack):
        """f(self) given ``stack[n] = f^{(n)}(self.value)``, n = 0..degree."""
        stack = np.asarray(stack)
        if stack.shape[0] < self.degree + 1:
            raise ValueError("derivative stack too short for jet degree")
        d = self.nilpotent()
        out = constant_jet(stack[0], self.degree, self.shape)
        power = None
        for n in range(1, self.degree + 1):
            power = d if power is None else power * d
            out = out + power * (stack[n] / factorial(n))
        return out

    def reciprocal(self):
        a0 = self.value
        stack = [(-1.0) ** n * factorial(n) / a0 ** (n + 1) for n in range(self.degree + 1)]
        return self.compose(np.array(stack))

    def d_s(self):
        d = self.degree
        c = np.zeros_like(self.coef)
        for i in range(1, d + 1):
            c[i - 1, : d + 1 - i] = i * self.coef[i, : d + 1 - i]
        return Jet(c, d).truncate(d - 1)

    def d_z(self):
        d = self.degree
        c = np.zeros_like(self.coef)
        for j in range(1, d + 1):
            c[: d + 1 - j, j - 1] = j * self.coef[: d + 1 - j, j]
        return Jet(c, d).truncate(d - 1)


def constant_jet(value, degree, shape=()):
    value = np.asarray(value, dtype=float)
    shape = np.broadcast_shapes(shape, value.shape)
    c = np.zeros((degree + 1, degree + 1) + shape)
    c[0, 0] = value
    return Jet(c, degree)


def s_jet(stack, degree, scale=1.0):
    """Jet of ``f(scale * (s0 + ds))`` from ``stack[n] = f^{(n)}(scale * s0)``."""
    stack = np.asarray(stack, dtype=float)
    c = np.zeros((degree + 1, degree + 1) + stack.shape[1:])
    for n in range(degree + 1):
        c[n, 0] = stack[n] * scale ** n / factorial(n)
    return Jet(c, degree)


def z_jet(z0, degree):
    """The coordinate ``z`` itself, expanded at ``z0``."""
    z0 = np.asarray(z0, dtype=float)
    c = np.zeros((degree + 1, degree + 1) + z0.shape)
    c[0, 0] = z0
    if degree >= 1:
        c[0, 1] = 1.0
    return Jet(c, degree)
