"""Truncated multivariate Taylor (jet) arithmetic.

A Jet stores the coefficients of a Taylor expansion about a fixed base
point, over all multi-indices of total degree <= order, densely.  All
higher derivatives used by the operator assembly are carried exactly by
these coefficients; nothing downstream uses finite differences.

Variables are anonymous directions: index a < g is the a-th twist
direction by convention, and callers may append local-coordinate offset
directions for two-point expansions.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import DivisionByZeroConstantTerm, MixedBasePoint, OrderExhausted

__all__ = ["Jet", "jet_arith", "derivative", "seed_vector"]


@lru_cache(maxsize=None)
def _index_table(nvars: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with total degree <= order, graded lex order."""
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], remaining: int, slots: int) -> None:
        if slots == 0:
            out.append(prefix)
            return
        for d in range(remaining + 1):
            rec(prefix + (d,), remaining - d, slots - 1)

    for total in range(order + 1):
        rec((), total, nvars)
    # deduplicate: rec(total) emits all indices of degree <= total
    seen: dict[tuple[int, ...], None] = {}
    graded = sorted(set(out), key=lambda ix: (sum(ix), ix))
    for ix in graded:
        seen[ix] = None
    return tuple(seen)


@lru_cache(maxsize=None)
def _index_positions(nvars: int, order: int) -> dict[tuple[int, ...], int]:
    return {ix: p for p, ix in enumerate(_index_table(nvars, order))}


@lru_cache(maxsize=None)
def _mul_triples(nvars: int, order: int):
    """(i, j, k) position arrays with index[i] + index[j] = index[k]."""
    table = _index_table(nvars, order)
    pos = _index_positions(nvars, order)
    ii, jj, kk = [], [], []
    for i, a in enumerate(table):
        da = sum(a)
        for j, b in enumerate(table):
            if da + sum(b) > order:
                continue
            c = tuple(x + y for x, y in zip(a, b))
            ii.append(i)
            jj.append(j)
            kk.append(pos[c])
    return np.array(ii), np.array(jj), np.array(kk)


class Jet:
    """Immutable truncated Taylor series; see module docstring."""

    __slots__ = ("base_point", "order", "coeffs")

    def __init__(self, base_point, order: int, coeffs) -> None:
        bp = np.asarray(base_point, dtype=complex)
        bp.flags.writeable = False
        n = len(_index_table(bp.size, order))
        cf = np.asarray(coeffs, dtype=complex)
        if cf.shape != (n,):
            raise ValueError(f"expected {n} coefficients, got {cf.shape}")
        cf = cf.copy()
        cf.flags.writeable = False
        object.__setattr__(self, "base_point", bp)
        object.__setattr__(self, "order", int(order))
        object.__setattr__(self, "coeffs", cf)

    def __setattr__(self, name, value):  # immutability
        raise AttributeError("Jet is immutable")

    # -- constructors -------------------------------------------------
    @staticmethod
    def constant(c, base_point, order: int) -> "Jet":
        bp = np.asarray(base_point, dtype=complex)
        cf = np.zeros(len(_index_table(bp.size, order)), dtype=complex)
        cf[0] = complex(c)
        return Jet(bp, order, cf)

    @staticmethod
    def variable(i: int, base_point, order: int) -> "Jet":
        """base_point[i] + (offset in direction i)."""
        bp = np.asarray(base_point, dtype=complex)
        if order < 1:
            raise ValueError("variable jet needs order >= 1")
        cf = np.zeros(len(_index_table(bp.size, order)), dtype=complex)
        cf[0] = bp[i]
        unit = tuple(1 if k == i else 0 for k in range(bp.size))
        cf[_index_positions(bp.size, order)[unit]] = 1.0
        return Jet(bp, order, cf)

    # -- bookkeeping ---------------------------------------------------
    @property
    def nvars(self) -> int:
        return self.base_point.size

    @property
    def table(self):
        return _index_table(self.nvars, self.order)

    def value(self) -> complex:
        return complex(self.coeffs[0])

    def coefficient(self, index: tuple[int, ...]) -> complex:
        return complex(self.coeffs[_index_positions(self.nvars, self.order)[index]])

    def _check(self, other: "Jet") -> None:
        if (
            self.order != other.order
            or self.nvars != other.nvars
            or not np.array_equal(self.base_point, other.base_point)
        ):
            raise MixedBasePoint(
                "operands differ in base point, variable count, or order"
            )

    def _lift(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return other
        return Jet.constant(other, self.base_point, self.order)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderExhausted("cannot extend a jet")
        n = len(_index_table(self.nvars, order))
        return Jet(self.base_point, order, self.coeffs[:n])

    def embed(self, base_point, order: int | None = None) -> "Jet":
        """Reinterpret over a larger variable space; existing variables map
        to the leading slots, whose base values must match.  A larger order
        zero-pads: the padded slots are only valid when every consumed output
        coefficient depends on known input coefficients alone (e.g. slices of
        degree <= 1 in the appended variables)."""
        bp = np.asarray(base_point, dtype=complex)
        new_order = self.order if order is None else int(order)
        if new_order < self.order:
            return self.truncate(new_order).embed(bp, new_order)
        if bp.size < self.nvars or not np.array_equal(bp[: self.nvars], self.base_point):
            raise MixedBasePoint("embedding must preserve the leading base values")
        pad = (0,) * (bp.size - self.nvars)
        pos_new = _index_positions(bp.size, new_order)
        cf = np.zeros(len(pos_new), dtype=complex)
        for p, ix in enumerate(_index_table(self.nvars, self.order)):
            cf[pos_new[ix + pad]] = self.coeffs[p]
        return Jet(bp, new_order, cf)

    # -- ring operations ----------------------------------------------
    def __add__(self, other) -> "Jet":
        o = self._lift(other)
        return Jet(self.base_point, self.order, self.coeffs + o.coeffs)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(self.base_point, self.order, -self.coeffs)

    def __sub__(self, other) -> "Jet":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return Jet(self.base_point, self.order, self.coeffs * complex(other))
        self._check(other)
        ii, jj, kk = _mul_triples(self.nvars, self.order)
        out = np.zeros_like(self.coeffs)
        np.add.at(out, kk, self.coeffs[ii] * other.coeffs[jj])
        return Jet(self.base_point, self.order, out)

    __rmul__ = __mul__

    def _inverse(self) -> "Jet":
        c = self.coeffs[0]
        if c == 0:
            raise DivisionByZeroConstantTerm("inverse of jet with zero constant term")
        u = Jet(self.base_point, self.order, self.coeffs / c)
        v = Jet.constant(1.0, self.base_point, self.order) - u  # nilpotent mod order+1
        acc = Jet.constant(1.0, self.base_point, self.order)
        term = Jet.constant(1.0, self.base_point, self.order)
        for _ in range(self.order):
            term = term * v
            acc = acc + term
        return acc * (1.0 / c)

    def __truediv__(self, other) -> "Jet":
        o = self._lift(other)
        return self * o._inverse()

    def __rtruediv__(self, other) -> "Jet":
        return self._inverse() * other

    def __pow__(self, n: int) -> "Jet":
        if not isinstance(n, int):
            raise TypeError("jet powers must be integers")
        if n < 0:
            return self._inverse() ** (-n)
        acc = Jet.constant(1.0, self.base_point, self.order)
        base = self
        m = n
        while m:
            if m & 1:
                acc = acc * base
            base = base * base
            m >>= 1
        return acc

    # -- analytic operations --------------------------------------------
    def _nilpotent(self) -> "Jet":
        cf = self.coeffs.copy()
        cf[0] = 0.0
        return Jet(self.base_point, self.order, cf)

    def exp(self) -> "Jet":
        c = self.coeffs[0]
        u = self._nilpotent()
        acc = Jet.constant(1.0, self.base_point, self.order)
        term = Jet.constant(1.0, self.base_point, self.order)
        for k in range(1, self.order + 1):
            term = term * u * (1.0 / k)
            acc = acc + term
        return acc * np.exp(c)

    def log(self) -> "Jet":
        c = self.coeffs[0]
        if c == 0:
            raise DivisionByZeroConstantTerm("log of jet with zero constant term")
        v = self._nilpotent() * (1.0 / c)
        acc = Jet.constant(np.log(c), self.base_point, self.order)
        term = Jet.constant(1.0, self.base_point, self.order)
        for k in range(1, self.order + 1):
            term = term * v
            acc = acc + term * ((-1.0) ** (k + 1) / k)
        return acc

    def sqrt(self) -> "Jet":
        c = self.coeffs[0]
        if c == 0:
            raise DivisionByZeroConstantTerm("sqrt of jet with zero constant term")
        v = self._nilpotent() * (1.0 / c)
        acc = Jet.constant(1.0, self.base_point, self.order)
        term = Jet.constant(1.0, self.base_point, self.order)
        coef = 1.0
        for k in range(1, self.order + 1):
            coef *= (0.5 - (k - 1)) / k  # binomial(1/2, k) recursion
            term = term * v
            acc = acc + term * coef
        return acc * np.sqrt(c)

    # -- calculus --------------------------------------------------------
    def derivative(self, direction: int, times: int = 1) -> "Jet":
        if times > self.order:
            raise OrderExhausted(
                f"order-{self.order} jet cannot give {times} derivatives"
            )
        new_order = self.order - times
        table = _index_table(self.nvars, self.order)
        pos_new = _index_positions(self.nvars, new_order)
        cf = np.zeros(len(pos_new), dtype=complex)
        for p, ix in enumerate(table):
            d = ix[direction]
            if d < times:
                continue
            tgt = tuple(
                v - times if k == direction else v for k, v in enumerate(ix)
            )
            if sum(tgt) > new_order:
                continue
            cf[pos_new[tgt]] = self.coeffs[p] * math.perm(d, times)
        return Jet(self.base_point, new_order, cf)

    def integrate(self, direction: int) -> "Jet":
        """Primitive vanishing on the {offset_direction = 0} slice; order + 1."""
        new_order = self.order + 1
        pos_new = _index_positions(self.nvars, new_order)
        cf = np.zeros(len(pos_new), dtype=complex)
        for p, ix in enumerate(_index_table(self.nvars, self.order)):
            tgt = tuple(v + 1 if k == direction else v for k, v in enumerate(ix))
            cf[pos_new[tgt]] = self.coeffs[p] / (ix[direction] + 1)
        return Jet(self.base_point, new_order, cf)

    def evaluate(self, offsets) -> complex:
        off = np.asarray(offsets, dtype=complex)
        total = 0j
        for p, ix in enumerate(self.table):
            term = self.coeffs[p]
            for k, d in enumerate(ix):
                if d:
                    term *= off[k] ** d
            total += term
        return total

    def __repr__(self) -> str:
        return (
            f"Jet(base={tuple(self.base_point)}, order={self.order}, "
            f"value={self.coeffs[0]:.6g})"
        )


def seed_vector(base_point, order: int) -> list[Jet]:
    """The coordinate jets [x_0 + eps_0, x_1 + eps_1, ...] about base_point."""
    bp = np.asarray(base_point, dtype=complex)
    return [Jet.variable(i, bp, order) for i in range(bp.size)]


def jet_arith(x: Jet, y, op: str) -> Jet:
    """Dispatcher over the arithmetic kernel: add, mul, div, exp, log.

    exp and log are unary; y is ignored for them.
    """
    if op == "add":
        return x + y
    if op == "mul":
        return x * y
    if op == "div":
        return x / y
    if op == "exp":
        return x.exp()
    if op == "log":
        return x.log()
    raise ValueError(f"unknown op {op!r}")


def derivative(x: Jet, direction: int, times: int = 1) -> Jet:
    return x.derivative(direction, times)
