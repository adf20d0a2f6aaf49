"""Arithmetic in GF(2^eta) through exponent/discrete-log tables.

Elements are plain integers ``0 .. 2^eta - 1`` whose bits are the polynomial
coefficients over GF(2). Addition is XOR; multiplication goes through the
tables.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Primitive polynomials (bit masks including the x^eta term), one per width.
PRIMITIVE_POLYS = {
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x89,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}


@dataclass(frozen=True, eq=False)
class FieldContext:
    """Immutable table set for GF(2^eta).

    ``exp`` has length ``2 * (q - 1)`` so that ``exp[log a + log b]`` never
    needs a modulo; ``log[0]`` is ``-1`` and must never be used.
    """

    eta: int
    prim_poly: int
    exp: np.ndarray = field(repr=False)
    log: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, eta: int, prim_poly: int | None = None) -> "FieldContext":
        if not 2 <= eta <= 16:
            raise ValueError(f"field width must be in 2..16, got {eta}")
        if prim_poly is None:
            prim_poly = PRIMITIVE_POLYS[eta]
        if prim_poly >> eta != 1:
            raise ValueError(f"polynomial {prim_poly:#x} does not have degree {eta}")
        q = 1 << eta
        exp = np.zeros(2 * (q - 1), dtype=np.int64)
        log = np.full(q, -1, dtype=np.int64)
        x = 1
        for i in range(q - 1):
            if log[x] != -1:
                raise ValueError(f"polynomial {prim_poly:#x} is not primitive")
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & q:
                x ^= prim_poly
        if x != 1:
            raise ValueError(f"polynomial {prim_poly:#x} is not primitive")
        exp[q - 1:] = exp[: q - 1]
        exp.setflags(write=False)
        log.setflags(write=False)
        return cls(eta, prim_poly, exp, log)

    @property
    def size(self) -> int:
        return 1 << self.eta

    @property
    def order(self) -> int:
        """Multiplicative order of the primitive element."""
        return (1 << self.eta) - 1

    @property
    def antilog_table(self) -> np.ndarray:
        return self.exp[: self.order]

    @property
    def log_table(self) -> np.ndarray:
        return self.log

    def _check(self, a: int) -> int:
        a = int(a)
        if not 0 <= a < self.size:
            raise ValueError(f"{a} is not an element of GF(2^{self.eta})")
        return a

    def add(self, a: int, b: int) -> int:
        return self._check(a) ^ self._check(b)

    def mul(self, a: int, b: int) -> int:
        a, b = self._check(a), self._check(b)
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def inv(self, a: int) -> int:
        a = self._check(a)
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return int(self.exp[(self.order - self.log[a]) % self.order])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, n: int) -> int:
        a = self._check(a)
        n = int(n)
        if a == 0:
            if n < 0:
                raise ZeroDivisionError("zero has no multiplicative inverse")
            return 1 if n == 0 else 0
        return int(self.exp[(self.log[a] * n) % self.order])

    def alpha(self, i: int) -> int:
        """The primitive element raised to ``i``."""
        return int(self.exp[i % self.order])


def field_arith(ctx: FieldContext, op: str, a: int, b: int = 0) -> int:
    """Dispatch one of ``add``, ``mul``, ``inv`` or ``pow`` on ``ctx``.

    For ``inv`` the operand is ``a`` and ``b`` is ignored; for ``pow`` the
    exponent is ``b``.
    """
    if op == "add":
        return ctx.add(a, b)
    if op == "mul":
        return ctx.mul(a, b)
    if op == "inv":
        return ctx.inv(a)
    if op == "pow":
        return ctx.pow(a, b)
    raise ValueError(f"unknown field operation {op!r}")


def clmul_reduce(a: int, b: int, prim_poly: int) -> int:
    """Carry-less product of ``a`` and ``b`` reduced modulo ``prim_poly``.

    Table-free reference used to cross-check :class:`FieldContext`.
    """
    prod = 0
    while b:
        if b & 1:
            prod ^= a
        a <<= 1
        b >>= 1
    deg = prim_poly.bit_length() - 1
    while prod.bit_length() - 1 >= deg:
        prod ^= prim_poly << (prod.bit_length() - 1 - deg)
    return prod
