from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, List, Sequence, Tuple

from .errors import FieldMismatchError

# Tables are built for fields up to this order; larger fields multiply directly
TABLE_ORDER_LIMIT = 256


def poly_trim(coeffs: List[int]) -> List[int]:
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def poly_mod(num: Sequence[int], den: Sequence[int], p: int) -> List[int]:
    """Remainder of num by the monic-normalizable den over GF(p), low-to-high coefficients"""
    rem = poly_trim([c % p for c in num])
    den = poly_trim([c % p for c in den])
    lead_inv = pow(den[-1], p - 2, p)
    while len(rem) >= len(den):
        factor = rem[-1] * lead_inv % p
        shift = len(rem) - len(den)
        for i, c in enumerate(den):
            rem[shift + i] = (rem[shift + i] - factor * c) % p
        poly_trim(rem)
    return rem


def digits(value: int, p: int, m: int) -> Tuple[int, ...]:
    out = []
    for _ in range(m):
        value, d = divmod(value, p)
        out.append(d)
    return tuple(out)


def from_digits(coeffs: Sequence[int], p: int) -> int:
    value = 0
    for c in reversed(coeffs):
        value = value * p + c
    return value


@dataclass(frozen=True)
class FieldSpec:
    """
    GF(p^m) in the polynomial basis

    Elements are indexed by the integer whose base-p digits are their
    coefficients (constant term first), so index order is the
    lexicographic order used for canonical choices.
    """
    p: int
    m: int
    modulus: Tuple[int, ...]  # low-to-high, monic, length m + 1

    @property
    def q(self) -> int:
        return self.p ** self.m

    def element(self, value) -> "FieldElement":
        if isinstance(value, int):
            if not 0 <= value < self.q:
                raise ValueError(f"element index {value} outside GF({self.q})")
            return FieldElement(self, value)
        coeffs = [int(c) % self.p for c in value]
        if len(coeffs) > self.m:
            raise ValueError("too many coefficients")
        return FieldElement(self, from_digits(coeffs, self.p))

    @property
    def zero(self) -> "FieldElement":
        return FieldElement(self, 0)

    @property
    def one(self) -> "FieldElement":
        return FieldElement(self, 1)

    @property
    def generator(self) -> "FieldElement":
        """The class of t, the polynomial variable"""
        return FieldElement(self, self.p if self.m > 1 else 1)

    def elements(self) -> List["FieldElement"]:
        return [FieldElement(self, v) for v in range(self.q)]

    def nonzero(self) -> Iterator["FieldElement"]:
        return (FieldElement(self, v) for v in range(1, self.q))

    def to_json(self) -> dict:
        return {"p": self.p, "m": self.m, "modulus": list(self.modulus)}

    # ---- index arithmetic --------------------------------------------

    def _add_direct(self, a: int, b: int) -> int:
        if self.p == 2:
            return a ^ b
        da, db = digits(a, self.p, self.m), digits(b, self.p, self.m)
        return from_digits([(x + y) % self.p for x, y in zip(da, db)], self.p)

    def _neg_direct(self, a: int) -> int:
        if self.p == 2:
            return a
        return from_digits([(-x) % self.p for x in digits(a, self.p, self.m)], self.p)

    def _mul_direct(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        da, db = digits(a, self.p, self.m), digits(b, self.p, self.m)
        prod = [0] * (2 * self.m - 1)
        for i, x in enumerate(da):
            if x:
                for j, y in enumerate(db):
                    if y:
                        prod[i + j] = (prod[i + j] + x * y) % self.p
        rem = poly_mod(prod, self.modulus, self.p)
        return from_digits(rem, self.p)

    @cached_property
    def add_table(self) -> List[List[int]]:
        return [[self._add_direct(a, b) for b in range(self.q)] for a in range(self.q)]

    @cached_property
    def mul_table(self) -> List[List[int]]:
        return [[self._mul_direct(a, b) for b in range(self.q)] for a in range(self.q)]

    @cached_property
    def neg_table(self) -> List[int]:
        return [self._neg_direct(a) for a in range(self.q)]

    @cached_property
    def inv_table(self) -> List[int]:
        table = [0] * self.q
        for a in range(1, self.q):
            table[a] = self.pow_index(a, self.q - 2)
        return table

    @cached_property
    def basis_traces(self) -> Tuple[int, ...]:
        """Tr(t^i) for i < m; the trace of any element is their digit-weighted sum"""
        out = []
        for i in range(self.m):
            x = self.p ** i
            total, power = 0, x
            for _ in range(self.m):
                total = self._add_direct(total, power)
                power = self.pow_index(power, self.p)
            out.append(total)
        return tuple(out)

    def add_index(self, a: int, b: int) -> int:
        if self.p == 2:
            return a ^ b
        if self.q <= TABLE_ORDER_LIMIT:
            return self.add_table[a][b]
        return self._add_direct(a, b)

    def neg_index(self, a: int) -> int:
        if self.q <= TABLE_ORDER_LIMIT:
            return self.neg_table[a]
        return self._neg_direct(a)

    def sub_index(self, a: int, b: int) -> int:
        return self.add_index(a, self.neg_index(b))

    def mul_index(self, a: int, b: int) -> int:
        if self.q <= TABLE_ORDER_LIMIT:
            return self.mul_table[a][b]
        return self._mul_direct(a, b)

    def pow_index(self, a: int, e: int) -> int:
        result, base = 1, a
        while e:
            if e & 1:
                result = self._mul_direct(result, base)
            base = self._mul_direct(base, base)
            e >>= 1
        return result

    def inv_index(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of zero in GF(%d)" % self.q)
        if self.q <= TABLE_ORDER_LIMIT:
            return self.inv_table[a]
        return self.pow_index(a, self.q - 2)

    def trace_index(self, a: int) -> int:
        total = 0
        for d, tr in zip(digits(a, self.p, self.m), self.basis_traces):
            total += d * tr
        return total % self.p

    def coordinates(self, a: int) -> Tuple[int, ...]:
        return digits(a, self.p, self.m)


@dataclass(frozen=True)
class FieldElement:
    spec: FieldSpec
    value: int

    @property
    def coeffs(self) -> Tuple[int, ...]:
        return self.spec.coordinates(self.value)

    def _check(self, other: "FieldElement") -> None:
        if not isinstance(other, FieldElement):
            raise FieldMismatchError(f"cannot combine field element with {type(other).__name__}")
        if other.spec != self.spec:
            raise FieldMismatchError(f"GF({self.spec.q}) element met GF({other.spec.q}) element")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.spec, self.spec.add_index(self.value, other.value))

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.spec, self.spec.sub_index(self.value, other.value))

    def __neg__(self) -> "FieldElement":
        return FieldElement(self.spec, self.spec.neg_index(self.value))

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement(self.spec, self.spec.mul_index(self.value, other.value))

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        return self * other.inverse()

    def __pow__(self, exponent: int) -> "FieldElement":
        if exponent < 0:
            return self.inverse() ** (-exponent)
        return FieldElement(self.spec, self.spec.pow_index(self.value, exponent))

    def __bool__(self) -> bool:
        return self.value != 0

    def inverse(self) -> "FieldElement":
        return FieldElement(self.spec, self.spec.inv_index(self.value))

    def trace(self) -> int:
        """Absolute trace, returned as its residue in 0..p-1"""
        return self.spec.trace_index(self.value)

    def is_zero(self) -> bool:
        return self.value == 0

    def __repr__(self) -> str:
        return f"GF{self.spec.q}({self.value})"
