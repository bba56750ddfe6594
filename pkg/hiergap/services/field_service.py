import itertools
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

from ..models.errors import CapExceededError, FieldMismatchError, NotPrimePowerError
from ..models.field import FieldElement, FieldSpec, poly_mod
from ..utils.logging_config import get_logger

logger = get_logger(__name__)

Vector = Tuple[int, ...]


@dataclass(frozen=True)
class LinearSolution:
    """
    Solution set of A x = b over a field, entries as element indices

    particular is None when the system is inconsistent.
    """
    spec: FieldSpec
    particular: Optional[Vector]
    kernel: Tuple[Vector, ...]

    @property
    def feasible(self) -> bool:
        return self.particular is not None

    @property
    def dimension(self) -> int:
        return len(self.kernel)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def prime_power(q: int) -> Optional[Tuple[int, int]]:
    """(p, m) with q = p^m, or None"""
    if q < 2:
        return None
    for p in range(2, q + 1):
        if q % p == 0:
            if not is_prime(p):
                return None
            m, rest = 0, q
            while rest % p == 0:
                rest //= p
                m += 1
            return (p, m) if rest == 1 else None
    return None


def is_irreducible(poly: Sequence[int], p: int) -> bool:
    """Trial division by every monic polynomial of degree 1..deg/2"""
    m = len(poly) - 1
    for degree in range(1, m // 2 + 1):
        for lower in itertools.product(range(p), repeat=degree):
            divisor = list(lower) + [1]
            if not poly_mod(poly, divisor, p):
                return False
    return True


@lru_cache(maxsize=None)
def _build_field(p: int, m: int) -> FieldSpec:
    for index in range(p ** m):
        lower = [(index // p ** i) % p for i in range(m)]
        candidate = tuple(lower) + (1,)
        if m == 1 or is_irreducible(candidate, p):
            return FieldSpec(p=p, m=m, modulus=candidate)
    raise AssertionError(f"no irreducible polynomial of degree {m} over GF({p})")


class FieldService:
    """
    Finite field construction and linear algebra

    Handles:
    - GF(p^m) construction with a deterministic modulus
    - Gaussian elimination over any field
    - Trace pairing and annihilators of additive subgroups
    - F_p-coordinate views used by character equations
    """

    def __init__(self):
        self.order_cap = int(os.getenv("HIERGAP_FIELD_ORDER_CAP", str(2 ** 16)))
        logger.info("Field service initialized", order_cap=self.order_cap)

    def field_new(self, p: int, m: int) -> FieldSpec:
        """
        Build GF(p^m) with the lexicographically-first irreducible monic modulus

        Args:
            p: prime characteristic
            m: extension degree

        Returns:
            FieldSpec, cached per (p, m)
        """
        if not is_prime(p):
            raise NotPrimePowerError(f"characteristic {p} is not prime")
        if m < 1:
            raise ValueError("extension degree must be at least 1")
        if p ** m > self.order_cap:
            raise CapExceededError("field order", self.order_cap, p ** m)
        return _build_field(p, m)

    def field_of_order(self, q: int) -> FieldSpec:
        pm = prime_power(q)
        if pm is None:
            raise NotPrimePowerError(f"{q} is not a prime power")
        return self.field_new(*pm)

    def prime_field(self, spec: FieldSpec) -> FieldSpec:
        return self.field_new(spec.p, 1)

    # Linear algebra

    def solve_linear(self, A: Sequence[Sequence[FieldElement]],
                     b: Sequence[FieldElement]) -> LinearSolution:
        """Solve A x = b given as field elements; see solve_linear_indices"""
        elements = [e for row in A for e in row] + list(b)
        if not elements:
            raise ValueError("cannot infer the field of an empty system")
        spec = elements[0].spec
        for e in elements:
            if e.spec != spec:
                raise FieldMismatchError("system mixes fields")
        ncols = len(A[0]) if A else 0
        return self.solve_linear_indices(
            spec, [[e.value for e in row] for row in A], [e.value for e in b], ncols
        )

    def solve_linear_indices(self, spec: FieldSpec, A: Sequence[Sequence[int]],
                             b: Sequence[int], ncols: Optional[int] = None) -> LinearSolution:
        """
        Exact Gaussian elimination to reduced row echelon form

        Args:
            spec: the field
            A: rows of element indices
            b: right-hand side indices
            ncols: column count, needed when A has no rows

        Returns:
            LinearSolution with a particular solution (free variables zero)
            and a kernel basis, verified by substitution
        """
        if ncols is None:
            ncols = len(A[0]) if A else 0
        if len(A) != len(b):
            raise ValueError("row count of A and length of b differ")
        rows = [list(r) + [rhs] for r, rhs in zip(A, b)]
        for r in rows:
            if len(r) != ncols + 1:
                raise ValueError("ragged coefficient matrix")

        pivots: List[int] = []
        rank = 0
        for col in range(ncols):
            pivot_row = next((i for i in range(rank, len(rows)) if rows[i][col]), None)
            if pivot_row is None:
                continue
            rows[rank], rows[pivot_row] = rows[pivot_row], rows[rank]
            inv = spec.inv_index(rows[rank][col])
            rows[rank] = [spec.mul_index(inv, v) for v in rows[rank]]
            prow = rows[rank]
            nz = [j for j, v in enumerate(prow) if v]
            for i in range(len(rows)):
                if i != rank and rows[i][col]:
                    factor = rows[i][col]
                    row = rows[i]
                    for j in nz:
                        row[j] = spec.sub_index(row[j], spec.mul_index(factor, prow[j]))
            pivots.append(col)
            rank += 1

        for i in range(rank, len(rows)):
            if rows[i][ncols]:
                return LinearSolution(spec=spec, particular=None, kernel=())

        particular = [0] * ncols
        for i, col in enumerate(pivots):
            particular[col] = rows[i][ncols]

        pivot_set = set(pivots)
        kernel = []
        for free in range(ncols):
            if free in pivot_set:
                continue
            vec = [0] * ncols
            vec[free] = 1
            for i, col in enumerate(pivots):
                vec[col] = spec.neg_index(rows[i][free])
            kernel.append(tuple(vec))

        solution = LinearSolution(spec=spec, particular=tuple(particular), kernel=tuple(kernel))
        self._verify_solution(spec, A, b, solution)
        return solution

    def _verify_solution(self, spec: FieldSpec, A: Sequence[Sequence[int]], b: Sequence[int],
                         solution: LinearSolution) -> None:
        def apply(x: Sequence[int]) -> List[int]:
            out = []
            for row in A:
                acc = 0
                for a, v in zip(row, x):
                    if a and v:
                        acc = spec.add_index(acc, spec.mul_index(a, v))
                out.append(acc)
            return out

        if apply(solution.particular) != list(b):
            raise AssertionError("particular solution fails substitution")
        for vec in solution.kernel:
            if any(apply(vec)):
                raise AssertionError("kernel vector fails substitution")

    def rank_indices(self, spec: FieldSpec, rows: Sequence[Sequence[int]], ncols: int) -> int:
        if not rows:
            return 0
        solution = self.solve_linear_indices(spec, rows, [0] * len(rows), ncols)
        return ncols - solution.dimension

    # Trace structure

    def pairing(self, spec: FieldSpec, c: Sequence[int], x: Sequence[int]) -> int:
        """Sum of Tr(c_v x_v) over coordinates, as a residue mod p"""
        total = 0
        for cv, xv in zip(c, x):
            if cv and xv:
                total += spec.trace_index(spec.mul_index(cv, xv))
        return total % spec.p

    def trace_row(self, spec: FieldSpec, c: Sequence[int]) -> List[int]:
        """
        F_p coefficients of x -> sum Tr(c_v x_v) in the coordinates x_{v,b}

        Entry v*m + b is Tr(c_v t^b).
        """
        row = []
        for cv in c:
            for b in range(spec.m):
                row.append(spec.trace_index(spec.mul_index(cv, spec.p ** b)) if cv else 0)
        return row

    def to_fp_coordinates(self, spec: FieldSpec, x: Sequence[int]) -> List[int]:
        out: List[int] = []
        for xv in x:
            out.extend(spec.coordinates(xv))
        return out

    def from_fp_coordinates(self, spec: FieldSpec, coords: Sequence[int]) -> Vector:
        m, p = spec.m, spec.p
        out = []
        for v in range(len(coords) // m):
            value = 0
            for b in reversed(range(m)):
                value = value * p + coords[v * m + b]
            out.append(value)
        return tuple(out)

    def fq_scalings(self, spec: FieldSpec, generators: Sequence[Sequence[int]]) -> List[Vector]:
        """F_p-generators t^a * g of the F_q-span of the given generators"""
        out = []
        for g in generators:
            for a in range(spec.m):
                scale = spec.p ** a
                out.append(tuple(spec.mul_index(scale, v) for v in g))
        return out

    def annihilator(self, spec: FieldSpec, generators: Sequence[Sequence[int]], k: int,
                    fq_linear: bool = False) -> List[Vector]:
        """
        Basis over F_p of the characters vanishing on a subgroup of G^k

        Args:
            spec: the field G
            generators: vectors in G^k generating the subgroup additively
                (or over F_q when fq_linear is set)
            k: arity

        Returns:
            vectors c with sum Tr(c_v h_v) = 0 for all h in the subgroup;
            their count is mk minus the F_p-dimension of the subgroup
        """
        gens = self.fq_scalings(spec, generators) if fq_linear else [tuple(g) for g in generators]
        fp = self.prime_field(spec)
        rows = [self.trace_row(spec, g) for g in gens]
        ncols = spec.m * k
        if rows:
            solution = self.solve_linear_indices(fp, rows, [0] * len(rows), ncols)
            kernel = solution.kernel
        else:
            kernel = tuple(tuple(1 if j == i else 0 for j in range(ncols)) for i in range(ncols))
        basis = [self.from_fp_coordinates(spec, vec) for vec in kernel]
        logger.debug("annihilator computed", q=spec.q, k=k, generators=len(gens), dimension=len(basis))
        return basis

    def span(self, spec: FieldSpec, generators: Sequence[Sequence[int]], k: int) -> List[Vector]:
        """All elements of the additive subgroup generated by the vectors"""
        basis = self.fp_basis(spec, generators, k)
        elements = {tuple([0] * k)}
        for g in basis:
            layer = set(elements)
            current = list(elements)
            for _ in range(spec.p - 1):
                current = [tuple(spec.add_index(a, b) for a, b in zip(x, g)) for x in current]
                layer.update(current)
            elements = layer
        return sorted(elements)

    def fp_basis(self, spec: FieldSpec, generators: Sequence[Sequence[int]], k: int) -> List[Vector]:
        """Independent subset (over F_p) of the generators"""
        fp = self.prime_field(spec)
        basis: List[Vector] = []
        rows: List[List[int]] = []
        for g in generators:
            coords = self.to_fp_coordinates(spec, g)
            candidate = rows + [coords]
            if self.rank_indices(fp, candidate, spec.m * k) > len(rows):
                rows.append(coords)
                basis.append(tuple(g))
        return basis

    def fp_dimension(self, spec: FieldSpec, generators: Sequence[Sequence[int]], k: int) -> int:
        fp = self.prime_field(spec)
        rows = [self.to_fp_coordinates(spec, g) for g in generators]
        return self.rank_indices(fp, rows, spec.m * k)


field_service = FieldService()
