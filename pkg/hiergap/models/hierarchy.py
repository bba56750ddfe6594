import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import CapExceededError, MissingEntryError, ZeroNormalizerError
from .field import FieldSpec, from_digits
from .schemas import Assignment, CspInstance

Scope = Tuple[int, ...]

ZERO = Fraction(0)
ONE = Fraction(1)


def scope_of(variables: Iterable[int]) -> Scope:
    return tuple(sorted(set(variables)))


# Factors
@dataclass(frozen=True)
class Factor:
    """Nonnegative table over assignments to scope (zero rows omitted)"""
    scope: Tuple[int, ...]
    table: Mapping[Assignment, Fraction]

    def multiply(self, other: "Factor") -> "Factor":
        scope = tuple(sorted(set(self.scope) | set(other.scope)))
        position = {v: i for i, v in enumerate(scope)}
        shared = [v for v in self.scope if v in other.scope]
        mine = [self.scope.index(v) for v in shared]
        theirs = [other.scope.index(v) for v in shared]
        place_a = [position[v] for v in self.scope]
        place_b = [position[v] for v in other.scope]

        buckets: Dict[Assignment, List[Tuple[Assignment, Fraction]]] = defaultdict(list)
        for b, pb in other.table.items():
            buckets[tuple(b[i] for i in theirs)].append((b, pb))
        table: Dict[Assignment, Fraction] = {}
        for a, pa in self.table.items():
            for b, pb in buckets.get(tuple(a[i] for i in mine), ()):
                out = [0] * len(scope)
                for pos, g in zip(place_a, a):
                    out[pos] = g
                for pos, g in zip(place_b, b):
                    out[pos] = g
                table[tuple(out)] = pa * pb
        return Factor(scope=scope, table=table)

    def project(self, keep: Sequence[int]) -> "Factor":
        """Sum out every variable not in keep; the result follows keep's order"""
        positions = [self.scope.index(v) for v in keep]
        table: Dict[Assignment, Fraction] = {}
        for a, p in self.table.items():
            key = tuple(a[i] for i in positions)
            table[key] = table.get(key, ZERO) + p
        return Factor(scope=tuple(keep), table=table)

    def total(self) -> Fraction:
        return sum(self.table.values(), ZERO)


def eliminate(factors: Sequence[Factor], keep: Sequence[int], cap: Optional[int] = None) -> Factor:
    """
    Sum-product variable elimination, greedy on the smallest merged scope

    Returns:
        the unnormalized marginal over the kept variables that occur in
        some factor, in sorted order
    """
    pending = list(factors)
    keep_set = set(keep)
    remaining = {v for f in pending for v in f.scope} - keep_set
    while remaining:
        def cost(u: int) -> Tuple[int, int]:
            merged = set()
            for f in pending:
                if u in f.scope:
                    merged.update(f.scope)
            return len(merged), u
        v = min(remaining, key=cost)
        touching = [f for f in pending if v in f.scope]
        pending = [f for f in pending if v not in f.scope]
        product = touching[0]
        for f in touching[1:]:
            product = product.multiply(f)
        if cap is not None and len(product.table) > cap:
            raise CapExceededError("factor states", cap, len(product.table))
        pending.append(product.project([u for u in product.scope if u != v]))
        remaining.discard(v)

    result = Factor(scope=(), table={(): ONE})
    for f in pending:
        result = result.multiply(f)
    return result


def peel(factors: Sequence[Factor], anchor: Iterable[int], q: int) -> Tuple[List[Factor], Fraction]:
    """
    Strip factors that meet the anchor and the remaining factors in at most
    two variables, and whose table sums to one constant over those variables

    Summing a stripped factor's other variables out leaves that constant, so
    the product of the rest times the returned constant has the same
    marginal on the anchor up to normalization.

    Returns:
        (factors left, product of the stripped constants)
    """
    remaining = list(factors)
    anchor = set(anchor)
    constant = ONE
    stripped = True
    while stripped and remaining:
        stripped = False
        for i, f in enumerate(remaining):
            touched = set(anchor)
            for j, other in enumerate(remaining):
                if j != i:
                    touched.update(other.scope)
            shared = [v for v in f.scope if v in touched]
            if len(shared) > 2:
                continue
            sums = f.project(shared).table
            values = set(sums.values())
            if len(sums) != q ** len(shared) or len(values) != 1:
                continue
            constant *= values.pop()
            del remaining[i]
            stripped = True
            break
    return remaining, constant


# Sherali-Adams
@dataclass
class LocalDistributionFamily:
    """
    Exact marginals X_S over a q-ary alphabet for the stored sets S

    entries[S] maps assignments on sorted S to probabilities; absent
    assignments have probability zero. provenance[S] is the closure the
    marginal was read from, when there was one.
    """
    q: int
    t: int
    n: int
    entries: Dict[Scope, Dict[Assignment, Fraction]] = field(default_factory=dict)
    provenance: Dict[Scope, Scope] = field(default_factory=dict)

    def add(self, S: Iterable[int], table: Mapping[Assignment, Fraction],
            closure: Optional[Scope] = None) -> None:
        key = scope_of(S)
        self.entries[key] = {a: p for a, p in table.items() if p}
        if closure is not None:
            self.provenance[key] = closure

    def has(self, S: Iterable[int]) -> bool:
        return scope_of(S) in self.entries

    def marginal(self, S: Iterable[int]) -> Dict[Assignment, Fraction]:
        key = scope_of(S)
        if key not in self.entries:
            raise MissingEntryError(f"no local distribution stored for {list(key)}")
        return self.entries[key]

    def value(self, S: Iterable[int], alpha: Sequence[int]) -> Fraction:
        return self.marginal(S).get(tuple(alpha), ZERO)

    def sets(self) -> List[Scope]:
        return sorted(self.entries, key=lambda s: (len(s), s))

    def singleton(self, v: int, g: int) -> Fraction:
        return self.value((v,), (g,))

    @classmethod
    def point_mass(cls, q: int, t: int, assignment: Sequence[int],
                   sets: Iterable[Iterable[int]]) -> "LocalDistributionFamily":
        """The integral family of a single assignment"""
        family = cls(q=q, t=t, n=len(assignment))
        for S in sets:
            key = scope_of(S)
            family.add(key, {tuple(assignment[v] for v in key): ONE})
        return family


@dataclass(frozen=True)
class CanonicalDistribution:
    """
    Product of per-constraint distributions on a closed set, normalized

    Variables of the base set outside every inner constraint are uniform;
    normalizer is the mass of the constrained part alone.
    """
    base: Scope
    constraints: Tuple[int, ...]
    factors: Tuple[Factor, ...]
    normalizer: Fraction
    q: int

    def marginal(self, S: Iterable[int]) -> Dict[Assignment, Fraction]:
        S = scope_of(S)
        factors, _ = peel(self.factors, S, self.q)
        inside = {v for f in factors for v in f.scope}
        joint = eliminate(factors, [v for v in S if v in inside])
        for v in S:
            if v not in inside:
                joint = joint.multiply(Factor(scope=(v,), table={(g,): Fraction(1, self.q)
                                                                for g in range(self.q)}))
        joint = joint.project(S)
        mass = joint.total()
        if mass == 0:
            raise ZeroNormalizerError(f"closure {list(self.base)} has no mass on {list(S)}")
        return {a: p / mass for a, p in joint.table.items() if p}


@dataclass(frozen=True)
class FeldmanPoint:
    """f_i per variable and w_{j,S} per check and local flip set"""
    f: Tuple[Fraction, ...]
    w: Mapping[Tuple[int, Tuple[int, ...]], Fraction]


# Lasserre
@dataclass(frozen=True, order=True)
class CharacterEquation:
    """
    sum over the support of Tr(c_v f(v)) = rhs (mod p)

    frequencies are (variable, nonzero element index) pairs sorted by
    variable; the canonical form has first nonzero F_p coordinate 1.
    """
    frequencies: Tuple[Tuple[int, int], ...]
    rhs: int

    @property
    def support(self) -> Scope:
        return tuple(v for v, _ in self.frequencies)

    @property
    def weight(self) -> int:
        return len(self.frequencies)

    def as_dict(self) -> Dict[int, int]:
        return dict(self.frequencies)

    def __str__(self) -> str:
        terms = " + ".join(f"Tr({c}*x{v})" for v, c in self.frequencies) or "0"
        return f"{terms} = {self.rhs}"


@dataclass
class ResolutionSystem:
    """Width-bounded closure of character equations with each derivation's parents"""
    spec: FieldSpec
    width: int
    equations: List[CharacterEquation] = field(default_factory=list)
    parents: Dict[CharacterEquation, Tuple[CharacterEquation, CharacterEquation, int]] = field(default_factory=dict)
    by_variable: Dict[int, List[CharacterEquation]] = field(default_factory=lambda: defaultdict(list))

    def add(self, eq: CharacterEquation,
            parents: Optional[Tuple[CharacterEquation, CharacterEquation, int]] = None) -> None:
        self.equations.append(eq)
        if parents is not None:
            self.parents[eq] = parents
        for v in eq.support:
            self.by_variable[v].append(eq)

    def supported_in(self, S: Iterable[int]) -> List[CharacterEquation]:
        S = set(S)
        seen = set()
        out = []
        for v in sorted(S):
            for eq in self.by_variable.get(v, ()):
                if eq not in seen and set(eq.support) <= S:
                    seen.add(eq)
                    out.append(eq)
        return out

    def derivation(self, eq: CharacterEquation) -> List[Dict[str, object]]:
        """Records from the original equations down to eq"""
        out: List[Dict[str, object]] = []
        seen = set()

        def walk(e: CharacterEquation) -> None:
            if e in seen:
                return
            seen.add(e)
            if e in self.parents:
                a, b, scale = self.parents[e]
                walk(a)
                walk(b)
                out.append({"equation": str(e), "parents": [str(a), str(b)], "scale": scale})
            else:
                out.append({"equation": str(e), "parents": []})

        walk(eq)
        return out


@dataclass
class MomentMatrix:
    """
    Rows indexed by (S, alpha) with |S| <= t and X_S(alpha) > 0

    Rows with X_S(alpha) = 0 vanish identically and are left out. The
    backing family holds the 2t-local distribution the entries come from.
    """
    q: int
    t: int
    index: List[Tuple[Scope, Assignment]]
    entries: List[List[Fraction]]
    local: LocalDistributionFamily
    spec: Optional[FieldSpec] = None
    instance: Optional[CspInstance] = None

    @property
    def size(self) -> int:
        return len(self.index)

    def entry(self, i: int, j: int) -> Fraction:
        return self.entries[i][j]

    def position(self) -> Dict[Tuple[Scope, Assignment], int]:
        return {key: i for i, key in enumerate(self.index)}


def merge_assignments(S: Scope, alpha: Assignment, T: Scope,
                      beta: Assignment) -> Optional[Tuple[Scope, Assignment]]:
    """alpha on S joined with beta on T, or None when they disagree"""
    values: Dict[int, int] = dict(zip(S, alpha))
    for v, g in zip(T, beta):
        if values.setdefault(v, g) != g:
            return None
    U = tuple(sorted(values))
    return U, tuple(values[v] for v in U)


@dataclass(frozen=True)
class AffineSet:
    """
    particular + span_Fp(kernel) in F_p coordinates of the variables

    Coordinate v*m + b is digit b of variable v's value.
    """
    spec: FieldSpec
    variables: Scope
    particular: Tuple[int, ...]
    kernel: Tuple[Tuple[int, ...], ...]

    @property
    def dimension(self) -> int:
        return len(self.kernel)

    @property
    def size(self) -> int:
        return self.spec.p ** len(self.kernel)

    def elements(self) -> List[Assignment]:
        p, m = self.spec.p, self.spec.m
        out = []
        for coeffs in itertools.product(range(p), repeat=len(self.kernel)):
            vec = list(self.particular)
            for a, k in zip(coeffs, self.kernel):
                if a:
                    vec = [(x + a * y) % p for x, y in zip(vec, k)]
            out.append(tuple(from_digits(vec[i * m:(i + 1) * m], p) for i in range(len(self.variables))))
        return sorted(out)
