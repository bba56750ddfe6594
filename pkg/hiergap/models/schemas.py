from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Tuple

from .errors import PredicateMismatchError
from .field import FieldSpec
from .pydantic_models import LPStatus, PredicateKind

Assignment = Tuple[int, ...]


def kind_accepts(kind: PredicateKind, count: int) -> bool:
    """Whether a tuple with `count` marked coordinates belongs to the predicate kind"""
    if kind == PredicateKind.ODD:
        return count % 2 == 1
    if kind == PredicateKind.EVEN:
        return count % 2 == 0
    return count >= 1


# Linear Programs
class Relation:
    LE = "<="
    EQ = "="
    GE = ">="


@dataclass(frozen=True)
class LinearConstraint:
    coeffs: Mapping[int, Fraction]  # sparse: variable index -> coefficient
    relation: str
    rhs: Fraction
    name: str = ""


@dataclass
class LinearProgram:
    """Minimize objective . x subject to constraints and per-variable bounds"""
    variables: List[str] = field(default_factory=list)
    objective: Dict[int, Fraction] = field(default_factory=dict)
    constraints: List[LinearConstraint] = field(default_factory=list)
    lower: List[Optional[Fraction]] = field(default_factory=list)
    upper: List[Optional[Fraction]] = field(default_factory=list)

    def add_variable(self, name: str, lower: Optional[Fraction] = Fraction(0),
                     upper: Optional[Fraction] = None, cost: Fraction = Fraction(0)) -> int:
        self.variables.append(name)
        self.lower.append(None if lower is None else Fraction(lower))
        self.upper.append(None if upper is None else Fraction(upper))
        if cost:
            self.objective[len(self.variables) - 1] = Fraction(cost)
        return len(self.variables) - 1

    def add_constraint(self, coeffs: Mapping[int, Fraction], relation: str, rhs,
                       name: str = "") -> None:
        if relation not in (Relation.LE, Relation.EQ, Relation.GE):
            raise ValueError(f"unknown relation {relation!r}")
        for j in coeffs:
            if not 0 <= j < len(self.variables):
                raise ValueError(f"constraint {name or len(self.constraints)} names unknown variable {j}")
        cleaned = {j: Fraction(c) for j, c in coeffs.items() if c}
        self.constraints.append(LinearConstraint(cleaned, relation, Fraction(rhs),
                                                 name or f"c{len(self.constraints)}"))

    @property
    def size(self) -> Tuple[int, int]:
        return len(self.constraints), len(self.variables)


@dataclass(frozen=True)
class FarkasCertificate:
    """
    Multipliers y over standardized rows A x = b, x >= 0 with y.A <= 0 and y.b > 0

    rows are labelled by the constraint or bound they came from.
    """
    multipliers: Dict[str, Fraction]
    rhs_value: Fraction


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    value: Optional[Fraction] = None
    assignment: Optional[Tuple[Fraction, ...]] = None
    certificate: Optional[FarkasCertificate] = None

    @property
    def optimal(self) -> bool:
        return self.status == LPStatus.OPTIMAL


# Distributions
@dataclass(frozen=True)
class BinaryWeightDistribution:
    """Symmetric law on {0,1}^k, weights keyed by the number of zero coordinates"""
    k: int
    weights: Mapping[int, Fraction]

    def __post_init__(self):
        if any(not 0 <= r <= self.k for r in self.weights):
            raise ValueError("weight class outside 0..k")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("negative weight")
        if sum(self.weights.values(), Fraction(0)) != 1:
            raise ValueError("weights must sum to exactly 1")

    def support(self) -> List[int]:
        return sorted(r for r, w in self.weights.items() if w)


@dataclass(frozen=True)
class AtomDistribution:
    """
    Exact distribution on {0..q-1}^k

    Symmetric families keep their weight classes; their atoms are
    materialized only when there are few enough of them, and prob()
    falls back to the class density otherwise.
    """
    q: int
    k: int
    atoms: Optional[Mapping[Assignment, Fraction]] = None
    weight_classes: Optional[BinaryWeightDistribution] = None

    def __post_init__(self):
        if self.atoms is None:
            if self.weight_classes is None:
                raise ValueError("distribution needs atoms or weight classes")
            return
        total = Fraction(0)
        for t, pr in self.atoms.items():
            if len(t) != self.k or any(not 0 <= g < self.q for g in t):
                raise ValueError(f"atom {t} is not a tuple in {{0..{self.q - 1}}}^{self.k}")
            if pr < 0:
                raise ValueError(f"negative probability on {t}")
            total += pr
        if total != 1:
            raise ValueError(f"atom probabilities sum to {total}, not 1")

    @property
    def materialized(self) -> bool:
        return self.atoms is not None

    def class_density(self, zeros: int) -> Fraction:
        weight = self.weight_classes.weights.get(zeros, Fraction(0))
        if not weight:
            return Fraction(0)
        return weight / (comb(self.k, zeros) * (self.q - 1) ** (self.k - zeros))

    def prob(self, t: Assignment) -> Fraction:
        if self.atoms is not None:
            return self.atoms.get(tuple(t), Fraction(0))
        return self.class_density(sum(1 for g in t if g == 0))

    def support(self) -> Iterator[Tuple[Assignment, Fraction]]:
        if self.atoms is None:
            raise ValueError("atoms were not materialized")
        return ((t, p) for t, p in self.atoms.items() if p)

    @property
    def atom_count(self) -> int:
        if self.atoms is not None:
            return sum(1 for p in self.atoms.values() if p)
        return sum(comb(self.k, r) * (self.q - 1) ** (self.k - r)
                   for r in self.weight_classes.support())


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    k: int
    q: int
    kind: PredicateKind
    weights: Optional[BinaryWeightDistribution] = None
    distribution: Optional[AtomDistribution] = None
    certificate: Optional[FarkasCertificate] = None


@dataclass(frozen=True)
class PredicateTable:
    """Certified payloads keyed by (arity, kind) with the alphabet they live on"""
    q: int
    entries: Mapping[Tuple[int, PredicateKind], object]
    reports: Mapping[Tuple[int, PredicateKind], object] = field(default_factory=dict)


# Cosets
@dataclass(frozen=True)
class EvaluationSet:
    spec: FieldSpec
    dim: int
    points: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if len(set(self.points)) != len(self.points):
            raise ValueError("evaluation points must be distinct")
        if any(len(pt) != self.dim for pt in self.points):
            raise ValueError("point of wrong dimension")


@dataclass(frozen=True)
class CosetPredicate:
    """
    shift + span over F_q of the generator rows

    A generator row lists one linear form's values at every coordinate;
    for eval-set cosets there is one row per coordinate of the points.
    """
    spec: FieldSpec
    k: int
    generators: Tuple[Tuple[int, ...], ...]
    shift: Tuple[int, ...]
    kind: PredicateKind
    label: str = ""
    eval_set: Optional[EvaluationSet] = None
    blocks: Tuple[Tuple[int, int], ...] = ()  # (start, length) of each summand

    def __post_init__(self):
        if len(self.shift) != self.k or any(len(g) != self.k for g in self.generators):
            raise ValueError("generator or shift length differs from arity")

    @property
    def summand_blocks(self) -> Tuple[Tuple[int, int], ...]:
        return self.blocks or ((0, self.k),)


# Graphs
@dataclass(frozen=True)
class ParityCheckGraph:
    n: int
    d_v: int
    d_c: int
    checks: Tuple[Tuple[int, ...], ...]  # sorted variable lists per check
    seed: Optional[int] = None

    @property
    def m(self) -> int:
        return len(self.checks)

    def variable_neighbors(self) -> List[List[int]]:
        out: List[List[int]] = [[] for _ in range(self.n)]
        for j, check in enumerate(self.checks):
            for v in check:
                out[v].append(j)
        return out

    def syndrome(self, word: Sequence[int]) -> Tuple[int, ...]:
        return tuple(sum(word[v] for v in check) % 2 for check in self.checks)


@dataclass(frozen=True)
class Hypergraph:
    n: int
    k: int
    edges: Tuple[Tuple[int, ...], ...]
    seed: Optional[int] = None

    def __post_init__(self):
        for e in self.edges:
            if len(set(e)) != self.k or len(e) != self.k:
                raise ValueError(f"edge {e} does not have {self.k} distinct vertices")


# Constraint satisfaction
@dataclass(frozen=True)
class Constraint:
    kind: PredicateKind
    variables: Tuple[int, ...]


@dataclass(frozen=True)
class StretchMap:
    """phi: symbol 0 goes to 1, every other symbol to 0"""
    q: int

    def __call__(self, g: int) -> int:
        return 1 if g == 0 else 0

    def preimage(self, bit: int) -> List[int]:
        return [0] if bit == 1 else list(range(1, self.q))


@dataclass(frozen=True)
class CspInstance:
    """
    Min-Ones instance with typed constraints

    Binary instances count ones; stretched instances count the
    coordinates phi sends to 1, i.e. zeros. Attached payloads
    (distributions for Sherali-Adams, cosets for Lasserre) are keyed by
    (arity, kind).
    """
    n: int
    alphabet: int
    constraints: Tuple[Constraint, ...]
    stretched: bool = False
    received: Optional[Tuple[int, ...]] = None
    distributions: Mapping[Tuple[int, PredicateKind], AtomDistribution] = field(default_factory=dict)
    cosets: Mapping[Tuple[int, PredicateKind], CosetPredicate] = field(default_factory=dict)
    explicit: Mapping[int, FrozenSet[Assignment]] = field(default_factory=dict)

    def __post_init__(self):
        for i, c in enumerate(self.constraints):
            if len(set(c.variables)) != len(c.variables):
                raise ValueError(f"constraint {i} repeats a variable")
            if any(not 0 <= v < self.n for v in c.variables):
                raise ValueError(f"constraint {i} names a variable outside 0..{self.n - 1}")

    def marked(self, g: int) -> int:
        if self.stretched:
            return 1 if g == 0 else 0
        return 1 if g == 1 else 0

    def satisfies(self, index: int, values: Sequence[int]) -> bool:
        """Membership of the constraint's values in its (possibly explicit) predicate"""
        c = self.constraints[index]
        if index in self.explicit:
            return tuple(values) in self.explicit[index]
        return kind_accepts(c.kind, sum(self.marked(g) for g in values))

    def distribution_for(self, c: Constraint) -> AtomDistribution:
        key = (len(c.variables), c.kind)
        if key not in self.distributions:
            raise PredicateMismatchError(f"no distribution attached for arity {key[0]} kind {key[1].value}")
        return self.distributions[key]

    def coset_for(self, c: Constraint) -> CosetPredicate:
        key = (len(c.variables), c.kind)
        if key not in self.cosets:
            raise PredicateMismatchError(f"no coset attached for arity {key[0]} kind {key[1].value}")
        return self.cosets[key]

    def constraints_of(self) -> List[List[int]]:
        """Constraint indices touching each variable"""
        out: List[List[int]] = [[] for _ in range(self.n)]
        for i, c in enumerate(self.constraints):
            for v in c.variables:
                out[v].append(i)
        return out


@dataclass(frozen=True)
class Evaluation:
    """Outcome of one assignment: every constraint met, and the Min-Ones count"""
    satisfied: bool
    ones: int
    violated: Tuple[int, ...] = ()
