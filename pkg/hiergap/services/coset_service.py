import itertools
import os
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Set, Tuple

from ..models.errors import CapExceededError, NotPrimePowerError, PredicateMismatchError
from ..models.field import FieldSpec
from ..models.pydantic_models import CosetReport, PredicateKind
from ..models.schemas import CosetPredicate, EvaluationSet, PredicateTable, kind_accepts
from ..utils.logging_config import get_logger, log_certification_event
from .field_service import field_service, prime_power

logger = get_logger(__name__)

Vector = Tuple[int, ...]


@lru_cache(maxsize=256)
def _annihilator(c: CosetPredicate) -> Tuple[Vector, ...]:
    return tuple(field_service.annihilator(c.spec, c.generators, c.k, fq_linear=True))


def _xor_kind(a: PredicateKind, b: PredicateKind) -> PredicateKind:
    if PredicateKind.AT_LEAST_ONE_ZERO in (a, b):
        raise ValueError("direct sums are defined for parity kinds only")
    return PredicateKind.EVEN if a == b else PredicateKind.ODD


class CosetService:
    """
    Cosets of balanced pairwise independent subgroups

    Handles:
    - The two-variable, even-line and trivariate evaluation sets
    - Cosets built from linear-form evaluations and their direct sums
    - Exact certification by enumeration or projection rank
    - Predicate selection for the Lasserre construction and vertex cover
    """

    def __init__(self):
        self.enumeration_cap = 10 ** 6
        self.count_cap = int(os.getenv("HIERGAP_COSET_COUNT_CAP", str(2 * 10 ** 7)))
        logger.info("Coset service initialized", enumeration_cap=self.enumeration_cap)

    def _char2_field(self, q: int) -> FieldSpec:
        pm = prime_power(q)
        if pm is None or pm[0] != 2:
            raise NotPrimePowerError(f"{q} is not a power of 2")
        return field_service.field_new(2, pm[1])

    def coset_from_points(self, points: EvaluationSet, shift: Optional[Vector],
                          kind: PredicateKind, label: str) -> CosetPredicate:
        """Subgroup of evaluations (l(x))_{x in E} of the linear forms l, plus shift"""
        spec = points.spec
        k = len(points.points)
        generators = tuple(tuple(pt[i] for pt in points.points) for i in range(points.dim))
        return CosetPredicate(spec=spec, k=k, generators=generators,
                              shift=tuple(shift) if shift is not None else (0,) * k,
                              kind=kind, label=label, eval_set=points)

    # Constructions

    def build_H1(self, q: int) -> CosetPredicate:
        """
        Evaluations of (x, y) -> ax + by on {(0,1)} and {(1,a)}

        Over characteristic 2 every element has an odd zero count; over
        odd characteristic k = q+1 is even and each nonzero element has
        exactly one zero, so the kind is at least one zero.
        """
        spec = field_service.field_of_order(q)
        points = EvaluationSet(spec=spec, dim=2,
                               points=((0, 1),) + tuple((1, a) for a in range(q)))
        self._require(self.certify_no_scalar_multiples(points), "H1 points contain scalar multiples")
        kind = PredicateKind.ODD if spec.p == 2 else PredicateKind.AT_LEAST_ONE_ZERO
        return self.coset_from_points(points, None, kind, "H1")

    def smallest_rootless(self, spec: FieldSpec) -> int:
        """Smallest eta with a^2 + a + eta rootless"""
        for eta in range(spec.q):
            if all(spec.add_index(spec.add_index(spec.mul_index(a, a), a), eta) for a in range(spec.q)):
                return eta
        raise AssertionError(f"every eta has a root in GF({spec.q})")

    def build_even_point_set(self, q: int) -> EvaluationSet:
        """
        {(0,0), (0,1)} together with f(a)(1,a), f(a) = (a^2+a+eta)^-1

        Every line of the plane meets this set in 0 or 2 points.
        """
        spec = self._char2_field(q)
        eta = self.smallest_rootless(spec)
        points = [(0, 0), (0, 1)]
        for a in range(q):
            f = spec.inv_index(spec.add_index(spec.add_index(spec.mul_index(a, a), a), eta))
            points.append((f, spec.mul_index(f, a)))
        point_set = EvaluationSet(spec=spec, dim=2, points=tuple(points))
        self._require(self.certify_line_incidence(point_set), "even point set meets a line in an odd count")
        logger.debug("even point set built", q=q, eta=eta)
        return point_set

    def build_H2(self, q: int) -> CosetPredicate:
        point_set = self.build_even_point_set(q)
        spec = point_set.spec
        punctured = EvaluationSet(spec=spec, dim=2,
                                  points=tuple(pt for pt in point_set.points if pt != (0, 0)))
        self._require(self.certify_one_per_direction(punctured), "punctured set misses a direction")
        k = len(punctured.points)
        shift = tuple(spec.neg_index(1) for _ in range(k))
        return self.coset_from_points(punctured, shift, PredicateKind.EVEN, "H2")

    def build_H3(self, q: int) -> CosetPredicate:
        """Trivariate evaluations on {(1,a,a)} and {(0,b,b+1)}"""
        spec = self._char2_field(q)
        points = tuple((1, a, a) for a in range(q)) + tuple((0, b, spec.add_index(b, 1)) for b in range(q))
        point_set = EvaluationSet(spec=spec, dim=3, points=points)
        self._require(self.certify_no_scalar_multiples(point_set), "H3 points contain scalar multiples")
        return self.coset_from_points(point_set, None, PredicateKind.EVEN, "H3")

    def trivial(self, spec: FieldSpec) -> CosetPredicate:
        return CosetPredicate(spec=spec, k=0, generators=(), shift=(), kind=PredicateKind.EVEN, label="")

    def direct_sum(self, *cosets: CosetPredicate) -> CosetPredicate:
        """
        Concatenate cosets coordinate-blockwise

        Kinds combine by parity: equal parities give even, different odd.
        """
        if not cosets:
            raise ValueError("direct sum of nothing")
        spec = cosets[0].spec
        for c in cosets:
            if c.spec != spec:
                raise PredicateMismatchError("direct sum mixes fields")
        parts = [c for c in cosets if c.k > 0]
        if not parts:
            return self.trivial(spec)
        if len(parts) == 1:
            return parts[0]

        k = sum(c.k for c in parts)
        generators: List[Vector] = []
        shift: List[int] = []
        blocks: List[Tuple[int, int]] = []
        kind = PredicateKind.EVEN
        offset = 0
        for c in parts:
            for g in c.generators:
                generators.append((0,) * offset + tuple(g) + (0,) * (k - offset - c.k))
            shift.extend(c.shift)
            for start, length in c.summand_blocks:
                blocks.append((offset + start, length))
            kind = _xor_kind(kind, c.kind)
            offset += c.k
        label = "+".join(c.label for c in parts)
        return CosetPredicate(spec=spec, k=k, generators=tuple(generators), shift=tuple(shift),
                              kind=kind, label=label, blocks=tuple(blocks))

    # Enumeration

    def fp_generators(self, c: CosetPredicate) -> List[Vector]:
        return field_service.fq_scalings(c.spec, c.generators)

    def subgroup_dimension(self, c: CosetPredicate) -> int:
        """F_p-dimension of the underlying subgroup"""
        if not c.generators:
            return 0
        return field_service.fp_dimension(c.spec, self.fp_generators(c), c.k)

    def size(self, c: CosetPredicate) -> int:
        return c.spec.p ** self.subgroup_dimension(c)

    def elements(self, c: CosetPredicate) -> List[Vector]:
        size = self.size(c)
        if size > self.enumeration_cap:
            raise CapExceededError("coset enumeration", self.enumeration_cap, size)
        spec = c.spec
        subgroup = field_service.span(spec, self.fp_generators(c), c.k) if c.generators else [(0,) * c.k]
        return [tuple(spec.add_index(a, s) for a, s in zip(x, c.shift)) for x in subgroup]

    def annihilator(self, c: CosetPredicate) -> List[Vector]:
        """F_p basis of the characters vanishing on the subgroup, memoized per coset"""
        return list(_annihilator(c))

    def contains(self, c: CosetPredicate, values: Sequence[int]) -> bool:
        """Membership through the annihilator equations"""
        spec = c.spec
        diff = tuple(spec.sub_index(v, s) for v, s in zip(values, c.shift))
        for eq in self.annihilator(c):
            if field_service.pairing(spec, eq, diff):
                return False
        return True

    # Certification

    def verify_coset(self, c: CosetPredicate, elements: Optional[Sequence[Vector]] = None) -> CosetReport:
        """
        Certify closure, balance, pairwise independence and parity

        `elements` is a claimed member list, such as a table read back from
        disk; by default the span of the generators is enumerated. Closure
        is tested on the members themselves.

        Pair marginals are counted over the enumerated coset when that is
        cheap; otherwise each pair projection of the subgroup is shown to
        be onto G^2 by an F_p rank computation, which forces uniformity.
        """
        spec, k, q = c.spec, c.k, c.spec.q
        claimed = elements is not None
        elements = [tuple(e) for e in elements] if claimed else self.elements(c)
        size = len(elements)
        witnesses: List[Dict] = []

        members = {tuple(spec.sub_index(x, s) for x, s in zip(e, c.shift)) for e in elements}
        closed = (0,) * k in members and len(members) == size
        if not closed:
            witnesses.append({"check": "closure", "zero": (0,) * k in members, "distinct": len(members)})
        elif size * size * k <= self.count_cap:
            closed = self._closed_under_sums(spec, members, witnesses)
        elif size * max(1, len(self.fp_generators(c))) * k <= self.count_cap:
            closed = self._closed_under_steps(spec, members, self.fp_generators(c), witnesses)
        elif claimed:
            raise CapExceededError("coset closure check", self.count_cap, size * size * k)

        parity_ok = True
        for e in elements:
            zeros = sum(1 for g in e if g == 0)
            if not kind_accepts(c.kind, zeros):
                parity_ok = False
                witnesses.append({"check": "parity", "element": list(e), "zeros": zeros})
                break

        if size * k * k <= self.count_cap:
            balanced, pairwise = self._count_marginals(elements, k, q, witnesses)
            method = "enumeration"
        else:
            balanced, pairwise = self._projection_ranks(c, witnesses)
            method = "projection_rank"

        report = CosetReport(label=c.label, q=q, k=k, size=size, subgroup_closed=closed,
                             pairwise_independent=pairwise, balanced=balanced, parity_ok=parity_ok,
                             method=method, witnesses=witnesses[:20])
        log_certification_event("coset", report.passed, label=c.label, q=q, k=k, method=method)
        return report

    def _closed_under_sums(self, spec: FieldSpec, members: Set[Vector], witnesses: List[Dict]) -> bool:
        ordered = sorted(members)
        for i, a in enumerate(ordered):
            for b in ordered[i:]:
                total = tuple(spec.add_index(x, y) for x, y in zip(a, b))
                if total not in members:
                    witnesses.append({"check": "closure", "element": list(a), "other": list(b)})
                    return False
        return True

    def _closed_under_steps(self, spec: FieldSpec, members: Set[Vector], generators: Sequence[Vector],
                            witnesses: List[Dict]) -> bool:
        for g in generators:
            for h in members:
                if tuple(spec.add_index(a, b) for a, b in zip(h, g)) not in members:
                    witnesses.append({"check": "closure", "element": list(h), "generator": list(g)})
                    return False
        return True

    def _count_marginals(self, elements: List[Vector], k: int, q: int, witnesses: List[Dict]) -> Tuple[bool, bool]:
        size = len(elements)
        single = [[0] * q for _ in range(k)]
        pair = [[[0] * (q * q) for _ in range(k)] for _ in range(k)]
        for e in elements:
            for i in range(k):
                ei = e[i]
                single[i][ei] += 1
                row = pair[i]
                base = ei * q
                for j in range(i + 1, k):
                    row[j][base + e[j]] += 1
        balanced = size % q == 0 and all(single[i][g] * q == size for i in range(k) for g in range(q))
        pairwise = True
        for i in range(k):
            for j in range(i + 1, k):
                for cell, count in enumerate(pair[i][j]):
                    if count * q * q != size:
                        pairwise = False
                        witnesses.append({"check": "pairwise", "i": i, "j": j,
                                          "g": cell // q, "h": cell % q, "count": count})
                        break
        if not balanced:
            witnesses.append({"check": "balance"})
        return balanced, pairwise

    def _projection_ranks(self, c: CosetPredicate, witnesses: List[Dict]) -> Tuple[bool, bool]:
        spec, k, m = c.spec, c.k, c.spec.m
        fp = field_service.prime_field(spec)
        coords = [field_service.to_fp_coordinates(spec, g) for g in self.fp_generators(c)]

        def rank(positions: Sequence[int]) -> int:
            cols = [v * m + b for v in positions for b in range(m)]
            rows = [[row[col] for col in cols] for row in coords]
            return field_service.rank_indices(fp, rows, len(cols))

        balanced = all(rank([i]) == m for i in range(k))
        pairwise = True
        for i, j in itertools.combinations(range(k), 2):
            if rank([i, j]) != 2 * m:
                pairwise = False
                witnesses.append({"check": "pairwise_rank", "i": i, "j": j})
                break
        return balanced, pairwise

    def certify_no_scalar_multiples(self, points: EvaluationSet) -> bool:
        """No point is zero or a scalar multiple of another"""
        spec = points.spec
        seen: Set[Vector] = set()
        for pt in points.points:
            if not any(pt):
                return False
            line = {tuple(spec.mul_index(lam, x) for x in pt) for lam in range(1, spec.q)}
            if line & seen:
                return False
            seen.update(line)
        return True

    def certify_one_per_direction(self, points: EvaluationSet) -> bool:
        """Exactly one point on each line through the origin"""
        spec = points.spec
        directions = (spec.q ** points.dim - 1) // (spec.q - 1)
        return len(points.points) == directions and self.certify_no_scalar_multiples(points)

    def lines(self, spec: FieldSpec) -> List[Tuple[int, int, int]]:
        """All q^2 + q lines ax + by = c with (a, b) normalized"""
        out = []
        for c in range(spec.q):
            out.append((1, 0, c))
            for a in range(spec.q):
                out.append((a, 1, c))
        return out

    def certify_line_incidence(self, points: EvaluationSet) -> bool:
        spec = points.spec
        for a, b, c in self.lines(spec):
            hits = sum(1 for x, y in points.points
                       if spec.add_index(spec.mul_index(a, x), spec.mul_index(b, y)) == c)
            if hits not in (0, 2):
                logger.debug("line incidence witness", line=(a, b, c), hits=hits)
                return False
        return True

    def certify_root_counts(self, q: int) -> bool:
        """Every trivariate form has 0, 2, q or 2q roots on the H3 points"""
        c = self.build_H3(q)
        spec = c.spec
        allowed = {0, 2, q, 2 * q}
        for alpha, beta, gamma in itertools.product(range(q), repeat=3):
            roots = 0
            for x, y, z in c.eval_set.points:
                value = spec.add_index(spec.add_index(spec.mul_index(alpha, x), spec.mul_index(beta, y)),
                                       spec.mul_index(gamma, z))
                roots += value == 0
            if roots not in allowed:
                logger.debug("root count witness", form=(alpha, beta, gamma), roots=roots)
                return False
        return True

    def certify_double_roots(self, q: int) -> bool:
        """a^2 + c1 a + c0 has a double root exactly when c1 = 0"""
        spec = self._char2_field(q)
        for c1, c0 in itertools.product(range(q), repeat=2):
            # (a - r)^2 = a^2 - 2r a + r^2
            double = any(spec.neg_index(spec.add_index(r, r)) == c1 and spec.mul_index(r, r) == c0
                         for r in range(q))
            if double != (c1 == 0):
                return False
        return True

    def _require(self, ok: bool, message: str) -> None:
        if not ok:
            raise AssertionError(message)

    # Table dispatch

    def select_lasserre_predicates(self, d_c: int) -> PredicateTable:
        """
        Cosets for checks of degree d_c = 3q + 3 and d_c - 2, q = 2^i

        Returns:
            PredicateTable with H1^3, H1^2+H2, H1+H3 and H2+H3
        """
        if d_c < 9 or (d_c - 3) % 3 != 0:
            raise ValueError("d_c must be 3*2^i+3 with i >= 1")
        q = (d_c - 3) // 3
        pm = prime_power(q)
        if pm is None or pm[0] != 2:
            raise ValueError("d_c must be 3*2^i+3 with i >= 1")
        h1, h2, h3 = self.build_H1(q), self.build_H2(q), self.build_H3(q)
        entries = {
            (d_c, PredicateKind.ODD): self.direct_sum(h1, h1, h1),
            (d_c, PredicateKind.EVEN): self.direct_sum(h1, h1, h2),
            (d_c - 2, PredicateKind.ODD): self.direct_sum(h1, h3),
            (d_c - 2, PredicateKind.EVEN): self.direct_sum(h2, h3),
        }
        reports = {}
        for (arity, kind), coset in entries.items():
            if coset.k != arity or coset.kind != kind:
                raise AssertionError(f"table entry {coset.label} has arity {coset.k}, kind {coset.kind.value}")
            report = self.verify_coset(coset)
            if not report.passed:
                raise PredicateMismatchError(f"coset {coset.label} failed certification")
            reports[(arity, kind)] = report
        logger.info("Lasserre predicates selected", d_c=d_c, q=q)
        return PredicateTable(q=q, entries=entries, reports=reports)

    def hvc_predicate(self, q: int) -> CosetPredicate:
        """H1 used as a cover predicate: every element has a zero coordinate"""
        h1 = self.build_H1(q)
        coset = CosetPredicate(spec=h1.spec, k=h1.k, generators=h1.generators, shift=h1.shift,
                               kind=PredicateKind.AT_LEAST_ONE_ZERO, label="H1", eval_set=h1.eval_set)
        report = self.verify_coset(coset)
        if not report.passed:
            raise PredicateMismatchError("vertex cover predicate failed certification")
        return coset


coset_service = CosetService()
