import copy
import itertools
import math
import os
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..models.errors import CapExceededError, ClosureBudgetError, MissingEntryError, UsageError, ZeroNormalizerError
from ..models.hierarchy import (
    CanonicalDistribution, Factor, FeldmanPoint, LocalDistributionFamily, Scope, eliminate, peel, scope_of,
)
from ..models.pydantic_models import (
    CertificationCheck, ClosureCertificate, DecodeResult, FamilyReport, FeldmanPointReport, LPStatus, format_rational,
)
from ..models.schemas import Constraint, CspInstance, LinearProgram, ParityCheckGraph, Relation
from ..utils.logging_config import get_logger, log_certification_event, log_construction_event
from .distribution_service import distribution_service
from .lp_service import lp_service

logger = get_logger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


def check_consistency(family: LocalDistributionFamily) -> Tuple[bool, int, Optional[Dict[str, object]]]:
    """
    Marginalization equalities between stored nested sets

    Each stored T is compared with its stored one-smaller subsets when
    all of them are stored (the rest follows by chaining), otherwise with
    every stored proper subset.

    Returns:
        (passed, pairs checked, first failing (S, T, alpha) or None)
    """
    stored = set(family.entries)
    checked = 0
    for T in family.sets():
        if not T:
            continue
        covers = [T[:i] + T[i + 1:] for i in range(len(T))]
        if all(S in stored for S in covers):
            subsets = covers
        else:
            subsets = [S for r in range(len(T)) for S in itertools.combinations(T, r) if S in stored]
        table_T = family.entries[T]
        for S in subsets:
            checked += 1
            positions = [T.index(v) for v in S]
            projected: Dict[tuple, Fraction] = {}
            for alpha, p in table_T.items():
                key = tuple(alpha[i] for i in positions)
                projected[key] = projected.get(key, ZERO) + p
            table_S = family.entries[S]
            for alpha in set(projected) | set(table_S):
                if projected.get(alpha, ZERO) != table_S.get(alpha, ZERO):
                    witness = {"S": list(S), "T": list(T), "alpha": list(alpha),
                               "marginal": format_rational(projected.get(alpha, ZERO)),
                               "stored": format_rational(table_S.get(alpha, ZERO))}
                    return False, checked, witness
    return True, checked, None


def family_value(family: LocalDistributionFamily, instance: CspInstance) -> Fraction:
    """Sum over variables of the probability of a marked symbol"""
    total = ZERO
    for v in range(instance.n):
        for g, p in family.marginal((v,)).items():
            if instance.marked(g[0]):
                total += p
    return total


def family_checks(family: LocalDistributionFamily, instance: CspInstance) -> List[CertificationCheck]:
    """The t-local validity checks shared by both hierarchies"""
    checks = []

    empty = family.entries.get((), {})
    checks.append(CertificationCheck(check_name="empty_set", passed=empty == {(): ONE},
                                     details="X of the empty set is 1"))

    negative = next(((S, a) for S, table in family.entries.items() for a, p in table.items() if p < 0), None)
    checks.append(CertificationCheck(
        check_name="nonnegative", passed=negative is None,
        witness=None if negative is None else {"S": list(negative[0]), "alpha": list(negative[1])},
        severity="info" if negative is None else "error"))

    consistent, pairs, witness = check_consistency(family)
    checks.append(CertificationCheck(check_name="consistency", passed=consistent,
                                     details=f"{pairs} nested pairs", witness=witness,
                                     severity="info" if consistent else "error"))

    support_witness = None
    for i, c in enumerate(instance.constraints):
        S = scope_of(c.variables)
        if not family.has(S):
            continue
        where = {v: S.index(v) for v in c.variables}
        for alpha in family.marginal(S):
            if not instance.satisfies(i, [alpha[where[v]] for v in c.variables]):
                support_witness = {"constraint": i, "alpha": list(alpha)}
                break
        if support_witness:
            break
    checks.append(CertificationCheck(check_name="constraint_support", passed=support_witness is None,
                                     witness=support_witness,
                                     severity="info" if support_witness is None else "error"))

    uniform = Fraction(1, family.q)
    balance_witness = None
    for v in range(instance.n):
        if not family.has((v,)):
            balance_witness = {"variable": v, "missing": True}
            break
        for g in range(family.q):
            if family.singleton(v, g) != uniform:
                balance_witness = {"variable": v, "symbol": g, "value": format_rational(family.singleton(v, g))}
                break
        if balance_witness:
            break
    checks.append(CertificationCheck(check_name="balance", passed=balance_witness is None,
                                     details=f"every singleton marginal 1/{family.q}",
                                     witness=balance_witness,
                                     severity="info" if balance_witness is None else "warning"))
    return checks


class SheraliAdamsService:
    """
    Sherali-Adams fractional solutions for stretched parity instances

    Handles:
    - Expansion closures and canonical product distributions
    - Building and verifying t-local distribution families
    - The Feldman LP, exact LP decoding and the family-to-LP mapping
    """

    def __init__(self):
        self.closure_budget = int(os.getenv("HIERGAP_CLOSURE_BUDGET", "30"))
        self.dense_state_cap = int(os.getenv("HIERGAP_DENSE_STATE_CAP", str(10 ** 7)))
        self.set_cap = 10 ** 6
        self.feldman_degree_cap = 14
        logger.info("Sherali-Adams service initialized", closure_budget=self.closure_budget)

    # Closures and canonical distributions

    def expansion_closure(self, S: Iterable[int], instance: CspInstance,
                          budget: Optional[int] = None) -> Scope:
        """
        Grow S until no constraint straddles it badly

        A constraint meeting the closure is absorbed (all its variables
        added) when more than two of its variables are inside, or when at
        most two are outside.

        Raises:
            ClosureBudgetError: the closure outgrew the budget
        """
        budget = self.closure_budget if budget is None else budget
        closure = set(S)
        touching = instance.constraints_of()
        frontier = sorted(closure)
        while frontier:
            candidates = sorted({i for v in frontier for i in touching[v]})
            frontier = []
            for i in candidates:
                variables = instance.constraints[i].variables
                inside = sum(1 for v in variables if v in closure)
                outside = len(variables) - inside
                if outside == 0 or inside == 0:
                    continue
                if inside > 2 or outside <= 2:
                    added = [v for v in variables if v not in closure]
                    closure.update(added)
                    frontier.extend(added)
                    if len(closure) > budget:
                        raise ClosureBudgetError(len(closure), budget)
        return scope_of(closure)

    def constraint_factor(self, instance: CspInstance, c: Constraint) -> Factor:
        dist = instance.distribution_for(c)
        if not dist.materialized:
            raise CapExceededError("materialized atoms", distribution_service.atom_cap, dist.atom_count)
        return Factor(scope=tuple(c.variables), table=dict(dist.support()))

    def canonical_distribution(self, closure: Iterable[int], instance: CspInstance) -> CanonicalDistribution:
        """
        Normalized product of the attached distributions of the
        constraints lying inside the closure

        Raises:
            ZeroNormalizerError: the product has no mass
        """
        base = scope_of(closure)
        inside = set(base)
        chosen = tuple(i for i, c in enumerate(instance.constraints) if set(c.variables) <= inside)
        factors = [self.constraint_factor(instance, instance.constraints[i]) for i in chosen]
        remaining, normalizer = peel(factors, (), instance.alphabet)
        if remaining:
            normalizer *= eliminate(remaining, (), cap=self.dense_state_cap).total()
        if normalizer == 0:
            raise ZeroNormalizerError(f"closure {list(base)} has no satisfying product mass")
        return CanonicalDistribution(base=base, constraints=chosen, factors=tuple(factors),
                                     normalizer=normalizer, q=instance.alphabet)

    # Families

    def query_sets(self, instance: CspInstance, t: int) -> List[Scope]:
        """Every set of at most t variables plus every constraint's variable set"""
        count = sum(math.comb(instance.n, r) for r in range(t + 1))
        if count > self.set_cap:
            raise CapExceededError("local distribution sets", self.set_cap, count)
        sets = {S for r in range(t + 1) for S in itertools.combinations(range(instance.n), r)}
        sets.update(scope_of(c.variables) for c in instance.constraints)
        return sorted(sets, key=lambda s: (len(s), s))

    def build_sa_solution(self, instance: CspInstance, t: int,
                          sets: Optional[Sequence[Iterable[int]]] = None) -> LocalDistributionFamily:
        """
        Balanced t-local family from canonical distributions of closures

        Args:
            instance: stretched instance with attached distributions
            t: round count
            sets: sets to materialize (default: all of size <= t and every
                constraint's set)

        Returns:
            LocalDistributionFamily with provenance closures
        """
        if not instance.stretched:
            raise UsageError("Sherali-Adams construction needs a stretched instance")
        if t < 1:
            raise UsageError("round count must be positive")
        queried = self.query_sets(instance, t) if sets is None else sorted({scope_of(S) for S in sets} | {()})
        family = LocalDistributionFamily(q=instance.alphabet, t=t, n=instance.n)
        canonical: Dict[Scope, CanonicalDistribution] = {}
        largest = 0
        for S in queried:
            closure = self.expansion_closure(S, instance)
            largest = max(largest, len(closure))
            if closure not in canonical:
                canonical[closure] = self.canonical_distribution(closure, instance)
            family.add(S, canonical[closure].marginal(S), closure)
        log_construction_event("sherali_adams", n=instance.n, q=instance.alphabet, t=t,
                               sets=len(queried), closures=len(canonical), largest_closure=largest)
        return family

    def certify_closures(self, instance: CspInstance, t: int,
                         sets: Optional[Sequence[Iterable[int]]] = None) -> ClosureCertificate:
        """
        Show before building that the closure marginals will be consistent
        and balanced

        For every pair S < T the consistency check will compare, the
        constraints inside cl(T) but not inside cl(S) must peel off
        relative to cl(S); for every variable v, the constraints inside
        cl(v) must peel off relative to v.

        Raises:
            ClosureBudgetError: a closure outgrew the budget
        """
        if t < 1:
            raise UsageError("round count must be positive")
        queried = self.query_sets(instance, t) if sets is None else sorted({scope_of(S) for S in sets} | {()})
        closures = {S: self.expansion_closure(S, instance) for S in queried}
        factors: Dict[int, Factor] = {}
        inner: Dict[Scope, frozenset] = {}
        stuck_cache: Dict[Tuple[Scope, frozenset], List[int]] = {}

        def inside(closure: Scope) -> frozenset:
            if closure not in inner:
                members = set(closure)
                inner[closure] = frozenset(i for i, c in enumerate(instance.constraints)
                                           if set(c.variables) <= members)
            return inner[closure]

        def stuck(anchor: Scope, extra: frozenset) -> List[int]:
            key = (anchor, extra)
            if key not in stuck_cache:
                order = sorted(extra)
                for i in order:
                    if i not in factors:
                        factors[i] = self.constraint_factor(instance, instance.constraints[i])
                left, _ = peel([factors[i] for i in order], anchor, instance.alphabet)
                stuck_cache[key] = [i for i in order if any(f is factors[i] for f in left)]
            return stuck_cache[key]

        report = ClosureCertificate(t=t, sets=len(queried), closures=len(set(closures.values())))
        stored = set(queried)
        for T in queried:
            if len(T) < 2:
                continue
            covers = [T[:i] + T[i + 1:] for i in range(len(T))]
            if all(S in stored for S in covers):
                subsets = covers
            else:
                subsets = [S for r in range(1, len(T)) for S in itertools.combinations(T, r) if S in stored]
            for S in subsets:
                report.pairs_checked += 1
                outer, base = closures[T], closures[S]
                if outer == base:
                    continue
                if not set(base) <= set(outer):
                    report.witness = {"S": list(S), "T": list(T), "reason": "closures not nested"}
                    break
                left = stuck(base, inside(outer) - inside(base))
                if left:
                    report.witness = {"S": list(S), "T": list(T), "closure": list(outer), "constraints": left}
                    break
            if report.witness:
                break

        if report.witness is None:
            for v in range(instance.n):
                report.singletons_checked += 1
                closure = closures.get((v,)) or self.expansion_closure((v,), instance)
                left = stuck((v,), inside(closure))
                if left:
                    report.witness = {"variable": v, "closure": list(closure), "constraints": left}
                    break

        log_certification_event("closure_certificate", report.passed, t=t, sets=report.sets,
                                pairs=report.pairs_checked, witness=report.witness)
        return report

    def verify_family(self, family: LocalDistributionFamily, instance: CspInstance) -> FamilyReport:
        """
        Exact t-local validity: empty set, nonnegativity, nested
        marginals, constraint support and balance, plus the value
        """
        checks = family_checks(family, instance)
        value = family_value(family, instance)
        report = FamilyReport(checks=checks, value_absolute=value,
                              value_normalized=value / instance.n if instance.n else ZERO,
                              sets_checked=len(family.entries))
        log_certification_event("local_family", report.passed, q=family.q, t=family.t,
                                sets=len(family.entries), value=report.value_normalized,
                                failed=[c.check_name for c in checks if not c.passed])
        return report

    # Feldman LP

    def feldman_lp(self, g: ParityCheckGraph, received: Sequence[int]) -> LinearProgram:
        """
        Base LP: f_i in [0,1], w_{j,S} >= 0 for local flip sets S of the
        parity the received syndrome demands; minimize (1/n) sum f_i
        """
        if len(received) != g.n:
            raise UsageError(f"received word has length {len(received)}, code has {g.n} variables")
        widest = max((len(c) for c in g.checks), default=0)
        if widest > self.feldman_degree_cap:
            raise CapExceededError("Feldman check degree", self.feldman_degree_cap, widest)
        syndrome = g.syndrome(received)
        lp = LinearProgram()
        f = [lp.add_variable(f"f{i}", lower=0, upper=1, cost=Fraction(1, g.n)) for i in range(g.n)]
        for j, check in enumerate(g.checks):
            flips = [S for r in range(len(check) + 1) if r % 2 == syndrome[j]
                     for S in itertools.combinations(check, r)]
            w = {S: lp.add_variable(f"w{j}:" + ",".join(map(str, S))) for S in flips}
            lp.add_constraint({w[S]: ONE for S in flips}, Relation.EQ, 1, f"mass:{j}")
            for i in check:
                coeffs = {f[i]: ONE}
                for S in flips:
                    if i in S:
                        coeffs[w[S]] = -ONE
                lp.add_constraint(coeffs, Relation.EQ, 0, f"link:{j}:{i}")
        return lp

    def lp_decode(self, g: ParityCheckGraph, received: Sequence[int]) -> DecodeResult:
        """
        Exact LP decoding

        An integral optimum is checked for uniqueness by maximizing the L1
        distance to it over the optimal face; a fractional optimum is a
        failure whatever its uniqueness.
        """
        lp = self.feldman_lp(g, received)
        result = lp_service.solve(lp)
        if not result.optimal:
            return DecodeResult(status=result.status)
        flips = list(result.assignment[:g.n])
        integral = all(x in (ZERO, ONE) for x in flips)
        unique = False
        decoded = None
        if integral:
            face = copy.deepcopy(lp)
            face.add_constraint(dict(lp.objective), Relation.EQ, result.value, "optimal_face")
            # minimizing -|f - f*| is linear when f* is integral
            face.objective = {i: (ONE if flips[i] == ONE else -ONE) for i in range(g.n)}
            far = lp_service.solve(face)
            distance = sum((abs(far.assignment[i] - flips[i]) for i in range(g.n)), ZERO)
            unique = distance == 0
            decoded = [(b + int(x)) % 2 for b, x in zip(received, flips)]
        outcome = DecodeResult(status=LPStatus.OPTIMAL, value=result.value, integral=integral,
                               unique=unique, flips=flips, decoded=decoded if unique else None)
        logger.info("LP decoding finished", n=g.n, value=result.value, integral=integral, unique=unique)
        return outcome

    def sa_to_feldman(self, family: LocalDistributionFamily, g: ParityCheckGraph,
                      received: Sequence[int]) -> Tuple[FeldmanPoint, FeldmanPointReport]:
        """
        f_i = X_i(1) and w_{j,S} = X_{N(j)}(indicator of S)

        Raises:
            MissingEntryError: a check's variable set is not stored
        """
        if family.q != 2:
            raise UsageError("the Feldman mapping needs a binary family")
        lp = self.feldman_lp(g, received)
        f = tuple(family.singleton(i, 1) for i in range(g.n))
        w: Dict[Tuple[int, Tuple[int, ...]], Fraction] = {}
        values = [ZERO] * len(lp.variables)
        for i in range(g.n):
            values[i] = f[i]
        position = {name: k for k, name in enumerate(lp.variables)}
        for j, check in enumerate(g.checks):
            S_all = scope_of(check)
            if not family.has(S_all):
                raise MissingEntryError(f"check {j} set {list(S_all)} is not stored")
            table = family.marginal(S_all)
            for alpha, p in table.items():
                S = tuple(v for v, b in zip(S_all, alpha) if b)
                w[(j, S)] = w.get((j, S), ZERO) + p
                name = f"w{j}:" + ",".join(map(str, S))
                if name in position:
                    values[position[name]] += p
        violations = lp_service.check_point(lp, values)
        objective = sum((c * values[k] for k, c in lp.objective.items()), ZERO)
        report = FeldmanPointReport(feasible=not violations, objective=objective, violations=violations[:20])
        log_certification_event("feldman_point", report.feasible, objective=objective,
                                violations=len(violations))
        return FeldmanPoint(f=f, w=w), report


sherali_adams_service = SheraliAdamsService()
