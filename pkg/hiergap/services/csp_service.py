import itertools
from dataclasses import replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from ..models.errors import CapExceededError, PredicateMismatchError, UsageError
from ..models.hierarchy import LocalDistributionFamily, MomentMatrix
from ..models.pydantic_models import PredicateKind
from ..models.schemas import (
    Assignment, Constraint, CspInstance, Evaluation, Hypergraph, ParityCheckGraph, PredicateTable,
    StretchMap, kind_accepts,
)
from ..utils.logging_config import get_logger, log_certification_event
from .coset_service import coset_service
from .distribution_service import distribution_service
from .field_service import field_service

logger = get_logger(__name__)

ZERO = Fraction(0)


class CspService:
    """
    Min-Ones instances, stretching and collapsing

    Handles:
    - Nearest Codeword and hypergraph vertex cover instances
    - Alphabet stretching and payload attachment
    - Collapsing local distributions and moment matrices back to bits
    - Exact evaluation and brute-force optima
    """

    def __init__(self):
        self.binary_scan_cap = 24
        self.product_scan_cap = 10 ** 7
        logger.info("CSP service initialized")

    # Instances

    def build_nearest_codeword(self, g: ParityCheckGraph, received: Sequence[int]) -> CspInstance:
        """
        One parity constraint per check over the flip pattern

        A check is odd when the received bits inside it sum to 1 over F_2,
        so f satisfies every constraint iff received + f is a codeword.
        """
        if len(received) != g.n:
            raise UsageError(f"received word has length {len(received)}, code has {g.n} variables")
        if any(b not in (0, 1) for b in received):
            raise UsageError("received word must be binary")
        syndrome = g.syndrome(received)
        constraints = tuple(Constraint(kind=PredicateKind.ODD if s else PredicateKind.EVEN, variables=check)
                            for s, check in zip(syndrome, g.checks))
        return CspInstance(n=g.n, alphabet=2, constraints=constraints, received=tuple(received))

    def hvc_instance(self, h: Hypergraph) -> CspInstance:
        """Min-Ones over covers: every edge needs at least one chosen vertex"""
        constraints = tuple(Constraint(kind=PredicateKind.AT_LEAST_ONE_ZERO, variables=e) for e in h.edges)
        return CspInstance(n=h.n, alphabet=2, constraints=constraints)

    def stretch(self, instance: CspInstance, q: int) -> Tuple[CspInstance, StretchMap]:
        """
        Same constraints over {0..q-1}, a tuple satisfying a stretched
        predicate iff its image under phi satisfies the binary one
        """
        if q < 2:
            raise UsageError("stretched alphabet needs at least two symbols")
        if instance.stretched:
            raise UsageError("instance is already stretched")
        if instance.explicit:
            raise UsageError("explicit predicates cannot be stretched")
        stretched = CspInstance(n=instance.n, alphabet=q, constraints=instance.constraints,
                                stretched=True, received=instance.received)
        return stretched, StretchMap(q=q)

    def _required_keys(self, instance: CspInstance) -> List[Tuple[int, PredicateKind]]:
        return sorted({(len(c.variables), c.kind) for c in instance.constraints}, key=lambda k: (k[0], k[1].value))

    def attach_distributions(self, instance: CspInstance, table: PredicateTable) -> CspInstance:
        """Bind certified distributions; every payload must live inside its predicate"""
        if not instance.stretched or instance.alphabet != table.q:
            raise PredicateMismatchError(f"table is over q={table.q}, instance alphabet {instance.alphabet}")
        for key in self._required_keys(instance):
            if key not in table.entries:
                raise PredicateMismatchError(f"no distribution for arity {key[0]} kind {key[1].value}")
            if not distribution_service.verify_parity_support(table.entries[key], key[1]):
                raise PredicateMismatchError(f"distribution for {key} leaves its predicate")
        log_certification_event("distribution_support", True, q=table.q, keys=len(table.entries))
        return replace(instance, distributions=dict(table.entries))

    def attach_cosets(self, instance: CspInstance, table: PredicateTable) -> CspInstance:
        if not instance.stretched or instance.alphabet != table.q:
            raise PredicateMismatchError(f"table is over q={table.q}, instance alphabet {instance.alphabet}")
        for key in self._required_keys(instance):
            if key not in table.entries:
                raise PredicateMismatchError(f"no coset for arity {key[0]} kind {key[1].value}")
            report = table.reports.get(key) or coset_service.verify_coset(table.entries[key])
            if not report.parity_ok:
                raise PredicateMismatchError(f"coset for {key} leaves its predicate")
        log_certification_event("coset_support", True, q=table.q, keys=len(table.entries))
        return replace(instance, cosets=dict(table.entries))

    # Collapsing

    def collapse_local(self, family: LocalDistributionFamily, phi: StretchMap) -> LocalDistributionFamily:
        """X_S(beta) = sum of X'_S(alpha) over alpha with phi(alpha) = beta"""
        if family.q != phi.q:
            raise UsageError(f"family is over q={family.q}, map over q={phi.q}")
        out = LocalDistributionFamily(q=2, t=family.t, n=family.n)
        for S in family.sets():
            table: Dict[Assignment, Fraction] = {}
            for alpha, p in family.marginal(S).items():
                beta = tuple(phi(g) for g in alpha)
                table[beta] = table.get(beta, ZERO) + p
            out.add(S, table, family.provenance.get(S))
        return out

    def collapse_moment(self, mm: MomentMatrix, phi: StretchMap) -> MomentMatrix:
        """
        Sum the stretched blocks: the Gram matrix of the summed vectors

        Returns:
            binary MomentMatrix backed by collapse_local of the stretched
            family
        """
        if mm.q != phi.q:
            raise UsageError(f"moment matrix is over q={mm.q}, map over q={phi.q}")
        rows: Dict[Tuple, int] = {}
        target = []
        for S, alpha in mm.index:
            key = (S, tuple(phi(g) for g in alpha))
            if key not in rows:
                rows[key] = len(rows)
            target.append(rows[key])
        size = len(rows)
        entries = [[ZERO] * size for _ in range(size)]
        for i, row in enumerate(mm.entries):
            ti = target[i]
            out = entries[ti]
            for j, value in enumerate(row):
                if value:
                    out[target[j]] += value
        return MomentMatrix(q=2, t=mm.t, index=list(rows), entries=entries,
                            local=self.collapse_local(mm.local, phi),
                            spec=field_service.field_of_order(2), instance=None)

    # Evaluation

    def evaluate(self, instance: CspInstance, assignment: Sequence[int]) -> Evaluation:
        if len(assignment) != instance.n:
            raise UsageError(f"assignment has length {len(assignment)}, instance has {instance.n} variables")
        violated = tuple(i for i, c in enumerate(instance.constraints)
                         if not instance.satisfies(i, [assignment[v] for v in c.variables]))
        ones = sum(instance.marked(g) for g in assignment)
        return Evaluation(satisfied=not violated, ones=ones, violated=violated)

    def brute_force_optimum(self, instance: CspInstance) -> Optional[Tuple[int, Tuple[int, ...]]]:
        """
        Fewest marked coordinates over satisfying assignments

        Binary instances are scanned in Gray-code order with incremental
        constraint bookkeeping; larger alphabets by plain enumeration.

        Returns:
            (optimum, an optimal assignment), or None when unsatisfiable
        """
        n = instance.n
        if instance.alphabet == 2 and not instance.stretched:
            if n > self.binary_scan_cap:
                raise CapExceededError("binary scan variables", self.binary_scan_cap, n)
            return self._gray_scan(instance)
        states = instance.alphabet ** n
        if states > self.product_scan_cap:
            raise CapExceededError("assignment enumeration", self.product_scan_cap, states)
        best = None
        for assignment in itertools.product(range(instance.alphabet), repeat=n):
            result = self.evaluate(instance, assignment)
            if result.satisfied and (best is None or result.ones < best[0]):
                best = (result.ones, tuple(assignment))
        return best

    def _gray_scan(self, instance: CspInstance) -> Optional[Tuple[int, Tuple[int, ...]]]:
        n = instance.n
        touching = instance.constraints_of()
        counts = [0] * len(instance.constraints)
        x = [0] * n
        sat = [instance.satisfies(i, [0] * len(c.variables)) for i, c in enumerate(instance.constraints)]
        unsatisfied = sat.count(False)
        ones = 0
        best = (0, tuple(x)) if unsatisfied == 0 else None

        for step in range(1, 2 ** n):
            v = (step & -step).bit_length() - 1
            x[v] ^= 1
            delta = 1 if x[v] else -1
            ones += delta
            for i in touching[v]:
                counts[i] += delta
                if i in instance.explicit:
                    now = instance.satisfies(i, [x[u] for u in instance.constraints[i].variables])
                else:
                    now = kind_accepts(instance.constraints[i].kind, counts[i])
                if now != sat[i]:
                    unsatisfied += -1 if now else 1
                    sat[i] = now
            if unsatisfied == 0 and (best is None or ones < best[0]):
                best = (ones, tuple(x))
        return best


csp_service = CspService()
