import itertools
import os
from fractions import Fraction
from math import comb
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from ..models.errors import CapExceededError, PredicateMismatchError
from ..models.pydantic_models import PiReport, PredicateKind, format_rational
from ..models.schemas import (
    AtomDistribution, Assignment, BinaryWeightDistribution, FeasibilityResult,
    LinearProgram, PredicateTable, Relation, kind_accepts,
)
from ..utils.logging_config import get_logger, log_certification_event
from .lp_service import lp_service

logger = get_logger(__name__)

F = Fraction

# Which closed-form family covers (k parity, q offset)
CASE_OFFSETS = {"i": 2, "ii": 3, "iii": 4}


def closed_form_weights(case: str, kind: PredicateKind, k: int) -> Dict[int, Fraction]:
    """
    The closed-form zero-count weights of the three symmetric families

    Case i: even k >= 4, q = k-2. Case ii: odd k >= 5, q = k-3.
    Case iii: even k >= 6, q = k-4. Classes that coincide (k = 4 in
    case i, where 3 = k-1) have their masses summed.
    """
    k = F(k)
    if case == "i":
        if kind == PredicateKind.ODD:
            terms = [
                (1, (2 * k**3 - 13 * k**2 + 25 * k - 12) / (2 * k**3 - 12 * k**2 + 24 * k - 16)),
                (3, (k - 1) / (2 * k**2 - 8 * k + 8)),
                (int(k) - 1, (k - 3) / (k**3 - 6 * k**2 + 12 * k - 8)),
            ]
        else:
            terms = [
                (0, (4 * k**2 - 23 * k + 32) / (8 * k**2 - 32 * k + 32)),
                (2, (2 * k**2 - 5 * k) / (4 * k**2 - 16 * k + 16)),
                (4, k / (8 * k**2 - 32 * k + 32)),
            ]
    elif case == "ii":
        if kind == PredicateKind.ODD:
            terms = [
                (1, (k**3 - 8 * k**2 + 16 * k) / (k**3 - 7 * k**2 + 15 * k - 9)),
                (3, (k**2 - 4 * k) / (k**3 - 9 * k**2 + 27 * k - 27)),
                (int(k), (k**2 - 10 * k + 27) / (k**4 - 10 * k**3 + 36 * k**2 - 54 * k + 27)),
            ]
        else:
            terms = [
                (0, (2 * k**2 - 17 * k + 36) / (4 * k**2 - 24 * k + 36)),
                (2, (k**2 - 4 * k) / (2 * k**2 - 12 * k + 18)),
                (4, k / (4 * k**2 - 24 * k + 36)),
            ]
    elif case == "iii":
        if kind == PredicateKind.ODD:
            terms = [
                (1, (2 * k**3 - 23 * k**2 + 75 * k - 48) / (2 * k**3 - 20 * k**2 + 64 * k - 64)),
                (3, (3 * k**2 - 19 * k + 16) / (2 * k**3 - 24 * k**2 + 96 * k - 128)),
                (int(k) - 1, (k**2 - 13 * k + 48) / (k**4 - 14 * k**3 + 72 * k**2 - 160 * k + 128)),
            ]
        else:
            terms = [
                (0, (4 * k**2 - 45 * k + 128) / (8 * k**2 - 64 * k + 128)),
                (2, (2 * k**2 - 11 * k) / (4 * k**2 - 32 * k + 64)),
                (4, 3 * k / (8 * k**2 - 64 * k + 128)),
            ]
    else:
        raise ValueError(f"unknown closed-form case {case!r}")

    weights: Dict[int, Fraction] = {}
    for r, w in terms:
        weights[r] = weights.get(r, F(0)) + w
    return weights


def closed_form_case(k: int, q: int) -> str:
    """Which family covers arity k over alphabet q"""
    if k % 2 == 0 and k >= 4 and q == k - 2:
        return "i"
    if k % 2 == 1 and k >= 5 and q == k - 3:
        return "ii"
    if k % 2 == 0 and k >= 6 and q == k - 4:
        return "iii"
    raise ValueError(f"no closed-form family covers k={k}, q={q}")


def weight_system(k: int, q: int, support: Sequence[int]) -> Tuple[List[List[Fraction]], List[Fraction]]:
    """Mass, balance and pair equations for zero-count classes in `support`"""
    support = sorted(set(support))
    A = [
        [F(1) for _ in support],
        [F(r) for r in support],
        [F(r * (r - 1)) for r in support],
    ]
    b = [F(1), F(k, q), F(k * (k - 1), q * q)]
    return A, b


def allowed_classes(k: int, kind: PredicateKind) -> List[int]:
    return [r for r in range(k + 1) if kind_accepts(kind, r)]


class DistributionService:
    """
    Balanced pairwise independent distributions for parity predicates

    Handles:
    - The q = k-1 constructions and the three closed-form families
    - Lifting binary laws to larger alphabets
    - Exact verification of balance, pairwise independence and parity
    - The weight-class feasibility oracle with Farkas certificates
    - Predicate selection per check degree
    """

    def __init__(self):
        self.atom_cap = int(os.getenv("HIERGAP_ATOM_CAP", str(10 ** 6)))
        # cell updates allowed for verification straight from atoms
        self.atom_scan_cap = 2 * 10 ** 6
        logger.info("Distribution service initialized", atom_cap=self.atom_cap)

    # Constructions

    def odd_dist_q_eq_kminus1(self, k: int) -> AtomDistribution:
        """All-zero with probability p^2, else 1 - e_i uniformly (p = 1/(k-1)), lifted"""
        if k < 3 or k % 2 == 0:
            raise ValueError("the odd construction needs odd k >= 3")
        p = F(1, k - 1)
        weights = BinaryWeightDistribution(k=k, weights={k: p * p, 1: 1 - p * p})
        return self.lift_binary(weights, k - 1)

    def even_dist_q_eq_kminus1(self, k: int) -> AtomDistribution:
        """1 - e_i - e_j with probability p^2 per pair, else all-ones, lifted"""
        if k < 3:
            raise ValueError("the even construction needs k >= 3")
        p = F(1, k - 1)
        pairs = p * p * comb(k, 2)
        weights = BinaryWeightDistribution(k=k, weights={2: pairs, 0: 1 - pairs})
        if weights.weights[0] != (1 - p) / 2:
            raise AssertionError("all-ones mass disagrees with (1-p)/2")
        return self.lift_binary(weights, k - 1)

    def dist_from_closed_form(self, k: int, q: int, kind: PredicateKind) -> AtomDistribution:
        """
        Closed-form symmetric family for (k, q, kind), lifted and certified

        Args:
            k: arity
            q: alphabet size (k-2, k-3 or k-4 depending on parity of k)
            kind: odd or even

        Returns:
            AtomDistribution whose weight classes are the closed forms
        """
        if kind == PredicateKind.AT_LEAST_ONE_ZERO:
            raise ValueError("closed forms exist only for parity kinds")
        case = closed_form_case(k, q)
        weights = BinaryWeightDistribution(k=k, weights=closed_form_weights(case, kind, k))
        dist = self.lift_binary(weights, q)
        report = self.verify_pi(dist)
        parity = self.verify_parity_support(dist, kind)
        if not (report.passed and parity):
            raise AssertionError(f"closed form ({case}, {kind.value}, k={k}) failed certification")
        logger.debug("closed form built", case=case, k=k, q=q, kind=kind.value,
                     atoms=dist.atom_count, materialized=dist.materialized)
        return dist

    def lift_binary(self, dist: Union[BinaryWeightDistribution, Mapping[Assignment, Fraction]],
                    q: int) -> AtomDistribution:
        """
        Replace each 1-coordinate by a uniform nonzero symbol

        Args:
            dist: symmetric zero-count law, or explicit binary atoms
            q: target alphabet size

        Returns:
            AtomDistribution; symmetric inputs keep their weight classes and
            are materialized only below the atom cap
        """
        if q < 2:
            raise ValueError("alphabet must have at least two symbols")
        if isinstance(dist, BinaryWeightDistribution):
            k = dist.k
            classes = dist
            count = sum(comb(k, r) * (q - 1) ** (k - r) for r in dist.support())
            if count > self.atom_cap:
                return AtomDistribution(q=q, k=k, atoms=None, weight_classes=classes)
            template = AtomDistribution(q=q, k=k, atoms=None, weight_classes=classes)
            atoms: Dict[Assignment, Fraction] = {}
            for r in dist.support():
                density = template.class_density(r)
                for zeros in itertools.combinations(range(k), r):
                    ones = [i for i in range(k) if i not in zeros]
                    for values in itertools.product(range(1, q), repeat=k - r):
                        t = [0] * k
                        for i, g in zip(ones, values):
                            t[i] = g
                        atoms[tuple(t)] = density
            return AtomDistribution(q=q, k=k, atoms=atoms, weight_classes=classes)

        items = [(tuple(t), F(p)) for t, p in dist.items() if p]
        if not items:
            raise ValueError("empty binary distribution")
        k = len(items[0][0])
        count = sum((q - 1) ** sum(t) for t, _ in items)
        if count > self.atom_cap:
            raise CapExceededError("lifted atoms", self.atom_cap, count)
        atoms = {}
        for t, p in items:
            ones = [i for i, b in enumerate(t) if b]
            share = p / (q - 1) ** len(ones)
            for values in itertools.product(range(1, q), repeat=len(ones)):
                out = [0] * k
                for i, g in zip(ones, values):
                    out[i] = g
                key = tuple(out)
                atoms[key] = atoms.get(key, F(0)) + share
        return AtomDistribution(q=q, k=k, atoms=atoms)

    # Verification

    def verify_pi(self, dist: AtomDistribution, method: Optional[str] = None) -> PiReport:
        """
        Exact balance and pairwise independence

        Args:
            dist: the distribution
            method: "atoms" or "weight_classes"; chosen by size when omitted

        Returns:
            PiReport with a witness (i, j, g, g', value) per failing cell
        """
        if method is None:
            cells = dist.atom_count * max(1, dist.k * (dist.k - 1) // 2) if dist.materialized else None
            if dist.weight_classes is not None and (cells is None or cells > self.atom_scan_cap):
                method = "weight_classes"
            else:
                method = "atoms"
        if method == "weight_classes":
            report = self._verify_by_classes(dist)
        else:
            report = self._verify_by_atoms(dist)
        log_certification_event("balanced_pairwise_independent", report.balanced and report.pairwise,
                                q=dist.q, k=dist.k, method=report.method)
        return report

    def _verify_by_atoms(self, dist: AtomDistribution) -> PiReport:
        q, k = dist.q, dist.k
        single = [[F(0)] * q for _ in range(k)]
        pair: Dict[Tuple[int, int, int, int], Fraction] = {}
        for t, p in dist.support():
            for i in range(k):
                single[i][t[i]] += p
                for j in range(i + 1, k):
                    key = (i, j, t[i], t[j])
                    pair[key] = pair.get(key, F(0)) + p

        witnesses = []
        balanced = True
        for i in range(k):
            for g in range(q):
                if single[i][g] != F(1, q):
                    balanced = False
                    witnesses.append({"i": i, "g": g, "value": format_rational(single[i][g])})
        pairwise = True
        target = F(1, q * q)
        for i in range(k):
            for j in range(i + 1, k):
                for g in range(q):
                    for h in range(q):
                        value = pair.get((i, j, g, h), F(0))
                        if value != target:
                            pairwise = False
                            if len(witnesses) < 20:
                                witnesses.append({"i": i, "j": j, "g": g, "h": h,
                                                  "value": format_rational(value)})
        return PiReport(q=q, k=k, balanced=balanced, pairwise=pairwise,
                        method="atoms", witnesses=witnesses)

    def _verify_by_classes(self, dist: AtomDistribution) -> PiReport:
        q, k = dist.q, dist.k
        a = dist.weight_classes.weights
        nonzero = q - 1

        p_zero = sum((w * r / k for r, w in a.items()), F(0))
        p_nonzero = sum((w * (k - r) / k / nonzero for r, w in a.items()), F(0))
        witnesses = []
        balanced = p_zero == F(1, q) and p_nonzero == F(1, q)
        if not balanced:
            witnesses.append({"i": 0, "g": 0, "value": format_rational(p_zero)})

        pairwise = True
        if k >= 2:
            pairs = k * (k - 1)
            p00 = sum((w * r * (r - 1) / pairs for r, w in a.items()), F(0))
            p0g = sum((w * r * (k - r) / pairs / nonzero for r, w in a.items()), F(0))
            pgh = sum((w * (k - r) * (k - r - 1) / pairs / (nonzero * nonzero) for r, w in a.items()), F(0))
            target = F(1, q * q)
            for (g, h), value in (((0, 0), p00), ((0, 1), p0g), ((1, 1), pgh)):
                if value != target:
                    pairwise = False
                    witnesses.append({"i": 0, "j": 1, "g": g, "h": h, "value": format_rational(value)})
        return PiReport(q=q, k=k, balanced=balanced, pairwise=pairwise,
                        method="weight_classes", witnesses=witnesses)

    def verify_parity_support(self, dist: AtomDistribution, kind: PredicateKind) -> bool:
        """Every supported tuple's zero count matches the kind"""
        if dist.materialized:
            for t, _ in dist.support():
                zeros = sum(1 for g in t if g == 0)
                if not kind_accepts(kind, zeros):
                    logger.debug("parity witness", atom=list(t), zeros=zeros, kind=kind.value)
                    return False
            return True
        return all(kind_accepts(kind, r) for r in dist.weight_classes.support())

    # Feasibility oracle

    def pi_feasibility(self, k: int, q: int, kind: PredicateKind) -> FeasibilityResult:
        """
        Decide whether a symmetric balanced pairwise independent law exists

        Symmetrizing any such law over coordinate permutations and nonzero
        relabelings keeps it feasible, so the zero-count LP is exact.

        Returns:
            FeasibilityResult with the lifted distribution, or a Farkas
            certificate over the mass/balance/pair rows
        """
        classes = allowed_classes(k, kind)
        lp = LinearProgram()
        cols = {r: lp.add_variable(f"a_{r}") for r in classes}
        A, b = weight_system(k, q, classes)
        for name, row, rhs in zip(("mass", "balance", "pairs"), A, b):
            lp.add_constraint({cols[r]: coef for r, coef in zip(sorted(classes), row)},
                              Relation.EQ, rhs, name)
        result = lp_service.feasible(lp)
        if result.certificate is not None:
            log_certification_event("pi_infeasible", True, k=k, q=q, kind=kind.value,
                                    certificate={k_: format_rational(v) for k_, v in
                                                 result.certificate.multipliers.items()})
            return FeasibilityResult(feasible=False, k=k, q=q, kind=kind,
                                     certificate=result.certificate)
        weights = BinaryWeightDistribution(
            k=k, weights={r: result.assignment[cols[r]] for r in classes if result.assignment[cols[r]]}
        )
        dist = self.lift_binary(weights, q)
        return FeasibilityResult(feasible=True, k=k, q=q, kind=kind, weights=weights, distribution=dist)

    # Table dispatch

    def select_sa_predicates(self, d_c: int) -> PredicateTable:
        """
        Distributions for checks of degree d_c and d_c - 2

        Args:
            d_c: check degree, at least 5

        Returns:
            PredicateTable over q = d_c - 3 (odd d_c) or d_c - 4 (even d_c),
            every entry certified
        """
        if d_c < 5:
            raise ValueError("check degree must be at least 5")
        entries: Dict[Tuple[int, PredicateKind], AtomDistribution] = {}
        if d_c % 2 == 1:
            q = d_c - 3
            for kind in (PredicateKind.ODD, PredicateKind.EVEN):
                entries[(d_c, kind)] = self.dist_from_closed_form(d_c, q, kind)
            entries[(d_c - 2, PredicateKind.ODD)] = self.odd_dist_q_eq_kminus1(d_c - 2)
            entries[(d_c - 2, PredicateKind.EVEN)] = self.even_dist_q_eq_kminus1(d_c - 2)
        else:
            q = d_c - 4
            for kind in (PredicateKind.ODD, PredicateKind.EVEN):
                entries[(d_c, kind)] = self.dist_from_closed_form(d_c, q, kind)
                entries[(d_c - 2, kind)] = self.dist_from_closed_form(d_c - 2, q, kind)

        reports = {}
        for (arity, kind), dist in entries.items():
            report = self.verify_pi(dist)
            report.parity_ok = self.verify_parity_support(dist, kind)
            if not report.passed:
                raise PredicateMismatchError(f"entry ({arity}, {kind.value}) failed certification")
            reports[(arity, kind)] = report
        logger.info("Sherali-Adams predicates selected", d_c=d_c, q=q, entries=len(entries))
        return PredicateTable(q=q, entries=entries, reports=reports)


distribution_service = DistributionService()
