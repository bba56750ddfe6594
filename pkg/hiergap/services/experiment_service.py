from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

from ..models.errors import (
    CapExceededError, ClosureBudgetError, NonConformingCodeError, PredicateMismatchError, ResolutionAbortError,
    UncertifiedInstanceError, UsageError, ZeroNormalizerError,
)
from ..models.hierarchy import LocalDistributionFamily
from ..models.pydantic_models import (
    ExpansionMode, GapReport, Hierarchy, HvcReport, SystemConfig,
)
from ..models.schemas import CspInstance, Hypergraph, ParityCheckGraph
from ..utils.logging_config import get_logger
from ..utils.rng import stream
from ..utils.serialization import family_to_dict, moment_to_dict
from .coset_service import coset_service
from .csp_service import csp_service
from .distribution_service import distribution_service
from .ensemble_service import ensemble_service
from .lasserre_service import lasserre_service
from .sherali_adams_service import family_value, sherali_adams_service

logger = get_logger(__name__)


@dataclass
class ConstructionOutcome:
    solution: Dict[str, Any]
    verification: Any
    gap: GapReport
    collapsed: LocalDistributionFamily
    instance: CspInstance


def caps_snapshot() -> Dict[str, int]:
    config = SystemConfig.from_env()
    return {k: v for k, v in config.model_dump().items() if isinstance(v, int)}


class ExperimentService:
    """
    End-to-end runs tying the hierarchies to codes and hypergraphs

    Handles:
    - Injected error patterns on the all-zero codeword
    - Construct, verify and collapse for either hierarchy
    - Gap trials over sampled codes
    - Vertex cover gap runs
    """

    def __init__(self):
        self.brute_force_cap = csp_service.binary_scan_cap

    def error_pattern(self, n: int, weight: int, seed: int) -> List[int]:
        if not 0 <= weight <= n:
            raise UsageError(f"error weight {weight} outside 0..{n}")
        rng = stream(seed, "error-pattern")
        word = [0] * n
        for v in rng.choice(n, size=weight, replace=False):
            word[int(v)] = 1
        return word

    def construct(self, g: ParityCheckGraph, received: Sequence[int], hierarchy: Hierarchy, rounds: int,
                  seed: Optional[int] = None, brute_force: bool = False) -> ConstructionOutcome:
        """
        Build, verify and collapse a fractional solution for a received word

        The transmitted word is taken to be the all-zero codeword, so the
        error count is the weight of the received word.

        Raises:
            UncertifiedInstanceError: the closures do not peel (Sherali-Adams)
                or summand blocks share a variable pair (Lasserre)
        """
        instance = csp_service.build_nearest_codeword(g, received)
        if hierarchy == Hierarchy.SHERALI_ADAMS:
            table = distribution_service.select_sa_predicates(g.d_c)
            stretched, phi = csp_service.stretch(instance, table.q)
            attached = csp_service.attach_distributions(stretched, table)
            certificate = sherali_adams_service.certify_closures(attached, rounds)
            if not certificate.passed:
                raise UncertifiedInstanceError("closures do not peel", certificate.witness)
            family = sherali_adams_service.build_sa_solution(attached, rounds)
            verification = sherali_adams_service.verify_family(family, attached)
            solution = family_to_dict(family)
            collapsed = csp_service.collapse_local(family, phi)
        elif hierarchy == Hierarchy.LASSERRE:
            table = coset_service.select_lasserre_predicates(g.d_c)
            stretched, phi = csp_service.stretch(instance, table.q)
            attached = lasserre_service.arrange_constraint_tuples(
                csp_service.attach_cosets(stretched, table), seed or 0)
            shared = lasserre_service.shared_block_pairs(attached)
            if shared:
                raise UncertifiedInstanceError("summand blocks share variable pairs",
                                               {"pairs": [list(p) for p in shared[:20]]})
            mm = lasserre_service.build_lasserre_solution(attached, rounds)
            verification = lasserre_service.verify_lasserre(mm)
            solution = moment_to_dict(mm)
            collapsed = csp_service.collapse_local(mm.local, phi)
        else:
            raise UsageError(f"construction is defined for sa and lasserre, not {hierarchy.value}")

        value = family_value(collapsed, instance)
        errors = sum(received)
        integral = None
        if brute_force and g.n <= self.brute_force_cap:
            best = csp_service.brute_force_optimum(instance)
            integral = None if best is None else best[0]
        normalized = value / g.n
        gap = GapReport(instance={"n": g.n, "m": g.m, "d_v": g.d_v, "d_c": g.d_c, "code_seed": g.seed},
                        hierarchy=hierarchy, rounds=rounds, value_absolute=value, value_normalized=normalized,
                        integral_optimum=integral, errors=errors,
                        decoder_fails=normalized < Fraction(errors, g.n),
                        verified=verification.passed, seed=seed, caps=caps_snapshot())
        logger.info("construction finished", hierarchy=hierarchy.value, n=g.n, rounds=rounds,
                    value=normalized, verified=gap.verified, decoder_fails=gap.decoder_fails)
        return ConstructionOutcome(solution=solution, verification=verification, gap=gap, collapsed=collapsed,
                                   instance=attached)

    def gap_trial(self, n: int, d_v: int, d_c: int, hierarchy: Hierarchy, rounds: int, errors: int,
                  seed: int, s_max: int = 0, alpha: Fraction = Fraction(9, 4),
                  boundary: bool = True, single_flip: bool = True) -> Dict[str, Any]:
        """
        One sampled code, one injected pattern; a flat row for the trial table

        Codes with degrees outside the predicate tables are redrawn from
        derived seeds. With s_max, a code whose expansion is not certified
        up to s_max checks gives an aborted row and is never built.
        """
        row: Dict[str, Any] = {"seed": seed, "n": n, "d_v": d_v, "d_c": d_c, "hierarchy": hierarchy.value,
                               "rounds": rounds, "errors": errors}
        try:
            g, redraws = ensemble_service.sample_conforming_ldpc(n, d_v, d_c, seed)
        except NonConformingCodeError as exc:
            row.update({"status": "aborted", "reason": str(exc)})
            return row
        row.update({"code_seed": g.seed, "redraws": redraws})
        if s_max:
            report = ensemble_service.check_expansion(g.checks, alpha, s_max, mode=ExpansionMode.EXHAUSTIVE,
                                                      boundary=boundary)
            row["expansion_certified"] = report.certified
            if not report.certified:
                row.update({"status": "aborted", "reason": "expansion not certified"})
                return row
        received = self.error_pattern(n, errors, seed)
        try:
            outcome = self.construct(g, received, hierarchy, rounds, seed=seed)
        except (CapExceededError, ClosureBudgetError, PredicateMismatchError, ResolutionAbortError,
                UncertifiedInstanceError, ZeroNormalizerError) as exc:
            row.update({"status": "aborted", "reason": str(exc)})
            return row
        gap = outcome.gap
        row.update({"status": "ok", "verified": gap.verified, "value": str(gap.value_normalized),
                    "decoder_fails": gap.decoder_fails})
        if max(len(c) for c in g.checks) > sherali_adams_service.feldman_degree_cap:
            return row
        if hierarchy == Hierarchy.SHERALI_ADAMS:
            _, point = sherali_adams_service.sa_to_feldman(outcome.collapsed, g, received)
            row.update({"feldman_feasible": point.feasible, "feldman_objective": str(point.objective)})
        if single_flip:
            position = self.single_flip_position(g, seed)
            flipped = [0] * n
            flipped[position] = 1
            decode = sherali_adams_service.lp_decode(g, flipped)
            row.update({"weight_one_position": position, "weight_one_decoded": decode.success})
        return row

    def single_flip_position(self, g: ParityCheckGraph, seed: int) -> int:
        """A seeded variable of full degree; collapsed variables can have twins"""
        degree = [0] * g.n
        for check in g.checks:
            for v in check:
                degree[v] += 1
        full = [v for v in range(g.n) if degree[v] == g.d_v] or list(range(g.n))
        return full[int(stream(seed, "single-flip").integers(len(full)))]

    def hvc_run(self, n: int, k: int, beta, epsilon, rounds: int, seed: int,
                max_overlap: Optional[int] = None) -> HvcReport:
        """Integral cover bound against the collapsed Lasserre value on one sampled hypergraph"""
        h = ensemble_service.sample_hypergraph(n, beta, k, seed, max_overlap=max_overlap)
        return self.hvc_report(h, epsilon, rounds)

    def hvc_report(self, h: Hypergraph, epsilon, rounds: int) -> HvcReport:
        uncovered = ensemble_service.min_uncovered_subset(h, epsilon, h.seed or 0)
        integral = None
        if h.n <= self.brute_force_cap:
            best = csp_service.brute_force_optimum(csp_service.hvc_instance(h))
            integral = None if best is None else best[0]
        value = normalized = verified = reason = None
        try:
            _, report, value = lasserre_service.hvc_lasserre(h, rounds)
            normalized = value / h.n
            verified = report.passed
        except (ResolutionAbortError, CapExceededError) as exc:
            reason = str(exc)
        return HvcReport(n=h.n, k=h.k, edges=len(h.edges), seed=h.seed, epsilon=Fraction(str(epsilon)),
                         uncovered=uncovered, integral_optimum=integral, lasserre_value=value,
                         lasserre_value_normalized=normalized, lasserre_verified=verified, abort_reason=reason)


experiment_service = ExperimentService()
