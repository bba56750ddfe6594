import itertools
import math
import os
from collections import Counter
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.errors import CapExceededError, NonConformingCodeError, UsageError
from ..models.pydantic_models import (
    DegreeProfile, ExpansionMode, ExpansionReport, ExpansionViolation, UncoveredReport,
)
from ..models.schemas import Hypergraph, ParityCheckGraph
from ..utils.logging_config import get_logger, log_certification_event
from ..utils.rng import derived_seed, stream

logger = get_logger(__name__)


def _popcount(x: int) -> int:
    return bin(x).count("1")


class EnsembleService:
    """
    Random code and hypergraph ensembles

    Handles:
    - Socket-model (d_v, d_c) parity-check graphs with parity collapse
    - Degree profiles
    - Exhaustive and randomized expansion checks, plain and boundary
    - Random k-uniform hypergraphs and their uncovered-subset certificate
    """

    def __init__(self):
        self.subset_cap = int(os.getenv("HIERGAP_EXPANSION_SUBSET_CAP", str(10 ** 7)))
        self.s_cap = 12
        self.resample_attempts = int(os.getenv("HIERGAP_RESAMPLE_ATTEMPTS", "200"))
        self.violation_keep = 50
        logger.info("Ensemble service initialized", subset_cap=self.subset_cap)

    # LDPC ensemble

    def socket_permutation(self, n: int, d_v: int, d_c: int, seed: int) -> np.ndarray:
        """The socket matching: variable socket s meets check socket perm[s]"""
        if d_v < 1 or d_c < 1 or n < 1:
            raise UsageError("n, d_v and d_c must be positive")
        if (n * d_v) % d_c:
            raise UsageError(f"n*d_v = {n * d_v} is not divisible by d_c = {d_c}")
        rng = stream(seed, "ldpc-sockets")
        return rng.permutation(n * d_v)

    def socket_multiplicities(self, n: int, d_v: int, d_c: int, seed: int) -> Counter:
        perm = self.socket_permutation(n, d_v, d_c, seed)
        counts: Counter = Counter()
        for s, t in enumerate(perm):
            counts[(s // d_v, int(t) // d_c)] += 1
        return counts

    def sample_ldpc(self, n: int, d_v: int, d_c: int, seed: int) -> ParityCheckGraph:
        """
        Sample a parity-check graph from the socket model

        Args:
            n: variable count
            d_v: variable degree
            d_c: check degree
            seed: RNG seed

        Returns:
            ParityCheckGraph where variable i sits in check j iff the
            number of socket edges between them is odd
        """
        counts = self.socket_multiplicities(n, d_v, d_c, seed)
        m = n * d_v // d_c
        checks: List[List[int]] = [[] for _ in range(m)]
        for (v, j), mult in counts.items():
            if mult % 2:
                checks[j].append(v)
        graph = ParityCheckGraph(n=n, d_v=d_v, d_c=d_c,
                                 checks=tuple(tuple(sorted(c)) for c in checks), seed=seed)
        logger.debug("LDPC graph sampled", n=n, m=m, d_v=d_v, d_c=d_c, seed=seed)
        return graph

    def sample_conforming_ldpc(self, n: int, d_v: int, d_c: int, seed: int,
                               attempts: Optional[int] = None) -> Tuple[ParityCheckGraph, int]:
        """
        First code whose collapsed degrees the predicate tables cover

        The first draw uses seed itself; redraws use seeds derived from it.

        Returns:
            (graph, number of redraws)

        Raises:
            NonConformingCodeError: no draw conformed within the attempt budget
        """
        attempts = self.resample_attempts if attempts is None else attempts
        profile = None
        for attempt in range(attempts):
            code_seed = seed if attempt == 0 else derived_seed(seed, "ldpc-resample", attempt)
            g = self.sample_ldpc(n, d_v, d_c, code_seed)
            profile = self.degree_profile(g)
            if profile.conforms:
                if attempt:
                    logger.info("conforming code resampled", seed=seed, code_seed=code_seed, redraws=attempt)
                return g, attempt
        raise NonConformingCodeError(attempts, profile)

    def degree_profile(self, g: ParityCheckGraph) -> DegreeProfile:
        var_deg = [0] * g.n
        for check in g.checks:
            for v in check:
                var_deg[v] += 1
        variable_hist = Counter(var_deg)
        check_hist = Counter(len(c) for c in g.checks)
        conforms = (set(variable_hist) <= {g.d_v, g.d_v - 2}
                    and set(check_hist) <= {g.d_c, g.d_c - 2})
        return DegreeProfile(variable_degrees=dict(sorted(variable_hist.items())),
                             check_degrees=dict(sorted(check_hist.items())),
                             conforms=conforms)

    # Expansion

    def check_expansion(self, constraint_sets: Sequence[Sequence[int]], alpha, s_max: int,
                        mode: ExpansionMode = ExpansionMode.EXHAUSTIVE, boundary: bool = False,
                        seed: int = 0, restarts: int = 200) -> ExpansionReport:
        """
        Look for sets of at most s_max constraints that fail to expand

        A family of s constraints needs union size (or, with boundary, the
        count of variables in exactly one of them) at least
        sum of sizes minus alpha * s.

        Args:
            constraint_sets: variable sets of the constraints
            alpha: expansion parameter
            s_max: largest family size examined
            mode: exhaustive (certifies) or randomized (only refutes)
            boundary: count boundary variables instead of the union
            seed: seed for randomized mode
            restarts: randomized local-search restarts

        Returns:
            ExpansionReport with replayable violations
        """
        alpha = Fraction(alpha)
        m = len(constraint_sets)
        if s_max > m:
            raise UsageError(f"s_max {s_max} exceeds the {m} constraints")
        masks = [sum(1 << v for v in set(c)) for c in constraint_sets]
        sizes = [len(set(c)) for c in constraint_sets]

        if mode == ExpansionMode.EXHAUSTIVE:
            total = sum(math.comb(m, s) for s in range(1, s_max + 1))
            if s_max > self.s_cap or total > self.subset_cap:
                raise CapExceededError("expansion subsets", self.subset_cap, total)
            report = self._exhaustive(masks, sizes, alpha, s_max, boundary)
        else:
            report = self._randomized(masks, sizes, alpha, s_max, boundary, seed, restarts)
        log_certification_event("expansion", report.certified, alpha=alpha, s_max=s_max,
                                mode=report.mode.value, boundary=boundary,
                                violations=report.violation_count)
        return report

    def _count(self, masks: Sequence[int], chosen: Sequence[int], boundary: bool) -> int:
        if not boundary:
            union = 0
            for i in chosen:
                union |= masks[i]
            return _popcount(union)
        once, twice = 0, 0
        for i in chosen:
            twice |= once & masks[i]
            once = (once | masks[i]) & ~twice
        return _popcount(once)

    def _exhaustive(self, masks, sizes, alpha, s_max, boundary) -> ExpansionReport:
        violations: List[ExpansionViolation] = []
        checked = 0
        count_bad = 0
        m = len(masks)
        for s in range(1, s_max + 1):
            for chosen in itertools.combinations(range(m), s):
                checked += 1
                required = sum(sizes[i] for i in chosen) - alpha * s
                count = self._count(masks, chosen, boundary)
                if count < required:
                    count_bad += 1
                    if len(violations) < self.violation_keep:
                        violations.append(ExpansionViolation(constraints=list(chosen), count=count,
                                                             required=required))
        return ExpansionReport(s_max=s_max, mode=ExpansionMode.EXHAUSTIVE, alpha=alpha,
                               boundary=boundary, subsets_checked=checked,
                               violation_count=count_bad, violations=violations)

    def _randomized(self, masks, sizes, alpha, s_max, boundary, seed, restarts) -> ExpansionReport:
        rng = stream(seed, "expansion-search")
        m = len(masks)
        found: Dict[Tuple[int, ...], ExpansionViolation] = {}
        checked = 0

        def slack(chosen: Sequence[int]) -> Fraction:
            required = sum(sizes[i] for i in chosen) - alpha * len(chosen)
            return self._count(masks, chosen, boundary) - required

        for _ in range(restarts):
            s = int(rng.integers(1, s_max + 1))
            chosen = sorted(int(i) for i in rng.choice(m, size=s, replace=False))
            current = slack(chosen)
            improved = True
            while improved:
                improved = False
                checked += 1
                if current < 0:
                    break
                # swap one member for the outsider that lowers slack most
                best = None
                for pos in range(len(chosen)):
                    for j in range(m):
                        if j in chosen:
                            continue
                        trial = sorted(chosen[:pos] + chosen[pos + 1:] + [j])
                        value = slack(trial)
                        checked += 1
                        if value < current and (best is None or value < best[0]):
                            best = (value, trial)
                if best is not None:
                    current, chosen = best
                    improved = True
            if current < 0:
                key = tuple(chosen)
                if key not in found:
                    count = self._count(masks, chosen, boundary)
                    required = sum(sizes[i] for i in chosen) - alpha * len(chosen)
                    found[key] = ExpansionViolation(constraints=list(chosen), count=count, required=required)
        violations = sorted(found.values(), key=lambda v: v.constraints)
        return ExpansionReport(s_max=s_max, mode=ExpansionMode.RANDOMIZED, alpha=alpha,
                               boundary=boundary, subsets_checked=checked,
                               violation_count=len(violations),
                               violations=violations[:self.violation_keep])

    def certified_max_s(self, constraint_sets: Sequence[Sequence[int]], alpha, s_cap: int,
                        boundary: bool = False) -> int:
        """Largest s <= s_cap for which exhaustive expansion holds (0 if none)"""
        best = 0
        for s in range(1, min(s_cap, len(constraint_sets)) + 1):
            report = self.check_expansion(constraint_sets, alpha, s, boundary=boundary)
            if not report.certified:
                break
            best = s
        return best

    # Hypergraphs

    def sample_hypergraph(self, n: int, beta, k: int, seed: int,
                          max_overlap: Optional[int] = None) -> Hypergraph:
        """
        floor(beta * n) edges, each a uniform k-subset, sampled with replacement

        With max_overlap, the k-subsets are visited in a seeded random order
        and an edge is kept only if it meets every kept edge in at most
        max_overlap vertices; fewer edges come back once no k-subset fits.
        """
        if k > n:
            raise UsageError("edge size exceeds vertex count")
        count = math.floor(Fraction(beta) * n) if not isinstance(beta, float) else int(beta * n)
        if max_overlap is None:
            rng = stream(seed, "hypergraph-edges")
            edges = tuple(tuple(sorted(int(v) for v in rng.choice(n, size=k, replace=False)))
                          for _ in range(count))
            return Hypergraph(n=n, k=k, edges=edges, seed=seed)

        total = math.comb(n, k)
        if total > self.subset_cap:
            raise CapExceededError("hypergraph candidate edges", self.subset_cap, total)
        candidates = list(itertools.combinations(range(n), k))
        rng = stream(seed, "hypergraph-packing")
        kept: List[Tuple[int, ...]] = []
        masks: List[int] = []
        for index in rng.permutation(total):
            if len(kept) >= count:
                break
            edge = candidates[int(index)]
            mask = sum(1 << v for v in edge)
            if all(_popcount(mask & other) <= max_overlap for other in masks):
                kept.append(edge)
                masks.append(mask)
        logger.debug("hypergraph packed", n=n, k=k, requested=count, edges=len(kept), max_overlap=max_overlap)
        return Hypergraph(n=n, k=k, edges=tuple(kept), seed=seed)

    def max_independent_set(self, h: Hypergraph) -> List[int]:
        """Largest vertex set containing no edge, by branch and bound"""
        n = h.n
        edge_masks = sorted({sum(1 << v for v in e) for e in h.edges})
        # edges through each vertex, as masks
        through = [[e for e in edge_masks if e >> v & 1] for v in range(n)]
        best: List[int] = []

        def extend(v: int, chosen: int, size: int) -> None:
            nonlocal best
            if size + (n - v) <= len(best):
                return
            if v == n:
                best = [u for u in range(n) if chosen >> u & 1]
                return
            with_v = chosen | (1 << v)
            if all((with_v & e) != e for e in through[v]):
                extend(v + 1, with_v, size + 1)
            extend(v + 1, chosen, size)

        extend(0, 0, 0)
        return best

    def min_uncovered_subset(self, h: Hypergraph, epsilon, seed: int = 0,
                             attempts: int = 2000) -> UncoveredReport:
        """
        Does every ceil(epsilon * n)-subset contain an edge?

        Exact (through a maximum edge-free set) for n <= 25, otherwise a
        randomized greedy search for an edge-free witness.
        """
        size = math.ceil(Fraction(epsilon) * h.n)
        if h.n <= 25:
            independent = self.max_independent_set(h)
            ok = len(independent) < size
            witness = None if ok else independent[:size]
            report = UncoveredReport(subset_size=size, all_contain_edge=ok,
                                     mode=ExpansionMode.EXHAUSTIVE, witness=witness)
        else:
            rng = stream(seed, "uncovered-search")
            edge_sets = [set(e) for e in h.edges]
            witness = None
            for _ in range(attempts):
                chosen: set = set()
                for v in rng.permutation(h.n):
                    v = int(v)
                    trial = chosen | {v}
                    if not any(e <= trial for e in edge_sets if v in e):
                        chosen = trial
                    if len(chosen) >= size:
                        witness = sorted(chosen)
                        break
                if witness is not None:
                    break
            report = UncoveredReport(subset_size=size, all_contain_edge=witness is None,
                                     mode=ExpansionMode.RANDOMIZED, witness=witness)
        log_certification_event("uncovered_subset", report.all_contain_edge,
                                n=h.n, subset_size=size, mode=report.mode.value)
        return report


ensemble_service = EnsembleService()
