import itertools
import math
import os
from collections import deque
from dataclasses import replace
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..models.errors import (
    CapExceededError, MissingEntryError, PredicateMismatchError, ResolutionAbortError, UsageError,
)
from ..models.field import FieldSpec
from ..models.hierarchy import (
    AffineSet, CharacterEquation, LocalDistributionFamily, MomentMatrix, ResolutionSystem, Scope, scope_of,
)
from ..models.pydantic_models import LasserreReport, PredicateKind, ResolutionStatus, format_rational
from ..models.schemas import Assignment, CosetPredicate, CspInstance, Hypergraph, PredicateTable
from ..utils.logging_config import get_logger, log_certification_event, log_construction_event
from ..utils.rng import stream
from .coset_service import coset_service
from .csp_service import csp_service
from .field_service import field_service
from .sherali_adams_service import family_checks, family_value

logger = get_logger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)

Character = Tuple[Tuple[int, int], ...]


def canonical_equation(spec: FieldSpec, frequencies: Dict[int, int], rhs: int) -> CharacterEquation:
    """Scale by an F_p unit so the first nonzero F_p coordinate is 1"""
    p = spec.p
    items = sorted((v, c) for v, c in frequencies.items() if c)
    rhs %= p
    if items:
        lead = next(d for d in spec.coordinates(items[0][1]) if d)
        if lead != 1:
            scale = pow(lead, p - 2, p)
            items = [(v, spec.mul_index(scale, c)) for v, c in items]
            rhs = rhs * scale % p
    return CharacterEquation(frequencies=tuple(items), rhs=rhs)


def combine_equations(spec: FieldSpec, a: CharacterEquation, b: CharacterEquation,
                      scale: int) -> Tuple[Dict[int, int], int]:
    """a minus scale times b, frequency-wise, with the right-hand sides alike"""
    frequencies = dict(a.frequencies)
    for v, c in b.frequencies:
        value = spec.sub_index(frequencies.get(v, 0), spec.mul_index(scale, c))
        if value:
            frequencies[v] = value
        else:
            frequencies.pop(v, None)
    return frequencies, (a.rhs - scale * b.rhs) % spec.p


def ldl_psd(rows: Sequence[Sequence[Fraction]]) -> Tuple[bool, Optional[Dict[str, object]]]:
    """
    Exact positive semidefiniteness by symmetric elimination

    Reads the upper triangle only. A negative pivot, or a zero pivot with
    a nonzero entry left in its row, refutes.
    """
    n = len(rows)
    upper = [{j: Fraction(v) for j, v in enumerate(r) if j >= i and v} for i, r in enumerate(rows)]
    for k in range(n):
        row_k = upper[k]
        d = row_k.get(k, ZERO)
        if d < 0:
            return False, {"pivot": k, "value": format_rational(d)}
        rest = {j: v for j, v in row_k.items() if j > k}
        if d == 0:
            if rest:
                return False, {"pivot": k, "value": "0/1", "column": min(rest)}
            continue
        for i, a in rest.items():
            f = a / d
            row_i = upper[i]
            for j, b in rest.items():
                if j >= i:
                    value = row_i.get(j, ZERO) - f * b
                    if value:
                        row_i[j] = value
                    else:
                        row_i.pop(j, None)
    return True, None


class LasserreLocalFamily:
    """Uniform distributions on the sets H_U, memoized per U"""

    def __init__(self, rs: ResolutionSystem, service: "LasserreService"):
        self.rs = rs
        self.spec = rs.spec
        self._service = service
        self._h: Dict[Scope, AffineSet] = {}
        self._mass: Dict[int, Fraction] = {}

    def h_set(self, S: Iterable[int]) -> AffineSet:
        key = scope_of(S)
        if key not in self._h:
            self._h[key] = self._service.compute_H_S(self.rs, key)
        return self._h[key]

    def distribution(self, S: Iterable[int]) -> Dict[Assignment, Fraction]:
        h = self.h_set(S)
        if h.size not in self._mass:
            self._mass[h.size] = Fraction(1, h.size)
        mass = self._mass[h.size]
        return {alpha: mass for alpha in h.elements()}

    def to_family(self, n: int, t: int, sets: Iterable[Iterable[int]]) -> LocalDistributionFamily:
        family = LocalDistributionFamily(q=self.spec.q, t=t, n=n)
        for S in sets:
            family.add(S, self.distribution(S))
        return family


class LasserreService:
    """
    Lasserre solutions from coset predicates

    Handles:
    - Character equations of cosets and width-bounded resolution
    - The affine sets H_S and their uniform local distributions
    - Moment matrices with exact and floating PSD certification
    - Vertex cover solutions over H1
    """

    def __init__(self):
        self.equation_cap = int(os.getenv("HIERGAP_EQUATION_CAP", str(10 ** 6)))
        self.exact_psd_direct_cap = int(os.getenv("HIERGAP_EXACT_PSD_DIRECT_CAP", "400"))
        self.support_cap = int(os.getenv("HIERGAP_ATOM_CAP", str(10 ** 6)))
        self.set_cap = 10 ** 6
        self.character_cap = 5000
        self.float_cap = 5000
        self.arrangement_attempts = 200
        logger.info("Lasserre service initialized", equation_cap=self.equation_cap,
                    exact_psd_direct_cap=self.exact_psd_direct_cap)

    # Equations

    def constraint_equations(self, c: CosetPredicate, variables: Sequence[int]) -> List[CharacterEquation]:
        """Annihilator basis of the coset's subgroup, with right-hand sides from the shift"""
        if len(variables) != c.k:
            raise PredicateMismatchError(f"coset arity {c.k} differs from tuple length {len(variables)}")
        out = []
        for vector in coset_service.annihilator(c):
            frequencies = {v: cv for v, cv in zip(variables, vector) if cv}
            rhs = field_service.pairing(c.spec, vector, c.shift)
            out.append(canonical_equation(c.spec, frequencies, rhs))
        return out

    def instance_equations(self, instance: CspInstance) -> Tuple[FieldSpec, List[CharacterEquation]]:
        spec = None
        equations: List[CharacterEquation] = []
        for c in instance.constraints:
            coset = instance.coset_for(c)
            if spec is None:
                spec = coset.spec
            elif coset.spec != spec:
                raise PredicateMismatchError("cosets over different fields")
            equations.extend(self.constraint_equations(coset, c.variables))
        if spec is None:
            spec = field_service.field_of_order(instance.alphabet)
        if spec.q != instance.alphabet:
            raise PredicateMismatchError(f"cosets over GF({spec.q}) on alphabet {instance.alphabet}")
        return spec, equations

    def resolve(self, spec: FieldSpec, equations: Sequence[CharacterEquation], width: int) -> ResolutionSystem:
        """
        Close the system under pairwise combination of width at most `width`

        Raises:
            ResolutionAbortError: a contradiction (empty support, nonzero
                right-hand side) or a single-variable equation was derived
            CapExceededError: too many equations
        """
        rs = ResolutionSystem(spec=spec, width=width)
        known: Set[CharacterEquation] = set()
        queue: deque = deque()

        def admit(eq: CharacterEquation, parents) -> None:
            if eq in known:
                return
            if eq.weight == 0 and eq.rhs == 0:
                return
            known.add(eq)
            rs.add(eq, parents)
            if eq.weight == 0:
                raise ResolutionAbortError(ResolutionStatus.REFUTED.value, rs.derivation(eq))
            if eq.weight == 1:
                raise ResolutionAbortError(ResolutionStatus.FIXED.value, rs.derivation(eq))
            if len(rs.equations) > self.equation_cap:
                raise CapExceededError("resolution equations", self.equation_cap, len(rs.equations))
            queue.append(eq)

        for eq in sorted({canonical_equation(spec, e.as_dict(), e.rhs) for e in equations}):
            admit(eq, None)

        while queue:
            e = queue.popleft()
            support_e = frozenset(e.support)
            for other in list(rs.equations):
                if other == e or len(support_e ^ frozenset(other.support)) > width:
                    continue
                for scale in range(1, spec.p):
                    frequencies, rhs = combine_equations(spec, e, other, scale)
                    if len(frequencies) > width:
                        continue
                    admit(canonical_equation(spec, frequencies, rhs), (e, other, scale))

        logger.debug("resolution closed", width=width, initial=len(equations), closed=len(rs.equations))
        return rs

    def compute_H_S(self, rs: ResolutionSystem, S: Iterable[int]) -> AffineSet:
        """Solutions on S of every closure equation supported inside S"""
        S = scope_of(S)
        spec = rs.spec
        m = spec.m
        ncols = m * len(S)
        equations = rs.supported_in(S)
        if not equations:
            identity = tuple(tuple(1 if j == i else 0 for j in range(ncols)) for i in range(ncols))
            return AffineSet(spec=spec, variables=S, particular=(0,) * ncols, kernel=identity)
        position = {v: i for i, v in enumerate(S)}
        rows, rhs = [], []
        for eq in equations:
            row = [0] * ncols
            for v, c in eq.frequencies:
                start = position[v] * m
                row[start:start + m] = field_service.trace_row(spec, [c])
            rows.append(row)
            rhs.append(eq.rhs)
        solution = field_service.solve_linear_indices(field_service.prime_field(spec), rows, rhs, ncols)
        if not solution.feasible:
            raise ResolutionAbortError(ResolutionStatus.REFUTED.value,
                                       [{"set": list(S), "equations": [str(e) for e in equations]}])
        return AffineSet(spec=spec, variables=S, particular=solution.particular, kernel=solution.kernel)

    # Construction

    def arrange_constraint_tuples(self, instance: CspInstance, seed: int) -> CspInstance:
        """
        Reorder each constraint's variables over its coset's coordinates
        so that no variable pair sits in summand blocks of two different
        constraints

        Stretched parity predicates are symmetric, so any order is valid.
        """
        rng = stream(seed, "coset-arrangement")
        owner: Dict[Tuple[int, int], int] = {}
        arranged = []
        conflicts = 0
        for index, c in enumerate(instance.constraints):
            blocks = instance.coset_for(c).summand_blocks

            def pairs_of(order: Sequence[int]) -> List[Tuple[int, int]]:
                out = []
                for start, length in blocks:
                    block = sorted(order[start:start + length])
                    out.extend(itertools.combinations(block, 2))
                return out

            best_order, best_cost = tuple(c.variables), None
            candidates = [tuple(c.variables)]
            for _ in range(self.arrangement_attempts):
                candidates.append(tuple(int(v) for v in rng.permutation(list(c.variables))))
            for order in candidates:
                cost = sum(1 for pair in pairs_of(order) if owner.get(pair, index) != index)
                if best_cost is None or cost < best_cost:
                    best_order, best_cost = order, cost
                if cost == 0:
                    break
            for pair in pairs_of(best_order):
                owner.setdefault(pair, index)
            conflicts += best_cost
            arranged.append(replace(c, variables=best_order))
        logger.info("constraint tuples arranged", seed=seed, shared_pairs=conflicts)
        return replace(instance, constraints=tuple(arranged))

    def shared_block_pairs(self, instance: CspInstance) -> List[Tuple[int, int]]:
        """Variable pairs sitting in summand blocks of two different constraints"""
        owner: Dict[Tuple[int, int], int] = {}
        shared: Set[Tuple[int, int]] = set()
        for index, c in enumerate(instance.constraints):
            for start, length in instance.coset_for(c).summand_blocks:
                block = sorted(c.variables[start:start + length])
                for pair in itertools.combinations(block, 2):
                    if owner.setdefault(pair, index) != index:
                        shared.add(pair)
        return sorted(shared)

    def lasserre_sets(self, instance: CspInstance, t: int, spec: FieldSpec,
                      local: LasserreLocalFamily) -> List[Scope]:
        """All sets of at most 2t variables, plus constraint sets whose H is enumerable"""
        count = sum(math.comb(instance.n, r) for r in range(2 * t + 1))
        if count > self.set_cap:
            raise CapExceededError("local distribution sets", self.set_cap, count)
        sets = {S for r in range(2 * t + 1) for S in itertools.combinations(range(instance.n), r)}
        for c in instance.constraints:
            S = scope_of(c.variables)
            if len(S) > 2 * t and local.h_set(S).size <= self.support_cap:
                sets.add(S)
        return sorted(sets, key=lambda s: (len(s), s))

    def build_lasserre_solution(self, instance: CspInstance, t: int) -> MomentMatrix:
        """
        Moment matrix of the uniform-on-H_S family at width 2t

        Args:
            instance: stretched instance with attached cosets
            t: round count

        Returns:
            MomentMatrix over rows (S, alpha), |S| <= t, alpha in H_S

        Raises:
            ResolutionAbortError: resolution refuted or fixed a variable
        """
        if not instance.stretched:
            raise UsageError("Lasserre construction needs a stretched instance")
        if t < 1:
            raise UsageError("round count must be positive")
        spec, equations = self.instance_equations(instance)
        rs = self.resolve(spec, equations, 2 * t)
        local = LasserreLocalFamily(rs, self)
        family = local.to_family(instance.n, 2 * t, self.lasserre_sets(instance, t, spec, local))
        index = [(S, alpha) for S in family.sets() if len(S) <= t for alpha in sorted(family.marginal(S))]
        entries = self.moment_entries(index, family)
        log_construction_event("lasserre", n=instance.n, q=spec.q, t=t, equations=len(rs.equations),
                               sets=len(family.entries), rows=len(index))
        return MomentMatrix(q=spec.q, t=t, index=index, entries=entries, local=family,
                            spec=spec, instance=instance)

    def _groups(self, index: Sequence[Tuple[Scope, Assignment]]) -> List[Tuple[Scope, List[int]]]:
        groups: List[Tuple[Scope, List[int]]] = []
        for i, (S, _) in enumerate(index):
            if not groups or groups[-1][0] != S:
                groups.append((S, []))
            groups[-1][1].append(i)
        return groups

    def _block(self, index, family: LocalDistributionFamily, S: Scope, rows_S: Sequence[int],
               T: Scope, rows_T: Sequence[int]):
        """Entries X_{S u T}(alpha o beta), zero when alpha and beta disagree"""
        U = scope_of(S + T)
        table = family.marginal(U)
        pos_S = [U.index(v) for v in S]
        pos_T = [U.index(v) for v in T]
        for i in rows_S:
            alpha = index[i][1]
            base = [-1] * len(U)
            for pos, g in zip(pos_S, alpha):
                base[pos] = g
            for j in rows_T:
                out = list(base)
                consistent = True
                for pos, g in zip(pos_T, index[j][1]):
                    if out[pos] != -1 and out[pos] != g:
                        consistent = False
                        break
                    out[pos] = g
                yield i, j, table.get(tuple(out), ZERO) if consistent else ZERO

    def moment_entries(self, index: Sequence[Tuple[Scope, Assignment]],
                       family: LocalDistributionFamily) -> List[List[Fraction]]:
        size = len(index)
        entries = [[ZERO] * size for _ in range(size)]
        groups = self._groups(index)
        for a, (S, rows_S) in enumerate(groups):
            for T, rows_T in groups[a:]:
                for i, j, value in self._block(index, family, S, rows_S, T, rows_T):
                    entries[i][j] = value
                    entries[j][i] = value
        return entries

    # Verification

    def verify_lasserre(self, mm: MomentMatrix, instance: Optional[CspInstance] = None) -> LasserreReport:
        """
        Symmetry, 2t-local consistency, entry agreement, constraint
        support, balance and PSD

        PSD is decided exactly: by LDL^T on the matrix itself when it is
        small, and in characteristic 2 through the character-basis
        matrix; float eigenvalues are recorded as a cross-check and never
        decide the verdict.

        Raises:
            CapExceededError: every other property holds but no exact PSD
                method fits within its cap
        """
        instance = instance or mm.instance
        witnesses: List[Dict[str, object]] = []
        size = mm.size

        symmetric = True
        for i in range(size):
            row = mm.entries[i]
            for j in range(i + 1, size):
                if row[j] != mm.entries[j][i]:
                    symmetric = False
                    witnesses.append({"check": "symmetric", "i": i, "j": j})
                    break
            if not symmetric:
                break

        reference = instance or CspInstance(n=mm.local.n, alphabet=mm.q, constraints=(), stretched=True)
        checks = {c.check_name: c for c in family_checks(mm.local, reference)}
        consistent = all(checks[name].passed for name in ("empty_set", "nonnegative", "consistency"))
        for name in ("empty_set", "nonnegative", "consistency", "constraint_support", "balance"):
            if name == "balance" and instance is None:
                continue
            if not checks[name].passed:
                witnesses.append({"check": name, "witness": checks[name].witness})

        mismatch = self._first_mismatch(mm)
        entries_match = mismatch is None
        if mismatch:
            witnesses.append({"check": "entries_match", **mismatch})

        verdicts = []
        methods = []
        if size <= self.exact_psd_direct_cap:
            ok, witness = ldl_psd(mm.entries)
            verdicts.append(ok)
            methods.append("ldl")
            if witness:
                witnesses.append({"check": "psd_ldl", **witness})
        if mm.spec is not None and mm.spec.p == 2 and entries_match and consistent:
            try:
                ok, witness = self.character_psd(mm)
                verdicts.append(ok)
                methods.append("character")
                if witness:
                    witnesses.append({"check": "psd_character", **witness})
            except CapExceededError as exc:
                logger.warning("character reduction skipped", reason=str(exc))
        psd_exact = all(verdicts) if verdicts else None
        if psd_exact is None and symmetric and consistent and entries_match:
            raise CapExceededError("exact PSD rows", self.exact_psd_direct_cap, size)

        psd_float, min_eigenvalue = None, None
        if 0 < size <= self.float_cap:
            matrix = np.array([[float(v) for v in row] for row in mm.entries], dtype=float)
            min_eigenvalue = float(np.linalg.eigvalsh(matrix).min())
            psd_float = min_eigenvalue >= -1e-8

        report = LasserreReport(symmetric=symmetric, consistent_2t_local=consistent,
                                entries_match=entries_match,
                                constraint_support=checks["constraint_support"].passed,
                                balance=checks["balance"].passed or instance is None, psd_exact=psd_exact,
                                psd_method="+".join(methods) or "float", psd_float=psd_float,
                                min_eigenvalue=min_eigenvalue, size=size, witnesses=witnesses[:20])
        log_certification_event("moment_matrix", report.passed, size=size, q=mm.q, t=mm.t,
                                psd_method=report.psd_method, min_eigenvalue=min_eigenvalue)
        return report

    def _first_mismatch(self, mm: MomentMatrix) -> Optional[Dict[str, object]]:
        groups = self._groups(mm.index)
        try:
            for a, (S, rows_S) in enumerate(groups):
                for T, rows_T in groups[a:]:
                    for i, j, value in self._block(mm.index, mm.local, S, rows_S, T, rows_T):
                        if mm.entries[i][j] != value or mm.entries[j][i] != value:
                            return {"i": i, "j": j, "expected": format_rational(value),
                                    "found": format_rational(mm.entries[i][j])}
        except MissingEntryError as exc:
            return {"missing": str(exc)}
        return None

    def characters(self, mm: MomentMatrix) -> List[Character]:
        q = mm.q
        sets = sorted({S for S, _ in mm.index}, key=lambda s: (len(s), s))
        count = sum((q - 1) ** len(S) for S in sets)
        if count > self.character_cap:
            raise CapExceededError("characters", self.character_cap, count)
        return [tuple(zip(S, cs)) for S in sets for cs in itertools.product(range(1, q), repeat=len(S))]

    def character_psd(self, mm: MomentMatrix) -> Tuple[bool, Optional[Dict[str, object]]]:
        """
        Exact PSD test of K[chi, psi] = E[(chi + psi)(x)] over characters of
        support at most t, block by connected component

        In characteristic 2 the moment matrix equals C K C^T with C the
        real change of basis from characters to indicators, once its
        entries are the marginals of a consistent 2t-local family.
        """
        spec, family = mm.spec, mm.local
        chars = self.characters(mm)
        expectations: Dict[Character, Fraction] = {}

        def expect(phi: Character) -> Fraction:
            if phi not in expectations:
                U = tuple(v for v, _ in phi)
                freq = [c for _, c in phi]
                total = ZERO
                for x, p in family.marginal(U).items():
                    total += -p if field_service.pairing(spec, freq, x) else p
                expectations[phi] = total
            return expectations[phi]

        n_chars = len(chars)
        kernel: List[Dict[int, Fraction]] = [dict() for _ in range(n_chars)]
        parent = list(range(n_chars))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a in range(n_chars):
            chi = dict(chars[a])
            for b in range(a, n_chars):
                merged = dict(chi)
                for v, c in chars[b]:
                    value = spec.add_index(merged.get(v, 0), c)
                    if value:
                        merged[v] = value
                    else:
                        merged.pop(v, None)
                value = expect(tuple(sorted(merged.items())))
                if value:
                    kernel[a][b] = value
                    kernel[b][a] = value
                    if a != b:
                        parent[find(a)] = find(b)

        components: Dict[int, List[int]] = {}
        for a in range(n_chars):
            components.setdefault(find(a), []).append(a)
        for members in components.values():
            block = [[kernel[a].get(b, ZERO) for b in members] for a in members]
            ok, witness = ldl_psd(block)
            if not ok:
                return False, {"component": [list(chars[a]) for a in members][:10], **(witness or {})}
        logger.debug("character reduction certified", characters=n_chars, components=len(components))
        return True, None

    # Vertex cover

    def hvc_lasserre(self, h: Hypergraph, t: int) -> Tuple[MomentMatrix, LasserreReport, Fraction]:
        """
        Stretch the cover instance to q = k-1 over H1, build and verify

        Returns:
            (moment matrix, its report, collapsed absolute value)
        """
        q = h.k - 1
        coset = coset_service.hvc_predicate(q)
        binary = csp_service.hvc_instance(h)
        stretched, phi = csp_service.stretch(binary, q)
        table = PredicateTable(q=q, entries={(h.k, PredicateKind.AT_LEAST_ONE_ZERO): coset})
        instance = csp_service.attach_cosets(stretched, table)
        mm = self.build_lasserre_solution(instance, t)
        report = self.verify_lasserre(mm)
        collapsed = csp_service.collapse_local(mm.local, phi)
        value = family_value(collapsed, binary)
        logger.info("vertex cover solution built", n=h.n, k=h.k, edges=len(h.edges), value=value,
                    verified=report.passed)
        return mm, report, value


lasserre_service = LasserreService()
