from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from ..models.pydantic_models import LPStatus
from ..models.schemas import FarkasCertificate, LinearProgram, LPResult, Relation
from ..utils.logging_config import get_logger

logger = get_logger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class _StandardForm:
    """A x = b, x >= 0 with the bookkeeping to map back to the original variables"""
    rows: List[Dict[int, Fraction]] = field(default_factory=list)
    rhs: List[Fraction] = field(default_factory=list)
    labels: List[str] = field(default_factory=list)
    ncols: int = 0
    cost: Dict[int, Fraction] = field(default_factory=dict)
    recover: List[Tuple[Fraction, List[Tuple[int, Fraction]]]] = field(default_factory=list)

    def new_column(self) -> int:
        self.ncols += 1
        return self.ncols - 1


class _Tableau:
    def __init__(self, rows: List[List[Fraction]], basis: List[int]):
        self.rows = rows
        self.basis = basis
        self.obj: List[Fraction] = []
        self.pivots = 0

    def pivot(self, r: int, c: int) -> None:
        prow = self.rows[r]
        piv = prow[c]
        if piv != ONE:
            prow = [v / piv if v else v for v in prow]
            self.rows[r] = prow
        nz = [j for j, v in enumerate(prow) if v]
        for i, row in enumerate(self.rows):
            if i != r:
                factor = row[c]
                if factor:
                    for j in nz:
                        row[j] -= factor * prow[j]
        factor = self.obj[c]
        if factor:
            for j in nz:
                self.obj[j] -= factor * prow[j]
        self.basis[r] = c
        self.pivots += 1

    def entering(self, allowed: int) -> Optional[int]:
        # Bland: lowest index with negative reduced cost
        for j in range(allowed):
            if self.obj[j] < 0:
                return j
        return None

    def leaving(self, c: int) -> Optional[int]:
        best, best_ratio = None, None
        for i, row in enumerate(self.rows):
            a = row[c]
            if a > 0:
                ratio = row[-1] / a
                if (best is None or ratio < best_ratio
                        or (ratio == best_ratio and self.basis[i] < self.basis[best])):
                    best, best_ratio = i, ratio
        return best

    def run(self, allowed: int) -> bool:
        """Iterate to optimality; False when unbounded"""
        while True:
            c = self.entering(allowed)
            if c is None:
                return True
            r = self.leaving(c)
            if r is None:
                return False
            self.pivot(r, c)


class ExactLPService:
    """
    Exact rational linear programming

    Handles:
    - Reduction of general bounds to standard form
    - Two-phase simplex with Bland's rule
    - Farkas certificates for infeasible systems
    - Exact verification of every returned point
    - Rational Gaussian elimination for square systems
    """

    def __init__(self):
        logger.info("Exact LP service initialized")

    def solve(self, lp: LinearProgram) -> LPResult:
        """
        Minimize the objective exactly

        Args:
            lp: the linear program

        Returns:
            LPResult that is optimal (value, assignment), infeasible
            (with a verified Farkas certificate) or unbounded
        """
        return self._run(lp, optimize=True)

    def feasible(self, lp: LinearProgram) -> LPResult:
        """Phase one only; an optimal status means feasible and carries a point"""
        return self._run(lp, optimize=False)

    def _standardize(self, lp: LinearProgram) -> _StandardForm:
        sf = _StandardForm()
        for j, name in enumerate(lp.variables):
            lo, hi = lp.lower[j], lp.upper[j]
            if lo is not None:
                col = sf.new_column()
                sf.recover.append((lo, [(col, ONE)]))
                if hi is not None:
                    slack = sf.new_column()
                    sf.rows.append({col: ONE, slack: ONE})
                    sf.rhs.append(hi - lo)
                    sf.labels.append(f"ub:{name}")
            elif hi is not None:
                col = sf.new_column()
                sf.recover.append((hi, [(col, -ONE)]))
            else:
                plus, minus = sf.new_column(), sf.new_column()
                sf.recover.append((ZERO, [(plus, ONE), (minus, -ONE)]))

        for con in lp.constraints:
            row: Dict[int, Fraction] = {}
            rhs = con.rhs
            for j, a in con.coeffs.items():
                offset, cols = sf.recover[j]
                rhs -= a * offset
                for col, coef in cols:
                    row[col] = row.get(col, ZERO) + a * coef
            if con.relation == Relation.LE:
                row[sf.new_column()] = ONE
            elif con.relation == Relation.GE:
                row[sf.new_column()] = -ONE
            sf.rows.append({c: v for c, v in row.items() if v})
            sf.rhs.append(rhs)
            sf.labels.append(con.name)

        for j, c in lp.objective.items():
            for col, coef in sf.recover[j][1]:
                sf.cost[col] = sf.cost.get(col, ZERO) + c * coef
        return sf

    def _run(self, lp: LinearProgram, optimize: bool) -> LPResult:
        sf = self._standardize(lp)
        nrows, ncols = len(sf.rows), sf.ncols
        signs = [ONE if b >= 0 else -ONE for b in sf.rhs]

        width = ncols + nrows + 1
        rows = []
        for i, (sparse, b) in enumerate(zip(sf.rows, sf.rhs)):
            dense = [ZERO] * width
            for c, v in sparse.items():
                dense[c] = v * signs[i]
            dense[ncols + i] = ONE
            dense[-1] = b * signs[i]
            rows.append(dense)
        tab = _Tableau(rows, [ncols + i for i in range(nrows)])

        # Phase one: minimize the sum of artificials
        obj = [ZERO] * width
        for row in rows:
            for j in range(ncols):
                if row[j]:
                    obj[j] -= row[j]
            obj[-1] -= row[-1]
        tab.obj = obj
        tab.run(width - 1)

        infeasibility = -tab.obj[-1]
        if infeasibility > 0:
            y = [(ONE - tab.obj[ncols + i]) * signs[i] for i in range(nrows)]
            certificate = self._certify(sf, y)
            logger.debug("LP infeasible", rows=nrows, columns=ncols, pivots=tab.pivots)
            return LPResult(status=LPStatus.INFEASIBLE, certificate=certificate)

        # Drive remaining artificials out of the basis, dropping redundant rows
        keep = []
        for i in range(len(tab.rows)):
            if tab.basis[i] >= ncols:
                col = next((j for j in range(ncols) if tab.rows[i][j]), None)
                if col is None:
                    continue
                tab.pivot(i, col)
            keep.append(i)
        tab.rows = [tab.rows[i][:ncols] + [tab.rows[i][-1]] for i in keep]
        tab.basis = [tab.basis[i] for i in keep]

        if optimize:
            obj = [ZERO] * (ncols + 1)
            for j, c in sf.cost.items():
                obj[j] = c
            for i, b in enumerate(tab.basis):
                cb = sf.cost.get(b, ZERO)
                if cb:
                    row = tab.rows[i]
                    for j, v in enumerate(row):
                        if v:
                            obj[j] -= cb * v
            tab.obj = obj
            if not tab.run(ncols):
                logger.debug("LP unbounded", rows=nrows, columns=ncols, pivots=tab.pivots)
                return LPResult(status=LPStatus.UNBOUNDED)

        x = [ZERO] * ncols
        for i, b in enumerate(tab.basis):
            x[b] = tab.rows[i][-1]
        assignment = tuple(offset + sum((coef * x[col] for col, coef in cols), ZERO)
                           for offset, cols in sf.recover)
        self._verify_point(lp, assignment)
        value = sum((c * assignment[j] for j, c in lp.objective.items()), ZERO)
        logger.debug("LP solved", rows=nrows, columns=ncols, pivots=tab.pivots, value=value)
        return LPResult(status=LPStatus.OPTIMAL, value=value if optimize else None,
                        assignment=assignment)

    def _certify(self, sf: _StandardForm, y: Sequence[Fraction]) -> FarkasCertificate:
        column_sums: Dict[int, Fraction] = {}
        for yi, row in zip(y, sf.rows):
            if yi:
                for c, v in row.items():
                    column_sums[c] = column_sums.get(c, ZERO) + yi * v
        rhs_value = sum((yi * b for yi, b in zip(y, sf.rhs)), ZERO)
        if any(v > 0 for v in column_sums.values()) or rhs_value <= 0:
            raise AssertionError("Farkas certificate failed verification")
        multipliers: Dict[str, Fraction] = {}
        for label, yi in zip(sf.labels, y):
            if yi:
                multipliers[label] = multipliers.get(label, ZERO) + yi
        return FarkasCertificate(multipliers=multipliers, rhs_value=rhs_value)

    def check_point(self, lp: LinearProgram, x: Sequence[Fraction]) -> List[str]:
        """Names of the bounds and constraints x violates, by exact substitution"""
        violations = []
        for j, value in enumerate(x):
            lo, hi = lp.lower[j], lp.upper[j]
            if (lo is not None and value < lo) or (hi is not None and value > hi):
                violations.append(f"bound:{lp.variables[j]}")
        for con in lp.constraints:
            lhs = sum((a * x[j] for j, a in con.coeffs.items()), ZERO)
            ok = (lhs <= con.rhs if con.relation == Relation.LE
                  else lhs >= con.rhs if con.relation == Relation.GE
                  else lhs == con.rhs)
            if not ok:
                violations.append(con.name)
        return violations

    def _verify_point(self, lp: LinearProgram, x: Sequence[Fraction]) -> None:
        violations = self.check_point(lp, x)
        if violations:
            raise AssertionError(f"point fails substitution at {violations[0]}")

    def solve_equalities(self, A: Sequence[Sequence[Fraction]],
                         b: Sequence[Fraction]) -> Tuple[Optional[List[Fraction]], List[List[Fraction]]]:
        """
        Exact solution set of A x = b

        Returns:
            (particular solution or None when inconsistent, kernel basis)
        """
        ncols = len(A[0]) if A else 0
        rows = [[Fraction(v) for v in r] + [Fraction(rhs)] for r, rhs in zip(A, b)]
        pivots = []
        rank = 0
        for col in range(ncols):
            pr = next((i for i in range(rank, len(rows)) if rows[i][col]), None)
            if pr is None:
                continue
            rows[rank], rows[pr] = rows[pr], rows[rank]
            piv = rows[rank][col]
            rows[rank] = [v / piv for v in rows[rank]]
            for i in range(len(rows)):
                if i != rank and rows[i][col]:
                    f = rows[i][col]
                    rows[i] = [v - f * w for v, w in zip(rows[i], rows[rank])]
            pivots.append(col)
            rank += 1
        if any(rows[i][-1] for i in range(rank, len(rows))):
            return None, []
        particular = [ZERO] * ncols
        for i, col in enumerate(pivots):
            particular[col] = rows[i][-1]
        kernel = []
        for free in range(ncols):
            if free in pivots:
                continue
            vec = [ZERO] * ncols
            vec[free] = ONE
            for i, col in enumerate(pivots):
                vec[col] = -rows[i][free]
            kernel.append(vec)
        return particular, kernel


lp_service = ExactLPService()
