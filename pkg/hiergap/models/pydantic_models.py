import os
from datetime import datetime
from enum import Enum
from fractions import Fraction
from typing import Annotated, Any, Dict, List, Optional, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, validator


def format_rational(value: Union[Fraction, int]) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def parse_rational(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ValueError(f"cannot read {value!r} as an exact rational")


Rational = Annotated[
    Fraction,
    BeforeValidator(parse_rational),
    PlainSerializer(format_rational, return_type=str),
]


class PredicateKind(str, Enum):
    ODD = "odd"
    EVEN = "even"
    AT_LEAST_ONE_ZERO = "geq1zero"


class Hierarchy(str, Enum):
    SHERALI_ADAMS = "sa"
    LASSERRE = "lasserre"
    FELDMAN_LP = "feldman_lp"


class ExpansionMode(str, Enum):
    EXHAUSTIVE = "exhaustive"
    RANDOMIZED = "randomized"


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class ResolutionStatus(str, Enum):
    CLOSED = "closed"
    REFUTED = "refuted"
    FIXED = "fixed"


class ReportModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)


# Certification Models
class CertificationCheck(ReportModel):
    check_name: str
    passed: bool
    details: Optional[str] = None
    witness: Optional[Dict[str, Any]] = None
    severity: str = "info"  # info, warning, error


class PiReport(ReportModel):
    q: int
    k: int
    balanced: bool
    pairwise: bool
    parity_ok: Optional[bool] = None
    method: str = "atoms"  # atoms, weight_classes
    witnesses: List[Dict[str, Any]] = []

    @property
    def passed(self) -> bool:
        return self.balanced and self.pairwise and self.parity_ok is not False


class CosetReport(ReportModel):
    label: str
    q: int
    k: int
    size: int
    subgroup_closed: bool
    pairwise_independent: bool
    balanced: bool
    parity_ok: bool
    method: str = "enumeration"  # enumeration, projection_rank
    witnesses: List[Dict[str, Any]] = []

    @property
    def passed(self) -> bool:
        return self.subgroup_closed and self.pairwise_independent and self.balanced and self.parity_ok


class ExpansionViolation(ReportModel):
    constraints: List[int]
    count: int
    required: Rational


class ExpansionReport(ReportModel):
    s_max: int
    mode: ExpansionMode
    alpha: Rational
    boundary: bool = False
    subsets_checked: int = 0
    violation_count: int = 0
    violations: List[ExpansionViolation] = []

    @property
    def certified(self) -> bool:
        """Only an exhaustive scan without violations certifies expansion"""
        return self.mode == ExpansionMode.EXHAUSTIVE and self.violation_count == 0


class DegreeProfile(ReportModel):
    variable_degrees: Dict[int, int]
    check_degrees: Dict[int, int]
    conforms: bool
    pre_collapse_sockets: Optional[int] = None


class UncoveredReport(ReportModel):
    subset_size: int
    all_contain_edge: bool
    mode: ExpansionMode
    witness: Optional[List[int]] = None


class FamilyReport(ReportModel):
    checks: List[CertificationCheck]
    value_absolute: Rational
    value_normalized: Rational
    sets_checked: int = 0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CertificationCheck:
        return next(c for c in self.checks if c.check_name == name)


class ClosureCertificate(ReportModel):
    t: int
    sets: int = 0
    closures: int = 0
    pairs_checked: int = 0
    singletons_checked: int = 0
    witness: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return self.witness is None


class LasserreReport(ReportModel):
    symmetric: bool
    consistent_2t_local: bool
    entries_match: bool
    constraint_support: bool
    balance: bool
    psd_exact: Optional[bool] = None
    psd_method: str = "ldl"
    psd_float: Optional[bool] = None
    min_eigenvalue: Optional[float] = None
    size: int = 0
    witnesses: List[Dict[str, Any]] = []

    @property
    def passed(self) -> bool:
        return (self.symmetric and self.consistent_2t_local and self.entries_match
                and self.constraint_support and self.balance and self.psd_exact is True)


class FeldmanPointReport(ReportModel):
    feasible: bool
    objective: Rational
    violations: List[str] = []


class DecodeResult(ReportModel):
    status: LPStatus
    value: Optional[Rational] = None
    integral: bool = False
    unique: bool = False
    flips: Optional[List[Rational]] = None
    decoded: Optional[List[int]] = None

    @property
    def success(self) -> bool:
        return self.status == LPStatus.OPTIMAL and self.integral and self.unique


# Experiment Models
class GapReport(ReportModel):
    instance: Dict[str, Any]
    hierarchy: Hierarchy
    rounds: int
    value_absolute: Rational
    value_normalized: Rational
    integral_optimum: Optional[int] = None
    errors: int
    decoder_fails: bool
    verified: bool = True
    seed: Optional[int] = None
    caps: Dict[str, int] = {}

    @validator('decoder_fails')
    def verdict_matches_values(cls, v, values):
        normalized, errors, instance = values.get('value_normalized'), values.get('errors'), values.get('instance')
        if normalized is not None and errors is not None and instance:
            n = instance.get('n')
            if n and v != (normalized < Fraction(errors, n)):
                raise ValueError('decoder_fails must equal value_normalized < errors/n')
        return v


class HvcReport(ReportModel):
    n: int
    k: int
    edges: int
    seed: Optional[int] = None
    epsilon: Rational
    uncovered: Optional[UncoveredReport] = None
    integral_optimum: Optional[int] = None
    lasserre_value: Optional[Rational] = None
    lasserre_value_normalized: Optional[Rational] = None
    lasserre_verified: Optional[bool] = None
    abort_reason: Optional[str] = None

    @property
    def ratio(self) -> Optional[Fraction]:
        if self.integral_optimum is None or not self.lasserre_value:
            return None
        return Fraction(self.integral_optimum) / self.lasserre_value


# Configuration Models
class SystemConfig(ReportModel):
    field_order_cap: int = 2 ** 16
    atom_cap: int = 10 ** 6
    dense_state_cap: int = 10 ** 7
    closure_budget: int = 30
    equation_cap: int = 10 ** 6
    expansion_subset_cap: int = 10 ** 7
    exact_psd_direct_cap: int = 400
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "SystemConfig":
        return cls(
            field_order_cap=int(os.getenv("HIERGAP_FIELD_ORDER_CAP", str(2 ** 16))),
            atom_cap=int(os.getenv("HIERGAP_ATOM_CAP", str(10 ** 6))),
            dense_state_cap=int(os.getenv("HIERGAP_DENSE_STATE_CAP", str(10 ** 7))),
            closure_budget=int(os.getenv("HIERGAP_CLOSURE_BUDGET", "30")),
            equation_cap=int(os.getenv("HIERGAP_EQUATION_CAP", str(10 ** 6))),
            expansion_subset_cap=int(os.getenv("HIERGAP_EXPANSION_SUBSET_CAP", str(10 ** 7))),
            exact_psd_direct_cap=int(os.getenv("HIERGAP_EXACT_PSD_DIRECT_CAP", "400")),
            log_level=os.getenv("HIERGAP_LOG_LEVEL", "INFO"),
        )


# Error Models
class ErrorResponse(ReportModel):
    error: str
    message: str
    exit_code: int
    details: Optional[Dict[str, Any]] = None
    timestamp: datetime = Field(default_factory=datetime.utcnow)


__all__ = [
    "Rational", "format_rational", "parse_rational",
    "PredicateKind", "Hierarchy", "ExpansionMode", "LPStatus", "ResolutionStatus",
    "CertificationCheck", "PiReport", "CosetReport", "ExpansionViolation", "ExpansionReport",
    "DegreeProfile", "UncoveredReport", "FamilyReport", "ClosureCertificate", "LasserreReport",
    "FeldmanPointReport", "DecodeResult", "GapReport", "HvcReport",
    "SystemConfig", "ErrorResponse",
]
