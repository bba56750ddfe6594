from typing import Any, List, Optional


class HierGapError(Exception):
    """Root of every error raised by construction code"""


class UsageError(HierGapError, ValueError):
    """Bad arguments or malformed input files"""


class FieldMismatchError(HierGapError, ValueError):
    """Elements of two different fields met in one operation"""


class NotPrimePowerError(HierGapError, ValueError):
    pass


class CapExceededError(HierGapError):
    """A desk-scale cap was hit"""

    def __init__(self, cap: str, limit: int, requested: Optional[int] = None):
        self.cap = cap
        self.limit = limit
        self.requested = requested
        detail = f"{cap} cap {limit} exceeded"
        if requested is not None:
            detail += f" (requested {requested})"
        super().__init__(detail)


class ClosureBudgetError(HierGapError):
    """Expansion closure grew past its variable budget"""

    def __init__(self, size: int, budget: int):
        self.size = size
        self.budget = budget
        super().__init__(f"closure reached {size} variables, budget {budget}")


class ZeroNormalizerError(HierGapError):
    """Canonical distribution has no mass"""


class ResolutionAbortError(HierGapError):
    """
    Width-bounded resolution derived a contradiction or fixed a variable

    status is "refuted" or "fixed"; witness lists the derivation as
    (equation, parents) records.
    """

    def __init__(self, status: str, witness: List[Any]):
        self.status = status
        self.witness = witness
        super().__init__(f"resolution {status} after {len(witness)} derivation steps")


class MissingEntryError(HierGapError, KeyError):
    """A local distribution or moment entry that was never materialized"""


class PredicateMismatchError(HierGapError, ValueError):
    """A payload distribution or coset is not contained in its predicate"""


class NonConformingCodeError(HierGapError):
    """No sampled code had degrees the predicate tables cover"""

    def __init__(self, attempts: int, profile: Any = None):
        self.attempts = attempts
        self.profile = profile
        super().__init__(f"non-conforming degrees in {attempts} sampled codes")


class UncertifiedInstanceError(HierGapError):
    """A precondition of the construction could not be certified on this instance"""

    def __init__(self, reason: str, witness: Any = None):
        self.reason = reason
        self.witness = witness
        super().__init__(reason)
