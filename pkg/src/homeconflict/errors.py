"""Exception hierarchy.

Every domain error carries a module-qualified ``code`` (``"ahp.InconsistentMatrix"``)
and an optional ``details`` mapping, which the CLI prints verbatim as a structured
diagnostic.
"""

from __future__ import annotations

from typing import Any


class HomeConflictError(Exception):
    module = "homeconflict"

    def __init__(self, message: str = "", **details: Any) -> None:
        super().__init__(message or type(self).__name__)
        self.details = details

    @property
    def code(self) -> str:
        return f"{self.module}.{type(self).__name__}"

    def to_dict(self) -> dict[str, Any]:
        return {"error": self.code, "message": str(self), "details": self.details}


# domain model
class DomainError(HomeConflictError):
    module = "domain"


class InvalidInterval(DomainError):
    pass


class MissingField(DomainError):
    pass


class InvalidProfile(DomainError):
    pass


class SchemaError(DomainError):
    pass


# ingest
class IngestError(HomeConflictError):
    module = "ingest"


class MalformedLine(IngestError):
    pass


class BadTimestamp(IngestError):
    pass


class EmptyIntersection(IngestError):
    pass


class RegistryError(IngestError):
    pass


# detection
class DetectionError(HomeConflictError):
    module = "detection"


class UnknownResident(DetectionError):
    pass


# ahp
class AHPError(HomeConflictError):
    module = "ahp"


class NonReciprocal(AHPError):
    pass


class NonPositive(AHPError):
    pass


class BadDiagonal(AHPError):
    pass


class DimensionMismatch(AHPError):
    pass


class UnsupportedDimension(AHPError):
    pass


class InconsistentMatrix(AHPError):
    def __init__(self, message: str = "", result: Any = None, **details: Any) -> None:
        super().__init__(message, **details)
        self.result = result


class RevisionDiverged(AHPError):
    pass


# prioritization
class PrioritizationError(HomeConflictError):
    module = "prioritization"


class InvalidOverride(PrioritizationError):
    pass


# resolution
class ResolutionError(HomeConflictError):
    module = "resolution"


class NonNumericAttribute(ResolutionError):
    pass


class UnrankedParticipant(ResolutionError):
    pass


# evaluation
class EvaluationError(HomeConflictError):
    module = "evaluation"


class ShapeMismatch(EvaluationError):
    pass


class InvalidDistribution(EvaluationError):
    pass


class ConfigError(HomeConflictError):
    module = "cli"
