"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class HiveError(Exception):
    """Base class for every error raised by this package."""


# --- capability graph -------------------------------------------------------


class ArityViolation(HiveError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


class ParseError(HiveError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


class IntegrityError(HiveError):
    """The graph breaks a structural invariant (dangling snippet, partial result)."""


# --- ingestion --------------------------------------------------------------


class ProviderError(HiveError):
    """Transport-level failure of a text-completion provider."""


class SpecParseError(HiveError):
    """A provider reply could not be turned into an execution spec."""


class EmbedderError(HiveError):
    pass


# --- PDDL -------------------------------------------------------------------


class PDDLSyntaxError(HiveError):
    def __init__(self, line: int, col: int, expected: str, found: str | None = None):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"{line}:{col}: expected {expected}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)


class UnsupportedFeature(HiveError):
    def __init__(self, feature: str):
        self.feature = feature
        super().__init__(f"unsupported PDDL feature: {feature}")


class PDDLValidationError(HiveError):
    """Well-formed text that is inconsistent (undeclared predicate, bad arity...)."""


class PredicateConflict(HiveError):
    pass


class TypeConflict(HiveError):
    pass


class UnknownAction(HiveError):
    pass


class NoInputArtifact(HiveError):
    """The selected actions need a modality the query does not provide."""


class GroundingExplosion(HiveError):
    pass


# --- planning ---------------------------------------------------------------


class NoPlanFound(HiveError):
    pass


class BudgetExceeded(HiveError):
    pass


class ScaleGuard(HiveError):
    pass


# --- language understanding -------------------------------------------------


class EmptySelection(HiveError):
    pass


# --- execution --------------------------------------------------------------


class UnboundParameter(HiveError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no binding for parameter {name!r}")


class BackendError(HiveError):
    pass


# --- evaluation -------------------------------------------------------------


class MissingVerdict(HiveError):
    pass


class SchemaError(HiveError):
    """An input record does not match its file schema."""
