"""Exception hierarchy shared across the engine.

Every failure that the workflow classifier needs to attribute to a
validation layer gets its own exception type; anything else is a plain
ValueError/RuntimeError.
"""


class EmsimError(Exception):
    """Base class for all engine errors."""


# -- geometry ---------------------------------------------------------------

class EmptyLayout(EmsimError):
    """A layout with zero conductors was supplied where one is required."""


class NonConductive(EmsimError):
    """Skin depth requested for a material with zero conductivity."""


class GeometryError(EmsimError):
    """A geometric precondition was violated (overlap, bounds, ...)."""


# -- layout mini-language ---------------------------------------------------

class LayoutSyntaxError(EmsimError):
    """Layout script failed to parse."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class LayoutRuntimeError(EmsimError):
    """Layout script failed during evaluation (division by zero, budget, ...)."""

    def __init__(self, message: str, reason: str = "runtime"):
        super().__init__(message)
        self.reason = reason


# -- meshing ----------------------------------------------------------------

class MeshFailure(EmsimError):
    """Mesh refinement did not reach the quality target within the iteration cap."""


# -- solver -----------------------------------------------------------------

class AssemblyError(EmsimError):
    """Finite element assembly hit a degenerate element."""


class SingularSystem(EmsimError):
    """Sparse factorization broke down; usually a meshing/tagging defect."""


# -- post-processing DSL ----------------------------------------------------

class DslSyntaxError(EmsimError):
    """Post-processing program failed to parse."""

    def __init__(self, message: str, line: int, column: int, hint: str | None = None):
        text = f"{line}:{column}: {message}"
        if hint:
            text += f" ({hint})"
        super().__init__(text)
        self.message = message
        self.line = line
        self.column = column
        self.hint = hint


class EvalError(EmsimError):
    """Post-processing evaluation failed (e.g. sigma[] on an insulating region)."""


# -- LLM gateway ------------------------------------------------------------

class MissingPlaceholder(EmsimError):
    """Prompt template lacks the placeholder required for this render."""


class ProviderUnavailable(EmsimError):
    """Completion provider could not be reached after retries."""


class ProviderTimeout(ProviderUnavailable):
    """Completion provider did not answer within the configured timeout."""


class AuthMissing(EmsimError):
    """HTTP provider selected but its API key env variable is not set."""
