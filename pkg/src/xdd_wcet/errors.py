"""Exception hierarchy for the XDD WCET engine."""

from typing import Optional


class XddWcetError(Exception):
    """Base class for every error raised by the engine."""


class DocumentError(XddWcetError):
    """A pipeline or program document failed validation."""

    def __init__(self, message: str, location: Optional[str] = None):
        self.message = message
        self.location = location
        if location:
            super().__init__(f"{location}: {message}")
        else:
            super().__init__(message)


class ProgramValidationError(DocumentError):
    """Program document is malformed or describes an unanalyzable CFG."""


class PipelineValidationError(DocumentError):
    """Pipeline description is malformed or inconsistent."""


class OrderingError(XddWcetError):
    """A node would break the event order of the diagram."""


class TimeOverflowError(XddWcetError, OverflowError):
    """Finite time arithmetic left the 64-bit signed range."""


class InfiniteSubtrahendError(XddWcetError):
    """Subtraction was asked to remove an infinite time."""


class SupportTooLargeError(XddWcetError):
    """Explicit-map conversion requested over too many events."""


class UndefinedEventError(XddWcetError):
    """A configuration does not say whether an event is active."""


class LayoutMismatchError(XddWcetError):
    """Vectors or matrices built over different slot layouts were combined."""


class UnresolvedResourceError(XddWcetError):
    """A step refers to a resource the slot layout does not provide."""


class UnknownInstructionClassError(XddWcetError):
    """The pipeline does not know how to time an instruction class."""


class BudgetExceededError(XddWcetError):
    """The worklist analysis ran past one of its caps."""

    def __init__(self, message: str, block: Optional[str] = None):
        self.block = block
        super().__init__(f"{message} (block {block})" if block else message)


class InvariantViolation(XddWcetError):
    """An internal consistency check failed."""


class OracleGuardError(XddWcetError):
    """The instance is too large for brute-force enumeration."""
