"""Exception types shared across the package."""


class IonJCError(Exception):
    """Base class for all package-specific failures."""


class TruncationTooSmall(IonJCError):
    """A Fock-space cutoff discards more probability mass than allowed."""


class StepFailure(IonJCError):
    """The adaptive integrator could not complete the requested span."""


class DegenerateBlock(IonJCError):
    """A (m, n) pair has vanishing Rabi frequency; the block is uncoupled."""


class QuadratureNotConverged(IonJCError):
    """Order-doubling disagreement above tolerance in a phase-space integral."""


class ParseError(IonJCError):
    """Malformed config text; carries the offending line number."""

    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class ValidationError(IonJCError):
    """A config field has an invalid or missing value; names the field."""

    def __init__(self, field, message=""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class UnknownPreset(IonJCError):
    """Requested preset name is not one of the published parameter sets."""
