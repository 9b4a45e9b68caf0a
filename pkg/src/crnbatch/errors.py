"""Exception hierarchy for crnbatch."""


class CrnBatchError(Exception):
    """Base class for all crnbatch errors."""


class EmptyCrn(CrnBatchError):
    """Operation requires at least one reaction."""


class NotApplicable(CrnBatchError):
    """Reaction cannot fire: some reactant count is below its stoichiometry."""


class CrnSyntaxError(CrnBatchError):
    """Malformed `.crn` input; carries 1-based line and column."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class NonPositiveRate(CrnSyntaxError):
    pass


class UnknownSpecies(CrnBatchError):
    pass


class NegativeCount(CrnBatchError):
    pass


class MalformedAssignment(CrnBatchError):
    pass


class K0TooSmall(CrnBatchError):
    """Catalyst count is smaller than the order deficit it must absorb."""


class ZeroPropensity(CrnBatchError):
    """Total propensity is zero (terminal configuration)."""


class TerminalConfiguration(ZeroPropensity):
    """Raised by single-step simulators when no reaction can fire."""


class PopulationTooSmall(CrnBatchError):
    """Fewer molecules than the uniform order requires."""


class InsufficientPopulation(CrnBatchError):
    """Batch asks for more molecules than the configuration holds."""


class NoRedMolecules(CrnBatchError):
    """Collision sampling requires at least one already-interacted molecule."""


class InvalidParams(CrnBatchError):
    pass


class PopulationCapExceeded(InvalidParams):
    """Population exceeds the documented 64-bit-float sampling cap (1e10)."""


class DegenerateRates(CrnBatchError):
    """Hypoexponential stage rates are not distinct (generativity 0)."""


class NumericUnderflow(CrnBatchError):
    """Log-density evaluation lost all significant digits."""


class EnvelopeMismatch(CrnBatchError):
    """Adaptive-rejection envelope was built for a different distribution."""


class RejectionLimitExceeded(CrnBatchError):
    """End-of-run rejection sampling exceeded its retry cap."""


class DegenerateBins(CrnBatchError):
    """Histogram comparison has too few usable bins."""
