"""Exception types raised by the library."""


class AvgMdpError(Exception):
    """Base class for all library errors."""


class RowSumError(AvgMdpError):
    """A transition row does not sum to 1 within tolerance."""


class EmptyActionSet(AvgMdpError):
    """A state has no admissible action."""


class NonFiniteCost(AvgMdpError):
    """A one-stage cost is NaN or infinite where a finite value is required."""


class DimensionMismatch(AvgMdpError):
    """Vector or matrix dimensions do not match the model."""


class PolicySupportError(AvgMdpError):
    """A policy places probability mass on inadmissible actions."""


class SingularSolve(AvgMdpError):
    """A linear system is too ill-conditioned to solve reliably."""


class EmptyTargetSet(AvgMdpError):
    """A hitting/reachability target set is empty."""


class HorizonOverflow(AvgMdpError):
    """A requested horizon exceeds the configured cap."""


class EnumerationTooLarge(AvgMdpError):
    """The deterministic-policy space is too large to enumerate."""


class CyclingDetected(AvgMdpError):
    """Policy iteration revisited a policy; indicates a tie-break bug."""


class NonConstantOnSupport(AvgMdpError):
    """A gain function is not constant on the measure support."""


class BothSignsUnbounded(AvgMdpError):
    """Cost table has both +inf and -inf sentinels; no model class applies."""


class TableTooLarge(AvgMdpError):
    """A trajectory table would exceed the configured memory cap."""


class InconsistentMarginals(AvgMdpError):
    """A stage-marginal sequence violates the forward consistency equations."""


class WeightError(AvgMdpError):
    """LP weight vector is not positive or does not sum to 1."""


class NumericalStall(AvgMdpError):
    """The simplex solver exceeded its pivot cap."""
