"""Exception hierarchy.

CLI exit codes key off the three top-level families: ``BudgetExceeded`` maps
to 2, ``InvariantViolation`` to 3, everything else to 1.
"""


class MagWeylError(Exception):
    pass


class InputError(MagWeylError, ValueError):
    pass


class ComputationError(MagWeylError, RuntimeError):
    pass


class BudgetExceeded(MagWeylError):
    pass


class InvariantViolation(MagWeylError):
    pass


# field model
class NotSkewSymmetric(InputError):
    pass


class ZeroField(InputError):
    pass


class ComplexArithmeticFailure(ComputationError):
    pass


class OutOfRange(InputError):
    pass


class EpsTooLargeForDomain(InputError):
    pass


class GridTooCoarse(InputError):
    pass


class ParseError(InputError):
    pass


# weyl
class EmptyAllowedRegion(InputError):
    pass


class CircleExitsDomain(InputError):
    pass


class PsiSupportViolation(InputError):
    pass


# discrete operators
class FluxNotQuantizable(InputError):
    pass


class ResolutionTooCoarse(InputError):
    pass


class NotSeparable(InputError):
    pass


class IncompleteFamily(InputError):
    pass


# spectral engines
class DimensionTooLarge(BudgetExceeded):
    pass


class FactorizationBreakdown(ComputationError):
    pass


class MomentOverflow(ComputationError):
    pass


class NonFiniteMoment(ComputationError):
    pass


# dynamics
class StepTooLarge(InputError):
    pass


class LeftDomain(ComputationError):
    pass


class TooShort(InputError):
    pass


class SingularBlock(ComputationError):
    pass


# experiments
class RegimeMixed(InputError):
    pass


class SpanTooSmall(InputError):
    pass
