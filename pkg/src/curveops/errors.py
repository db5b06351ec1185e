"""Exception hierarchy for curveops.

Every failure mode that callers are expected to catch gets its own class;
all inherit from CurveopsError so blanket handling stays possible.
"""


class CurveopsError(Exception):
    """Base class for all curveops errors."""


class TruncationFailure(CurveopsError):
    """Theta tail target unreachable within the configured radius cap."""


class InvalidPeriodMatrix(CurveopsError):
    """Period matrix not symmetric or Im part not positive definite."""


class MixedBasePoint(CurveopsError):
    """Jet arithmetic on operands with different base points or orders."""


class DivisionByZeroConstantTerm(CurveopsError):
    """Jet division or log where the constant term vanishes."""


class OrderExhausted(CurveopsError):
    """More derivatives requested than the jet order carries."""


class QuadratureFailure(CurveopsError):
    """A contour or segment quadrature failed its self-check."""


class PathThroughBranchPoint(CurveopsError):
    """Integration path hits a branch point of the curve."""


class VerificationFailure(CurveopsError):
    """A construction-time identity check did not hold."""


class OnThetaDivisor(CurveopsError):
    """Evaluation point lands on a zero of the relevant theta factor."""


class PoleAtArgument(CurveopsError):
    """Kernel evaluated at one of its poles."""


class NonGenericTwist(CurveopsError):
    """Twist vector on (or too close to) the degenerate locus."""


class BadDivisorDegree(CurveopsError):
    """Divisor fails a degree or effectivity requirement."""


class FitIllConditioned(CurveopsError):
    """Least-squares series fit has an unusable condition number."""


class InsufficientJetOrder(CurveopsError):
    """Operator application needs more jet order than the form carries."""


class CoincidentPoints(CurveopsError):
    """Distinct evaluation points required."""


class MonodromyMismatch(CurveopsError):
    """A section failed its declared twist check."""


class DegenerateBasis(CurveopsError):
    """Constructed family of sections is numerically dependent."""


class ResidueFitFailure(CurveopsError):
    """Laurent fit for a residue extraction failed."""


class SupportOnCycle(CurveopsError):
    """Zero or pole sits on an integration cycle."""


class NonIntegerWinding(CurveopsError):
    """Winding-number quadrature did not land near an integer."""


class NoAdmissibleShift(CurveopsError):
    """No random shift produced an admissible twisted element."""


class CoincidentSupportWithoutLeadingCoefficient(CurveopsError):
    """Tame symbol needs a leading coefficient that cannot be extracted."""


class SpecParseError(CurveopsError):
    """Malformed curve or suite specification."""
