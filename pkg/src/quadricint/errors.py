"""Exception hierarchy for quadricint."""


class QuadricIntError(Exception):
    """Base class for all quadricint errors."""


# -- fields ------------------------------------------------------------------

class FieldUnbounded(QuadricIntError):
    """A sampled point violates the declared decay/growth bound."""


class ConditionHrViolated(QuadricIntError):
    """The exponent inequalities relating decay and growth rates fail."""


class UnknownField(QuadricIntError):
    """Catalog name not recognised."""


class BadParams(QuadricIntError):
    """Catalog parameters missing or out of range."""


# -- geometry ----------------------------------------------------------------

class DegeneratePoint(QuadricIntError):
    """Point lies on the diagonal axes x = +/-y where the normal chart fails."""


class OutsideTube(QuadricIntError):
    """Point is farther from the quadric than the certified tube half-width."""


class FrameConstructionFailed(QuadricIntError):
    """Could not build an orthonormal tangent frame (degenerate input)."""


class SlabTooWide(QuadricIntError):
    """Rejection-slab width too large relative to the tube half-width."""


class NonIntegrableProfile(QuadricIntError):
    """Radial quadrature detected a divergent profile."""


# -- integrator --------------------------------------------------------------

class BudgetExhausted(QuadricIntError):
    """Sample budget exhausted before the requested tolerance was met."""


class NuOutOfRange(QuadricIntError):
    """nu must lie in (0, 1]."""


class BoundViolated(QuadricIntError):
    """An empirical estimate exceeded its analytic bound (implementation bug)."""


class QuadratureNonConvergent(QuadricIntError):
    """Adaptive quadrature failed to converge under refinement."""


# -- asymptotics -------------------------------------------------------------

class MethodsDisagree(QuadricIntError):
    """Independent surface-integral methods disagree beyond tolerance."""


class RemainderUnbounded(QuadricIntError):
    """Remainder ratio grows beyond the certified slack over the sweep."""


# -- surface measure ---------------------------------------------------------

class NormExponentTooSmall(QuadricIntError):
    """Weighted sup-norm exponent too small for the functional to be bounded."""


class NotCompactlySupported(QuadricIntError):
    """Operation requires a compactly supported field."""


# -- variants ----------------------------------------------------------------

class SupportTouchesOrigin(QuadricIntError):
    """The d=1 variant needs an integrand vanishing near the origin."""


class PVNonConvergent(QuadricIntError):
    """Principal-value exterior integral lacks the decay needed to converge."""


class DecayInsufficient(QuadricIntError):
    """Kernel integrand decays too slowly for the surface integral."""


# -- stationary phase --------------------------------------------------------

class DegenerateHessian(QuadricIntError):
    """Hessian at the critical point is (numerically) singular."""


class ResolutionExceeded(QuadricIntError):
    """Oscillation frequency too high for the evaluation budget."""


class CriticalPointOnSupportBoundary(QuadricIntError):
    """Critical point sits on the support boundary of the amplitude."""


# -- cli ---------------------------------------------------------------------

class ConfigInvalid(QuadricIntError):
    """Configuration file is invalid; carries the offending key."""

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"config invalid: {key}: {reason}")
