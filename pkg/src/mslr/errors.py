"""Exception hierarchy shared by every module of the package."""


class MSLRError(Exception):
    """Base class for all package errors."""


class DegenerateRegime(MSLRError, ValueError):
    """No finite CORR sample bound exists (a denominator minimum is zero)."""


class UnachievableOverlap(MSLRError, ValueError):
    """The requested support overlap cannot be realized for (p, k)."""


class UnachievableTau(MSLRError, ValueError):
    """No sign pattern on the intersection realizes the requested tau."""


class ZeroNoise(MSLRError, ValueError):
    """The detection model needs sigma > 0."""


class ZeroResponse(MSLRError, ValueError):
    """The response vector is identically zero."""


class DimensionMismatch(MSLRError, ValueError):
    pass


class IndexOutOfRange(MSLRError, IndexError):
    pass


class BalancedProportions(MSLRError, ValueError):
    """spectral_init cannot separate components when n1 == n2."""


class EigenFailure(MSLRError, RuntimeError):
    pass


class TooFewSamples(MSLRError, ValueError):
    pass


class SupportEmpty(MSLRError, ValueError):
    """CORR selected no coordinates, so there is nothing to recover."""


class UnsupportedValueSet(MSLRError, ValueError):
    """Exact low-degree formulas exist only for {+1} and {-1, +1}."""


class DegreeTooLarge(MSLRError, ValueError):
    pass


class TooLarge(MSLRError, ValueError):
    """Brute-force enumeration requested outside its feasible size."""


class BadDimensions(MSLRError, ValueError):
    pass


class RecordMismatch(MSLRError, ValueError):
    pass


class SchemaMismatch(MSLRError, ValueError):
    pass
