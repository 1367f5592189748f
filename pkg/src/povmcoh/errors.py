"""Exception hierarchy shared by all modules."""


class CoherenceError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CoherenceError, ValueError):
    """Input failed a structural or numerical precondition."""


class NonHermitian(ValidationError):
    pass


class NotPsd(ValidationError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DimMismatch(ValidationError):
    pass


class NotIsometry(ValidationError):
    pass


class InfeasibleBlockCompletion(CoherenceError):
    pass


class NoConvergence(CoherenceError):
    pass


class CompletenessViolation(ValidationError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BlochConstraintViolation(ValidationError):
    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint


class OutOfRange(ValidationError):
    pass


class InvalidDistribution(ValidationError):
    pass


class EmptyBlock(ValidationError):
    pass


class NotPure(ValidationError):
    pass


class RelationVerificationFailed(CoherenceError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedPair(CoherenceError):
    pass


class LiftVerificationFailed(CoherenceError):
    def __init__(self, message, prop=None, residual=None):
        super().__init__(message)
        self.prop = prop
        self.residual = residual


class NumericalFailure(CoherenceError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


class NotBlockIncoherent(ValidationError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NotSubspacePreserving(ValidationError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NotComplete(ValidationError):
    pass


class SamplerExhausted(CoherenceError):
    pass


class DegenerateFamily(CoherenceError):
    pass


class NotMbi(ValidationError):
    pass


class NotEmbeddedPreserving(ValidationError):
    pass


class NotConverged(CoherenceError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
