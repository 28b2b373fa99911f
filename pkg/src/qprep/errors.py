"""Exception hierarchy for qprep."""


class QprepError(Exception):
    """Base class for all qprep errors."""


class ValidationError(QprepError):
    """A problem instance violates one of its invariants."""


class NotPowerOfTwo(ValidationError):
    pass


class ProbabilityNotNormalized(ValidationError):
    pass


class EtaOutOfRange(ValidationError):
    pass


class EtaConstraintViolated(ValidationError):
    """p(x) exceeds 1/(eta*N) (or eta*N*p(x) >= 1) at some x."""

    def __init__(self, x, message):
        super().__init__(message)
        self.x = x


class DomainTooLarge(QprepError):
    """2^a * N exceeds the configured enumeration cap."""


class DimensionMismatch(QprepError):
    pass


class AllMassInAuxRegion(QprepError):
    """Projection onto the payload register is undefined (1 - p_fail < 1e-15)."""


class DegenerateSplit(QprepError):
    """Good/bad split with an empty side; the rotation picture does not apply."""


class NoRealRoot(QprepError):
    """Normalization quadratic for a model state has no real solution."""


class StructureViolation(QprepError):
    """State does not have the expected class structure within tolerance."""


class RetriesExhausted(QprepError):
    """Sampled auxiliary measurement failed max_retries times in a row."""
