"""Exception types raised by the library."""


class SeaDynError(Exception):
    """Base class for all library errors."""


class NumericFailure(SeaDynError):
    """A computation could not be completed with the requested accuracy."""


class NotHermitian(SeaDynError, ValueError):
    pass


class DimensionMismatch(SeaDynError, ValueError):
    pass


class NotPositive(SeaDynError, ValueError):
    pass


class NotNormalized(SeaDynError, ValueError):
    pass


class EdgeOfDomain(SeaDynError, ValueError):
    pass


class OutOfClass(SeaDynError, ValueError):
    """Input does not belong to the degenerate family an analytic formula covers."""


class DegeneracyMismatch(SeaDynError, ValueError):
    pass


class NotCodiagonal(SeaDynError, ValueError):
    pass


class ComplexRoots(NumericFailure):
    pass


class SingularGram(NumericFailure):
    """The constraint Gram matrix is (numerically) singular."""


class StepSizeUnderflow(NumericFailure):
    pass


class SignalDetected(SeaDynError):
    """A local operation on one subsystem changed what the other subsystem sees."""

    def __init__(self, message, check=None, unitary=None, trial=None, deviation=None):
        super().__init__(message)
        self.check = check
        self.unitary = unitary
        self.trial = trial
        self.deviation = deviation
