"""Exception hierarchy shared by all modules."""


class CPRError(Exception):
    """Base class for errors raised by splinecpr."""


class GeneratorError(CPRError, ValueError):
    """Invalid or degenerate generator."""


class NodeError(CPRError, ValueError):
    """Invalid sampling node set (wrong size, repeats, outside (0, 1))."""


class InconsistentMagnitudesError(CPRError):
    """Phaseless data that no signal in the model can produce."""


class DegenerateRecoveryError(CPRError):
    """A linear step of the local recovery is (numerically) singular."""


class SpanningError(CPRError):
    """The generator's outer products do not span the symmetric matrices."""

    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension


class GramRankError(CPRError):
    """A Gram matrix that is not of rank at most two."""


class StitchError(CPRError):
    """Neighbouring local blocks disagree on their overlap."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class RecoveryError(CPRError):
    """Failure of the end-to-end pipeline, tagged with the interval index."""

    def __init__(self, message, interval=None, cause=None):
        super().__init__(message)
        self.interval = interval
        self.cause = cause
