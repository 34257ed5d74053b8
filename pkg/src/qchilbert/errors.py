"""Exception hierarchy shared by all solver stages."""


class QCHilbertError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for it."""

    exit_code = 3


class InputError(QCHilbertError, ValueError):
    exit_code = 2


class DomainError(InputError):
    """A point lies outside (or on the boundary of) the domain it must be in."""


class UnsupportedError(InputError):
    """The request is well-formed but outside what the solver can do."""


class InfeasibleError(QCHilbertError):
    pass


class CertificationError(QCHilbertError):
    def __init__(self, message, arc=None):
        super().__init__(message)
        self.arc = arc


class ResolutionError(QCHilbertError):
    """Discretization too coarse for the requested accuracy."""


class ConvergenceError(QCHilbertError):
    pass


class StageError(QCHilbertError):
    """Wraps a failure inside a pipeline with the name of the stage."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3)
