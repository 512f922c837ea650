"""Exception types shared across the package."""


class QrsError(Exception):
    """Base class for all errors raised by qrs_sim."""


class LabelCollision(QrsError):
    """A subsystem label occurs more than once where labels must be unique."""


class UnknownLabel(QrsError):
    """A requested label is not part of the space it was looked up in."""


class NotNormalized(QrsError):
    """Amplitudes or coefficients fail the unit-norm requirement."""


class NotHermitian(QrsError):
    """A matrix required to be Hermitian fails the symmetry check."""


class NotIsolated(QrsError):
    """An operation defined only for isolated reference systems was called
    with a non-isolated one."""


class NonDisjointSystems(QrsError):
    """Two subsystems handed to a joint-probability query share tensor
    factors, so the joint probability is undefined."""

    def __init__(self, message, overlap=()):
        super().__init__(message)
        self.overlap = tuple(overlap)


class ConfigError(QrsError):
    """A scenario configuration (file or flags) is malformed."""
