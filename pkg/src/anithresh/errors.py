"""Exception hierarchy shared by all modules."""


class AnithreshError(Exception):
    """Base class for all library errors."""


class NoRoot(AnithreshError):
    """Young's equation has no solution (complete wetting or dewetting)."""


class NotWeak(AnithreshError):
    """Operation requires a weak (or isotropic) anisotropy."""


StrongAnisotropy = NotWeak


class NoIntersection(AnithreshError):
    """Truncation line does not cut the Wulff shape."""


class KernelGridMismatch(AnithreshError):
    """Kernel and field live on different grids."""


GridMismatch = KernelGridMismatch


class DegenerateLevel(AnithreshError):
    """Requested level lies outside the range of the field."""


class NegativeWeight(AnithreshError):
    """Inverse cosine transform of the anisotropy is negative somewhere."""


class NonpositiveSigma(AnithreshError):
    """mu * (gamma + gamma'') is not strictly positive."""


class ZeroLineMass(AnithreshError):
    """Line integral of a kernel vanished."""


class Extinct(AnithreshError):
    """The evolving particle disappeared."""


class PastExtinction(AnithreshError):
    """Self-similar solution requested after its extinction time."""


class InsufficientDomain(AnithreshError):
    """Requested particle size exceeds the available grid points."""


class NoContact(AnithreshError):
    """The particle does not touch the substrate."""


class MaxSteps(AnithreshError):
    """Iteration cap reached before termination."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConfigError(AnithreshError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """Configuration text could not be parsed."""


class ValidationError(ConfigError):
    """Configuration parsed but failed validation."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
