"""Exception types raised across the package."""


class TD3fGError(Exception):
    """Base class for every error raised by td3fg."""


class InvalidArchitectureError(TD3fGError, ValueError):
    pass


class ShapeError(TD3fGError, ValueError):
    pass


class NumericError(TD3fGError, FloatingPointError):
    """A non-finite value reached an optimizer update."""


class InvalidScheduleError(TD3fGError, ValueError):
    pass


class EpisodeFinishedError(TD3fGError, RuntimeError):
    pass


class EmptyDemosError(TD3fGError, ValueError):
    pass


class InvalidSampleError(TD3fGError, ValueError):
    pass


class InvalidConfigError(TD3fGError, ValueError):
    pass


class EmptyBufferError(TD3fGError, LookupError):
    pass


class UnknownPresetError(TD3fGError, KeyError):
    pass
