"""Exception hierarchy shared by every pipeline stage."""


class RidgekitError(Exception):
    """Base class for all errors raised by ridgekit."""


class ImageFormatError(RidgekitError):
    pass


class ManifestError(RidgekitError):
    pass


class PipelineError(RidgekitError):
    """A processing stage could not produce a usable result."""


class EmptyRoiError(PipelineError):
    pass


class FrequencyEstimationError(PipelineError):
    pass


class InsufficientMinutiaeError(PipelineError):
    pass


class CodeFormatError(RidgekitError):
    """A serialized finger-code or minutiae file is malformed."""


class IncompatibleCodesError(RidgekitError):
    pass


class ConfigError(RidgekitError):
    pass
