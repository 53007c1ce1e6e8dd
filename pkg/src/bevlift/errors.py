"""Error types raised by the lifting pipeline.

Configuration problems (bad specs, unreadable files) raise ConfigError;
everything else is a numeric/geometric failure raised as a PipelineError
subclass.  The CLI maps ConfigError to exit code 2 and any other
PipelineError to exit code 3.
"""


class PipelineError(Exception):
    """Base class for all pipeline failures."""


class ConfigError(PipelineError):
    """Invalid or inconsistent configuration input."""


class DegenerateOrientation(PipelineError):
    """Camera optical axis is (numerically) parallel to the ground normal."""


class CameraBelowGround(PipelineError):
    """Camera center is on or below the ground plane."""


class HorizonRay(PipelineError):
    """Pixel ray does not descend toward the ground plane."""


class AboveCamera(PipelineError):
    """Requested height is at or above the camera center height."""


class NonPositiveDepth(PipelineError):
    """Depth value must be strictly positive."""


class ShapeMismatch(PipelineError):
    """Array dimensions of two map/grid operands disagree."""


class OutOfRange(PipelineError):
    """Value falls outside the configured bin range."""


class IndexOutOfRange(PipelineError):
    """Bin index falls outside [0, n_bins)."""


class EmptyInput(PipelineError):
    """Operation received no usable values."""


class ExtentTooSmall(PipelineError):
    """Scene extent cannot accommodate the requested boxes."""


class NoVisibleObjects(PipelineError):
    """No scene object projects into the image."""


class InvalidGeometry(PipelineError):
    """Geometric precondition violated (e.g. biased height reaches camera)."""
