"""Error types shared across the package."""


class InvalidPixelError(ValueError):
    """Sampling hit an out-of-bounds coordinate or an invalid depth neighbor."""


class DegenerateFrameError(RuntimeError):
    """Too few valid pixels, or an unsolvable normal system, to estimate motion."""


class DegenerateScaleError(RuntimeError):
    """Depth statistics are degenerate (zero variance or median); cannot scale."""


class InfeasibleBoundError(RuntimeError):
    """The depth bound cannot be met by any step, even after relaxation."""


class SequenceFormatError(ValueError):
    """A sequence index or trajectory file failed to parse."""

    def __init__(self, path, line_number, message):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = str(path)
        self.line_number = line_number


class EvaluationError(RuntimeError):
    """Trajectories cannot be compared (no overlapping time span)."""
