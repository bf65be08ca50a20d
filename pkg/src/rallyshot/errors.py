"""Exception hierarchy shared across the toolkit.

Everything deriving from RallyshotError is an input, data, or configuration
problem; the CLI maps these to exit code 2. Anything else escaping a
subcommand is treated as an internal error (exit code 1).
"""

from __future__ import annotations


class RallyshotError(Exception):
    """Base class for all user-facing errors."""


class ParseError(RallyshotError):
    """A record could not be decoded from its wire format."""

    def __init__(self, path: object, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason


class ValidationError(RallyshotError):
    """A decoded record violates a declared invariant."""

    def __init__(self, reason: str, field: str | None = None, line_no: int | None = None):
        loc = f" (line {line_no})" if line_no is not None else ""
        fld = f"{field}: " if field else ""
        super().__init__(f"{fld}{reason}{loc}")
        self.field = field
        self.line_no = line_no
        self.reason = reason


class GeometryError(RallyshotError):
    """Court geometry is degenerate or a spatial precondition failed."""


class SequencingError(RallyshotError):
    """Frames were presented out of order to a stateful consumer."""


class DegeneratePoseError(RallyshotError):
    """A pose cannot be normalized (missing hips or zero spread)."""


class DegenerateEmbeddingError(RallyshotError):
    """An embedding has zero norm and cannot enter a cosine-space loss."""


class ShapeError(RallyshotError):
    """Tensor shapes do not conform to the operation contract."""


class DataError(RallyshotError):
    """A dataset is empty, too small, or otherwise unusable."""


class ConfigError(RallyshotError):
    """A configuration value is invalid or inconsistent."""


class AlignmentError(RallyshotError):
    """Track and keypoint streams disagree about player identities."""

    def __init__(self, reason: str, frames: list[int] | None = None):
        self.frames = frames or []
        shown = ", ".join(str(f) for f in self.frames[:10])
        more = ", ..." if len(self.frames) > 10 else ""
        suffix = f" (frames: {shown}{more})" if self.frames else ""
        super().__init__(f"{reason}{suffix}")
