"""Exception types shared across the package.

Everything derives from ValueError so callers can catch broadly; the CLI
maps InvalidConfigError to exit code 2 and the rest to exit code 1.
"""


class ShapeMismatchError(ValueError):
    """Operands disagree on spatial or channel dimensions."""


class EmptyClassError(ValueError):
    """A pooling region selected zero pixels; the episode is malformed."""


class EpisodeInconsistencyError(ValueError):
    """Per-backbone branches of one episode disagree on support structure."""


class InvalidConfigError(ValueError):
    """A run, voting, or CLI configuration is malformed."""


class DatasetTooSmallError(ValueError):
    """A class lacks enough annotated images for the requested episodes."""


class ManifestError(ValueError):
    """A dataset manifest fails validation."""


class EvaluationError(ValueError):
    """An episode failed during an evaluation run; names the episode index."""


class FvolFormatError(ValueError):
    """A feature-volume file is corrupt; carries the byte offset of the fault."""

    def __init__(self, message, path=None, offset=0):
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}{message} (byte offset {offset})")
        self.path = path
        self.offset = offset


class UnsupportedFormatError(ValueError):
    """A mask image is not 8-bit single-channel grayscale."""
