"""Exception hierarchy shared by all eegchair modules.

The CLI maps each class to an exit status, so new failure kinds should
subclass one of these rather than raising bare ``ValueError``.
"""


class EegChairError(Exception):
    """Base class for every error raised deliberately by this package."""


class SchemaError(EegChairError, ValueError):
    """Input data does not match the expected layout or alphabet."""


class ValidationError(EegChairError, ValueError):
    """A parameter or precondition is violated."""


class TrainingError(EegChairError, RuntimeError):
    """Classifier training failed (e.g. divergent loss)."""


class ModelFileError(EegChairError, ValueError):
    """A model file is corrupt, tampered with, or from another version."""
