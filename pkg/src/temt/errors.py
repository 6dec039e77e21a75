"""Exception taxonomy. The CLI maps these onto process exit codes."""


class TemtError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TemtError):
    """Invalid configuration value (bad flag, bad config-file entry, odd dimension)."""


class DataError(TemtError):
    """Problem with input data or artifacts produced from it."""


class IngestionError(DataError):
    """Malformed dataset file content; message names file and line."""


class ResolutionError(DataError):
    """A quadruple references an entity or relation id that is not in the vocabulary."""


class SamplingError(DataError):
    """Negative sampling cannot produce the requested samples."""


class SplitError(DataError):
    """Inductive split could not reach its removal targets."""

    def __init__(self, message, achieved_valid=0, achieved_test=0):
        super().__init__(message)
        self.achieved_valid = achieved_valid
        self.achieved_test = achieved_test


class MissingEmbeddingError(DataError):
    """A sentence key is absent from the loaded embedding table."""


class NumericError(TemtError):
    """Numerical failure during training or inference."""


class NonFiniteLossError(NumericError):
    """Training loss became NaN or infinite; message identifies the batch."""
