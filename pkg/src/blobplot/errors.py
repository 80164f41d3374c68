"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
PipelineError -> 3.
"""


class BlobplotError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(BlobplotError):
    """Invalid configuration: unknown key, bad value, broken invariant."""


class DataError(BlobplotError):
    """Input data cannot be ingested or violates a dataset invariant."""


class PipelineError(BlobplotError):
    """A pipeline stage failed; message carries the stage name."""
