"""Exception hierarchy shared across the toolkit.

Domain failures derive from ``TonguegraftError`` and map to exit code 1 in
the command line tool.  ``ConfigError`` marks invalid configuration or
missing inputs and maps to exit code 2, same as argument parsing errors.
"""


class TonguegraftError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigError(TonguegraftError):
    """Invalid or incomplete configuration (unknown field, missing path)."""


class CorpusError(TonguegraftError):
    """A corpus input is empty or malformed."""


class ModelFormatError(TonguegraftError):
    """A serialized tokenizer or addition document cannot be parsed."""


class InvalidModelError(TonguegraftError):
    """An in-memory tokenizer model violates a structural invariant."""


class VocabularyError(TonguegraftError):
    """Vocabulary arithmetic cannot proceed (nothing to add, id collision)."""


class MixtureError(TonguegraftError):
    """A mixture specification is invalid or infeasible."""


class ScheduleError(TonguegraftError):
    """An unsupported schedule combination or malformed example stream."""
