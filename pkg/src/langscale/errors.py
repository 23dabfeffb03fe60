"""Exception hierarchy shared across the toolkit."""


class LangScaleError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 4


class InsufficientDataError(LangScaleError):
    exit_code = 2


class DegenerateFitError(LangScaleError):
    exit_code = 2


class DegenerateSeriesError(LangScaleError):
    exit_code = 2


class DomainError(LangScaleError, ValueError):
    exit_code = 3


class FormatError(LangScaleError, ValueError):
    exit_code = 3


class VocabularyError(LangScaleError, KeyError):
    exit_code = 3

    def __str__(self):
        return Exception.__str__(self)


class DecodeError(FormatError):
    def __init__(self, offset, reason):
        super().__init__(f"invalid UTF-8 at byte offset {offset}: {reason}")
        self.offset = offset
