"""Scaling properties of text: measurement, baseline generators and reports."""

__version__ = "0.1.0"

from .errors import (
    DecodeError,
    DegenerateFitError,
    DegenerateSeriesError,
    DomainError,
    FormatError,
    InsufficientDataError,
    LangScaleError,
    VocabularyError,
)
from .powerlaw import PowerLawFit, fit_power_law
from .textio import TokenStream, Vocabulary, preprocess, read_tokens, shuffle_ngram, tokenize

__all__ = [
    "DecodeError",
    "DegenerateFitError",
    "DegenerateSeriesError",
    "DomainError",
    "FormatError",
    "InsufficientDataError",
    "LangScaleError",
    "PowerLawFit",
    "TokenStream",
    "Vocabulary",
    "__version__",
    "fit_power_law",
    "preprocess",
    "read_tokens",
    "shuffle_ngram",
    "tokenize",
]
