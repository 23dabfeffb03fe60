"""Baseline text generators and n-gram language models."""

from .ngram import (
    NGramModel,
    PerplexityResult,
    good_turing_discounts,
    kn_discount,
    ngram_generate,
    ngram_prob,
    ngram_train,
    perplexity,
)
from .processes import (
    PitmanYorParams,
    SimonParams,
    pitman_yor_branch_probs,
    pitman_yor_generate,
    simon_generate,
)

__all__ = [
    "NGramModel",
    "PerplexityResult",
    "PitmanYorParams",
    "SimonParams",
    "good_turing_discounts",
    "kn_discount",
    "ngram_generate",
    "ngram_prob",
    "ngram_train",
    "perplexity",
    "pitman_yor_branch_probs",
    "pitman_yor_generate",
    "simon_generate",
]
