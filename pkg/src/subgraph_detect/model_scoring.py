"""Additive bag-of-words classifier scoring.

A linear SVM over visual-word histograms scores a feature set as the bias
plus the sum of one weight per feature occurrence, so the response of any
region splits into per-feature (and hence per-node) contributions. Word
indices are 0-based throughout.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Histogram or weight vector lengths disagree."""


@dataclass(frozen=True)
class QuantizedFeature:
    """One localized descriptor occurrence: frame, pixel position, visual word."""

    t: int
    x: int
    y: int
    word: int

    def __post_init__(self):
        for name in ("t", "x", "y", "word"):
            if getattr(self, name) < 0:
                raise ValueError(f"feature field {name!r} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True, eq=False)
class WordModel:
    """Per-word weights plus bias of a linear additive classifier."""

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if w.size < 1:
            raise DimensionError("a word model needs at least one word")
        if not np.all(np.isfinite(w)):
            raise ValueError("word weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def vocab_size(self) -> int:
        return int(self.weights.size)

    def __eq__(self, other):
        if not isinstance(other, WordModel):
            return NotImplemented
        return self.bias == other.bias and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.bias, self.weights.tobytes()))


@dataclass(frozen=True, eq=False)
class TrainingHistogram:
    """Word histogram of one training subvolume and its dual coefficient (sign = class)."""

    counts: np.ndarray
    dual_coefficient: float

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64).reshape(-1)
        if np.any(c < 0):
            raise ValueError("histogram counts must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "dual_coefficient", float(self.dual_coefficient))


def derive_word_weights(
    examples: Sequence[TrainingHistogram],
    bias: float,
    vocab_size: int | None = None,
) -> WordModel:
    """Collapse a linear SVM's dual form into one weight per visual word.

    ``w[j] = sum_i alpha_i * h_j(S_i)``. With no examples the vocabulary size
    must be given and all weights are zero.
    """
    if not examples:
        if vocab_size is None:
            raise DimensionError("vocab_size is required when no training examples are given")
        return WordModel(np.zeros(vocab_size), bias)
    k = examples[0].counts.size
    for i, ex in enumerate(examples):
        if ex.counts.size != k:
            raise DimensionError(f"histogram {i} has {ex.counts.size} bins, expected {k}")
    if vocab_size is not None and vocab_size != k:
        raise DimensionError(f"histograms have {k} bins but vocab_size is {vocab_size}")
    h = np.stack([ex.counts for ex in examples]).astype(np.float64)
    alpha = np.array([ex.dual_coefficient for ex in examples])
    return WordModel(alpha @ h, bias)


def dual_score(histogram: np.ndarray, examples: Sequence[TrainingHistogram], bias: float) -> float:
    """Kernel-form response ``bias + sum_i alpha_i <h, h(S_i)>``, for cross-checking."""
    h = np.asarray(histogram, dtype=np.float64)
    return float(bias + sum(ex.dual_coefficient * float(h @ ex.counts) for ex in examples))


def feature_words(features: Iterable[QuantizedFeature] | np.ndarray) -> np.ndarray:
    if isinstance(features, np.ndarray):
        arr = features.reshape(-1, 4) if features.size else np.empty((0, 4), dtype=np.int64)
        return arr[:, 3].astype(np.int64)
    return np.fromiter((f.word for f in features), dtype=np.int64)


def _check_words(words: np.ndarray, model: WordModel) -> None:
    if words.size and (words.min() < 0 or words.max() >= model.vocab_size):
        bad = int(words[(words < 0) | (words >= model.vocab_size)][0])
        raise IndexError(f"word index {bad} outside vocabulary of size {model.vocab_size}")


def score_feature_set(
    features: Iterable[QuantizedFeature] | np.ndarray,
    model: WordModel,
    include_bias: bool = True,
) -> float:
    """Classifier response of a feature set: optional bias plus summed word weights.

    The sum is correctly rounded, so any reordering of the features gives a
    bit-identical result.
    """
    words = feature_words(features)
    _check_words(words, model)
    total = math.fsum(model.weights[words].tolist())
    return total + model.bias if include_bias else total


def histogram(features: Iterable[QuantizedFeature] | np.ndarray, vocab_size: int) -> np.ndarray:
    words = feature_words(features)
    if words.size and words.max() >= vocab_size:
        raise IndexError(f"word index {int(words.max())} outside vocabulary of size {vocab_size}")
    return np.bincount(words, minlength=vocab_size)


def normalized_window_score(
    features: Iterable[QuantizedFeature] | np.ndarray,
    model: WordModel,
    window_length: int,
) -> float:
    """Score of the L1-normalized window histogram, scaled by the window length in frames.

    Used only by the length-reweighted sliding-window baseline. An empty
    window scores 0.
    """
    if window_length < 1:
        raise ValueError(f"window_length must be >= 1, got {window_length}")
    words = feature_words(features)
    _check_words(words, model)
    if words.size == 0:
        return 0.0
    raw = math.fsum(model.weights[words].tolist())
    return raw / words.size * window_length
