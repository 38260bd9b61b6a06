"""Row-wise activations for the attention stack.

``hardmax_rows`` follows the zero-temperature convention: each row spreads
unit mass uniformly over every entry that is *bitwise* equal to the row
maximum. The comparison is deliberately ``==`` and not an isclose: the weight
constructions arrange their score matrices so that ties occur exactly where
they are intended (identical float operands), and any near-tie is a bug we
want to surface, not paper over.
"""

from __future__ import annotations

import numpy as np


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def hardmax_rows(scores: np.ndarray) -> np.ndarray:
    """Exact-tie argmax indicator, averaged over the tie set per row."""
    if scores.ndim != 2:
        raise ValueError("scores must be 2-d")
    row_max = scores.max(axis=1, keepdims=True)
    ties = scores == row_max
    counts = ties.sum(axis=1, keepdims=True)
    return ties / counts


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row softmax, stabilised by subtracting the row maximum.

    Temperature is not applied here; the compiler folds 1/T into W_Q when it
    materialises a program for softmax execution.
    """
    if scores.ndim != 2:
        raise ValueError("scores must be 2-d")
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)
