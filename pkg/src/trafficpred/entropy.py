"""Entropy measures for discrete state sequences.

Three measures with decreasing blindness to structure: random entropy
(log2 of the alphabet actually visited), temporal-uncorrelated entropy
(Shannon entropy of the visit histogram, order ignored), and real
entropy, an entropy *rate* that accounts for temporal order, estimated
either exactly from block statistics (small inputs only) or with a
match-length estimator that scales to long sequences.

All results are in bits.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from trafficpred.quantizer import EmptySequence, StateSequence

ESTIMATOR_EXACT = "exact"
ESTIMATOR_LZ = "lz"


class SequenceTooShort(ValueError):
    """The estimator needs a longer sequence."""


class BlockTooLong(ValueError):
    """Requested block length exceeds the sequence length."""


@dataclass(frozen=True)
class EntropyReport:
    """The three entropies of one sequence, plus the alphabet and length
    they were computed over and which real-entropy estimator produced
    ``s_real``."""

    s_rand: float
    s_unc: float
    s_real: float
    n_states: int
    seq_length: int
    estimator: str


def random_entropy(seq: StateSequence) -> float:
    """log2 of the number of distinct states ever visited."""
    if seq.length == 0:
        raise EmptySequence("cannot compute entropy of an empty sequence")
    return math.log2(seq.alphabet_size)


def uncorrelated_entropy(seq: StateSequence) -> float:
    """Shannon entropy of the empirical state histogram, order ignored."""
    if seq.length == 0:
        raise EmptySequence("cannot compute entropy of an empty sequence")
    _, counts = np.unique(seq.states, return_counts=True)
    probs = counts / seq.length
    return float(-np.sum(probs * np.log2(probs)))


def _block_entropy(states: np.ndarray, k: int) -> float:
    """Shannon entropy of the empirical distribution of contiguous k-blocks."""
    if k == 0:
        return 0.0
    n_blocks = len(states) - k + 1
    counts = Counter(tuple(states[i : i + k]) for i in range(n_blocks))
    total = float(n_blocks)
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


def real_entropy_exact(seq: StateSequence, max_block: int) -> float:
    """Block-entropy-rate estimate: H(max_block) - H(max_block - 1).

    Exact but exponential in ``max_block``; intended as a small-scale
    cross-check for the match-length estimator, not for production runs.
    At ``max_block == 1`` this equals ``uncorrelated_entropy`` identically.
    """
    if seq.length == 0:
        raise EmptySequence("cannot compute entropy of an empty sequence")
    if max_block < 1 or max_block > seq.length:
        raise BlockTooLong(
            f"max_block must be in [1, {seq.length}], got {max_block}"
        )
    states = seq.states.tolist()
    return _block_entropy(states, max_block) - _block_entropy(states, max_block - 1)


def match_length_sum(states: np.ndarray) -> int:
    """Sum over positions of the shortest-new-subsequence length.

    Position i scores the length of the shortest contiguous subsequence
    starting at i that does not occur anywhere inside the first i symbols;
    if every subsequence starting at i (including the whole remaining
    suffix) occurred earlier, it scores the suffix length plus one.

    Equivalently each position contributes (longest prefix of its suffix
    occurring entirely within the preceding symbols) + 1. The scan works
    breadth-first over match lengths L: the length-L window at i occurs
    inside the prefix iff the first occurrence of that window starts at or
    before i - L. Windows are compared by iteratively refined gram ids, so
    each round is a vectorized sort; total cost is O(n log n) per unit of
    maximum match length, which stays small on entropy-positive input.
    """
    n = int(states.size)
    if n == 0:
        return 0
    longest = np.zeros(n, dtype=np.int64)
    # length-1 grams are the (compressed) symbols themselves
    _, gram = np.unique(states, return_inverse=True)
    gram = gram.astype(np.int64)
    sym = gram
    n_sym = int(sym.max()) + 1
    length = 1
    while True:
        n_starts = n - length + 1
        _, first_idx, inverse = np.unique(
            gram, return_index=True, return_inverse=True
        )
        occurs_in_prefix = first_idx[inverse] <= np.arange(n_starts) - length
        if not np.any(occurs_in_prefix):
            break
        longest[:n_starts][occurs_in_prefix] = length
        if n_starts == 1:
            break
        # refine to length+1 grams by pairing each gram with the next symbol
        gram = inverse[:-1] * n_sym + sym[length : length + n_starts - 1]
        length += 1
    return int(longest.sum()) + n


def real_entropy_lz(seq: StateSequence) -> float:
    """Match-length estimate of the entropy rate, in bits per symbol.

    The estimate is n * log2(n) divided by the match-length sum; it
    converges to the true entropy rate of a stationary source as the
    sequence grows, and degrades gracefully into a small positive number
    on short or degenerate input.
    """
    if seq.length < 2:
        raise SequenceTooShort("match-length estimation needs at least 2 states")
    n = seq.length
    return n * math.log2(n) / match_length_sum(seq.states)


def entropy_report(
    seq: StateSequence,
    estimator: str = ESTIMATOR_LZ,
    max_block: int = 3,
) -> EntropyReport:
    """Compute all three entropies for one sequence.

    Single-state sequences short-circuit to zero for all three measures:
    a user who never leaves one state carries no uncertainty, even though
    the raw match-length formula would report a small positive rate.
    """
    if seq.length == 0:
        raise EmptySequence("cannot compute entropy of an empty sequence")
    if estimator not in (ESTIMATOR_EXACT, ESTIMATOR_LZ):
        raise ValueError(f"unknown estimator {estimator!r}")
    if seq.alphabet_size == 1:
        return EntropyReport(
            s_rand=0.0,
            s_unc=0.0,
            s_real=0.0,
            n_states=1,
            seq_length=seq.length,
            estimator=estimator,
        )
    if estimator == ESTIMATOR_LZ:
        s_real = real_entropy_lz(seq)
    else:
        s_real = real_entropy_exact(seq, max_block=min(max_block, seq.length))
    return EntropyReport(
        s_rand=random_entropy(seq),
        s_unc=uncorrelated_entropy(seq),
        s_real=s_real,
        n_states=seq.alphabet_size,
        seq_length=seq.length,
        estimator=estimator,
    )
