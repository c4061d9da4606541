"""Quantization of daily traffic volume into a discrete state alphabet.

State k covers the half-open interval [k*T, (k+1)*T) seconds, so state 0
is the no-traffic state and states are comparable across users. Bins are
global indices, never re-labeled per user.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from trafficpred.ingest import DailyTrafficSeries


class EmptySequence(ValueError):
    """Operation requires at least one state."""


@dataclass(frozen=True)
class QuantizationConfig:
    """Bin width in seconds, plus an optional cap on the state index."""

    interval_t: int
    max_state: int | None = None

    def __post_init__(self) -> None:
        if self.interval_t < 1:
            raise ValueError(f"interval_t must be >= 1, got {self.interval_t}")
        if self.max_state is not None and self.max_state < 1:
            raise ValueError(f"max_state must be >= 1, got {self.max_state}")


@dataclass
class StateSequence:
    """A day-ordered sequence of state indices plus its alphabet metadata."""

    states: np.ndarray
    alphabet_size: int
    length: int

    @classmethod
    def from_states(cls, states: Iterable[int] | np.ndarray) -> "StateSequence":
        arr = np.asarray(list(states) if not isinstance(states, np.ndarray) else states)
        arr = arr.astype(np.int64)
        if arr.ndim != 1:
            raise ValueError("states must be one-dimensional")
        if np.any(arr < 0):
            raise ValueError("state indices must be non-negative")
        distinct = len(np.unique(arr)) if arr.size else 0
        return cls(states=arr, alphabet_size=distinct, length=int(arr.size))


def quantize_values(
    values: np.ndarray | Iterable[int], config: QuantizationConfig
) -> StateSequence:
    """Map seconds to floor(value / T), clamped to max_state if configured."""
    states = np.asarray(values, dtype=np.int64) // config.interval_t
    if config.max_state is not None:
        states = np.minimum(states, config.max_state)
    return StateSequence.from_states(states)


def quantize_series(series: DailyTrafficSeries, config: QuantizationConfig) -> StateSequence:
    """Quantize one user's gap-free daily series into its state sequence."""
    return quantize_values(series.values, config)


def effective_state_count(seq: StateSequence) -> int:
    """Number of distinct states actually visited (the valid-state count)."""
    if seq.length == 0:
        raise EmptySequence("no states observed")
    return int(len(np.unique(seq.states)))


def midpoint_dequantize(seq: StateSequence, config: QuantizationConfig) -> np.ndarray:
    """Reconstruct seconds as bin midpoints, (k + 0.5) * T.

    For unclamped states the reconstruction error is at most T/2 seconds.
    """
    return (seq.states + 0.5) * float(config.interval_t)


def write_state_rows(
    sequences: Mapping[str, StateSequence], path: Path | str
) -> None:
    """Serialize quantized sequences as ``user_id, day_index, state`` rows."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "day_index", "state"])
        for user in sorted(sequences):
            for day_idx, state in enumerate(sequences[user].states.tolist()):
                writer.writerow([user, day_idx, state])


def read_state_rows(path: Path | str) -> dict[str, StateSequence]:
    """Load sequences written by write_state_rows."""
    per_user: dict[str, list[int]] = {}
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["user_id", "day_index", "state"]:
            raise ValueError(f"unrecognized state file header in {path}")
        for user, day_idx, state in reader:
            per_user.setdefault(user, []).append((int(day_idx), int(state)))
    out: dict[str, StateSequence] = {}
    for user, pairs in per_user.items():
        pairs.sort()
        out[user] = StateSequence.from_states([s for _, s in pairs])
    return out
