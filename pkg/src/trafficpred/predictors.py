"""Next-state predictors over quantized sequences and their online evaluation.

Three model families:

* order-k Markov with suffix-shortening fallback: prediction uses the
  longest suffix of the recent history that has ever been observed,
  ending at the global state frequency when nothing longer matches.
  Without fallback a high-order model would abstain on nearly every step
  of a six-month daily series, since long contexts rarely recur.
* most-frequent baseline: predicts the historically modal state.
* diffusion kernel: scores next states through a truncated matrix
  exponential of the first-order transition matrix, so probability mass
  diffuses over multi-step paths instead of only direct transitions.

All ties break toward the smallest state index, which keeps every
predictor deterministic and testable.

Evaluation is prequential: predict each next state from the growing
prefix, reveal the truth, update, repeat.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from trafficpred.entropy import SequenceTooShort
from trafficpred.quantizer import StateSequence

DIFFUSION_SERIES_TERMS = 16


class NoPrediction(RuntimeError):
    """The model has not seen a single event yet."""


class EmptyHistory(ValueError):
    """Most-frequent prediction needs at least one observation."""


class DegenerateHistory(ValueError):
    """Diffusion fitting needs at least two observations."""


def _argmax_count(table: dict[int, int]) -> int:
    """Highest count wins; ties go to the smallest state index."""
    return min(table.items(), key=lambda kv: (-kv[1], kv[0]))[0]


class MarkovModel:
    """Context -> next-state counts for every order from 0 up to k.

    Keeping all suborders during fitting makes fallback an O(k) probe at
    prediction time instead of a refit.
    """

    def __init__(self, order: int):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        self.order = order
        self.context_counts: dict[tuple[int, ...], dict[int, int]] = {}

    def update(self, history_tail: Sequence[int], next_state: int) -> None:
        """Record (context, next) for every suffix of the tail, length 0..k."""
        tail = tuple(history_tail)[-self.order :]
        for j in range(len(tail) + 1):
            context = tail[len(tail) - j :]
            table = self.context_counts.get(context)
            if table is None:
                table = self.context_counts[context] = {}
            table[next_state] = table.get(next_state, 0) + 1

    def predict(self, history_tail: Sequence[int]) -> int:
        """Argmax next state at the longest suffix with any observations.

        Falls through shorter suffixes down to the order-0 (global
        frequency) table; raises NoPrediction only for an unfitted model.
        """
        tail = tuple(history_tail)[-self.order :]
        for j in range(len(tail), -1, -1):
            table = self.context_counts.get(tail[len(tail) - j :])
            if table:
                return _argmax_count(table)
        raise NoPrediction("model has seen no events")


def mf_predict(history: Sequence[int]) -> int:
    """The state with the highest count so far; ties to the smallest index."""
    if len(history) == 0:
        raise EmptyHistory("most-frequent prediction needs history")
    counts: dict[int, int] = {}
    for state in history:
        counts[state] = counts.get(state, 0) + 1
    return _argmax_count(counts)


@dataclass
class DiffusionModel:
    """Diffusion scores over the observed alphabet.

    ``kernel[i, j]`` is the score of moving from states[i] to states[j]
    along paths of any length up to the series truncation; ``states`` is
    sorted ascending so the first argmax hit is the smallest state.
    """

    states: list[int]
    kernel: np.ndarray
    beta: float
    fallback_state: int

    def __post_init__(self) -> None:
        self._index = {s: i for i, s in enumerate(self.states)}
        if self.kernel.shape != (len(self.states), len(self.states)):
            raise ValueError("kernel dimensions must match the state count")
        if not np.all(np.isfinite(self.kernel)) or np.any(self.kernel < 0):
            raise ValueError("kernel entries must be finite and non-negative")

    def index_of(self, state: int) -> int | None:
        return self._index.get(state)


def _transition_matrix(history: Sequence[int], states: list[int]) -> np.ndarray:
    """Row-normalized first-order transition counts; rows with no
    outgoing observations stay zero."""
    index = {s: i for i, s in enumerate(states)}
    counts = np.zeros((len(states), len(states)))
    for a, b in zip(history[:-1], history[1:]):
        counts[index[a], index[b]] += 1.0
    row_sums = counts.sum(axis=1, keepdims=True)
    np.divide(counts, row_sums, out=counts, where=row_sums > 0)
    return counts


def _diffusion_kernel(transition: np.ndarray, beta: float, terms: int) -> np.ndarray:
    """Sum of beta^m / m! * P^m for m = 1..terms.

    The zeroth (identity) term is deliberately left out: the kernel scores
    where mass flows, so in the beta -> 0 limit the argmax row matches the
    plain first-order transition argmax instead of always picking the
    current state.
    """
    term = np.eye(transition.shape[0])
    kernel = np.zeros_like(transition)
    for m in range(1, terms + 1):
        term = term @ transition * (beta / m)
        kernel += term
    return kernel


def diffusion_fit(
    history: Sequence[int], beta: float = 1.0, terms: int = DIFFUSION_SERIES_TERMS
) -> DiffusionModel:
    """Build the diffusion model from a state history.

    A history visiting a single distinct state yields a 1x1 kernel and the
    model simply keeps predicting that state.
    """
    history = list(history)
    if len(history) < 2:
        raise DegenerateHistory("diffusion fitting needs at least 2 observations")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    states = sorted(set(history))
    transition = _transition_matrix(history, states)
    kernel = _diffusion_kernel(transition, beta, terms)
    return DiffusionModel(
        states=states,
        kernel=kernel,
        beta=beta,
        fallback_state=mf_predict(history),
    )


def diffusion_predict(model: DiffusionModel, current: int) -> int:
    """Argmax of the kernel row for the current state.

    Unseen states, and states whose row carries no mass, fall back to the
    modal state of the fit history; prediction never errors.
    """
    idx = model.index_of(current)
    if idx is None:
        return model.fallback_state
    row = model.kernel[idx]
    if row.max() <= 0.0:
        return model.fallback_state
    return model.states[int(np.argmax(row))]


@dataclass(frozen=True)
class PredictionOutcome:
    """Counts from an online evaluation run."""

    total: int
    correct: int

    def __post_init__(self) -> None:
        if not 0 <= self.correct <= self.total:
            raise ValueError(f"correct={self.correct} outside [0, {self.total}]")

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise ValueError("accuracy undefined with zero prediction events")
        return self.correct / self.total


class OnlinePredictor(Protocol):
    def observe(self, state: int) -> None: ...

    def predict(self) -> int: ...


class OnlineMarkov:
    """Incremental wrapper keeping the recent tail alongside a MarkovModel."""

    def __init__(self, order: int):
        self.model = MarkovModel(order)
        self._tail: deque[int] = deque(maxlen=order)

    def observe(self, state: int) -> None:
        self.model.update(tuple(self._tail), state)
        self._tail.append(state)

    def predict(self) -> int:
        return self.model.predict(tuple(self._tail))


class OnlineMostFrequent:
    def __init__(self) -> None:
        self._counts: dict[int, int] = {}

    def observe(self, state: int) -> None:
        self._counts[state] = self._counts.get(state, 0) + 1

    def predict(self) -> int:
        if not self._counts:
            raise NoPrediction("no history yet")
        return _argmax_count(self._counts)


class OnlineDiffusion:
    """Diffusion predictor refit from accumulated transition counts.

    Counts update incrementally; each prediction walks the current state's
    unit vector through the truncated exponential series (vector-matrix
    products), which is equivalent to one row of the full kernel without
    forming it.
    """

    def __init__(self, beta: float = 1.0, terms: int = DIFFUSION_SERIES_TERMS):
        if beta <= 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.beta = beta
        self.terms = terms
        self._counts: dict[int, int] = {}
        self._pairs: dict[tuple[int, int], int] = {}
        self._last: int | None = None

    def observe(self, state: int) -> None:
        if self._last is not None:
            pair = (self._last, state)
            self._pairs[pair] = self._pairs.get(pair, 0) + 1
        self._counts[state] = self._counts.get(state, 0) + 1
        self._last = state

    def predict(self) -> int:
        if self._last is None:
            raise NoPrediction("no history yet")
        states = sorted(self._counts)
        if len(states) == 1:
            return states[0]
        index = {s: i for i, s in enumerate(states)}
        transition = np.zeros((len(states), len(states)))
        for (a, b), c in self._pairs.items():
            transition[index[a], index[b]] = c
        row_sums = transition.sum(axis=1, keepdims=True)
        np.divide(transition, row_sums, out=transition, where=row_sums > 0)
        vec = np.zeros(len(states))
        vec[index[self._last]] = 1.0
        scores = np.zeros(len(states))
        coefficient = 1.0
        for m in range(1, self.terms + 1):
            vec = vec @ transition
            coefficient *= self.beta / m
            scores += coefficient * vec
        if scores.max() <= 0.0:
            return _argmax_count(self._counts)
        return states[int(np.argmax(scores))]


@dataclass(frozen=True)
class PredictorSpec:
    """Names one predictor: markov(k), mf, or diffusion(beta)."""

    kind: str
    order: int | None = None
    beta: float | None = None

    @classmethod
    def parse(cls, text: str) -> "PredictorSpec":
        text = text.strip().lower()
        if text == "mf":
            return cls(kind="mf")
        for prefix in ("markov", "mc"):
            if text.startswith(prefix):
                arg = text[len(prefix) :].strip("()")
                return cls(kind="markov", order=int(arg))
        if text.startswith("diffusion"):
            arg = text[len("diffusion") :].strip("()")
            return cls(kind="diffusion", beta=float(arg) if arg else 1.0)
        raise ValueError(f"unknown predictor {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "markov":
            return f"MC({self.order})"
        if self.kind == "mf":
            return "MF"
        return f"Diffusion({self.beta:g})"

    @property
    def param(self) -> str:
        if self.kind == "markov":
            return str(self.order)
        if self.kind == "diffusion":
            return f"{self.beta:g}"
        return ""

    def build(self) -> OnlinePredictor:
        if self.kind == "markov":
            assert self.order is not None
            return OnlineMarkov(self.order)
        if self.kind == "mf":
            return OnlineMostFrequent()
        if self.kind == "diffusion":
            assert self.beta is not None
            return OnlineDiffusion(self.beta)
        raise ValueError(f"unknown predictor kind {self.kind!r}")


def evaluate_online(
    seq: StateSequence,
    predictor: PredictorSpec | str,
    warmup: int = 1,
) -> PredictionOutcome:
    """Sequential next-state evaluation over one sequence.

    The first ``warmup`` states are fed to the model without being scored;
    every later state is predicted from the prefix before it, compared,
    and then revealed. Accuracy is correct / total over the scored steps.
    """
    spec = PredictorSpec.parse(predictor) if isinstance(predictor, str) else predictor
    n = seq.length
    if warmup < 1:
        raise ValueError(f"warmup must be >= 1, got {warmup}")
    if warmup >= n:
        raise SequenceTooShort(
            f"need more than warmup={warmup} states, sequence has {n}"
        )
    model = spec.build()
    states = seq.states.tolist()
    for t in range(warmup):
        model.observe(states[t])
    correct = 0
    for t in range(warmup, n):
        if model.predict() == states[t]:
            correct += 1
        model.observe(states[t])
    return PredictionOutcome(total=n - warmup, correct=correct)
