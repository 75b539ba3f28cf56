"""Shared domain types, validation and the exception hierarchy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# Exit codes used by the command-line interface, keyed by error category.
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


class DatsneError(Exception):
    """Base class for all errors raised by the package."""

    category = "error"
    exit_code = EXIT_USAGE


class ConfigError(DatsneError):
    category = "config"
    exit_code = EXIT_USAGE


class InputDataError(DatsneError):
    category = "data"
    exit_code = EXIT_DATA


class NonFinite(InputDataError):
    def __init__(self, row: int, col: int):
        super().__init__(f"non-finite value at row {row}, column {col}")
        self.row = row
        self.col = col


class LengthMismatch(InputDataError):
    def __init__(self, field_name: str, expected: int, got: int):
        super().__init__(f"{field_name}: expected {expected} entries, got {got}")
        self.field = field_name


class TooFewPoints(InputDataError):
    def __init__(self, n: int):
        super().__init__(f"need at least 2 points, got {n}")


class IndexOutOfRange(InputDataError):
    def __init__(self, edge: tuple[int, int], n_points: int):
        super().__init__(f"edge {edge} references a point outside [0, {n_points})")
        self.edge = edge


class SelfLoop(InputDataError):
    def __init__(self, edge: tuple[int, int]):
        super().__init__(f"edge {edge} is a self-loop")
        self.edge = edge


class DuplicateEdge(InputDataError):
    def __init__(self, edge: tuple[int, int]):
        super().__init__(f"edge {edge} appears more than once")
        self.edge = edge


class Diverged(DatsneError):
    category = "diverged"
    exit_code = EXIT_DIVERGED

    def __init__(self, iteration: int, detail: str = ""):
        msg = f"embedding became non-finite at iteration {iteration}"
        super().__init__(f"{msg}: {detail}" if detail else msg)
        self.iteration = iteration


@dataclass(frozen=True, eq=False)
class Dataset:
    """N x d points with optional per-point labels and ordinal timestamps."""

    points: np.ndarray
    labels: Optional[tuple] = None
    timestamps: Optional[tuple] = None

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_dims(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class TemporalGraph:
    """Directed time-adjacency edges, stored as an (|E|, 2) integer array."""

    edges: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def sources(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def targets(self) -> np.ndarray:
        return self.edges[:, 1]

    def as_pairs(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in self.edges]


@dataclass
class EmbeddingState:
    """Mutable optimizer state; owned by a single optimization driver."""

    coords: np.ndarray
    gains: np.ndarray
    prev_update: np.ndarray
    iteration: int = 0

    @classmethod
    def fresh(cls, coords: np.ndarray) -> "EmbeddingState":
        coords = np.asarray(coords, dtype=np.float64)
        return cls(coords=coords, gains=np.ones_like(coords),
                   prev_update=np.zeros_like(coords), iteration=0)

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(self.coords.copy(), self.gains.copy(),
                              self.prev_update.copy(), self.iteration)


@dataclass(frozen=True)
class DaTsneConfig:
    """Hyperparameters of a direction-aware t-SNE run.

    Defaults reproduce the toy-example setting: perplexity 30, a DCL
    strength of 10 at an adaptive scale of 5% of the embedding span, and
    10,000 iterations of which the first 250 use early exaggeration 12.
    """

    perplexity: float = 30.0
    lambda_dcl: float = 10.0
    lambda_ell: float = 0.5
    alpha: float = 1.5
    sigma_fraction: float = 0.05
    total_iterations: int = 10_000
    exaggeration_factor: float = 12.0
    exaggeration_iterations: int = 250
    seed: int = 0
    learning_rate_override: Optional[float] = None
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    epsilon_len: float = 1e-12
    max_step_norm: Optional[float] = 5.0

    def __post_init__(self):
        if not self.perplexity > 0:
            raise ConfigError("perplexity must be positive")
        if self.lambda_dcl < 0 or self.lambda_ell < 0:
            raise ConfigError("penalty strengths must be non-negative")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not self.sigma_fraction > 0:
            raise ConfigError("sigma_fraction must be positive")
        if self.total_iterations < 1:
            raise ConfigError("total_iterations must be at least 1")
        if self.exaggeration_factor < 1:
            raise ConfigError("exaggeration_factor must be >= 1")
        if not 0 <= self.exaggeration_iterations <= self.total_iterations:
            raise ConfigError("exaggeration_iterations must lie in [0, total_iterations]")
        if self.learning_rate_override is not None and not self.learning_rate_override > 0:
            raise ConfigError("learning_rate_override must be positive")
        for name in ("momentum_early", "momentum_late"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if not self.epsilon_len > 0:
            raise ConfigError("epsilon_len must be positive")
        if self.max_step_norm is not None and not self.max_step_norm > 0:
            raise ConfigError("max_step_norm must be positive")

    def check_against(self, n_points: int) -> None:
        if not self.perplexity < n_points:
            raise ConfigError(
                f"perplexity {self.perplexity} must be smaller than the number of points {n_points}")


def validate_dataset(raw_points, labels: Optional[Sequence] = None,
                     timestamps: Optional[Sequence] = None) -> Dataset:
    """Validate raw input and freeze it into a :class:`Dataset`.

    Raises
    ------
    TooFewPoints
        Fewer than two rows (or no columns).
    NonFinite
        A NaN or infinite entry, reported at its first (row, column).
    LengthMismatch
        ``labels`` or ``timestamps`` does not have one entry per point.
    """
    if isinstance(raw_points, Dataset):
        return validate_dataset(raw_points.points, raw_points.labels, raw_points.timestamps)
    points = np.array(raw_points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1) if points.size else points.reshape(0, 1)
    if points.ndim != 2:
        raise InputDataError(f"points must be a 2-D matrix, got {points.ndim} dimensions")
    if points.shape[0] < 2:
        raise TooFewPoints(points.shape[0])
    if points.shape[1] < 1:
        raise InputDataError("points must have at least one column")
    bad = np.argwhere(~np.isfinite(points))
    if bad.size:
        raise NonFinite(int(bad[0, 0]), int(bad[0, 1]))
    n = points.shape[0]
    if labels is not None:
        labels = tuple(labels)
        if len(labels) != n:
            raise LengthMismatch("labels", n, len(labels))
    if timestamps is not None:
        timestamps = tuple(timestamps)
        if len(timestamps) != n:
            raise LengthMismatch("timestamps", n, len(timestamps))
    points.setflags(write=False)
    return Dataset(points=points, labels=labels, timestamps=timestamps)


def validate_graph(edges, n_points: int) -> TemporalGraph:
    """Check an edge list against ``n_points`` and return a :class:`TemporalGraph`."""
    if n_points < 2:
        raise TooFewPoints(n_points)
    if isinstance(edges, TemporalGraph):
        edges = edges.edges
    pairs = [(int(a), int(b)) for a, b in (edges if len(edges) else [])]
    seen = set()
    for edge in pairs:
        a, b = edge
        if not (0 <= a < n_points and 0 <= b < n_points):
            raise IndexOutOfRange(edge, n_points)
        if a == b:
            raise SelfLoop(edge)
        if edge in seen:
            raise DuplicateEdge(edge)
        seen.add(edge)
    arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    arr.setflags(write=False)
    return TemporalGraph(edges=arr)
