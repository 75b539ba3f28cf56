"""Dataset construction: CSV loaders, sliding-window vectorization and the
cyclic Gaussian-cluster toy generator."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .model import (ConfigError, Dataset, InputDataError, TemporalGraph,
                    validate_dataset, validate_graph)


class ParseError(InputDataError):
    def __init__(self, line: int, detail: str):
        super().__init__(f"line {line}: {detail}")
        self.line = line


class NonNumericCell(InputDataError):
    def __init__(self, line: int, column: str, value: str):
        super().__init__(f"line {line}, column {column!r}: non-numeric value {value!r}")
        self.line = line
        self.column = column


class EmptyFile(InputDataError):
    def __init__(self, path):
        super().__init__(f"{path}: file is empty")


class WindowTooLarge(InputDataError):
    def __init__(self, window: int, n_steps: int):
        super().__init__(f"window {window} exceeds series length {n_steps}")


class DimensionTooSmall(ConfigError):
    def __init__(self, ambient_dim: int, n_clusters: int):
        super().__init__(
            f"{n_clusters} equidistant centers need at least {n_clusters - 1} dimensions, "
            f"got {ambient_dim}")


@dataclass(frozen=True, eq=False)
class TimeSeriesTable:
    values: np.ndarray
    column_names: tuple
    time_labels: tuple

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise InputDataError("time series needs at least one step and one variable")
        if not np.all(np.isfinite(self.values)):
            raise InputDataError("time series contains non-finite values")
        if len(self.column_names) != self.values.shape[1]:
            raise InputDataError("one column name per variable required")
        if len(self.time_labels) != self.values.shape[0]:
            raise InputDataError("one time label per step required")

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ToyConfig:
    n_clusters: int = 7
    points_per_cluster: int = 50
    ambient_dim: int = 10
    cluster_distance: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 2:
            raise ConfigError("n_clusters must be at least 2")
        if self.points_per_cluster < 1:
            raise ConfigError("points_per_cluster must be positive")
        if self.ambient_dim < 2:
            raise ConfigError("ambient_dim must be at least 2")
        if not self.cluster_distance > 0:
            raise ConfigError("cluster_distance must be positive")


def _parse_float(cell: str) -> float:
    value = float(cell)
    if not np.isfinite(value):
        raise ValueError(cell)
    return value


def _read_rows(path) -> list[list[str]]:
    path = Path(path)
    with path.open(newline="") as fh:
        text = fh.read()
    if not text.strip():
        raise EmptyFile(path)
    try:
        return list(csv.reader(text.splitlines()))
    except csv.Error as exc:
        raise ParseError(0, str(exc)) from exc


def load_timeseries_csv(path, time_column: Optional[str] = None) -> TimeSeriesTable:
    """Read a header-row CSV; every column except ``time_column`` must be numeric.

    Without a time column the time labels are the row ordinals 0..T-1.
    """
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if time_column is not None and time_column not in header:
        raise ParseError(1, f"time column {time_column!r} not in header")
    time_idx = header.index(time_column) if time_column is not None else None
    value_idx = [k for k in range(len(header)) if k != time_idx]
    if not value_idx:
        raise ParseError(1, "no value columns")

    values, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
        parsed = []
        for k in value_idx:
            try:
                parsed.append(_parse_float(row[k]))
            except ValueError:
                raise NonNumericCell(lineno, header[k], row[k]) from None
        values.append(parsed)
        labels.append(row[time_idx].strip() if time_idx is not None else len(labels))
    if not values:
        raise EmptyFile(path)
    return TimeSeriesTable(values=np.array(values, dtype=np.float64),
                           column_names=tuple(header[k] for k in value_idx),
                           time_labels=tuple(labels))


def sliding_window(table: TimeSeriesTable, window: int, stride: int = 1,
                   zscore: bool = False) -> tuple[Dataset, TemporalGraph]:
    """Vectorize a multivariate series by concatenating ``window`` consecutive rows.

    Windows start at 0, stride, 2*stride, ...; each window becomes one point of
    dimension ``window * n_vars`` and consecutive windows are joined by an edge.
    With ``zscore`` every column is standardized before windowing (constant
    columns are only centered).
    """
    if window < 1 or stride < 1:
        raise ConfigError("window and stride must be positive")
    values = table.values
    if window > table.n_steps:
        raise WindowTooLarge(window, table.n_steps)
    if zscore:
        std = values.std(axis=0)
        values = (values - values.mean(axis=0)) / np.where(std > 0, std, 1.0)

    starts = np.arange(0, table.n_steps - window + 1, stride)
    points = np.stack([values[s:s + window].reshape(-1) for s in starts])
    n = len(starts)
    edges = [(i, i + 1) for i in range(n - 1)]
    # A single window is a legitimate result but not a valid Dataset (N >= 2).
    if n < 2:
        points.setflags(write=False)
        return (Dataset(points=points, timestamps=tuple(int(s) for s in starts)),
                TemporalGraph(edges=np.zeros((0, 2), dtype=np.int64)))
    data = validate_dataset(points, timestamps=[int(s) for s in starts])
    return data, validate_graph(edges, n)


def simplex_centers(n_clusters: int, ambient_dim: int, distance: float) -> np.ndarray:
    """Vertices of a regular simplex with edge length ``distance``, centered at 0."""
    if ambient_dim < n_clusters - 1:
        raise DimensionTooSmall(ambient_dim, n_clusters)
    vertices = np.eye(n_clusters) - 1.0 / n_clusters
    # Project onto an orthonormal basis of the (n_clusters - 1)-dim hyperplane.
    basis = np.linalg.svd(vertices)[2][:n_clusters - 1]
    coords = vertices @ basis.T
    centers = np.zeros((n_clusters, ambient_dim))
    centers[:, :n_clusters - 1] = coords * (distance / np.sqrt(2.0))
    return centers


def generate_cyclic_clusters(config: ToyConfig = ToyConfig()) -> tuple[Dataset, TemporalGraph]:
    """Equidistant Gaussian clusters whose points each link into the next cluster.

    Point ``i`` of cluster ``c`` gets one edge to a uniformly drawn point of
    cluster ``(c + 1) % n_clusters``, so the last cluster links back to the
    first. Labels and timestamps both hold the cluster index.
    """
    k, m = config.n_clusters, config.points_per_cluster
    centers = simplex_centers(k, config.ambient_dim, config.cluster_distance)
    rng = np.random.default_rng(config.seed)
    noise = rng.standard_normal((k * m, config.ambient_dim))
    cluster = np.repeat(np.arange(k), m)
    points = centers[cluster] + noise
    targets = rng.integers(0, m, size=k * m)
    edges = [(i, int(((cluster[i] + 1) % k) * m + targets[i])) for i in range(k * m)]
    labels = [int(c) for c in cluster]
    data = validate_dataset(points, labels=labels, timestamps=labels)
    return data, validate_graph(edges, k * m)


def load_highdim_csv(points_path, edges_path) -> tuple[Dataset, TemporalGraph]:
    """Read headerless point rows and a two-column 0-based edge list."""
    rows = _read_rows(points_path)
    points = []
    width = None
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(lineno, f"expected {width} fields, got {len(row)}")
        try:
            points.append([float(c) for c in row])
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    data = validate_dataset(points)

    edges = []
    path = Path(edges_path)
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(lineno, f"expected 2 fields, got {len(row)}")
            try:
                edges.append((int(row[0]), int(row[1])))
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
    return data, validate_graph(edges, data.n_points)
