"""Result persistence: embedding CSV, key-value run report, loss-trace CSV."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dal
from .affinity import AffinityMatrix
from .model import DatsneError, EXIT_IO, Dataset, EmbeddingState, TemporalGraph
from .tsne import LossTrace, kl_gradient

EMBEDDING_HEADER = ["index", "x", "y", "label", "timestamp"]


class OutputError(DatsneError):
    category = "io"
    exit_code = EXIT_IO


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value: float) -> str:
    # 17 significant digits round-trip every double exactly.
    return format(float(value), ".17g")


def embedding_csv_text(coords: np.ndarray, data: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EMBEDDING_HEADER)
    labels = data.labels if data.labels is not None else [""] * data.n_points
    stamps = data.timestamps if data.timestamps is not None else [""] * data.n_points
    for i, (x, y) in enumerate(coords):
        writer.writerow([i, _fmt(x), _fmt(y), labels[i], stamps[i]])
    return buf.getvalue()


def write_embedding_csv(state: EmbeddingState, data: Dataset, path) -> Path:
    coords = state.coords if isinstance(state, EmbeddingState) else np.asarray(state)
    try:
        atomic_write_text(path, embedding_csv_text(coords, data))
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return Path(path)


def read_embedding_csv(path) -> tuple[np.ndarray, list, list]:
    """Return (coords, labels, timestamps); empty fields come back as ``""``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != EMBEDDING_HEADER:
            raise OutputError(f"{path}: unexpected header {header}")
        rows = list(reader)
    coords = np.array([[float(r[1]), float(r[2])] for r in rows], dtype=np.float64).reshape(-1, 2)
    return coords, [r[3] for r in rows], [r[4] for r in rows]


def write_edges_csv(graph: TemporalGraph, path) -> Path:
    atomic_write_text(path, "".join(f"{a},{b}\n" for a, b in graph.as_pairs()))
    return Path(path)


@dataclass
class RunReport:
    kl: float
    dcl: float
    ell: float
    total: float
    coherence_score: float
    sigma: float
    arrow_length_mean: float
    arrow_length_median: float
    arrow_length_max: float
    embedding_span: float
    iterations: int
    n_points: int
    n_edges: int
    wall_clock_seconds: Optional[float] = None
    config: dict = field(default_factory=dict)

    METRIC_KEYS = ("kl", "dcl", "ell", "total", "coherence_score", "sigma",
                   "arrow_length_mean", "arrow_length_median", "arrow_length_max",
                   "embedding_span")

    def to_text(self, include_timing: bool = False) -> str:
        """Flat ``key=value`` lines; config values are echoed as ``config.<key>``."""
        lines = [f"{k}={_fmt(getattr(self, k))}" for k in self.METRIC_KEYS]
        lines += [f"iterations={self.iterations}", f"n_points={self.n_points}",
                  f"n_edges={self.n_edges}"]
        if include_timing and self.wall_clock_seconds is not None:
            lines.append(f"wall_clock_seconds={self.wall_clock_seconds:.3f}")
        for key in sorted(self.config):
            lines.append(f"config.{key}={_config_value(self.config[key])}")
        return "\n".join(lines) + "\n"


def _config_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def parse_report(text: str) -> dict:
    """Parse report text into ``{key: str}``; config keys keep their prefix."""
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        out[key] = value
    return out


def compute_report_metrics(state, graph: TemporalGraph, params: dal.DalParams,
                           p: AffinityMatrix, iterations: Optional[int] = None) -> RunReport:
    """Evaluate every loss component at the final coordinates.

    Penalties are reported unweighted; ``total`` applies the lambda weights.
    The coherence score uses the adaptive sigma of the final embedding.
    """
    coords = state.coords if isinstance(state, EmbeddingState) else np.asarray(state)
    kl, _ = kl_gradient(p, coords, 1.0)
    sigma = dal.adaptive_sigma(coords, params.sigma_fraction)
    coherence = dal.coherence_score(coords, graph, sigma, params.epsilon_len)
    ell, _ = dal.ell_loss_grad(coords, graph, params.alpha, params.epsilon_len, compute_grad=False)
    lengths = dal.arrow_lengths(coords, graph)
    if lengths.size:
        stats = (float(lengths.mean()), float(np.median(lengths)), float(lengths.max()))
    else:
        stats = (0.0, 0.0, 0.0)
    if iterations is None:
        iterations = state.iteration if isinstance(state, EmbeddingState) else 0
    return RunReport(
        kl=kl, dcl=coherence, ell=ell,
        total=kl + params.lambda_dcl * coherence + params.lambda_ell * ell,
        coherence_score=coherence, sigma=sigma,
        arrow_length_mean=stats[0], arrow_length_median=stats[1], arrow_length_max=stats[2],
        embedding_span=dal.embedding_span(coords), iterations=iterations,
        n_points=coords.shape[0], n_edges=graph.n_edges)


def trace_csv_text(trace: LossTrace) -> str:
    lines = ["iteration,kl,dcl,ell,total,span,exaggerated"]
    for k in range(len(trace)):
        lines.append(",".join([str(k), _fmt(trace.kl[k]), _fmt(trace.dcl[k]), _fmt(trace.ell[k]),
                               _fmt(trace.total[k]), _fmt(trace.span[k]),
                               "1" if trace.exaggerated[k] else "0"]))
    return "\n".join(lines) + "\n"
