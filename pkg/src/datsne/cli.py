"""Command-line interface and the end-to-end pipeline.

Verbs::

    datsne toy     [options]                   # cyclic Gaussian-cluster toy data
    datsne window  --timeseries FILE [options] # sliding-window vectors of a series
    datsne embed   --points FILE --edges FILE  # precomputed high-dimensional vectors
    datsne render  --embedding FILE --edges FILE --svg-out FILE

Every run option can also come from a YAML file passed with ``--config``;
flags given on the command line override the file.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import yaml

from . import ingest
from .affinity import build_affinities
from .dal import DalParams
from .model import (ConfigError, DaTsneConfig, DatsneError, EXIT_IO, EXIT_USAGE,
                    validate_graph)
from .render import RenderOptions, render_svg
from .report import (atomic_write_text, compute_report_metrics, embedding_csv_text,
                     read_embedding_csv, trace_csv_text, write_edges_csv)
from .tsne import optimize

logger = logging.getLogger("datsne")

INPUT_KINDS = ("toy", "timeseries-csv", "highdim-csv")


@dataclass(frozen=True)
class RunConfig:
    input: str = "toy"
    output_dir: str = "out"
    # toy generator
    n_clusters: int = 7
    points_per_cluster: int = 50
    ambient_dim: int = 10
    cluster_distance: float = 30.0
    # time-series input
    timeseries: Optional[str] = None
    time_column: Optional[str] = None
    window: int = 7
    stride: int = 1
    zscore: bool = False
    # high-dimensional input
    points: Optional[str] = None
    edges: Optional[str] = None
    # optimizer
    perplexity: float = 30.0
    lambda_dcl: float = 10.0
    lambda_ell: float = 0.5
    alpha: float = 1.5
    sigma_fraction: float = 0.05
    total_iterations: int = 10_000
    exaggeration_factor: float = 12.0
    exaggeration_iterations: int = 250
    seed: int = 0
    learning_rate: Optional[float] = None
    max_step_norm: Optional[float] = 5.0
    # outputs
    svg: bool = True
    trace: bool = False
    save_edges: bool = False
    record_timing: bool = False
    point_radius: float = 3.0
    arrow_head: float = 5.0
    color_by: str = "timestamp"

    def __post_init__(self):
        if self.input not in INPUT_KINDS:
            raise ConfigError(f"input must be one of {', '.join(INPUT_KINDS)}, got {self.input!r}")
        if self.input == "timeseries-csv" and not self.timeseries:
            raise ConfigError("timeseries-csv input needs a time-series file")
        if self.input == "highdim-csv" and not (self.points and self.edges):
            raise ConfigError("highdim-csv input needs both a points and an edges file")
        if self.color_by not in ("timestamp", "label", "none"):
            raise ConfigError("color_by must be timestamp, label or none")
        self.tsne_config()

    def tsne_config(self) -> DaTsneConfig:
        return DaTsneConfig(
            perplexity=self.perplexity, lambda_dcl=self.lambda_dcl, lambda_ell=self.lambda_ell,
            alpha=self.alpha, sigma_fraction=self.sigma_fraction,
            total_iterations=self.total_iterations, exaggeration_factor=self.exaggeration_factor,
            exaggeration_iterations=self.exaggeration_iterations, seed=self.seed,
            learning_rate_override=self.learning_rate, max_step_norm=self.max_step_norm)

    def dal_params(self) -> DalParams:
        return DalParams(self.lambda_dcl, self.lambda_ell, self.alpha, self.sigma_fraction)

    def render_options(self) -> RenderOptions:
        return RenderOptions(point_radius=self.point_radius, arrow_head=self.arrow_head,
                             color_by=self.color_by)

    def echo(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        """Build from a mapping whose values may be strings (as echoed in reports)."""
        known = {f.name: f for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**{k: _coerce(known[k].type, v) for k, v in values.items()})


def _coerce(type_name: str, value):
    if not isinstance(value, str):
        return value
    optional = type_name.startswith("Optional[")
    if optional and value == "":
        return None
    base = type_name[len("Optional["):-1] if optional else type_name
    try:
        if base == "bool":
            if value.lower() not in ("true", "false"):
                raise ValueError(value)
            return value.lower() == "true"
        if base == "int":
            return int(value)
        if base == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"cannot interpret {value!r} as {base}") from None
    return value


def load_inputs(config: RunConfig):
    """Dataset and graph for the configured input kind."""
    if config.input == "toy":
        toy = ingest.ToyConfig(config.n_clusters, config.points_per_cluster,
                               config.ambient_dim, config.cluster_distance, config.seed)
        return ingest.generate_cyclic_clusters(toy)
    if config.input == "timeseries-csv":
        table = ingest.load_timeseries_csv(config.timeseries, config.time_column)
        data, graph = ingest.sliding_window(table, config.window, config.stride, config.zscore)
        if data.n_points < 2:
            raise ingest.InputDataError(
                f"windowing produced {data.n_points} point(s); need at least 2")
        return data, graph
    return ingest.load_highdim_csv(config.points, config.edges)


def _check_paths(config: RunConfig) -> None:
    for name in ("timeseries", "points", "edges"):
        path = getattr(config, name)
        needed = (config.input == "timeseries-csv" and name == "timeseries") or \
                 (config.input == "highdim-csv" and name in ("points", "edges"))
        if needed and not Path(path).is_file():
            raise PipelineIOError(f"input file not found: {path}")


class PipelineIOError(DatsneError):
    category = "io"
    exit_code = EXIT_IO


def run_pipeline(config: RunConfig) -> dict:
    """Ingest, optimize and persist one run.

    Returns a mapping of output kind (``embedding``, ``report`` and, when
    enabled, ``svg``, ``trace``, ``edges``) to written path. Nothing is
    written unless the optimization succeeds.
    """
    _check_paths(config)
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PipelineIOError(f"cannot create output directory {out}: {exc}") from exc

    started = time.perf_counter()
    data, graph = load_inputs(config)
    tsne_config = config.tsne_config()
    tsne_config.check_against(data.n_points)
    logger.info("loaded %d points (%d dims), %d edges", data.n_points, data.n_dims, graph.n_edges)
    p = build_affinities(data, tsne_config.perplexity)
    state, trace = optimize(data, graph, tsne_config, affinities=p)
    report = compute_report_metrics(state, graph, config.dal_params(), p)
    report.wall_clock_seconds = time.perf_counter() - started
    report.config = config.echo()

    # Render everything first so a failure leaves no partial output set.
    texts = {"embedding": ("embedding.csv", embedding_csv_text(state.coords, data)),
             "report": ("report.txt", report.to_text(include_timing=config.record_timing))}
    if config.svg:
        texts["svg"] = ("embedding.svg", render_svg(state.coords, graph, config.render_options(),
                                                    data.labels, data.timestamps))
    if config.trace:
        texts["trace"] = ("trace.csv", trace_csv_text(trace))
    written = {}
    try:
        for kind, (name, text) in texts.items():
            atomic_write_text(out / name, text)
            written[kind] = out / name
        if config.save_edges:
            written["edges"] = write_edges_csv(graph, out / "edges.csv")
    except OSError as exc:
        raise PipelineIOError(f"cannot write outputs to {out}: {exc}") from exc
    logger.info("wrote %s", ", ".join(str(p) for p in written.values()))
    return written


def render_file(embedding_path, edges_path, svg_path, options: RenderOptions) -> Path:
    """Re-render a persisted embedding CSV with an edge list."""
    for path in (embedding_path, edges_path):
        if not Path(path).is_file():
            raise PipelineIOError(f"input file not found: {path}")
    coords, labels, stamps = read_embedding_csv(embedding_path)
    edges = []
    for lineno, line in enumerate(Path(edges_path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            a, b = (int(v) for v in line.split(","))
        except ValueError:
            raise ingest.ParseError(lineno, f"bad edge row {line!r}") from None
        edges.append((a, b))
    graph = validate_graph(edges, coords.shape[0])
    labels = labels if any(labels) else None
    stamps = stamps if any(stamps) else None
    try:
        atomic_write_text(svg_path, render_svg(coords, graph, options, labels, stamps))
    except OSError as exc:
        raise PipelineIOError(f"cannot write {svg_path}: {exc}") from exc
    return Path(svg_path)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"error: usage: {message}\n")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    B = argparse.BooleanOptionalAction
    p.add_argument("--config", help="YAML file with run options")
    p.add_argument("-o", "--output-dir", dest="output_dir")
    g = p.add_argument_group("optimizer")
    g.add_argument("--perplexity", type=float)
    g.add_argument("--lambda-dcl", dest="lambda_dcl", type=float)
    g.add_argument("--lambda-ell", dest="lambda_ell", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--sigma-fraction", dest="sigma_fraction", type=float)
    g.add_argument("--iterations", dest="total_iterations", type=int)
    g.add_argument("--exaggeration", dest="exaggeration_factor", type=float)
    g.add_argument("--exaggeration-iterations", dest="exaggeration_iterations", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--learning-rate", dest="learning_rate", type=float)
    g.add_argument("--max-step-norm", dest="max_step_norm", type=float)
    g = p.add_argument_group("output")
    g.add_argument("--svg", action=B)
    g.add_argument("--trace", action=B, help="write per-iteration losses to trace.csv")
    g.add_argument("--save-edges", dest="save_edges", action=B)
    g.add_argument("--record-timing", dest="record_timing", action=B,
                   help="add wall-clock seconds to the report (breaks byte-identical reruns)")
    _add_render_options(g)


def _add_render_options(g) -> None:
    g.add_argument("--point-radius", dest="point_radius", type=float)
    g.add_argument("--arrow-head", dest="arrow_head", type=float)
    g.add_argument("--color-by", dest="color_by", choices=["timestamp", "label", "none"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="datsne", description="Direction-aware t-SNE embeddings with arrows.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("toy", help="embed the cyclic Gaussian-cluster toy data")
    p.add_argument("--n-clusters", dest="n_clusters", type=int)
    p.add_argument("--points-per-cluster", dest="points_per_cluster", type=int)
    p.add_argument("--ambient-dim", dest="ambient_dim", type=int)
    p.add_argument("--cluster-distance", dest="cluster_distance", type=float)
    _add_run_options(p)

    p = sub.add_parser("window", help="embed sliding windows of a multivariate time series")
    p.add_argument("--timeseries")
    p.add_argument("--time-column", dest="time_column")
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--zscore", action=argparse.BooleanOptionalAction)
    _add_run_options(p)

    p = sub.add_parser("embed", help="embed precomputed high-dimensional points")
    p.add_argument("--points")
    p.add_argument("--edges")
    _add_run_options(p)

    p = sub.add_parser("render", help="render a persisted embedding as SVG")
    p.add_argument("--embedding", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--svg-out", dest="svg_out", required=True)
    _add_render_options(p)
    return parser


_VERB_INPUT = {"toy": "toy", "window": "timeseries-csv", "embed": "highdim-csv"}
_NOT_CONFIG = {"verb", "verbose", "config", "embedding", "svg_out"}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise PipelineIOError(f"cannot read config file {args.config}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {args.config} must hold a mapping")
        values.update({k.replace("-", "_"): v for k, v in loaded.items()})
    values.update({k: v for k, v in vars(args).items()
                   if v is not None and k not in _NOT_CONFIG})
    values["input"] = _VERB_INPUT[args.verb]
    return RunConfig.from_mapping(values)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "render":
            options = RenderOptions(
                point_radius=args.point_radius if args.point_radius is not None else 3.0,
                arrow_head=args.arrow_head if args.arrow_head is not None else 5.0,
                color_by=args.color_by or "timestamp")
            print(render_file(args.embedding, args.edges, args.svg_out, options))
            return 0
        config = config_from_args(args)
        for path in run_pipeline(config).values():
            print(path)
        return 0
    except DatsneError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TypeError, ValueError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
