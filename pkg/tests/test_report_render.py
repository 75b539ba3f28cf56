import re

import numpy as np
import pytest

from datsne.affinity import build_affinities
from datsne.dal import DalParams, coherence_score, ell_loss_grad
from datsne.model import EmbeddingState, validate_dataset, validate_graph
from datsne.render import RenderOptions, canvas_transform, ramp_color, render_svg
from datsne.report import (RunReport, compute_report_metrics, parse_report, read_embedding_csv,
                           trace_csv_text, write_embedding_csv)
from datsne.tsne import LossTrace, kl_gradient


def count(svg, pattern):
    return len(re.findall(pattern, svg))


# -- SVG ----------------------------------------------------------------------

def test_svg_element_counts():
    coords = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 1.0]])
    svg = render_svg(coords, validate_graph([(0, 1), (1, 2)], 3), timestamps=[0, 1, 2])
    assert count(svg, r"<circle ") == 3
    assert count(svg, r'<g class="arrow">') == 2
    assert count(svg, r"<polygon ") == 2
    assert svg.startswith("<?xml") and 'version="1.1"' in svg


def test_svg_identical_points():
    coords = np.full((4, 2), 3.0)
    svg = render_svg(coords, validate_graph([(0, 1), (2, 3)], 4))
    centers = set(re.findall(r'cx="([^"]+)" cy="([^"]+)"', svg))
    assert centers == {("400.000", "400.000")}
    assert "nan" not in svg.lower()


def test_svg_scale_invariant(rng):
    coords = rng.standard_normal((15, 2))
    graph = validate_graph([(i, i + 1) for i in range(14)], 15)
    stamps = list(range(15))
    assert render_svg(coords, graph, timestamps=stamps) == render_svg(coords * 10, graph,
                                                                      timestamps=stamps)


def test_canvas_margins_and_aspect():
    coords = np.array([[0.0, 0.0], [10.0, 2.0]])
    xy = canvas_transform(coords)
    assert xy[:, 0].min() == pytest.approx(40.0) and xy[:, 0].max() == pytest.approx(760.0)
    # y span is one fifth of x span and stays centered.
    assert abs(xy[1, 1] - xy[0, 1]) == pytest.approx(144.0)
    assert (xy[0, 1] + xy[1, 1]) / 2 == pytest.approx(400.0)


def test_color_ramp_ends():
    assert ramp_color(0.0) == "#440154"
    assert ramp_color(1.0) == "#fde725"


def test_color_by_timestamp():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    svg = render_svg(coords, validate_graph([], 3), timestamps=[5, 0, 10])
    fills = re.findall(r'<circle [^>]*fill="([^"]+)"', svg)
    assert fills[1] == "#440154" and fills[2] == "#fde725"


def test_color_by_none():
    svg = render_svg(np.eye(2), validate_graph([(0, 1)], 2), RenderOptions(color_by="none"))
    assert "#440154" not in svg


def test_zero_length_arrow_still_drawn():
    svg = render_svg(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]), validate_graph([(0, 1)], 3))
    assert count(svg, r'<g class="arrow">') == 1


# -- embedding CSV ------------------------------------------------------------

def test_embedding_csv_roundtrip(tmp_path, rng):
    coords = rng.standard_normal((2, 2)) * np.array([1e-7, 1e5])
    data = validate_dataset(rng.standard_normal((2, 3)), labels=["a", "b"], timestamps=[0, 1])
    path = write_embedding_csv(EmbeddingState.fresh(coords), data, tmp_path / "e.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 3 and lines[0] == "index,x,y,label,timestamp"
    back, labels, stamps = read_embedding_csv(path)
    assert back.tobytes() == coords.tobytes()
    assert labels == ["a", "b"] and stamps == ["0", "1"]


def test_missing_labels_are_empty(tmp_path):
    data = validate_dataset(np.zeros((2, 1)))
    path = write_embedding_csv(EmbeddingState.fresh(np.array([[0.5, 1.0], [2.0, 3.0]])), data,
                               tmp_path / "e.csv")
    assert path.read_text().splitlines()[1] == "0,0.5,1,,"


# -- report -------------------------------------------------------------------

def _affinities(n):
    return build_affinities(validate_dataset(np.arange(2.0 * n).reshape(n, 2) ** 1.5), 1.5)


def test_report_parallel_edges():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    graph = validate_graph([(0, 1), (2, 3)], 4)
    report = compute_report_metrics(EmbeddingState.fresh(coords), graph, DalParams(), _affinities(4))
    assert report.coherence_score == 0.0 and report.dcl == 0.0


def test_report_single_edge_lengths():
    coords = np.array([[0.0, 0.0], [3.0, 0.0]])
    graph = validate_graph([(0, 1)], 2)
    report = compute_report_metrics(coords, graph, DalParams(alpha=1.0), _affinities(2))
    assert report.arrow_length_mean == report.arrow_length_median == report.arrow_length_max == 3.0
    assert report.ell == 3.0


def test_report_total_and_components(rng):
    n = 12
    coords = rng.standard_normal((n, 2)) * 4
    graph = validate_graph([(i, i + 1) for i in range(n - 1)], n)
    p = _affinities(n)
    params = DalParams(lambda_dcl=7.0, lambda_ell=0.25, alpha=1.5)
    report = compute_report_metrics(coords, graph, params, p)
    assert report.total == pytest.approx(report.kl + 7.0 * report.dcl + 0.25 * report.ell,
                                         rel=0, abs=1e-12)
    assert report.kl == kl_gradient(p, coords)[0]
    assert report.dcl == coherence_score(coords, graph, report.sigma)
    assert report.ell == ell_loss_grad(coords, graph, 1.5)[0]


def test_report_text_roundtrip():
    report = RunReport(kl=0.1, dcl=0.2, ell=0.3, total=0.4, coherence_score=0.2, sigma=1 / 3,
                       arrow_length_mean=1, arrow_length_median=1, arrow_length_max=2,
                       embedding_span=10, iterations=5, n_points=3, n_edges=2,
                       wall_clock_seconds=1.5, config={"alpha": 1.5, "seed": 3, "points": None})
    text = report.to_text()
    parsed = parse_report(text)
    assert float(parsed["sigma"]) == 1 / 3
    assert parsed["config.points"] == "" and parsed["config.seed"] == "3"
    assert "wall_clock_seconds" not in parsed
    assert "wall_clock_seconds=1.500" in report.to_text(include_timing=True)


def test_trace_csv():
    trace = LossTrace()
    trace.append(1.0, 0.5, 0.25, 2.0, 3.0, True)
    lines = trace_csv_text(trace).splitlines()
    assert lines == ["iteration,kl,dcl,ell,total,span,exaggerated", "0,1,0.5,0.25,2,3,1"]
