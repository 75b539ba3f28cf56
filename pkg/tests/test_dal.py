import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (SEGMENT_KINDS, central_differences, frozen_weight_dcl,
                      grid_segment_distance, max_relative_error, random_graph,
                      random_segment_pair)
from datsne import _kernels
from datsne.dal import (DegenerateSpanWarning, EdgeGeometry, adaptive_sigma, arrow_lengths,
                        coherence_score, dcl_loss_grad, dcl_loss_grad_dense, dcl_pair_terms,
                        direction_penalty, ell_loss_grad, gaussian_weight, pair_weights,
                        segment_distance, segment_distances)
from datsne.model import validate_graph

coord = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
point = st.tuples(coord, coord)


# -- segment distance -------------------------------------------------------

def test_crossing_diagonals():
    d, s, t = segment_distance((0, 0), (2, 2), (0, 2), (2, 0))
    assert d == pytest.approx(0.0, abs=1e-15)
    assert (s, t) == pytest.approx((0.5, 0.5))


def test_parallel_horizontal():
    assert segment_distance((0, 0), (1, 0), (0, 1), (1, 1))[0] == pytest.approx(1.0)


def test_offset_segments():
    d, s, t = segment_distance((0, 0), (1, 0), (2, 1), (3, 1))
    assert d == pytest.approx(math.sqrt(2), rel=1e-15)
    # s = 0 selects the end (1, 0) of the first segment, t = 1 the start (2, 1).
    assert (s, t) == (0.0, 1.0)
    grid_d, grid_s, grid_t = grid_segment_distance((0, 0), (1, 0), (2, 1), (3, 1))
    assert abs(grid_d - d) < 1e-3 and (grid_s, grid_t) == (0.0, 1.0)


def test_minimizers_reproduce_distance(rng):
    for kind in SEGMENT_KINDS:
        a0, a1, b0, b1 = random_segment_pair(rng, kind)
        d, s, t = segment_distance(a0, a1, b0, b1)
        pa = s * a0 + (1 - s) * a1
        pb = t * b0 + (1 - t) * b1
        assert np.linalg.norm(pa - pb) == pytest.approx(d, abs=1e-12)
        assert 0 <= s <= 1 and 0 <= t <= 1


@pytest.mark.parametrize("kind", SEGMENT_KINDS)
def test_closed_form_matches_grid(rng, kind):
    for _ in range(10):
        a0, a1, b0, b1 = random_segment_pair(rng, kind)
        d = segment_distance(a0, a1, b0, b1)[0]
        assert abs(d - grid_segment_distance(a0, a1, b0, b1)[0]) <= 1e-3


def test_vectorized_matches_compiled(rng):
    segs = [random_segment_pair(rng, SEGMENT_KINDS[k % 6]) for k in range(300)]
    a0, a1, b0, b1 = (np.array(v) for v in zip(*segs))
    vec = segment_distances(a0, a1, b0, b1)[0]
    compiled = [_kernels.seg_dist(*x0, *x1, *y0, *y1) for x0, x1, y0, y1 in segs]
    np.testing.assert_allclose(vec, compiled, rtol=0, atol=1e-13)


def _endpoint_to_segment(p, a, b):
    ab = b - a
    denom = ab @ ab
    t = 0.0 if denom == 0 else min(max((p - a) @ ab / denom, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


@settings(max_examples=200, deadline=None)
@given(point, point, point, point)
def test_segment_distance_properties(a0, a1, b0, b1):
    a0, a1, b0, b1 = (np.array(v) for v in (a0, a1, b0, b1))
    d = segment_distance(a0, a1, b0, b1)[0]
    scale = 1e-9 * (1 + max(np.abs(np.concatenate([a0, a1, b0, b1]))))
    assert d >= 0
    for other in (segment_distance(b0, b1, a0, a1), segment_distance(a1, a0, b0, b1),
                  segment_distance(a0, a1, b1, b0)):
        assert other[0] == pytest.approx(d, abs=scale * 10)
    endpoint_min = min(_endpoint_to_segment(a0, b0, b1), _endpoint_to_segment(a1, b0, b1),
                       _endpoint_to_segment(b0, a0, a1), _endpoint_to_segment(b1, a0, a1))
    assert d <= endpoint_min + scale * 10


@settings(max_examples=50, deadline=None)
@given(point, point)
def test_point_segments_reduce_to_point_distance(p, q):
    p, q = np.array(p), np.array(q)
    assert segment_distance(p, p, q, q)[0] == pytest.approx(np.linalg.norm(p - q), abs=1e-12)


# -- adaptive scale ----------------------------------------------------------

def test_adaptive_sigma():
    coords = np.array([[0.0, 0.0], [10.0, 4.0], [3.0, 1.0]])
    assert adaptive_sigma(coords, 0.05) == pytest.approx(0.5)


def test_adaptive_sigma_degenerate():
    with pytest.warns(DegenerateSpanWarning):
        assert adaptive_sigma(np.ones((4, 2)), 0.05) == 0.05


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_adaptive_sigma_homogeneous(rng, c):
    coords = rng.standard_normal((20, 2))
    assert adaptive_sigma(c * coords, 0.05) == pytest.approx(c * adaptive_sigma(coords, 0.05),
                                                             rel=1e-14)


# -- pair terms ----------------------------------------------------------------

def _edge(start, end):
    return EdgeGeometry.from_endpoints([start], [end])


def test_aligned_edges_have_no_penalty():
    _, pen = dcl_pair_terms(_edge((0, 0), (1, 0)), _edge((0, 1), (2, 1)), 1.0)
    assert pen == 0.0


def test_antiparallel_penalty():
    _, pen = dcl_pair_terms(_edge((0, 0), (1, 0)), _edge((1, 1), (0, 1)), 1.0)
    assert pen == pytest.approx(4.0)


def test_perpendicular_touching():
    w, pen = dcl_pair_terms(_edge((0, 0), (1, 0)), _edge((0, 0), (0, 1)), 1.0)
    assert pen == pytest.approx(1.0)
    assert w == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-12)
    assert w == pytest.approx(0.3989423, abs=1e-7)


def test_weight_uses_unsquared_distance():
    w, _ = dcl_pair_terms(_edge((0, 0), (1, 0)), _edge((0, 3), (1, 3)), 2.0)
    assert w == pytest.approx(math.exp(-3 / 8) / math.sqrt(8 * math.pi), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_direction_penalty_range(a, b):
    ua = np.array([math.cos(a), math.sin(a)])
    ub = np.array([math.cos(b), math.sin(b)])
    pen = direction_penalty(ua, ub)
    assert -1e-12 <= pen <= 4 + 1e-12


# -- losses and gradients --------------------------------------------------------

def random_configuration(rng, n=None, m=None):
    n = n or int(rng.integers(5, 16))
    m = m or int(rng.integers(2, min(10, n * (n - 1)) + 1))
    coords = rng.standard_normal((n, 2)) * 2
    return coords, random_graph(rng, n, m)


def test_two_aligned_edges():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.5], [1.0, 0.5]])
    graph = validate_graph([(0, 1), (2, 3)], 4)
    loss, grad = dcl_loss_grad(coords, graph, 1.0)
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_two_antiparallel_edges():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.2], [0.0, 0.2]])
    graph = validate_graph([(0, 1), (2, 3)], 4)
    sigma = 10.0
    loss, grad = dcl_loss_grad(coords, graph, sigma)
    expected = 4 / math.sqrt(2 * math.pi * sigma ** 2) * math.exp(-0.2 / (2 * sigma ** 2))
    assert loss == pytest.approx(expected, rel=1e-12)
    weights = pair_weights(EdgeGeometry.from_graph(coords, graph), sigma)
    numeric = central_differences(lambda y: frozen_weight_dcl(y, graph, weights), coords)
    # Exactly antiparallel is a stationary point of the direction term.
    np.testing.assert_allclose(grad, numeric, atol=1e-9)
    tilted = coords + np.array([[0, 0], [0, 0.05], [0, 0], [0, 0]])
    _, grad = dcl_loss_grad(tilted, graph, sigma)
    weights = pair_weights(EdgeGeometry.from_graph(tilted, graph), sigma)
    numeric = central_differences(lambda y: frozen_weight_dcl(y, graph, weights), tilted)
    assert max_relative_error(grad, numeric) < 1e-4
    # Descending the gradient turns the arrows towards each other.
    stepped = tilted - 0.5 * grad / np.abs(grad).max()
    assert dcl_loss_grad(stepped, graph, sigma)[0] < dcl_loss_grad(tilted, graph, sigma)[0]


def test_scaling_reevaluation(rng):
    coords, graph = random_configuration(rng, 8, 6)
    sigma, c = 0.7, 3.0
    loss_c = dcl_loss_grad(c * coords, graph, c * sigma)[0]
    geom = EdgeGeometry.from_graph(coords, graph)
    pairs = [(i, j) for i in range(6) for j in range(i + 1, 6)]
    expected = 0.0
    for i, j in pairs:
        d = segment_distance(geom.start[i], geom.end[i], geom.start[j], geom.end[j])[0]
        w = (1 / c) * math.exp(-d / (2 * c * sigma ** 2)) / math.sqrt(2 * math.pi * sigma ** 2)
        expected += w * (1 - geom.unit[i] @ geom.unit[j]) ** 2
    assert loss_c == pytest.approx(expected / len(pairs), rel=1e-12)


@pytest.mark.parametrize("trial", range(10))
def test_dcl_gradient_matches_frozen_weight_differences(trial):
    rng = np.random.default_rng(100 + trial)
    coords, graph = random_configuration(rng)
    sigma = adaptive_sigma(coords, 0.3)
    _, grad = dcl_loss_grad(coords, graph, sigma)
    weights = pair_weights(EdgeGeometry.from_graph(coords, graph), sigma)
    numeric = central_differences(lambda y: frozen_weight_dcl(y, graph, weights), coords)
    assert max_relative_error(grad, numeric) < 1e-4


def test_compiled_and_dense_dcl_agree(rng):
    coords, graph = random_configuration(rng, 40, 60)
    for sigma in (0.1, 1.0, 5.0):
        loss, grad = dcl_loss_grad(coords, graph, sigma)
        loss_d, grad_d = dcl_loss_grad_dense(coords, graph, sigma)
        assert loss == pytest.approx(loss_d, rel=1e-12)
        np.testing.assert_allclose(grad, grad_d, rtol=1e-10, atol=1e-14)


def test_dcl_invariances(rng):
    coords, graph = random_configuration(rng, 12, 9)
    loss = dcl_loss_grad(coords, graph, 0.8)[0]
    theta = 0.9
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    moved = coords @ rot.T + np.array([5.0, -3.0])
    assert dcl_loss_grad(moved, graph, 0.8)[0] == pytest.approx(loss, rel=1e-10)


def test_degenerate_edges_are_skipped():
    coords = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 2.0], [-1.0, 2.0]])
    graph = validate_graph([(0, 1), (2, 3), (4, 5)], 6)
    loss, grad = dcl_loss_grad(coords, graph, 1.0)
    assert np.all(np.isfinite(grad))
    assert np.all(grad[[0, 1]] == 0)
    two = validate_graph([(2, 3), (4, 5)], 6)
    # Same pair sum, but normalized over all three edges.
    assert loss == pytest.approx(dcl_loss_grad(coords, two, 1.0)[0] / 3, rel=1e-12)


def test_fewer_than_two_edges():
    coords = np.eye(3, 2)
    loss, grad = dcl_loss_grad(coords, validate_graph([(0, 1)], 3), 1.0)
    assert loss == 0.0 and np.all(grad == 0)


@pytest.mark.parametrize("alpha,expected", [(1.0, 2.0), (2.0, 4.0)])
def test_ell_single_edge(alpha, expected):
    coords = np.array([[0.0, 0.0], [0.0, 2.0]])
    loss, _ = ell_loss_grad(coords, validate_graph([(0, 1)], 2), alpha)
    assert loss == pytest.approx(expected)


def test_ell_two_lengths():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]])
    loss, _ = ell_loss_grad(coords, validate_graph([(0, 1), (1, 2)], 3), 1.5)
    assert loss == pytest.approx(1.9142136, abs=1e-7)
    assert loss == pytest.approx((1 + 2 ** 1.5) / 2, rel=1e-15)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
def test_ell_gradient(rng, alpha):
    for _ in range(5):
        coords, graph = random_configuration(rng)
        _, grad = ell_loss_grad(coords, graph, alpha)
        numeric = central_differences(lambda y: ell_loss_grad(y, graph, alpha)[0], coords)
        assert max_relative_error(grad, numeric) < 1e-4


def test_ell_degenerate_edge():
    coords = np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]])
    graph = validate_graph([(0, 1), (1, 2)], 3)
    loss, grad = ell_loss_grad(coords, graph, 0.5, epsilon_len=1e-6)
    assert loss == pytest.approx((1e-6 ** 0.5 + 2 ** 0.25) / 2)
    assert np.all(np.isfinite(grad))


def test_ell_scaling(rng):
    coords, graph = random_configuration(rng, 10, 7)
    base = ell_loss_grad(coords, graph, 1.5)[0]
    assert ell_loss_grad(2.5 * coords, graph, 1.5)[0] == pytest.approx(2.5 ** 1.5 * base, rel=1e-12)
    theta = 2.1
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    assert ell_loss_grad(coords @ rot.T + 4, graph, 1.5)[0] == pytest.approx(base, rel=1e-12)


def test_coherence_score():
    coords = np.array([[0.0, 0.0], [1.0, 1.0], [3.0, 0.0], [4.0, 1.0], [0.0, 5.0], [2.0, 7.0]])
    graph = validate_graph([(0, 1), (2, 3), (4, 5)], 6)
    assert coherence_score(coords, graph, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_coherence_score_matches_loss(rng):
    coords, graph = random_configuration(rng, 10, 8)
    assert coherence_score(coords, graph, 0.4) == dcl_loss_grad(coords, graph, 0.4)[0]


def test_arrow_lengths():
    coords = np.array([[0.0, 0.0], [3.0, 4.0]])
    np.testing.assert_array_equal(arrow_lengths(coords, validate_graph([(0, 1)], 2)), [5.0])


def test_gaussian_weight_at_zero():
    assert gaussian_weight(0.0, 1.0) == pytest.approx(0.3989423, abs=1e-7)
