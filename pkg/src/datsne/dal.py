"""Direction-aware losses on the temporal edges of a 2-D embedding.

Two penalties act on the arrows ``p = y_target - y_source``:

* the directional coherence loss averages ``w * (1 - u_a . u_b)^2`` over all
  unordered arrow pairs, where ``u`` are unit arrow directions and ``w`` is a
  Gaussian kernel on the closest-approach distance between the two segments;
* the edge length loss averages ``|p|^alpha`` over arrows.

The coherence gradient treats the kernel weights as constants of the current
evaluation: it only rotates arrows towards their neighbors and never pushes
them apart to shrink the weight.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import ConfigError, TemporalGraph

_TINY_SQ = 1e-30
_PARALLEL_TOL = 1e-12


class DegenerateSpanWarning(UserWarning):
    """All embedding coordinates coincide; sigma fell back to the raw fraction."""


@dataclass(frozen=True)
class DalParams:
    lambda_dcl: float = 10.0
    lambda_ell: float = 0.5
    alpha: float = 1.5
    sigma_fraction: float = 0.05
    epsilon_len: float = 1e-12

    def __post_init__(self):
        if self.lambda_dcl < 0 or self.lambda_ell < 0:
            raise ConfigError("penalty strengths must be non-negative")
        if not self.alpha > 0 or not self.sigma_fraction > 0 or not self.epsilon_len > 0:
            raise ConfigError("alpha, sigma_fraction and epsilon_len must be positive")


@dataclass(frozen=True, eq=False)
class EdgeGeometry:
    """Arrow start/end points, vectors, lengths and unit directions.

    Arrays carry a leading edge axis; a single edge is an array of length 1.
    Unit vectors of edges not longer than ``epsilon_len`` are zero.
    """

    start: np.ndarray
    end: np.ndarray
    vector: np.ndarray
    length: np.ndarray
    unit: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_endpoints(cls, start, end, epsilon_len: float = 1e-12) -> "EdgeGeometry":
        start = np.atleast_2d(np.asarray(start, dtype=np.float64))
        end = np.atleast_2d(np.asarray(end, dtype=np.float64))
        vector = end - start
        length = np.hypot(vector[:, 0], vector[:, 1])
        valid = length > epsilon_len
        unit = np.zeros_like(vector)
        unit[valid] = vector[valid] / length[valid, None]
        return cls(start, end, vector, length, unit, valid)

    @classmethod
    def from_graph(cls, coords: np.ndarray, graph: TemporalGraph,
                   epsilon_len: float = 1e-12) -> "EdgeGeometry":
        return cls.from_endpoints(coords[graph.sources], coords[graph.targets], epsilon_len)

    def __len__(self):
        return self.length.shape[0]


def segment_distances(a0, a1, b0, b1):
    """Vectorized closest approach between segments ``[a0, a1]`` and ``[b0, b1]``.

    All inputs broadcast against each other with a trailing axis of size 2.
    The parameters follow the convention ``point = s * a0 + (1 - s) * a1``
    (likewise ``t`` on the second segment), so ``s = 1`` selects ``a0``.

    Returns
    -------
    distance, s_star, t_star : ndarray
    """
    a0, a1, b0, b1 = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (a0, a1, b0, b1)))
    d1 = a1 - a0
    d2 = b1 - b0
    r = a0 - b0
    a = np.einsum("...k,...k->...", d1, d1)
    e = np.einsum("...k,...k->...", d2, d2)
    f = np.einsum("...k,...k->...", d2, r)
    c = np.einsum("...k,...k->...", d1, r)
    b = np.einsum("...k,...k->...", d1, d2)
    a_pt = a <= _TINY_SQ
    b_pt = e <= _TINY_SQ
    safe_a = np.where(a_pt, 1.0, a)
    safe_e = np.where(b_pt, 1.0, e)

    with np.errstate(invalid="ignore", divide="ignore"):
        denom = a * e - b * b
        parallel = denom <= _PARALLEL_TOL * a * e
        # Closest point on the infinite lines, clamped to the first segment;
        # parallel segments may pick any s, so start from the segment origin.
        sig = np.where(parallel, 0.0, np.clip((b * f - c * e) / np.where(parallel, 1.0, denom), 0.0, 1.0))
        tau = (b * sig + f) / safe_e
        # Re-clamp tau and recompute sigma for that endpoint.
        tau_lo = tau < 0.0
        tau_hi = tau > 1.0
        sig = np.where(tau_lo, np.clip(-c / safe_a, 0.0, 1.0), sig)
        sig = np.where(tau_hi, np.clip((b - c) / safe_a, 0.0, 1.0), sig)
        tau = np.clip(tau, 0.0, 1.0)

        # Degenerate branches.
        only_b = ~a_pt & b_pt
        sig = np.where(only_b, np.clip(-c / safe_a, 0.0, 1.0), sig)
        tau = np.where(only_b, 0.0, tau)
        only_a = a_pt & ~b_pt
        sig = np.where(only_a, 0.0, sig)
        tau = np.where(only_a, np.clip(f / safe_e, 0.0, 1.0), tau)
        both = a_pt & b_pt
        sig = np.where(both, 0.0, sig)
        tau = np.where(both, 0.0, tau)

    diff = (a0 + sig[..., None] * d1) - (b0 + tau[..., None] * d2)
    dist = np.sqrt(np.einsum("...k,...k->...", diff, diff))
    return dist, 1.0 - sig, 1.0 - tau


def segment_distance(a0, a1, b0, b1) -> tuple[float, float, float]:
    """Distance between two 2-D segments and the minimizing parameters.

    >>> segment_distance((0, 0), (1, 0), (0, 1), (1, 1))[0]
    1.0
    """
    d, s, t = segment_distances(a0, a1, b0, b1)
    return float(d), float(s), float(t)


def embedding_span(coords: np.ndarray) -> float:
    """Largest per-dimension coordinate range."""
    return float(np.max(coords.max(axis=0) - coords.min(axis=0)))


def adaptive_sigma(coords: np.ndarray, sigma_fraction: float) -> float:
    """Kernel scale as a fraction of the current embedding span.

    A zero span falls back to ``sigma_fraction`` itself and emits
    :class:`DegenerateSpanWarning`.
    """
    span = embedding_span(coords)
    if span <= 0.0:
        warnings.warn("embedding span is zero; using sigma_fraction as sigma",
                      DegenerateSpanWarning, stacklevel=2)
        return float(sigma_fraction)
    return sigma_fraction * span


def gaussian_weight(distance, sigma: float):
    # The distance enters the exponent unsquared.
    return np.exp(-np.asarray(distance) / (2.0 * sigma * sigma)) / math.sqrt(2.0 * math.pi * sigma * sigma)


def direction_penalty(u_a, u_b):
    return (1.0 - np.einsum("...k,...k->...", u_a, u_b)) ** 2


def dcl_pair_terms(edge_a: EdgeGeometry, edge_b: EdgeGeometry, sigma: float) -> tuple[float, float]:
    """Kernel weight and direction penalty for one pair of non-degenerate edges."""
    d, _, _ = segment_distances(edge_a.start[0], edge_a.end[0], edge_b.start[0], edge_b.end[0])
    return float(gaussian_weight(d, sigma)), float(direction_penalty(edge_a.unit[0], edge_b.unit[0]))


def pair_weights(geom: EdgeGeometry, sigma: float) -> np.ndarray:
    """Symmetric (|E|, |E|) kernel weights with zero diagonal and zero rows
    for degenerate edges."""
    m = len(geom)
    iu, ju = np.triu_indices(m, k=1)
    d, _, _ = segment_distances(geom.start[iu], geom.end[iu], geom.start[ju], geom.end[ju])
    w = gaussian_weight(d, sigma) * (geom.valid[iu] & geom.valid[ju])
    weights = np.zeros((m, m))
    weights[iu, ju] = w
    weights[ju, iu] = w
    return weights


def _scatter_edge_grad(grad_p: np.ndarray, graph: TemporalGraph, n_points: int) -> np.ndarray:
    grad = np.zeros((n_points, 2))
    np.add.at(grad, graph.targets, grad_p)
    np.subtract.at(grad, graph.sources, grad_p)
    return grad


def dcl_loss_grad(coords: np.ndarray, graph: TemporalGraph, sigma: float,
                  epsilon_len: float = 1e-12, compute_grad: bool = True):
    """Directional coherence loss and its stop-gradient derivative.

    The loss sums each unordered edge pair once and divides by ``C(|E|, 2)``.

    Returns
    -------
    loss : float
    grad : ndarray of shape (N, 2), or None when ``compute_grad`` is False
    """
    n = coords.shape[0]
    m = graph.n_edges
    if m < 2:
        return 0.0, (np.zeros((n, 2)) if compute_grad else None)
    geom = EdgeGeometry.from_graph(coords, graph, epsilon_len)
    n_pairs = m * (m - 1) / 2.0
    grad_u = np.zeros((m, 2))
    loss = _kernels.dcl_pairs(geom.start, geom.end, geom.unit, geom.valid,
                              float(sigma), grad_u) / n_pairs
    if not compute_grad:
        return loss, None
    return loss, _unit_to_point_grad(grad_u / n_pairs, geom, graph, n)


def dcl_loss_grad_dense(coords: np.ndarray, graph: TemporalGraph, sigma: float,
                        epsilon_len: float = 1e-12):
    """Same as :func:`dcl_loss_grad`, built from dense (|E|, |E|) numpy matrices."""
    n = coords.shape[0]
    m = graph.n_edges
    if m < 2:
        return 0.0, np.zeros((n, 2))
    geom = EdgeGeometry.from_graph(coords, graph, epsilon_len)
    weights = pair_weights(geom, sigma)
    gap = 1.0 - geom.unit @ geom.unit.T
    n_pairs = m * (m - 1) / 2.0
    loss = 0.5 * float(np.sum(weights * gap * gap)) / n_pairs
    # d/du_a of w_ab (1 - u_a.u_b)^2 = -2 w_ab (1 - u_a.u_b) u_b
    grad_u = -2.0 * (weights * gap) @ geom.unit / n_pairs
    return loss, _unit_to_point_grad(grad_u, geom, graph, n)


def _unit_to_point_grad(grad_u, geom: EdgeGeometry, graph: TemporalGraph, n: int):
    # du/dp = (I - u u^T) / |p|
    radial = np.einsum("ek,ek->e", grad_u, geom.unit)
    safe_len = np.where(geom.valid, geom.length, 1.0)
    grad_p = (grad_u - radial[:, None] * geom.unit) / safe_len[:, None]
    grad_p[~geom.valid] = 0.0
    return _scatter_edge_grad(grad_p, graph, n)


def ell_loss_grad(coords: np.ndarray, graph: TemporalGraph, alpha: float,
                  epsilon_len: float = 1e-12, compute_grad: bool = True):
    """Mean arrow length raised to ``alpha``; degenerate arrows count as
    ``epsilon_len ** alpha`` and receive no gradient."""
    n = coords.shape[0]
    m = graph.n_edges
    if m < 1:
        return 0.0, (np.zeros((n, 2)) if compute_grad else None)
    geom = EdgeGeometry.from_graph(coords, graph, epsilon_len)
    lengths = np.where(geom.valid, geom.length, epsilon_len)
    loss = float(np.sum(lengths ** alpha)) / m
    if not compute_grad:
        return loss, None
    scale = np.where(geom.valid, alpha * lengths ** (alpha - 1.0) / m, 0.0)
    return loss, _scatter_edge_grad(scale[:, None] * geom.unit, graph, n)


def coherence_score(coords: np.ndarray, graph: TemporalGraph, sigma: float,
                    epsilon_len: float = 1e-12) -> float:
    """Directional coherence of a fixed embedding; lower is more coherent."""
    return dcl_loss_grad(coords, graph, sigma, epsilon_len, compute_grad=False)[0]


def arrow_lengths(coords: np.ndarray, graph: TemporalGraph) -> np.ndarray:
    vec = coords[graph.targets] - coords[graph.sources]
    return np.hypot(vec[:, 0], vec[:, 1])
