"""High-dimensional input affinities with per-point perplexity calibration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .model import Dataset, InputDataError

BETA_MIN = 1e-20
BETA_MAX = 1e20
MAX_BISECTIONS = 200
ENTROPY_TOL = 1e-5


class NoConvergence(InputDataError):
    def __init__(self, index: int, perplexity: float, entropy: float):
        super().__init__(
            f"bandwidth search for point {index} did not reach perplexity {perplexity:g} "
            f"(closest entropy {entropy:.6g} nats, target {np.log(perplexity):.6g})")
        self.index = index


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Symmetric joint probabilities with zero diagonal, summing to one."""

    p: np.ndarray

    @property
    def n_points(self) -> int:
        return self.p.shape[0]


def pairwise_sq_distances(data: Dataset) -> np.ndarray:
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    return squareform(pdist(points, metric="sqeuclidean"))


def _conditional(sq_dist_row: np.ndarray, self_index: int, beta: float):
    """Gaussian conditional distribution over neighbors and its entropy (nats)."""
    scaled = beta * sq_dist_row
    scaled[self_index] = np.inf
    scaled -= scaled.min()
    weights = np.exp(-scaled)
    total = weights.sum()
    probs = weights / total
    nz = probs > 0
    # log p = -scaled - log(total); avoids log of underflowed entries.
    entropy = float(np.sum(probs[nz] * (scaled[nz] + np.log(total))))
    return probs, entropy


def row_entropy(sq_dist_row, self_index: int, beta: float) -> float:
    row = np.array(sq_dist_row, dtype=np.float64)
    return _conditional(row, self_index, beta)[1]


def calibrate_bandwidth(sq_dist_row, self_index: int, perplexity: float,
                        tol: float = ENTROPY_TOL) -> tuple[float, np.ndarray]:
    """Find the precision ``beta = 1 / (2 sigma^2)`` matching ``perplexity``.

    Bisection runs in log-space over ``[1e-20, 1e20]``; entropy is strictly
    decreasing in ``beta`` unless all neighbors are equidistant, in which
    case the conditionals are uniform for every ``beta`` and ``beta = 1`` is
    returned as-is.

    Returns
    -------
    beta : float
    cond_probs : ndarray of shape (N,)
        Conditional probabilities ``p_{j|i}``; zero at ``self_index``.
    """
    row = np.array(sq_dist_row, dtype=np.float64)
    n = row.shape[0]
    if not 0 < perplexity < n:
        raise ValueError(f"perplexity must lie in (0, {n}), got {perplexity}")
    neighbors = np.delete(row, self_index)
    if neighbors.max() == neighbors.min():
        probs = np.full(n, 1.0 / (n - 1))
        probs[self_index] = 0.0
        return 1.0, probs

    target = np.log(perplexity)
    lo, hi = np.log(BETA_MIN), np.log(BETA_MAX)
    # Start near the natural scale of the row so typical rows converge fast.
    spread = np.median(neighbors[neighbors > 0]) if np.any(neighbors > 0) else 1.0
    log_beta = float(np.clip(-np.log(spread), lo, hi))
    best = None
    for _ in range(MAX_BISECTIONS):
        probs, entropy = _conditional(row.copy(), self_index, np.exp(log_beta))
        if best is None or abs(entropy - target) < abs(best[2] - target):
            best = (log_beta, probs, entropy)
        if abs(entropy - target) <= tol:
            return float(np.exp(log_beta)), probs
        if entropy > target:
            lo = log_beta
        else:
            hi = log_beta
        log_beta = 0.5 * (lo + hi)
    raise NoConvergence(self_index, perplexity, best[2])


def build_affinities(data: Dataset, perplexity: float,
                     distance: Callable[[Dataset], np.ndarray] = pairwise_sq_distances
                     ) -> AffinityMatrix:
    """Symmetrized joint probabilities ``p_ij = (p_{j|i} + p_{i|j}) / 2N``."""
    dist = distance(data)
    n = dist.shape[0]
    cond = np.zeros((n, n))
    for i in range(n):
        _, cond[i] = calibrate_bandwidth(dist[i], i, perplexity)
    p = (cond + cond.T) / (2.0 * n)
    np.fill_diagonal(p, 0.0)
    p.setflags(write=False)
    return AffinityMatrix(p=p)
