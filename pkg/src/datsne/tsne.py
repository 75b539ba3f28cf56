"""Exact t-SNE objective and the two-phase delta-bar-delta optimizer.

The optimizer minimizes ``KL + lambda_dcl * DCL + lambda_ell * ELL`` where
the direction-aware terms from :mod:`datsne.dal` act in both phases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels, dal
from .affinity import AffinityMatrix, build_affinities
from .model import (ConfigError, DaTsneConfig, Dataset, Diverged, EmbeddingState,
                    TemporalGraph)

logger = logging.getLogger(__name__)

INIT_VARIANCE = 1e-4
GAIN_INCREMENT = 0.2
GAIN_DECAY = 0.8
MIN_GAIN = 0.01


class DegenerateData(UserWarning):
    """Centered data has rank < 2; PCA initialization fell back to random."""


@dataclass(frozen=True)
class OptimizerSchedule:
    exaggeration_factor: float
    exaggeration_iterations: int
    total_iterations: int
    momentum_early: float
    momentum_late: float
    learning_rate: float
    max_step_norm: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.exaggeration_iterations <= self.total_iterations:
            raise ConfigError("exaggeration_iterations must lie in [0, total_iterations]")

    @classmethod
    def from_config(cls, config: DaTsneConfig, n_points: int) -> "OptimizerSchedule":
        lr = config.learning_rate_override
        if lr is None:
            lr = n_points / config.exaggeration_factor
        return cls(config.exaggeration_factor, config.exaggeration_iterations,
                   config.total_iterations, config.momentum_early,
                   config.momentum_late, lr, config.max_step_norm)

    def phase(self, iteration: int) -> tuple[float, float]:
        """(exaggeration, momentum) in effect at ``iteration``."""
        if iteration < self.exaggeration_iterations:
            return self.exaggeration_factor, self.momentum_early
        return 1.0, self.momentum_late


@dataclass
class LossTrace:
    """Per-iteration losses; ``exaggerated`` marks rows whose KL uses scaled P."""

    kl: list = field(default_factory=list)
    dcl: list = field(default_factory=list)
    ell: list = field(default_factory=list)
    total: list = field(default_factory=list)
    span: list = field(default_factory=list)
    exaggerated: list = field(default_factory=list)

    def append(self, kl, dcl_value, ell_value, total, span, exaggerated):
        self.kl.append(kl)
        self.dcl.append(dcl_value)
        self.ell.append(ell_value)
        self.total.append(total)
        self.span.append(span)
        self.exaggerated.append(exaggerated)

    def __len__(self):
        return len(self.kl)

    def as_array(self) -> np.ndarray:
        """(iterations, 5) array of kl, dcl, ell, total, span."""
        return np.column_stack([self.kl, self.dcl, self.ell, self.total, self.span]).reshape(-1, 5)


def init_embedding(data: Dataset, seed: int = 0) -> EmbeddingState:
    """PCA initialization rescaled to per-column variance 1e-4.

    Component signs are fixed by making the largest-magnitude loading of each
    principal axis positive. Rank-deficient data (rank < 2 after centering)
    falls back to a seeded isotropic Gaussian with a :class:`DegenerateData`
    warning.
    """
    import warnings

    x = data.points - data.points.mean(axis=0)
    _, sv, vt = np.linalg.svd(x, full_matrices=False)
    tol = sv[0] * max(x.shape) * np.finfo(float).eps if sv.size else 0.0
    rank = int(np.sum(sv > tol)) if sv.size and sv[0] > 0 else 0
    if rank < 2:
        warnings.warn(f"data rank {rank} < 2; using random initialization", DegenerateData,
                      stacklevel=2)
        coords = np.random.default_rng(seed).standard_normal((data.n_points, 2))
    else:
        axes = vt[:2]
        flip = np.sign(axes[np.arange(2), np.argmax(np.abs(axes), axis=1)])
        coords = x @ (axes * flip[:, None]).T
    coords = coords - coords.mean(axis=0)
    coords = coords / coords.std(axis=0) * np.sqrt(INIT_VARIANCE)
    return EmbeddingState.fresh(coords)


def low_dim_affinities(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Student-t affinities ``q`` and the unnormalized kernel ``1 / (1 + d^2)``."""
    sq = np.sum(coords * coords, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * coords @ coords.T, 0.0)
    kernel = 1.0 / (1.0 + d2)
    np.fill_diagonal(kernel, 0.0)
    q = kernel / kernel.sum()
    return q, kernel


def kl_gradient(p, coords: np.ndarray, exaggeration: float = 1.0) -> tuple[float, np.ndarray]:
    """KL divergence of exaggerated P from Q and the standard t-SNE gradient.

    ``grad_i = 4 sum_j (rho p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2)``.
    For ``rho = 1`` this is the exact gradient of the returned loss; for
    ``rho > 1`` the loss is ``sum rho p log(rho p / q)`` (not a divergence,
    since ``rho P`` sums to ``rho``).
    """
    p = p.p if isinstance(p, AffinityMatrix) else p
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    grad = np.empty_like(coords)
    loss = _kernels.kl_loss_grad(np.ascontiguousarray(p), coords, float(exaggeration), grad)
    return float(loss), grad


def kl_gradient_dense(p, coords: np.ndarray, exaggeration: float = 1.0) -> tuple[float, np.ndarray]:
    """Same as :func:`kl_gradient`, with dense numpy matrices."""
    p = p.p if isinstance(p, AffinityMatrix) else p
    q, kernel = low_dim_affinities(coords)
    scaled = exaggeration * p
    mask = scaled > 0
    loss = float(np.sum(scaled[mask] * np.log(scaled[mask] / q[mask])))
    force = (scaled - q) * kernel
    grad = 4.0 * (force.sum(axis=1)[:, None] * coords - force @ coords)
    return loss, grad


def delta_bar_delta_step(state: EmbeddingState, grad: np.ndarray,
                         schedule: OptimizerSchedule, phase_momentum: float) -> EmbeddingState:
    """One gain-adapted momentum step, followed by re-centering.

    Gains grow by 0.2 where ``sign(grad) != sign(prev_update)`` and shrink by
    a factor 0.8 otherwise, never below 0.01. With ``schedule.max_step_norm``
    set, any point whose update is longer than that is shortened to it. The
    state is updated in place and returned.
    """
    flipped = np.sign(grad) != np.sign(state.prev_update)
    gains = np.where(flipped, state.gains + GAIN_INCREMENT, state.gains * GAIN_DECAY)
    np.maximum(gains, MIN_GAIN, out=gains)
    update = phase_momentum * state.prev_update - schedule.learning_rate * gains * grad
    if schedule.max_step_norm is not None:
        norms = np.hypot(update[:, 0], update[:, 1]) if update.shape[1] == 2 \
            else np.linalg.norm(update, axis=1)
        over = norms > schedule.max_step_norm
        update[over] *= (schedule.max_step_norm / norms[over])[:, None]
    coords = state.coords + update
    coords -= coords.mean(axis=0)
    state.coords = coords
    state.gains = gains
    state.prev_update = update
    state.iteration += 1
    return state


def objective(p, coords: np.ndarray, graph: TemporalGraph, config: DaTsneConfig,
              exaggeration: float = 1.0, compute_grad: bool = True):
    """Evaluate every loss component at ``coords``.

    Returns ``(components, grad)`` where components is a dict with ``kl``,
    ``dcl``, ``ell``, ``total``, ``span`` and ``sigma``. The DCL kernel scale
    is recomputed from the current span on every call.
    """
    sigma = dal.adaptive_sigma(coords, config.sigma_fraction)
    kl, grad = kl_gradient(p, coords, exaggeration)
    dcl_value, dcl_grad = dal.dcl_loss_grad(coords, graph, sigma, config.epsilon_len,
                                            compute_grad and config.lambda_dcl > 0)
    ell_value, ell_grad = dal.ell_loss_grad(coords, graph, config.alpha, config.epsilon_len,
                                            compute_grad and config.lambda_ell > 0)
    if compute_grad:
        if dcl_grad is not None:
            grad = grad + config.lambda_dcl * dcl_grad
        if ell_grad is not None:
            grad = grad + config.lambda_ell * ell_grad
    total = kl + config.lambda_dcl * dcl_value + config.lambda_ell * ell_value
    components = dict(kl=kl, dcl=dcl_value, ell=ell_value, total=total,
                      span=dal.embedding_span(coords), sigma=sigma)
    return components, (grad if compute_grad else None)


def optimize(data: Dataset, graph: TemporalGraph, config: DaTsneConfig,
             affinities: AffinityMatrix | None = None,
             initial: EmbeddingState | None = None,
             callback=None) -> tuple[EmbeddingState, LossTrace]:
    """Run direction-aware t-SNE and return the final state with its loss trace.

    The trace row for iteration ``k`` holds the losses at the coordinates the
    ``k``-th step started from. ``callback(state, components)`` is invoked
    after every step when given.

    Raises
    ------
    Diverged
        A coordinate became non-finite.
    """
    config.check_against(data.n_points)
    p = affinities if affinities is not None else build_affinities(data, config.perplexity)
    state = initial.copy() if initial is not None else init_embedding(data, config.seed)
    schedule = OptimizerSchedule.from_config(config, data.n_points)
    trace = LossTrace()
    logger.info("optimizing N=%d, |E|=%d for %d iterations (learning rate %.4g)",
                data.n_points, graph.n_edges, schedule.total_iterations, schedule.learning_rate)

    for it in range(schedule.total_iterations):
        exaggeration, momentum = schedule.phase(it)
        components, grad = objective(p, state.coords, graph, config, exaggeration)
        trace.append(components["kl"], components["dcl"], components["ell"],
                     components["total"], components["span"], exaggeration != 1.0)
        delta_bar_delta_step(state, grad, schedule, momentum)
        if not np.all(np.isfinite(state.coords)):
            raise Diverged(it, f"span before step {components['span']:.4g}")
        if callback is not None:
            callback(state, components)
        if it % 1000 == 0:
            logger.debug("iter %d: kl=%.5g dcl=%.5g ell=%.5g span=%.4g", it,
                         components["kl"], components["dcl"], components["ell"],
                         components["span"])
    return state, trace
