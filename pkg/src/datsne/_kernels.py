"""Compiled inner loops for the O(N^2) and O(|E|^2) pair sums.

Each kernel mirrors a vectorized numpy routine elsewhere in the package and
is tested against it. Loops run serially, so results are deterministic.
"""

import math

import numba
import numpy as np

_TINY_SQ = 1e-30
_PARALLEL_TOL = 1e-12


@numba.njit(cache=True)
def _clamp01(x):
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


@numba.njit(cache=True)
def seg_dist(ax, ay, bx, by, cx, cy, dx, dy):
    """Distance between segments [a, b] and [c, d] (same branches as
    ``dal.segment_distances``)."""
    d1x, d1y = bx - ax, by - ay
    d2x, d2y = dx - cx, dy - cy
    rx, ry = ax - cx, ay - cy
    a = d1x * d1x + d1y * d1y
    e = d2x * d2x + d2y * d2y
    f = d2x * rx + d2y * ry
    if a <= _TINY_SQ and e <= _TINY_SQ:
        s = 0.0
        t = 0.0
    elif a <= _TINY_SQ:
        s = 0.0
        t = _clamp01(f / e)
    else:
        c = d1x * rx + d1y * ry
        if e <= _TINY_SQ:
            t = 0.0
            s = _clamp01(-c / a)
        else:
            b = d1x * d2x + d1y * d2y
            denom = a * e - b * b
            if denom <= _PARALLEL_TOL * a * e:
                s = 0.0
            else:
                s = _clamp01((b * f - c * e) / denom)
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clamp01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clamp01((b - c) / a)
    px = ax + s * d1x - cx - t * d2x
    py = ay + s * d1y - cy - t * d2y
    return math.sqrt(px * px + py * py)


@numba.njit(cache=True)
def dcl_pairs(start, end, unit, valid, sigma, grad_u):
    """Sum ``w (1 - u_a.u_b)^2`` over unordered valid pairs.

    Accumulates ``d/du_a`` of the (unnormalized) sum into ``grad_u`` with the
    weights held constant, and returns the unnormalized loss.
    """
    m = start.shape[0]
    inv_two_var = 1.0 / (2.0 * sigma * sigma)
    norm = 1.0 / math.sqrt(2.0 * math.pi * sigma * sigma)
    loss = 0.0
    for i in range(m):
        if not valid[i]:
            continue
        for j in range(i + 1, m):
            if not valid[j]:
                continue
            d = seg_dist(start[i, 0], start[i, 1], end[i, 0], end[i, 1],
                         start[j, 0], start[j, 1], end[j, 0], end[j, 1])
            w = norm * math.exp(-d * inv_two_var)
            gap = 1.0 - (unit[i, 0] * unit[j, 0] + unit[i, 1] * unit[j, 1])
            loss += w * gap * gap
            coef = -2.0 * w * gap
            grad_u[i, 0] += coef * unit[j, 0]
            grad_u[i, 1] += coef * unit[j, 1]
            grad_u[j, 0] += coef * unit[i, 0]
            grad_u[j, 1] += coef * unit[i, 1]
    return loss


@numba.njit(cache=True)
def kl_loss_grad(p, y, exaggeration, grad):
    """Exaggerated KL(P || Q) and the standard t-SNE gradient, written into ``grad``."""
    n = y.shape[0]
    z = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = y[i, 0] - y[j, 0]
            dy = y[i, 1] - y[j, 1]
            z += 2.0 / (1.0 + dx * dx + dy * dy)
    log_z = math.log(z)
    inv_z = 1.0 / z
    loss = 0.0
    for i in range(n):
        gx = 0.0
        gy = 0.0
        for j in range(n):
            if i == j:
                continue
            dx = y[i, 0] - y[j, 0]
            dy = y[i, 1] - y[j, 1]
            k = 1.0 / (1.0 + dx * dx + dy * dy)
            pij = exaggeration * p[i, j]
            if pij > 0.0:
                # log(q) = log(k) - log(z)
                loss += pij * (math.log(pij) - math.log(k) + log_z)
            force = (pij - k * inv_z) * k
            gx += force * dx
            gy += force * dy
        grad[i, 0] = 4.0 * gx
        grad[i, 1] = 4.0 * gy
    return loss


def warmup():
    """Trigger compilation with tiny inputs."""
    s = np.zeros((2, 2))
    e = np.ones((2, 2))
    dcl_pairs(s, e, e / math.sqrt(2.0), np.ones(2, dtype=np.bool_), 1.0, np.zeros((2, 2)))
    kl_loss_grad(np.full((2, 2), 0.25), e, 1.0, np.zeros((2, 2)))
