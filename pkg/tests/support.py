"""Shared helpers for the test suite: samplers and independent oracles."""

import numpy as np

from hymatch.geometry import hyperbolic_distance
from hymatch.model import pool_and_normalize


def counting_rank(params, q, candidates, truth_index):
    """Independent ranking oracle: count strictly-better and equal-with-smaller-index."""
    yq = pool_and_normalize(params, q)
    scores = [
        params.w_f * hyperbolic_distance(yq, pool_and_normalize(params, c)) + params.b_f
        for c in candidates
    ]
    s_t = scores[truth_index]
    better = sum(1 for s in scores if s < s_t)
    equal_before = sum(1 for j, s in enumerate(scores) if s == s_t and j < truth_index)
    return better + equal_before + 1


def random_ball_point(rng, dim, max_norm=0.95):
    """Uniform direction, uniform radius in [0, max_norm)."""
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    return rng.uniform(0.0, max_norm) * direction


def central_difference(f, x, h=1e-6):
    """Central finite-difference gradient of scalar f at 1-d point x."""
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


def max_rel_err(analytic, reference):
    """Elementwise relative error with a scale-aware floor for ~0 entries."""
    analytic = np.asarray(analytic, dtype=float)
    reference = np.asarray(reference, dtype=float)
    floor = 1e-3 * (1.0 + np.max(np.abs(reference), initial=0.0))
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(reference)), floor)
    return float(np.max(np.abs(analytic - reference) / denom))
