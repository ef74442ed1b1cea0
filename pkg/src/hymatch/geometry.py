"""Exact Poincare-ball geometry.

Points live in the open unit ball B^d = {x : ||x|| < 1} carrying the
conformal metric g_x = (2 / (1 - ||x||^2))^2 g^E.  Everything here is a
pure function of float64 arrays: geodesic distance, the closed-form
distance gradient, the Riemannian gradient rescaling, and the radial
retraction that keeps iterates strictly inside the ball.

Numerical hardening:

* arcosh(1 + u) is evaluated as log1p(u + sqrt(u * (u + 2))) so the
  u -> 0 regime (near-identical points) does not cancel catastrophically.
* The distance gradient divides by sqrt(gamma^2 - 1); when gamma - 1
  falls below ``eps_sing`` (i.e. theta ~ x) the zero vector is returned,
  a valid subgradient at the kink of the distance.
* ``retract`` re-scales until the norm is <= 1 - eps_ball, making it
  bitwise idempotent despite rounding in the division.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BallDomainError

EPS_BALL_DEFAULT = 1e-5
EPS_SING_DEFAULT = 1e-9


@dataclass(frozen=True)
class GeometryConfig:
    """Boundary clearance and singularity guard for ball operations."""

    eps_ball: float = EPS_BALL_DEFAULT
    eps_sing: float = EPS_SING_DEFAULT

    def __post_init__(self):
        if not 0.0 < self.eps_ball < 0.1:
            raise ValueError(f"eps_ball must be in (0, 0.1), got {self.eps_ball}")
        if not 0.0 < self.eps_sing < 1e-3:
            raise ValueError(f"eps_sing must be in (0, 1e-3), got {self.eps_sing}")


def _as_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d point, got shape {x.shape}")
    return x


def check_in_ball(x: np.ndarray, name: str = "point") -> np.ndarray:
    """Validate that ``x`` lies strictly inside the open unit ball."""
    x = _as_point(x)
    if not np.all(np.isfinite(x)):
        raise BallDomainError(f"{name} has non-finite components")
    sq = float(np.dot(x, x))
    if sq >= 1.0:
        raise BallDomainError(
            f"{name} lies outside the open unit ball (||x|| = {np.sqrt(sq):.6g})"
        )
    return x


def conformal_factor(x: np.ndarray) -> float:
    """Scalar lambda(x) = 2 / (1 - ||x||^2) whose square scales the metric."""
    x = check_in_ball(x)
    return 2.0 / (1.0 - float(np.dot(x, x)))


def _arcosh1p(u: float) -> float:
    # arcosh(1 + u) for u >= 0, assembled before the log to keep precision.
    return float(np.log1p(u + np.sqrt(u * (u + 2.0))))


def hyperbolic_distance(q: np.ndarray, a: np.ndarray) -> float:
    """Geodesic distance arcosh(1 + 2 ||q-a||^2 / ((1-||q||^2)(1-||a||^2)))."""
    q = check_in_ball(q, "q")
    a = check_in_ball(a, "a")
    if q.shape != a.shape:
        raise ValueError(f"dimension mismatch: {q.shape} vs {a.shape}")
    diff = q - a
    u = 2.0 * float(np.dot(diff, diff)) / (
        (1.0 - float(np.dot(q, q))) * (1.0 - float(np.dot(a, a)))
    )
    return _arcosh1p(u)


def distance_gradient(
    theta: np.ndarray, x: np.ndarray, eps_sing: float = EPS_SING_DEFAULT
) -> np.ndarray:
    """Partial derivative of hyperbolic_distance(theta, x) w.r.t. theta.

    With alpha = 1 - ||theta||^2, beta = 1 - ||x||^2 and
    gamma = 1 + (2 / (alpha beta)) ||theta - x||^2:

        grad = 4 / (beta sqrt(gamma^2 - 1))
               * ((||x||^2 - 2 <theta, x> + 1) / alpha^2 * theta - x / alpha)

    Returns the zero vector when gamma - 1 < eps_sing (theta ~ x), where
    the distance has its non-smooth minimum.
    """
    theta = check_in_ball(theta, "theta")
    x = check_in_ball(x, "x")
    if theta.shape != x.shape:
        raise ValueError(f"dimension mismatch: {theta.shape} vs {x.shape}")
    alpha = 1.0 - float(np.dot(theta, theta))
    beta = 1.0 - float(np.dot(x, x))
    diff = theta - x
    gamma_m1 = 2.0 * float(np.dot(diff, diff)) / (alpha * beta)
    if gamma_m1 < eps_sing:
        return np.zeros_like(theta)
    # sqrt(gamma^2 - 1) via (gamma - 1)(gamma + 1), no cancellation.
    root = np.sqrt(gamma_m1 * (gamma_m1 + 2.0))
    coef = 4.0 / (beta * root)
    inner = float(np.dot(theta, x))
    return coef * (
        ((float(np.dot(x, x)) - 2.0 * inner + 1.0) / alpha**2) * theta - x / alpha
    )


def riemannian_rescale(theta: np.ndarray, euclidean_grad: np.ndarray) -> np.ndarray:
    """Euclidean-to-Riemannian gradient correction ((1 - ||theta||^2)^2 / 4) g."""
    theta = check_in_ball(theta, "theta")
    grad = np.asarray(euclidean_grad, dtype=np.float64)
    scale = (1.0 - float(np.dot(theta, theta))) ** 2 / 4.0
    return scale * grad


def retract(v: np.ndarray, eps_ball: float = EPS_BALL_DEFAULT) -> np.ndarray:
    """Radial projection into the closed ball of radius 1 - eps_ball.

    Vectors already inside are returned unchanged (bitwise).  The rescale
    loops until the rounded norm actually lands inside, so applying
    retract twice equals applying it once, bit for bit.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("retract requires finite components")
    limit = 1.0 - eps_ball
    out = v
    norm = float(np.linalg.norm(out))
    while norm > limit:
        out = out * (limit / norm)
        norm = float(np.linalg.norm(out))
    return out
