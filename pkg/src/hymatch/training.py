"""Triple training: pairwise hinge loss, hand-written backprop, SGD loop.

The trainable parameters (W_p, b_p, w_f, b_f) are Euclidean; the ball
points are the pooled activations.  The backward pass therefore runs the
ordinary chain rule

    hinge -> score -> distance -> pooled point -> norm clamp -> sum
          -> relu -> linear

and, when ``riemannian`` is enabled (the default), additionally rescales
the gradient arriving at each pooled ball point y by the metric
correction (1 - ||y||^2)^2 / 4 before continuing downstream.  With the
correction disabled the returned gradients are exactly the Euclidean
gradients of ``batch_loss`` and are checked against central finite
differences in the tests.

Subgradient conventions: hinge at exactly zero margin uses 0, relu at
exactly zero pre-activation uses 0, distance at coincident points uses
the zero vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .geometry import (
    EPS_BALL_DEFAULT,
    EPS_SING_DEFAULT,
    distance_gradient,
    hyperbolic_distance,
    riemannian_rescale,
)
from .model import (
    ModelConfig,
    ModelParams,
    PoolCache,
    ROLE_ANSWER,
    ROLE_QUESTION,
    build_sequence,
    init_params,
    pool_and_normalize,
)


@dataclass
class TrainConfig:
    margin: float = 1.0
    lr: float = 0.05
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    eps_ball: float = EPS_BALL_DEFAULT
    eps_sing: float = EPS_SING_DEFAULT
    riemannian: bool = True

    def __post_init__(self):
        if self.margin <= 0 or self.lr < 0:
            raise ValueError("margin must be > 0 and lr >= 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TripleBatch:
    """Nonempty list of (question, positive answer, negative answer) sequences."""

    items: list

    def __post_init__(self):
        if not self.items:
            raise ValueError("batch must be nonempty")
        for q, pos, neg in self.items:
            if q.role != ROLE_QUESTION:
                raise ValueError("first element of each item must have the question role")
            if pos.role != ROLE_ANSWER or neg.role != ROLE_ANSWER:
                raise ValueError("answers must have the answer role")

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class Gradients:
    W_p: np.ndarray
    b_p: np.ndarray
    w_f: float
    b_f: float


@dataclass
class TrainResult:
    params: ModelParams
    epoch_losses: list
    max_embed_norm: float = 0.0


def hinge_loss(s_pos: float, s_neg: float, margin: float) -> float:
    """max(0, s_pos + margin - s_neg)."""
    return max(0.0, s_pos + margin - s_neg)


def batch_loss(params: ModelParams, batch: TripleBatch, cfg: TrainConfig) -> float:
    """Mean hinge loss over the batch (mean, not the raw double sum)."""
    total = 0.0
    for q, pos, neg in batch.items:
        yq = pool_and_normalize(params, q, cfg.eps_ball)
        yp = pool_and_normalize(params, pos, cfg.eps_ball)
        yn = pool_and_normalize(params, neg, cfg.eps_ball)
        s_pos = params.w_f * hyperbolic_distance(yq, yp) + params.b_f
        s_neg = params.w_f * hyperbolic_distance(yq, yn) + params.b_f
        total += hinge_loss(s_pos, s_neg, cfg.margin)
    return total / len(batch)


def _pool_backward(cache: PoolCache, g_point: np.ndarray) -> tuple:
    """Gradient of one pooled branch w.r.t. (W_p, b_p) given dL/d(point)."""
    if cache.clamped:
        # point = k * pooled / ||pooled|| with k = ||point|| ~ 1 - eps_ball
        unorm = float(np.linalg.norm(cache.pooled))
        unit = cache.pooled / unorm
        k = float(np.linalg.norm(cache.point))
        g_pooled = (k / unorm) * (g_point - float(np.dot(unit, g_point)) * unit)
    else:
        g_pooled = g_point
    g_pre = cache.relu_mask * g_pooled  # (M, d): sum copies g_pooled to every token
    return g_pre.T @ cache.tokens, g_pre.sum(axis=0)


def _backward_with_stats(
    params: ModelParams, batch: TripleBatch, cfg: TrainConfig
) -> tuple:
    g_W = np.zeros_like(params.W_p)
    g_b = np.zeros_like(params.b_p)
    g_wf = 0.0
    g_bf = 0.0
    total_loss = 0.0
    max_norm = 0.0
    for q, pos, neg in batch.items:
        yq, cq = pool_and_normalize(params, q, cfg.eps_ball, cache=True)
        yp, cp = pool_and_normalize(params, pos, cfg.eps_ball, cache=True)
        yn, cn = pool_and_normalize(params, neg, cfg.eps_ball, cache=True)
        max_norm = max(max_norm, *(float(np.linalg.norm(y)) for y in (yq, yp, yn)))
        d_pos = hyperbolic_distance(yq, yp)
        d_neg = hyperbolic_distance(yq, yn)
        loss = hinge_loss(
            params.w_f * d_pos + params.b_f, params.w_f * d_neg + params.b_f, cfg.margin
        )
        total_loss += loss
        if loss <= 0.0:
            continue  # clamped hinge: subgradient zero
        # dL/ds_pos = +1, dL/ds_neg = -1
        g_wf += d_pos - d_neg
        g_bf += 1.0 - 1.0
        dd_pos = params.w_f
        dd_neg = -params.w_f
        g_yq = dd_pos * distance_gradient(yq, yp, cfg.eps_sing) + dd_neg * distance_gradient(
            yq, yn, cfg.eps_sing
        )
        g_yp = dd_pos * distance_gradient(yp, yq, cfg.eps_sing)
        g_yn = dd_neg * distance_gradient(yn, yq, cfg.eps_sing)
        for y, cache, g_y in ((yq, cq, g_yq), (yp, cp, g_yp), (yn, cn, g_yn)):
            if cfg.riemannian:
                g_y = riemannian_rescale(y, g_y)
            dW, db = _pool_backward(cache, g_y)
            g_W += dW
            g_b += db
    m = len(batch)
    grads = Gradients(W_p=g_W / m, b_p=g_b / m, w_f=g_wf / m, b_f=g_bf / m)
    return grads, total_loss / m, max_norm


def backward(params: ModelParams, batch: TripleBatch, cfg: TrainConfig) -> Gradients:
    """Gradients of the mean batch loss w.r.t. every ModelParams field."""
    grads, _, _ = _backward_with_stats(params, batch, cfg)
    return grads


def sgd_step(params: ModelParams, grads: Gradients, cfg: TrainConfig) -> ModelParams:
    """Plain SGD on the Euclidean parameters.

    The ball-metric correction already happened inside backward at the
    pooled points; the parameters themselves never leave Euclidean space,
    so no retraction is applied here.
    """
    finite = (
        np.all(np.isfinite(grads.W_p))
        and np.all(np.isfinite(grads.b_p))
        and np.isfinite(grads.w_f)
        and np.isfinite(grads.b_f)
    )
    if not finite:
        raise DivergenceError("non-finite gradient; aborting step")
    return ModelParams(
        W_p=params.W_p - cfg.lr * grads.W_p,
        b_p=params.b_p - cfg.lr * grads.b_p,
        w_f=params.w_f - cfg.lr * grads.w_f,
        b_f=params.b_f - cfg.lr * grads.b_f,
        eps_ball=params.eps_ball,
        activation=params.activation,
    )


def train(dataset, desc_store, code_store, model_cfg: ModelConfig, cfg: TrainConfig) -> TrainResult:
    """Seeded SGD over the triple dataset.

    Per epoch: negatives are redrawn within the split, the triple order is
    reshuffled, and batches of ``cfg.batch_size`` run backward + sgd_step.
    Deterministic for a fixed (dataset, cfg): one master generator drives
    the resampling and shuffling, and gradient accumulation is sequential.
    """
    from .data import resample_negatives  # local import to avoid a cycle

    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    for qid, pos, neg in dataset.triples:
        if qid not in desc_store:
            raise ValueError(f"description id {qid!r} missing from store")
        if pos not in code_store or neg not in code_store:
            raise ValueError(f"code id {pos!r}/{neg!r} missing from store")

    params = init_params(model_cfg, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    desc_seqs = {
        qid: build_sequence(desc_store[qid], ROLE_QUESTION, model_cfg)
        for qid in {t[0] for t in dataset.triples}
    }
    code_seqs = {
        cid: build_sequence(code_store[cid], ROLE_ANSWER, model_cfg)
        for cid in dataset.member_ids
    }

    losses = []
    max_norm = 0.0
    limit = 1.0 - cfg.eps_ball
    for _ in range(cfg.epochs):
        epoch_seed = int(rng.integers(np.iinfo(np.int64).max))
        epoch_set = resample_negatives(dataset, epoch_seed)
        order = rng.permutation(len(epoch_set.triples))
        triples = [epoch_set.triples[i] for i in order]
        epoch_loss = 0.0
        for start in range(0, len(triples), cfg.batch_size):
            chunk = triples[start : start + cfg.batch_size]
            batch = TripleBatch(
                [(desc_seqs[q], code_seqs[p], code_seqs[ng]) for q, p, ng in chunk]
            )
            grads, mean_loss, batch_norm = _backward_with_stats(params, batch, cfg)
            if not np.isfinite(mean_loss):
                raise DivergenceError(f"loss diverged to {mean_loss} at epoch {len(losses) + 1}")
            if batch_norm > limit:
                raise AssertionError(
                    f"pooled embedding escaped the ball: {batch_norm} > {limit}"
                )
            max_norm = max(max_norm, batch_norm)
            epoch_loss += mean_loss * len(chunk)
            params = sgd_step(params, grads, cfg)
        losses.append(epoch_loss / len(triples))
    return TrainResult(params=params, epoch_losses=losses, max_embed_norm=max_norm)


def write_loss_trace(losses, path) -> None:
    """CSV trace ``epoch,mean_loss`` with 1-based epoch numbers."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(losses, start=1):
            fh.write(f"{epoch},{loss!r}\n")
