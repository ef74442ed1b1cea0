"""The trainable network and its checkpoint format.

A single shared projection layer maps every frozen token embedding
z in R^n to x = relu(W_p z + b_p) in R^d.  A sequence representation is
the sum of its projected tokens, normalized onto the unit sphere when the
sum escapes it, then retracted just inside the ball.  Pairs are scored by
a scalar linear layer over the hyperbolic distance: s = w_f * d + b_f.

One ModelParams object serves both the question and the answer paths;
sharing is by construction, not by synchronization.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .geometry import EPS_BALL_DEFAULT, hyperbolic_distance, retract

CHECKPOINT_MAGIC = b"HYCQM1"
_ACTIVATION_TAGS = {"relu": 0}
_ACTIVATION_NAMES = {v: k for k, v in _ACTIVATION_TAGS.items()}

ROLE_QUESTION = "question"
ROLE_ANSWER = "answer"


@dataclass
class ModelConfig:
    """Hyperparameters of the network."""

    n: int = 1024
    d: int = 128
    max_q_len: int = 64
    max_a_len: int = 256
    eps_ball: float = EPS_BALL_DEFAULT
    activation: str = "relu"

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("embedding dims must be >= 1")
        if self.max_q_len < 1 or self.max_a_len < 1:
            raise ValueError("max sequence lengths must be >= 1")
        if self.activation not in _ACTIVATION_TAGS:
            raise ValueError(f"unsupported activation {self.activation!r}")


@dataclass
class ModelParams:
    """Projection weights/bias plus the scalar scoring layer."""

    W_p: np.ndarray  # (d, n) float64
    b_p: np.ndarray  # (d,) float64
    w_f: float
    b_f: float
    eps_ball: float = EPS_BALL_DEFAULT
    activation: str = "relu"

    @property
    def d(self) -> int:
        return self.W_p.shape[0]

    @property
    def n(self) -> int:
        return self.W_p.shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams(
            W_p=self.W_p.copy(),
            b_p=self.b_p.copy(),
            w_f=self.w_f,
            b_f=self.b_f,
            eps_ball=self.eps_ball,
            activation=self.activation,
        )


@dataclass
class TokenSequence:
    """Per-token frozen embeddings (M, n) for one question or answer."""

    embeddings: np.ndarray
    role: str = ROLE_ANSWER

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] < 1:
            raise ValueError("embeddings must be a nonempty (M, n) matrix")
        if not np.all(np.isfinite(self.embeddings)):
            raise ValueError("embeddings must be finite")
        if self.role not in (ROLE_QUESTION, ROLE_ANSWER):
            raise ValueError(f"unknown role {self.role!r}")

    def __len__(self) -> int:
        return self.embeddings.shape[0]


def build_sequence(matrix: np.ndarray, role: str, cfg: ModelConfig) -> TokenSequence:
    """Promote a stored float32 matrix to float64 and truncate to the role's cap."""
    limit = cfg.max_q_len if role == ROLE_QUESTION else cfg.max_a_len
    return TokenSequence(np.asarray(matrix, dtype=np.float64)[:limit], role)


def init_params(cfg: ModelConfig, seed: int) -> ModelParams:
    """Seeded initialization: W_p ~ U(+-sqrt(6/(n+d))), b_p = 0, w_f = 1, b_f = 0.

    w_f starts positive so smaller hyperbolic distance means smaller score
    and the hinge loss pulls matching pairs together.
    """
    rng = np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (cfg.n + cfg.d))
    W_p = rng.uniform(-bound, bound, size=(cfg.d, cfg.n))
    return ModelParams(
        W_p=W_p,
        b_p=np.zeros(cfg.d),
        w_f=1.0,
        b_f=0.0,
        eps_ball=cfg.eps_ball,
        activation=cfg.activation,
    )


def project_word(params: ModelParams, z: np.ndarray) -> np.ndarray:
    """Single-layer projection x = relu(W_p z + b_p)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.n,):
        raise ValueError(f"expected input of shape ({params.n},), got {z.shape}")
    return np.maximum(params.W_p @ z + params.b_p, 0.0)


@dataclass
class PoolCache:
    """Forward-pass intermediates needed by the hand-written backward."""

    tokens: np.ndarray      # (M, n) inputs
    relu_mask: np.ndarray   # (M, d) booleans, pre-activation > 0
    pooled: np.ndarray      # (d,) sum before any norm clamp
    point: np.ndarray       # (d,) final ball point
    clamped: bool           # whether the norm clamp / retraction fired


def pool_and_normalize(
    params: ModelParams,
    seq: TokenSequence,
    eps_ball: float | None = None,
    cache: bool = False,
):
    """Sum projected tokens, normalize onto the sphere if needed, retract.

    Tokens are summed in sequence order (fixed association, so repeated
    calls are bitwise identical).  The result always satisfies
    ||y|| <= 1 - eps_ball.
    """
    if eps_ball is None:
        eps_ball = params.eps_ball
    pre = seq.embeddings @ params.W_p.T + params.b_p  # (M, d)
    acts = np.maximum(pre, 0.0)
    pooled = acts.sum(axis=0)
    norm = float(np.linalg.norm(pooled))
    y = pooled / norm if norm > 1.0 else pooled
    point = retract(y, eps_ball)
    clamped = norm > 1.0 - eps_ball
    if cache:
        return point, PoolCache(seq.embeddings, pre > 0.0, pooled, point, clamped)
    return point


def score(params: ModelParams, q: np.ndarray, a: np.ndarray) -> float:
    """Linear transform of the hyperbolic distance: w_f * d(q, a) + b_f."""
    return params.w_f * hyperbolic_distance(q, a) + params.b_f


def save_checkpoint(params: ModelParams, path) -> None:
    """Write the versioned little-endian binary checkpoint (magic HYCQM1)."""
    W = np.ascontiguousarray(params.W_p, dtype="<f8")
    b = np.ascontiguousarray(params.b_p, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", params.n, params.d))
        fh.write(W.tobytes())
        fh.write(b.tobytes())
        fh.write(struct.pack("<ddd", params.w_f, params.b_f, params.eps_ball))
        fh.write(struct.pack("<B", _ACTIVATION_TAGS[params.activation]))


def load_checkpoint(path) -> ModelParams:
    """Read a checkpoint written by save_checkpoint; validates magic and sizes."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:6] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:6]!r}, expected {CHECKPOINT_MAGIC!r}")
    off = 6
    try:
        n, d = struct.unpack_from("<II", blob, off)
        off += 8
        W = np.frombuffer(blob, dtype="<f8", count=d * n, offset=off).reshape(d, n)
        off += 8 * d * n
        b = np.frombuffer(blob, dtype="<f8", count=d, offset=off)
        off += 8 * d
        w_f, b_f, eps_ball = struct.unpack_from("<ddd", blob, off)
        off += 24
        (tag,) = struct.unpack_from("<B", blob, off)
        off += 1
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: truncated checkpoint") from exc
    if off != len(blob):
        raise FormatError(f"{path}: {len(blob) - off} trailing bytes")
    if tag not in _ACTIVATION_NAMES:
        raise FormatError(f"{path}: unknown activation tag {tag}")
    return ModelParams(
        W_p=W.copy(),
        b_p=b.copy(),
        w_f=w_f,
        b_f=b_f,
        eps_ball=eps_ball,
        activation=_ACTIVATION_NAMES[tag],
    )
