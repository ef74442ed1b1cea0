"""Hyperbolic description-code matching.

Descriptions and code snippets are projected through one shared layer
into the Poincare ball, pairs are scored by a linear transform of their
hyperbolic distance, and a pairwise hinge loss with Riemannian gradient
correction trains the whole thing for retrieval (MRR / R@k).
"""

from .errors import BallDomainError, DivergenceError, FormatError, HymatchError
from .geometry import (
    GeometryConfig,
    conformal_factor,
    distance_gradient,
    hyperbolic_distance,
    retract,
    riemannian_rescale,
)
from .model import (
    ModelConfig,
    ModelParams,
    TokenSequence,
    build_sequence,
    init_params,
    load_checkpoint,
    pool_and_normalize,
    project_word,
    save_checkpoint,
    score,
)
from .data import (
    CorpusItem,
    EmbeddingStore,
    TripleDataset,
    embed_corpus,
    load_corpus,
    make_triples,
    pseudo_embed,
    read_embeddings,
    read_triples,
    resample_negatives,
    write_embeddings,
    write_triples,
)
from .training import (
    Gradients,
    TrainConfig,
    TrainResult,
    TripleBatch,
    backward,
    batch_loss,
    hinge_loss,
    sgd_step,
    train,
)
from .evaluation import (
    MetricsReport,
    RankingResult,
    evaluate,
    mrr,
    rank_query,
    recall_at_k,
)
from .viz import PairFeature, extract_pair_features, pca_2d

__version__ = "0.1.0"
