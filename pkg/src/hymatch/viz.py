"""Deterministic 2-D export of positive/negative pair features.

Each triple contributes two feature vectors built from the trained
forward pass: [q-embedding | a-embedding | distance | ||q|| | ||a||],
length 2d + 3.  A seeded power-iteration PCA reduces them to 2-D for
plotting; everything is pure computation so the CSV output is
byte-stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import hyperbolic_distance
from .model import ModelConfig, ModelParams, ROLE_ANSWER, ROLE_QUESTION, build_sequence, pool_and_normalize

LABEL_POSITIVE = "positive"
LABEL_NEGATIVE = "negative"

_PCA_SEED = 0
_PCA_TOL = 1e-13
_PCA_MAX_ITER = 2000


@dataclass
class PairFeature:
    label: str
    feature: np.ndarray  # length 2d + 3

    @property
    def distance(self) -> float:
        d = (len(self.feature) - 3) // 2
        return float(self.feature[2 * d])


def extract_pair_features(params: ModelParams, dataset, desc_store, code_store, cfg: ModelConfig) -> list:
    """Two PairFeatures per triple: (q, a_pos) positive and (q, a_neg) negative."""
    if len(dataset) == 0:
        raise ValueError("no triples to extract features from")
    features = []
    code_points = {}

    def code_point(cid):
        if cid not in code_points:
            code_points[cid] = pool_and_normalize(
                params, build_sequence(code_store[cid], ROLE_ANSWER, cfg)
            )
        return code_points[cid]

    for qid, pos_id, neg_id in dataset.triples:
        yq = pool_and_normalize(params, build_sequence(desc_store[qid], ROLE_QUESTION, cfg))
        for label, cid in ((LABEL_POSITIVE, pos_id), (LABEL_NEGATIVE, neg_id)):
            ya = code_point(cid)
            feature = np.concatenate(
                [
                    yq,
                    ya,
                    [
                        hyperbolic_distance(yq, ya),
                        np.linalg.norm(yq),
                        np.linalg.norm(ya),
                    ],
                ]
            )
            features.append(PairFeature(label=label, feature=feature))
    return features


def separation_stats(features) -> dict:
    """Mean of the distance component per label."""
    sums = {LABEL_POSITIVE: [], LABEL_NEGATIVE: []}
    for pf in features:
        sums[pf.label].append(pf.distance)
    return {label: float(np.mean(vals)) for label, vals in sums.items() if vals}


def feature_matrix(features) -> np.ndarray:
    return np.array([pf.feature for pf in features], dtype=np.float64)


def _top_direction(X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(_PCA_MAX_ITER):
        w = X.T @ (X @ v)
        norm = np.linalg.norm(w)
        if norm <= 1e-300:
            return v  # deflated data is (numerically) zero in every direction
        w /= norm
        if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < _PCA_TOL:
            return w
        v = w
    return v


def pca_2d(vectors) -> np.ndarray:
    """Project feature vectors to their top-2 principal components.

    Power iteration with a fixed seed and one deflation step; the sign of
    each component is fixed so its largest-magnitude loading is positive.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 feature vectors")
    X = X - X.mean(axis=0)
    if not np.any(np.abs(X) > 1e-15):
        raise ValueError("features are all identical; zero variance")
    rng = np.random.default_rng(_PCA_SEED)
    v1 = _top_direction(X, rng)
    deflated = X - np.outer(X @ v1, v1)
    v2 = _top_direction(deflated, rng)
    v2 -= float(np.dot(v2, v1)) * v1
    v2 /= np.linalg.norm(v2)
    comps = []
    for v in (v1, v2):
        if v[int(np.argmax(np.abs(v)))] < 0:
            v = -v
        comps.append(v)
    return X @ np.column_stack(comps)


def export_points_csv(features, points, path) -> None:
    """CSV ``label,x,y`` with header; floats via repr for byte stability."""
    points = np.asarray(points)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("label,x,y\n")
        for pf, (x, y) in zip(features, points):
            fh.write(f"{pf.label},{float(x)!r},{float(y)!r}\n")


def export_features_csv(features, path) -> None:
    """Full-feature CSV ``label,f_0..f_{2d+2}``."""
    width = len(features[0].feature)
    header = "label," + ",".join(f"f_{i}" for i in range(width))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for pf in features:
            fh.write(pf.label + "," + ",".join(repr(float(v)) for v in pf.feature) + "\n")
