"""Test-stage retrieval and the MRR / R@k metrics.

A query description is embedded once and scored against every candidate
code in the evaluation split (the whole split is the candidate pool).
Scores sort ascending (w_f > 0 makes smaller distance mean better
match); ties break by candidate index, so ranking is deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import hyperbolic_distance
from .model import (
    ModelConfig,
    ModelParams,
    ROLE_ANSWER,
    ROLE_QUESTION,
    build_sequence,
    pool_and_normalize,
)

RECALL_KS = (1, 5, 10)


@dataclass
class RankingResult:
    query_id: str
    rank: int  # 1-based rank of the ground-truth code
    num_candidates: int

    def __post_init__(self):
        if not 1 <= self.rank <= self.num_candidates:
            raise ValueError(f"rank {self.rank} outside [1, {self.num_candidates}]")


@dataclass
class MetricsReport:
    mrr: float
    recall_at: dict
    num_queries: int


def rank_query(params: ModelParams, q, candidates, truth_index: int, query_id: str = "") -> RankingResult:
    """Rank all candidates against the query; stable ties by candidate index."""
    if not candidates:
        raise ValueError("candidates must be nonempty")
    if not 0 <= truth_index < len(candidates):
        raise ValueError(f"truth_index {truth_index} out of range")
    yq = pool_and_normalize(params, q)
    scores = np.array(
        [
            params.w_f * hyperbolic_distance(yq, pool_and_normalize(params, c)) + params.b_f
            for c in candidates
        ]
    )
    order = np.argsort(scores, kind="stable")
    rank = int(np.nonzero(order == truth_index)[0][0]) + 1
    return RankingResult(query_id=query_id, rank=rank, num_candidates=len(candidates))


def mrr(results) -> float:
    """Mean reciprocal rank: (1/|Q|) sum of 1/rank_i."""
    if not results:
        raise ValueError("no ranking results")
    return sum(1.0 / r.rank for r in results) / len(results)


def recall_at_k(results, k: int) -> float:
    """Fraction of queries whose ground truth lands in the top k."""
    if not results:
        raise ValueError("no ranking results")
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for r in results if r.rank <= k) / len(results)


def evaluate(params: ModelParams, dataset, desc_store, code_store, cfg: ModelConfig) -> MetricsReport:
    """Rank every split description against all split codes; aggregate metrics.

    Candidate embeddings are computed once and shared across queries.
    """
    ids = dataset.member_ids
    if not ids:
        raise ValueError("evaluation split is empty")
    cand_points = [
        pool_and_normalize(params, build_sequence(code_store[cid], ROLE_ANSWER, cfg))
        for cid in ids
    ]
    results = []
    for truth_index, qid in enumerate(ids):
        yq = pool_and_normalize(params, build_sequence(desc_store[qid], ROLE_QUESTION, cfg))
        scores = np.array(
            [params.w_f * hyperbolic_distance(yq, c) + params.b_f for c in cand_points]
        )
        order = np.argsort(scores, kind="stable")
        rank = int(np.nonzero(order == truth_index)[0][0]) + 1
        results.append(RankingResult(query_id=qid, rank=rank, num_candidates=len(ids)))
    return summarize(results)


def summarize(results) -> MetricsReport:
    return MetricsReport(
        mrr=mrr(results),
        recall_at={k: recall_at_k(results, k) for k in RECALL_KS},
        num_queries=len(results),
    )


def report_json(report: MetricsReport) -> str:
    return json.dumps(
        {
            "mrr": report.mrr,
            "r1": report.recall_at[1],
            "r5": report.recall_at[5],
            "r10": report.recall_at[10],
            "num_queries": report.num_queries,
        }
    )


def report_table(report: MetricsReport) -> str:
    rows = [
        ("MRR", f"{report.mrr:.4f}"),
        ("R@1", f"{report.recall_at[1]:.4f}"),
        ("R@5", f"{report.recall_at[5]:.4f}"),
        ("R@10", f"{report.recall_at[10]:.4f}"),
        ("queries", str(report.num_queries)),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)
