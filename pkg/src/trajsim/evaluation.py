"""Ground-truth and embedding-space kNN with hit-rate / recall metrics.

Ground truth ranks candidates by the exact DP measure; the embedding path
ranks by Euclidean distance over encoder outputs with a linear scan. Both use
the same tie rule (smaller id first) so metric comparisons are well defined.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .measures import (DEFAULT_EDR_EPSILON, DistanceMatrix, MeasureKind,
                       trajectory_distance)


@dataclass
class QueryResult:
    query_id: str
    ids: list[str]      # ascending distance
    scores: list[float]


@dataclass
class EvalReport:
    measure: MeasureKind
    hr: dict[int, float]            # k -> mean HR@k
    r10_at_50: float
    per_query: dict[str, dict[int, float]] = field(default_factory=dict)
    gt_seconds: float = 0.0
    emb_seconds: float = 0.0
    encode_seconds: float = 0.0


def _topk_from_distances(query_id, ids, distances, k) -> QueryResult:
    if k > len(ids):
        raise ValueError(f"k={k} exceeds candidate count {len(ids)}")
    order = sorted(range(len(ids)), key=lambda i: (distances[i], ids[i]))[:k]
    return QueryResult(query_id, [ids[i] for i in order],
                       [float(distances[i]) for i in order])


def ground_truth_topk(query, candidates, kind: MeasureKind, k: int,
                      epsilon: float = DEFAULT_EDR_EPSILON) -> QueryResult:
    """Exact top-k of `candidates` (list of trajectories) by the DP measure."""
    ids = [c.traj_id for c in candidates]
    distances = [trajectory_distance(query.points, c.points, kind, epsilon)
                 for c in candidates]
    return _topk_from_distances(query.traj_id, ids, distances, k)


def embedding_topk(query_id: str, query_vec: np.ndarray, candidate_ids,
                   candidate_matrix: np.ndarray, k: int) -> QueryResult:
    """Linear-scan top-k under Euclidean distance in the embedding space."""
    distances = np.linalg.norm(candidate_matrix - query_vec[None, :], axis=1)
    return _topk_from_distances(query_id, list(candidate_ids), distances, k)


def hit_rate(truth_ids, predicted_ids) -> float:
    """Overlap of the predicted top-k with the true top-k."""
    truth = set(truth_ids)
    return len(truth & set(predicted_ids)) / len(truth)


def recall_10_at_50(truth_top10, predicted_top50) -> float:
    """Fraction of the true top-10 recovered by the predicted top-50."""
    truth = set(truth_top10)
    return len(truth & set(predicted_top50)) / len(truth)


def evaluate(embed_fn, queries, candidates, kind: MeasureKind,
             k_list=(1, 5, 10, 50), epsilon: float = DEFAULT_EDR_EPSILON,
             ground_truth: DistanceMatrix | None = None) -> EvalReport:
    """Mean HR@k and R10@50 over all queries.

    `embed_fn` maps a trajectory to its embedding vector. A precomputed
    query-by-candidate DistanceMatrix short-circuits the DP pass.
    """
    queries, candidates = list(queries), list(candidates)
    if not queries or not candidates:
        raise ValueError("queries and candidates must both be nonempty")
    k_list = sorted(set(k_list))
    max_k = max(max(k_list), 50 if len(candidates) >= 50 else max(k_list))

    t0 = time.perf_counter()
    query_vecs = {q.traj_id: np.asarray(embed_fn(q)) for q in queries}
    cand_ids = [c.traj_id for c in candidates]
    cand_matrix = np.stack([np.asarray(embed_fn(c)) for c in candidates])
    encode_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    truth: dict[str, QueryResult] = {}
    if ground_truth is not None:
        row_index = {tid: i for i, tid in enumerate(ground_truth.row_ids)}
        col_index = {tid: i for i, tid in enumerate(ground_truth.col_ids)}
        for q in queries:
            distances = [ground_truth.values[row_index[q.traj_id], col_index[c]]
                         for c in cand_ids]
            truth[q.traj_id] = _topk_from_distances(q.traj_id, cand_ids, distances, max_k)
    else:
        for q in queries:
            truth[q.traj_id] = ground_truth_topk(q, candidates, kind, max_k, epsilon)
    gt_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    predicted = {
        q.traj_id: embedding_topk(q.traj_id, query_vecs[q.traj_id],
                                  cand_ids, cand_matrix, max_k)
        for q in queries
    }
    emb_seconds = time.perf_counter() - t0

    per_query: dict[str, dict[int, float]] = {}
    r10_values = []
    for q in queries:
        t_ids, p_ids = truth[q.traj_id].ids, predicted[q.traj_id].ids
        per_query[q.traj_id] = {k: hit_rate(t_ids[:k], p_ids[:k]) for k in k_list}
        if len(candidates) >= 50:
            r10_values.append(recall_10_at_50(t_ids[:10], p_ids[:50]))
    hr = {k: float(np.mean([per_query[q.traj_id][k] for q in queries])) for k in k_list}
    r10 = float(np.mean(r10_values)) if r10_values else float("nan")
    return EvalReport(kind, hr, r10, per_query, gt_seconds, emb_seconds, encode_seconds)


def write_eval_report(report: EvalReport, csv_path, text_path=None, timing_path=None):
    """CSV row per k plus an optional human-readable summary.

    Timings go to their own file so the metric outputs stay run-reproducible.
    """
    with open(csv_path, "w") as f:
        f.write("measure,k,hr,r10at50\n")
        for k in sorted(report.hr):
            f.write(f"{report.measure.value},{k},{report.hr[k]:.6f},"
                    f"{report.r10_at_50:.6f}\n")
    if text_path:
        with open(text_path, "w") as f:
            f.write(f"measure: {report.measure.value}\n")
            for k in sorted(report.hr):
                f.write(f"HR@{k}: {report.hr[k]:.4f}\n")
            f.write(f"R10@50: {report.r10_at_50:.4f}\n")
    if timing_path:
        with open(timing_path, "w") as f:
            f.write(f"ground-truth search: {report.gt_seconds:.3f}s\n")
            f.write(f"embedding search: {report.emb_seconds:.3f}s\n")
            f.write(f"encoding: {report.encode_seconds:.3f}s\n")
