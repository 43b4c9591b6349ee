import numpy as np
import pytest

from trajsim.evaluation import (embedding_topk, evaluate, ground_truth_topk,
                                hit_rate, recall_10_at_50, write_eval_report)
from trajsim.geo import Trajectory
from trajsim.measures import MeasureKind, pairwise_matrix


def make_candidates(rng, n=60):
    return [Trajectory(f"c{i:03d}", rng.uniform(size=(8, 2))) for i in range(n)]


class TestTopK:
    def test_ground_truth_sorted_ascending(self, rng):
        cands = make_candidates(rng, 20)
        query = Trajectory("q", rng.uniform(size=(8, 2)))
        result = ground_truth_topk(query, cands, MeasureKind.DFD, 5)
        assert len(result.ids) == 5
        assert result.scores == sorted(result.scores)

    def test_embedding_ties_broken_by_smaller_id(self):
        matrix = np.zeros((3, 2))
        result = embedding_topk("q", np.zeros(2), ["b", "a", "c"], matrix, 3)
        assert result.ids == ["a", "b", "c"]

    def test_k_too_large_rejected(self, rng):
        cands = make_candidates(rng, 4)
        query = Trajectory("q", rng.uniform(size=(8, 2)))
        with pytest.raises(ValueError):
            ground_truth_topk(query, cands, MeasureKind.DFD, 5)


class TestMetrics:
    def test_hit_rate(self):
        assert hit_rate(["a", "b", "c"], ["c", "x", "a"]) == pytest.approx(2 / 3)
        assert hit_rate(["a"], ["a"]) == 1.0
        assert hit_rate(["a"], ["b"]) == 0.0

    def test_recall_10_at_50(self):
        truth = [f"t{i}" for i in range(10)]
        predicted = truth[:7] + [f"x{i}" for i in range(43)]
        assert recall_10_at_50(truth, predicted) == pytest.approx(0.7)


class TestEvaluate:
    def _embed_by_first_point(self, traj):
        # monotone in the DFD for single-cluster data; close enough to rank
        return traj.points[0]

    def test_precomputed_matrix_matches_direct(self, rng):
        cands = make_candidates(rng)
        queries = [Trajectory(f"q{i}", rng.uniform(size=(8, 2))) for i in range(5)]
        gt = pairwise_matrix(queries, cands, MeasureKind.DFD)
        direct = evaluate(self._embed_by_first_point, queries, cands, MeasureKind.DFD)
        shortcut = evaluate(self._embed_by_first_point, queries, cands,
                            MeasureKind.DFD, ground_truth=gt)
        assert direct.hr == shortcut.hr
        assert direct.r10_at_50 == shortcut.r10_at_50

    def test_perfect_embedding_scores_one(self, rng):
        # embed every trajectory by its flattened points: with identical
        # lengths, Euclidean embedding distance of a candidate to itself is 0
        cands = make_candidates(rng)
        queries = cands[:5]
        report = evaluate(lambda t: t.points.ravel(), queries, cands,
                          MeasureKind.DTW, k_list=(1,))
        assert report.hr[1] == 1.0

    def test_small_candidate_set_skips_r10(self, rng):
        cands = make_candidates(rng, 20)
        queries = [Trajectory("q", rng.uniform(size=(8, 2)))]
        report = evaluate(self._embed_by_first_point, queries, cands,
                          MeasureKind.DFD, k_list=(1, 5))
        assert np.isnan(report.r10_at_50)

    def test_empty_rejected(self, rng):
        with pytest.raises(ValueError):
            evaluate(self._embed_by_first_point, [], make_candidates(rng),
                     MeasureKind.DFD)

    def test_report_files(self, rng, tmp_path):
        cands = make_candidates(rng)
        queries = [Trajectory(f"q{i}", rng.uniform(size=(8, 2))) for i in range(3)]
        report = evaluate(self._embed_by_first_point, queries, cands, MeasureKind.DFD)
        csv_path = tmp_path / "eval.csv"
        text_path = tmp_path / "eval.txt"
        timing_path = tmp_path / "eval_timings.txt"
        write_eval_report(report, csv_path, text_path, timing_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "measure,k,hr,r10at50"
        assert len(lines) == 1 + len(report.hr)
        assert "seconds" not in csv_path.read_text()
        assert "R10@50" in text_path.read_text()
        assert "search" in timing_path.read_text()
