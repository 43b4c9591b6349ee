import math

import numpy as np
import pytest

from trajsim.bounds import (bound_suite, conv1d_bound, conv2d_bound,
                            maxpool_bound, write_suite_csvs)
from trajsim.measures import dfd


class TestConv1dBound:
    def test_hand_example(self):
        # X = [(1,0),(2,0),(1,0)], Y = [(2,0),(3,0),(2,0)], averaging top row
        x = np.array([[1.0, 2.0, 1.0], [0.0, 0.0, 0.0]])
        y = np.array([[2.0, 3.0, 2.0], [0.0, 0.0, 0.0]])
        kernel = np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]])
        report = conv1d_bound(x, y, kernel)
        assert report.d_xy == pytest.approx(1.0)
        # C(X) = [3,4,3], C(Y) = [5,7,5]: endpoints differ by 2
        assert report.lower == pytest.approx(2.0)
        assert report.actual == pytest.approx(3.0)
        assert report.satisfied

    def test_identical_inputs_zero_everywhere(self, rng):
        x = rng.uniform(size=(2, 9))
        kernel = rng.uniform(-1, 1, size=(2, 3))
        report = conv1d_bound(x, x, kernel)
        assert report.d_xy == 0.0
        assert report.actual == 0.0
        assert report.lower == 0.0
        assert report.satisfied

    def test_random_pairs_satisfied(self, rng):
        kernel = rng.uniform(-1, 1, size=(2, 3))
        for pid in range(50):
            x = rng.uniform(size=(2, rng.integers(3, 30)))
            y = rng.uniform(size=(2, rng.integers(3, 30)))
            assert conv1d_bound(x, y, kernel, pair_id=pid).satisfied

    def test_shape_validation(self, rng):
        good = rng.uniform(size=(2, 5))
        with pytest.raises(ValueError):
            conv1d_bound(good, good, np.ones((3, 3)))
        with pytest.raises(ValueError):
            conv1d_bound(rng.uniform(size=(3, 5)), good, np.ones((2, 3)))


class TestMaxpoolBound:
    def test_random_pairs_satisfied(self, rng):
        for pid in range(50):
            x = rng.uniform(size=(2, rng.integers(4, 40)))
            y = rng.uniform(size=(2, rng.integers(4, 40)))
            assert maxpool_bound(x, y, k=2, pair_id=pid).satisfied

    def test_trim_flag(self, rng):
        even = rng.uniform(size=(2, 8))
        odd = rng.uniform(size=(2, 9))
        assert not maxpool_bound(even, even, k=2).trimmed
        assert maxpool_bound(even, odd, k=2).trimmed

    def test_constant_groups_zero_shift(self):
        # within-group envelopes collapse, so pooling cannot move the distance
        x = np.repeat(np.arange(4.0)[None, :], 2, axis=0).repeat(2, axis=1)
        y = x + 1.0
        report = maxpool_bound(x, y, k=2)
        assert report.bound == 0.0
        assert report.d_after == pytest.approx(report.d_before)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            maxpool_bound(np.ones((2, 1)), np.ones((2, 4)), k=2)


class TestConv2dBound:
    def test_single_pixel_equality(self):
        kernel = np.ones((3, 3))
        x = np.array([[0.0, 0.0]])
        y = np.array([[0.0, 1.0]])
        report = conv2d_bound(x, y, kernel, delta=0.1)
        assert report.premise_met
        assert report.n_pixels == 1 and report.m_pixels == 1
        assert report.bound == pytest.approx(math.sqrt(18.0), abs=1e-12)
        assert abs(report.actual - math.sqrt(18.0)) < 1e-12
        assert report.satisfied

    def test_premise_not_met_makes_no_claim(self):
        kernel = np.ones((3, 3))
        x = np.array([[0.0, 0.0]])
        y = np.array([[0.0, 0.2]])
        report = conv2d_bound(x, y, kernel, delta=0.1)
        assert not report.premise_met
        assert report.satisfied  # vacuously

    def test_bound_grows_with_occupancy(self, rng):
        kernel = rng.uniform(0.1, 1.0, size=(3, 3))
        x = rng.uniform(size=(20, 2)) * 0.5
        y = rng.uniform(size=(20, 2)) * 0.5 + np.array([0.0, 5.0])
        report = conv2d_bound(x, y, kernel, delta=0.05)
        assert report.premise_met
        expected = math.sqrt((report.n_pixels + report.m_pixels)
                             * float((kernel ** 2).sum()))
        assert report.bound == pytest.approx(expected)
        assert report.satisfied

    def test_frechet_exceeds_threshold_when_premise_met(self, rng):
        kernel = np.ones((3, 3)) * 0.5
        x = rng.uniform(size=(5, 2))
        y = rng.uniform(size=(5, 2)) + np.array([10.0, 0.0])
        report = conv2d_bound(x, y, kernel, 0.1)
        assert report.d_xy == pytest.approx(dfd(x, y))
        assert report.d_xy > 2 * math.sqrt(2) * 0.1

    def test_kernel_validation(self):
        x = np.array([[0.0, 0.0]])
        y = np.array([[5.0, 5.0]])
        with pytest.raises(ValueError):
            conv2d_bound(x, y, np.zeros((3, 3)), 0.1)
        with pytest.raises(ValueError):
            conv2d_bound(x, y, np.ones((2, 2)), 0.1)
        with pytest.raises(ValueError):
            conv2d_bound(x, y, np.ones((3, 3)), 0.0)


class TestSuite:
    def test_rates_and_outputs(self, small_normalized, tmp_path):
        result = bound_suite(small_normalized, 40, seed=7, conv2d_pairs=20)
        assert result.conv1d_rate == 1.0
        assert result.pool_rate == 1.0
        assert result.conv2d_rate == 1.0
        assert len(result.conv1d_reports) == 40
        assert len(result.conv2d_reports) == 20
        assert result.spearman > 0.5
        assert result.pool_median_shift >= 0.0

        write_suite_csvs(result, tmp_path, seed=7)
        for name in ("conv1d_bound.csv", "maxpool_bound.csv", "conv2d_bound.csv", "summary.txt"):
            assert (tmp_path / name).exists()
        lines = (tmp_path / "conv1d_bound.csv").read_text().splitlines()
        assert lines[0].startswith("#")
        assert lines[1] == "pair_id,d_xy,lower,actual,upper,satisfied"
        assert len(lines) == 42

    def test_deterministic(self, small_normalized):
        a = bound_suite(small_normalized, 10, seed=3, conv2d_pairs=5)
        b = bound_suite(small_normalized, 10, seed=3, conv2d_pairs=5)
        assert [r.actual for r in a.conv1d_reports] == [r.actual for r in b.conv1d_reports]
        assert [r.actual for r in a.conv2d_reports] == [r.actual for r in b.conv2d_reports]

    def test_needs_two_trajectories(self, small_normalized):
        with pytest.raises(ValueError):
            bound_suite(small_normalized[:1], 5, seed=0)
