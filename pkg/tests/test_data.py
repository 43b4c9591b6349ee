import numpy as np
import pytest

from trajsim.data import (generate_synthetic, load_embeddings,
                          parse_trajectory_line, prepare_encoder_inputs,
                          read_trajectories, save_embeddings, split_dataset,
                          write_trajectories)
from trajsim.geo import Mbr, RasterConfig, compute_dataset_stats


class TestParsing:
    def test_line_roundtrip(self):
        traj = parse_trajectory_line("abc\t-8.6,41.15;-8.61,41.16", 1)
        assert traj.traj_id == "abc"
        np.testing.assert_allclose(traj.points,
                                   [[41.15, -8.6], [41.16, -8.61]])

    def test_error_names_line_number(self):
        with pytest.raises(ValueError, match="line 7"):
            parse_trajectory_line("abc\tnot-a-point", 7)

    def test_missing_body_rejected(self):
        with pytest.raises(ValueError):
            parse_trajectory_line("abc", 1)


class TestFileIO:
    def test_write_read_roundtrip(self, small_trajectories, tmp_path):
        path = tmp_path / "trajs.txt"
        write_trajectories(small_trajectories, path)
        loaded = read_trajectories(path, min_length=1)
        assert [t.traj_id for t in loaded] == [t.traj_id for t in small_trajectories]
        for a, b in zip(loaded, small_trajectories):
            np.testing.assert_allclose(a.points, b.points, rtol=1e-9)

    def test_min_length_filter(self, small_trajectories, tmp_path):
        path = tmp_path / "trajs.txt"
        write_trajectories(small_trajectories, path)
        threshold = 30
        loaded = read_trajectories(path, min_length=threshold)
        assert all(len(t) >= threshold for t in loaded)
        expected = sum(len(t) >= threshold for t in small_trajectories)
        assert len(loaded) == expected

    def test_area_filter_requires_all_points_inside(self, tmp_path):
        path = tmp_path / "trajs.txt"
        path.write_text("in\t0.1,0.1;0.2,0.2\nout\t0.1,0.1;5,5\n")
        loaded = read_trajectories(path, min_length=1, area=Mbr(0, 1, 0, 1))
        assert [t.traj_id for t in loaded] == ["in"]

    def test_everything_filtered_rejected(self, tmp_path):
        path = tmp_path / "trajs.txt"
        path.write_text("a\t0.1,0.1\n")
        with pytest.raises(ValueError, match="no trajectories"):
            read_trajectories(path, min_length=5)


class TestSplit:
    def test_disjoint_and_sized(self, small_trajectories):
        train, query, cand = split_dataset(small_trajectories, 30, 10, 15, seed=0)
        assert (len(train), len(query), len(cand)) == (30, 10, 15)
        ids = [t.traj_id for t in train + query + cand]
        assert len(set(ids)) == len(ids)

    def test_deterministic(self, small_trajectories):
        a = split_dataset(small_trajectories, 20, 10, 10, seed=4)
        b = split_dataset(small_trajectories, 20, 10, 10, seed=4)
        assert [t.traj_id for t in a[0]] == [t.traj_id for t in b[0]]

    def test_input_order_irrelevant(self, small_trajectories):
        a = split_dataset(small_trajectories, 20, 10, 10, seed=4)
        b = split_dataset(list(reversed(small_trajectories)), 20, 10, 10, seed=4)
        assert [t.traj_id for t in a[1]] == [t.traj_id for t in b[1]]

    def test_oversized_split_rejected(self, small_trajectories):
        with pytest.raises(ValueError):
            split_dataset(small_trajectories, 50, 50, 50, seed=0)


class TestSynthetic:
    def test_lengths_and_bounds(self, city_mbr):
        trajs = generate_synthetic(30, 5, 25, city_mbr, seed=1)
        assert len(trajs) == 30
        for t in trajs:
            assert 5 <= len(t) <= 25
            assert t.points[:, 0].min() >= city_mbr.min_lat
            assert t.points[:, 0].max() <= city_mbr.max_lat
            assert t.points[:, 1].min() >= city_mbr.min_lon
            assert t.points[:, 1].max() <= city_mbr.max_lon

    def test_seeded(self, city_mbr):
        a = generate_synthetic(5, 5, 10, city_mbr, seed=2)
        b = generate_synthetic(5, 5, 10, city_mbr, seed=2)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.points, y.points)

    def test_ids_unique(self, city_mbr):
        trajs = generate_synthetic(100, 5, 6, city_mbr, seed=0)
        assert len({t.traj_id for t in trajs}) == 100

    def test_invalid_parameters_rejected(self, city_mbr):
        with pytest.raises(ValueError):
            generate_synthetic(0, 5, 10, city_mbr, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(5, 10, 5, city_mbr, seed=0)


class TestEncoderInputs:
    def test_shapes(self, small_trajectories):
        mbr, params, max_len = compute_dataset_stats(small_trajectories)
        raster = RasterConfig.from_mbr(mbr, 250.0)
        inputs = prepare_encoder_inputs(small_trajectories, params, raster, max_len)
        assert set(inputs) == {t.traj_id for t in small_trajectories}
        for seq, image in inputs.values():
            assert seq.shape == (2, max_len)
            assert image.shape == (raster.rows, raster.cols)
            assert set(np.unique(image)) <= {0.0, 1.0}


class TestEmbeddingFiles:
    def test_roundtrip(self, rng, tmp_path):
        ids = [f"e{i}" for i in range(5)]
        matrix = rng.normal(size=(5, 16))
        path = tmp_path / "emb.tsem"
        save_embeddings(path, ids, matrix)
        loaded_ids, loaded = load_embeddings(path)
        assert loaded_ids == ids
        np.testing.assert_array_equal(loaded, matrix)

    def test_shape_mismatch_rejected(self, rng, tmp_path):
        with pytest.raises(ValueError):
            save_embeddings(tmp_path / "e.tsem", ["a"], rng.normal(size=(2, 4)))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "e.tsem"
        path.write_bytes(b"JUNK" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            load_embeddings(path)
