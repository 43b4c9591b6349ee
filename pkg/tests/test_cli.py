import numpy as np
import pytest

from trajsim import cli
from trajsim.data import load_embeddings, read_trajectories


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Small end-to-end run shared by the command tests."""
    root = tmp_path_factory.mktemp("pipeline")
    raw = root / "synthetic.txt"
    out = root / "out"
    assert cli.main(["gen-synthetic", "--out", str(raw), "--count", "50",
                     "--min-traj-length", "10", "--max-traj-length", "40",
                     "--seed", "0"]) == 0
    assert cli.main(["ingest", "--input", str(raw), "--out-dir", str(out),
                     "--train-size", "16", "--query-size", "5",
                     "--candidate-size", "20", "--seed", "0"]) == 0
    assert cli.main(["ground-truth", "--out-dir", str(out),
                     "--measure", "dfd", "--threads", "2"]) == 0
    assert cli.main(["train", "--out-dir", str(out), "--measure", "dfd",
                     "--epochs", "2", "--batch-size", "8",
                     "--neighbor-pool-k", "5", "--seed", "0"]) == 0
    assert cli.main(["embed", "--out-dir", str(out),
                     "--input", str(out / "candidates.txt"),
                     "--out", str(out / "candidates.tsem")]) == 0
    assert cli.main(["embed", "--out-dir", str(out),
                     "--input", str(out / "query.txt"),
                     "--out", str(out / "query.tsem")]) == 0
    return root


class TestGenSynthetic:
    def test_output_parses(self, pipeline_dir):
        trajs = read_trajectories(pipeline_dir / "synthetic.txt", min_length=1)
        assert len(trajs) == 50

    def test_config_file_supplies_defaults(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("count=7  # tiny\nmin_traj_length=5\nmax_traj_length=8\n")
        out = tmp_path / "s.txt"
        assert cli.main(["--config", str(config),
                         "gen-synthetic", "--out", str(out)]) == 0
        assert len(read_trajectories(out, min_length=1)) == 7

    def test_flag_beats_config(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("count=7\nmin_traj_length=5\nmax_traj_length=8\n")
        out = tmp_path / "s.txt"
        assert cli.main(["--config", str(config), "gen-synthetic",
                         "--out", str(out), "--count", "3"]) == 0
        assert len(read_trajectories(out, min_length=1)) == 3


class TestIngest:
    def test_outputs(self, pipeline_dir):
        out = pipeline_dir / "out"
        for name in ("train.txt", "query.txt", "candidates.txt", "stats.txt"):
            assert (out / name).exists()
        stats = cli.read_config_file(out / "stats.txt")
        assert stats["count_train"] == "16"
        assert stats["count_query"] == "5"
        assert stats["count_candidates"] == "20"

    def test_splits_disjoint(self, pipeline_dir):
        out = pipeline_dir / "out"
        ids = []
        for name in ("train", "query", "candidates"):
            ids += [t.traj_id for t in read_trajectories(out / f"{name}.txt",
                                                         min_length=1)]
        assert len(set(ids)) == len(ids)


class TestTrainArtifacts:
    def test_files(self, pipeline_dir):
        out = pipeline_dir / "out"
        assert (out / "model.bin").exists()
        assert (out / "loss_curve.png").exists()
        log = (out / "train_log.csv").read_text().splitlines()
        assert log[0] == "epoch,triplet_loss,regression_loss,total_loss"
        assert len(log) == 3
        assert (out / "train_timings.csv").exists()

    def test_ground_truth_files(self, pipeline_dir):
        out = pipeline_dir / "out"
        assert (out / "gt_train_dfd.tsdm").exists()
        assert (out / "gt_query_dfd.tsdm").exists()


class TestEmbedSearch:
    def test_embedding_dims(self, pipeline_dir):
        ids, matrix = load_embeddings(pipeline_dir / "out" / "candidates.tsem")
        assert len(ids) == 20
        assert matrix.shape == (20, 128)

    def test_search_prints_sorted_scores(self, pipeline_dir, capsys):
        out = pipeline_dir / "out"
        query_ids, _ = load_embeddings(out / "query.tsem")
        assert cli.main(["search", "--embeddings", str(out / "candidates.tsem"),
                         "--query-embeddings", str(out / "query.tsem"),
                         "--query-id", query_ids[0], "-k", "10"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 10
        scores = [float(line.split("\t")[1]) for line in lines]
        assert scores == sorted(scores)

    def test_unknown_query_id_fails(self, pipeline_dir):
        out = pipeline_dir / "out"
        with pytest.raises(SystemExit):
            cli.main(["search", "--embeddings", str(out / "candidates.tsem"),
                      "--query-id", "nope"])


class TestEvaluate:
    def test_report_files(self, pipeline_dir, capsys):
        out = pipeline_dir / "out"
        assert cli.main(["evaluate", "--out-dir", str(out),
                         "--measure", "dfd"]) == 0
        printed = capsys.readouterr().out
        assert "HR@10" in printed
        assert (out / "eval_dfd.csv").exists()
        assert (out / "eval_dfd.txt").exists()
        assert (out / "eval_dfd_timings.txt").exists()
        assert (out / "eval_dfd.png").exists()
        assert "seconds" not in (out / "eval_dfd.csv").read_text()


class TestVerifyBounds:
    def test_outputs(self, pipeline_dir, tmp_path, capsys):
        out = tmp_path / "bounds"
        assert cli.main(["verify-bounds", "--data",
                         str(pipeline_dir / "synthetic.txt"),
                         "--pairs", "30", "--conv2d-pairs", "10",
                         "--out-dir", str(out), "--seed", "7"]) == 0
        printed = capsys.readouterr().out
        assert "100.00%" in printed
        for name in ("conv1d_bound.csv", "maxpool_bound.csv", "conv2d_bound.csv", "summary.txt",
                     "conv1d_bound.png", "maxpool_bound.png", "conv2d_bound.png"):
            assert (out / name).exists()


class TestErrors:
    def test_missing_input_exits_nonzero(self, tmp_path, capsys):
        assert cli.main(["ingest", "--input", str(tmp_path / "missing.txt"),
                         "--out-dir", str(tmp_path / "o")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_measure_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            cli.main(["ground-truth", "--out-dir", str(tmp_path),
                      "--measure", "frechet"])
