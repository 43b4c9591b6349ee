"""Command-line surface wiring the library into reproducible experiments.

Subcommands: gen-synthetic, ingest, ground-truth, train, embed, search,
evaluate, verify-bounds. Options can come from a flat key=value config file
('#' comments allowed); command-line flags win over config values. Report
paths write delimited output plus rendered figures side by side.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import data, plots
from .bounds import bound_suite, write_suite_csvs
from .evaluation import evaluate, write_eval_report
from .geo import (Mbr, NormalizationParams, RasterConfig,
                  compute_dataset_stats)
from .measures import (DEFAULT_EDR_EPSILON, DistanceMatrix, MeasureKind,
                       pairwise_matrix)
from .model import Encoder, ModelConfig, load_model, save_model
from .training import TrainConfig, train


def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _opt(args, config: dict, name: str, cast, default):
    """Flag wins over config file; config wins over default."""
    cli_value = getattr(args, name.replace("-", "_"), None)
    if cli_value is not None:
        return cli_value
    if name in config:
        return cast(config[name])
    return default


def _write_stats(path, mbr: Mbr, max_length: int, counts: dict, delta: float,
                 raster: RasterConfig):
    with open(path, "w") as f:
        for key, value in [
            ("min_lat", repr(mbr.min_lat)), ("max_lat", repr(mbr.max_lat)),
            ("min_lon", repr(mbr.min_lon)), ("max_lon", repr(mbr.max_lon)),
            ("max_length", max_length), ("delta_m", repr(delta)),
            ("raster_rows", raster.rows), ("raster_cols", raster.cols),
        ]:
            f.write(f"{key}={value}\n")
        for key, value in sorted(counts.items()):
            f.write(f"count_{key}={value}\n")


def _read_stats(out_dir):
    fields = read_config_file(Path(out_dir) / "stats.txt")
    mbr = Mbr(float(fields["min_lat"]), float(fields["max_lat"]),
              float(fields["min_lon"]), float(fields["max_lon"]))
    params = NormalizationParams(mbr.min_lat, mbr.max_lat, mbr.min_lon, mbr.max_lon)
    raster = RasterConfig.from_mbr(mbr, float(fields["delta_m"]))
    return mbr, params, raster, int(fields["max_length"])


def _load_split(out_dir, name):
    return data.read_trajectories(Path(out_dir) / f"{name}.txt", min_length=1)


def cmd_gen_synthetic(args, config):
    mbr = Mbr(41.10, 41.24, -8.73, -8.50)  # city-scale box
    trajs = data.generate_synthetic(
        count=_opt(args, config, "count", int, 600),
        min_length=_opt(args, config, "min_traj_length", int, 10),
        max_length=_opt(args, config, "max_traj_length", int, 200),
        mbr=mbr,
        seed=_opt(args, config, "seed", int, 0),
    )
    data.write_trajectories(trajs, args.out)
    print(f"wrote {len(trajs)} synthetic trajectories to {args.out}")


def cmd_ingest(args, config):
    out_dir = Path(_opt(args, config, "out_dir", str, "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    area = None
    area_spec = _opt(args, config, "area", str, None)
    if area_spec:
        lo_lat, hi_lat, lo_lon, hi_lon = (float(v) for v in area_spec.split(","))
        area = Mbr(lo_lat, hi_lat, lo_lon, hi_lon)
    trajs = data.read_trajectories(
        args.input,
        min_length=_opt(args, config, "min_length", int, 10),
        area=area,
    )
    seed = _opt(args, config, "seed", int, 0)
    n_train = _opt(args, config, "train_size", int, 300)
    n_query = _opt(args, config, "query_size", int, 100)
    n_cand = _opt(args, config, "candidate_size", int, 200)
    train_set, query_set, cand_set = data.split_dataset(trajs, n_train, n_query, n_cand, seed)
    mbr, _, max_length = compute_dataset_stats(trajs)
    delta = _opt(args, config, "delta_m", float, 250.0)
    raster = RasterConfig.from_mbr(mbr, delta)
    data.write_trajectories(train_set, out_dir / "train.txt")
    data.write_trajectories(query_set, out_dir / "query.txt")
    data.write_trajectories(cand_set, out_dir / "candidates.txt")
    _write_stats(out_dir / "stats.txt", mbr, max_length,
                 {"train": len(train_set), "query": len(query_set),
                  "candidates": len(cand_set), "total": len(trajs)},
                 delta, raster)
    print(f"ingested {len(trajs)} trajectories -> "
          f"{len(train_set)}/{len(query_set)}/{len(cand_set)} split in {out_dir}")


def _measure(args, config):
    kind = MeasureKind(_opt(args, config, "measure", str, "dfd"))
    epsilon = _opt(args, config, "epsilon", float, DEFAULT_EDR_EPSILON)
    return kind, epsilon


def _normalized(trajs, params):
    from .geo import normalize

    return [normalize(t, params) for t in trajs]


def cmd_ground_truth(args, config):
    out_dir = Path(_opt(args, config, "out_dir", str, "out"))
    _, params, _, _ = _read_stats(out_dir)
    kind, epsilon = _measure(args, config)
    threads = _opt(args, config, "threads", int, 1)
    train_set = _normalized(_load_split(out_dir, "train"), params)
    query_set = _normalized(_load_split(out_dir, "query"), params)
    cand_set = _normalized(_load_split(out_dir, "candidates"), params)
    pairwise_matrix(train_set, train_set, kind, epsilon, threads).save(
        out_dir / f"gt_train_{kind.value}.tsdm")
    pairwise_matrix(query_set, cand_set, kind, epsilon, threads).save(
        out_dir / f"gt_query_{kind.value}.tsdm")
    print(f"wrote ground-truth matrices for {kind.value} in {out_dir}")


def cmd_train(args, config):
    out_dir = Path(_opt(args, config, "out_dir", str, "out"))
    _, params, raster, max_length = _read_stats(out_dir)
    kind, _ = _measure(args, config)
    seed = _opt(args, config, "seed", int, 0)
    train_set = _load_split(out_dir, "train")
    dmat = DistanceMatrix.load(out_dir / f"gt_train_{kind.value}.tsdm")
    model_config = ModelConfig.for_dataset(max_length, raster.rows, raster.cols, seed=seed)
    encoder = Encoder(model_config)
    train_config = TrainConfig(
        epochs=_opt(args, config, "epochs", int, 200),
        batch_size=_opt(args, config, "batch_size", int, 128),
        lr=_opt(args, config, "lr", float, 0.001),
        neighbor_pool_k=_opt(args, config, "neighbor_pool_k", int, 200),
        seed=seed,
        loss_mode=_opt(args, config, "loss", str, "both"),
    )
    inputs = data.prepare_encoder_inputs(train_set, params, raster, max_length)
    history = train(encoder, inputs, dmat, train_config,
                    log_path=out_dir / "train_log.csv",
                    timing_path=out_dir / "train_timings.csv",
                    checkpoint_every=_opt(args, config, "checkpoint_every", int, 0),
                    checkpoint_dir=out_dir)
    save_model(encoder, out_dir / "model.bin")
    plots.plot_training_log(history, out_dir / "loss_curve.png")
    print(f"trained {train_config.epochs} epochs; final loss {history[-1].total:.6f}")


def _embed_all(encoder, trajs, params, raster):
    inputs = data.prepare_encoder_inputs(trajs, params, raster,
                                         encoder.config.padded_length)
    ids = sorted(inputs)
    matrix = np.stack([encoder.encode_array(*inputs[tid]) for tid in ids])
    return ids, matrix


def cmd_embed(args, config):
    out_dir = Path(_opt(args, config, "out_dir", str, "out"))
    _, params, raster, _ = _read_stats(out_dir)
    encoder = load_model(out_dir / "model.bin")
    trajs = data.read_trajectories(args.input, min_length=1)
    ids, matrix = _embed_all(encoder, trajs, params, raster)
    data.save_embeddings(args.out, ids, matrix)
    print(f"embedded {len(ids)} trajectories -> {args.out}")


def cmd_search(args, config):
    cand_ids, cand_matrix = data.load_embeddings(args.embeddings)
    query_path = args.query_embeddings or args.embeddings
    query_ids, query_matrix = data.load_embeddings(query_path)
    if args.query_id not in query_ids:
        raise SystemExit(f"query id {args.query_id!r} not present in {query_path}")
    from .evaluation import embedding_topk

    qvec = query_matrix[query_ids.index(args.query_id)]
    result = embedding_topk(args.query_id, qvec, cand_ids, np.asarray(cand_matrix), args.k)
    for tid, score in zip(result.ids, result.scores):
        print(f"{tid}\t{score:.6f}")


def cmd_evaluate(args, config):
    out_dir = Path(_opt(args, config, "out_dir", str, "out"))
    _, params, raster, _ = _read_stats(out_dir)
    kind, epsilon = _measure(args, config)
    encoder = load_model(out_dir / "model.bin")
    query_set = _load_split(out_dir, "query")
    cand_set = _load_split(out_dir, "candidates")
    gt_path = out_dir / f"gt_query_{kind.value}.tsdm"
    ground_truth = DistanceMatrix.load(gt_path) if gt_path.exists() else None
    query_norm = _normalized(query_set, params)
    cand_norm = _normalized(cand_set, params)
    # ground-truth measures run on normalized coordinates; embeddings on raw
    inputs = data.prepare_encoder_inputs(query_set + cand_set, params, raster,
                                         encoder.config.padded_length)

    def embed_prepared(traj):
        return encoder.encode_array(*inputs[traj.traj_id])

    report = evaluate(embed_prepared, query_norm, cand_norm, kind,
                      k_list=(1, 5, 10, 50) if len(cand_norm) >= 50 else (1, 5, 10),
                      epsilon=epsilon, ground_truth=ground_truth)
    write_eval_report(report, out_dir / f"eval_{kind.value}.csv",
                      out_dir / f"eval_{kind.value}.txt",
                      out_dir / f"eval_{kind.value}_timings.txt")
    plots.plot_eval_report(report, out_dir / f"eval_{kind.value}.png")
    for k in sorted(report.hr):
        print(f"HR@{k}: {report.hr[k]:.4f}")
    print(f"R10@50: {report.r10_at_50:.4f}")


def cmd_verify_bounds(args, config):
    out_dir = Path(_opt(args, config, "out_dir", str, "bounds_out"))
    trajs = data.read_trajectories(args.data, min_length=2)
    _, params, _ = compute_dataset_stats(trajs)
    norm = _normalized(trajs, params)
    seed = _opt(args, config, "seed", int, 7)
    result = bound_suite(norm, n_pairs=args.pairs, seed=seed,
                         conv2d_pairs=_opt(args, config, "conv2d_pairs", int, args.pairs),
                         delta=_opt(args, config, "bound_delta", float, 0.02))
    write_suite_csvs(result, out_dir, seed)
    plots.plot_bound_suite(result, out_dir)
    print(f"1D conv bound satisfaction:  {result.conv1d_rate:.2%}")
    print(f"max-pool bound satisfaction: {result.pool_rate:.2%}")
    print(f"2D conv bound satisfaction:  {result.conv2d_rate:.2%}")
    print(f"Spearman(true, after-conv):  {result.spearman:.3f}")


def build_parser():
    parser = argparse.ArgumentParser(prog="trajsim",
                                     description="trajectory similarity toolkit")
    parser.add_argument("--config", help="flat key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--measure", choices=[m.value for m in MeasureKind])
        p.add_argument("--epsilon", type=float)
        p.add_argument("--threads", type=int)
        return p

    p = common(sub.add_parser("gen-synthetic", help="generate a seeded synthetic dataset"))
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--min-traj-length", type=int)
    p.add_argument("--max-traj-length", type=int)
    p.set_defaults(func=cmd_gen_synthetic)

    p = common(sub.add_parser("ingest", help="filter, split and summarize a raw file"))
    p.add_argument("--input", required=True)
    p.add_argument("--min-length", type=int)
    p.add_argument("--area", help="min_lat,max_lat,min_lon,max_lon")
    p.add_argument("--delta-m", type=float)
    p.add_argument("--train-size", type=int)
    p.add_argument("--query-size", type=int)
    p.add_argument("--candidate-size", type=int)
    p.set_defaults(func=cmd_ingest)

    p = common(sub.add_parser("ground-truth", help="exact pairwise distance matrices"))
    p.set_defaults(func=cmd_ground_truth)

    p = common(sub.add_parser("train", help="train the encoder"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--neighbor-pool-k", type=int)
    p.add_argument("--loss", choices=["triplet", "mse", "both"])
    p.add_argument("--checkpoint-every", type=int)
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("embed", help="embed a trajectory file"))
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = common(sub.add_parser("search", help="top-k by embedding distance"))
    p.add_argument("--embeddings", required=True)
    p.add_argument("--query-embeddings")
    p.add_argument("--query-id", required=True)
    p.add_argument("-k", type=int, default=10)
    p.set_defaults(func=cmd_search)

    p = common(sub.add_parser("evaluate", help="HR@k / R10@50 evaluation"))
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("verify-bounds", help="run the distance-bound verification suite"))
    p.add_argument("--data", required=True)
    p.add_argument("--pairs", type=int, default=500)
    p.add_argument("--conv2d-pairs", type=int)
    p.add_argument("--bound-delta", type=float)
    p.set_defaults(func=cmd_verify_bounds)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    config = read_config_file(args.config) if args.config else {}
    try:
        args.func(args, config)
    except (ValueError, RuntimeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
