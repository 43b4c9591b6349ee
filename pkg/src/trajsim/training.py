"""Triplet selection, the combined hinge + distance-regression loss, and the
epoch loop.

Each epoch re-selects one triplet per training trajectory from its top-k
true neighbors, shuffles them into batches, runs all three legs through the
shared encoder, and takes one Adam step per batch on the batch-mean loss.
Everything is deterministic given the base seed: epoch e uses seed + e for
both triplet sampling and batch shuffling.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .measures import DistanceMatrix
from .model import Encoder, save_model

LOSS_MODES = ("triplet", "mse", "both")


@dataclass(frozen=True)
class Triplet:
    anchor: str
    positive: str
    negative: str
    f_ap: float
    f_an: float

    def __post_init__(self):
        if self.f_ap > self.f_an:
            raise ValueError("positive must not be farther from the anchor than the negative")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    lr: float = 0.001
    neighbor_pool_k: int = 200
    seed: int = 0
    loss_mode: str = "both"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0 or self.neighbor_pool_k < 2:
            raise ValueError(f"invalid training config: {self}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")


@dataclass
class LossBreakdown:
    epoch: int
    triplet_term: float
    regression_term: float
    seconds: float

    @property
    def total(self) -> float:
        return self.triplet_term + self.regression_term


def select_triplets(train_ids, dmat: DistanceMatrix, k: int, epoch_seed: int) -> list[Triplet]:
    """One triplet per anchor, sampled from the anchor's k nearest true neighbors."""
    train_ids = sorted(train_ids)
    if len(train_ids) < 3:
        raise ValueError("triplet selection needs at least 3 trajectories")
    if k < 2:
        raise ValueError("neighbor pool k must be >= 2")
    rng = np.random.default_rng(epoch_seed)
    col_index = {tid: i for i, tid in enumerate(dmat.col_ids)}
    row_index = {tid: i for i, tid in enumerate(dmat.row_ids)}
    triplets = []
    for anchor in train_ids:
        row = dmat.values[row_index[anchor]]
        ranked = sorted(
            ((float(row[col_index[t]]), t) for t in train_ids if t != anchor)
        )
        pool = ranked[:k]
        i, j = rng.choice(len(pool), size=2, replace=False)
        first, second = sorted([pool[i], pool[j]])  # ties broken by smaller id
        triplets.append(Triplet(anchor, first[1], second[1], first[0], second[0]))
    return triplets


def triplet_loss(d_ap: float, d_an: float, f_ap: float, f_an: float) -> float:
    """Hinge on the embedding gap with margin eta = f_ap - f_an (nonpositive)."""
    return max(0.0, d_ap - d_an - (f_ap - f_an))


def regression_loss(d_ap: float, d_an: float, f_ap: float, f_an: float) -> float:
    """Absolute error between embedding distances and true distances, both legs."""
    return abs(d_ap - f_ap) + abs(d_an - f_an)


def _triplet_terms(emb, triplet: Triplet):
    d_ap = nn.euclidean(emb[triplet.anchor], emb[triplet.positive])
    d_an = nn.euclidean(emb[triplet.anchor], emb[triplet.negative])
    eta = triplet.f_ap - triplet.f_an
    lt = nn.relu(nn.add_const(nn.sub(d_ap, d_an), -eta))
    lm = nn.add(
        nn.absolute(nn.add_const(d_ap, -triplet.f_ap)),
        nn.absolute(nn.add_const(d_an, -triplet.f_an)),
    )
    return lt, lm


def train(encoder: Encoder, inputs: dict[str, tuple[np.ndarray, np.ndarray]],
          dmat: DistanceMatrix, config: TrainConfig,
          log_path=None, timing_path=None, checkpoint_every: int = 0,
          checkpoint_dir=None) -> list[LossBreakdown]:
    """Train the encoder in place; returns the per-epoch loss log.

    `inputs` maps trajectory id to its prepared (sequence, image) pair.
    Timings go to their own file so the loss log stays run-reproducible.
    """
    train_ids = sorted(inputs)
    optimizer = nn.Adam(encoder.parameters(), lr=config.lr)
    history: list[LossBreakdown] = []
    log_file = open(log_path, "w") if log_path else None
    timing_file = open(timing_path, "w") if timing_path else None
    if log_file:
        log_file.write("epoch,triplet_loss,regression_loss,total_loss\n")
    if timing_file:
        timing_file.write("epoch,seconds\n")
    try:
        for epoch in range(config.epochs):
            start = time.perf_counter()
            triplets = select_triplets(train_ids, dmat, config.neighbor_pool_k,
                                       config.seed + epoch)
            rng = np.random.default_rng(config.seed + epoch)
            order = rng.permutation(len(triplets))
            lt_sum = lm_sum = 0.0
            for b0 in range(0, len(triplets), config.batch_size):
                batch = [triplets[i] for i in order[b0 : b0 + config.batch_size]]
                batch.sort(key=lambda t: t.anchor)  # fixed summation order
                emb: dict[str, nn.Tensor] = {}
                for t in batch:
                    for tid in (t.anchor, t.positive, t.negative):
                        if tid not in emb:
                            seq, image = inputs[tid]
                            emb[tid] = encoder.encode(seq, image)
                objective = None
                for t in batch:
                    lt, lm = _triplet_terms(emb, t)
                    lt_sum += lt.item()
                    lm_sum += lm.item()
                    if config.loss_mode == "triplet":
                        term = lt
                    elif config.loss_mode == "mse":
                        term = lm
                    else:
                        term = nn.add(lt, lm)
                    objective = term if objective is None else nn.add(objective, term)
                objective = nn.scale(objective, 1.0 / len(batch))
                if not np.isfinite(objective.item()):
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch}, batch {b0 // config.batch_size}"
                    )
                objective.backward()
                optimizer.step()
                optimizer.zero_grad()
            entry = LossBreakdown(epoch, lt_sum / len(triplets), lm_sum / len(triplets),
                                  time.perf_counter() - start)
            history.append(entry)
            if log_file:
                log_file.write(f"{epoch},{entry.triplet_term:.12g},"
                               f"{entry.regression_term:.12g},{entry.total:.12g}\n")
            if timing_file:
                timing_file.write(f"{epoch},{entry.seconds:.3f}\n")
            if checkpoint_every and (epoch + 1) % checkpoint_every == 0:
                save_model(encoder, Path(checkpoint_dir) / f"checkpoint_{epoch + 1:04d}.model")
    finally:
        if log_file:
            log_file.close()
        if timing_file:
            timing_file.close()
    return history
