"""Figure rendering for the report paths (bound scatters, loss curves, metrics).

Figures are written next to the delimited outputs; all rendering uses the
Agg backend so the CLI works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_bound_suite(result, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    reports = sorted(result.conv1d_reports, key=lambda r: r.d_xy)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    x = [r.d_xy for r in reports]
    axes[0].plot(x, [r.upper for r in reports], ".", ms=3, label="upper bound")
    axes[0].plot(x, [r.actual for r in reports], ".", ms=3, label="after conv")
    axes[0].plot(x, [r.lower for r in reports], ".", ms=3, label="lower bound")
    axes[0].set_xlabel("true distance")
    axes[0].set_ylabel("distance after 1D conv")
    axes[0].set_title("1D convolution bounds")
    axes[0].legend()
    axes[1].plot(x, [r.actual for r in reports], ".", ms=3)
    axes[1].set_xlabel("true distance")
    axes[1].set_ylabel("distance after 1D conv")
    axes[1].set_title(f"correlation (Spearman={result.spearman:.3f})")
    fig.tight_layout()
    fig.savefig(out / "conv1d_bound.png", dpi=150)
    plt.close(fig)

    reports = sorted(result.pool_reports, key=lambda r: r.d_before)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    x = [r.d_before for r in reports]
    axes[0].plot(x, [r.d_before + r.bound for r in reports], ".", ms=3, label="upper bound")
    axes[0].plot(x, [r.d_after for r in reports], ".", ms=3, label="after pooling")
    axes[0].plot(x, [max(0.0, r.d_before - r.bound) for r in reports], ".", ms=3,
                 label="lower bound")
    axes[0].set_xlabel("distance before pooling")
    axes[0].set_title("max-pooling bounds")
    axes[0].legend()
    axes[1].hist([abs(r.d_after - r.d_before) for r in reports], bins=40)
    axes[1].set_xlabel("|after - before|")
    axes[1].set_title("pooling-induced shift")
    fig.tight_layout()
    fig.savefig(out / "maxpool_bound.png", dpi=150)
    plt.close(fig)

    met = [r for r in result.conv2d_reports if r.premise_met]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot([r.bound for r in met], [r.actual for r in met], ".", ms=4)
    lim = max((r.actual for r in met), default=1.0)
    ax.plot([0, lim], [0, lim], "k--", lw=1, label="actual = bound")
    ax.set_xlabel("lower bound")
    ax.set_ylabel("actual distance after 2D conv")
    ax.set_title("2D convolution lower bound")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "conv2d_bound.png", dpi=150)
    plt.close(fig)


def plot_training_log(history, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = [h.epoch for h in history]
    ax.plot(epochs, [h.total for h in history], label="total")
    ax.plot(epochs, [h.triplet_term for h in history], label="triplet")
    ax.plot(epochs, [h.regression_term for h in history], label="regression")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_eval_report(report, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ks = sorted(report.hr)
    labels = [f"HR@{k}" for k in ks] + ["R10@50"]
    values = [report.hr[k] for k in ks] + [report.r10_at_50]
    ax.bar(range(len(values)), values)
    ax.set_xticks(range(len(values)), labels)
    ax.set_ylim(0, 1)
    ax.set_ylabel("rate")
    ax.set_title(f"search quality ({report.measure.value})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
