"""Empirical verification of the convolution/pooling distance bounds.

Three checks, each producing a per-pair report and a suite-level CSV:

* 1D convolution: the Frechet distance between the convolved scalar
  sequences is sandwiched between the endpoint distance and
  sqrt(S0^2 + S1^2) * d_F(X, Y) + Delta, where S_i are kernel row sums and
  Delta is the worst finite-difference residual (boundary differences taken
  against the zero padding, matching the padded convolution actually run).
* 1D max-pooling: pooling with window/stride k moves the Frechet distance by
  at most the sum of the two worst per-group envelope diameters.
* 2D convolution: when the trajectory MBRs are separated by more than
  2*sqrt(2)*delta, the convolved binary images have Euclidean distance at
  least sqrt((n+m) * sum(k^2)), and d_F(X, Y) itself exceeds 2*sqrt(2)*delta.

All computations run through the same conv forward code the encoder uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .geo import Mbr, mbr_distance
from .measures import dfd
from .nn import conv1d_forward, conv2d_forward

_REL_TOL = 1e-9


def _within(value, low, high):
    tol_low = _REL_TOL * max(1.0, abs(low))
    tol_high = _REL_TOL * max(1.0, abs(high))
    return (low - tol_low) <= value <= (high + tol_high)


@dataclass
class Conv1dBoundReport:
    pair_id: int
    d_xy: float
    lower: float
    actual: float
    upper: float

    @property
    def satisfied(self) -> bool:
        return _within(self.actual, self.lower, self.upper)


@dataclass
class PoolBoundReport:
    pair_id: int
    d_before: float
    d_after: float
    bound: float
    trimmed: bool

    @property
    def satisfied(self) -> bool:
        return abs(self.d_after - self.d_before) <= self.bound + _REL_TOL * max(1.0, self.bound)


@dataclass
class Conv2dBoundReport:
    pair_id: int
    premise_met: bool
    mbr_gap: float
    delta: float
    n_pixels: int = 0
    m_pixels: int = 0
    bound: float = 0.0
    actual: float = 0.0
    d_xy: float = 0.0

    @property
    def satisfied(self) -> bool:
        if not self.premise_met:
            return True  # separation premise not met, no claim to check
        threshold = 2.0 * math.sqrt(2.0) * self.delta
        euclid_ok = self.actual >= self.bound - _REL_TOL * max(1.0, self.bound)
        return euclid_ok and self.d_xy > threshold


def conv1d_bound(x: np.ndarray, y: np.ndarray, kernel: np.ndarray,
                 pair_id: int = 0) -> Conv1dBoundReport:
    """Check the 1D convolution sandwich for one trajectory pair.

    x, y: arrays of shape (2, M+1) / (2, N+1); kernel: (2, 3).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if x.shape[0] != 2 or y.shape[0] != 2 or kernel.shape != (2, 3):
        raise ValueError(f"expected 2-row inputs and a 2x3 kernel, "
                         f"got {x.shape}, {y.shape}, {kernel.shape}")

    d_xy = dfd(x.T, y.T)
    cx = conv1d_forward(x, kernel[None, :, :])[0]
    cy = conv1d_forward(y, kernel[None, :, :])[0]
    actual = dfd(cx[:, None], cy[:, None])
    lower = max(abs(cx[0] - cy[0]), abs(cx[-1] - cy[-1]))

    s = kernel.sum(axis=1)
    # finite differences against the zero pad: index 0 sees the leading zero,
    # index M+1 the trailing one
    def padded_diffs(seq):
        padded = np.pad(seq, ((0, 0), (1, 1)))
        return np.diff(padded, axis=1)  # shape (2, L+1)

    dx = padded_diffs(x)
    dy = padded_diffs(y)
    a = kernel[:, 0] @ dx[:, :-1]        # sum_m k_{m,0} * delta^x_{m,i},   i in [0, M]
    b = kernel[:, 2] @ dx[:, 1:]         # sum_m k_{m,2} * delta^x_{m,i+1}, i in [0, M]
    c = kernel[:, 0] @ dy[:, :-1]
    d = kernel[:, 2] @ dy[:, 1:]
    u = b - a  # indexed by i
    w = c - d  # indexed by j
    delta = max(u.max() + w.max(), -(u.min() + w.min()))
    upper = math.hypot(s[0], s[1]) * d_xy + delta
    return Conv1dBoundReport(pair_id, d_xy, lower, actual, upper)


def _group_envelopes(seq: np.ndarray, k: int):
    """seq: (l, M) columns are points; returns per-group min/max envelopes."""
    l, m = seq.shape
    grouped = seq.reshape(l, m // k, k)
    return grouped.min(axis=2), grouped.max(axis=2)


def maxpool_bound(x: np.ndarray, y: np.ndarray, k: int = 2,
                  pair_id: int = 0) -> PoolBoundReport:
    """Check the max-pooling bound; inputs are (l, M) column-point sequences.

    Lengths not divisible by k are trimmed to the largest multiple first,
    matching the drop-remainder pooling; the report records the trim.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[1] < k or y.shape[1] < k:
        raise ValueError(f"sequences must contain at least {k} points")
    trimmed = (x.shape[1] % k != 0) or (y.shape[1] % k != 0)
    x = x[:, : (x.shape[1] // k) * k]
    y = y[:, : (y.shape[1] // k) * k]

    def envelope_diameter(seq):
        low, high = _group_envelopes(seq, k)
        return float(np.linalg.norm(high - low, axis=0).max())

    bound = envelope_diameter(x) + envelope_diameter(y)
    pooled_x = x.reshape(x.shape[0], -1, k).max(axis=2)
    pooled_y = y.reshape(y.shape[0], -1, k).max(axis=2)
    d_before = dfd(x.T, y.T)
    d_after = dfd(pooled_x.T, pooled_y.T)
    return PoolBoundReport(pair_id, d_before, d_after, bound, trimmed)


def _planar_rasterize(points: np.ndarray, origin, delta, rows, cols) -> np.ndarray:
    r = np.floor((points[:, 0] - origin[0]) / delta).astype(np.int64)
    c = np.floor((points[:, 1] - origin[1]) / delta).astype(np.int64)
    np.clip(r, 0, rows - 1, out=r)
    np.clip(c, 0, cols - 1, out=c)
    image = np.zeros((rows, cols))
    image[r, c] = 1.0
    return image


def conv2d_bound(x: np.ndarray, y: np.ndarray, kernel: np.ndarray,
                 delta: float, pair_id: int = 0) -> Conv2dBoundReport:
    """Check the 2D convolution lower bound for one far-apart pair.

    x, y: point arrays (l, 2) in planar units matching delta;
    kernel: strictly positive (3, 3).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape != (3, 3):
        raise ValueError(f"kernel must be 3x3, got {kernel.shape}")
    if not (kernel > 0).all():
        raise ValueError("kernel entries must be strictly positive")
    if delta <= 0:
        raise ValueError("grid width must be positive")

    gap = mbr_distance(Mbr.of_points(x), Mbr.of_points(y))
    if gap <= 2.0 * math.sqrt(2.0) * delta:
        return Conv2dBoundReport(pair_id, False, gap, delta)

    both = np.concatenate([x, y])
    # one-cell margin keeps every occupied pixel interior, so each one
    # contributes its full kernel footprint to the convolved image
    origin = both.min(axis=0) - delta
    extent = both.max(axis=0) - origin
    rows = max(1, math.ceil(extent[0] / delta)) + 2
    cols = max(1, math.ceil(extent[1] / delta)) + 2
    img_x = _planar_rasterize(x, origin, delta, rows, cols)
    img_y = _planar_rasterize(y, origin, delta, rows, cols)
    cx = conv2d_forward(img_x[None], kernel[None, None])
    cy = conv2d_forward(img_y[None], kernel[None, None])
    n, m = int(img_x.sum()), int(img_y.sum())
    bound = math.sqrt((n + m) * float((kernel**2).sum()))
    actual = float(np.linalg.norm((cx - cy).ravel()))
    return Conv2dBoundReport(pair_id, True, gap, delta, n, m, bound, actual, dfd(x, y))


# ---------------------------------------------------------------------------
# Suite

@dataclass
class BoundSuiteResult:
    conv1d_reports: list[Conv1dBoundReport]
    pool_reports: list[PoolBoundReport]
    conv2d_reports: list[Conv2dBoundReport]
    spearman: float

    @staticmethod
    def _rate(reports):
        return sum(r.satisfied for r in reports) / len(reports) if reports else 1.0

    @property
    def conv1d_rate(self):
        return self._rate(self.conv1d_reports)

    @property
    def pool_rate(self):
        return self._rate(self.pool_reports)

    @property
    def conv2d_rate(self):
        return self._rate(self.conv2d_reports)

    @property
    def pool_median_shift(self):
        return float(np.median([abs(r.d_after - r.d_before) for r in self.pool_reports]))


def bound_suite(trajectories, n_pairs: int, seed: int,
                conv2d_pairs: int | None = None,
                delta: float = 0.02) -> BoundSuiteResult:
    """Run all three checks over seeded random pairs of normalized trajectories.

    Kernels: uniform(-1, 1) for the 1D checks, uniform(0.1, 1) for the 2D
    check (which needs positive entries). The 2D check translates the second
    trajectory of each pair past the joint extent by a random offset of
    7..20 grid widths so the MBR-separation premise holds by construction.
    """
    trajs = [np.asarray(t.points, dtype=np.float64) for t in trajectories]
    if len(trajs) < 2:
        raise ValueError("bound suite needs at least two trajectories")
    rng = np.random.default_rng(seed)
    kernel_1d = rng.uniform(-1.0, 1.0, size=(2, 3))
    kernel_2d = rng.uniform(0.1, 1.0, size=(3, 3))

    def sample_pair():
        i, j = rng.choice(len(trajs), size=2, replace=False)
        return trajs[i], trajs[j]

    conv1d_reports = []
    pool_reports = []
    for pid in range(n_pairs):
        a, b = sample_pair()
        conv1d_reports.append(conv1d_bound(a.T, b.T, kernel_1d, pair_id=pid))
        pool_reports.append(maxpool_bound(a.T, b.T, k=2, pair_id=pid))

    conv2d_reports = []
    for pid in range(conv2d_pairs if conv2d_pairs is not None else n_pairs):
        a, b = sample_pair()
        direction = rng.uniform(-1.0, 1.0, size=2)
        direction /= np.linalg.norm(direction)
        offset = direction * rng.uniform(7.0, 20.0) * delta
        span = (np.concatenate([a, b]).max(axis=0) - np.concatenate([a, b]).min(axis=0))
        shifted = b + offset + np.sign(offset) * span  # clear the joint extent too
        conv2d_reports.append(conv2d_bound(a, shifted, kernel_2d, delta, pair_id=pid))

    corr = spearmanr([r.d_xy for r in conv1d_reports],
                     [r.actual for r in conv1d_reports]).statistic
    return BoundSuiteResult(conv1d_reports, pool_reports, conv2d_reports, float(corr))


def write_suite_csvs(result: BoundSuiteResult, out_dir, seed: int):
    """One CSV per check plus a plain-text summary."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "conv1d_bound.csv", "w") as f:
        f.write(f"# kernel_range=uniform(-1,1) seed={seed}\n")
        f.write("pair_id,d_xy,lower,actual,upper,satisfied\n")
        for r in result.conv1d_reports:
            f.write(f"{r.pair_id},{r.d_xy:.12g},{r.lower:.12g},{r.actual:.12g},"
                    f"{r.upper:.12g},{int(r.satisfied)}\n")
    with open(out / "maxpool_bound.csv", "w") as f:
        f.write(f"# kernel_range=uniform(-1,1) seed={seed}\n")
        f.write("pair_id,d_before,d_after,bound,trimmed,satisfied\n")
        for r in result.pool_reports:
            f.write(f"{r.pair_id},{r.d_before:.12g},{r.d_after:.12g},{r.bound:.12g},"
                    f"{int(r.trimmed)},{int(r.satisfied)}\n")
    with open(out / "conv2d_bound.csv", "w") as f:
        f.write(f"# kernel_range=uniform(0.1,1) seed={seed}\n")
        f.write("pair_id,premise_met,mbr_gap,delta,n,m,bound,actual,d_xy,satisfied\n")
        for r in result.conv2d_reports:
            f.write(f"{r.pair_id},{int(r.premise_met)},{r.mbr_gap:.12g},{r.delta:.12g},"
                    f"{r.n_pixels},{r.m_pixels},{r.bound:.12g},{r.actual:.12g},"
                    f"{r.d_xy:.12g},{int(r.satisfied)}\n")
    with open(out / "summary.txt", "w") as f:
        f.write(f"conv1d_bound_satisfaction={result.conv1d_rate:.6f}\n")
        f.write(f"maxpool_bound_satisfaction={result.pool_rate:.6f}\n")
        f.write(f"conv2d_bound_satisfaction={result.conv2d_rate:.6f}\n")
        f.write(f"spearman_dxy_vs_conv={result.spearman:.6f}\n")
        f.write(f"maxpool_median_shift={result.pool_median_shift:.12g}\n")
