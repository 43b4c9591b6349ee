"""Exact quadratic-time trajectory distance measures and pairwise matrices.

All measures operate on min-max-normalized coordinate arrays of shape (l, 2)
(any dimension >= 1 works; the toolkit uses 2). The DP implementations are
numba-compiled; exponential brute-force oracles for tiny instances live here
too so correctness checks stay independent of the DP code path.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

DEFAULT_EDR_EPSILON = 0.01

_MAGIC = b"TSDM"
_VERSION = 1


class MeasureKind(str, Enum):
    DFD = "dfd"
    DTW = "dtw"
    HAUSDORFF = "hausdorff"
    EDR = "edr"


@njit(cache=True, nogil=True)
def _point_dists(a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for d in range(a.shape[1]):
                diff = a[i, d] - b[j, d]
                s += diff * diff
            out[i, j] = np.sqrt(s)
    return out


@njit(cache=True, nogil=True)
def _dfd(a, b):
    d = _point_dists(a, b)
    n, m = d.shape
    dp = np.empty((n, m))
    dp[0, 0] = d[0, 0]
    for j in range(1, m):
        dp[0, j] = max(dp[0, j - 1], d[0, j])
    for i in range(1, n):
        dp[i, 0] = max(dp[i - 1, 0], d[i, 0])
        for j in range(1, m):
            best = min(dp[i - 1, j], dp[i, j - 1], dp[i - 1, j - 1])
            dp[i, j] = max(best, d[i, j])
    return dp[n - 1, m - 1]


@njit(cache=True, nogil=True)
def _dtw(a, b):
    d = _point_dists(a, b)
    n, m = d.shape
    dp = np.empty((n, m))
    dp[0, 0] = d[0, 0]
    for j in range(1, m):
        dp[0, j] = dp[0, j - 1] + d[0, j]
    for i in range(1, n):
        dp[i, 0] = dp[i - 1, 0] + d[i, 0]
        for j in range(1, m):
            dp[i, j] = d[i, j] + min(dp[i - 1, j], dp[i, j - 1], dp[i - 1, j - 1])
    return dp[n - 1, m - 1]


@njit(cache=True, nogil=True)
def _hausdorff(a, b):
    d = _point_dists(a, b)
    forward = 0.0
    for i in range(d.shape[0]):
        row_min = d[i, 0]
        for j in range(1, d.shape[1]):
            if d[i, j] < row_min:
                row_min = d[i, j]
        if row_min > forward:
            forward = row_min
    backward = 0.0
    for j in range(d.shape[1]):
        col_min = d[0, j]
        for i in range(1, d.shape[0]):
            if d[i, j] < col_min:
                col_min = d[i, j]
        if col_min > backward:
            backward = col_min
    return max(forward, backward)


@njit(cache=True, nogil=True)
def _edr(a, b, eps):
    n, m = a.shape[0], b.shape[0]
    dp = np.empty((n + 1, m + 1), dtype=np.int64)
    for i in range(n + 1):
        dp[i, 0] = i
    for j in range(m + 1):
        dp[0, j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            match = True
            for d in range(a.shape[1]):
                if abs(a[i - 1, d] - b[j - 1, d]) > eps:
                    match = False
                    break
            sub = dp[i - 1, j - 1] + (0 if match else 1)
            dp[i, j] = min(sub, dp[i - 1, j] + 1, dp[i, j - 1] + 1)
    return dp[n, m]


def _check_nonempty(a: np.ndarray, b: np.ndarray):
    if len(a) == 0 or len(b) == 0:
        raise ValueError("distance measures require nonempty trajectories")


def dfd(a: np.ndarray, b: np.ndarray) -> float:
    """Discrete Frechet distance: min over couplings of the max point distance."""
    _check_nonempty(a, b)
    return float(_dfd(np.ascontiguousarray(a), np.ascontiguousarray(b)))


def dtw(a: np.ndarray, b: np.ndarray) -> float:
    """Dynamic time warping with Euclidean point cost."""
    _check_nonempty(a, b)
    return float(_dtw(np.ascontiguousarray(a), np.ascontiguousarray(b)))


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between the two point sets."""
    _check_nonempty(a, b)
    return float(_hausdorff(np.ascontiguousarray(a), np.ascontiguousarray(b)))


def edr(a: np.ndarray, b: np.ndarray, epsilon: float = DEFAULT_EDR_EPSILON) -> int:
    """Edit distance on real sequence with per-axis match threshold epsilon."""
    _check_nonempty(a, b)
    if epsilon <= 0:
        raise ValueError("EDR epsilon must be positive")
    return int(_edr(np.ascontiguousarray(a), np.ascontiguousarray(b), epsilon))


def trajectory_distance(a, b, kind: MeasureKind, epsilon: float = DEFAULT_EDR_EPSILON) -> float:
    if kind == MeasureKind.DFD:
        return dfd(a, b)
    if kind == MeasureKind.DTW:
        return dtw(a, b)
    if kind == MeasureKind.HAUSDORFF:
        return hausdorff(a, b)
    if kind == MeasureKind.EDR:
        return float(edr(a, b, epsilon))
    raise ValueError(f"unknown measure kind: {kind}")


# ---------------------------------------------------------------------------
# Brute-force oracles (exponential; test surface only)

_ORACLE_CAP = 8


def _check_oracle_size(a, b):
    if len(a) > _ORACLE_CAP or len(b) > _ORACLE_CAP:
        raise ValueError(f"oracle limited to lengths <= {_ORACLE_CAP}")


def _euclid(p, q) -> float:
    # same accumulation order as the compiled kernels so results match exactly
    s = 0.0
    for d in range(len(p)):
        diff = float(p[d]) - float(q[d])
        s += diff * diff
    return math.sqrt(s)


def dfd_oracle(a, b) -> float:
    """Recursive DFD definition without memoization."""
    _check_nonempty(a, b)
    _check_oracle_size(a, b)

    def rec(i, j):
        d = _euclid(a[i], b[j])
        if i == 0 and j == 0:
            return d
        if i == 0:
            return max(rec(0, j - 1), d)
        if j == 0:
            return max(rec(i - 1, 0), d)
        return max(min(rec(i - 1, j), rec(i, j - 1), rec(i - 1, j - 1)), d)

    return rec(len(a) - 1, len(b) - 1)


def dtw_oracle(a, b) -> float:
    _check_nonempty(a, b)
    _check_oracle_size(a, b)

    def rec(i, j):
        d = _euclid(a[i], b[j])
        if i == 0 and j == 0:
            return d
        if i == 0:
            return rec(0, j - 1) + d
        if j == 0:
            return rec(i - 1, 0) + d
        return d + min(rec(i - 1, j), rec(i, j - 1), rec(i - 1, j - 1))

    return rec(len(a) - 1, len(b) - 1)


def hausdorff_oracle(a, b) -> float:
    _check_nonempty(a, b)
    forward = max(min(_euclid(p, q) for q in b) for p in a)
    backward = max(min(_euclid(p, q) for p in a) for q in b)
    return max(forward, backward)


def edr_oracle(a, b, epsilon: float = DEFAULT_EDR_EPSILON) -> int:
    _check_nonempty(a, b)
    _check_oracle_size(a, b)
    if epsilon <= 0:
        raise ValueError("EDR epsilon must be positive")

    def rec(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        match = all(abs(a[i - 1][d] - b[j - 1][d]) <= epsilon for d in range(len(a[0])))
        return min(
            rec(i - 1, j - 1) + (0 if match else 1),
            rec(i - 1, j) + 1,
            rec(i, j - 1) + 1,
        )

    return rec(len(a), len(b))


def brute_force_oracle(a, b, kind: MeasureKind, epsilon: float = DEFAULT_EDR_EPSILON) -> float:
    if kind == MeasureKind.DFD:
        return dfd_oracle(a, b)
    if kind == MeasureKind.DTW:
        return dtw_oracle(a, b)
    if kind == MeasureKind.HAUSDORFF:
        return hausdorff_oracle(a, b)
    if kind == MeasureKind.EDR:
        return float(edr_oracle(a, b, epsilon))
    raise ValueError(f"unknown measure kind: {kind}")


# ---------------------------------------------------------------------------
# Pairwise matrices

@dataclass
class DistanceMatrix:
    """Dense ground-truth distances between two trajectory id lists."""

    row_ids: list[str]
    col_ids: list[str]
    values: np.ndarray  # (len(row_ids), len(col_ids)), float64
    kind: MeasureKind
    epsilon: float = DEFAULT_EDR_EPSILON

    def row(self, traj_id: str) -> np.ndarray:
        return self.values[self.row_ids.index(traj_id)]

    def lookup(self, row_id: str, col_id: str) -> float:
        return float(self.values[self.row_ids.index(row_id), self.col_ids.index(col_id)])

    def save(self, path):
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<I", _VERSION))
            tag = list(MeasureKind).index(self.kind)
            f.write(struct.pack("<Bd", tag, self.epsilon))
            f.write(struct.pack("<II", len(self.row_ids), len(self.col_ids)))
            for tid in self.row_ids + self.col_ids:
                raw = tid.encode("utf-8")
                f.write(struct.pack("<I", len(raw)))
                f.write(raw)
            f.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @staticmethod
    def load(path) -> "DistanceMatrix":
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != _MAGIC:
                raise ValueError(f"bad distance-matrix magic: {magic!r}")
            (version,) = struct.unpack("<I", f.read(4))
            if version != _VERSION:
                raise ValueError(f"unsupported distance-matrix version {version}, expected {_VERSION}")
            tag, epsilon = struct.unpack("<Bd", f.read(9))
            kind = list(MeasureKind)[tag]
            nrows, ncols = struct.unpack("<II", f.read(8))
            ids = []
            for _ in range(nrows + ncols):
                (ln,) = struct.unpack("<I", f.read(4))
                ids.append(f.read(ln).decode("utf-8"))
            values = np.frombuffer(f.read(nrows * ncols * 8), dtype="<f8").reshape(nrows, ncols).copy()
        return DistanceMatrix(ids[:nrows], ids[nrows:], values, kind, epsilon)


def pairwise_matrix(rows, cols, kind: MeasureKind,
                    epsilon: float = DEFAULT_EDR_EPSILON, threads: int = 1) -> DistanceMatrix:
    """Dense pairwise distances; entries computed independently (optionally threaded)."""
    rows, cols = list(rows), list(cols)
    row_pts = [np.ascontiguousarray(t.points) for t in rows]
    col_pts = [np.ascontiguousarray(t.points) for t in cols]
    values = np.empty((len(rows), len(cols)))

    def fill_row(i):
        for j in range(len(cols)):
            try:
                values[i, j] = trajectory_distance(row_pts[i], col_pts[j], kind, epsilon)
            except Exception as exc:
                raise RuntimeError(f"pairwise entry ({i}, {j}) failed: {exc}") from exc

    if threads > 1:
        # numba kernels release the GIL, so threads parallelize cleanly
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(len(rows))))
    else:
        for i in range(len(rows)):
            fill_row(i)
    return DistanceMatrix([t.traj_id for t in rows], [t.traj_id for t in cols],
                          values, kind, epsilon)
