"""Trajectory representation, dataset statistics, normalization and rasterization.

Coordinates are WGS84 degrees (lat, lon). Grid cells are half-open
[low, high) with the maximum MBR edge binned into the last cell, so every
in-MBR point maps to exactly one cell. The meters->degrees conversion uses
an equirectangular approximation at the MBR mid-latitude, which is accurate
enough for the city-scale extents this toolkit targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

METERS_PER_DEGREE = 111_320.0


@dataclass(frozen=True)
class Mbr:
    """Minimum bounding rectangle in degrees."""

    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise ValueError(f"invalid MBR: {self}")

    @staticmethod
    def of_points(points: np.ndarray) -> "Mbr":
        return Mbr(
            float(points[:, 0].min()), float(points[:, 0].max()),
            float(points[:, 1].min()), float(points[:, 1].max()),
        )


@dataclass(frozen=True)
class NormalizationParams:
    """Per-axis dataset extremes for min-max normalization."""

    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if self.max_lat <= self.min_lat:
            raise ValueError("degenerate lat axis: max == min")
        if self.max_lon <= self.min_lon:
            raise ValueError("degenerate lon axis: max == min")


@dataclass
class Trajectory:
    """Ordered (lat, lon) point sequence with an opaque id."""

    traj_id: str
    points: np.ndarray  # shape (l, 2), float64, columns (lat, lon)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError(f"points must be (l, 2), got {self.points.shape}")
        if len(self.points) < 1:
            raise ValueError(f"trajectory {self.traj_id!r} is empty")
        if not np.isfinite(self.points).all():
            raise ValueError(f"trajectory {self.traj_id!r} has non-finite coordinates")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RasterConfig:
    """Grid geometry derived from a dataset MBR and a cell width in meters."""

    mbr: Mbr
    delta_m: float
    rows: int
    cols: int
    m_per_deg_lat: float
    m_per_deg_lon: float

    @staticmethod
    def from_mbr(mbr: Mbr, delta_m: float) -> "RasterConfig":
        if delta_m <= 0:
            raise ValueError("grid width must be positive")
        mid_lat = 0.5 * (mbr.min_lat + mbr.max_lat)
        m_lat = METERS_PER_DEGREE
        m_lon = METERS_PER_DEGREE * math.cos(math.radians(mid_lat))
        rows = max(1, math.ceil((mbr.max_lat - mbr.min_lat) * m_lat / delta_m))
        cols = max(1, math.ceil((mbr.max_lon - mbr.min_lon) * m_lon / delta_m))
        return RasterConfig(mbr, delta_m, rows, cols, m_lat, m_lon)


@dataclass
class BinaryImage:
    """Single-channel 0/1 raster of a trajectory."""

    pixels: np.ndarray  # (rows, cols), uint8 in {0, 1}

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    @property
    def nonzero_count(self) -> int:
        return int(self.pixels.sum())


def compute_dataset_stats(trajectories) -> tuple[Mbr, NormalizationParams, int]:
    """Dataset MBR, normalization extremes and maximum length in one pass."""
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("empty dataset")
    all_points = np.concatenate([t.points for t in trajectories])
    mbr = Mbr.of_points(all_points)
    params = NormalizationParams(mbr.min_lat, mbr.max_lat, mbr.min_lon, mbr.max_lon)
    max_length = max(len(t) for t in trajectories)
    return mbr, params, max_length


def normalize(trajectory: Trajectory, params: NormalizationParams) -> Trajectory:
    """Min-max normalize coordinates; in-MBR points land in [0, 1]^2."""
    pts = trajectory.points
    out = np.empty_like(pts)
    out[:, 0] = (pts[:, 0] - params.min_lat) / (params.max_lat - params.min_lat)
    out[:, 1] = (pts[:, 1] - params.min_lon) / (params.max_lon - params.min_lon)
    return Trajectory(trajectory.traj_id, out)


def denormalize(trajectory: Trajectory, params: NormalizationParams) -> Trajectory:
    pts = trajectory.points
    out = np.empty_like(pts)
    out[:, 0] = pts[:, 0] * (params.max_lat - params.min_lat) + params.min_lat
    out[:, 1] = pts[:, 1] * (params.max_lon - params.min_lon) + params.min_lon
    return Trajectory(trajectory.traj_id, out)


def rasterize(trajectory: Trajectory, config: RasterConfig) -> BinaryImage:
    """Mark every grid cell visited by a trajectory point.

    Out-of-MBR points are clamped to the border cell so queries always embed.
    """
    mbr = config.mbr
    pts = trajectory.points
    cell_lat = config.delta_m / config.m_per_deg_lat
    cell_lon = config.delta_m / config.m_per_deg_lon
    r = np.floor((pts[:, 0] - mbr.min_lat) / cell_lat).astype(np.int64)
    c = np.floor((pts[:, 1] - mbr.min_lon) / cell_lon).astype(np.int64)
    np.clip(r, 0, config.rows - 1, out=r)
    np.clip(c, 0, config.cols - 1, out=c)
    pixels = np.zeros((config.rows, config.cols), dtype=np.uint8)
    pixels[r, c] = 1
    return BinaryImage(pixels)


def mbr_distance(a: Mbr, b: Mbr) -> float:
    """Minimum Euclidean distance between two rectangles (0 if they intersect)."""
    gap_lat = max(0.0, max(a.min_lat, b.min_lat) - min(a.max_lat, b.max_lat))
    gap_lon = max(0.0, max(a.min_lon, b.min_lon) - min(a.max_lon, b.max_lon))
    return math.hypot(gap_lat, gap_lon)


def pad_to_length(points: np.ndarray, target_len: int) -> np.ndarray:
    """Pad a point sequence to target_len by repeating the final point."""
    points = np.asarray(points, dtype=np.float64)
    if target_len < len(points):
        raise ValueError(f"target length {target_len} < trajectory length {len(points)}")
    if target_len == len(points):
        return points.copy()
    tail = np.repeat(points[-1:], target_len - len(points), axis=0)
    return np.concatenate([points, tail])
