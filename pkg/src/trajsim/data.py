"""Dataset ingestion, splits, synthetic generation and embedding files.

Trajectory text format: one trajectory per line,
``<id>\\t<lon1>,<lat1>;<lon2>,<lat2>;...`` (UTF-8, '.' decimal separator).
Ingestion drops trajectories shorter than a minimum record count and can
restrict to a lat/lon area.
"""

from __future__ import annotations

import struct

import numpy as np

from .geo import Mbr, Trajectory, pad_to_length, rasterize

_EMB_MAGIC = b"TSEM"
_EMB_VERSION = 1


def parse_trajectory_line(line: str, lineno: int) -> Trajectory:
    try:
        traj_id, _, body = line.partition("\t")
        if not body:
            raise ValueError("missing point list")
        points = []
        for token in body.split(";"):
            lon_s, lat_s = token.split(",")
            points.append((float(lat_s), float(lon_s)))
        return Trajectory(traj_id, np.array(points))
    except Exception as exc:
        raise ValueError(f"line {lineno}: cannot parse trajectory record: {exc}") from exc


def read_trajectories(path, min_length: int = 10,
                      area: Mbr | None = None) -> list[Trajectory]:
    """Parse a trajectory file, applying the length and optional area filters."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            traj = parse_trajectory_line(line, lineno)
            if len(traj) < min_length:
                continue
            if area is not None:
                pts = traj.points
                inside = ((pts[:, 0] >= area.min_lat) & (pts[:, 0] <= area.max_lat)
                          & (pts[:, 1] >= area.min_lon) & (pts[:, 1] <= area.max_lon))
                if not inside.all():
                    continue
            out.append(traj)
    if not out:
        raise ValueError(f"no trajectories survive filtering in {path}")
    return out


def write_trajectories(trajectories, path):
    with open(path, "w", encoding="utf-8") as f:
        for t in trajectories:
            body = ";".join(f"{lon:.10g},{lat:.10g}" for lat, lon in t.points)
            f.write(f"{t.traj_id}\t{body}\n")


def split_dataset(trajectories, train: int, query: int, candidate: int,
                  seed: int):
    """Deterministic seeded shuffle into train/query/candidate lists."""
    trajectories = sorted(trajectories, key=lambda t: t.traj_id)
    if train + query + candidate > len(trajectories):
        raise ValueError(
            f"split sizes {train}+{query}+{candidate} exceed dataset size {len(trajectories)}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(trajectories))
    picked = [trajectories[i] for i in order]
    return (picked[:train],
            picked[train : train + query],
            picked[train + query : train + query + candidate])


def generate_synthetic(count: int, min_length: int, max_length: int,
                       mbr: Mbr, seed: int, id_prefix: str = "syn") -> list[Trajectory]:
    """Seeded random walks inside a fake MBR, clipped to its extent."""
    if count < 1 or min_length < 1 or max_length < min_length:
        raise ValueError("invalid synthetic dataset parameters")
    rng = np.random.default_rng(seed)
    lat_span = mbr.max_lat - mbr.min_lat
    lon_span = mbr.max_lon - mbr.min_lon
    step = 0.01 * np.array([lat_span, lon_span])
    out = []
    for i in range(count):
        length = int(rng.integers(min_length, max_length + 1))
        start = np.array([
            rng.uniform(mbr.min_lat + 0.1 * lat_span, mbr.max_lat - 0.1 * lat_span),
            rng.uniform(mbr.min_lon + 0.1 * lon_span, mbr.max_lon - 0.1 * lon_span),
        ])
        steps = rng.normal(0.0, 1.0, size=(length - 1, 2)) * step
        walk = np.concatenate([start[None], start[None] + np.cumsum(steps, axis=0)])
        walk[:, 0] = np.clip(walk[:, 0], mbr.min_lat, mbr.max_lat)
        walk[:, 1] = np.clip(walk[:, 1], mbr.min_lon, mbr.max_lon)
        out.append(Trajectory(f"{id_prefix}{i:05d}", walk))
    return out


def prepare_encoder_inputs(trajectories, norm_params, raster_config,
                           padded_length: int) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per trajectory: ([2, padded_length] normalized sequence, binary image)."""
    from .geo import normalize

    out = {}
    for t in trajectories:
        seq = pad_to_length(normalize(t, norm_params).points, padded_length).T
        image = rasterize(t, raster_config).pixels.astype(np.float64)
        out[t.traj_id] = (np.ascontiguousarray(seq), image)
    return out


def save_embeddings(path, ids, matrix: np.ndarray):
    """Embedding file: magic TSEM, version, count, dim, ids, row-major f64."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError(f"embedding matrix shape {matrix.shape} does not match {len(ids)} ids")
    with open(path, "wb") as f:
        f.write(_EMB_MAGIC)
        f.write(struct.pack("<III", _EMB_VERSION, matrix.shape[0], matrix.shape[1]))
        for tid in ids:
            raw = tid.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
        f.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def load_embeddings(path) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _EMB_MAGIC:
            raise ValueError(f"bad embedding-file magic: {magic!r}")
        version, count, dim = struct.unpack("<III", f.read(12))
        if version != _EMB_VERSION:
            raise ValueError(f"unsupported embedding-file version {version}, "
                             f"expected {_EMB_VERSION}")
        ids = []
        for _ in range(count):
            (ln,) = struct.unpack("<I", f.read(4))
            ids.append(f.read(ln).decode("utf-8"))
        matrix = np.frombuffer(f.read(count * dim * 8), dtype="<f8").reshape(count, dim).copy()
    return ids, matrix
