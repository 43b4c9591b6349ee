"""Dual-branch convolutional trajectory encoder.

The sequential branch lifts each normalized (lat, lon) point to
``point_embed_dim`` channels with a per-point affine+ReLU, then runs a stack
of residual blocks (conv1d -> ReLU -> +skip -> maxpool). The geo-distribution
branch runs the binary raster image through residual conv2d blocks with
average pooling. Both branch outputs are flattened, concatenated and fused by
a two-layer MLP into the final embedding vector.

Residual join happens before pooling; the first block of each branch uses a
learned 1x1 channel projection for the skip, later blocks use identity.
Convolutions carry no bias so the same numeric path doubles as the subject of
the distance-bound analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import nn


def pooled_length(length: int, times: int) -> int:
    """Length after `times` rounds of window-2 stride-2 pooling with keep-1 rule."""
    for _ in range(times):
        length = length // 2 if length >= 2 else 1
    return length


@dataclass(frozen=True)
class ModelConfig:
    padded_length: int
    image_rows: int
    image_cols: int
    conv1d_blocks: int
    point_embed_dim: int = 16
    conv1d_channels: int = 32
    conv2d_blocks: int = 4
    conv2d_channels: int = 4
    embed_dim: int = 128
    fusion_hidden_dim: int = 128
    seed: int = 0

    def __post_init__(self):
        dims = (self.padded_length, self.image_rows, self.image_cols,
                self.conv1d_blocks, self.point_embed_dim, self.conv1d_channels,
                self.conv2d_blocks, self.conv2d_channels, self.embed_dim,
                self.fusion_hidden_dim)
        if any(d < 1 for d in dims):
            raise ValueError(f"all config dimensions must be >= 1, got {self}")

    @staticmethod
    def for_dataset(max_length: int, image_rows: int, image_cols: int,
                    seed: int = 0, **overrides) -> "ModelConfig":
        """Blocks in the sequential branch scale as floor(log2(max length))."""
        if max_length < 2:
            raise ValueError("dataset max length must be >= 2")
        return ModelConfig(
            padded_length=max_length,
            image_rows=image_rows,
            image_cols=image_cols,
            conv1d_blocks=int(math.floor(math.log2(max_length))),
            seed=seed,
            **overrides,
        )

    @property
    def v1d_dim(self) -> int:
        return self.conv1d_channels * pooled_length(self.padded_length, self.conv1d_blocks)

    @property
    def v2d_dim(self) -> int:
        return (self.conv2d_channels
                * pooled_length(self.image_rows, self.conv2d_blocks)
                * pooled_length(self.image_cols, self.conv2d_blocks))


def _glorot(rng, shape, fan_in, fan_out):
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def init_params(config: ModelConfig) -> dict[str, nn.Parameter]:
    """Seeded Glorot-uniform weights; biases start at zero."""
    rng = np.random.default_rng(config.seed)
    params: dict[str, nn.Parameter] = {}

    def param(name, data):
        params[name] = nn.Parameter(name, data)

    d = config.point_embed_dim
    param("point_w", _glorot(rng, (d, 2), 2, d))
    param("point_b", np.zeros(d))

    ch1 = config.conv1d_channels
    for i in range(config.conv1d_blocks):
        c_in = d if i == 0 else ch1
        param(f"c1_{i}_kernel", _glorot(rng, (ch1, c_in, 3), c_in * 3, ch1 * 3))
    param("c1_skip_w", _glorot(rng, (ch1, d), d, ch1))

    ch2 = config.conv2d_channels
    for i in range(config.conv2d_blocks):
        c_in = 1 if i == 0 else ch2
        param(f"c2_{i}_kernel", _glorot(rng, (ch2, c_in, 3, 3), c_in * 9, ch2 * 9))
    param("c2_skip_w", _glorot(rng, (ch2, 1), 1, ch2))

    fused_in = config.v1d_dim + config.v2d_dim
    hidden = config.fusion_hidden_dim
    param("fuse_w1", _glorot(rng, (hidden, fused_in), fused_in, hidden))
    param("fuse_b1", np.zeros(hidden))
    param("fuse_w2", _glorot(rng, (config.embed_dim, hidden), hidden, config.embed_dim))
    param("fuse_b2", np.zeros(config.embed_dim))
    return params


class Encoder:
    """Bundles a config with its parameters; encode() is read-only on both."""

    def __init__(self, config: ModelConfig, params: dict[str, nn.Parameter] | None = None):
        self.config = config
        self.params = params if params is not None else init_params(config)

    def parameters(self) -> list[nn.Parameter]:
        return [self.params[k] for k in sorted(self.params)]

    def encode_1d(self, seq: np.ndarray) -> nn.Tensor:
        """seq: [2, padded_length] normalized coordinates -> flattened branch features."""
        cfg = self.config
        if seq.shape != (2, cfg.padded_length):
            raise ValueError(f"expected sequence shape (2, {cfg.padded_length}), got {seq.shape}")
        p = self.params
        x = nn.relu(nn.linear_cols(nn.Tensor(seq), p["point_w"], p["point_b"]))
        for i in range(cfg.conv1d_blocks):
            h = nn.relu(nn.conv1d(x, p[f"c1_{i}_kernel"]))
            skip = nn.channel_proj(x, p["c1_skip_w"]) if i == 0 else x
            x = nn.maxpool1d(nn.add(h, skip))
        return nn.flatten(x)

    def encode_2d(self, image: np.ndarray) -> nn.Tensor:
        """image: [rows, cols] binary raster -> flattened branch features."""
        cfg = self.config
        if image.shape != (cfg.image_rows, cfg.image_cols):
            raise ValueError(
                f"expected image shape ({cfg.image_rows}, {cfg.image_cols}), got {image.shape}"
            )
        p = self.params
        x = nn.Tensor(np.asarray(image, dtype=np.float64)[None, :, :])
        for i in range(cfg.conv2d_blocks):
            h = nn.relu(nn.conv2d(x, p[f"c2_{i}_kernel"]))
            skip = nn.channel_proj(x, p["c2_skip_w"]) if i == 0 else x
            x = nn.avgpool2d(nn.add(h, skip))
        return nn.flatten(x)

    def encode(self, seq: np.ndarray, image: np.ndarray) -> nn.Tensor:
        """Fused embedding of one trajectory (graph-recording; use .data for inference)."""
        v1 = self.encode_1d(seq)
        v2 = self.encode_2d(image)
        p = self.params
        h = nn.relu(nn.affine(nn.concat(v1, v2), p["fuse_w1"], p["fuse_b1"]))
        return nn.affine(h, p["fuse_w2"], p["fuse_b2"])

    def encode_array(self, seq: np.ndarray, image: np.ndarray) -> np.ndarray:
        return self.encode(seq, image).data


def save_model(encoder: Encoder, path):
    """key=value config header, blank line, then the binary parameter block."""
    with open(path, "wb") as f:
        header = "".join(f"{k}={v}\n" for k, v in sorted(asdict(encoder.config).items()))
        f.write(header.encode("utf-8"))
        f.write(b"\n")
        nn.save_params(None, encoder.parameters(), fileobj=f)


def load_model(path) -> Encoder:
    with open(path, "rb") as f:
        raw = f.read()
    sep = raw.find(b"\n\n")
    if sep < 0:
        raise ValueError("model file missing config header terminator")
    fields = {}
    for line in raw[:sep].decode("utf-8").splitlines():
        key, _, value = line.partition("=")
        fields[key] = int(value)
    config = ModelConfig(**fields)
    import io

    arrays = nn.load_params(None, fileobj=io.BytesIO(raw[sep + 2 :]))
    expected = init_params(config)
    if set(arrays) != set(expected):
        raise ValueError("model file parameters do not match its config")
    params = {}
    for name, tensor in expected.items():
        if arrays[name].shape != tensor.data.shape:
            raise ValueError(f"parameter {name} has shape {arrays[name].shape}, "
                             f"expected {tensor.data.shape}")
        params[name] = nn.Parameter(name, arrays[name])
    return Encoder(config, params)
