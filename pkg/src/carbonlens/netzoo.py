"""Per-pixel regression networks: U-Net, Reduced U-Net and MA-Net on a residual encoder.

All three share the same encoder: a full-resolution stem followed by
``encoder_stages`` stride-2 residual stages. Widths double per stage up to
``8 * base_width``. Every network ends in a ReLU so predictions are non-negative.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

CHECKPOINT_FORMAT = "carbonlens-checkpoint"
CHECKPOINT_VERSION = 1
REDUCED_FACTOR = 8


class ModelKind(str, enum.Enum):
    UNET = "UNet"
    REDUCED_UNET = "ReducedUNet"
    MANET = "MANet"


@dataclass(frozen=True)
class ModelConfig:
    kind: ModelKind = ModelKind.MANET
    in_channels: int = 6
    encoder_stages: int = 5
    base_width: int = 16
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.in_channels <= 0:
            raise ValueError(f"in_channels must be positive, got {self.in_channels}")
        min_stages = 3 if self.kind is ModelKind.REDUCED_UNET else 2
        if self.encoder_stages < min_stages:
            raise ValueError(f"{self.kind.value} needs encoder_stages >= {min_stages}")
        if self.base_width < 1:
            raise ValueError("base_width must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["kind"] = self.kind.value
        return d

    @property
    def widths(self) -> list[int]:
        return [self.base_width * 2 ** min(k, 3) for k in range(self.encoder_stages + 1)]

    @property
    def output_stride(self) -> int:
        return REDUCED_FACTOR if self.kind is ModelKind.REDUCED_UNET else 1


def conv_bn_relu(cin, cout, k=3, stride=1):
    return nn.Sequential(
        nn.Conv2d(cin, cout, k, stride=stride, padding=k // 2, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class ResidualBlock(nn.Module):
    def __init__(self, cin, cout, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        self.shortcut = None
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride=stride, bias=False), nn.BatchNorm2d(cout)
            )

    def forward(self, x):
        identity = x if self.shortcut is None else self.shortcut(x)
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + identity)


class Encoder(nn.Module):
    """Returns features at strides 1, 2, ..., 2**stages."""

    def __init__(self, in_channels, widths):
        super().__init__()
        self.stem = ResidualBlock(in_channels, widths[0])
        self.stages = nn.ModuleList(
            ResidualBlock(widths[k - 1], widths[k], stride=2) for k in range(1, len(widths))
        )

    def forward(self, x):
        feats = [self.stem(x)]
        for stage in self.stages:
            feats.append(stage(feats[-1]))
        return feats


class UpBlock(nn.Module):
    def __init__(self, cin, skip, cout):
        super().__init__()
        self.conv1 = conv_bn_relu(cin + skip, cout)
        self.conv2 = conv_bn_relu(cout, cout)

    def forward(self, x, skip):
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        return self.conv2(self.conv1(torch.cat([x, skip], dim=1)))


class UNetDecoder(nn.Module):
    """Mirrors the encoder from the bottleneck up to ``stop_level`` (0 = full resolution)."""

    def __init__(self, widths, stop_level=0):
        super().__init__()
        levels = range(len(widths) - 2, stop_level - 1, -1)
        self.blocks = nn.ModuleList(UpBlock(widths[k + 1], widths[k], widths[k]) for k in levels)
        self.stop_level = stop_level
        self.out_channels = widths[stop_level]

    def forward(self, feats):
        x = feats[-1]
        for block, skip in zip(self.blocks, reversed(feats[self.stop_level : -1])):
            x = block(x, skip)
        return x


class PositionAttention(nn.Module):
    """Position-wise attention block: each location attends over all locations."""

    def __init__(self, channels, key_channels=None):
        super().__init__()
        key_channels = key_channels or max(channels // 8, 4)
        self.query = nn.Conv2d(channels, key_channels, 1)
        self.key = nn.Conv2d(channels, key_channels, 1)
        self.value = nn.Conv2d(channels, channels, 3, padding=1)
        self.out = conv_bn_relu(channels, channels)

    def forward(self, x):
        b, c, h, w = x.shape
        q = self.query(x).flatten(2).transpose(1, 2)
        k = self.key(x).flatten(2)
        attn = torch.softmax(torch.bmm(q, k), dim=-1)
        v = self.value(x).flatten(2)
        ctx = torch.bmm(v, attn.transpose(1, 2)).view(b, c, h, w)
        return self.out(x + ctx)


class ChannelGate(nn.Module):
    def __init__(self, channels, reduction=8):
        super().__init__()
        hidden = max(channels // reduction, 2)
        self.fc = nn.Sequential(
            nn.AdaptiveAvgPool2d(1),
            nn.Conv2d(channels, hidden, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, channels, 1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        return self.fc(x)


class FusionAttentionBlock(nn.Module):
    """Multi-scale fusion: channel attention from both the upsampled and the skip features."""

    def __init__(self, cin, skip, cout):
        super().__init__()
        self.high = nn.Sequential(conv_bn_relu(cin, cin), conv_bn_relu(cin, skip, k=1))
        self.gate_high = ChannelGate(skip)
        self.gate_low = ChannelGate(skip)
        self.conv1 = conv_bn_relu(2 * skip, cout)
        self.conv2 = conv_bn_relu(cout, cout)

    def forward(self, x, skip):
        x = F.interpolate(self.high(x), scale_factor=2, mode="nearest")
        x = x * (self.gate_high(x) + self.gate_low(skip))
        return self.conv2(self.conv1(torch.cat([x, skip], dim=1)))


class MANetDecoder(nn.Module):
    def __init__(self, widths):
        super().__init__()
        self.attention = PositionAttention(widths[-1])
        self.blocks = nn.ModuleList(
            FusionAttentionBlock(widths[k + 1], widths[k], widths[k])
            for k in range(len(widths) - 2, -1, -1)
        )
        self.out_channels = widths[0]

    def forward(self, feats):
        x = self.attention(feats[-1])
        for block, skip in zip(self.blocks, reversed(feats[:-1])):
            x = block(x, skip)
        return x


class RegressionNet(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.config = cfg
        widths = cfg.widths
        self.encoder = Encoder(cfg.in_channels, widths)
        if cfg.kind is ModelKind.MANET:
            self.decoder = MANetDecoder(widths)
        elif cfg.kind is ModelKind.REDUCED_UNET:
            self.decoder = UNetDecoder(widths, stop_level=3)
        else:
            self.decoder = UNetDecoder(widths)
        self.head = nn.Conv2d(self.decoder.out_channels, 1, 3, padding=1)
        # start with positive outputs so the final ReLU passes gradient
        nn.init.constant_(self.head.bias, 1.0)

    def check_input(self, x: torch.Tensor):
        cfg = self.config
        if x.dim() != 4:
            raise ValueError(f"expected a B x C x H x W batch, got {x.dim()} dimensions")
        if x.shape[1] != cfg.in_channels:
            raise ValueError(f"channel dimension is {x.shape[1]}, model expects {cfg.in_channels}")
        div = 2**cfg.encoder_stages
        for name, size in (("height", x.shape[2]), ("width", x.shape[3])):
            if size % div:
                raise ValueError(f"{name} {size} is not divisible by {div}")

    def forward(self, x):
        self.check_input(x)
        return F.relu(self.head(self.decoder(self.encoder(x))))


def build_model(cfg: ModelConfig) -> RegressionNet:
    """Construct a network with parameters drawn deterministically from ``cfg.seed``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        return RegressionNet(cfg)


def forward(model: RegressionNet, batch) -> torch.Tensor:
    x = torch.as_tensor(batch, dtype=next(model.parameters()).dtype)
    return model(x)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def save_checkpoint(path, model: RegressionNet, history=None, extra=None) -> Path:
    path = Path(path)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": model.config.kind.value,
        "config": model.config.to_dict(),
        "state_dict": {k: v.detach().cpu().clone() for k, v in model.state_dict().items()},
        "history": list(history or []),
        "extra": dict(extra or {}),
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path) -> tuple[RegressionNet, dict]:
    """Rebuild a model from a checkpoint; returns the model and the remaining payload."""
    path = Path(path)
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a carbonlens checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    model = build_model(ModelConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload
