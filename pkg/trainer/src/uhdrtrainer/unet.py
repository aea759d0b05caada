"""Encoder-decoder network for both training stages.

A plain five-scale U-Net: two 3x3 convolutions with LeakyReLU per
scale, max-pool downsampling, transposed-convolution upsampling, skip
concatenation, and a 1x1 head. The ratio estimator puts a softplus on
the head so predicted brightening maps stay positive; the denoiser
leaves it linear.

The amplification encoding enters through injection blocks attached to
the encoder scales. Each block maps the encoding to the scale's
feature width with a pointwise MLP, adds it to the features, and feeds
the sum through a convolutional residual branch whose final convolution
is zero-initialized, so at initialization the injected path contributes
exactly nothing and the network behaves as if no encoding were given.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn


@dataclass(frozen=True)
class UNetConfig:
    depth: int = 5
    base_channels: int = 32
    in_channels: int = 4
    out_channels: int = 4
    slope: float = 0.2

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if min(self.base_channels, self.in_channels, self.out_channels) < 1:
            raise ValueError("channel counts must be positive")

    @property
    def multiple(self) -> int:
        """Spatial size the input is padded up to a multiple of."""
        return 2**self.depth


class ConvBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, slope: float):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.act = nn.LeakyReLU(slope, inplace=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.conv2(self.act(self.conv1(x))))


class InjectionBlock(nn.Module):
    """Adds encoding information to one scale's features.

    The residual branch ends in a zero-initialized convolution, so a
    freshly constructed block is an exact identity on the features.
    """

    def __init__(self, enc_channels: int, feat_channels: int, slope: float):
        super().__init__()
        self.mlp = nn.Sequential(
            nn.Conv2d(enc_channels, feat_channels, 1),
            nn.LeakyReLU(slope, inplace=True),
            nn.Conv2d(feat_channels, feat_channels, 1),
        )
        self.body = nn.Conv2d(feat_channels, feat_channels, 3, padding=1)
        self.act = nn.LeakyReLU(slope, inplace=True)
        self.out = nn.Conv2d(feat_channels, feat_channels, 3, padding=1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, feats: torch.Tensor, enc: torch.Tensor) -> torch.Tensor:
        mixed = feats + self.mlp(enc)
        return feats + self.out(self.act(self.body(mixed)))


class UNet(nn.Module):
    """U-Net with optional per-scale encoding injection.

    head: "linear" for unconstrained output, "softplus" for strictly
    positive output.
    enc_channels: channel count of the encoding tensor, or None to
    build a network without injection blocks.
    """

    def __init__(
        self,
        config: UNetConfig = UNetConfig(),
        head: str = "linear",
        enc_channels: int | None = None,
    ):
        super().__init__()
        if head not in ("linear", "softplus"):
            raise ValueError(f"unknown head {head!r}")
        self.config = config
        self.head_kind = head
        self.enc_channels = enc_channels

        widths = [config.base_channels * 2**i for i in range(config.depth)]
        self.down = nn.ModuleList()
        c_prev = config.in_channels
        for c in widths:
            self.down.append(ConvBlock(c_prev, c, config.slope))
            c_prev = c

        if enc_channels is not None:
            self.inject = nn.ModuleList(
                InjectionBlock(enc_channels, c, config.slope) for c in widths
            )
        else:
            self.inject = None

        self.up_convs = nn.ModuleList()
        self.up_blocks = nn.ModuleList()
        for c in reversed(widths[1:]):
            self.up_convs.append(nn.ConvTranspose2d(c, c // 2, 2, stride=2))
            self.up_blocks.append(ConvBlock(c, c // 2, config.slope))

        self.head = nn.Conv2d(widths[0], config.out_channels, 1)

    def forward(
        self, x: torch.Tensor, encoding: torch.Tensor | None = None
    ) -> torch.Tensor:
        if encoding is not None and self.inject is None:
            raise ValueError("model was built without injection blocks")
        h, w = x.shape[-2:]
        m = self.config.multiple
        pad_h = (m - h % m) % m
        pad_w = (m - w % m) % m
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
            if encoding is not None:
                encoding = F.pad(encoding, (0, pad_w, 0, pad_h), mode="replicate")

        skips = []
        feats = x
        for i, block in enumerate(self.down):
            if i > 0:
                feats = F.max_pool2d(feats, 2)
            feats = block(feats)
            if encoding is not None:
                enc = F.adaptive_avg_pool2d(encoding, feats.shape[-2:])
                feats = self.inject[i](feats, enc)
            skips.append(feats)

        for up, block, skip in zip(self.up_convs, self.up_blocks, reversed(skips[:-1])):
            feats = up(feats)
            feats = block(torch.cat([skip, feats], dim=1))

        out = self.head(feats)
        if self.head_kind == "softplus":
            out = F.softplus(out)
        return out[..., :h, :w]
