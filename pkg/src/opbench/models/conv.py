"""Convolutional baselines: residual stack and U-shaped encoder-decoder.

Both work on 1D and 2D grids (channels-last at the interface, permuted
to torch's channels-first internally).  The UNet pads non-divisible
resolutions by edge replication and crops the output back, unless
auto_pad is disabled, in which case the required padding is named in
the error.
"""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ShapeError


def _conv(ndim: int):
    return nn.Conv1d if ndim == 1 else nn.Conv2d


def _to_first(x, ndim):
    return x.permute(0, 2, 1) if ndim == 1 else x.permute(0, 3, 1, 2)


def _to_last(x, ndim):
    return x.permute(0, 2, 1) if ndim == 1 else x.permute(0, 2, 3, 1)


class ResidualBlock(nn.Module):
    """conv3 -> GELU -> conv3 on the branch; identity skip outside it."""

    def __init__(self, width: int, ndim: int):
        super().__init__()
        conv = _conv(ndim)
        self.branch = nn.Sequential(
            conv(width, width, 3, padding=1),
            nn.GELU(),
            conv(width, width, 3, padding=1),
        )

    def forward(self, x):
        return x + self.branch(x)


class ResNet(nn.Module):
    def __init__(self, c_in: int, c_out: int, width: int, depth: int, ndim: int):
        super().__init__()
        conv = _conv(ndim)
        self.ndim = ndim
        self.stem = conv(c_in, width, 1)
        self.blocks = nn.Sequential(*[ResidualBlock(width, ndim) for _ in range(depth)])
        self.head = conv(width, c_out, 1)

    def forward(self, x):
        x = _to_first(x, self.ndim)
        x = self.head(self.blocks(self.stem(x)))
        return _to_last(x, self.ndim)


class DoubleConv(nn.Module):
    def __init__(self, c_in: int, c_out: int, ndim: int):
        super().__init__()
        conv = _conv(ndim)
        self.net = nn.Sequential(
            conv(c_in, c_out, 3, padding=1),
            nn.GELU(),
            conv(c_out, c_out, 3, padding=1),
            nn.GELU(),
        )

    def forward(self, x):
        return self.net(x)


class UNet(nn.Module):
    """Encoder-decoder with skip concatenation at matching scales.

    depth = number of down/upsampling levels; channels double per level
    capped at 4x width.  Down/upsampling via strided conv and transposed
    conv (smooth everywhere, so finite-difference gradient checks hold).
    """

    def __init__(self, c_in, c_out, width, levels, ndim, auto_pad=True):
        super().__init__()
        conv = _conv(ndim)
        tconv = nn.ConvTranspose1d if ndim == 1 else nn.ConvTranspose2d
        self.ndim = ndim
        self.levels = levels
        self.auto_pad = auto_pad

        widths = [min(width * 2**i, 4 * width) for i in range(levels + 1)]
        self.inc = DoubleConv(c_in, widths[0], ndim)
        self.downs = nn.ModuleList()
        self.encs = nn.ModuleList()
        for i in range(levels):
            self.downs.append(conv(widths[i], widths[i + 1], 2, stride=2))
            self.encs.append(DoubleConv(widths[i + 1], widths[i + 1], ndim))
        self.ups = nn.ModuleList()
        self.decs = nn.ModuleList()
        for i in reversed(range(levels)):
            self.ups.append(tconv(widths[i + 1], widths[i], 2, stride=2))
            self.decs.append(DoubleConv(widths[i] * 2, widths[i], ndim))
        self.head = conv(widths[0], c_out, 1)

    def _pad(self, x):
        m = 2**self.levels
        spatial = x.shape[2:]
        pads = [(m - s % m) % m for s in spatial]
        if all(p == 0 for p in pads):
            return x, spatial
        if not self.auto_pad:
            need = " x ".join(str(s + p) for s, p in zip(spatial, pads))
            raise ShapeError(
                f"resolution {' x '.join(map(str, spatial))} not divisible by "
                f"2^{self.levels}; pad to {need} or enable auto_pad"
            )
        # F.pad order is last-dim-first: (left, right[, top, bottom])
        flat = []
        for p in reversed(pads):
            flat += [0, p]
        return F.pad(x, flat, mode="replicate"), spatial

    def forward(self, x):
        x = _to_first(x, self.ndim)
        x, spatial = self._pad(x)
        h = self.inc(x)
        skips = [h]
        for down, enc in zip(self.downs, self.encs):
            h = enc(down(h))
            skips.append(h)
        for i, (up, dec) in enumerate(zip(self.ups, self.decs)):
            h = up(h)
            h = dec(torch.cat([h, skips[self.levels - 1 - i]], dim=1))
        h = self.head(h)
        h = h[(...,) + tuple(slice(0, s) for s in spatial)]
        return _to_last(h, self.ndim)


def build_resnet(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return ResNet(c_in, c_out, spec.width, spec.depth, grid.ndim)


def build_unet(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return UNet(c_in, c_out, spec.width, spec.depth, grid.ndim, spec.option("auto_pad"))
