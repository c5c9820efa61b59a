"""Wavelet neural operator: channel mixing on Haar coefficients.

The Haar pair used throughout (s = sqrt(1/2)):
    coarse = (even + odd) * s,  detail = (even - odd) * s
which is orthonormal, so decompose -> reconstruct is exact.  The
learned map mixes channels independently at every retained coarse
coefficient (and, optionally, at the last level's detail coefficients);
all other details are zeroed.  Coefficient counts follow the training
resolution, so this family is deliberately resolution-bound.
"""
from __future__ import annotations

import math

import torch
import torch.nn as nn

from ..errors import ConfigurationError, ShapeError
from .layers import MLP

_S = math.sqrt(0.5)


def haar_dwt_1d(x):
    """One level along the last axis; returns (coarse, detail)."""
    if x.shape[-1] % 2:
        raise ConfigurationError(f"axis length {x.shape[-1]} is odd")
    even, odd = x[..., 0::2], x[..., 1::2]
    return (even + odd) * _S, (even - odd) * _S


def haar_idwt_1d(coarse, detail):
    even = (coarse + detail) * _S
    odd = (coarse - detail) * _S
    out = torch.stack([even, odd], dim=-1)
    return out.reshape(*coarse.shape[:-1], 2 * coarse.shape[-1])


def haar_dwt_2d(x):
    """One separable level on the last two axes; returns (ll, lh, hl, hh)."""
    a, d = haar_dwt_1d(x)
    a, d = a.transpose(-2, -1), d.transpose(-2, -1)
    ll, hl = haar_dwt_1d(a)
    lh, hh = haar_dwt_1d(d)
    return (
        ll.transpose(-2, -1),
        lh.transpose(-2, -1),
        hl.transpose(-2, -1),
        hh.transpose(-2, -1),
    )


def haar_idwt_2d(ll, lh, hl, hh):
    a = haar_idwt_1d(ll.transpose(-2, -1), hl.transpose(-2, -1))
    d = haar_idwt_1d(lh.transpose(-2, -1), hh.transpose(-2, -1))
    return haar_idwt_1d(a.transpose(-2, -1), d.transpose(-2, -1))


class CoefficientMix(nn.Module):
    """Per-coefficient channel mixing, shape (coeffs..., C_in, C_out)."""

    def __init__(self, coeff_shape, c_in, c_out):
        super().__init__()
        scale = 1.0 / (c_in * c_out)
        self.weight = nn.Parameter(
            scale * torch.randn(*coeff_shape, c_in, c_out)
        )

    def forward(self, z):
        if z.ndim == 3:
            return torch.einsum("nxc,xcd->nxd", z, self.weight)
        return torch.einsum("nxyc,xycd->nxyd", z, self.weight)


class WaveletLayer(nn.Module):
    def __init__(self, coarse_shape, width, ndim, levels, keep_detail):
        super().__init__()
        self.ndim = ndim
        self.levels = levels
        self.keep_detail = keep_detail
        self.coarse = CoefficientMix(coarse_shape, width, width)
        if keep_detail:
            n_bands = 1 if ndim == 1 else 3
            self.details = nn.ModuleList(
                [CoefficientMix(coarse_shape, width, width) for _ in range(n_bands)]
            )

    def forward(self, h):
        # channels-last in; transforms run on trailing spatial axes, so
        # move channels in front of them.
        perm = (0, self.ndim + 1) + tuple(range(1, self.ndim + 1))
        z = h.permute(perm)
        stack = []
        for _ in range(self.levels):
            if self.ndim == 1:
                z, d = haar_dwt_1d(z)
                stack.append((d,))
            else:
                z, lh, hl, hh = haar_dwt_2d(z)
                stack.append((lh, hl, hh))

        back = (0,) + tuple(range(2, self.ndim + 2)) + (1,)
        z = self.coarse(z.permute(back)).permute(perm)
        processed = []
        for li, bands in enumerate(stack):
            if li == len(stack) - 1 and self.keep_detail:
                bands = tuple(
                    mix(d.permute(back)).permute(perm)
                    for mix, d in zip(self.details, bands)
                )
            else:
                bands = tuple(torch.zeros_like(d) for d in bands)
            processed.append(bands)

        for bands in reversed(processed):
            if self.ndim == 1:
                z = haar_idwt_1d(z, bands[0])
            else:
                z = haar_idwt_2d(z, *bands)
        return z.permute(back)


class WNO(nn.Module):
    def __init__(self, c_in, c_out, width, depth, levels, keep_detail, grid_shape):
        super().__init__()
        m = 2**levels
        for n in grid_shape:
            if n % m:
                raise ConfigurationError(
                    f"resolution {n} not divisible by 2^{levels}"
                )
        self.grid_shape = tuple(grid_shape)
        coarse_shape = tuple(n // m for n in grid_shape)
        ndim = len(grid_shape)
        self.lift = nn.Linear(c_in, width)
        self.layers = nn.ModuleList(
            [
                WaveletLayer(coarse_shape, width, ndim, levels, keep_detail)
                for _ in range(depth)
            ]
        )
        self.bypass = nn.ModuleList([nn.Linear(width, width) for _ in range(depth)])
        self.proj = MLP(width, c_out, 4 * width, 1)

    def forward(self, x):
        ndim = len(self.grid_shape)
        if tuple(x.shape[1 : 1 + ndim]) != self.grid_shape:
            raise ShapeError(
                f"built for resolution {self.grid_shape}, got "
                f"{tuple(x.shape[1:1 + ndim])}"
            )
        h = self.lift(x)
        for i, (layer, lin) in enumerate(zip(self.layers, self.bypass)):
            h = layer(h) + lin(h)
            if i < len(self.layers) - 1:
                h = torch.nn.functional.gelu(h)
        return self.proj(h)


def build(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return WNO(
        c_in,
        c_out,
        spec.width,
        spec.depth,
        spec.option("levels"),
        spec.option("keep_detail"),
        grid.shape,
    )
