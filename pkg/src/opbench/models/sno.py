"""Spectral operator on truncated Fourier coefficients.

Analysis projects the input onto integer modes |k| <= k_max (requiring
2*k_max + 1 <= resolution so the modes are unaliased), a complex-valued
feed-forward network maps the coefficient block, and synthesis
evaluates the result as a trigonometric sum at any requested grid.  The
model sees coefficients only: no coordinate channels, and inference
never leaves coefficient space until the final synthesis.

Internally the sample points on every axis are taken as j/n, the same
convention the forward transform assumes.
"""
from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import ConfigurationError


def _modrelu(z, bias):
    mag = torch.abs(z)
    scale = torch.relu(mag + bias) / (mag + 1e-12)
    return z * scale


class ComplexLinear(nn.Module):
    """Channel-mixing complex map, weights stored as real pairs."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        scale = 1.0 / c_in**0.5
        self.weight = nn.Parameter(scale * torch.randn(c_in, c_out, 2))
        self.bias = nn.Parameter(torch.zeros(c_out, 2))

    def forward(self, z):
        w = torch.view_as_complex(self.weight)
        b = torch.view_as_complex(self.bias)
        return z @ w + b


class SpectralBlock(nn.Module):
    """Per-mode complex diagonal after a shared channel mix, modReLU."""

    def __init__(self, mode_shape, width: int):
        super().__init__()
        self.mix = ComplexLinear(width, width)
        diag = torch.zeros(*mode_shape, width, 2)
        diag[..., 0] = 1.0
        self.diag = nn.Parameter(diag)
        self.act_bias = nn.Parameter(torch.zeros(width))

    def forward(self, z):
        d = torch.view_as_complex(self.diag)
        return _modrelu(self.mix(z) * d, self.act_bias)


class SNO(nn.Module):
    def __init__(self, c_in, c_out, width, depth, k_max, ndim):
        super().__init__()
        self.k_max = k_max
        self.ndim = ndim
        modes = 2 * k_max + 1
        mode_shape = (modes,) if ndim == 1 else (modes, modes)
        self.p_in = ComplexLinear(c_in, width)
        self.blocks = nn.ModuleList(
            [SpectralBlock(mode_shape, width) for _ in range(depth)]
        )
        self.p_out = ComplexLinear(width, c_out)

    def analyze(self, x):
        """Truncated Fourier coefficients, modes ordered -k_max..k_max."""
        K = self.k_max
        for n in x.shape[1 : 1 + self.ndim]:
            if 2 * K + 1 > n:
                raise ConfigurationError(
                    f"k_max {K} exceeds the bandwidth of a {n}-point axis"
                )
        dims = tuple(range(1, 1 + self.ndim))
        X = torch.fft.fftn(x, dim=dims)
        for d in dims:
            n = x.shape[d]
            X = X / n
        ks = torch.arange(-K, K + 1)
        if self.ndim == 1:
            return X[:, ks % x.shape[1]]
        return X[:, (ks % x.shape[1])[:, None], (ks % x.shape[2])[None, :]]

    def synthesize(self, coeffs, out_shape):
        """Evaluate the trigonometric sum at j/m points per axis."""
        K = self.k_max
        ks = torch.arange(-K, K + 1, dtype=coeffs.real.dtype)

        def basis(m):
            pts = torch.arange(m, dtype=ks.dtype) / m
            ang = 2.0 * torch.pi * pts[:, None] * ks[None, :]
            return torch.complex(torch.cos(ang), torch.sin(ang))

        if self.ndim == 1:
            return torch.einsum("xk,nkc->nxc", basis(out_shape[0]), coeffs).real
        e1, e2 = basis(out_shape[0]), basis(out_shape[1])
        return torch.einsum("xa,yb,nabc->nxyc", e1, e2, coeffs).real

    def forward(self, x, out_shape=None):
        if out_shape is None:
            out_shape = tuple(x.shape[1 : 1 + self.ndim])
        z = self.p_in(self.analyze(x))
        for block in self.blocks:
            z = block(z)
        return self.synthesize(self.p_out(z), out_shape)


def build(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return SNO(c_in, c_out, spec.width, spec.depth, spec.option("k_max"), grid.ndim)
