"""Shared building blocks for the model zoo."""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


class MLP(nn.Module):
    """Feed-forward stack applied to the last dimension, GELU between."""

    def __init__(self, c_in: int, c_out: int, width: int, depth: int):
        super().__init__()
        layers: list[nn.Module] = []
        prev = c_in
        for _ in range(depth):
            layers += [nn.Linear(prev, width), nn.GELU()]
            prev = width
        layers.append(nn.Linear(prev, c_out))
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


def softmax_attention(q, k, v):
    """Scaled dot-product attention on (..., n, d) tensors.

    With a single key token the softmax weight is exactly 1, so the
    output equals the value of that token.
    """
    scores = q @ k.transpose(-2, -1) / q.shape[-1] ** 0.5
    return torch.softmax(scores, dim=-1) @ v


def linear_attention(q, k, v):
    """Normalized kernel attention, cost linear in token count.

    out_i = sum_j phi(q_i).phi(k_j) v_j / sum_j phi(q_i).phi(k_j), with
    phi = elu + 1 > 0 so the denominator never vanishes.  Evaluated in
    the factored order phi(q) @ (phi(k)^T v), which is algebraically the
    same sum without the quadratic score matrix.
    """
    fq = F.elu(q) + 1.0
    fk = F.elu(k) + 1.0
    num = fq @ (fk.transpose(-2, -1) @ v)
    den = fq @ fk.sum(dim=-2, keepdim=True).transpose(-2, -1)
    return num / den


def split_heads(x, heads: int):
    # (..., n, h*d) -> (..., h, n, d)
    *lead, n, hd = x.shape
    return x.reshape(*lead, n, heads, hd // heads).transpose(-3, -2)


def merge_heads(x):
    # (..., h, n, d) -> (..., n, h*d)
    x = x.transpose(-3, -2)
    *lead, n, h, d = x.shape
    return x.reshape(*lead, n, h * d)


class RandomFourierFeatures(nn.Module):
    """Fixed projection gamma(y) = [cos(2 pi y B), sin(2 pi y B)].

    B is drawn once at construction and never trained; at y = 0 the
    feature vector is [1, ..., 1, 0, ..., 0] regardless of B.
    """

    def __init__(self, ndim: int, n_features: int, sigma: float = 1.0):
        super().__init__()
        self.register_buffer("proj", sigma * torch.randn(ndim, n_features))

    @property
    def out_features(self) -> int:
        return 2 * self.proj.shape[1]

    def forward(self, coords):
        ang = 2.0 * torch.pi * coords @ self.proj.to(coords.dtype)
        return torch.cat([torch.cos(ang), torch.sin(ang)], dim=-1)


def resample_to(x, target_shape, ndim: int):
    """Interpolate channels-last (N, *spatial, C) onto a new lattice.

    Linear/bilinear with endpoints aligned: a deterministic, pure
    function of the input values, used to feed fixed-size sensor
    lattices from whatever grid the data arrives on.
    """
    if tuple(x.shape[1 : 1 + ndim]) == tuple(target_shape):
        return x
    if ndim == 1:
        y = x.permute(0, 2, 1)
        y = F.interpolate(y, size=target_shape, mode="linear", align_corners=True)
        return y.permute(0, 2, 1)
    y = x.permute(0, 3, 1, 2)
    y = F.interpolate(y, size=target_shape, mode="bilinear", align_corners=True)
    return y.permute(0, 2, 3, 1)
