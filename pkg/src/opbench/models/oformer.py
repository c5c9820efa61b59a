"""Attention operator with random Fourier coordinates and latent rollout.

Grid points become a token sequence.  Each token carries the input
channels plus a random Fourier embedding of its coordinates (a fixed
projection drawn at construction, countering the spectral bias of raw
coordinate MLPs).  Softmax-attention encoder blocks build a latent
state, a shared propagator block advances it `rollout` times (latent
time stepping; one step for time-independent problems), and a pointwise
decoder reads out the prediction.
"""
from __future__ import annotations

import torch
import torch.nn as nn

from .layers import MLP, RandomFourierFeatures, merge_heads, softmax_attention, split_heads


class SelfAttention(nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        self.heads = heads
        self.q = nn.Linear(width, width)
        self.k = nn.Linear(width, width)
        self.v = nn.Linear(width, width)

    def forward(self, z):
        q = split_heads(self.q(z), self.heads)
        k = split_heads(self.k(z), self.heads)
        v = split_heads(self.v(z), self.heads)
        return merge_heads(softmax_attention(q, k, v))


class EncoderBlock(nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attn = SelfAttention(width, heads)
        self.norm2 = nn.LayerNorm(width)
        self.mlp = MLP(width, width, 2 * width, 1)

    def forward(self, z):
        z = z + self.attn(self.norm1(z))
        return z + self.mlp(self.norm2(z))


class OFormer(nn.Module):
    def __init__(self, c_in, c_out, width, depth, heads, rollout, rff_features, ndim):
        super().__init__()
        self.ndim = ndim
        self.rollout = rollout
        self.rff = RandomFourierFeatures(ndim, rff_features)
        self.embed = nn.Linear(c_in - ndim + self.rff.out_features, width)
        self.encoder = nn.ModuleList(
            [EncoderBlock(width, heads) for _ in range(depth)]
        )
        self.propagator = EncoderBlock(width, heads)
        self.decoder = MLP(width, c_out, 2 * width, 1)

    def forward(self, x):
        spatial = x.shape[1 : 1 + self.ndim]
        coords = x[..., -self.ndim :]
        feats = torch.cat([x[..., : -self.ndim], self.rff(coords)], dim=-1)
        z = self.embed(feats).reshape(x.shape[0], -1, self.embed.out_features)
        for block in self.encoder:
            z = block(z)
        for _ in range(self.rollout):
            z = self.propagator(z)
        y = self.decoder(z)
        return y.reshape(x.shape[0], *spatial, y.shape[-1])


def build(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return OFormer(
        c_in,
        c_out,
        spec.width,
        spec.depth,
        spec.option("heads"),
        spec.option("rollout"),
        spec.option("rff_features"),
        grid.ndim,
    )
