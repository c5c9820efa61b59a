"""Linear-attention operator with mixture-of-experts feed-forward.

Query tokens are embedded grid coordinates; the input function (with
its coordinates) forms the cross-attention context.  Attention uses the
normalized kernel form (phi = elu + 1), whose cost is linear in token
count, and each block ends in a gated mixture over E expert branches,
the gate producing a convex combination per token.
"""
from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import ConfigurationError
from .layers import MLP, linear_attention, merge_heads, split_heads


class CrossAttention(nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        self.heads = heads
        self.q = nn.Linear(width, width)
        self.k = nn.Linear(width, width)
        self.v = nn.Linear(width, width)
        self.out = nn.Linear(width, width)

    def forward(self, queries, context):
        q = split_heads(self.q(queries), self.heads)
        k = split_heads(self.k(context), self.heads)
        v = split_heads(self.v(context), self.heads)
        return self.out(merge_heads(linear_attention(q, k, v)))


class MoEFeedForward(nn.Module):
    """Per-token convex combination over expert branches."""

    def __init__(self, width: int, n_experts: int):
        super().__init__()
        self.experts = nn.ModuleList(
            [MLP(width, width, 2 * width, 1) for _ in range(n_experts)]
        )
        self.gate = nn.Linear(width, n_experts)

    def gate_weights(self, z):
        return torch.softmax(self.gate(z), dim=-1)

    def forward(self, z):
        w = self.gate_weights(z)
        out = torch.stack([e(z) for e in self.experts], dim=-1)
        return (out * w.unsqueeze(-2)).sum(dim=-1)


class GNOTBlock(nn.Module):
    def __init__(self, width: int, heads: int, n_experts: int):
        super().__init__()
        self.norm_q = nn.LayerNorm(width)
        self.norm_c = nn.LayerNorm(width)
        self.attn = CrossAttention(width, heads)
        self.norm2 = nn.LayerNorm(width)
        self.moe = MoEFeedForward(width, n_experts)

    def forward(self, z, context):
        z = z + self.attn(self.norm_q(z), self.norm_c(context))
        return z + self.moe(self.norm2(z))


class GNOT(nn.Module):
    def __init__(self, c_in, c_out, width, depth, heads, n_experts, ndim):
        super().__init__()
        if n_experts < 1:
            raise ConfigurationError(f"expert count must be >= 1, got {n_experts}")
        self.ndim = ndim
        self.query_embed = MLP(ndim, width, width, 1)
        self.ctx_embed = nn.Linear(c_in, width)
        self.blocks = nn.ModuleList(
            [GNOTBlock(width, heads, n_experts) for _ in range(depth)]
        )
        self.head = nn.Linear(width, c_out)

    def forward(self, x):
        spatial = x.shape[1 : 1 + self.ndim]
        coords = x[..., -self.ndim :].reshape(x.shape[0], -1, self.ndim)
        ctx = self.ctx_embed(x.reshape(x.shape[0], coords.shape[1], -1))
        z = self.query_embed(coords)
        for block in self.blocks:
            z = block(z, ctx)
        y = self.head(z)
        return y.reshape(x.shape[0], *spatial, y.shape[-1])


def build(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return GNOT(
        c_in,
        c_out,
        spec.width,
        spec.depth,
        spec.option("heads"),
        spec.option("experts"),
        grid.ndim,
    )
