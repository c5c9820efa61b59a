"""Pointwise feed-forward baseline.

The same multilayer map is applied independently at every grid point,
so the output at a point depends only on the input channels (and
coordinates) at that point.  depth counts hidden layers; depth 0 is a
single linear projection of the input channels.
"""
from __future__ import annotations

import torch.nn as nn

from .layers import MLP


class FNN(nn.Module):
    def __init__(self, c_in: int, c_out: int, width: int, depth: int):
        super().__init__()
        self.net = MLP(c_in, c_out, width, depth)

    def forward(self, x):
        return self.net(x)


def build(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return FNN(c_in, c_out, spec.width, spec.depth)
