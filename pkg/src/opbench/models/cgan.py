"""Conditional adversarial baseline.

Generator is the UNet conditioned on the input fields; the
discriminator scores (condition, candidate) channel stacks.  There is
no noise input: generation and evaluation are deterministic, and only
the generator is used for scoring.
"""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .conv import UNet, _conv, _to_first


class Discriminator(nn.Module):
    """Strided conv stack, global average pool, scalar logit."""

    def __init__(self, c_in: int, width: int, ndim: int, blocks: int = 3):
        super().__init__()
        conv = _conv(ndim)
        self.ndim = ndim
        layers: list[nn.Module] = [conv(c_in, width, 3, padding=1), nn.GELU()]
        for _ in range(blocks):
            layers += [conv(width, width, 3, stride=2, padding=1), nn.GELU()]
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(width, 1)

    def forward(self, x):
        h = self.features(_to_first(x, self.ndim))
        h = h.mean(dim=tuple(range(2, h.ndim)))
        return self.head(h)[:, 0]


class CGAN(nn.Module):
    """Generator/discriminator pair; forward runs the generator only."""

    def __init__(self, c_in, c_out, width, levels, ndim, auto_pad, lambda_adv):
        super().__init__()
        self.lambda_adv = lambda_adv
        self.generator = UNet(c_in, c_out, width, levels, ndim, auto_pad)
        self.discriminator = Discriminator(c_in + c_out, width, ndim)

    def forward(self, x):
        return self.generator(x)


def _rel_l2_loss(pred, target):
    flat_p = pred.reshape(pred.shape[0], -1)
    flat_t = target.reshape(target.shape[0], -1)
    num = torch.linalg.vector_norm(flat_p - flat_t, dim=1)
    den = torch.linalg.vector_norm(flat_t, dim=1).clamp_min(1e-12)
    return (num / den).mean()


def cgan_train_step(module: CGAN, opt_g, opt_d, x, y, clip=None):
    """One adversarial round; returns (reconstruction, adversarial,
    discriminator) losses as floats.

    Generator loss = relative L2 + lambda_adv * BCE(D(fake) vs real).
    With lambda_adv = 0 the adversarial term is skipped entirely, so the
    generator update is exactly the plain regression step.
    """
    fake = module.generator(x)

    # Discriminator on real/fake pairs (generator frozen via detach).
    d_real = module.discriminator(torch.cat([x, y], dim=-1))
    d_fake = module.discriminator(torch.cat([x, fake.detach()], dim=-1))
    loss_d = F.binary_cross_entropy_with_logits(
        d_real, torch.ones_like(d_real)
    ) + F.binary_cross_entropy_with_logits(d_fake, torch.zeros_like(d_fake))
    opt_d.zero_grad(set_to_none=True)
    loss_d.backward()
    if clip is not None:
        torch.nn.utils.clip_grad_norm_(module.discriminator.parameters(), clip)
    opt_d.step()

    # Generator: reconstruction plus (optionally) fooling the critic.
    rec = _rel_l2_loss(fake, y)
    if module.lambda_adv > 0:
        d_gen = module.discriminator(torch.cat([x, fake], dim=-1))
        adv = F.binary_cross_entropy_with_logits(d_gen, torch.ones_like(d_gen))
        loss_g = rec + module.lambda_adv * adv
    else:
        adv = torch.zeros((), dtype=rec.dtype)
        loss_g = rec
    opt_g.zero_grad(set_to_none=True)
    loss_g.backward()
    if clip is not None:
        torch.nn.utils.clip_grad_norm_(module.generator.parameters(), clip)
    opt_g.step()
    return float(rec.detach()), float(adv.detach()), float(loss_d.detach())


def build(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return CGAN(
        c_in,
        c_out,
        spec.width,
        spec.depth,
        grid.ndim,
        spec.option("auto_pad"),
        float(spec.option("lambda_adv")),
    )
