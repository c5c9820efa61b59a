"""Fourier neural operator: per-mode complex channel mixing.

The spectral layer retains integer modes |k| <= k_max per axis, applies
an independent complex linear map over channels at each retained mode,
zeroes the rest, and inverse transforms.  Negative modes carry the
conjugate of their positive partner so the output is real by
construction; self-conjugate slots (DC, and Nyquist when the resolution
equals 2*k_max) keep only the real part.  Weight shapes depend on k_max
alone, never on the grid, which is what makes zero-shot evaluation at
unseen resolutions possible.
"""
from __future__ import annotations

import math

import torch
import torch.nn as nn

from ..errors import ConfigurationError
from .layers import MLP


def _real(z):
    return torch.complex(z.real, torch.zeros_like(z.real))


_MODE_TABLES: dict = {}


def _mode_table(n, k_lo, k_hi):
    """exp(-2*pi*i*k*x/n) rows for k in [k_lo, k_hi], cached per size."""
    key = (n, k_lo, k_hi)
    tab = _MODE_TABLES.get(key)
    if tab is None:
        ks = torch.arange(k_lo, k_hi + 1, dtype=torch.float64)
        pts = torch.arange(n, dtype=torch.float64)
        tab = torch.exp(-2j * math.pi * ks[:, None] * pts[None, :] / n)
        _MODE_TABLES[key] = tab
    return tab


class SpectralConv(nn.Module):
    def __init__(self, c_in: int, c_out: int, k_max: int, ndim: int):
        super().__init__()
        self.c_in = c_in
        self.c_out = c_out
        self.k_max = k_max
        self.ndim = ndim
        scale = 1.0 / (c_in * c_out)
        if ndim == 1:
            shape = (k_max + 1, c_in, c_out, 2)
        else:
            shape = (2 * k_max + 1, k_max + 1, c_in, c_out, 2)
        self.weight = nn.Parameter(scale * torch.randn(shape))

    def mix_spectrum(self, X):
        """Weighted truncation on a full spectrum (fft layout).

        Exposed separately from forward so the transform path can be
        cross-checked against an O(n^2) direct summation transform.
        """
        if self.ndim == 1:
            return self._mix_1d(X)
        return self._mix_2d(X)

    def _mix_1d(self, X):
        n = X.shape[1]
        K = self.k_max
        W = torch.view_as_complex(self.weight)
        pos = torch.einsum("nkc,kcd->nkd", X[:, : K + 1], W)
        Y = torch.zeros(
            X.shape[0], n, self.c_out, dtype=X.dtype, device=X.device
        )
        Y[:, 0] = _real(pos[:, 0])
        top = K if 2 * K < n else K - 1
        if top >= 1:
            idx = torch.arange(1, top + 1)
            Y[:, idx] = pos[:, idx]
            Y[:, n - idx] = pos[:, idx].conj()
        if 2 * K == n:
            Y[:, K] = _real(pos[:, K])
        return Y

    def _mix_2d(self, X):
        n1, n2 = X.shape[1], X.shape[2]
        K = self.k_max
        W = torch.view_as_complex(self.weight)
        k1s = torch.arange(-K, K + 1)
        Xr = X[:, k1s % n1][:, :, : K + 1]
        pos = torch.einsum("nrkc,rkcd->nrkd", Xr, W)
        Y = torch.zeros(
            X.shape[0], n1, n2, self.c_out, dtype=X.dtype, device=X.device
        )

        # Columns 0 < k2 < n2/2: every row gets its own weight, mirrors
        # land in columns above n2/2.  When n1 = 2K the +K row aliases
        # the -K row's slot, so it is dropped.
        keep = slice(None) if 2 * K < n1 else slice(0, 2 * K)
        rows = k1s[keep]
        g_hi = K if 2 * K < n2 else K - 1
        if g_hi >= 1:
            cols = torch.arange(1, g_hi + 1)
            blk = pos[:, keep, 1 : g_hi + 1]
            Y[:, (rows % n1)[:, None], cols[None, :]] = blk
            Y[:, ((-rows) % n1)[:, None], (n2 - cols)[None, :]] = blk.conj()

        # Self-mirror columns (k2 = 0, plus Nyquist when n2 = 2K): the
        # Hermitian partner lives in the same column, so rows pair up
        # within it and k1 = 0 (and row Nyquist) keep the real part.
        self_cols = [0] + ([K] if 2 * K == n2 else [])
        t_hi = K if 2 * K < n1 else K - 1
        for c in self_cols:
            pc = pos[:, :, c]
            Y[:, 0, c] = _real(pc[:, K])
            if t_hi >= 1:
                ks = torch.arange(1, t_hi + 1)
                Y[:, ks, c] = pc[:, K + ks]
                Y[:, n1 - ks, c] = pc[:, K + ks].conj()
            if 2 * K == n1:
                Y[:, K, c] = _real(pc[:, 2 * K])
        return Y

    def _forward_2d_truncated(self, x):
        """Same map as fft -> mix -> ifft, summed over retained modes only.

        Only valid when 2*k_max < min(n1, n2): no slot aliases another, so
        the spectrum splits into the k2 = 0 column (rows pair within it)
        and generic columns whose mirrors reconstruct via the real part.
        Matmuls against (2K+1) x n mode tables beat full transforms at the
        grid sizes used here, where n is often prime.
        """
        n1, n2 = x.shape[1], x.shape[2]
        K = self.k_max
        cplx = torch.complex128 if x.dtype == torch.float64 else torch.complex64
        E1 = _mode_table(n1, -K, K).to(device=x.device, dtype=cplx)
        E2 = _mode_table(n2, 0, K).to(device=x.device, dtype=cplx)
        W = torch.view_as_complex(self.weight)
        u = torch.einsum("kj,bijc->bikc", E2, x.to(cplx))
        Xr = torch.einsum("ri,bikc->brkc", E1, u)
        pos = torch.einsum("brkc,rkcd->brkd", Xr, W)
        v = pos[:, :, 0]
        col0 = torch.cat(
            [v[:, K + 1 :].flip(1).conj(), _real(v[:, K : K + 1]), v[:, K + 1 :]],
            dim=1,
        )
        # Mirror columns contribute the conjugate term, hence the factor 2
        # once the real part is taken; k2 = 0 carries its own mirrors.
        scale = torch.full((K + 1,), 2.0, dtype=x.dtype, device=x.device)
        scale[0] = 1.0
        B = torch.cat([col0.unsqueeze(2), pos[:, :, 1:]], dim=2)
        B = B * scale[None, None, :, None]
        t = torch.einsum("brkc,kj->brjc", B, E2.conj())
        P1 = E1.conj()
        y = torch.einsum("ri,brjc->bijc", P1.real, t.real) - torch.einsum(
            "ri,brjc->bijc", P1.imag, t.imag
        )
        return y / (n1 * n2)

    def forward(self, x):
        spatial = x.shape[1 : 1 + self.ndim]
        for n in spatial:
            if n < 2 * self.k_max:
                raise ConfigurationError(
                    f"resolution {n} < 2 * k_max = {2 * self.k_max}"
                )
        if self.ndim == 2 and 2 * self.k_max < min(spatial):
            return self._forward_2d_truncated(x)
        dims = tuple(range(1, 1 + self.ndim))
        X = torch.fft.fftn(x, dim=dims)
        Y = self.mix_spectrum(X)
        return torch.fft.ifftn(Y, dim=dims).real


class FNO(nn.Module):
    def __init__(self, c_in, c_out, width, depth, k_max, ndim):
        super().__init__()
        self.lift = nn.Linear(c_in, width)
        self.convs = nn.ModuleList(
            [SpectralConv(width, width, k_max, ndim) for _ in range(depth)]
        )
        self.bypass = nn.ModuleList(
            [nn.Linear(width, width) for _ in range(depth)]
        )
        self.proj = MLP(width, c_out, 4 * width, 1)

    def forward(self, x):
        h = self.lift(x)
        for i, (conv, lin) in enumerate(zip(self.convs, self.bypass)):
            h = conv(h) + lin(h)
            if i < len(self.convs) - 1:
                h = torch.nn.functional.gelu(h)
        return self.proj(h)


def build(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return FNO(c_in, c_out, spec.width, spec.depth, spec.option("k_max"), grid.ndim)
