"""Masked per-pixel metrics and training losses.

RMSLE uses the natural log. ``n`` counts only pixels where the mask is 1, so
zero-filled invalid regions do not dilute a tile's score.
"""

from __future__ import annotations

import numpy as np
import torch


class MetricError(ValueError):
    pass


def _masked(pred, target, mask=None):
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(target, dtype=np.float64)
    if p.shape != g.shape:
        raise MetricError(f"prediction shape {p.shape} != target shape {g.shape}")
    if mask is None:
        sel = np.ones(p.shape, dtype=bool)
    else:
        m = np.asarray(mask)
        if m.shape != p.shape:
            raise MetricError(f"mask shape {m.shape} != target shape {p.shape}")
        sel = m.astype(bool)
    if not sel.any():
        raise MetricError("metric undefined: mask selects no pixels")
    p, g = p[sel], g[sel]
    if np.any(p < 0) or np.any(g < 0):
        raise MetricError("metric inputs must be non-negative on masked pixels")
    return p, g


def rmsle(pred, target, mask=None) -> float:
    p, g = _masked(pred, target, mask)
    return float(np.sqrt(np.mean((np.log1p(p) - np.log1p(g)) ** 2)))


def mape(pred, target, mask=None) -> float:
    """Percent error with both terms shifted by one, stable as the target nears 0."""
    p, g = _masked(pred, target, mask)
    return float(100.0 * np.mean(np.abs((g + 1) - (p + 1)) / (g + 1)))


def mae(pred, target, mask=None) -> float:
    p, g = _masked(pred, target, mask)
    return float(np.mean(np.abs(p - g)))


METRICS = {"rmsle": rmsle, "mae": mae, "mape": mape}


def rmsle_loss(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean over tiles of each tile's masked RMSLE; tiles without valid pixels are ignored.

    Tensors are (B, 1, H, W).
    """
    m = mask.to(pred.dtype)
    n = m.sum(dim=(1, 2, 3))
    sq = (torch.log1p(pred) - torch.log1p(target)) ** 2 * m
    per_tile = sq.sum(dim=(1, 2, 3)) / n.clamp(min=1)
    keep = n > 0
    # small floor keeps the sqrt differentiable at a perfect fit
    return torch.sqrt(per_tile[keep] + 1e-12).mean()


def mape_loss(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    m = mask.to(pred.dtype)
    n = m.sum(dim=(1, 2, 3))
    err = torch.abs(target - pred) / (target + 1) * m
    per_tile = 100.0 * err.sum(dim=(1, 2, 3)) / n.clamp(min=1)
    return per_tile[n > 0].mean()


LOSSES = {"rmsle": rmsle_loss, "mape": mape_loss}
