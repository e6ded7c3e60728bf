"""Rectified Adam.

Moments follow Adam. While the approximated SMA length ``rho_t`` is at most 4
the variance of the adaptive rate is intractable and the step falls back to
bias-corrected momentum; afterwards the adaptive step is scaled by the
rectification term ``r_t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch


@dataclass(frozen=True)
class RAdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.beta1 < 1:
            raise ValueError("beta1 must lie in [0, 1)")
        if not 0 < self.beta2 < 1:
            raise ValueError("beta2 must lie in (0, 1)")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")


@dataclass
class RAdamState:
    exp_avg: list[torch.Tensor] = field(default_factory=list)
    exp_avg_sq: list[torch.Tensor] = field(default_factory=list)
    step: int = 0


def rectification(step: int, beta2: float) -> float | None:
    """``r_t`` for ``step`` (1-based), or None while ``rho_t <= 4``."""
    rho_inf = 2 / (1 - beta2) - 1
    b2t = beta2**step
    rho_t = rho_inf - 2 * step * b2t / (1 - b2t)
    if rho_t <= 4:
        return None
    return math.sqrt(
        (rho_t - 4) * (rho_t - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho_t)
    )


@torch.no_grad()
def radam_step(params, grads, state: RAdamState, cfg: RAdamConfig):
    """Apply one update in place; returns ``(params, state)``."""
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {tuple(g.shape)} != parameter shape {tuple(p.shape)}")
        if not torch.isfinite(g).all():
            raise FloatingPointError("non-finite gradient")
    if not state.exp_avg:
        state.exp_avg = [torch.zeros_like(p) for p in params]
        state.exp_avg_sq = [torch.zeros_like(p) for p in params]

    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    bias1 = 1 - b1**t
    r = rectification(t, b2)
    for p, g, m, v in zip(params, grads, state.exp_avg, state.exp_avg_sq):
        m.mul_(b1).add_(g, alpha=1 - b1)
        v.mul_(b2).addcmul_(g, g, value=1 - b2)
        if r is None:
            p.add_(m, alpha=-cfg.learning_rate / bias1)
        else:
            denom = v.sqrt().add_(cfg.epsilon)
            step_size = cfg.learning_rate * r * math.sqrt(1 - b2**t) / bias1
            p.addcdiv_(m, denom, value=-step_size)
    return params, state


class RAdam(torch.optim.Optimizer):
    """``torch.optim`` front end for :func:`radam_step`."""

    def __init__(self, params, cfg: RAdamConfig | None = None):
        self.cfg = cfg or RAdamConfig()
        super().__init__(params, {})
        self._states = [RAdamState() for _ in self.param_groups]

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group, state in zip(self.param_groups, self._states):
            params = group["params"]
            grads = [torch.zeros_like(p) if p.grad is None else p.grad for p in params]
            radam_step(params, grads, state, self.cfg)
        return loss
