"""Leaky-integrate-and-fire dynamics with an arctan surrogate gradient.

The step follows the three-line update used throughout:
    H = V_prev + U
    S = Hea(H - threshold)            (Hea(x) = 1 for x >= 0)
    V = V_reset * S + (H / tau) * (1 - S)

The Heaviside forward is paired with the derivative of the smoothed
surrogate (1/pi) * atan(pi * alpha * x / 2) + 1/2 in the backward pass;
``smooth=True`` runs the smoothed surrogate in the forward pass too, which
makes the whole network differentiable for finite-difference checks.
"""

import math
from dataclasses import dataclass

import torch

TH_MIN = 0.1
TH_MAX = 1.0


@dataclass
class LifParams:
    tau: float = 2.0
    v_reset: float = 0.0
    v_th_fixed: float = 0.5

    def __post_init__(self):
        if self.tau < 1.0:
            raise ValueError("tau must be >= 1")


def surrogate_spike_grad(x, alpha=2.0):
    """d/dx of the smoothed spike: alpha / (2 * (1 + (pi*alpha*x/2)^2))."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    z = math.pi * alpha * x / 2.0
    return alpha / (2.0 * (1.0 + z * z))


def smooth_spike(x, alpha=2.0):
    """Differentiable stand-in for Hea(x): atan(pi*alpha*x/2)/pi + 1/2."""
    return torch.atan(math.pi * alpha * x / 2.0) / math.pi + 0.5


class _AtanSpike(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, alpha):
        ctx.save_for_backward(x)
        ctx.alpha = alpha
        return (x >= 0).to(x.dtype)

    @staticmethod
    def backward(ctx, grad_out):
        (x,) = ctx.saved_tensors
        return grad_out * surrogate_spike_grad(x, ctx.alpha), None


def spike_fn(x, alpha=2.0, smooth=False):
    if smooth:
        return smooth_spike(x, alpha)
    return _AtanSpike.apply(x, alpha)


def lif_step(v, u, threshold, params: LifParams = None, alpha=2.0, smooth=False):
    """One membrane update; returns (new state, spike tensor).

    ``threshold`` may be a scalar or a per-pixel map broadcastable to H.
    """
    params = params or LifParams()
    if torch.is_tensor(u) and torch.is_tensor(v) and v.shape != u.shape:
        raise ValueError(f"state shape {tuple(v.shape)} != input shape {tuple(u.shape)}")
    h = v + u
    s = spike_fn(h - threshold, alpha, smooth)
    v_new = params.v_reset * s + (h / params.tau) * (1 - s)
    return v_new, s
