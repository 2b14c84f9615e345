"""Training and stream-level inference for the spiking denoiser.

Samples are T consecutive per-window frame stacks built from a labeled
stream: input is the 2-channel (per-polarity) occupancy, the target is the
1-channel signal occupancy, and the threshold supervision marks pixels with
signal activity over a longer window span with a low threshold.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.ndimage import maximum_filter

from ..core import (WindowSequence, LABEL_SIGNAL, LABEL_NOISE, POS,
                    LabeledEventStream)
from .lif import TH_MIN, TH_MAX
from .network import DTSNN

TH_LOW = 0.3
TH_HIGH = 0.8


@dataclass
class TrainConfig:
    lr: float = 0.002
    batch_size: int = 8
    epochs: int = 10
    w_l1: float = 1.0
    w_bce: float = 1.0
    w_th: float = 0.5
    alpha: float = 2.0
    t_steps: int = 5
    seed: int = 0
    th_label_windows: int = 3   # K: span of the threshold supervision
    th_label_radius: int = 1

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.t_steps < 1:
            raise ValueError("bad training configuration")
        if min(self.w_l1, self.w_bce, self.w_th) < 0:
            raise ValueError("loss weights must be >= 0")


def stream_frames(labeled, dt_us):
    """Per-window occupancy tensors: input (N, 2, H, W), signal GT (N, 1, H, W)."""
    s = labeled.stream
    g = s.geometry
    windows = WindowSequence(s, dt_us)
    n = max(len(windows), 1)
    inp = np.zeros((n, 2, g.height, g.width), dtype=np.float32)
    gt = np.zeros((n, 1, g.height, g.width), dtype=np.float32)
    win = (s.t // dt_us).astype(np.int64)
    inp[win, s.p.astype(np.int64), s.y, s.x] = 1.0
    sig = labeled.labels == LABEL_SIGNAL
    gt[win[sig], 0, s.y[sig], s.x[sig]] = 1.0
    return inp, gt


def make_threshold_labels(labeled, dt_us, k_windows=3, radius=1,
                          th_low=TH_LOW, th_high=TH_HIGH):
    """Per-window threshold targets: low where signal activity is near.

    A pixel gets ``th_low`` if any GT signal event lies within the Chebyshev
    ``radius`` in any of the ``k_windows`` windows centred on the pixel's
    own window (clamped at the ends), else ``th_high``.
    """
    if k_windows < 1:
        raise ValueError("k_windows must be >= 1")
    _, gt = stream_frames(labeled, dt_us)
    occ = gt[:, 0] > 0
    half = (k_windows - 1) // 2
    n = occ.shape[0]
    out = np.empty_like(gt)
    for k in range(n):
        span = occ[max(k - half, 0):min(k + half, n - 1) + 1].any(axis=0)
        if radius > 0:
            span = maximum_filter(span, size=2 * radius + 1, mode="constant")
        out[k, 0] = np.where(span, th_low, th_high)
    return out


def build_samples(labeled, dt_us, t_steps):
    """Chunk a stream into training samples of T consecutive windows.

    Returns (inputs, targets, th_labels) tensors shaped (S, T, C, H, W);
    a short tail is dropped.
    """
    inp, gt = stream_frames(labeled, dt_us)
    th = make_threshold_labels(labeled, dt_us)
    n = (inp.shape[0] // t_steps) * t_steps
    if n == 0:
        raise ValueError(f"stream too short for {t_steps}-step samples")
    def chunk(a):
        return torch.from_numpy(a[:n].reshape(-1, t_steps, *a.shape[1:]).copy())
    return chunk(inp), chunk(gt), chunk(th)


def compute_loss(net, res, gt, th_labels, cfg):
    terms = {}
    zero = torch.zeros((), dtype=res.membrane.dtype)
    terms["l1"] = torch.nn.functional.l1_loss(res.outputs, gt) \
        if cfg.w_l1 > 0 else zero
    if cfg.w_bce > 0:
        prob = torch.sigmoid(res.membrane - res.threshold_maps)
        terms["bce"] = torch.nn.functional.binary_cross_entropy(
            prob.clamp(1e-6, 1 - 1e-6), gt)
    else:
        terms["bce"] = zero
    terms["th"] = torch.nn.functional.l1_loss(res.threshold_maps, th_labels) \
        if cfg.w_th > 0 and net.mode == "dynamic" else zero
    total = cfg.w_l1 * terms["l1"] + cfg.w_bce * terms["bce"] + cfg.w_th * terms["th"]
    return total, {k: float(v.detach()) for k, v in terms.items()}


def train_step(net, optimizer, batch, cfg):
    """One optimizer step on a (inputs, gt, th_labels) batch; returns losses."""
    inputs, gt, th_labels = batch
    res = net(inputs)
    total, terms = compute_loss(net, res, gt, th_labels, cfg)
    if not math.isfinite(float(total.detach())):
        raise RuntimeError(f"non-finite loss {float(total.detach())}: terms={terms}")
    if total.requires_grad:
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
    terms["total"] = float(total.detach())
    return terms


def fit(net, samples, cfg, log=None):
    """Mini-batch training over pre-built samples; returns per-step losses."""
    inputs, gt, th_labels = samples
    torch.manual_seed(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    history = []
    n = inputs.shape[0]
    for epoch in range(cfg.epochs):
        order = torch.randperm(n, generator=gen)
        for i0 in range(0, n, cfg.batch_size):
            idx = order[i0:i0 + cfg.batch_size]
            terms = train_step(net, optimizer, (inputs[idx], gt[idx], th_labels[idx]), cfg)
            terms["epoch"] = epoch
            history.append(terms)
            if log is not None:
                log(terms)
    return history


def predict_stream(net, labeled, dt_us, t_steps=5):
    """Label every event of a stream from the net's per-window output masks.

    An event is predicted signal iff the output spike frame of its window is
    set at its pixel (the single output channel covers both polarities).
    """
    s = labeled.stream
    inp, _ = stream_frames(labeled, dt_us)
    n = inp.shape[0]
    masks = np.zeros((n, s.geometry.height, s.geometry.width), dtype=bool)
    with torch.no_grad():
        for k0 in range(0, n, t_steps):
            chunk = inp[k0:k0 + t_steps]
            res = net(torch.from_numpy(chunk))
            masks[k0:k0 + t_steps] = res.outputs[:, 0].numpy() > 0.5
    win = (s.t // dt_us).astype(np.int64)
    pred_signal = masks[win, s.y, s.x]
    labels = np.where(pred_signal, LABEL_SIGNAL, LABEL_NOISE).astype(np.uint8)
    return LabeledEventStream(s, labels)
