"""Two-branch spiking denoiser.

The event denoising branch (EDB) is a same-padded conv stack with LIF
activations whose last layer's firing threshold is a per-pixel map. In
dynamic-threshold mode that map comes from the threshold branch (DTB), a
smaller spiking stack whose leaky output membrane is squashed into
[TH_MIN, TH_MAX]; in fixed mode it is a constant.
"""

from dataclasses import dataclass

import torch
from torch import nn

from .lif import LifParams, lif_step, TH_MIN, TH_MAX

EDB_CHANNELS = (8, 16, 8, 1)
DTB_CHANNELS = (8, 8, 1)


@dataclass
class ForwardResult:
    outputs: torch.Tensor          # (B, T, 1, H, W) spike frames
    threshold_maps: torch.Tensor   # (B, T, 1, H, W)
    membrane: torch.Tensor         # (B, T, 1, H, W) pre-spike H of the last layer
    spike_counts: list             # per EDB layer, spikes summed over batch/steps
    input_nnz: list                # per EDB conv, nonzero inputs seen (op proxy)


def _conv_stack(channels, in_channels):
    convs = nn.ModuleList()
    prev = in_channels
    for ch in channels:
        # bias-free: a silent input must keep every membrane at rest
        convs.append(nn.Conv2d(prev, ch, kernel_size=3, padding=1, bias=False))
        prev = ch
    return convs


class DTSNN(nn.Module):
    def __init__(self, in_channels=2, lif: LifParams = None, alpha=2.0,
                 mode="dynamic", fixed_threshold=0.5):
        super().__init__()
        if mode not in ("dynamic", "fixed"):
            raise ValueError("mode must be 'dynamic' or 'fixed'")
        self.in_channels = in_channels
        self.lif = lif or LifParams()
        self.alpha = alpha
        self.mode = mode
        self.fixed_threshold = fixed_threshold
        self.edb = _conv_stack(EDB_CHANNELS, in_channels)
        self.dtb = _conv_stack(DTB_CHANNELS, in_channels)

    def forward(self, frames, external_threshold=None, smooth=False):
        """Run T steps over (B, T, C, H, W) binary frames (or unbatched
        (T, C, H, W)); LIF state is reset at the start of every call.

        ``external_threshold``: optional (B, T, 1, H, W) maps overriding the
        threshold source (used for ablations and monotonicity checks).
        """
        if frames.dim() == 4:
            res = self.forward(frames.unsqueeze(0),
                               None if external_threshold is None
                               else external_threshold.unsqueeze(0), smooth)
            return ForwardResult(res.outputs[0], res.threshold_maps[0],
                                 res.membrane[0], res.spike_counts, res.input_nnz)
        b, t_steps, c, h, w = frames.shape
        if c != self.in_channels:
            raise ValueError(f"expected {self.in_channels} input channels, got {c}")
        edb_v = [None] * len(self.edb)
        dtb_v = [None] * len(self.dtb)
        spike_counts = [0.0] * len(self.edb)
        input_nnz = [0.0] * len(self.edb)
        outs, maps, mems = [], [], []
        for t in range(t_steps):
            x = frames[:, t].to(next(self.parameters()).dtype)

            # threshold for the final EDB layer at this step
            if external_threshold is not None:
                th_map = external_threshold[:, t]
            elif self.mode == "fixed":
                th_map = torch.full((b, 1, h, w), float(self.fixed_threshold),
                                    dtype=x.dtype, device=x.device)
            else:
                y = x
                for j, conv in enumerate(self.dtb):
                    u = conv(y)
                    if dtb_v[j] is None:
                        dtb_v[j] = torch.zeros_like(u)
                    if j < len(self.dtb) - 1:
                        dtb_v[j], y = lif_step(dtb_v[j], u, self.lif.v_th_fixed,
                                               self.lif, self.alpha, smooth)
                    else:
                        # non-spiking leaky integrator feeding the squashing map
                        dtb_v[j] = dtb_v[j] / self.lif.tau + u
                        th_map = TH_MIN + (TH_MAX - TH_MIN) * torch.sigmoid(dtb_v[j])

            y = x
            for j, conv in enumerate(self.edb):
                input_nnz[j] += float((y.detach() != 0).sum())
                u = conv(y)
                if edb_v[j] is None:
                    edb_v[j] = torch.zeros_like(u)
                last = j == len(self.edb) - 1
                th = th_map if last else self.lif.v_th_fixed
                if last:
                    mems.append(edb_v[j] + u)
                edb_v[j], y = lif_step(edb_v[j], u, th, self.lif, self.alpha, smooth)
                spike_counts[j] += float(y.detach().sum())
            outs.append(y)
            maps.append(th_map)
        return ForwardResult(torch.stack(outs, dim=1), torch.stack(maps, dim=1),
                             torch.stack(mems, dim=1), spike_counts, input_nnz)


def op_count(net: DTSNN, frames):
    """(snn accumulate ops, ANN-equivalent MACs, ann/snn ratio) for one pass.

    SNN cost counts one accumulate per nonzero conv input per kernel tap and
    output channel; the ANN equivalent is the dense MAC count of the same
    topology (input-independent). The published energy ratio additionally
    weights accumulate vs multiply-accumulate cost and is reported by the
    caller, never asserted.
    """
    with torch.no_grad():
        res = net(frames)
    if frames.dim() == 4:
        frames = frames.unsqueeze(0)
    b, t_steps, _, h, w = frames.shape
    snn_ops = 0.0
    ann_macs = 0.0
    for conv, nnz in zip(net.edb, res.input_nnz):
        k = conv.kernel_size[0] * conv.kernel_size[1]
        snn_ops += nnz * k * conv.out_channels
        ann_macs += b * t_steps * h * w * k * conv.in_channels * conv.out_channels
    ratio = ann_macs / snn_ops if snn_ops > 0 else float("inf")
    return snn_ops, ann_macs, ratio
