"""Evaluation metrics: signal-retain / noise-removal accuracy, dual-stream
overlap rate, distribution statistics and a generic event SNR."""

import math
from dataclasses import dataclass, asdict

import numpy as np

from .core import (BinaryFrame, GeometryError, LABEL_SIGNAL, LABEL_NOISE,
                   tie_sort_order)

ESNR_CAP_DB = 99.0  # sentinel for a noise-free (or signal-free) stream


@dataclass
class DenoiseReport:
    tp: int
    tn: int
    gp: int
    gn: int
    sr: float
    nr: float
    da: float
    da_fallback: bool = False   # set when GP or GN was 0 and DA uses one term
    esnr_db: float = float("nan")
    overlap_rate: float = float("nan")
    blank_patch_ratio: float = float("nan")
    preservation_rate: float = float("nan")
    runtime_s: float = float("nan")
    method: str = ""

    def to_dict(self):
        return asdict(self)


def _canonical(labeled):
    s = labeled.stream
    order = tie_sort_order(s.t, s.x, s.y, s.p)
    return s.select(order), labeled.labels[order]


def denoise_accuracy(pred, gt):
    """(SR, NR, DA) of predicted labels against ground truth.

    Both streams must contain the same events, matched by (t, x, y, p).
    SR = TP/GP over ground-truth signal, NR = TN/GN over ground-truth noise,
    DA = their mean. If one class is absent, DA falls back to the other
    term and the report is flagged.
    """
    ps, pl = _canonical(pred)
    gs, gl = _canonical(gt)
    if len(ps) != len(gs):
        raise ValueError(f"event count mismatch: pred {len(ps)} vs gt {len(gs)}")
    for name, a, b in (("t", ps.t, gs.t), ("x", ps.x, gs.x),
                       ("y", ps.y, gs.y), ("p", ps.p, gs.p)):
        if not np.array_equal(a, b):
            i = int(np.flatnonzero(a != b)[0])
            raise ValueError(
                f"event sets differ: first mismatch at sorted position {i}: "
                f"pred {ps[i]} vs gt {gs[i]} (field {name})")
    gp = int((gl == LABEL_SIGNAL).sum())
    gn = int((gl == LABEL_NOISE).sum())
    tp = int(((gl == LABEL_SIGNAL) & (pl == LABEL_SIGNAL)).sum())
    tn = int(((gl == LABEL_NOISE) & (pl == LABEL_NOISE)).sum())
    sr = tp / gp if gp else float("nan")
    nr = tn / gn if gn else float("nan")
    fallback = gp == 0 or gn == 0
    if fallback:
        da = sr if gn == 0 else nr
    else:
        da = (sr + nr) / 2.0
    return DenoiseReport(tp=tp, tn=tn, gp=gp, gn=gn, sr=sr, nr=nr,
                         da=da, da_fallback=fallback)


def overlap_rate(f1: BinaryFrame, f2: BinaryFrame):
    """|both fired| / |either fired| over two co-registered frames; 0/0 -> 0."""
    if f1.bits.shape != f2.bits.shape:
        raise GeometryError("frame shapes differ")
    union = int((f1.bits | f2.bits).sum())
    if union == 0:
        return 0.0
    return int((f1.bits & f2.bits).sum()) / union


def mean_overlap_rate(dual, dt_us, polarity=None):
    """Mean per-window overlap rate of a DualStream (both polarities pooled)."""
    from .core import WindowSequence, binarize, POLARITIES
    w1 = WindowSequence(dual.s1.stream, dt_us)
    pols = POLARITIES if polarity is None else (polarity,)
    rates = []
    for k in range(len(w1)):
        t0, t1 = w1.window_span(k)
        for pol in pols:
            rates.append(overlap_rate(binarize(dual.s1.stream, t0, t1, pol),
                                      binarize(dual.s2.stream, t0, t1, pol)))
    return float(np.mean(rates)) if rates else 0.0


def blank_patch_ratio(frame: BinaryFrame, patch: int):
    """Fraction of PxP patches with no set bit (edge remainders included)."""
    if patch <= 0:
        raise ValueError("patch size must be positive")
    h, w = frame.bits.shape
    blank = total = 0
    for y0 in range(0, h, patch):
        for x0 in range(0, w, patch):
            total += 1
            if not frame.bits[y0:y0 + patch, x0:x0 + patch].any():
                blank += 1
    return blank / total


def preservation_rate(pred, raw_count):
    """Kept-event fraction: |signal-labeled events| / |raw events|."""
    if raw_count == 0:
        return 0.0
    return int((pred.labels == LABEL_SIGNAL).sum()) / raw_count


def event_snr(labeled):
    """10*log10(signal/noise count); capped at +-ESNR_CAP_DB when one side is 0."""
    n_sig = int((labeled.labels == LABEL_SIGNAL).sum())
    n_noise = int((labeled.labels == LABEL_NOISE).sum())
    if n_sig + n_noise == 0:
        raise ValueError("stream has no labeled events")
    if n_noise == 0:
        return ESNR_CAP_DB
    if n_sig == 0:
        return -ESNR_CAP_DB
    return 10.0 * math.log10(n_sig / n_noise)
