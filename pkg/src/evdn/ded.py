"""Dual-events denoising: spatial similarity of two samplings, then a
spatiotemporal correlation test that rejects residual isolated events.

Stage 1 keeps, per window and polarity, only events at pixels that fired in
BOTH samplings (AND of the two occupancy frames). Stage 2 scores every
surviving event by the events in its spatial neighbourhood over a few
consecutive windows: it survives if the neighbourhood holds at least
``n_min`` events whose mean consecutive-timestamp gap is at most
``tau_corr_us``. Output is stream 1 relabeled: kept = signal, rest = noise.
"""

from dataclasses import dataclass

import numpy as np

from .core import (EventStream, LabeledEventStream, BinaryFrame, GeometryError,
                   WindowSequence, binarize, events_at_pixels_indices,
                   POLARITIES, LABEL_SIGNAL, LABEL_NOISE)


@dataclass
class DedParams:
    dt_us: int = 10_000        # binarization window
    n_windows: int = 3         # consecutive windows forming the time context
    radius: int = 2            # Chebyshev neighbourhood radius (5x5 default)
    n_min: int = 3             # minimum events in the context to keep
    tau_corr_us: float = 10_000.0  # max mean consecutive-timestamp gap
    context: str = "centered"  # "centered" or "trailing" window context
    timestamp_source: int = 1  # which stream supplies the GT events (1 or 2)

    def __post_init__(self):
        if self.dt_us <= 0 or self.n_windows < 1 or self.radius < 0:
            raise ValueError("bad DED window parameters")
        if self.n_min < 1 or self.tau_corr_us <= 0:
            raise ValueError("bad DED correlation parameters")
        if self.context not in ("centered", "trailing"):
            raise ValueError("context must be 'centered' or 'trailing'")
        if self.timestamp_source not in (1, 2):
            raise ValueError("timestamp_source must be 1 or 2")

    def context_range(self, k, n_total):
        """Window index range [k0, k1] (inclusive), clamped at the ends."""
        if self.context == "centered":
            half = (self.n_windows - 1) // 2
            k0, k1 = k - half, k - half + self.n_windows - 1
        else:
            k0, k1 = k - self.n_windows + 1, k
        return max(k0, 0), min(k1, n_total - 1)


def spatial_similarity(f1: BinaryFrame, f2: BinaryFrame) -> BinaryFrame:
    """Pixels that fired in both frames (the consistent part)."""
    if not f1.same_slot(f2):
        raise GeometryError("frames differ in geometry, polarity or window")
    return BinaryFrame(f1.geometry, f1.polarity, f1.t_start, f1.t_end,
                       f1.bits & f2.bits)


def correlation_stat(timestamps):
    """(count, mean consecutive gap in us) of a sorted timestamp array.

    Fewer than two events has no gap; reported as +inf so any finite
    tolerance rejects it.
    """
    ts = np.asarray(timestamps)
    n = len(ts)
    if n < 2:
        return n, np.inf
    return n, float(np.diff(ts).mean())


def correlation_filter(stream: EventStream, params: DedParams, duration=None):
    """Keep events whose neighbourhood context passes the correlation test.

    The context of an event in window k holds every event of ``stream``
    (all polarities) within Chebyshev radius over the clamped window range.
    Returns the indices of surviving events.
    """
    dur = stream.duration if duration is None else duration
    n_total = max(-(-dur // params.dt_us), 1)
    t, x, y = stream.t, stream.x, stream.y
    keep = np.zeros(len(stream), dtype=bool)
    win = t // params.dt_us
    for i in range(len(stream)):
        k0, k1 = params.context_range(int(win[i]), n_total)
        i0, i1 = np.searchsorted(t, [k0 * params.dt_us, (k1 + 1) * params.dt_us])
        near = ((np.abs(x[i0:i1] - x[i]) <= params.radius)
                & (np.abs(y[i0:i1] - y[i]) <= params.radius))
        n, mean_gap = correlation_stat(t[i0:i1][near])
        keep[i] = n >= params.n_min and mean_gap <= params.tau_corr_us
    return np.flatnonzero(keep)


def retained_indices(dual, params: DedParams):
    """Stage-1 survivors: indices (into the source stream) at X* pixels."""
    src = dual.s1.stream if params.timestamp_source == 1 else dual.s2.stream
    other = dual.s2.stream if params.timestamp_source == 1 else dual.s1.stream
    if src.geometry != other.geometry:
        raise GeometryError("dual streams have mismatched geometry")
    windows = WindowSequence(src, params.dt_us)
    kept = []
    for k in range(len(windows)):
        t0, t1 = windows.window_span(k)
        for pol in POLARITIES:
            x_star = spatial_similarity(binarize(src, t0, t1, pol),
                                        binarize(other, t0, t1, pol))
            kept.append(events_at_pixels_indices(src, t0, t1, pol, x_star))
    return np.sort(np.concatenate(kept)) if kept else np.array([], dtype=int)


def ded_pipeline(dual, params: DedParams = None,
                 spatial_only=False, correlation_only=False):
    """Full DED: X* retention then correlation filtering, labeled output.

    ``spatial_only`` / ``correlation_only`` run the single-stage ablations.
    """
    params = params or DedParams()
    src = dual.s1.stream if params.timestamp_source == 1 else dual.s2.stream
    if correlation_only:
        stage1 = np.arange(len(src))
    else:
        stage1 = retained_indices(dual, params)
    if spatial_only:
        final = stage1
    else:
        retained = src.select(stage1)
        final_parts = []
        for pol in POLARITIES:
            pol_idx = np.flatnonzero(retained.p == pol)
            sub = retained.select(pol_idx)
            surv = correlation_filter(sub, params, duration=dual.duration)
            final_parts.append(stage1[pol_idx[surv]])
        final = np.sort(np.concatenate(final_parts)) if final_parts \
            else np.array([], dtype=int)
    labels = np.full(len(src), LABEL_NOISE, dtype=np.uint8)
    labels[final] = LABEL_SIGNAL
    return LabeledEventStream(src, labels)
