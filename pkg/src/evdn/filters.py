"""Classical baseline denoisers: spatiotemporal density, row/column memory,
and time-surface support filtering.

These are representative implementations of the published filter families,
not bit-exact ports; every filter labels events (signal/noise) and never
drops or mutates them.
"""

from dataclasses import dataclass

import numpy as np

from .core import LabeledEventStream, LABEL_SIGNAL, LABEL_NOISE


@dataclass
class DensityParams:
    radius: int = 2
    window_us: int = 10_000
    support: int = 2          # K: other events required in the neighbourhood

    def __post_init__(self):
        if self.radius < 0 or self.window_us <= 0 or self.support < 1:
            raise ValueError("bad density filter parameters")


@dataclass
class RowColParams:
    depth: int = 4            # timestamps remembered per row / column
    window_us: int = 10_000

    def __post_init__(self):
        if self.depth < 1 or self.window_us <= 0:
            raise ValueError("bad row/column filter parameters")


@dataclass
class TimeSurfaceParams:
    tau_us: float = 20_000.0
    radius: int = 2
    theta: float = 0.05       # mean-support threshold, in (0, 1)

    def __post_init__(self):
        if self.tau_us <= 0 or self.radius < 0 or not 0 < self.theta < 1:
            raise ValueError("bad time-surface filter parameters")


def _labeled(stream, keep):
    labels = np.where(keep, LABEL_SIGNAL, LABEL_NOISE).astype(np.uint8)
    return LabeledEventStream(stream, labels)


def density_filter(stream, params: DensityParams = None):
    """Keep events with >= K other events nearby in the trailing window.

    "Nearby" is Chebyshev distance <= radius, any polarity; the window is
    t - window_us <= t_other <= t, excluding the event itself.
    """
    params = params or DensityParams()
    t, x, y = stream.t, stream.x, stream.y
    keep = np.zeros(len(stream), dtype=bool)
    for i in range(len(stream)):
        i0 = np.searchsorted(t, t[i] - params.window_us, side="left")
        i1 = np.searchsorted(t, t[i], side="right")
        near = ((np.abs(x[i0:i1] - x[i]) <= params.radius)
                & (np.abs(y[i0:i1] - y[i]) <= params.radius))
        keep[i] = int(near.sum()) - 1 >= params.support
    return _labeled(stream, keep)


def rowcol_filter(stream, params: RowColParams = None):
    """Keep events supported by a recent timestamp in their row or column.

    Each row and column remembers its last ``depth`` event timestamps; an
    event is kept if any remembered timestamp of its row or column lies
    within the trailing window. Memories update after the decision, so the
    first event of a cold stream is always dropped.
    """
    params = params or RowColParams()
    g = stream.geometry
    row_mem = np.full((g.height, params.depth), -np.inf)
    col_mem = np.full((g.width, params.depth), -np.inf)
    row_ptr = np.zeros(g.height, dtype=int)
    col_ptr = np.zeros(g.width, dtype=int)
    keep = np.zeros(len(stream), dtype=bool)
    for i in range(len(stream)):
        t, x, y = int(stream.t[i]), int(stream.x[i]), int(stream.y[i])
        recent = ((t - row_mem[y] <= params.window_us).any()
                  or (t - col_mem[x] <= params.window_us).any())
        keep[i] = recent
        row_mem[y, row_ptr[y]] = t
        row_ptr[y] = (row_ptr[y] + 1) % params.depth
        col_mem[x, col_ptr[x]] = t
        col_ptr[x] = (col_ptr[x] + 1) % params.depth
    return _labeled(stream, keep)


def timesurface_filter(stream, params: TimeSurfaceParams = None):
    """Keep events whose decayed neighbourhood time surface is active enough.

    The surface stores the last event time per pixel and polarity; support
    is the mean of exp(-(t - t_last)/tau) over the (2r+1)^2 patch of the
    event's polarity channel (never-fired pixels contribute 0). The event's
    own pixel is read before being updated.
    """
    params = params or TimeSurfaceParams()
    g = stream.geometry
    r = params.radius
    # pad so patch slicing never clips; padding stays at -inf (support 0)
    last = np.full((2, g.height + 2 * r, g.width + 2 * r), -np.inf)
    keep = np.zeros(len(stream), dtype=bool)
    for i in range(len(stream)):
        t, x, y, p = (int(stream.t[i]), int(stream.x[i]),
                      int(stream.y[i]), int(stream.p[i]))
        patch = last[p, y:y + 2 * r + 1, x:x + 2 * r + 1]
        support = np.exp(-(t - patch) / params.tau_us).mean()
        keep[i] = support >= params.theta
        last[p, y + r, x + r] = t
    return _labeled(stream, keep)


BASELINES = {
    "density": (density_filter, DensityParams),
    "rowcol": (rowcol_filter, RowColParams),
    "timesurface": (timesurface_filter, TimeSurfaceParams),
}
