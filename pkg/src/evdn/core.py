"""Core event data model: streams, time windows, binary occupancy frames."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# polarity codes
NEG = 0
POS = 1
POLARITIES = (NEG, POS)

# per-event ground-truth label codes (match the binary file format)
LABEL_NOISE = 0
LABEL_SIGNAL = 1
LABEL_UNLABELED = 255


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Geometry:
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(f"bad geometry {self.width}x{self.height}")

    @property
    def npixels(self):
        return self.width * self.height


class Event(NamedTuple):
    t: int  # microseconds
    x: int
    y: int
    p: int  # NEG or POS


def tie_sort_order(t, x, y, p):
    """Canonical event order: t, then y, then x, then p (deterministic ties)."""
    return np.lexsort((p, x, y, t))


class EventStream:
    """Time-ordered event sequence on a fixed pixel grid.

    Stored columnar (t, x, y, p as numpy arrays). Immutable by convention:
    no method mutates in place, all transforms return new streams.
    """

    def __init__(self, geometry, t, x, y, p, duration, sort=False, validate=True):
        self.geometry = geometry
        self.t = np.asarray(t, dtype=np.int64)
        self.x = np.asarray(x, dtype=np.int32)
        self.y = np.asarray(y, dtype=np.int32)
        self.p = np.asarray(p, dtype=np.int8)
        self.duration = int(duration)
        if not (len(self.t) == len(self.x) == len(self.y) == len(self.p)):
            raise ValueError("field arrays must have equal length")
        if sort and len(self.t):
            order = tie_sort_order(self.t, self.x, self.y, self.p)
            self.t = self.t[order]
            self.x = self.x[order]
            self.y = self.y[order]
            self.p = self.p[order]
        if validate:
            self._validate()

    def _validate(self):
        if self.duration < 0:
            raise ValueError("negative duration")
        if len(self.t) == 0:
            return
        if np.any(np.diff(self.t) < 0):
            raise ValueError("timestamps not non-decreasing")
        if self.t[0] < 0 or self.t[-1] >= self.duration:
            raise ValueError("timestamps outside [0, duration)")
        g = self.geometry
        if (self.x.min() < 0 or self.x.max() >= g.width
                or self.y.min() < 0 or self.y.max() >= g.height):
            raise GeometryError("event coordinates outside geometry")
        if np.any((self.p != NEG) & (self.p != POS)):
            raise ValueError("polarity must be 0 or 1")

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i):
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __eq__(self, other):
        return (isinstance(other, EventStream)
                and self.geometry == other.geometry
                and self.duration == other.duration
                and np.array_equal(self.t, other.t)
                and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y)
                and np.array_equal(self.p, other.p))

    def select(self, idx):
        """New stream containing the events at idx (kept in given order)."""
        return EventStream(self.geometry, self.t[idx], self.x[idx], self.y[idx],
                           self.p[idx], self.duration, validate=False)

    def time_slice_indices(self, t0, t1):
        """Index range [i0, i1) of events with t0 <= t < t1."""
        i0, i1 = np.searchsorted(self.t, [t0, t1])
        return int(i0), int(i1)

    @staticmethod
    def empty(geometry, duration=0):
        return EventStream(geometry, [], [], [], [], duration)


def merge_streams(geometry, duration, parts):
    """Concatenate event arrays from several streams and re-sort canonically."""
    if not parts:
        return EventStream.empty(geometry, duration)
    t = np.concatenate([s.t for s in parts])
    x = np.concatenate([s.x for s in parts])
    y = np.concatenate([s.y for s in parts])
    p = np.concatenate([s.p for s in parts])
    return EventStream(geometry, t, x, y, p, duration, sort=True)


class LabeledEventStream:
    """EventStream plus a per-event signal/noise/unlabeled label array."""

    def __init__(self, stream, labels):
        labels = np.asarray(labels, dtype=np.uint8)
        if len(labels) != len(stream):
            raise ValueError("labels length must equal event count")
        bad = ~np.isin(labels, (LABEL_NOISE, LABEL_SIGNAL, LABEL_UNLABELED))
        if np.any(bad):
            raise ValueError("labels must be 0 (noise), 1 (signal) or 255 (unlabeled)")
        self.stream = stream
        self.labels = labels

    def __len__(self):
        return len(self.stream)

    def __eq__(self, other):
        return (isinstance(other, LabeledEventStream)
                and self.stream == other.stream
                and np.array_equal(self.labels, other.labels))

    def select(self, idx):
        return LabeledEventStream(self.stream.select(idx), self.labels[idx])

    def signal(self):
        return self.select(np.flatnonzero(self.labels == LABEL_SIGNAL))

    def noise(self):
        return self.select(np.flatnonzero(self.labels == LABEL_NOISE))

    @staticmethod
    def unlabeled(stream):
        return LabeledEventStream(stream, np.full(len(stream), LABEL_UNLABELED, np.uint8))


@dataclass
class BinaryFrame:
    """Per-polarity occupancy grid for one time window: bit = pixel fired."""
    geometry: Geometry
    polarity: int
    t_start: int
    t_end: int
    bits: np.ndarray  # bool, shape (height, width)

    def same_slot(self, other):
        return (self.geometry == other.geometry and self.polarity == other.polarity
                and self.t_start == other.t_start and self.t_end == other.t_end)

    def count(self):
        return int(self.bits.sum())


def binarize(stream, t0, t1, polarity):
    """Occupancy frame of the given polarity over [t0, t1)."""
    if t0 >= t1:
        raise ValueError(f"empty window [{t0}, {t1})")
    g = stream.geometry
    bits = np.zeros((g.height, g.width), dtype=bool)
    i0, i1 = stream.time_slice_indices(t0, t1)
    sel = stream.p[i0:i1] == polarity
    bits[stream.y[i0:i1][sel], stream.x[i0:i1][sel]] = True
    return BinaryFrame(g, polarity, t0, t1, bits)


def events_at_pixels_indices(stream, t0, t1, polarity, mask):
    """Indices (into stream) of window/polarity events whose mask bit is set."""
    if mask.geometry != stream.geometry:
        raise GeometryError("mask geometry does not match stream")
    i0, i1 = stream.time_slice_indices(t0, t1)
    idx = np.arange(i0, i1)
    keep = (stream.p[i0:i1] == polarity) & mask.bits[stream.y[i0:i1], stream.x[i0:i1]]
    return idx[keep]


def events_at_pixels(stream, t0, t1, polarity, mask):
    return stream.select(events_at_pixels_indices(stream, t0, t1, polarity, mask))


class WindowSequence:
    """Partition of a stream into contiguous half-open windows of length dt.

    Window k covers [k*dt, (k+1)*dt); every event lands in exactly one window.
    """

    def __init__(self, stream, dt):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.stream = stream
        self.dt = int(dt)
        self.n_windows = -(-stream.duration // self.dt)  # ceil
        # boundaries[k] = first event index with t >= k*dt
        edges = np.arange(self.n_windows + 1, dtype=np.int64) * self.dt
        self.boundaries = np.searchsorted(stream.t, edges)

    def __len__(self):
        return self.n_windows

    def window_span(self, k):
        return k * self.dt, (k + 1) * self.dt

    def event_indices(self, k):
        return np.arange(self.boundaries[k], self.boundaries[k + 1])

    def window_of_events(self):
        """Window index of every event in the stream."""
        return self.stream.t // self.dt

    def frame(self, k, polarity):
        t0, t1 = self.window_span(k)
        return binarize(self.stream, t0, t1, polarity)


def window_partition(stream, dt):
    return WindowSequence(stream, dt)
