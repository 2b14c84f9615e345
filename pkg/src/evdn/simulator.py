"""Behavioral event-camera simulator.

Signal events come from a deterministic per-pixel log-intensity crossing
model (reference level reset by +-C on each emitted event). Background
activity noise is a per-pixel homogeneous Poisson process with a seeded RNG,
so every run is reproducible. Both parts carry ground-truth labels.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (Geometry, EventStream, LabeledEventStream, merge_streams,
                   tie_sort_order, NEG, POS, LABEL_SIGNAL, LABEL_NOISE)

SCENE_KINDS = ("constant", "moving-bar", "moving-texture", "ramp")


@dataclass
class Scene:
    """Parametric intensity scene. log_intensity(t) gives ln I over the grid."""
    kind: str
    geometry: Geometry
    duration: int                  # microseconds
    bar_width: int = 8             # moving-bar
    velocity: float = 100.0        # px/s, horizontal drift of bar/texture
    contrast: float = 1.0          # log-intensity step of the bar over background
    texture_seed: int = 0          # moving-texture
    texture_scale: float = 1.0     # log-intensity amplitude of the texture
    ramp_slope: float = 0.5        # log-intensity per second
    _texture: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if not (math.isfinite(self.velocity) and self.duration >= 0):
            raise ValueError("velocity and duration must be finite")
        if self.kind == "moving-texture":
            rng = np.random.default_rng(self.texture_seed)
            g = self.geometry
            tex = rng.standard_normal((g.height, g.width))
            # cheap smoothing so neighbouring pixels correlate like a real scene
            for ax in (0, 1):
                tex = (tex + np.roll(tex, 1, ax) + np.roll(tex, -1, ax)) / 3.0
            self._texture = tex * self.texture_scale

    def log_intensity(self, t_us):
        g = self.geometry
        t_s = t_us * 1e-6
        if self.kind == "constant":
            return np.zeros((g.height, g.width))
        if self.kind == "ramp":
            return np.full((g.height, g.width), self.ramp_slope * t_s)
        shift = int(round(self.velocity * t_s))
        if self.kind == "moving-bar":
            xs = (np.arange(g.width) - shift) % g.width
            row = np.where(xs < self.bar_width, self.contrast, 0.0)
            return np.broadcast_to(row, (g.height, g.width)).copy()
        # moving-texture
        return np.roll(self._texture, shift, axis=1)


@dataclass
class PixelModelParams:
    contrast_threshold: float = 0.25   # log-intensity units
    refractory_us: int = 0
    dt_sim_us: int = 100

    def __post_init__(self):
        if self.contrast_threshold <= 0:
            raise ValueError("contrast threshold must be > 0")
        if self.dt_sim_us <= 0:
            raise ValueError("dt_sim must be > 0")
        if self.refractory_us < 0:
            raise ValueError("refractory period must be >= 0")


@dataclass
class NoiseParams:
    rate: float | np.ndarray = 3.0   # events / pixel / second, split across polarities
    polarity_split: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if np.any(np.asarray(self.rate) < 0):
            raise ValueError("noise rate must be >= 0")
        if not 0.0 <= self.polarity_split <= 1.0:
            raise ValueError("polarity split must be in [0, 1]")

    def rate_map(self, geometry):
        r = np.asarray(self.rate, dtype=float)
        if r.ndim == 0:
            return np.full((geometry.height, geometry.width), float(r))
        if r.shape != (geometry.height, geometry.width):
            raise ValueError("rate map shape does not match geometry")
        return r


def render_signal_events(scene, pix):
    """Deterministic signal events from threshold crossings of log intensity."""
    g = scene.geometry
    c = pix.contrast_threshold
    l_ref = scene.log_intensity(0)
    last_fire = np.full((g.height, g.width), -np.inf)
    ts, xs, ys, ps = [], [], [], []
    yy, xx = np.mgrid[0:g.height, 0:g.width]
    for t in range(pix.dt_sim_us, scene.duration, pix.dt_sim_us):
        lum = scene.log_intensity(t)
        diff = lum - l_ref
        n_cross = np.floor(np.abs(diff) / c).astype(np.int64)
        if pix.refractory_us > 0:
            n_cross[t - last_fire < pix.refractory_us] = 0
        fired = n_cross > 0
        if not fired.any():
            continue
        counts = n_cross[fired]
        pol = np.where(diff[fired] > 0, POS, NEG).astype(np.int8)
        ts.append(np.full(counts.sum(), t, dtype=np.int64))
        xs.append(np.repeat(xx[fired], counts))
        ys.append(np.repeat(yy[fired], counts))
        ps.append(np.repeat(pol, counts))
        l_ref = l_ref + np.where(diff > 0, 1, -1) * n_cross * c
        last_fire[fired] = t
    if ts:
        stream = EventStream(g, np.concatenate(ts), np.concatenate(xs),
                             np.concatenate(ys), np.concatenate(ps),
                             scene.duration, sort=True)
    else:
        stream = EventStream.empty(g, scene.duration)
    return LabeledEventStream(stream, np.full(len(stream), LABEL_SIGNAL, np.uint8))


def sample_ba_noise(noise, geometry, duration, seed=None):
    """Homogeneous Poisson BA noise per pixel and polarity, labeled noise."""
    rng = np.random.default_rng(noise.seed if seed is None else seed)
    g = geometry
    t_s = duration * 1e-6
    total = noise.rate_map(g) * t_s  # mean event count per pixel
    ts, xs, ys, ps = [], [], [], []
    yy, xx = np.mgrid[0:g.height, 0:g.width]
    for pol, frac in ((POS, noise.polarity_split), (NEG, 1.0 - noise.polarity_split)):
        counts = rng.poisson(total * frac)
        n = int(counts.sum())
        if n == 0:
            continue
        ts.append(rng.integers(0, max(duration, 1), size=n, dtype=np.int64))
        xs.append(np.repeat(xx, counts.ravel()))
        ys.append(np.repeat(yy, counts.ravel()))
        ps.append(np.full(n, pol, dtype=np.int8))
    if ts:
        stream = EventStream(g, np.concatenate(ts), np.concatenate(xs),
                             np.concatenate(ys), np.concatenate(ps),
                             duration, sort=True)
    else:
        stream = EventStream.empty(g, duration)
    return LabeledEventStream(stream, np.full(len(stream), LABEL_NOISE, np.uint8))


def _merge_labeled(geometry, duration, signal, noise):
    t = np.concatenate([signal.stream.t, noise.stream.t])
    x = np.concatenate([signal.stream.x, noise.stream.x])
    y = np.concatenate([signal.stream.y, noise.stream.y])
    p = np.concatenate([signal.stream.p, noise.stream.p])
    labels = np.concatenate([signal.labels, noise.labels])
    order = tie_sort_order(t, x, y, p)
    stream = EventStream(geometry, t[order], x[order], y[order], p[order], duration)
    return LabeledEventStream(stream, labels[order])


@dataclass
class DualStream:
    """Two co-registered samplings sharing signal, with independent noise."""
    s1: LabeledEventStream
    s2: LabeledEventStream
    geometry: Geometry
    duration: int


def _jitter(signal, sigma_us, duration, rng):
    if sigma_us <= 0:
        return signal
    s = signal.stream
    t = s.t + np.round(rng.normal(0, sigma_us, len(s))).astype(np.int64)
    t = np.clip(t, 0, duration - 1)
    order = tie_sort_order(t, s.x, s.y, s.p)
    stream = EventStream(s.geometry, t[order], s.x[order], s.y[order],
                         s.p[order], duration)
    return LabeledEventStream(stream, signal.labels[order])


def dual_sample(scene, pix, noise, seed1, seed2, jitter_sigma_us=0.0):
    """Render signal once, add independently seeded noise to two copies."""
    if seed1 == seed2:
        raise ValueError("seed1 and seed2 must differ (noise must be independent)")
    g, dur = scene.geometry, scene.duration
    signal = render_signal_events(scene, pix)
    n1 = sample_ba_noise(noise, g, dur, seed=seed1)
    n2 = sample_ba_noise(noise, g, dur, seed=seed2)
    sig1 = _jitter(signal, jitter_sigma_us, dur, np.random.default_rng(seed1 + 0x5157))
    sig2 = _jitter(signal, jitter_sigma_us, dur, np.random.default_rng(seed2 + 0x5157))
    return DualStream(_merge_labeled(g, dur, sig1, n1),
                      _merge_labeled(g, dur, sig2, n2), g, dur)
