import numpy as np
import pytest

from evdn.core import Geometry, EventStream, LABEL_SIGNAL
from evdn.filters import (DensityParams, RowColParams, TimeSurfaceParams,
                          density_filter, rowcol_filter, timesurface_filter)
from evdn.metrics import denoise_accuracy
from evdn.simulator import (Scene, PixelModelParams, NoiseParams,
                            render_signal_events, sample_ba_noise)
from evdn.simulator import _merge_labeled
from conftest import random_stream

G = Geometry(16, 16)


def kept_mask(labeled):
    return labeled.labels == LABEL_SIGNAL


class TestDensityFilter:
    def test_isolated_event_removed(self):
        s = EventStream(G, [100], [5], [5], [1], 1000)
        out = density_filter(s, DensityParams(support=1))
        assert not kept_mask(out).any()

    def test_close_pair_second_kept(self):
        s = EventStream(G, [100, 101], [5, 5], [5, 5], [1, 1], 1000)
        out = density_filter(s, DensityParams(radius=1, support=1))
        assert list(kept_mask(out)) == [False, True]

    def test_brute_force_oracle(self, rng):
        s = random_stream(rng, G, duration=40_000, n=300)
        params = DensityParams(radius=2, window_us=5000, support=2)
        out = kept_mask(density_filter(s, params))
        for i in range(len(s)):
            support = sum(
                1 for j in range(len(s))
                if j != i
                and 0 <= s.t[i] - s.t[j] <= params.window_us
                and s.t[j] <= s.t[i]
                and abs(int(s.x[j]) - int(s.x[i])) <= params.radius
                and abs(int(s.y[j]) - int(s.y[i])) <= params.radius)
            assert out[i] == (support >= params.support), i


class TestRowColFilter:
    def test_cold_start_removed(self):
        s = EventStream(G, [100], [5], [5], [1], 1000)
        assert not kept_mask(rowcol_filter(s)).any()

    def test_row_burst_keeps_all_but_first(self):
        t = np.arange(100, 600, 100)
        s = EventStream(G, t, np.arange(5), np.full(5, 3), np.ones(5, int), 1000)
        assert list(kept_mask(rowcol_filter(s, RowColParams(window_us=1000)))) == \
            [False, True, True, True, True]

    def test_naive_table_oracle(self, rng):
        s = random_stream(rng, G, duration=30_000, n=250)
        params = RowColParams(depth=3, window_us=4000)
        out = kept_mask(rowcol_filter(s, params))
        rows = {y: [] for y in range(G.height)}
        cols = {x: [] for x in range(G.width)}
        for i in range(len(s)):
            t, x, y = int(s.t[i]), int(s.x[i]), int(s.y[i])
            recent = any(t - tj <= params.window_us for tj in rows[y][-params.depth:]) \
                or any(t - tj <= params.window_us for tj in cols[x][-params.depth:])
            assert out[i] == recent, i
            rows[y].append(t)
            cols[x].append(t)


class TestTimeSurfaceFilter:
    def test_cold_start_removed(self):
        s = EventStream(G, [100], [5], [5], [1], 1000)
        assert not kept_mask(timesurface_filter(s)).any()

    def test_same_pixel_predecessor_full_support(self):
        # radius 0: support is exactly exp(-(dt)/tau) of the same pixel
        s = EventStream(G, [100, 100], [5, 5], [5, 5], [1, 1], 1000)
        out = timesurface_filter(s, TimeSurfaceParams(radius=0, theta=0.99))
        assert list(kept_mask(out)) == [False, True]  # exp(0) = 1 >= theta

    def test_brute_force_oracle(self, rng):
        s = random_stream(rng, G, duration=30_000, n=250)
        params = TimeSurfaceParams(tau_us=5000, radius=2, theta=0.03)
        out = kept_mask(timesurface_filter(s, params))
        last = {}
        r = params.radius
        for i in range(len(s)):
            t, x, y, p = (int(s.t[i]), int(s.x[i]), int(s.y[i]), int(s.p[i]))
            vals = []
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    tj = last.get((p, x + dx, y + dy))
                    vals.append(0.0 if tj is None else np.exp(-(t - tj) / params.tau_us))
            assert out[i] == (np.mean(vals) >= params.theta), i
            last[(p, x, y)] = t


class TestFilterContracts:
    @pytest.mark.parametrize("fn,params", [
        (density_filter, DensityParams()),
        (rowcol_filter, RowColParams()),
        (timesurface_filter, TimeSurfaceParams()),
    ])
    def test_labels_only_never_mutates(self, rng, fn, params):
        s = random_stream(rng, G, duration=20_000, n=100)
        out = fn(s, params)
        assert out.stream == s

    @pytest.mark.parametrize("fn,params", [
        (density_filter, DensityParams()),
        (rowcol_filter, RowColParams()),
        (timesurface_filter, TimeSurfaceParams()),
    ])
    def test_better_than_chance_on_mixed_scene(self, fn, params):
        g = Geometry(48, 48)
        scene = Scene("moving-bar", g, duration=500_000, velocity=100.0)
        signal = render_signal_events(scene, PixelModelParams(contrast_threshold=0.4))
        noise = sample_ba_noise(NoiseParams(rate=5.0, seed=9), g, 500_000)
        mixed = _merge_labeled(g, 500_000, signal, noise)
        out = fn(mixed.stream, params)
        report = denoise_accuracy(out, mixed)
        assert report.da > 0.5
