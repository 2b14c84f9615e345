import numpy as np
import pytest

from evdn.core import (Geometry, EventStream, LabeledEventStream, binarize,
                       events_at_pixels, window_partition, merge_streams,
                       NEG, POS)
from conftest import random_stream

G = Geometry(16, 16)


def make(t, x, y, p, duration=100_000):
    return EventStream(G, t, x, y, p, duration)


class TestStreamInvariants:
    def test_rejects_decreasing_timestamps(self):
        with pytest.raises(ValueError, match="non-decreasing"):
            make([10, 5], [0, 0], [0, 0], [1, 1])

    def test_rejects_out_of_bounds(self):
        with pytest.raises(ValueError):
            make([0], [16], [0], [1])
        with pytest.raises(ValueError):
            make([0], [0], [-1], [1])

    def test_rejects_bad_polarity(self):
        with pytest.raises(ValueError, match="polarity"):
            make([0], [0], [0], [2])

    def test_rejects_timestamp_at_duration(self):
        with pytest.raises(ValueError):
            make([100_000], [0], [0], [1])

    def test_sort_ties_by_y_x_p(self):
        s = EventStream(G, [5, 5, 5], [3, 1, 1], [2, 2, 1], [0, 1, 0],
                        1000, sort=True)
        assert [tuple(e) for e in (s[0], s[1], s[2])] == \
            [(5, 1, 1, 0), (5, 1, 2, 1), (5, 3, 2, 0)]

    def test_labels_length_checked(self):
        s = make([0, 1], [0, 0], [0, 0], [1, 1])
        with pytest.raises(ValueError, match="length"):
            LabeledEventStream(s, [1])


class TestWindowPartition:
    def test_window_count_is_ceiling(self):
        s = make([0], [0], [0], [1], duration=25_000)
        assert len(window_partition(s, 10_000)) == 3

    def test_empty_stream_zero_duration(self):
        s = EventStream.empty(G, 0)
        assert len(window_partition(s, 10_000)) == 0

    def test_boundary_event_in_next_window(self):
        s = make([10_000], [0], [0], [1], duration=20_000)
        ws = window_partition(s, 10_000)
        assert list(ws.event_indices(0)) == []
        assert list(ws.event_indices(1)) == [0]

    def test_zero_dt_rejected(self):
        s = EventStream.empty(G, 1000)
        with pytest.raises(ValueError):
            window_partition(s, 0)

    def test_windows_partition_all_events(self, rng):
        s = random_stream(rng, G, duration=55_000, n=300)
        ws = window_partition(s, 10_000)
        seen = np.concatenate([ws.event_indices(k) for k in range(len(ws))])
        assert np.array_equal(np.sort(seen), np.arange(len(s)))


class TestBinarize:
    def test_multiplicity_collapses(self):
        s = make([10, 10, 20], [1, 1, 2], [1, 1, 3], [1, 1, 1])
        f = binarize(s, 0, 100, POS)
        assert f.count() == 2
        assert f.bits[1, 1] and f.bits[3, 2]

    def test_empty_window_all_zero(self):
        s = make([10], [1], [1], [1])
        assert binarize(s, 50, 100, POS).count() == 0

    def test_polarity_channel_separation(self):
        s = make([10], [1], [1], [0])
        assert binarize(s, 0, 100, POS).count() == 0
        assert binarize(s, 0, 100, NEG).count() == 1

    def test_order_and_duplication_invariant(self, rng):
        s = random_stream(rng, G, duration=10_000, n=200)
        dup = merge_streams(G, 10_000, [s, s])
        assert np.array_equal(binarize(s, 0, 10_000, POS).bits,
                              binarize(dup, 0, 10_000, POS).bits)


class TestEventsAtPixels:
    def test_identity_mask_round_trip(self, rng):
        s = random_stream(rng, G, duration=30_000, n=200)
        for pol in (NEG, POS):
            mask = binarize(s, 0, 10_000, pol)
            sub = events_at_pixels(s, 0, 10_000, pol, mask)
            i0, i1 = s.time_slice_indices(0, 10_000)
            expected = np.flatnonzero(s.p[i0:i1] == pol) + i0
            assert np.array_equal(sub.t, s.t[expected])
            assert np.array_equal(sub.x, s.x[expected])

    def test_zero_mask_empty(self):
        s = make([10], [1], [1], [1])
        mask = binarize(s, 50, 60, POS)  # all zero
        assert len(events_at_pixels(s, 0, 100, POS, mask)) == 0

    def test_single_pixel_mask(self):
        s = make([10, 20, 30], [1, 2, 1], [1, 2, 1], [1, 1, 1])
        mask = binarize(s, 0, 15, POS)  # only (1,1)
        sub = events_at_pixels(s, 0, 100, POS, mask)
        assert list(sub.t) == [10, 30]

    def test_geometry_mismatch_rejected(self):
        s = make([10], [1], [1], [1])
        other = EventStream.empty(Geometry(8, 8), 100)
        mask = binarize(other, 0, 100, POS)
        with pytest.raises(ValueError):
            events_at_pixels(s, 0, 100, POS, mask)
