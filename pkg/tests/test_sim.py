import json
import math

import numpy as np
import pytest

from ebr.core import parse_event_file, read_binary_frame, read_frame
from ebr.sim import (
    NoiseSpec,
    SceneSpec,
    emit_events,
    ground_truth_frames,
    make_blurry,
    pattern_bits,
    render_latent,
    simulate,
)

from oracles import level_crossings


def still(**kw):
    return SceneSpec(velocity=(0.0, 0.0), **kw)


class TestRenderLatent:
    def test_origin_checkerboard(self):
        _, gt = render_latent(still(width=16, height=8, pattern_size=4), 0)
        expected = [[1 if (x // 4 + y // 4) % 2 == 0 else 0 for x in range(16)] for y in range(8)]
        assert gt.bits.tolist() == expected

    def test_bar_position(self):
        _, gt = render_latent(still(width=20, height=3, pattern="bar", pattern_size=4), 0)
        assert gt.bits[0].tolist() == [0] * 8 + [1] * 4 + [0] * 8

    def test_periodic_after_two_cells(self):
        spec = SceneSpec(pattern_size=8, velocity=(160.0, 0.0))
        # 16 px = one full checkerboard period after 0.1 s
        start = render_latent(spec, 0)[1].bits
        assert np.array_equal(render_latent(spec, 100_000)[1].bits, start)
        assert np.array_equal(render_latent(spec, 50_000)[1].bits, 1 - start)

    def test_ground_truth_is_midpoint_threshold(self):
        spec = SceneSpec(pattern="tag", velocity=(37.0, 11.0), seed=5)
        for t in (0, 123_456, 999_999):
            latent, gt = render_latent(spec, t)
            assert np.array_equal(gt.bits, latent.pixels > sum(spec.levels) / 2)
            assert set(np.unique(latent.pixels)) <= set(spec.levels)

    def test_time_outside_duration(self):
        with pytest.raises(ValueError):
            render_latent(SceneSpec(), 2_000_000)


class TestMakeBlurry:
    def test_static_scene_is_sharp(self):
        spec = still(pattern="tag")
        assert np.array_equal(make_blurry(spec).pixels, render_latent(spec, 0)[0].pixels)

    def test_single_sample_is_latent(self):
        spec = SceneSpec(velocity=(120.0, 30.0), t_s=0.2)
        frame = make_blurry(spec, samples=1)
        assert np.array_equal(frame.pixels, render_latent(spec, 200_000)[0].pixels)
        assert (frame.t_s, frame.T) == spec.exposure_us

    def test_moving_bar_edges_form_linear_ramp(self):
        spec = SceneSpec(width=40, height=2, pattern="bar", pattern_size=12, velocity=(120.0, 0.0),
                         exposure=0.05, duration=0.05)
        d = 120.0 * 0.05
        dark, bright = spec.levels
        x0 = (spec.width - spec.pattern_size) / 2
        row = make_blurry(spec).pixels[0].astype(float)
        tol = (bright - dark) / spec.blur_samples + 0.5
        for i in range(spec.width):
            c = i + 0.5
            lo, hi = c - x0 - spec.pattern_size, c - x0
            frac = max(0.0, min(hi, d) - max(lo, 0.0)) / d
            assert abs(row[i] - (dark + (bright - dark) * frac)) <= tol
        # trailing edge: constant steps of (bright - dark) / d per pixel
        ramp = row[int(x0) + spec.pattern_size: int(x0) + spec.pattern_size + 6]
        assert np.abs(np.diff(ramp) + (bright - dark) / d).max() <= 1.0


class TestEmitEvents:
    def test_static_scene_is_silent(self):
        assert len(emit_events(still(pattern="tag"))) == 0

    def test_step_count_matches_level_crossing_oracle(self):
        spec = SceneSpec(pattern="bar", pattern_size=10, velocity=(100.0, 0.0), exposure=0.05, duration=0.05)
        ev = emit_events(spec)
        pos, neg = level_crossings(math.log(40), math.log(200), 0.35, 20000)
        assert (pos, neg) == (math.floor(math.log(5) / 0.35), 0) == (4, 0)
        counts = {}
        for e in ev:
            counts.setdefault((e.x, e.y), []).append(e.p)
        assert counts
        for ps in counts.values():
            assert len(ps) == 4 and len(set(ps)) == 1
        rising = sorted({x for (x, _), ps in counts.items() if ps[0] == 1})
        falling = sorted({x for (x, _), ps in counts.items() if ps[0] == -1})
        assert rising == list(range(37, 42)) and falling == list(range(27, 32))

    def test_round_trip_is_balanced(self):
        spec = SceneSpec(pattern="bar", pattern_size=10, trajectory="sinusoidal", amplitude=(6.0, 0.0),
                         period=0.5, duration=0.5, exposure=0.5)
        ev = emit_events(spec, (0, 500_000))
        assert len(ev) > 0
        bal = np.zeros(spec.shape, int)
        np.add.at(bal, (ev.y, ev.x), ev.p)
        assert (bal == 0).all()

    def test_events_are_time_sorted_and_in_window(self):
        spec = SceneSpec(velocity=(80.0, 40.0), noise=NoiseSpec(0.1, 5.0, 30))
        ev = emit_events(spec, (100_000, 300_000))
        assert (np.diff(ev.t) >= 0).all()
        assert ev.t.min() >= 100_000 and ev.t.max() < 300_000

    def test_reproducible(self):
        spec = SceneSpec(pattern="tag", velocity=(50.0, -20.0), noise=NoiseSpec(0.2, 3.0, 50), seed=11)
        assert emit_events(spec) == emit_events(spec)
        assert np.array_equal(make_blurry(spec).pixels, make_blurry(spec).pixels)
        other = emit_events(SceneSpec(**{**spec.__dict__, "seed": 12}))
        assert other != emit_events(spec)

    def test_spurious_rate(self):
        spec = still(noise=NoiseSpec(spurious_rate_per_px_s=20.0))
        n = len(emit_events(spec, (0, 1_000_000)))
        expected = 20.0 * spec.width * spec.height
        assert abs(n - expected) < 5 * math.sqrt(expected)

    def test_drop_probability(self):
        spec = SceneSpec(velocity=(200.0, 0.0))
        full = len(emit_events(spec, (0, 500_000)))
        half = len(emit_events(SceneSpec(velocity=(200.0, 0.0), noise=NoiseSpec(event_drop_prob=0.5)),
                               (0, 500_000)))
        assert abs(half / full - 0.5) < 0.05

    def test_count_scales_linearly_with_speed(self):
        base = None
        for v in (40.0, 80.0, 160.0):
            n = len(emit_events(SceneSpec(velocity=(v, 0.5 * v)), (0, 500_000)))
            if base is None:
                base = n / v
            assert abs(n / v / base - 1) <= 0.2


def test_spec_json_round_trip(tmp_path):
    spec = SceneSpec(pattern="bar", velocity=(1.0, 2.0), noise=NoiseSpec(0.1, 0.5, 3), seed=9)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert SceneSpec.from_json(path) == spec


@pytest.mark.parametrize("bad", [dict(levels=(200, 40)), dict(exposure=2.0), dict(pattern="stripes"),
                                 dict(noise=NoiseSpec(event_drop_prob=1.5)), dict(t_s=0.99, exposure=0.05)])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        SceneSpec(**bad)


def test_simulate_writes_artifacts(tmp_path):
    spec = SceneSpec(width=24, height=16, velocity=(200.0, 0.0), exposure=0.01, duration=0.02)
    echo = simulate(spec, tmp_path, fps=500)
    ev = parse_event_file(tmp_path / "events.csv")
    assert len(ev) == echo["events"] > 0
    blurry = read_frame(tmp_path / "blurry.pgm")
    assert (blurry.t_s, blurry.T) == (0, 10_000)
    gts = sorted(tmp_path.glob("gt_*.pgm"))
    assert len(gts) == 6
    assert read_binary_frame(gts[0]) == ground_truth_frames(spec, 500)[0]
    assert SceneSpec.from_dict(json.loads((tmp_path / "spec-echo.json").read_text())["spec"]) == spec


def test_pattern_is_bright_at_origin_cell():
    assert pattern_bits(still(), 0)[0, 0] == 1
