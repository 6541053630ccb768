"""
Synthetic bimodal scenes with exact ground truth.

A two-level pattern (checkerboard, bar or random block tag) translates along
a linear or sinusoidal trajectory. The module renders the sharp latent frame
and its binary ground truth at any instant, the blurry frame as the mean of
latent frames over an exposure, and the event stream produced by a
log-intensity level-crossing sensor model.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import BinaryFrame, EventStream, IntensityFrame, write_event_file, write_frame

PATTERNS = ("checkerboard", "bar", "tag")
TRAJECTORIES = ("linear", "sinusoidal")

# largest pattern displacement between two event-generator samples (px)
MAX_STEP_PX = 0.2


@dataclass(frozen=True)
class NoiseSpec:
    event_drop_prob: float = 0.0
    spurious_rate_per_px_s: float = 0.0
    timestamp_jitter_us: int = 0


@dataclass(frozen=True)
class SceneSpec:
    """Scene description; times in seconds, sizes in pixels.

    ``pattern_size`` is the checkerboard cell, the bar width or the tag block
    edge. Linear motion uses ``velocity`` (px/s); sinusoidal motion moves by
    ``amplitude * sin(2 pi t / period)``. The exposure covers
    ``[t_s, t_s + exposure)``.
    """

    width: int = 64
    height: int = 48
    pattern: str = "checkerboard"
    pattern_size: int = 8
    levels: tuple = (40, 200)
    trajectory: str = "linear"
    velocity: tuple = (100.0, 0.0)
    amplitude: tuple = (0.0, 0.0)
    period: float = 1.0
    duration: float = 1.0
    contrast: float = 0.35
    exposure: float = 0.05
    t_s: float = 0.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    blur_samples: int = 64
    tag_blocks: int = 6

    def __post_init__(self):
        dark, bright = self.levels
        if not 0 <= dark < bright <= 255:
            raise ValueError("levels must satisfy 0 <= dark < bright <= 255")
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}")
        if self.trajectory not in TRAJECTORIES:
            raise ValueError(f"trajectory must be one of {TRAJECTORIES}")
        if not 0 < self.exposure <= self.duration:
            raise ValueError("need 0 < exposure <= duration")
        if self.t_s < 0 or self.t_s + self.exposure > self.duration + 1e-12:
            raise ValueError("exposure must lie within the scene duration")
        n = self.noise
        if not 0 <= n.event_drop_prob <= 1 or n.spurious_rate_per_px_s < 0 or n.timestamp_jitter_us < 0:
            raise ValueError("invalid noise settings")
        if self.contrast <= 0 or self.pattern_size <= 0 or self.blur_samples <= 0:
            raise ValueError("contrast, pattern_size and blur_samples must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        if "noise" in d and not isinstance(d["noise"], NoiseSpec):
            d["noise"] = NoiseSpec(**d["noise"])
        for key in ("levels", "velocity", "amplitude"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SceneSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @property
    def exposure_us(self) -> tuple[int, int]:
        """Exposure as integer ``(t_s, T)`` in microseconds."""
        return round(self.t_s * 1e6), max(round(self.exposure * 1e6), 1)

    @property
    def duration_us(self) -> int:
        return round(self.duration * 1e6)

    def max_speed(self) -> float:
        """Upper bound on pattern speed in px/s."""
        if self.trajectory == "linear":
            return math.hypot(*self.velocity)
        return 2 * math.pi / self.period * math.hypot(*self.amplitude)


def offset(spec: SceneSpec, t_us) -> tuple:
    """Pattern displacement (px) at time ``t_us``."""
    t = np.asarray(t_us, dtype=np.float64) / 1e6
    if spec.trajectory == "linear":
        return spec.velocity[0] * t, spec.velocity[1] * t
    s = np.sin(2 * np.pi * t / spec.period)
    return spec.amplitude[0] * s, spec.amplitude[1] * s


def _tag_grid(spec: SceneSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    return rng.integers(0, 2, size=(spec.tag_blocks, spec.tag_blocks))


def pattern_bits(spec: SceneSpec, t_us, grid=None) -> np.ndarray:
    """Binary membership (bright -> 1) of each pixel center at time ``t_us``."""
    ox, oy = offset(spec, t_us)
    X = np.arange(spec.width) + 0.5 - ox
    Y = np.arange(spec.height) + 0.5 - oy
    s = spec.pattern_size
    if spec.pattern == "checkerboard":
        cx = np.floor(X / s).astype(np.int64)
        cy = np.floor(Y / s).astype(np.int64)
        return ((cy[:, None] + cx[None, :]) % 2 == 0).astype(np.uint8)
    if spec.pattern == "bar":
        x0 = (spec.width - s) / 2.0
        row = ((X >= x0) & (X < x0 + s)).astype(np.uint8)
        return np.broadcast_to(row, spec.shape).copy()
    grid = _tag_grid(spec) if grid is None else grid
    g = spec.tag_blocks
    cx = np.floor(X / s).astype(np.int64) % g
    cy = np.floor(Y / s).astype(np.int64) % g
    return grid[cy[:, None], cx[None, :]].astype(np.uint8)


def _intensity(spec: SceneSpec, bits: np.ndarray) -> np.ndarray:
    dark, bright = spec.levels
    return np.where(bits == 1, bright, dark).astype(np.float64)


def render_latent(spec: SceneSpec, t_us: int) -> tuple[IntensityFrame, BinaryFrame]:
    """Sharp latent frame and its ground-truth binary image at ``t_us``."""
    if not 0 <= t_us <= spec.duration_us:
        raise ValueError("time outside the scene duration")
    bits = pattern_bits(spec, t_us)
    return (IntensityFrame(_intensity(spec, bits), t_s=int(t_us), T=1),
            BinaryFrame(bits, t=int(t_us)))


def make_blurry(spec: SceneSpec, t_s: int | None = None, samples: int | None = None) -> IntensityFrame:
    """Mean of ``samples`` latent frames spread uniformly over the exposure."""
    t0, T = spec.exposure_us
    t0 = t0 if t_s is None else int(t_s)
    if t0 + T > spec.duration_us:
        raise ValueError("exposure runs past the scene duration")
    K = spec.blur_samples if samples is None else int(samples)
    grid = _tag_grid(spec) if spec.pattern == "tag" else None
    acc = np.zeros(spec.shape)
    for j in range(K):
        acc += _intensity(spec, pattern_bits(spec, t0 + j * T / K, grid))
    return IntensityFrame(np.clip(np.rint(acc / K), 0, 255).astype(np.uint8), t_s=t0, T=T)


def _crossings(spec, t0, t1):
    """Noise-free level-crossing events in ``[t0, t1)`` as column arrays."""
    D = t1 - t0
    c = spec.contrast
    if D < 2:
        return [np.empty(0, np.int64)] * 4
    steps = max(math.ceil(spec.max_speed() * D / 1e6 / MAX_STEP_PX), 1)
    steps = min(steps, D - 1)
    times = t0 + (np.arange(steps + 1) * (D - 1)) // steps
    grid = _tag_grid(spec) if spec.pattern == "tag" else None

    def log_frame(t):
        return np.log(np.maximum(_intensity(spec, pattern_bits(spec, t, grid)), 1.0)).ravel()

    r_prev = log_frame(times[0])
    ref = r_prev.copy()
    out_t, out_i, out_p = [], [], []
    for j in range(1, steps + 1):
        r_new = log_frame(times[j])
        delta = r_new - ref
        n = np.floor(np.abs(delta) / c + 1e-9).astype(np.int64)
        idx = np.flatnonzero(n)
        if idx.size:
            cnt = n[idx]
            sign = np.sign(delta[idx])
            pix = np.repeat(idx, cnt)
            sgn = np.repeat(sign, cnt)
            # k = 1..n within each pixel's run
            k = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt) + 1
            level = ref[pix] + sgn * k * c
            denom = r_new[pix] - r_prev[pix]
            safe = np.where(denom == 0, 1.0, denom)
            frac = np.where(denom == 0, 1.0, np.clip((level - r_prev[pix]) / safe, 0.0, 1.0))
            ta, tb = times[j - 1], times[j]
            t = np.clip(np.ceil(ta + frac * (tb - ta)), ta + 1, tb).astype(np.int64)
            out_t.append(t)
            out_i.append(pix)
            out_p.append(sgn.astype(np.int8))
            ref[idx] += sign * cnt * c
        r_prev = r_new
    if not out_t:
        return [np.empty(0, np.int64)] * 4
    t = np.concatenate(out_t)
    pix = np.concatenate(out_i)
    return t, pix % spec.width, pix // spec.width, np.concatenate(out_p)


def emit_events(spec: SceneSpec, window: tuple[int, int] | None = None) -> EventStream:
    """Events of a log-intensity level-crossing sensor over ``window``.

    Args:
        spec: scene; ``spec.noise`` controls dropped, spurious and jittered events.
        window: ``(t0, t1)`` half-open in microseconds; defaults to the exposure.

    Each pixel keeps a reference log level, initialized at ``t0``, and fires
    one event per contrast step crossed. Crossing times are interpolated
    between generator samples.
    """
    if window is None:
        t_s, T = spec.exposure_us
        window = (t_s, t_s + T)
    t0, t1 = int(window[0]), int(window[1])
    if not (0 <= t0 <= t1 <= spec.duration_us):
        raise ValueError("window outside the scene duration")
    t, x, y, p = _crossings(spec, t0, t1)
    noise = spec.noise
    rng = np.random.default_rng([spec.seed, t0, t1])
    if noise.event_drop_prob > 0 and t.size:
        keep = rng.random(t.size) >= noise.event_drop_prob
        t, x, y, p = t[keep], x[keep], y[keep], p[keep]
    if noise.spurious_rate_per_px_s > 0 and t1 > t0:
        lam = noise.spurious_rate_per_px_s * (t1 - t0) / 1e6
        counts = rng.poisson(lam, size=spec.width * spec.height)
        pix = np.repeat(np.arange(counts.size), counts)
        t = np.concatenate([t, rng.integers(t0, t1, size=pix.size)])
        x = np.concatenate([x, pix % spec.width])
        y = np.concatenate([y, pix // spec.width])
        p = np.concatenate([p, rng.choice(np.array([-1, 1], np.int8), size=pix.size)])
    if noise.timestamp_jitter_us > 0 and t.size:
        j = int(noise.timestamp_jitter_us)
        t = np.clip(t + rng.integers(-j, j + 1, size=t.size), t0, max(t1 - 1, t0))
    return EventStream.from_arrays(spec.width, spec.height, t, x, y, p)


def ground_truth_frames(spec: SceneSpec, fps: float, span: tuple[int, int] | None = None) -> list[BinaryFrame]:
    """Ground-truth binaries sampled like :func:`ebr.video.render_video`."""
    if span is None:
        t_s, T = spec.exposure_us
        span = (t_s, t_s + T)
    t0, t1 = span
    count = math.floor((t1 - t0) * fps / 1e6) + 1
    return [render_latent(spec, t0 + math.floor(i * 1e6 / fps))[1] for i in range(count)]


def simulate(spec: SceneSpec, out_dir, fps: float = 1000.0) -> dict:
    """Write events, blurry frame, ground truth and a spec echo to ``out_dir``.

    Events cover the whole scene duration; the blurry frame and the
    ground-truth frames cover the exposure.
    """
    os.makedirs(out_dir, exist_ok=True)
    events = emit_events(spec, (0, spec.duration_us))
    write_event_file(events, os.path.join(out_dir, "events.csv"))
    write_frame(make_blurry(spec), os.path.join(out_dir, "blurry.pgm"))
    gts = ground_truth_frames(spec, fps)
    for i, gt in enumerate(gts):
        write_frame(gt, os.path.join(out_dir, f"gt_{i:06d}.pgm"))
    echo = {"spec": spec.to_dict(), "fps": fps, "events": len(events),
            "gt_times_us": [g.t for g in gts]}
    with open(os.path.join(out_dir, "spec-echo.json"), "w") as fh:
        json.dump(echo, fh, indent=2)
    return echo
