"""Runtime measurement of the binarization and video pipelines."""
from __future__ import annotations

import statistics
import time

import numpy as np

from .binarize import binarize_frame
from .core import EventStream, IntensityFrame, slice_exposure
from .fusion import estimate_thresholds
from .video import propagate


def _median_seconds(fn, reps: int) -> float:
    fn()  # warm-up: JIT compilation and caches
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _entry(n_events: int, seconds: float, span_s: float) -> dict:
    return {
        "events": n_events,
        "seconds": seconds,
        "events_per_s": n_events / seconds if seconds > 0 else float("inf"),
        "realtime_factor": span_s / seconds if seconds > 0 else float("inf"),
    }


def bench(events: EventStream, frame: IntensityFrame, reps: int = 5, c: float = 0.35) -> dict:
    """Time threshold estimation + binarization and video propagation.

    The image pipeline runs on the events of the frame's exposure; the video
    pipelines run on every event from the exposure start onwards. Each
    measurement is the median of ``reps`` runs after one warm-up run. The
    real-time factor is the covered sequence length over processing time.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    exposure = slice_exposure(events, frame.t_s, frame.T)
    params = estimate_thresholds(frame, exposure, c)
    init = binarize_frame(frame, exposure, params)
    tail = events.take(slice(int(np.searchsorted(events.t, frame.t_s)), None))

    def image_total():
        binarize_frame(frame, exposure, estimate_thresholds(frame, exposure, c))

    t_img = _median_seconds(image_total, reps)
    t_vid = _median_seconds(lambda: propagate(init, tail, c, params.theta_e, False), reps)
    t_fil = _median_seconds(lambda: propagate(init, tail, c, params.theta_e, True), reps)

    exp_span = frame.T / 1e6
    _, hi = tail.span()
    vid_span = max(hi - frame.t_s, frame.T) / 1e6 if len(tail) else exp_span
    report = {
        "reps": reps,
        "thresholds": params.to_dict(),
        "image_total": _entry(len(exposure), t_img, exp_span),
        "video": _entry(len(tail), t_vid, vid_span),
        "video_filtered": _entry(len(tail), t_fil, vid_span),
    }
    report["pipeline_realtime_factor"] = vid_span / (t_img + t_fil) if t_img + t_fil > 0 else float("inf")
    return report
