"""
Dual-stage recovery of the latent binary image at exposure start.

Pixels whose events show a large first edge are classified from the edge
direction; every other pixel is thresholded in the blurry frame. The two
partial results cover disjoint pixel sets and are merged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import (
    ONE,
    UNDEFINED,
    ZERO,
    BinaryFrame,
    DimensionMismatch,
    EbrError,
    EventStream,
    IntensityFrame,
    slice_exposure,
)
from .fusion import ThresholdSet, estimate_thresholds


class PartitionError(EbrError, AssertionError):
    """Event-stage and image-stage domains overlap or leave a gap."""


@dataclass(frozen=True)
class EventSpaceStats:
    """Work counters of one event-space pass.

    ``integrated`` events reached a live accumulator; ``skipped`` arrived at
    a pixel that had already crossed and cost one flag test each.
    """

    integrated: int
    skipped: int
    classified: int

    @property
    def visits(self) -> int:
        return self.integrated + self.skipped


@numba.njit(cache=True)
def _event_space_kernel(x, y, p, height, width, c, theta_e):
    tri = np.full((height, width), -1, np.int8)
    a_pos = np.zeros((height, width))
    a_neg = np.zeros((height, width))
    integrated = 0
    skipped = 0
    classified = 0
    for k in range(x.shape[0]):
        xi = x[k]
        yi = y[k]
        if tri[yi, xi] != -1:
            skipped += 1
            continue
        integrated += 1
        if p[k] > 0:
            a_pos[yi, xi] += c
            if a_pos[yi, xi] > theta_e:
                tri[yi, xi] = 0
                classified += 1
        else:
            a_neg[yi, xi] += c
            if a_neg[yi, xi] > theta_e:
                tri[yi, xi] = 1
                classified += 1
    return tri, integrated, skipped, classified


def classify_event_space(events: EventStream, window, c: float, theta_e: float,
                         return_stats: bool = False):
    """Classify pixels by the direction of their first large edge.

    Rising and falling event mass are integrated separately from the window
    start; the first accumulator to exceed ``theta_e`` decides the pixel
    (rising -> 0, falling -> 1). Pixels that never cross stay UNDEFINED.

    Args:
        events: time-sorted stream.
        window: ``(t_s, T)`` or None to use every event.
        c: event contrast.
        theta_e: edge threshold in log-intensity units.
        return_stats: also return an :class:`EventSpaceStats`.

    Returns:
        int8 array of ZERO / ONE / UNDEFINED, shape (height, width).
    """
    if not (c > 0 and theta_e > 0):
        raise ValueError("contrast and event threshold must be positive")
    if window is not None:
        events = slice_exposure(events, *window)
    tri, integrated, skipped, classified = _event_space_kernel(
        events.x, events.y, events.p, events.height, events.width, float(c), float(theta_e))
    if return_stats:
        return tri, EventSpaceStats(int(integrated), int(skipped), int(classified))
    return tri


def classify_image_space(frame: IntensityFrame, theta_I: float, undefined_mask) -> np.ndarray:
    """Threshold the masked pixels: ``I <= theta_I`` -> 0, else 1.

    Pixels outside the mask are UNDEFINED in the result.
    """
    mask = np.asarray(undefined_mask, dtype=bool)
    if mask.shape != frame.shape:
        raise DimensionMismatch(f"mask {mask.shape} vs frame {frame.shape}")
    tri = np.full(frame.shape, UNDEFINED, np.int8)
    tri[mask] = np.where(frame.pixels[mask] <= theta_I, ZERO, ONE)
    return tri


def merge(event_result, image_result, t: int = 0) -> BinaryFrame:
    """Union of two partial classifications defined on complementary pixels."""
    ev = np.asarray(event_result)
    im = np.asarray(image_result)
    if ev.shape != im.shape:
        raise DimensionMismatch(f"{ev.shape} vs {im.shape}")
    ev_def, im_def = ev != UNDEFINED, im != UNDEFINED
    if (ev_def & im_def).any():
        raise PartitionError(f"{int((ev_def & im_def).sum())} pixels defined by both stages")
    if not (ev_def | im_def).all():
        raise PartitionError(f"{int((~(ev_def | im_def)).sum())} pixels defined by neither stage")
    return BinaryFrame(np.where(ev_def, ev, im).astype(np.uint8), t=t)


def binarize_frame(frame: IntensityFrame, events: EventStream, params: ThresholdSet | None = None,
                   c: float = 0.35) -> BinaryFrame:
    """Latent binary image at ``frame.t_s`` from a blurry frame and its events.

    When ``params`` is None the thresholds are estimated with contrast ``c``.
    """
    if events.shape != frame.shape:
        raise DimensionMismatch(f"events {events.shape} vs frame {frame.shape}")
    if params is None:
        params = estimate_thresholds(frame, events, c)
    window = slice_exposure(events, frame.t_s, frame.T)
    tri = classify_event_space(window, None, params.c, params.theta_e)
    img = classify_image_space(frame, params.theta_I, tri == UNDEFINED)
    return merge(tri, img, t=frame.t_s)
