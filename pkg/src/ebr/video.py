"""
High frame-rate binary video by unidirectional integration.

Starting from the latent binary image, each pixel integrates only the
polarity able to flip its current bit and flips once the integral exceeds
the event threshold. An optional asynchronous median filter keeps a
denoised copy of the binary image up to date by revisiting only the
3x3 windows that contain a flipped pixel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numba
import numpy as np

from .core import BinaryFrame, EventStream


class PixelUpdate(NamedTuple):
    t: int
    x: int
    y: int
    bit: int


@dataclass(frozen=True, eq=False)
class UpdateLog:
    """Pixel updates in time order, applied on top of ``initial``."""

    initial: BinaryFrame
    t: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    bit: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.t.size)

    def __iter__(self) -> Iterator[PixelUpdate]:
        for k in range(len(self)):
            yield PixelUpdate(int(self.t[k]), int(self.x[k]), int(self.y[k]), int(self.bit[k]))

    def final(self) -> BinaryFrame:
        bits = self.initial.bits.copy()
        _apply_last(bits.reshape(-1), self.y.astype(np.int64) * bits.shape[1] + self.x, self.bit)
        return BinaryFrame(bits, t=int(self.t[-1]) if len(self) else self.initial.t)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("t,x,y,bit\n")
            if len(self):
                np.savetxt(fh, np.column_stack([self.t, self.x, self.y, self.bit]), fmt="%d", delimiter=",")


def _apply_last(flat, lin, values) -> None:
    """Scatter ``values`` into ``flat``; for repeated indices the last value wins."""
    if lin.size == 0:
        return
    uniq, first_rev = np.unique(lin[::-1], return_index=True)
    flat[uniq] = values[::-1][first_rev]


def window_sizes(shape) -> np.ndarray:
    """Cell count of each pixel's 3x3 window clipped at the borders (4, 6 or 9)."""
    h, w = shape
    rows = np.full(h, 3)
    cols = np.full(w, 3)
    rows[[0, -1]] -= 1
    cols[[0, -1]] -= 1
    if h == 1:
        rows[:] = 1
    if w == 1:
        cols[:] = 1
    return np.outer(rows, cols).astype(np.int32)


def window_ones(bits) -> np.ndarray:
    """Number of ones in each pixel's clipped 3x3 window."""
    b = np.pad(np.asarray(bits, dtype=np.int32), 1)
    h, w = np.asarray(bits).shape
    out = np.zeros((h, w), np.int32)
    for dy in range(3):
        for dx in range(3):
            out += b[dy : dy + h, dx : dx + w]
    return out


def median_filter_binary(bits) -> np.ndarray:
    """Synchronous binary median: 1 where ones exceed half the clipped window."""
    bits = np.asarray(bits)
    return (2 * window_ones(bits) > window_sizes(bits.shape)).astype(np.uint8)


@dataclass
class PropagationState:
    """Mutable per-pixel state of the propagator.

    ``ones`` caches the count of raw ones in every clipped 3x3 window so a
    window median costs one comparison.
    """

    raw: np.ndarray
    i_pos: np.ndarray
    i_neg: np.ndarray
    denoised: np.ndarray
    ones: np.ndarray
    sizes: np.ndarray
    t_cur: int

    @classmethod
    def from_frame(cls, init: BinaryFrame) -> "PropagationState":
        raw = init.bits.copy()
        return cls(
            raw=raw,
            i_pos=np.zeros(raw.shape),
            i_neg=np.zeros(raw.shape),
            denoised=median_filter_binary(raw),
            ones=window_ones(raw),
            sizes=window_sizes(raw.shape),
            t_cur=init.t,
        )


def amf_update(state: PropagationState, x: int, y: int, t: int | None = None) -> list[PixelUpdate]:
    """Recompute the denoised value of every window containing ``(x, y)``.

    Counts are taken afresh from ``state.raw``; ``state.ones`` is refreshed
    for the same windows. Only pixels whose denoised bit changed are returned.
    """
    h, w = state.raw.shape
    if not (0 <= x < w and 0 <= y < h):
        raise IndexError(f"pixel ({x}, {y}) outside {w}x{h} frame")
    t = state.t_cur if t is None else t
    out = []
    for qy in range(max(y - 1, 0), min(y + 2, h)):
        for qx in range(max(x - 1, 0), min(x + 2, w)):
            win = state.raw[max(qy - 1, 0) : qy + 2, max(qx - 1, 0) : qx + 2]
            ones = int(win.sum())
            state.ones[qy, qx] = ones
            bit = 1 if ones / win.size > 0.5 else 0
            if bit != state.denoised[qy, qx]:
                state.denoised[qy, qx] = bit
                out.append(PixelUpdate(t, qx, qy, bit))
    return out


@numba.njit(cache=True)
def _propagate_kernel(t, x, y, p, start, raw, i_pos, i_neg, den, ones, sizes,
                      c, theta_e, use_filter, out_t, out_x, out_y, out_b, counters):
    h, w = raw.shape
    cap = out_t.shape[0]
    n = 0
    k = start
    while k < t.shape[0]:
        if n + 9 > cap:
            break
        xi = x[k]
        yi = y[k]
        counters[0] += 1
        flipped = False
        if raw[yi, xi] == 0:
            if p[k] == 1:
                i_pos[yi, xi] += c
                if i_pos[yi, xi] > theta_e:
                    i_pos[yi, xi] = 0.0
                    raw[yi, xi] = 1
                    flipped = True
        elif p[k] == -1:
            i_neg[yi, xi] -= c
            if i_neg[yi, xi] < -theta_e:
                i_neg[yi, xi] = 0.0
                raw[yi, xi] = 0
                flipped = True
        if flipped:
            counters[1] += 1
            if use_filter:
                delta = 1 if raw[yi, xi] == 1 else -1
                for qy in range(max(yi - 1, 0), min(yi + 2, h)):
                    for qx in range(max(xi - 1, 0), min(xi + 2, w)):
                        counters[2] += 1
                        ones[qy, qx] += delta
                        bit = 1 if 2 * ones[qy, qx] > sizes[qy, qx] else 0
                        if bit != den[qy, qx]:
                            den[qy, qx] = bit
                            out_t[n] = t[k]
                            out_x[n] = qx
                            out_y[n] = qy
                            out_b[n] = bit
                            n += 1
            else:
                out_t[n] = t[k]
                out_x[n] = xi
                out_y[n] = yi
                out_b[n] = raw[yi, xi]
                n += 1
        k += 1
    return k, n


class Propagator:
    """Streaming unidirectional integrator.

    Feed event chunks in time order with :meth:`feed`; each call returns the
    updates it produced. With ``filter=True`` the updates describe the
    median-filtered image, otherwise the raw integrator output.

    ``counters`` holds ``events`` (events visited), ``flips`` (raw bit
    changes) and ``window_updates`` (filter windows recomputed).
    """

    def __init__(self, init: BinaryFrame, c: float, theta_e: float, filter: bool = False,
                 buffer_size: int = 1 << 18):
        if not (c > 0 and theta_e > 0):
            raise ValueError("contrast and event threshold must be positive")
        self.c = float(c)
        self.theta_e = float(theta_e)
        self.filter = bool(filter)
        self.state = PropagationState.from_frame(init)
        self.initial = BinaryFrame(self.state.denoised.copy() if self.filter else init.bits, t=init.t)
        self._counters = np.zeros(3, np.int64)
        self._buf = [np.empty(max(buffer_size, 16), dt) for dt in (np.int64, np.int32, np.int32, np.uint8)]

    @property
    def counters(self) -> dict:
        ev, fl, win = (int(v) for v in self._counters)
        return {"events": ev, "flips": fl, "window_updates": win}

    def current(self) -> BinaryFrame:
        bits = self.state.denoised if self.filter else self.state.raw
        return BinaryFrame(bits.copy(), t=self.state.t_cur)

    def feed(self, events: EventStream) -> UpdateLog:
        if len(events) and events.t[0] < self.state.t_cur:
            raise ValueError("events precede the propagator's current time")
        s = self.state
        start = self.current()
        bt, bx, by, bb = self._buf
        parts = []
        k = 0
        while k < len(events):
            k, n = _propagate_kernel(
                events.t, events.x, events.y, events.p, k, s.raw, s.i_pos, s.i_neg,
                s.denoised, s.ones, s.sizes, self.c, self.theta_e, self.filter,
                bt, bx, by, bb, self._counters)
            parts.append((bt[:n].copy(), bx[:n].copy(), by[:n].copy(), bb[:n].copy()))
        if len(events):
            s.t_cur = int(events.t[-1])
        cols = [np.concatenate([pt[i] for pt in parts]) if parts else np.empty(0, d)
                for i, d in enumerate((np.int64, np.int32, np.int32, np.uint8))]
        return UpdateLog(start, *cols)


def propagate(init: BinaryFrame, events: EventStream, c: float, theta_e: float,
              filter: bool = False) -> UpdateLog:
    """Run the integrator over ``events`` starting from ``init``.

    The returned log's ``initial`` frame is ``init`` itself, or its median
    filtered version when ``filter`` is set, so rendering the log reproduces
    the chosen output.
    """
    prop = Propagator(init, c, theta_e, filter)
    log = prop.feed(events)
    return UpdateLog(prop.initial, log.t, log.x, log.y, log.bit)


def render_video(updates: UpdateLog, init: BinaryFrame | None = None, fps: float = 1000.0,
                 span: tuple[int, int] | None = None) -> list[BinaryFrame]:
    """Sample the binary image at a fixed rate.

    Frame ``i`` shows ``init`` with every update of time ``<= t0 + i / fps``
    applied; ``floor((t1 - t0) * fps / 1e6) + 1`` frames are produced.
    """
    if not fps > 0:
        raise ValueError("fps must be positive")
    init = updates.initial if init is None else init
    if span is None:
        t0 = init.t
        t1 = int(updates.t[-1]) if len(updates) else t0 + 1
    else:
        t0, t1 = span
    if not t1 > t0:
        raise ValueError("empty time span")
    count = math.floor((t1 - t0) * fps / 1e6) + 1
    bits = init.bits.copy()
    flat = bits.reshape(-1)
    lin = updates.y.astype(np.int64) * bits.shape[1] + updates.x
    frames = []
    a = 0
    for i in range(count):
        ts = t0 + math.floor(i * 1e6 / fps)
        b = int(np.searchsorted(updates.t, ts, side="right"))
        if b > a:
            _apply_last(flat, lin[a:b], updates.bit[a:b])
            a = b
        frames.append(BinaryFrame(bits.copy(), t=ts))
    return frames
