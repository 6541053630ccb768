"""
Domain types, event-stream ingestion and PGM frame I/O.

Timestamps are integer microseconds. Exposure windows are half-open,
``[t_s, t_s + T)``, so consecutive windows partition a stream exactly.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

ZERO = 0
ONE = 1
UNDEFINED = -1

_BIN_HEADER = np.dtype([("width", "<u4"), ("height", "<u4"), ("count", "<u8")])
_BIN_RECORD = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])


class EbrError(Exception):
    """Base class for input errors raised by this package."""


class MalformedRecord(EbrError, ValueError):
    def __init__(self, line: int, text: str = ""):
        self.line = line
        super().__init__(f"malformed record at line {line}: {text!r}")


class OutOfBounds(EbrError, ValueError):
    def __init__(self, event: "Event", width: int, height: int):
        self.event = event
        super().__init__(f"event {tuple(event)} outside {width}x{height} sensor")


class UnsupportedFormat(EbrError, ValueError):
    pass


class DimensionMismatch(EbrError, ValueError):
    pass


class Event(NamedTuple):
    x: int
    y: int
    t: int
    p: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def normalize_polarity(p) -> np.ndarray:
    """Map polarities given as {0, 1} or {-1, +1} onto {-1, +1}."""
    p = np.asarray(p)
    bad = ~np.isin(p, (-1, 0, 1))
    if bad.any():
        raise ValueError(f"invalid polarity value {p[bad][0]!r}")
    return np.where(p > 0, 1, -1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-sorted events of one sensor, stored column-wise.

    Use :meth:`from_arrays` to build a stream from unsorted or raw data;
    the plain constructor expects already validated, sorted columns.
    """

    width: int
    height: int
    t: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event columns differ in length")
        object.__setattr__(self, "t", _frozen(np.asarray(self.t, dtype=np.int64)))
        object.__setattr__(self, "x", _frozen(np.asarray(self.x, dtype=np.int32)))
        object.__setattr__(self, "y", _frozen(np.asarray(self.y, dtype=np.int32)))
        object.__setattr__(self, "p", _frozen(np.asarray(self.p, dtype=np.int8)))

    @classmethod
    def from_arrays(cls, width, height, t, x, y, p) -> "EventStream":
        """Validate, normalize polarity and stably sort by timestamp."""
        t = np.asarray(t, dtype=np.int64).ravel()
        x = np.asarray(x, dtype=np.int64).ravel()
        y = np.asarray(y, dtype=np.int64).ravel()
        p = normalize_polarity(np.asarray(p).ravel())
        if t.size and t.min() < 0:
            raise ValueError("negative timestamp")
        out = (x < 0) | (x >= width) | (y < 0) | (y >= height)
        if out.any():
            k = int(np.flatnonzero(out)[0])
            raise OutOfBounds(Event(int(x[k]), int(y[k]), int(t[k]), int(p[k])), width, height)
        if t.size > 1 and np.any(t[1:] < t[:-1]):
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], x[order], y[order], p[order]
        return cls(int(width), int(height), t, x, y, p)

    @classmethod
    def empty(cls, width: int, height: int) -> "EventStream":
        return cls(width, height, [], [], [], [])

    @classmethod
    def from_events(cls, width: int, height: int, events) -> "EventStream":
        events = list(events)
        if not events:
            return cls.empty(width, height)
        x, y, t, p = zip(*events)
        return cls.from_arrays(width, height, t, x, y, p)

    def __len__(self) -> int:
        return int(self.t.size)

    def __getitem__(self, k) -> Event:
        return Event(int(self.x[k]), int(self.y[k]), int(self.t[k]), int(self.p[k]))

    def __iter__(self) -> Iterator[Event]:
        for k in range(len(self)):
            yield self[k]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            (self.width, self.height) == (other.width, other.height)
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def take(self, index) -> "EventStream":
        return EventStream(self.width, self.height, self.t[index], self.x[index],
                           self.y[index], self.p[index])

    def span(self) -> tuple[int, int]:
        """Return ``(t_first, t_last + 1)``, the smallest window holding every event."""
        if not len(self):
            return 0, 0
        return int(self.t[0]), int(self.t[-1]) + 1

    @staticmethod
    def concatenate(streams) -> "EventStream":
        streams = list(streams)
        w, h = streams[0].width, streams[0].height
        cat = lambda name: np.concatenate([getattr(s, name) for s in streams])
        return EventStream.from_arrays(w, h, cat("t"), cat("x"), cat("y"), cat("p"))


def slice_exposure(stream: EventStream, t_s: int, T: int) -> EventStream:
    """Events with ``t_s <= t < t_s + T``, order preserved."""
    if T <= 0:
        raise ValueError("exposure duration must be positive")
    lo = np.searchsorted(stream.t, t_s, side="left")
    hi = np.searchsorted(stream.t, t_s + T, side="left")
    return stream.take(slice(lo, hi))


# ---------------------------------------------------------------------------
# event files

def _parse_csv(path) -> EventStream:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MalformedRecord(1, "")
    # header is "width,height"; a width/height pair on two lines is also accepted
    try:
        head = [int(v) for v in lines[0].split(",")]
        if len(head) == 2:
            width, height = head
            first = 1
        elif len(head) == 1:
            width, height = head[0], int(lines[1])
            first = 2
        else:
            raise ValueError
    except (ValueError, IndexError):
        raise MalformedRecord(1, lines[0]) from None
    if width <= 0 or height <= 0:
        raise MalformedRecord(1, lines[0])

    body = lines[first:]
    if not any(ln.strip() for ln in body):
        return EventStream.empty(width, height)
    try:
        rows = np.loadtxt(body, delimiter=",", dtype=np.int64, ndmin=2)
        if rows.shape[1] != 4 or (rows[:, 0] < 0).any() or not np.isin(rows[:, 3], (-1, 0, 1)).all():
            raise ValueError
    except ValueError:
        _locate_bad_row(body, first)
        raise MalformedRecord(first + 1, "unparsable event section") from None
    t, x, y, p = rows.T
    return EventStream.from_arrays(width, height, t, x, y, p)


def _locate_bad_row(body, first: int) -> None:
    for lineno, ln in enumerate(body, start=first + 1):
        if not ln.strip():
            continue
        parts = ln.split(",")
        try:
            if len(parts) != 4:
                raise ValueError
            t, _, _, p = (int(v) for v in parts)
        except ValueError:
            raise MalformedRecord(lineno, ln) from None
        if t < 0 or p not in (-1, 0, 1):
            raise MalformedRecord(lineno, ln)


def _parse_binary(path) -> EventStream:
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size < _BIN_HEADER.itemsize:
        raise MalformedRecord(0, "truncated header")
    head = raw[: _BIN_HEADER.itemsize].view(_BIN_HEADER)[0]
    width, height, count = int(head["width"]), int(head["height"]), int(head["count"])
    body = raw[_BIN_HEADER.itemsize:]
    if body.size != count * _BIN_RECORD.itemsize:
        raise MalformedRecord(0, f"expected {count} records, got {body.size} bytes")
    rec = body.view(_BIN_RECORD)
    p = rec["p"]
    bad = ~np.isin(p, (-1, 0, 1))
    if bad.any():
        raise MalformedRecord(int(np.flatnonzero(bad)[0]) + 1, f"polarity {p[bad][0]}")
    return EventStream.from_arrays(width, height, rec["t"].astype(np.int64), rec["x"], rec["y"], p)


def parse_event_file(path, format: str | None = None) -> EventStream:
    """Load an event file.

    Args:
        path: CSV (``width,height`` header then ``t,x,y,p`` rows) or the
            little-endian binary layout written by :func:`write_event_file`.
        format: ``"csv"`` or ``"binary"``; guessed from the suffix when omitted.

    Raises:
        MalformedRecord: a row cannot be parsed (``.line`` is 1-based).
        OutOfBounds: an event lies outside the declared resolution.
    """
    if format is None:
        format = "binary" if str(path).endswith((".bin", ".raw")) else "csv"
    if format == "csv":
        return _parse_csv(path)
    if format == "binary":
        return _parse_binary(path)
    raise ValueError(f"unknown event format {format!r}")


def write_event_file(stream: EventStream, path, format: str | None = None) -> None:
    if format is None:
        format = "binary" if str(path).endswith((".bin", ".raw")) else "csv"
    if format == "csv":
        cols = np.column_stack([stream.t, stream.x, stream.y, stream.p])
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{stream.width},{stream.height}\n")
            if len(stream):
                np.savetxt(fh, cols, fmt="%d", delimiter=",")
    elif format == "binary":
        head = np.array([(stream.width, stream.height, len(stream))], dtype=_BIN_HEADER)
        rec = np.empty(len(stream), dtype=_BIN_RECORD)
        rec["t"], rec["x"], rec["y"], rec["p"] = stream.t, stream.x, stream.y, stream.p
        with open(path, "wb") as fh:
            fh.write(head.tobytes())
            fh.write(rec.tobytes())
    else:
        raise ValueError(f"unknown event format {format!r}")


# ---------------------------------------------------------------------------
# frames

@dataclass(frozen=True, eq=False)
class IntensityFrame:
    """8-bit grayscale frame integrated over ``[t_s, t_s + T)``."""

    pixels: np.ndarray = field(repr=False)
    t_s: int = 0
    T: int = 1

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError("frame must be 2-D (height, width)")
        if px.size and (px.min() < 0 or px.max() > 255):
            raise ValueError("pixel values must lie in [0, 255]")
        if self.T <= 0:
            raise ValueError("exposure duration T must be positive")
        object.__setattr__(self, "pixels", _frozen(px.astype(np.uint8)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True, eq=False)
class BinaryFrame:
    bits: np.ndarray = field(repr=False)
    t: int = 0

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValueError("frame must be 2-D (height, width)")
        if b.size and not np.isin(b, (0, 1)).all():
            raise ValueError("binary frame holds values other than 0/1")
        object.__setattr__(self, "bits", _frozen(b.astype(np.uint8)))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryFrame):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.bits, other.bits)


_META = re.compile(rb"#\s*t_s=(-?\d+)\s+T=(\d+)")


def _pgm_tokens(data: bytes):
    """Yield (token, end_offset) for the 4 header fields, collecting comments."""
    pos, comments = 0, []
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise UnsupportedFormat("truncated PGM header")
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            end = len(data) if end < 0 else end
            comments.append(data[pos:end])
            pos = end
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1, comments


def read_frame(path, t_s: int | None = None, T: int | None = None) -> IntensityFrame:
    """Read a binary PGM (P5, maxval 255).

    Exposure metadata comes from the arguments, else from a ``# t_s=.. T=..``
    header comment as written by :func:`write_frame`, else ``t_s=0, T=1``.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise UnsupportedFormat(f"unsupported magic number {data[:2]!r}; only P5 is read")
    tokens, offset, comments = _pgm_tokens(data)
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise UnsupportedFormat("bad PGM header") from None
    if maxval != 255:
        raise UnsupportedFormat(f"maxval {maxval} not supported (need 255)")
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=offset)
    meta_ts, meta_T = 0, 1
    for c in comments:
        m = _META.match(c)
        if m:
            meta_ts, meta_T = int(m.group(1)), int(m.group(2))
    return IntensityFrame(
        raster.reshape(height, width),
        t_s=meta_ts if t_s is None else int(t_s),
        T=meta_T if T is None else int(T),
    )


def write_frame(frame, path) -> None:
    """Write an :class:`IntensityFrame` or :class:`BinaryFrame` as P5 PGM.

    Binary frames are written with 1 -> 255 and 0 -> 0.
    """
    if isinstance(frame, BinaryFrame):
        px = frame.bits * np.uint8(255)
        meta = f"# t_s={frame.t} T=1\n"
    elif isinstance(frame, IntensityFrame):
        px = frame.pixels
        meta = f"# t_s={frame.t_s} T={frame.T}\n"
    else:
        raise TypeError(f"cannot write {type(frame).__name__} as PGM")
    h, w = px.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{meta}{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(px, dtype=np.uint8).tobytes())


def read_binary_frame(path) -> BinaryFrame:
    """Read a PGM holding a binary image; any nonzero byte counts as 1."""
    f = read_frame(path)
    return BinaryFrame((f.pixels > 0).astype(np.uint8), t=f.t_s)


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
