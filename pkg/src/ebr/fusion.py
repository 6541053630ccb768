"""
Unsupervised threshold estimation.

Events in the exposure window are integrated up to each pixel's first
polarity change; the resulting edge magnitudes are turned into a latent
intensity, fused with the blurry frame, and the fused 256-level histogram
is split by maximizing the between-class variance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .core import DimensionMismatch, EbrError, EventStream, IntensityFrame, slice_exposure

LEVELS = 256


class EmptyDomain(EbrError, ValueError):
    pass


class EmptyHistogram(EbrError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EdgeImage:
    """Signed first-integration-edge magnitude per pixel (log units, 0 = no events)."""

    values: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0


@dataclass(frozen=True, eq=False)
class Histogram256:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (LEVELS,) or (counts < 0).any():
            raise ValueError("histogram needs 256 non-negative counts")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_levels(cls, levels) -> "Histogram256":
        levels = np.asarray(levels).ravel()
        return cls(np.bincount(levels.astype(np.int64), minlength=LEVELS))

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.N


@dataclass(frozen=True)
class ThresholdSet:
    """Event contrast plus the image and event thresholds.

    ``theta_star`` is the fused-histogram level the other two were derived
    from; it is ``None`` for manually supplied thresholds. ``source`` records
    where ``theta_e`` came from: ``"edges"``, ``"fallback"`` or ``"manual"``.
    """

    c: float
    theta_star: int | None
    theta_I: float
    theta_e: float
    source: str = "manual"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("contrast must be positive")
        if not self.theta_e > 0:
            raise ValueError("event threshold must be positive")
        if not 0 <= self.theta_I <= 255:
            raise ValueError("image threshold must lie in [0, 255]")

    @classmethod
    def manual(cls, c: float, theta_I: float, theta_e: float) -> "ThresholdSet":
        return cls(float(c), None, float(theta_I), float(theta_e), "manual")

    def to_dict(self) -> dict:
        return {"c": self.c, "theta_star": self.theta_star,
                "theta_I": self.theta_I, "theta_e": self.theta_e}


# ---------------------------------------------------------------------------
# edges

@numba.njit(cache=True)
def _first_edge_kernel(x, y, p, height, width, c):
    edge = np.zeros((height, width))
    first = np.zeros((height, width), np.int8)
    stopped = np.zeros((height, width), np.bool_)
    for k in range(x.shape[0]):
        xi = x[k]
        yi = y[k]
        if stopped[yi, xi]:
            continue
        pk = p[k]
        if first[yi, xi] == 0:
            first[yi, xi] = pk
        elif pk != first[yi, xi]:
            stopped[yi, xi] = True
            continue
        edge[yi, xi] += c * pk
    return edge


def first_edge_image(events: EventStream, c: float, window: tuple[int, int] | None = None) -> EdgeImage:
    """Integrate ``c * p`` per pixel until the first polarity change.

    Args:
        events: time-sorted stream.
        c: event contrast in log-intensity units.
        window: optional ``(t_s, T)``; events outside ``[t_s, t_s + T)`` are ignored.
    """
    if not c > 0:
        raise ValueError("contrast must be positive")
    if window is not None:
        events = slice_exposure(events, *window)
    values = _first_edge_kernel(events.x, events.y, events.p, events.height, events.width, float(c))
    return EdgeImage(values)


def suppress_outliers(edges: EdgeImage) -> EdgeImage:
    """Zero nonzero edges farther than three standard deviations from their mean."""
    v = edges.values
    nz = v != 0
    if np.count_nonzero(nz) < 2:
        return edges
    vals = v[nz]
    mu, sd = vals.mean(), vals.std()
    out = v.copy()
    out[nz & (np.abs(v - mu) > 3.0 * sd)] = 0.0
    return EdgeImage(out)


def latent_from_edges(edges: EdgeImage) -> np.ndarray:
    """Latent intensity ``exp(E_max - E)`` per sign class, 0 where ``E == 0``.

    ``E_max`` is the largest value within each sign class, so for falling
    edges it is the negative value closest to zero.
    """
    v = edges.values
    out = np.zeros(v.shape)
    pos, neg = v > 0, v < 0
    if pos.any():
        out[pos] = np.exp(v[pos].max() - v[pos])
    if neg.any():
        out[neg] = np.exp(v[neg].max() - v[neg])
    return out


def minmax_normalize(img, mask=None) -> np.ndarray:
    """Affine map of the masked values onto [0, 1]; unmasked pixels are 0.

    A constant masked region maps to 0.
    """
    img = np.asarray(img, dtype=np.float64)
    mask = np.ones(img.shape, bool) if mask is None else np.asarray(mask, bool)
    if not mask.any():
        raise EmptyDomain("normalization mask selects no pixels")
    vals = img[mask]
    lo, hi = vals.min(), vals.max()
    out = np.zeros(img.shape)
    if hi > lo:
        out[mask] = (vals - lo) / (hi - lo)
    return out


def fuse(latent_norm, blurry_norm) -> np.ndarray:
    latent_norm = np.asarray(latent_norm, dtype=np.float64)
    blurry_norm = np.asarray(blurry_norm, dtype=np.float64)
    if latent_norm.shape != blurry_norm.shape:
        raise DimensionMismatch(f"{latent_norm.shape} vs {blurry_norm.shape}")
    return np.where(latent_norm > 0, latent_norm, blurry_norm)


def quantize(img) -> np.ndarray:
    """Map [0, 1] values to integer levels ``floor(v * 255)`` in [0, 255]."""
    # the epsilon keeps k/255 from landing on k - 1 after rounding
    lv = np.floor(np.asarray(img, dtype=np.float64) * 255.0 + 1e-9)
    return np.clip(lv, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# discriminant analysis

def _moments(h: Histogram256):
    P = h.probabilities
    i = np.arange(LEVELS, dtype=np.float64)
    omega = np.cumsum(P)
    mu = np.cumsum(i * P)
    return P, i, omega, mu, mu[-1]


def between_class_variance(h: Histogram256) -> np.ndarray:
    """sigma_B^2(theta) for theta = 0..255 (NaN where a class is empty).

    Class 0 holds levels ``<= theta``.
    """
    _, _, omega, mu, mu_h = _moments(h)
    W = np.cumsum(h.counts)
    ok = (W > 0) & (W < h.N)
    out = np.full(LEVELS, np.nan)
    out[ok] = (mu_h * omega[ok] - mu[ok]) ** 2 / (omega[ok] * (1.0 - omega[ok]))
    return out


def within_class_variance(h: Histogram256) -> np.ndarray:
    """sigma_W^2(theta) by direct summation over both classes."""
    P, i, omega, mu, mu_h = _moments(h)
    W = np.cumsum(h.counts)
    out = np.full(LEVELS, np.nan)
    for th in np.flatnonzero((W > 0) & (W < h.N)):
        m0 = mu[th] / omega[th]
        m1 = (mu_h - mu[th]) / (1.0 - omega[th])
        out[th] = np.sum((i[: th + 1] - m0) ** 2 * P[: th + 1]) + np.sum((i[th + 1 :] - m1) ** 2 * P[th + 1 :])
    return out


def total_variance(h: Histogram256) -> float:
    P, i, _, _, mu_h = _moments(h)
    return float(np.sum((i - mu_h) ** 2 * P))


def otsu_threshold(h: Histogram256) -> int:
    """Smallest theta in [1, 255] maximizing the between-class variance.

    Comparisons use exact integer arithmetic on the counts, so plateaus of
    equal variance resolve to their lowest level. A histogram concentrated on
    one level returns that level (raised to 1 if it is level 0).
    """
    N = h.N
    if N == 0:
        raise EmptyHistogram("histogram is empty")
    counts = [int(v) for v in h.counts]
    m_total = sum(i * n for i, n in enumerate(counts))
    W = counts[0]
    M = 0
    best, best_num, best_den = None, 0, 1
    for th in range(1, LEVELS):
        W += counts[th]
        M += th * counts[th]
        if W == 0 or W == N:
            continue
        # sigma_B^2 = (M_T W - M N)^2 / (N^2 W (N - W)); N^2 is common
        num = (m_total * W - M * N) ** 2
        den = W * (N - W)
        if best is None or num * best_den > best_num * den:
            best, best_num, best_den = th, num, den
    if best is None:
        best = max(int(np.flatnonzero(h.counts)[0]), 1)
    return best


# ---------------------------------------------------------------------------
# pipeline

def fused_levels(frame: IntensityFrame, events: EventStream, c: float):
    """Fused 8-bit level image and the outlier-suppressed edge image."""
    if events.shape != frame.shape:
        raise DimensionMismatch(f"events {events.shape} vs frame {frame.shape}")
    edges = suppress_outliers(first_edge_image(events, c, (frame.t_s, frame.T)))
    latent = latent_from_edges(edges)
    has_latent = latent > 0
    latent_norm = minmax_normalize(latent, has_latent) if has_latent.any() else latent
    blurry_norm = minmax_normalize(frame.pixels)
    return quantize(fuse(latent_norm, blurry_norm)), edges


def estimate_thresholds(frame: IntensityFrame, events: EventStream, c: float = 0.35) -> ThresholdSet:
    """Estimate image and event thresholds from one frame and its events.

    The fused-histogram level ``theta*`` is mapped back to raw image units
    for ``theta_I`` and scaled by the largest edge magnitude for ``theta_e``.
    Without any edges ``theta_e`` falls back to ``2 * c``.
    """
    if not c > 0:
        raise ValueError("contrast must be positive")
    if frame.pixels.size == 0:
        raise EmptyHistogram("frame has no pixels")
    levels, edges = fused_levels(frame, events, c)
    theta_star = otsu_threshold(Histogram256.from_levels(levels))
    lo, hi = float(frame.pixels.min()), float(frame.pixels.max())
    theta_I = theta_star * (hi - lo) / 255.0 + lo
    emax = edges.max_abs()
    if emax > 0:
        theta_e, source = theta_star / LEVELS * emax, "edges"
    else:
        theta_e, source = 2.0 * c, "fallback"
    return ThresholdSet(float(c), int(theta_star), float(min(theta_I, 255.0)), float(theta_e), source)
