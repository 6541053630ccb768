"""Binary-image quality metrics: MCC, PSNR and NRM over confusion counts."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BinaryFrame, DimensionMismatch


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel counts with bit 1 as the positive class."""

    TP: int
    TN: int
    FP: int
    FN: int

    @property
    def total(self) -> int:
        return self.TP + self.TN + self.FP + self.FN


def _bits(frame) -> np.ndarray:
    return frame.bits if isinstance(frame, BinaryFrame) else np.asarray(frame)


def confusion(pred, gt) -> ConfusionCounts:
    p, g = _bits(pred).astype(bool), _bits(gt).astype(bool)
    if p.shape != g.shape:
        raise DimensionMismatch(f"prediction {p.shape} vs ground truth {g.shape}")
    tp = int(np.count_nonzero(p & g))
    tn = int(np.count_nonzero(~p & ~g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionCounts(tp, tn, fp, fn)


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    factors = ((c.TP + c.FP), (c.TP + c.FN), (c.TN + c.FP), (c.TN + c.FN))
    if 0 in factors:
        return 0.0
    # integer product keeps large frames exact before the single sqrt
    denom = math.sqrt(factors[0] * factors[1] * factors[2] * factors[3])
    return (c.TP * c.TN - c.FP * c.FN) / denom


def psnr_binary(c: ConfusionCounts) -> float:
    """PSNR in dB with peak 1 and MSE equal to the error fraction.

    Returns ``math.inf`` for a perfect prediction.
    """
    if c.total <= 0:
        raise ValueError("empty confusion counts")
    errors = c.FP + c.FN
    if errors == 0:
        return math.inf
    return 10.0 * math.log10(c.total / errors)


def nrm(c: ConfusionCounts) -> float:
    nr_fn = c.FN / (c.TP + c.FN) if (c.TP + c.FN) else 0.0
    nr_fp = c.FP / (c.TN + c.FP) if (c.TN + c.FP) else 0.0
    return (nr_fn + nr_fp) / 2.0


def score(pred, gt) -> dict:
    c = confusion(pred, gt)
    return {"mcc": mcc(c), "psnr": psnr_binary(c), "nrm": nrm(c)}


def mean_scores(pairs) -> dict:
    """Average ``score`` over ``(pred, gt)`` pairs.

    PSNR is averaged over finite values only; if every pair is perfect the
    mean is ``inf``.
    """
    rows = [score(p, g) for p, g in pairs]
    if not rows:
        raise ValueError("no frame pairs to score")
    finite = [r["psnr"] for r in rows if math.isfinite(r["psnr"])]
    return {
        "mcc": float(np.mean([r["mcc"] for r in rows])),
        "psnr": float(np.mean(finite)) if finite else math.inf,
        "nrm": float(np.mean([r["nrm"] for r in rows])),
        "count": len(rows),
    }
