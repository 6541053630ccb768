"""Slow, literal reference implementations used only as test oracles.

Nothing here imports the package's numerical code; each function replays
its rule event by event (or cell by cell) in plain Python.
"""
import math
from collections import defaultdict


def per_pixel(events):
    """Group ``(x, y, t, p)`` tuples by pixel, keeping order."""
    out = defaultdict(list)
    for x, y, t, p in events:
        out[(x, y)].append((t, p))
    return out


def replay_first_edge(seq, c):
    """Signed integral up to the first polarity change of one pixel."""
    total = 0.0
    first = None
    for _, p in seq:
        if first is None:
            first = p
        elif p != first:
            break
        total += c * p
    return total


def replay_event_space(seq, c, theta_e):
    """0 if rising mass crosses first, 1 if falling, None if neither."""
    a_pos = a_neg = 0.0
    for _, p in seq:
        if p > 0:
            a_pos += c
            if a_pos > theta_e:
                return 0
        else:
            a_neg += c
            if a_neg > theta_e:
                return 1
    return None


def replay_unidirectional(bit, seq, c, theta_e):
    """Flip times and accumulator trace of one pixel under the video rule.

    Returns ``(flips, trace)`` where ``flips`` is a list of ``(t, new_bit)``
    and ``trace`` the ``(i_pos, i_neg)`` pair after every event.
    """
    i_pos = i_neg = 0.0
    flips, trace = [], []
    for t, p in seq:
        if bit == 0 and p == 1:
            i_pos = i_pos + c
            if i_pos > theta_e:
                i_pos = 0.0
                bit = 1
                flips.append((t, 1))
        elif bit == 1 and p == -1:
            i_neg = i_neg - c
            if i_neg < -theta_e:
                i_neg = 0.0
                bit = 0
                flips.append((t, 0))
        trace.append((i_pos, i_neg))
    return flips, trace


def sync_median(bits):
    """Binary 3x3 median with border-clipped windows, by counting cells."""
    h, w = len(bits), len(bits[0])
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            ones = cells = 0
            for yy in range(max(0, y - 1), min(h, y + 2)):
                for xx in range(max(0, x - 1), min(w, x + 2)):
                    ones += bits[yy][xx]
                    cells += 1
            out[y][x] = 1 if ones / cells > 0.5 else 0
    return out


def class_stats(counts, theta):
    """sigma_B^2, sigma_W^2, sigma_T^2 at ``theta`` from first principles.

    Class 0 holds levels ``0..theta``. Returns None if a class is empty.
    """
    N = sum(counts)
    P = [n / N for n in counts]
    w0 = sum(P[: theta + 1])
    w1 = sum(P[theta + 1 :])
    if w0 == 0 or w1 == 0:
        return None
    m0 = sum(i * P[i] for i in range(theta + 1)) / w0
    m1 = sum(i * P[i] for i in range(theta + 1, len(P))) / w1
    mT = sum(i * P[i] for i in range(len(P)))
    sb = w0 * (m0 - mT) ** 2 + w1 * (m1 - mT) ** 2
    sw = sum((i - m0) ** 2 * P[i] for i in range(theta + 1)) + sum(
        (i - m1) ** 2 * P[i] for i in range(theta + 1, len(P)))
    st = sum((i - mT) ** 2 * P[i] for i in range(len(P)))
    return sb, sw, st


def fisher_argmax(counts):
    """Smallest theta in [1, 255] maximizing sigma_B^2 / sigma_W^2."""
    best, best_val = None, -1.0
    for th in range(1, 256):
        s = class_stats(counts, th)
        if s is None:
            continue
        sb, sw, _ = s
        val = math.inf if sw == 0 else sb / sw
        if val > best_val:
            best, best_val = th, val
    return best


def level_crossings(r_start, r_end, c, steps=100000):
    """Count reference-level crossings along a dense linear log-intensity ramp."""
    ref = r_start
    pos = neg = 0
    for k in range(1, steps + 1):
        r = r_start + (r_end - r_start) * k / steps
        while r - ref >= c - 1e-12:
            ref += c
            pos += 1
        while ref - r >= c - 1e-12:
            ref -= c
            neg += 1
    return pos, neg


def exact_class_stats(counts):
    """Exact (Fraction) sigma_B^2 and sigma_W^2 for every theta in 1..255.

    Uses running sums of n, i*n and i*i*n so one histogram costs O(256)
    rational operations. sigma_W^2 comes from second moments, not from
    sigma_T^2 - sigma_B^2. Entries with an empty class are None.
    """
    from fractions import Fraction

    N = sum(counts)
    S1 = sum(i * n for i, n in enumerate(counts))
    S2 = sum(i * i * n for i, n in enumerate(counts))
    mT = Fraction(S1, N)
    out = [None] * 256
    w = s1 = s2 = 0
    for th in range(256):
        w += counts[th]
        s1 += th * counts[th]
        s2 += th * th * counts[th]
        if th == 0 or w == 0 or w == N:
            continue
        m0, m1 = Fraction(s1, w), Fraction(S1 - s1, N - w)
        sb = (w * (m0 - mT) ** 2 + (N - w) * (m1 - mT) ** 2) / N
        sw = ((s2 - w * m0 ** 2) + (S2 - s2 - (N - w) * m1 ** 2)) / N
        out[th] = (sb, sw)
    return out


def exact_argmax(values):
    """Smallest index of the largest non-None value (inf beats everything)."""
    best, best_val = None, None
    for i, v in enumerate(values):
        if v is None:
            continue
        if best_val is None or v > best_val:
            best, best_val = i, v
    return best
