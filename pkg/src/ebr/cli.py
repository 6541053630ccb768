"""Command-line front end: ``ebr threshold|binarize|video|simulate|metrics|bench``."""
from __future__ import annotations

import argparse
import glob
import json
import logging
import math
import os
import sys

from .bench import bench
from .binarize import PartitionError, binarize_frame
from .core import (
    EbrError,
    IntensityFrame,
    parse_event_file,
    read_binary_frame,
    read_frame,
    slice_exposure,
    write_frame,
)
from .fusion import ThresholdSet, estimate_thresholds
from .metrics import mean_scores, score
from .sim import SceneSpec, simulate
from .video import propagate, render_video

log = logging.getLogger("ebr")

DEFAULT_CONTRAST = 0.35
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _json_default(v):
    return float(v)


def _dump(obj) -> None:
    def clean(v):
        if isinstance(v, float) and math.isinf(v):
            return "inf"
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        return v
    print(json.dumps(clean(obj), default=_json_default, indent=2))


def _load_inputs(args):
    events = parse_event_file(args.events, args.event_format)
    with open(args.frame, "rb") as fh:
        has_meta = b"# t_s=" in fh.read(256)
    frame = read_frame(args.frame)
    t_s = args.t_s if args.t_s is not None else (frame.t_s if has_meta else None)
    T = args.exposure if args.exposure is not None else (frame.T if has_meta else None)
    if t_s is None or T is None:
        lo, hi = events.span()
        t_s = lo if t_s is None else t_s
        T = T if T is not None else max(hi - t_s, 1)
    frame = IntensityFrame(frame.pixels, t_s=int(t_s), T=int(T))
    log.info("frame %dx%d exposure [%d, %d), %d events", frame.width, frame.height,
             frame.t_s, frame.t_s + frame.T, len(events))
    return events, frame


def _thresholds(args, events, frame) -> ThresholdSet:
    if args.theta_e is not None and args.theta_i is not None:
        return ThresholdSet.manual(args.contrast, args.theta_i, args.theta_e)
    est = estimate_thresholds(frame, slice_exposure(events, frame.t_s, frame.T), args.contrast)
    if args.theta_e is None and args.theta_i is None:
        return est
    return ThresholdSet.manual(args.contrast,
                               est.theta_I if args.theta_i is None else args.theta_i,
                               est.theta_e if args.theta_e is None else args.theta_e)


def cmd_threshold(args) -> int:
    events, frame = _load_inputs(args)
    _dump(estimate_thresholds(frame, slice_exposure(events, frame.t_s, frame.T), args.contrast).to_dict())
    return 0


def cmd_binarize(args) -> int:
    events, frame = _load_inputs(args)
    params = _thresholds(args, events, frame)
    write_frame(binarize_frame(frame, events, params), args.out)
    _dump({"out": args.out, "thresholds": params.to_dict()})
    return 0


def cmd_video(args) -> int:
    events, frame = _load_inputs(args)
    params = _thresholds(args, events, frame)
    init = binarize_frame(frame, events, params)
    after = events.take(slice(int(events.t.searchsorted(frame.t_s)), None))
    updates = propagate(init, after, params.c, params.theta_e, filter=args.filter)
    t0 = frame.t_s
    t1 = args.until if args.until is not None else max(after.span()[1], t0 + frame.T)
    frames = render_video(updates, fps=args.fps, span=(t0, t1))
    os.makedirs(args.out, exist_ok=True)
    for i, f in enumerate(frames):
        write_frame(f, os.path.join(args.out, f"frame_{i:06d}.pgm"))
    manifest = {"fps": args.fps, "t0": t0, "t1": t1, "count": len(frames),
                "filter": args.filter, "thresholds": params.to_dict()}
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    if args.updates:
        if args.filter:
            # the raw log is requested even when frames are filtered
            updates = propagate(init, after, params.c, params.theta_e, filter=False)
        updates.write_csv(args.updates)
    _dump(manifest)
    return 0


def cmd_simulate(args) -> int:
    spec = SceneSpec.from_json(args.spec)
    echo = simulate(spec, args.out, fps=args.fps)
    _dump({"out": args.out, "events": echo["events"], "gt_frames": len(echo["gt_times_us"])})
    return 0


def cmd_metrics(args) -> int:
    if args.pred and args.gt:
        _dump(score(read_binary_frame(args.pred), read_binary_frame(args.gt)))
        return 0
    if not (args.pred_dir and args.gt_dir):
        raise EbrError("give --pred/--gt or --pred-dir/--gt-dir")
    preds = {os.path.basename(p): p for p in glob.glob(os.path.join(args.pred_dir, args.pred_glob))}
    gts = {os.path.basename(p): p for p in glob.glob(os.path.join(args.gt_dir, args.gt_glob))}
    names = sorted(preds.keys() & gts.keys())
    if not names:
        # fall back to pairing by sorted order (e.g. frame_*.pgm vs gt_*.pgm)
        p_sorted, g_sorted = sorted(preds.values()), sorted(gts.values())
        if not p_sorted or len(p_sorted) != len(g_sorted):
            raise EbrError("prediction and ground-truth directories do not match")
        pairs = list(zip(p_sorted, g_sorted))
    else:
        pairs = [(preds[n], gts[n]) for n in names]
    _dump(mean_scores((read_binary_frame(p), read_binary_frame(g)) for p, g in pairs))
    return 0


def cmd_bench(args) -> int:
    events, frame = _load_inputs(args)
    _dump(bench(events, frame, reps=args.reps, c=args.contrast))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebr", description="Event-based binary reconstruction.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def inputs(p):
        p.add_argument("--events", required=True, help="event file (CSV or .bin)")
        p.add_argument("--event-format", choices=("csv", "binary"), default=None)
        p.add_argument("--frame", required=True, help="blurry frame, PGM P5")
        p.add_argument("--contrast", type=float, default=DEFAULT_CONTRAST)
        p.add_argument("--t-s", type=int, default=None, help="exposure start (us)")
        p.add_argument("--exposure", type=int, default=None, help="exposure duration (us)")

    def manual(p):
        p.add_argument("--theta-e", type=float, default=None)
        p.add_argument("--theta-i", type=float, default=None)

    p = sub.add_parser("threshold", help="estimate thresholds, print JSON")
    inputs(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("binarize", help="latent binary image at exposure start")
    inputs(p)
    manual(p)
    p.add_argument("--out", default="B.pgm")
    p.set_defaults(func=cmd_binarize)

    p = sub.add_parser("video", help="high frame-rate binary video")
    inputs(p)
    manual(p)
    p.add_argument("--fps", type=float, default=1000.0)
    p.add_argument("--filter", action="store_true", help="asynchronous median filter")
    p.add_argument("--until", type=int, default=None, help="end of rendered span (us)")
    p.add_argument("--out", required=True)
    p.add_argument("--updates", default=None, help="write raw update log CSV")
    p.set_defaults(func=cmd_video)

    p = sub.add_parser("simulate", help="render a synthetic scene")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fps", type=float, default=1000.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="MCC / PSNR / NRM")
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--pred-dir")
    p.add_argument("--gt-dir")
    p.add_argument("--pred-glob", default="*.pgm", help="file pattern inside --pred-dir")
    p.add_argument("--gt-glob", default="*.pgm", help="file pattern inside --gt-dir")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="runtime and real-time factor")
    inputs(p)
    p.add_argument("--reps", type=int, default=5)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PartitionError as exc:
        log.error("internal invariant violated: %s", exc)
        return EXIT_INTERNAL
    except (EbrError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except AssertionError as exc:
        log.error("internal invariant violated: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
