"""Event-based binary reconstruction of blurry bimodal scenes."""
from .binarize import binarize_frame, classify_event_space, classify_image_space, merge
from .core import (
    BinaryFrame,
    Event,
    EventStream,
    IntensityFrame,
    parse_event_file,
    read_frame,
    slice_exposure,
    write_event_file,
    write_frame,
)
from .fusion import ThresholdSet, estimate_thresholds, otsu_threshold
from .metrics import confusion, mcc, nrm, psnr_binary
from .video import Propagator, propagate, render_video

__version__ = "0.1.0"
