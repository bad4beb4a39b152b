"""Image -> minutiae -> finger-code, wiring every stage with one Config."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Config
from .enhance import binarize, build_gabor_bank, gabor_enhance, thin
from .exceptions import EmptyRoiError
from .imgio import check_pipeline_input, normalize
from .minutiae import MinutiaList, QualityMask, compute_quality_mask, extract_minutiae, remove_false_minutiae
from .ridgefield import (
    FrequencyField,
    OrientationField,
    RoiMask,
    estimate_frequency,
    estimate_orientation,
    interpolate_frequency,
    segment_roi,
    smooth_orientation,
)


@dataclass
class PipelineResult:
    normalized: np.ndarray
    roi: RoiMask
    orientation: OrientationField
    raw_frequency: FrequencyField
    frequency: FrequencyField
    enhanced: np.ndarray
    binary: np.ndarray
    skeleton: np.ndarray
    quality: QualityMask
    candidates: MinutiaList
    minutiae: MinutiaList


def process_image(img: np.ndarray, cfg: Config | None = None, image_id: str = "") -> PipelineResult:
    """Run enhancement and minutiae extraction on a [0, 1] grayscale image."""
    cfg = cfg or Config()
    check_pipeline_input(img)
    norm = normalize(img, cfg.target_mean, cfg.target_var)
    b = cfg.b
    roi = segment_roi(norm, b, cfg.g_thresh)
    if not roi.flags.any():
        raise EmptyRoiError("empty ROI: no foreground block found")
    orient = smooth_orientation(estimate_orientation(norm, b), cfg.smooth_window)
    raw_freq = estimate_frequency(norm, orient, roi, b, cfg.S, cfg.trim, cfg.f_min, cfg.f_max)
    freq = interpolate_frequency(raw_freq, roi)
    bank = build_gabor_bank(
        cfg.K_theta, freq.freqs[roi.flags], cfg.sigma_x, cfg.sigma_y, cfg.h, cfg.f_min, cfg.f_max
    )
    # the filter response is positive on bright structure; make ridges bright
    src = 2 * cfg.target_mean - norm if cfg.ridge_polarity == "dark" else norm
    enhanced = gabor_enhance(src, orient, freq, roi, bank)
    for _ in range(cfg.passes - 1):
        enhanced = gabor_enhance(enhanced, orient, freq, roi, bank)
    binary = binarize(enhanced, roi)
    skeleton = thin(binary)
    quality = compute_quality_mask(orient, raw_freq, roi, cfg.kappa_max)
    candidates = extract_minutiae(skeleton, quality, cfg.trace_len, image_id)
    minutiae = remove_false_minutiae(candidates, skeleton, quality, cfg.W, cfg.d_min, cfg.border)
    return PipelineResult(
        norm, roi, orient, raw_freq, freq, enhanced, binary, skeleton, quality, candidates, minutiae
    )


def extract(img: np.ndarray, cfg: Config | None = None, image_id: str = "") -> MinutiaList:
    return process_image(img, cfg, image_id).minutiae
