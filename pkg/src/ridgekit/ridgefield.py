"""Block-wise ridge structure: foreground mask, orientation and frequency.

All fields live on a grid of ``ceil(h / b) x ceil(w / b)`` blocks.  Pixel
coordinates follow the image convention: ``x`` is the column, ``y`` the row
(pointing down), and angles are ``atan2(dy, dx)`` in that frame.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage as ndi

from .exceptions import FrequencyEstimationError

F_MIN = 1.0 / 25.0
F_MAX = 1.0 / 3.0


def grid_shape(shape: tuple[int, int], b: int) -> tuple[int, int]:
    return (-(-shape[0] // b), -(-shape[1] // b))


def block_sums(arr: np.ndarray, b: int) -> np.ndarray:
    """Sum ``arr`` over each ``b x b`` block; trailing partial blocks included."""
    rows, cols = grid_shape(arr.shape, b)
    padded = np.zeros((rows * b, cols * b), dtype=np.float64)
    padded[: arr.shape[0], : arr.shape[1]] = arr
    return padded.reshape(rows, b, cols, b).sum(axis=(1, 3))


def block_means(arr: np.ndarray, b: int) -> np.ndarray:
    counts = block_sums(np.ones(arr.shape), b)
    return block_sums(arr, b) / counts


def expand_blocks(grid: np.ndarray, b: int, shape: tuple[int, int]) -> np.ndarray:
    """Broadcast a per-block array back to pixel resolution."""
    return np.repeat(np.repeat(grid, b, axis=0), b, axis=1)[: shape[0], : shape[1]]


def gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel responses scaled by 1/4 (central difference across two pixels)."""
    img = np.asarray(img, dtype=np.float64)
    gx = ndi.sobel(img, axis=1, mode="nearest") / 4.0
    gy = ndi.sobel(img, axis=0, mode="nearest") / 4.0
    return gx, gy


def angle_diff_pi(a, b):
    """Unsigned distance between axial angles (period pi)."""
    d = np.mod(np.asarray(a) - np.asarray(b), np.pi)
    return np.minimum(d, np.pi - d)


@dataclass
class RoiMask:
    block_size: int
    flags: np.ndarray  # bool, (rows, cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self.flags.shape

    def pixel_mask(self, shape: tuple[int, int]) -> np.ndarray:
        return expand_blocks(self.flags, self.block_size, shape)


@dataclass
class OrientationField:
    block_size: int
    angles: np.ndarray  # ridge angle per block, [0, pi)

    @property
    def shape(self) -> tuple[int, int]:
        return self.angles.shape


@dataclass
class FrequencyField:
    block_size: int
    freqs: np.ndarray  # cycles/px, 0 where invalid
    valid: np.ndarray  # bool
    f_min: float = F_MIN
    f_max: float = F_MAX

    @property
    def shape(self) -> tuple[int, int]:
        return self.freqs.shape


def segment_roi(img: np.ndarray, b: int = 16, g_thresh: float = 0.05) -> RoiMask:
    """Flag blocks whose mean gradient magnitude reaches ``g_thresh``.

    Foreground blocks without any foreground 4-neighbour are demoted.
    """
    if b < 4:
        raise ValueError("block size must be >= 4")
    gx, gy = gradients(img)
    mag = block_means(np.hypot(gx, gy), b)
    flags = mag >= g_thresh
    cross = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    neighbours = ndi.convolve(flags.astype(np.int32), cross, mode="constant", cval=0)
    flags &= neighbours > 0
    return RoiMask(b, flags)


def estimate_orientation(img: np.ndarray, b: int = 16) -> OrientationField:
    """Least-squares block orientation from doubled-angle gradient moments."""
    if b < 4:
        raise ValueError("block size must be >= 4")
    gx, gy = gradients(img)
    vy = block_sums(2.0 * gx * gy, b)
    vx = block_sums(gx * gx - gy * gy, b)
    energy = block_sums(gx * gx + gy * gy, b)
    grad_dir = 0.5 * np.arctan2(vy, vx)
    angles = np.mod(grad_dir + np.pi / 2, np.pi)
    angles[energy == 0.0] = 0.0
    return OrientationField(b, angles)


def smooth_orientation(field: OrientationField, window: int = 3) -> OrientationField:
    """Average orientations as doubled-angle unit vectors over a square window.

    The window is clipped at the grid border.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    if window == 1:
        return replace(field, angles=field.angles.copy())
    sin2 = np.sin(2 * field.angles)
    cos2 = np.cos(2 * field.angles)
    kernel = np.ones((window, window))
    s = ndi.convolve(sin2, kernel, mode="constant", cval=0.0)
    c = ndi.convolve(cos2, kernel, mode="constant", cval=0.0)
    angles = np.mod(0.5 * np.arctan2(s, c), np.pi)
    # uniform neighbourhoods must stay bit-identical
    uniform = ndi.maximum_filter(field.angles, size=window, mode="nearest") == ndi.minimum_filter(
        field.angles, size=window, mode="nearest"
    )
    angles[uniform] = field.angles[uniform]
    return replace(field, angles=angles)


def _peaks(signature: np.ndarray) -> np.ndarray:
    """Sub-pixel positions of strict local maxima after 3-tap smoothing."""
    if signature.size < 5:
        return np.empty(0)
    sm = np.convolve(signature, np.ones(3) / 3.0, mode="valid")
    left, mid, right = sm[:-2], sm[1:-1], sm[2:]
    idx = np.nonzero((mid > left) & (mid > right))[0]
    if idx.size == 0:
        return np.empty(0)
    denom = left[idx] - 2 * mid[idx] + right[idx]
    offset = np.where(denom != 0, 0.5 * (left[idx] - right[idx]) / np.where(denom != 0, denom, 1), 0.0)
    # +1 for the interior index, +1 for the 'valid' convolution shift
    return idx + 2.0 + offset


def segment_frequency(signature: np.ndarray) -> float | None:
    """Ridge frequency of one x-signature: (peaks - 1) / span, or None."""
    finite = np.isfinite(signature)
    if not finite.any():
        return None
    # longest contiguous run of sampled columns
    edges = np.diff(np.concatenate(([0], finite.astype(np.int8), [0])))
    starts = np.nonzero(edges == 1)[0]
    stops = np.nonzero(edges == -1)[0]
    k = int(np.argmax(stops - starts))
    peaks = _peaks(signature[starts[k] : stops[k]])
    if peaks.size < 2:
        return None
    span = peaks[-1] - peaks[0]
    if span <= 0:
        return None
    return (peaks.size - 1) / span


def trimmed_mean(values, trim: int) -> float:
    """Mean after dropping ``trim`` values from each tail.

    Fewer values than ``2 * trim + 1`` shrink the trim so at least one
    value survives.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    k = min(trim, (v.size - 1) // 2)
    return float(v[k : v.size - k].mean())


def oriented_windows(img: np.ndarray, centers: np.ndarray, angles: np.ndarray, b: int) -> np.ndarray:
    """Sample ``b x 2b`` windows with ridges along the rows' axis.

    Row index runs along the ridge, column index across it.  Samples that
    fall outside the image are NaN.
    """
    along = np.arange(b) - (b - 1) / 2.0
    across = np.arange(2 * b) - (2 * b - 1) / 2.0
    t = np.stack([np.cos(angles), np.sin(angles)], axis=-1)  # (k, 2) as (x, y)
    n = np.stack([-np.sin(angles), np.cos(angles)], axis=-1)
    xs = (
        centers[:, 0, None, None]
        + along[None, :, None] * t[:, 0, None, None]
        + across[None, None, :] * n[:, 0, None, None]
    )
    ys = (
        centers[:, 1, None, None]
        + along[None, :, None] * t[:, 1, None, None]
        + across[None, None, :] * n[:, 1, None, None]
    )
    h, w = img.shape
    out = ndi.map_coordinates(img, [ys.ravel(), xs.ravel()], order=1, mode="constant", cval=np.nan)
    out = out.reshape(xs.shape)
    outside = (xs < 0) | (xs > w - 1) | (ys < 0) | (ys > h - 1)
    out[outside] = np.nan
    return out


def estimate_frequency(
    img: np.ndarray,
    field: OrientationField,
    roi: RoiMask,
    b: int = 16,
    S: int = 4,
    trim: int = 1,
    f_min: float = F_MIN,
    f_max: float = F_MAX,
) -> FrequencyField:
    """Segment-wise x-signature ridge frequency per foreground block.

    Each block's ``b x 2b`` oriented window is cut into ``S`` strips along
    the ridge; each strip's column-mean signature yields one frequency
    estimate, and the block value is their alpha-trimmed mean.
    """
    if S < 3 or 2 * trim >= S:
        raise ValueError("need S >= 3 and 2 * trim < S")
    if field.shape != roi.shape or field.shape != grid_shape(img.shape, b):
        raise ValueError("orientation field, ROI and image grids disagree")
    freqs = np.zeros(field.shape)
    valid = np.zeros(field.shape, dtype=bool)
    rr, cc = np.nonzero(roi.flags)
    if rr.size == 0:
        return FrequencyField(b, freqs, valid, f_min, f_max)
    h, w = img.shape
    x0 = cc * b
    y0 = rr * b
    cx = (x0 + np.minimum(x0 + b, w) - 1) / 2.0
    cy = (y0 + np.minimum(y0 + b, h) - 1) / 2.0
    windows = oriented_windows(img, np.stack([cx, cy], axis=1), field.angles[rr, cc], b)
    row_groups = np.array_split(np.arange(b), S)
    need = S - 2 * trim
    for k in range(rr.size):
        seg_freqs = []
        for rows in row_groups:
            strip = windows[k, rows, :]
            with np.errstate(invalid="ignore"):
                counts = np.isfinite(strip).sum(axis=0)
                sig = np.where(counts > 0, np.nansum(strip, axis=0) / np.maximum(counts, 1), np.nan)
            f = segment_frequency(sig)
            if f is not None:
                seg_freqs.append(f)
        if len(seg_freqs) < need:
            continue
        f = trimmed_mean(seg_freqs, trim)
        if f_min <= f <= f_max:
            freqs[rr[k], cc[k]] = f
            valid[rr[k], cc[k]] = True
    return FrequencyField(b, freqs, valid, f_min, f_max)


def interpolate_frequency(field: FrequencyField, roi: RoiMask) -> FrequencyField:
    """Fill invalid foreground blocks from the nearest ring of valid blocks."""
    src_valid = field.valid & roi.flags
    if not src_valid.any():
        raise FrequencyEstimationError("frequency estimation failed: no valid block")
    freqs = np.where(src_valid, field.freqs, 0.0)
    out = freqs.copy()
    rows, cols = field.shape
    for r, c in zip(*np.nonzero(roi.flags & ~src_valid)):
        for radius in range(1, max(rows, cols) + 1):
            r0, r1 = max(r - radius, 0), min(r + radius + 1, rows)
            c0, c1 = max(c - radius, 0), min(c + radius + 1, cols)
            sel = src_valid[r0:r1, c0:c1]
            if sel.any():
                out[r, c] = freqs[r0:r1, c0:c1][sel].mean()
                break
    return replace(field, freqs=out, valid=roi.flags.copy())


def write_grid(path: str | os.PathLike, values: np.ndarray, b: int, label: str, comment: str | None = None) -> None:
    """Dump a block grid as text: ``#`` header, one block row per line."""
    rows, cols = values.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {label} b={b} rows={rows} cols={cols}\n")
        if comment:
            fh.write(f"# {comment}\n")
        for row in values:
            fh.write(" ".join(f"{v:.6f}" for v in row) + "\n")


def read_grid(path: str | os.PathLike) -> tuple[np.ndarray, int]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        b = int(next(tok.split("=")[1] for tok in header if tok.startswith("b=")))
        values = np.loadtxt(fh, ndmin=2)
    return values, b



__all__ = [
    "RoiMask",
    "OrientationField",
    "FrequencyField",
    "segment_roi",
    "estimate_orientation",
    "smooth_orientation",
    "estimate_frequency",
    "interpolate_frequency",
    "gradients",
    "angle_diff_pi",
    "grid_shape",
    "expand_blocks",
    "write_grid",
    "read_grid",
]
