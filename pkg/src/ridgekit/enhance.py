"""Gabor filter-bank enhancement, binarization and thinning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi
from scipy.signal import fftconvolve

from .ridgefield import F_MAX, F_MIN, FrequencyField, OrientationField, RoiMask, angle_diff_pi, expand_blocks


def gabor_kernel(
    theta: float, freq: float, sigma_x: float = 4.0, sigma_y: float = 4.0, h: int = 11, dc_remove: bool = True
) -> np.ndarray:
    """Even-symmetric Gabor taps on the grid ``[-h, h]^2``.

    ``theta`` is the direction of the cosine modulation (the ridge normal).
    Rows index ``y`` and columns index ``x``.  With ``dc_remove`` the tap
    mean is subtracted so a constant image gives zero response.
    """
    if not 0.0 < freq < 0.5:
        raise ValueError(f"frequency {freq} outside (0, 0.5)")
    if sigma_x <= 0 or sigma_y <= 0:
        raise ValueError("sigma_x and sigma_y must be positive")
    if h < 1:
        raise ValueError("half-width must be >= 1")
    y, x = np.mgrid[-h : h + 1, -h : h + 1].astype(np.float64)
    c, s = np.cos(theta), np.sin(theta)
    xt = x * c + y * s
    yt = -x * s + y * c
    taps = np.exp(-0.5 * (xt**2 / sigma_x**2 + yt**2 / sigma_y**2)) * np.cos(2 * np.pi * freq * xt)
    # enforce exact even symmetry against rounding in xt, yt
    taps = 0.5 * (taps + taps[::-1, ::-1])
    if dc_remove:
        taps -= taps.mean()
    return taps


@dataclass
class GaborBank:
    """Kernels indexed by (ridge orientation, frequency).

    ``orientations`` are ridge directions; each kernel modulates along the
    corresponding normal, ``orientation + pi/2``.
    """

    orientations: np.ndarray
    frequencies: np.ndarray
    sigma_x: float
    sigma_y: float
    h: int
    kernels: dict[tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.kernels)

    def kernel(self, oi: int, fi: int) -> np.ndarray:
        return self.kernels[(oi, fi)]

    def select(self, theta, freq) -> tuple[np.ndarray, np.ndarray]:
        """Nearest orientation (mod pi), then nearest frequency; ties to lower index."""
        theta = np.asarray(theta, dtype=np.float64)
        freq = np.asarray(freq, dtype=np.float64)
        d_theta = angle_diff_pi(theta[..., None], self.orientations)
        d_freq = np.abs(freq[..., None] - self.frequencies)
        return np.argmin(d_theta, axis=-1), np.argmin(d_freq, axis=-1)


def frequency_bins(freqs, f_min: float = F_MIN, f_max: float = F_MAX, step: float = 0.01) -> np.ndarray:
    f = np.clip(np.asarray(freqs, dtype=np.float64).ravel(), f_min, f_max)
    binned = np.round(np.round(f / step) * step, 10)
    return np.unique(np.clip(binned, f_min, f_max))


def build_gabor_bank(
    K_theta: int,
    freqs,
    sigma_x: float = 4.0,
    sigma_y: float = 4.0,
    h: int = 11,
    f_min: float = F_MIN,
    f_max: float = F_MAX,
) -> GaborBank:
    """One DC-free kernel per (k*pi/K_theta, binned frequency) pair.

    ``freqs`` are raw block frequencies; they are rounded to 0.01 cycles/px,
    clamped to ``[f_min, f_max]`` and deduplicated.
    """
    if K_theta < 4:
        raise ValueError("need at least 4 orientation bins")
    freqs = np.asarray(freqs, dtype=np.float64).ravel()
    freqs = freqs[freqs > 0]
    if freqs.size == 0:
        raise ValueError("empty frequency list")
    orientations = np.arange(K_theta) * np.pi / K_theta
    bins = frequency_bins(freqs, f_min, f_max)
    kernels = {
        (oi, fi): gabor_kernel(o + np.pi / 2, f, sigma_x, sigma_y, h)
        for oi, o in enumerate(orientations)
        for fi, f in enumerate(bins)
    }
    return GaborBank(orientations, bins, sigma_x, sigma_y, h, kernels)


def gabor_enhance(
    img: np.ndarray,
    field: OrientationField,
    freq: FrequencyField,
    roi: RoiMask,
    bank: GaborBank,
) -> np.ndarray:
    """Filter each foreground block with its best-matching bank kernel.

    The signed response is rescaled so zero maps to 0.5 and the largest
    foreground magnitude to 0 or 1; background pixels are 0.5.
    """
    img = np.asarray(img, dtype=np.float64)
    b = field.block_size
    if not (field.shape == freq.shape == roi.shape) or freq.block_size != b or roi.block_size != b:
        raise ValueError("orientation, frequency and ROI grids disagree")
    out = np.full(img.shape, 0.5)
    if not roi.flags.any():
        return out
    oi, fi = bank.select(field.angles, freq.freqs)
    choice = np.where(roi.flags, oi * len(bank.frequencies) + fi, -1)
    pix_choice = expand_blocks(choice, b, img.shape)
    centered = img - img.mean()
    resp = np.zeros(img.shape)
    for code in np.unique(choice[choice >= 0]):
        k = bank.kernel(int(code) // len(bank.frequencies), int(code) % len(bank.frequencies))
        sel = pix_choice == code
        # taps are even, so convolution equals correlation
        resp[sel] = fftconvolve(centered, k, mode="same")[sel]
    fg = pix_choice >= 0
    peak = np.abs(resp[fg]).max()
    if peak > 0:
        out[fg] = 0.5 + 0.5 * resp[fg] / peak
    return out


def binarize(img: np.ndarray, roi: RoiMask) -> np.ndarray:
    """Ridge mask: foreground pixels at or above the rescaled zero level."""
    return (np.asarray(img) >= 0.5) & roi.pixel_mask(img.shape)


# --- thinning -------------------------------------------------------------

# neighbour offsets P2..P9 (N, NE, E, SE, S, SW, W, NW), bit k for P(k+2)
_OFFSETS = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
_WEIGHTS = np.zeros((3, 3), dtype=np.int32)
for _k, (_dr, _dc) in enumerate(_OFFSETS):
    _WEIGHTS[1 + _dr, 1 + _dc] = 1 << _k


def neighbour_codes(bits: np.ndarray) -> np.ndarray:
    """8-bit code of each pixel's neighbourhood (bit k = P(k+2))."""
    # correlate, not convolve, so the weight at (dr, dc) reads pixel (r+dr, c+dc)
    return ndi.correlate(bits.astype(np.int32), _WEIGHTS, mode="constant", cval=0)


def _unpack(code: int) -> list[int]:
    return [(code >> k) & 1 for k in range(8)]


def _zs_tables() -> tuple[np.ndarray, np.ndarray]:
    first = np.zeros(256, dtype=bool)
    second = np.zeros(256, dtype=bool)
    for code in range(256):
        p2, p3, p4, p5, p6, p7, p8, p9 = _unpack(code)
        seq = [p2, p3, p4, p5, p6, p7, p8, p9, p2]
        a = sum(1 for i in range(8) if seq[i] == 0 and seq[i + 1] == 1)
        n = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
        if not (2 <= n <= 6 and a == 1):
            continue
        first[code] = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
        second[code] = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
    return first, second


_ZS_FIRST, _ZS_SECOND = _zs_tables()


def _simple_table() -> np.ndarray:
    """Yokoi 8-connectivity number == 1, i.e. deleting the pixel keeps topology."""
    table = np.zeros(256, dtype=bool)
    for code in range(256):
        p2, p3, p4, p5, p6, p7, p8, p9 = _unpack(code)
        # counter-clockwise from E: x0..x7 = E, NE, N, NW, W, SW, S, SE
        xs = [p4, p3, p2, p9, p8, p7, p6, p5]
        inv = [1 - v for v in xs]
        n8 = sum(inv[k] - inv[k] * inv[(k + 1) % 8] * inv[(k + 2) % 8] for k in (0, 2, 4, 6))
        table[code] = n8 == 1
    return table


def _ring_connected_table() -> np.ndarray:
    """Foreground neighbours form one 8-connected group around the centre."""
    table = np.zeros(256, dtype=bool)
    for code in range(256):
        on = [_OFFSETS[k] for k in range(8) if (code >> k) & 1]
        if not on:
            continue
        seen = {on[0]}
        stack = [on[0]]
        while stack:
            r, c = stack.pop()
            for q in on:
                if q not in seen and max(abs(q[0] - r), abs(q[1] - c)) == 1:
                    seen.add(q)
                    stack.append(q)
        table[code] = len(seen) == len(on)
    return table


_SIMPLE = _simple_table()
_RING = _ring_connected_table()


_EIGHT = np.ones((3, 3), dtype=bool)


def _spare_last_pixels(bits: np.ndarray, delete: np.ndarray) -> None:
    """Keep one pixel of any component a parallel subpass would erase."""
    labels, n = ndi.label(bits, _EIGHT)
    if n == 0:
        return
    survivors = np.bincount(labels[bits & ~delete], minlength=n + 1)
    for lab in np.nonzero(survivors[1:] == 0)[0] + 1:
        rr, cc = np.nonzero(labels == lab)
        d = (rr - rr.mean()) ** 2 + (cc - cc.mean()) ** 2
        k = int(np.argmin(d))
        delete[rr[k], cc[k]] = False


def _zhang_suen(bits: np.ndarray) -> np.ndarray:
    bits = bits.copy()
    while True:
        changed = False
        for table in (_ZS_FIRST, _ZS_SECOND):
            delete = bits & table[neighbour_codes(bits)]
            if delete.any():
                _spare_last_pixels(bits, delete)
                bits &= ~delete
                changed = True
        if not changed:
            return bits


def _break_squares(bits: np.ndarray) -> bool:
    """Delete one pixel from each full 2x2 square; True if any removed.

    ``bits`` must carry a one-pixel background frame.
    """
    removed = False
    squares = bits[:-1, :-1] & bits[1:, :-1] & bits[:-1, 1:] & bits[1:, 1:]
    for r, c in zip(*np.nonzero(squares)):
        if not (bits[r, c] and bits[r + 1, c] and bits[r, c + 1] and bits[r + 1, c + 1]):
            continue
        corners = ((r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1))
        codes = [int((bits[pr - 1 : pr + 2, pc - 1 : pc + 2] * _WEIGHTS).sum()) for pr, pc in corners]
        # prefer a true simple point; otherwise any pixel whose removal keeps
        # its neighbours connected (may merge background, never splits ridges)
        for table in (_SIMPLE, _RING):
            hit = next((k for k, code in enumerate(codes) if table[code]), None)
            if hit is not None:
                bits[corners[hit]] = False
                removed = True
                break
    return removed


def thin(binary: np.ndarray) -> np.ndarray:
    """Reduce ridges to one-pixel-wide 8-connected curves.

    Two-subpass Zhang-Suen deletion runs to a fixed point, never erasing a
    whole component (its most central pixel survives); any remaining full
    2x2 squares are then broken by deleting a simple point, and the two steps
    repeat until neither changes the image.
    """
    bits = np.asarray(binary, dtype=bool)
    if bits.size == 0:
        return bits.copy()
    # pad so border pixels see background neighbours
    work = np.pad(bits, 1)
    while True:
        work = _zhang_suen(work)
        if not _break_squares(work):
            break
    return work[1:-1, 1:-1]
