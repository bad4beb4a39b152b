"""Image loading, intensity normalization and dataset manifests."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import ImageFormatError, ManifestError

MANIFEST_HEADER = "#ridgekit-manifest v1"
MIN_SIDE = 32


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Read an 8-bit grayscale PGM (P5/P2) or PNG into a float array in [0, 1].

    The returned array has shape ``(height, width)``; 0 maps to 0.0 and 255
    to 1.0.
    """
    path = Path(path)
    if not path.is_file():
        raise ImageFormatError(f"cannot read {path}: no such file")
    try:
        with Image.open(path) as im:
            im.load()
            if im.format not in ("PPM", "PNG"):
                raise ImageFormatError(f"{path}: unsupported format {im.format}")
            if im.mode == "1":
                im = im.convert("L")
            if im.mode != "L":
                raise ImageFormatError(f"{path}: expected 8-bit grayscale, got mode {im.mode}")
            arr = np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, ValueError, OSError, SyntaxError) as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc
    if arr.size == 0:
        raise ImageFormatError(f"{path}: zero-sized image")
    return arr.astype(np.float64) / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    if img.dtype == bool:
        return np.where(img, 255, 0).astype(np.uint8)
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_pgm(img: np.ndarray, path: str | os.PathLike, comment: str | None = None) -> None:
    """Write a [0, 1] float image (or a boolean mask as 0/255) as binary PGM."""
    data = to_uint8(img)
    h, w = data.shape
    note = f"# {comment}\n" if comment else ""
    with open(path, "wb") as fh:
        fh.write(f"P5\n{note}{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def check_pipeline_input(img: np.ndarray) -> None:
    if img.ndim != 2:
        raise ImageFormatError(f"expected a 2-D grayscale image, got shape {img.shape}")
    h, w = img.shape
    if h < MIN_SIDE or w < MIN_SIDE:
        raise ImageFormatError(f"image {w}x{h} is smaller than {MIN_SIDE}x{MIN_SIDE}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ImageFormatError("pixel values must lie in [0, 1]")


def normalize(img: np.ndarray, target_mean: float = 0.5, target_var: float = 0.01) -> np.ndarray:
    """Affinely rescale ``img`` to the requested sample mean and variance.

    A constant input cannot be stretched, so it maps to a constant
    ``target_mean`` image.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.size == 0:
        return np.full_like(img, target_mean)
    # test constancy directly: the computed variance of a constant array can be
    # a rounding residue, and subnormal spreads underflow to zero variance
    var = img.var()
    if img.max() == img.min() or var == 0.0:
        return np.full_like(img, target_mean)
    mean = img.mean()
    return target_mean + (img - mean) * np.sqrt(target_var / var)


@dataclass
class DatasetIndex:
    """Subjects and their samples as declared by a manifest.

    ``paths`` maps ``(subject, sample)`` to an absolute image path.
    Iteration order is lexicographic by subject id, then ascending sample.
    """

    subjects: list[str]
    samples_per_subject: int
    paths: dict[tuple[str, int], Path] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.paths)

    def keys(self) -> list[tuple[str, int]]:
        return sorted(self.paths, key=lambda k: (k[0], k[1]))

    def samples(self, subject: str) -> list[int]:
        return sorted(s for subj, s in self.paths if subj == subject)


def read_manifest(manifest_path: str | os.PathLike) -> list[tuple[str, int, str]]:
    manifest_path = Path(manifest_path)
    try:
        lines = manifest_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise ManifestError(f"{manifest_path}: missing '{MANIFEST_HEADER}' header")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ManifestError(f"{manifest_path}:{lineno}: expected 3 tab-separated fields")
        subject, sample, rel = parts
        try:
            sample_no = int(sample)
        except ValueError:
            raise ManifestError(f"{manifest_path}:{lineno}: bad sample number {sample!r}") from None
        records.append((subject, sample_no, rel))
    return records


def load_dataset(manifest_path: str | os.PathLike, check_files: bool = True) -> DatasetIndex:
    """Parse a manifest into a :class:`DatasetIndex`.

    Paths are resolved relative to the manifest's directory.  Raises
    :class:`ManifestError` for duplicates, missing files or subjects with
    differing sample counts.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    paths: dict[tuple[str, int], Path] = {}
    for subject, sample, rel in read_manifest(manifest_path):
        key = (subject, sample)
        if key in paths:
            raise ManifestError(f"duplicate entry for subject {subject!r} sample {sample}")
        p = Path(rel)
        if not p.is_absolute():
            p = base / p
        if check_files and not p.is_file():
            raise ManifestError(f"missing file for subject {subject!r} sample {sample}: {p}")
        paths[key] = p
    if not paths:
        raise ManifestError(f"{manifest_path}: manifest lists no images")
    counts: dict[str, int] = {}
    for subject, _ in paths:
        counts[subject] = counts.get(subject, 0) + 1
    if len(set(counts.values())) != 1:
        raise ManifestError(f"inconsistent sample counts across subjects: {sorted(set(counts.values()))}")
    subjects = sorted(counts)
    return DatasetIndex(subjects=subjects, samples_per_subject=next(iter(counts.values())), paths=paths)


def write_manifest(entries, manifest_path: str | os.PathLike) -> None:
    """Write ``(subject, sample, relative_path)`` triples in manifest format."""
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(MANIFEST_HEADER + "\n")
        for subject, sample, rel in entries:
            fh.write(f"{subject}\t{sample}\t{rel}\n")
