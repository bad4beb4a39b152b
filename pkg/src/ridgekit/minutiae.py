"""Quality mask, crossing-number minutiae detection and false-minutiae removal."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from .enhance import _OFFSETS, neighbour_codes
from .exceptions import CodeFormatError
from .ridgefield import FrequencyField, OrientationField, RoiMask, angle_diff_pi, expand_blocks

ENDING = "ending"
BIFURCATION = "bifurcation"
MINUTIAE_HEADER = "#ridgekit-minutiae v1"


@dataclass
class QualityMask:
    block_size: int
    ok: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.ok.shape

    def pixel_mask(self, shape: tuple[int, int]) -> np.ndarray:
        return expand_blocks(self.ok, self.block_size, shape)


@dataclass(frozen=True)
class Minutia:
    x: float
    y: float
    theta: float
    kind: str


@dataclass
class MinutiaList:
    """Minutiae as parallel arrays, in the order the detector emitted them."""

    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    kind: list[str] = field(default_factory=list)
    image_id: str = ""

    @classmethod
    def from_minutiae(cls, items, image_id: str = "") -> MinutiaList:
        items = list(items)
        return cls(
            x=np.array([m.x for m in items], dtype=np.float64),
            y=np.array([m.y for m in items], dtype=np.float64),
            theta=np.array([m.theta for m in items], dtype=np.float64),
            kind=[m.kind for m in items],
            image_id=image_id,
        )

    @classmethod
    def empty(cls, image_id: str = "") -> MinutiaList:
        return cls.from_minutiae([], image_id)

    def __len__(self) -> int:
        return len(self.kind)

    def __getitem__(self, i: int) -> Minutia:
        return Minutia(float(self.x[i]), float(self.y[i]), float(self.theta[i]), self.kind[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, keep) -> MinutiaList:
        keep = np.asarray(keep, dtype=bool)
        return MinutiaList(
            self.x[keep], self.y[keep], self.theta[keep],
            [k for k, flag in zip(self.kind, keep) if flag], self.image_id,
        )

    def positions(self) -> np.ndarray:
        return np.stack([self.x, self.y], axis=1)


def compute_quality_mask(
    field: OrientationField, freq: FrequencyField, roi: RoiMask, kappa_max: float = math.pi / 6
) -> QualityMask:
    """Blocks that are foreground, frequency-valid and of low ridge curvature.

    Curvature is the largest orientation difference (mod pi) to any
    foreground 4-neighbour block.
    """
    if not (field.shape == freq.shape == roi.shape):
        raise ValueError("grids disagree")
    angles = field.angles
    fg = roi.flags
    curvature = np.zeros(angles.shape)
    padded = np.pad(angles, 1)
    padded_fg = np.pad(fg, 1)
    rows, cols = angles.shape
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nb = padded[1 + dr : 1 + dr + rows, 1 + dc : 1 + dc + cols]
        nb_fg = padded_fg[1 + dr : 1 + dr + rows, 1 + dc : 1 + dc + cols]
        curvature = np.maximum(curvature, np.where(nb_fg, angle_diff_pi(angles, nb), 0.0))
    ok = fg & freq.valid & (curvature <= kappa_max)
    return QualityMask(field.block_size, ok)


def crossing_transitions(neighborhood) -> int:
    """Count 0 -> 1 steps around a closed clockwise ring of 8 neighbours."""
    v = [bool(n) for n in neighborhood]
    if len(v) != 8:
        raise ValueError("need exactly 8 neighbours")
    return sum(1 for i in range(8) if not v[i] and v[(i + 1) % 8])


# transitions per neighbourhood code (bits are clockwise from N)
_CN = np.array([crossing_transitions([(c >> k) & 1 for k in range(8)]) for c in range(256)], dtype=np.int8)


def _neighbours(skel: np.ndarray, r: int, c: int) -> list[tuple[int, int]]:
    h, w = skel.shape
    out = []
    for dr, dc in _OFFSETS:
        rr, cc = r + dr, c + dc
        if 0 <= rr < h and 0 <= cc < w and skel[rr, cc]:
            out.append((rr, cc))
    return out


def _branch_starts(skel: np.ndarray, r: int, c: int) -> list[tuple[int, int]]:
    """One entry pixel per run of ridge neighbours (4-neighbours preferred)."""
    h, w = skel.shape
    ring = []
    for dr, dc in _OFFSETS:
        rr, cc = r + dr, c + dc
        ring.append(0 <= rr < h and 0 <= cc < w and bool(skel[rr, cc]))
    if all(ring):
        return []
    # rotate so the ring starts just after a background neighbour
    start = next(i for i in range(8) if not ring[i]) + 1
    runs: list[list[int]] = []
    for j in range(8):
        k = (start + j) % 8
        if ring[k]:
            if runs and runs[-1][-1] == (k - 1) % 8 and ring[(k - 1) % 8]:
                runs[-1].append(k)
            else:
                runs.append([k])
    starts = []
    for run in runs:
        straight = [k for k in run if k % 2 == 0]
        k = straight[0] if straight else run[0]
        dr, dc = _OFFSETS[k]
        starts.append((r + dr, c + dc))
    return starts


def trace(skel: np.ndarray, origin: tuple[int, int], first: tuple[int, int], steps: int,
          blocked: set | None = None) -> tuple[list[tuple[int, int]], str]:
    """Follow a ridge from ``origin`` through ``first`` for up to ``steps`` pixels.

    Returns the visited path (excluding origin) and why the walk ended:
    ``"length"``, ``"end"`` (dead end) or ``"junction"``.
    """
    visited = {origin, first} | (blocked or set())
    path = [first]
    cur = first
    while len(path) < steps:
        cand = [p for p in _neighbours(skel, *cur) if p not in visited]
        if not cand:
            return path, "end"
        if len(cand) > 1:
            # several candidates that touch each other are a staircase, not a fork
            linked = all(max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1 for a in cand for b in cand if a != b)
            if not linked or len(cand) > 2:
                return path, "junction"
            # step onto the 4-neighbour; the ridge may continue through the
            # other pixel, so it stays walkable
            straight = [p for p in cand if p[0] == cur[0] or p[1] == cur[1]]
            nxt = straight[0] if straight else cand[0]
        else:
            nxt = cand[0]
        visited.add(nxt)
        path.append(nxt)
        cur = nxt
    return path, "length"


def minutia_direction(skel: np.ndarray, x: int, y: int, kind: str, trace_len: int = 10) -> float:
    """Dominant angle in [0, 2 pi) by walking the ridge branches.

    Endings point along the ridge away from the tip; bifurcations point
    opposite the sum of their three branch displacements.
    """
    r, c = int(y), int(x)
    starts = _branch_starts(skel, r, c)
    if not starts:
        return 0.0
    if kind == ENDING:
        path, _ = trace(skel, (r, c), starts[0], trace_len)
        er, ec = path[-1]
        return math.atan2(er - r, ec - c) % (2 * math.pi)
    blocked = set(starts)
    sx = sy = 0.0
    for s in starts:
        path, _ = trace(skel, (r, c), s, trace_len, blocked - {s})
        er, ec = path[-1]
        sx += ec - c
        sy += er - r
    if sx == 0.0 and sy == 0.0:
        return 0.0
    return math.atan2(-sy, -sx) % (2 * math.pi)


def extract_minutiae(
    skel: np.ndarray, qmask: QualityMask, trace_len: int = 10, image_id: str = ""
) -> MinutiaList:
    """Crossing-number detection on skeleton pixels inside quality-ok blocks."""
    skel = np.asarray(skel, dtype=bool)
    cn = _CN[neighbour_codes(skel)]
    allowed = skel & qmask.pixel_mask(skel.shape)
    allowed[0, :] = allowed[-1, :] = False
    allowed[:, 0] = allowed[:, -1] = False
    found = []
    # nonzero yields row-major order, i.e. sorted by (y, x)
    for r, c in zip(*np.nonzero(allowed & ((cn == 1) | (cn == 3)))):
        kind = ENDING if cn[r, c] == 1 else BIFURCATION
        theta = minutia_direction(skel, c, r, kind, trace_len)
        found.append(Minutia(float(c), float(r), theta, kind))
    return MinutiaList.from_minutiae(found, image_id)


def _angle_diff_2pi(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), 2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


def remove_false_minutiae(
    mlist: MinutiaList,
    skel: np.ndarray,
    qmask: QualityMask,
    W: int = 17,
    d_min: float = 8.0,
    border: float = 8.0,
) -> MinutiaList:
    """Drop boundary, broken-ridge, clustered and spur minutiae, in that order.

    (a) within ``border`` px of a not-ok block or the image edge;
    (b) facing ending pairs within ``d_min`` whose directions are
        anti-parallel within 30 degrees;
    (c) every remaining pair within ``d_min``;
    (d) endings whose ridge dead-ends or forks within ``W // 2`` pixels.
    """
    if W % 2 == 0:
        raise ValueError("window size W must be odd")
    if len(mlist) == 0:
        return mlist
    skel = np.asarray(skel, dtype=bool)

    ok = np.pad(qmask.pixel_mask(skel.shape), 1)
    dist = ndi.distance_transform_edt(ok)[1:-1, 1:-1]
    rr = mlist.y.astype(int)
    cc = mlist.x.astype(int)
    cur = mlist.subset(dist[rr, cc] > border)

    def pair_matrix(ml: MinutiaList) -> np.ndarray:
        p = ml.positions()
        d = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
        np.fill_diagonal(d, np.inf)
        return d <= d_min

    if len(cur) > 1:
        close = pair_matrix(cur)
        is_end = np.array([k == ENDING for k in cur.kind])
        facing = _angle_diff_2pi(cur.theta[:, None], cur.theta[None, :] + np.pi) <= math.radians(30)
        broken = close & facing & is_end[:, None] & is_end[None, :]
        cur = cur.subset(~broken.any(axis=1))

    if len(cur) > 1:
        cur = cur.subset(~pair_matrix(cur).any(axis=1))

    keep = np.ones(len(cur), dtype=bool)
    half = W // 2
    for i, m in enumerate(cur):
        if m.kind != ENDING:
            continue
        r, c = int(m.y), int(m.x)
        starts = _branch_starts(skel, r, c)
        if not starts:
            keep[i] = False
            continue
        path, why = trace(skel, (r, c), starts[0], half + 1)
        if why != "length" and len(path) <= half:
            keep[i] = False
    return cur.subset(keep)


def write_minutiae(mlist: MinutiaList, path: str | os.PathLike, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MINUTIAE_HEADER} {mlist.image_id}".rstrip() + "\n")
        if comment:
            fh.write(f"# {comment}\n")
        for m in mlist:
            fh.write(f"{m.x:.9g}\t{m.y:.9g}\t{m.theta:.9g}\t{m.kind}\n")


def read_minutiae(path: str | os.PathLike) -> MinutiaList:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(MINUTIAE_HEADER):
        raise CodeFormatError(f"{path}: missing '{MINUTIAE_HEADER}' header")
    image_id = lines[0][len(MINUTIAE_HEADER):].strip()
    items = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4 or parts[3] not in (ENDING, BIFURCATION):
            raise CodeFormatError(f"{path}:{lineno}: malformed minutia record")
        try:
            items.append(Minutia(float(parts[0]), float(parts[1]), float(parts[2]), parts[3]))
        except ValueError:
            raise CodeFormatError(f"{path}:{lineno}: malformed number") from None
    return MinutiaList.from_minutiae(items, image_id)
