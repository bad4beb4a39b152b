"""Nearest-neighbour minutia codes and finger-code persistence.

For reference minutia ``i`` and neighbour ``j``::

    dx = x_i - x_j,  dy = y_i - y_j
    rho   = sqrt(dx^2 + dy^2)
    theta = atan2(dy, dx)            (literal mode)
          = wrap(atan2(dy, dx) - theta_i)   (normalized mode)
    phi   = wrap(theta_i - theta_j)

``wrap`` maps onto (-pi, pi].  Normalized codes are invariant to rotating
the whole constellation; literal codes keep the absolute frame.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .exceptions import CodeFormatError, InsufficientMinutiaeError
from .minutiae import BIFURCATION, ENDING, Minutia, MinutiaList

FINGERCODE_HEADER = "#ridgekit-fingercode v1"
MODES = ("normalized", "literal")


def wrap_angle(a):
    """Wrap angles onto (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=np.float64) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if w.ndim == 0 else w


class NeighborFeature(NamedTuple):
    rho: float
    theta: float
    phi: float


@dataclass
class MinutiaCode:
    ref_index: int
    neighbors: np.ndarray  # indices into the minutiae list, ascending rho
    rho: np.ndarray
    theta: np.ndarray
    phi: np.ndarray

    def __len__(self) -> int:
        return len(self.rho)

    @property
    def features(self) -> list[NeighborFeature]:
        return [NeighborFeature(float(r), float(t), float(p)) for r, t, p in zip(self.rho, self.theta, self.phi)]


@dataclass
class FingerCode:
    codes: list[MinutiaCode]
    n: int
    minutiae: MinutiaList
    mode: str = "normalized"
    subject_id: str = ""
    sample_id: str = ""

    def __len__(self) -> int:
        return len(self.codes)

    @cached_property
    def packed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(rho, theta, phi, lengths)``; feature arrays are ``(N, n)``, NaN padded."""
        N = len(self.codes)
        rho = np.full((N, self.n), np.nan)
        theta = np.full((N, self.n), np.nan)
        phi = np.full((N, self.n), np.nan)
        lengths = np.zeros(N, dtype=np.int64)
        for i, c in enumerate(self.codes):
            k = len(c)
            rho[i, :k] = c.rho
            theta[i, :k] = c.theta
            phi[i, :k] = c.phi
            lengths[i] = k
        return rho, theta, phi, lengths


def _distances(mlist: MinutiaList) -> np.ndarray:
    p = mlist.positions()
    return np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])


def _ranked(d_row: np.ndarray, i: int) -> np.ndarray:
    idx = np.arange(d_row.size)
    order = np.lexsort((idx, d_row))
    return order[order != i]


def nearest_neighbors(mlist: MinutiaList, i: int, n: int) -> np.ndarray:
    """Indices of the ``min(n, N-1)`` nearest minutiae to ``i`` (ties: lower index)."""
    if len(mlist) < 2:
        raise InsufficientMinutiaeError("insufficient minutiae: need at least 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    p = mlist.positions()
    d = np.hypot(p[:, 0] - p[i, 0], p[:, 1] - p[i, 1])
    return _ranked(d, i)[:n]


def encode_minutia(mlist: MinutiaList, i: int, neighbors, mode: str = "normalized") -> MinutiaCode:
    """Relative (rho, theta, phi) features of ``i`` against each neighbour.

    A neighbour that coincides with ``i`` is skipped and the next-nearest
    unused minutia takes its place.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    neighbors = [int(j) for j in neighbors]
    if not neighbors or i in neighbors:
        raise ValueError("neighbours must be nonempty and exclude the reference")
    want = len(neighbors)
    p = mlist.positions()
    d = np.hypot(p[:, 0] - p[i, 0], p[:, 1] - p[i, 1])
    chosen = [j for j in neighbors if d[j] > 0]
    if len(chosen) < want:
        spare = [j for j in _ranked(d, i) if d[j] > 0 and j not in chosen]
        chosen += spare[: want - len(chosen)]
        chosen.sort(key=lambda j: (d[j], j))
    j = np.array(chosen, dtype=np.int64)
    dx = mlist.x[i] - mlist.x[j]
    dy = mlist.y[i] - mlist.y[j]
    rho = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    if mode == "normalized":
        theta = wrap_angle(theta - mlist.theta[i])
    else:
        theta = wrap_angle(theta)
    phi = wrap_angle(mlist.theta[i] - mlist.theta[j])
    return MinutiaCode(i, j, rho, np.atleast_1d(theta), np.atleast_1d(phi))


def encode_fingerprint(
    mlist: MinutiaList, n: int = 9, mode: str = "normalized", subject_id: str = "", sample_id: str = ""
) -> FingerCode:
    """Encode every minutia against its ``n`` nearest neighbours."""
    if len(mlist) < 2:
        raise InsufficientMinutiaeError("insufficient minutiae: need at least 2")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    d = _distances(mlist)
    codes = []
    for i in range(len(mlist)):
        ranked = _ranked(d[i], i)
        ranked = ranked[d[i, ranked] > 0][:n]
        if ranked.size == 0:
            raise InsufficientMinutiaeError(f"minutia {i} has no distinct neighbour")
        codes.append(encode_minutia(mlist, i, ranked, mode))
    return FingerCode(codes, n, mlist, mode, subject_id, sample_id)


def _check_id(value: str, what: str) -> None:
    if any(ch.isspace() for ch in value):
        raise CodeFormatError(f"{what} {value!r} must not contain whitespace")


def format_fingercode(code: FingerCode, comment: str | None = None) -> str:
    _check_id(code.subject_id, "subject id")
    _check_id(code.sample_id, "sample id")
    N = len(code)
    expect = min(code.n, N - 1) if N else 0
    out = [
        f"{FINGERCODE_HEADER} subject={code.subject_id} sample={code.sample_id} "
        f"n={code.n} N={N} mode={code.mode}"
    ]
    if comment:
        out.append(f"# {comment}")
    for m, c in zip(code.minutiae, code.codes):
        if len(c) != expect:
            raise CodeFormatError(f"minutia {c.ref_index} has {len(c)} features, expected {expect}")
        out.append(f"{m.x:.9g} {m.y:.9g} {m.theta:.9g} {m.kind}")
        out.extend(f"{r:.9g} {t:.9g} {p:.9g}" for r, t, p in zip(c.rho, c.theta, c.phi))
    return "\n".join(out) + "\n"


def write_fingercode(code: FingerCode, path: str | os.PathLike, comment: str | None = None) -> None:
    text = format_fingercode(code, comment)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _parse_header(line: str, path) -> dict[str, str]:
    if not line.startswith(FINGERCODE_HEADER + " ") and line != FINGERCODE_HEADER:
        if line.startswith("#ridgekit-fingercode"):
            raise CodeFormatError(f"{path}: unsupported finger-code version: {line.split()[1]}")
        raise CodeFormatError(f"{path}: missing '{FINGERCODE_HEADER}' header")
    fields_ = {}
    for tok in line[len(FINGERCODE_HEADER):].split():
        key, sep, value = tok.partition("=")
        if not sep:
            raise CodeFormatError(f"{path}: bad header token {tok!r}")
        fields_[key] = value
    missing = {"subject", "sample", "n", "N", "mode"} - set(fields_)
    if missing:
        raise CodeFormatError(f"{path}: header lacks {sorted(missing)}")
    return fields_


def parse_fingercode(text: str, path="<string>") -> FingerCode:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CodeFormatError(f"{path}: empty file")
    head = _parse_header(lines[0], path)
    lines = lines[:1] + [ln for ln in lines[1:] if not ln.startswith("#")]
    try:
        n, N = int(head["n"]), int(head["N"])
    except ValueError:
        raise CodeFormatError(f"{path}: non-integer n or N") from None
    mode = head["mode"]
    if mode not in MODES or n < 1 or N < 0:
        raise CodeFormatError(f"{path}: bad header values")
    expect = min(n, N - 1) if N else 0
    if len(lines) != 1 + N * (1 + expect):
        raise CodeFormatError(f"{path}: expected {N} records of {expect} features")
    minutiae, codes = [], []
    pos = 1
    for i in range(N):
        parts = lines[pos].split()
        if len(parts) != 4 or parts[3] not in (ENDING, BIFURCATION):
            raise CodeFormatError(f"{path}: malformed minutia record at line {pos + 1}")
        try:
            minutiae.append(Minutia(float(parts[0]), float(parts[1]), float(parts[2]), parts[3]))
            feats = []
            for k in range(expect):
                vals = lines[pos + 1 + k].split()
                if len(vals) != 3:
                    raise CodeFormatError(f"{path}: malformed feature at line {pos + 2 + k}")
                feats.append([float(v) for v in vals])
        except ValueError:
            raise CodeFormatError(f"{path}: malformed number near line {pos + 1}") from None
        f = np.array(feats, dtype=np.float64).reshape(-1, 3)
        codes.append(MinutiaCode(i, np.empty(0, dtype=np.int64), f[:, 0], f[:, 1], f[:, 2]))
        pos += 1 + expect
    mlist = MinutiaList.from_minutiae(minutiae)
    # neighbour indices are implied by the stored positions
    if N > 1:
        d = _distances(mlist)
        for i, c in enumerate(codes):
            ranked = _ranked(d[i], i)
            c.neighbors = ranked[d[i, ranked] > 0][:expect]
    return FingerCode(codes, n, mlist, mode, head["subject"], head["sample"])


def read_fingercode(path: str | os.PathLike) -> FingerCode:
    """Load a finger-code file written by :func:`write_fingercode`."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CodeFormatError(f"cannot read {path}: {exc}") from exc
    return parse_fingercode(text, path)
