"""Verification protocol: genuine/impostor pairs, error rates, EER, sweeps.

Genuine pairs compare every two samples of one subject (once per unordered
pair by default, or in both directions with ``ordered=True``); impostor
pairs compare the first sample of every two subjects.  A comparison is accepted
when its score is at or above the threshold.
"""
from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from .encode import FingerCode, encode_fingerprint
from .exceptions import RidgekitError
from .imgio import DatasetIndex
from .match import MatchParams, assign_pairs, count_matrix, match_fingercodes
from .minutiae import MinutiaList

log = logging.getLogger(__name__)

Key = tuple[str, int]


@dataclass
class PairList:
    kind: str
    pairs: list[tuple[Key, Key]]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass
class EvalReport:
    genuine_scores: np.ndarray
    impostor_scores: np.ndarray
    thresholds: np.ndarray
    fmr: np.ndarray
    fnmr: np.ndarray
    eer: float = math.nan
    eer_threshold: float = math.nan
    failures: list[Key] = field(default_factory=list)


def genuine_pairs(idx: DatasetIndex, ordered: bool = False) -> PairList:
    if idx.samples_per_subject < 2:
        raise ValueError("genuine pairs need at least 2 samples per subject")
    combine = permutations if ordered else combinations
    pairs = []
    for s in idx.subjects:
        samples = idx.samples(s)
        pairs.extend(((s, a), (s, b)) for a, b in combine(samples, 2))
    return PairList("genuine", pairs)


def impostor_pairs(idx: DatasetIndex) -> PairList:
    if len(idx.subjects) < 2:
        raise ValueError("impostor pairs need at least 2 subjects")
    firsts = [(s, idx.samples(s)[0]) for s in idx.subjects]
    return PairList("impostor", list(combinations(firsts, 2)))


def compute_rates(genuine, impostor) -> EvalReport:
    """FMR and FNMR at every distinct score plus 0 and 1."""
    g = np.asarray(genuine, dtype=np.float64)
    im = np.asarray(impostor, dtype=np.float64)
    if g.size == 0 or im.size == 0:
        raise ValueError("genuine and impostor score lists must be nonempty")
    thresholds = np.unique(np.concatenate([g, im, [0.0, 1.0]]))
    gs, ims = np.sort(g), np.sort(im)
    # FMR: impostors >= tau; FNMR: genuines < tau
    fmr = (ims.size - np.searchsorted(ims, thresholds, side="left")) / ims.size
    fnmr = np.searchsorted(gs, thresholds, side="left") / gs.size
    return EvalReport(g, im, thresholds, fmr, fnmr)


def compute_eer(report: EvalReport) -> tuple[float, float]:
    """Equal error rate and its threshold.

    An exact FMR == FNMR threshold wins (the lowest such); otherwise both
    curves are interpolated linearly between the two thresholds where
    FMR - FNMR changes sign.
    """
    tau, fmr, fnmr = report.thresholds, report.fmr, report.fnmr
    diff = fmr - fnmr
    exact = np.nonzero(diff == 0)[0]
    if exact.size:
        k = int(exact[0])
        eer, thr = float(fmr[k]), float(tau[k])
    elif not (diff < 0).any():
        # every score at the top threshold: no crossing exists
        k = int(np.argmin(np.abs(diff)))
        eer, thr = float(0.5 * (fmr[k] + fnmr[k])), float(tau[k])
    else:
        k = int(np.nonzero(diff < 0)[0][0]) - 1
        w = diff[k] / (diff[k] - diff[k + 1])
        thr = float(tau[k] + w * (tau[k + 1] - tau[k]))
        eer = float(fmr[k] + w * (fmr[k + 1] - fmr[k]))
    report.eer, report.eer_threshold = eer, thr
    return eer, thr


def evaluate_scores(genuine, impostor) -> EvalReport:
    report = compute_rates(genuine, impostor)
    compute_eer(report)
    return report


def format_report(report: EvalReport, header: str | None = None) -> str:
    lines = [header] if header else []
    lines.append("threshold,fmr,fnmr")
    lines.extend(f"{float(t)!r},{float(a)!r},{float(b)!r}" for t, a, b in zip(report.thresholds, report.fmr, report.fnmr))
    lines.append(f"eer,{float(report.eer)!r},threshold,{float(report.eer_threshold)!r}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, path: str | os.PathLike, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_report(report, header))


def _score(a: FingerCode | None, b: FingerCode | None, p: MatchParams) -> float:
    # a sample without a usable code can only be rejected
    if a is None or b is None:
        return 0.0
    return match_fingercodes(a, b, p).score


def run_protocol(
    idx: DatasetIndex, codes: dict[Key, FingerCode | None], p: MatchParams, ordered: bool = False
) -> EvalReport:
    """Score all genuine and impostor pairs and build the error-rate report."""
    gen = [_score(codes.get(a), codes.get(b), p) for a, b in genuine_pairs(idx, ordered)]
    imp = [_score(codes.get(a), codes.get(b), p) for a, b in impostor_pairs(idx)]
    report = evaluate_scores(gen, imp)
    report.failures = sorted(k for k in idx.keys() if codes.get(k) is None)
    return report


def encode_all(
    minutiae: dict[Key, MinutiaList | None], n: int, mode: str = "normalized"
) -> dict[Key, FingerCode | None]:
    out: dict[Key, FingerCode | None] = {}
    for key in sorted(minutiae):
        ml = minutiae[key]
        try:
            out[key] = None if ml is None else encode_fingerprint(ml, n, mode, key[0], str(key[1]))
        except RidgekitError as exc:
            log.warning("encode %s/%s failed: %s", key[0], key[1], exc)
            out[key] = None
    return out


@dataclass
class SweepResult:
    n_values: list[int]
    t_values: list[int]
    eer: dict[tuple[int, int], float]  # (n, t) -> EER as a rate in [0, 1]

    def cell(self, n: int, t: int) -> float | None:
        return self.eer.get((n, t))


def sweep_grid(
    idx: DatasetIndex,
    minutiae: dict[Key, MinutiaList | None],
    n_range,
    t_range,
    p: MatchParams | None = None,
    ordered: bool = False,
) -> SweepResult:
    """EER for every (n, t) with t <= n.

    Minutiae are encoded once per ``n``; the count matrices of every pair are
    computed once per ``n`` and reused for each ``t``.
    """
    p = p or MatchParams()
    n_values, t_values = sorted(set(n_range)), sorted(set(t_range))
    gen = genuine_pairs(idx, ordered).pairs
    pairs, n_gen = gen + impostor_pairs(idx).pairs, len(gen)
    eer: dict[tuple[int, int], float] = {}
    for n in n_values:
        codes = encode_all(minutiae, n, p.mode)
        mats = []
        for a, b in pairs:
            ca, cb = codes.get(a), codes.get(b)
            mats.append(None if ca is None or cb is None else (count_matrix(ca, cb, p), max(len(ca), len(cb))))
        for t in t_values:
            if t > n:
                continue
            scores = [0.0 if m is None else assign_pairs(m[0], t, p.rule) / m[1] for m in mats]
            try:
                eer[(n, t)] = evaluate_scores(scores[:n_gen], scores[n_gen:]).eer
            except ValueError as exc:
                log.warning("sweep cell n=%d t=%d failed: %s", n, t, exc)
    return SweepResult(n_values, t_values, eer)


def format_sweep(result: SweepResult, header: str | None = None) -> str:
    """Rows are matched-neighbour thresholds t, columns neighbour counts n; EER in %."""
    lines = [header] if header else []
    lines.append("t\\n," + ",".join(str(n) for n in result.n_values))
    for t in result.t_values:
        cells = []
        for n in result.n_values:
            v = result.cell(n, t)
            cells.append("-" if v is None else f"{100 * v:.2f}")
        lines.append(f"{t}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def write_sweep(result: SweepResult, path: str | os.PathLike, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_sweep(result, header))


def measure_throughput(pairs, p: MatchParams | None = None, warmup: bool = True) -> tuple[float, int]:
    """Single-threaded matches per second over ``pairs``; returns ``(rate, count)``."""
    p = p or MatchParams()
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no pairs to time")
    for a, b in pairs:
        # array packing is a once-per-code cost, not a per-match one
        a.packed, b.packed
    if warmup:
        match_fingercodes(pairs[0][0], pairs[0][1], p)
    start = time.perf_counter()
    for a, b in pairs:
        match_fingercodes(a, b, p)
    elapsed = time.perf_counter() - start
    return len(pairs) / elapsed, len(pairs)
