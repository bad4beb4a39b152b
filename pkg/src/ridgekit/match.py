"""Exhaustive neighbour-code matching between two finger-codes.

Every candidate minutia code is compared with every template code; inside a
pair of codes every neighbour feature is compared with every other, giving
``M * N * n^2`` feature comparisons per fingerprint pair.  Assignment is
greedy and one-to-one at both levels.

Two routes compute the same result: :func:`match_fingercodes` (compiled
with numba) and :func:`match_fingercodes_reference` (plain Python built on
:func:`neighbor_feature_match`).  The reference route is the oracle for the
compiled one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .encode import FingerCode, MinutiaCode, NeighborFeature
from .exceptions import IncompatibleCodesError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MatchParams:
    rho_tol: float = 8.0
    theta_tol: float = 0.2618
    phi_tol: float = 0.2618
    t: int = 5
    mode: str = "normalized"
    rule: str = "at_least"  # "at_least": count >= t; "exact": count == t

    def __post_init__(self):
        if not self.rho_tol > 0:
            raise ValueError("rho_tol must be positive")
        if not (0 < self.theta_tol < math.pi and 0 < self.phi_tol < math.pi):
            raise ValueError("angle tolerances must lie in (0, pi)")
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if self.rule not in ("at_least", "exact"):
            raise ValueError(f"unknown rule {self.rule!r}")


@dataclass(frozen=True)
class MatchResult:
    score: float
    matched_pairs: int
    M: int
    N: int


def circle_dist(a: float, b: float) -> float:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def neighbor_feature_match(a: NeighborFeature, b: NeighborFeature, p: MatchParams) -> bool:
    return (
        abs(a.rho - b.rho) <= p.rho_tol
        and circle_dist(a.theta, b.theta) <= p.theta_tol
        and circle_dist(a.phi, b.phi) <= p.phi_tol
    )


def minutia_code_match(c: MinutiaCode, t_code: MinutiaCode, p: MatchParams) -> int:
    """Greedy one-to-one neighbour pairing; returns the number of pairs.

    Matching feature pairs are taken by smallest rho difference, ties by
    candidate index then template index.
    """
    fa, fb = c.features, t_code.features
    pairs = []
    for ia, a in enumerate(fa):
        for ib, b in enumerate(fb):
            if neighbor_feature_match(a, b, p):
                pairs.append((abs(a.rho - b.rho), ia, ib))
    pairs.sort()
    used_a, used_b = set(), set()
    for _, ia, ib in pairs:
        if ia not in used_a and ib not in used_b:
            used_a.add(ia)
            used_b.add(ib)
    return len(used_a)


def _check(cand: FingerCode, tmpl: FingerCode) -> None:
    if cand.n != tmpl.n:
        raise IncompatibleCodesError(f"incompatible codes: n={cand.n} vs n={tmpl.n}")
    if cand.mode != tmpl.mode:
        raise IncompatibleCodesError(f"incompatible codes: mode {cand.mode} vs {tmpl.mode}")


def assign_pairs_reference(counts: np.ndarray, t: int, rule: str = "at_least") -> int:
    M, N = counts.shape
    eligible = [
        (-int(counts[i, j]), i, j)
        for i in range(M)
        for j in range(N)
        if (counts[i, j] >= t if rule == "at_least" else counts[i, j] == t)
    ]
    eligible.sort()
    rows, cols = set(), set()
    for _, i, j in eligible:
        if i not in rows and j not in cols:
            rows.add(i)
            cols.add(j)
    return len(rows)


def _result(matched: int, M: int, N: int) -> MatchResult:
    score = matched / max(M, N) if max(M, N) else 0.0
    return MatchResult(score, matched, M, N)


def match_fingercodes_reference(cand: FingerCode, tmpl: FingerCode, p: MatchParams) -> MatchResult:
    """Pure-Python exhaustive matcher; slow, used to check the compiled path."""
    _check(cand, tmpl)
    counts = np.array(
        [[minutia_code_match(c, tc, p) for tc in tmpl.codes] for c in cand.codes], dtype=np.int64
    ).reshape(len(cand), len(tmpl))
    return _result(assign_pairs_reference(counts, p.t, p.rule), len(cand), len(tmpl))


# --- compiled route ---------------------------------------------------------


@njit(cache=True)
def _circle_dist(a, b):
    d = abs(a - b) % 6.283185307179586
    return min(d, 6.283185307179586 - d)


@njit(cache=True)
def _count_matrix(rc, tc, pc, lc, rt, tt, pt, lt, rho_tol, theta_tol, phi_tol):
    M = rc.shape[0]
    N = rt.shape[0]
    out = np.zeros((M, N), dtype=np.int64)
    cap = max(rc.shape[1] * rt.shape[1], 1)
    dr = np.empty(cap)
    ia = np.empty(cap, dtype=np.int64)
    ib = np.empty(cap, dtype=np.int64)
    used_a = np.zeros(max(rc.shape[1], 1), dtype=np.bool_)
    used_b = np.zeros(max(rt.shape[1], 1), dtype=np.bool_)
    for i in range(M):
        for j in range(N):
            k = 0
            for a in range(lc[i]):
                for b in range(lt[j]):
                    d = abs(rc[i, a] - rt[j, b])
                    if (
                        d <= rho_tol
                        and _circle_dist(tc[i, a], tt[j, b]) <= theta_tol
                        and _circle_dist(pc[i, a], pt[j, b]) <= phi_tol
                    ):
                        dr[k] = d
                        ia[k] = a
                        ib[k] = b
                        k += 1
            if k <= 1:
                out[i, j] = k
                continue
            # stable sort keeps (candidate, template) enumeration order on ties
            order = np.argsort(dr[:k], kind="mergesort")
            used_a[:] = False
            used_b[:] = False
            cnt = 0
            for o in order:
                if not used_a[ia[o]] and not used_b[ib[o]]:
                    used_a[ia[o]] = True
                    used_b[ib[o]] = True
                    cnt += 1
            out[i, j] = cnt
    return out


@njit(cache=True)
def _assign(counts, t, exact):
    M, N = counts.shape
    row_used = np.zeros(M, dtype=np.bool_)
    col_used = np.zeros(N, dtype=np.bool_)
    top = 0
    for i in range(M):
        for j in range(N):
            if counts[i, j] > top:
                top = counts[i, j]
    lo = t
    if exact:
        top = min(top, t)
    matched = 0
    for c in range(top, lo - 1, -1):
        for i in range(M):
            if row_used[i]:
                continue
            for j in range(N):
                if not col_used[j] and counts[i, j] == c:
                    row_used[i] = True
                    col_used[j] = True
                    matched += 1
                    break
    return matched


def count_matrix(cand: FingerCode, tmpl: FingerCode, p: MatchParams) -> np.ndarray:
    """Matched-neighbour counts for every (candidate, template) minutia pair."""
    _check(cand, tmpl)
    rc, tc, pc, lc = cand.packed
    rt, tt, pt, lt = tmpl.packed
    return _count_matrix(rc, tc, pc, lc, rt, tt, pt, lt, float(p.rho_tol), float(p.theta_tol), float(p.phi_tol))


def assign_pairs(counts: np.ndarray, t: int, rule: str = "at_least") -> int:
    """Greedy one-to-one acceptance by descending count (ties: lower i, then j)."""
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    if counts.size == 0:
        return 0
    return int(_assign(counts, int(t), rule == "exact"))


def match_fingercodes(cand: FingerCode, tmpl: FingerCode, p: MatchParams | None = None) -> MatchResult:
    """Similarity of two finger-codes: accepted pairs / max(M, N)."""
    p = p or MatchParams()
    counts = count_matrix(cand, tmpl, p)
    return _result(assign_pairs(counts, p.t, p.rule), len(cand), len(tmpl))


def params_from_config(cfg) -> MatchParams:
    return MatchParams(cfg.rho_tol, cfg.theta_tol, cfg.phi_tol, cfg.t, cfg.mode, cfg.rule)


def identify(cand: FingerCode, gallery, p: MatchParams | None = None) -> list[tuple[str, MatchResult]]:
    """Match one candidate against ``(template_id, FingerCode)`` pairs; best first.

    Ties in score keep gallery order.
    """
    p = p or MatchParams()
    results = [(tid, match_fingercodes(cand, code, p)) for tid, code in gallery]
    return sorted(results, key=lambda r: -r[1].score)


def format_report_line(cand_id: str, tmpl_id: str, r: MatchResult) -> str:
    return f"{cand_id}\t{tmpl_id}\t{r.score:.6f}\t{r.matched_pairs}\t{r.M}\t{r.N}"
