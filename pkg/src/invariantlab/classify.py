"""Recurrence detection and the rank trichotomy for limit maps of iterates.

For a recurrent point p0 with return times n_i, the limit map h of the gaps
f^(n_{i+1} - n_i) is surrogated by the single gap m with the smallest
fixed-point residual |f^m(p0) - p0|. The rank of its Jacobian decides:

* rank 0      -> attracting periodic orbit
* rank k      -> Siegel (identity-like on the stencil, or maximal rank with a note)
* 0 < r < k   -> intermediate rank
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .compact import CompactCloud
from .escape import DEFAULT_ESCAPE_RADIUS, EscapeError
from .geometry import numerical_rank, singular_values

__all__ = [
    "DEFAULT_MIN_GAP",
    "DEFAULT_RANK_TOL",
    "RecurrenceRecord",
    "RecurrenceScan",
    "LimitMapEstimate",
    "TrichotomyResult",
    "detect_recurrent_points",
    "extract_limit_map",
    "classify_trichotomy",
    "classify_point",
]

DEFAULT_MIN_GAP = 20
DEFAULT_RANK_TOL = 1e-4
IDENTITY_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class RecurrenceRecord:
    point: np.ndarray
    return_times: np.ndarray
    delta: float

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.return_times)


@dataclass(frozen=True, eq=False)
class RecurrenceScan:
    records: list
    escaped: int
    scanned: int


def detect_recurrent_points(
    f, W: CompactCloud, nmax: int, delta: float, escape_radius: float = DEFAULT_ESCAPE_RADIUS
) -> RecurrenceScan:
    """All return times n <= nmax with |f^n(p) - p| <= delta; samples with >= 2 returns qualify."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    P = np.ascontiguousarray(W.points)
    prog = f.program.args
    counts = K.return_counts(P, *prog, int(nmax), float(delta), float(escape_radius))
    escaped = int((counts < 0).sum())
    c = np.where(counts >= 2, counts, 0)
    offsets = np.concatenate([[0], np.cumsum(c)]).astype(np.int64)
    flat = K.return_times(P, *prog, int(nmax), float(delta), offsets)
    recs = [
        RecurrenceRecord(P[s].copy(), flat[offsets[s] : offsets[s + 1]].copy(), float(delta))
        for s in np.flatnonzero(c)
    ]
    return RecurrenceScan(recs, escaped, int(P.shape[0]))


@dataclass(frozen=True, eq=False)
class LimitMapEstimate:
    base_point: np.ndarray
    gap: int
    stencil: np.ndarray
    stencil_values: np.ndarray
    jacobian: np.ndarray
    residual: float
    residual_bound: float
    delta: float
    period_hint: int
    stencil_radius: float

    @property
    def inconclusive(self) -> bool:
        return not self.residual <= self.residual_bound

    @property
    def identity_deviation(self) -> float:
        return float(np.linalg.norm(self.stencil_values - self.stencil, axis=1).max())


def _candidate_gaps(times: np.ndarray, min_gap: int) -> np.ndarray:
    """Return times and all pairwise differences of return times, each >= min_gap."""
    n = int(times.max()) + 1
    ind = np.zeros(n)
    ind[0] = 1.0
    ind[times] = 1.0
    size = 1 << int(np.ceil(np.log2(2 * n)))
    F = np.fft.rfft(ind, size)
    ac = np.fft.irfft(F * np.conj(F), size)[:n]
    gaps = np.flatnonzero(ac > 0.5)
    return gaps[gaps >= min_gap]


def _power(f, P: np.ndarray, m: int, escape_radius: float) -> np.ndarray:
    Q, steps = K.iterate_batch(np.ascontiguousarray(P), *f.program.args, int(m), float(escape_radius))
    bad = np.flatnonzero(steps >= 0)
    if bad.size:
        raise EscapeError(f"stencil point {P[bad[0]].tolist()} escaped at step {int(steps[bad[0]])}")
    return Q


def extract_limit_map(
    f,
    rec: RecurrenceRecord,
    stencil_radius: float,
    min_gap: int = DEFAULT_MIN_GAP,
    residual_bound: Optional[float] = None,
    escape_radius: float = DEFAULT_ESCAPE_RADIUS,
) -> LimitMapEstimate:
    if len(rec.return_times) < 2:
        raise ValueError("need at least two return times")
    if not stencil_radius > 0:
        raise ValueError("stencil radius must be positive")
    p0 = np.asarray(rec.point, dtype=np.complex128)
    k = p0.shape[0]
    gaps = _candidate_gaps(rec.return_times, min_gap)
    if gaps.size == 0:
        gaps = np.array([int(rec.return_times.max())])
    mmax = int(gaps.max())
    pts, esc = K.orbit(p0, *f.program.args, mmax, float(escape_radius))
    if esc >= 0:
        raise EscapeError(f"orbit of {p0.tolist()} escaped at step {esc}")
    res = np.linalg.norm(pts[gaps] - p0, axis=1)
    # smallest residual; among ties the longest gap
    order = np.lexsort((-gaps, res))
    m = int(gaps[order[0]])
    residual = float(res[order[0]])
    E = np.eye(k, dtype=np.complex128)
    stencil = np.vstack([p0 + s * stencil_radius * E for s in (1, -1, 1j, -1j)])
    values = _power(f, stencil, m, escape_radius)
    h = stencil_radius / 4.0
    probes = np.vstack([p0 + h * E, p0 - h * E])
    pv = _power(f, probes, m, escape_radius)
    J = ((pv[:k] - pv[k:]) / (2 * h)).T
    bound = 2.0 * rec.delta if residual_bound is None else float(residual_bound)
    return LimitMapEstimate(
        p0, m, stencil, values, J, residual, bound, rec.delta, int(rec.return_times.min()), float(stencil_radius)
    )


@dataclass(frozen=True)
class TrichotomyResult:
    verdict: str
    rank: Optional[int]
    period: Optional[int]
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "rank": self.rank, "period": self.period, "evidence": self.evidence}


def classify_trichotomy(
    est: LimitMapEstimate, k: int, rank_tol: float = DEFAULT_RANK_TOL, identity_factor: float = IDENTITY_FACTOR
) -> TrichotomyResult:
    sv = singular_values(est.jacobian)
    evidence = {
        "gap": est.gap,
        "residual": est.residual,
        "residual_bound": est.residual_bound,
        "singular_values": [float(s) for s in sv],
        "rank_tol": rank_tol,
        "identity_deviation": est.identity_deviation,
        "identity_tol": identity_factor * est.delta,
        "stencil_radius": est.stencil_radius,
    }
    if est.inconclusive or not np.all(np.isfinite(est.jacobian)):
        evidence["note"] = "fixed-point residual above bound"
        return TrichotomyResult("Inconclusive", None, None, evidence)
    r = numerical_rank(est.jacobian, rank_tol)
    if r == 0:
        return TrichotomyResult("AttractingPeriodic", 0, est.period_hint, evidence)
    if r == k:
        if est.identity_deviation > identity_factor * est.delta:
            evidence["note"] = "maximal rank but the limit map is not close to the identity on the stencil"
        return TrichotomyResult("Siegel", r, None, evidence)
    if 0 < r < k:
        return TrichotomyResult("IntermediateRank", r, None, evidence)
    return TrichotomyResult("Inconclusive", r, None, evidence)


def classify_point(
    f,
    p,
    nmax: int,
    delta: float,
    stencil_radius: float,
    min_gap: int = DEFAULT_MIN_GAP,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> TrichotomyResult:
    """Convenience: detect returns of one point, extract h and classify."""
    W = CompactCloud(np.atleast_2d(np.asarray(p, dtype=np.complex128)), 1.0)
    scan = detect_recurrent_points(f, W, nmax, delta)
    if not scan.records:
        return TrichotomyResult("Inconclusive", None, None, {"note": "no recurrence detected"})
    est = extract_limit_map(f, scan.records[0], stencil_radius, min_gap)
    return classify_trichotomy(est, f.k, rank_tol)
