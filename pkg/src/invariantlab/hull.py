"""Degree-bounded outer test for the polynomially convex hull.

A point z lies in the hull of K when |p(z)| <= sup_K |p| for every
polynomial p. Testing finitely many polynomials can only certify exclusion;
a "candidate" verdict is never a membership certificate.

The tested family has three parts:

* every monomial of total degree 1..d,
* for each level j = 1..d, ``num_random`` polynomials with unit-modulus
  random coefficients on all monomials of degree <= j, evaluated at
  ``z / scale`` (levels are seeded separately, so the family for degree d
  is contained in the family for d + 1),
* anchored products: for a probe z and its j nearest points a_1..a_j of K
  (j = 1..d), the polynomial prod_i <x - a_i, z - a_i> / |z - a_i|^2. These
  vanish at the anchors and equal 1 at z, which separates small or thin sets
  (finite sets in particular) that affine functions cannot.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .compact import CompactCloud, EmptyCloudError, as_real, forward_invariance_defect
from .escape import GridSpec
from .geometry import InvalidInputError
from .maps import evaluate

__all__ = [
    "DEGENERATE_SUP",
    "PolyBasisSpec",
    "HullTestReport",
    "HullScorer",
    "HullPreconditionError",
    "default_tau",
    "hull_membership_score",
    "outer_hull_cloud",
    "hull_invariance_check",
]

DEGENERATE_SUP = 1e-14
ANCHOR_SCORE_CAP = 1e14


class HullPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class PolyBasisSpec:
    max_degree: int = 6
    num_random: int = 64
    seed: int = 0
    scale: float = 1.0
    anchored: bool = True

    def __post_init__(self):
        if self.max_degree < 1 or self.num_random < 1:
            raise InvalidInputError("need max_degree >= 1 and num_random >= 1")
        if not self.scale > 0:
            raise InvalidInputError("scale must be positive")

    def describe(self) -> dict:
        return {
            "max_degree": self.max_degree,
            "num_random": self.num_random,
            "seed": self.seed,
            "scale": self.scale,
            "anchored": self.anchored,
        }


@dataclass(frozen=True)
class HullTestReport:
    point: np.ndarray
    score: float
    verdict: str
    worst: str
    tau: float
    skipped_degenerate: int

    def to_json(self) -> dict:
        return {
            "probe_point": [[float(z.real), float(z.imag)] for z in self.point],
            "score": self.score,
            "verdict": self.verdict,
            "worst_polynomial": self.worst,
            "tau": self.tau,
            "skipped_degenerate": self.skipped_degenerate,
            "semantics": "excluded is a certificate at cloud resolution; candidate is not",
        }


def _exponents(k: int, d: int, with_constant: bool):
    start = 0 if with_constant else 1
    out = []
    for deg in range(start, d + 1):
        for e in itertools.product(range(deg + 1), repeat=k):
            if sum(e) == deg:
                out.append(e)
    return out


def _monomials(P: np.ndarray, exps) -> np.ndarray:
    """Monomial values, shape (n, len(exps))."""
    k = P.shape[1]
    d = max(sum(e) for e in exps)
    pw = np.ones((P.shape[0], k, d + 1), np.complex128)
    for j in range(1, d + 1):
        pw[:, :, j] = pw[:, :, j - 1] * P
    M = np.ones((P.shape[0], len(exps)), np.complex128)
    for t, e in enumerate(exps):
        for i, n in enumerate(e):
            if n:
                M[:, t] *= pw[:, i, n]
    return M


def default_tau(K: CompactCloud, spec: PolyBasisSpec) -> float:
    scale = K.max_norm()
    return 2.0 * spec.max_degree * K.resolution / (scale if scale > 0 else 1.0)


class HullScorer:
    """Sup norms over K computed once, then shared by every probe."""

    def __init__(self, K: CompactCloud, spec: PolyBasisSpec):
        self.K = K
        self.spec = spec
        k = K.k
        d = spec.max_degree
        self.mono_exps = _exponents(k, d, with_constant=False)
        self.rand_exps = _exponents(k, d, with_constant=True)
        blocks = []
        for level in range(1, d + 1):
            n_terms = len(_exponents(k, level, with_constant=True))
            rng = np.random.default_rng([spec.seed, level])
            c = np.zeros((spec.num_random, len(self.rand_exps)), np.complex128)
            c[:, :n_terms] = np.exp(2j * np.pi * rng.random((spec.num_random, n_terms)))
            blocks.append(c)
        self.rand_coefs = np.vstack(blocks)
        mono_sup = np.abs(_monomials(K.points, self.mono_exps)).max(axis=0)
        rand_sup = np.abs(self._random_values(K.points)).max(axis=0)
        self.mono_ok = mono_sup >= DEGENERATE_SUP
        self.rand_ok = rand_sup >= DEGENERATE_SUP
        self.mono_sup = np.where(self.mono_ok, mono_sup, 1.0)
        self.rand_sup = np.where(self.rand_ok, rand_sup, 1.0)
        self.skipped = int((~self.mono_ok).sum() + (~self.rand_ok).sum())
        self.tree = cKDTree(K.real)

    def _random_values(self, P):
        return _monomials(P / self.spec.scale, self.rand_exps) @ self.rand_coefs.T

    def _anchored(self, P: np.ndarray):
        """Best anchored-product score per probe and the number of anchors used."""
        K = self.K.points
        n = P.shape[0]
        m = min(self.spec.max_degree, len(K))
        best = np.zeros(n)
        arg = np.zeros(n, np.int64)
        if m == 0:
            return best, arg
        # one extra neighbour so an anchor coinciding with the probe can be dropped
        q = min(m + 1, len(K))
        _, idx = self.tree.query(as_real(P), k=q)
        idx = np.asarray(idx).reshape(n, q)
        for s in range(n):
            z = P[s]
            anchors = [i for i in idx[s] if np.linalg.norm(K[i] - z) > 1e-12][:m]
            prod = np.ones(len(K), np.complex128)
            for j, i in enumerate(anchors):
                v = z - K[i]
                prod = prod * ((K - K[i]) @ np.conj(v)) / np.vdot(v, v).real
                sup = np.abs(prod).max()
                sc = ANCHOR_SCORE_CAP if sup < 1.0 / ANCHOR_SCORE_CAP else 1.0 / sup
                if sc > best[s]:
                    best[s] = sc
                    arg[s] = j + 1
        return best, arg

    def scores(self, P: np.ndarray):
        """Score and worst-polynomial label for each probe point."""
        P = np.atleast_2d(np.asarray(P, dtype=np.complex128))
        mono = np.abs(_monomials(P, self.mono_exps)) / self.mono_sup
        mono[:, ~self.mono_ok] = 0.0
        rand = np.abs(self._random_values(P)) / self.rand_sup
        rand[:, ~self.rand_ok] = 0.0
        im = mono.argmax(axis=1)
        ir = rand.argmax(axis=1)
        sm = mono[np.arange(len(P)), im]
        sr = rand[np.arange(len(P)), ir]
        score = np.maximum(sm, sr)
        labels = [f"monomial:{self.mono_exps[a]}" if x >= y else f"random:{b}" for a, b, x, y in zip(im, ir, sm, sr)]
        if self.spec.anchored:
            sa, ja = self._anchored(P)
            for s in np.flatnonzero(sa > score):
                labels[s] = f"anchored:{int(ja[s])}"
            score = np.maximum(score, sa)
        return score, labels


def hull_membership_score(z, K: CompactCloud, spec: PolyBasisSpec, tau: Optional[float] = None) -> HullTestReport:
    tau = default_tau(K, spec) if tau is None else float(tau)
    scorer = HullScorer(K, spec)
    z = np.asarray(z, dtype=np.complex128).ravel()
    s, lab = scorer.scores(z[None, :])
    score = float(s[0])
    verdict = "excluded" if score > 1.0 + tau else "candidate"
    return HullTestReport(z, score, verdict, lab[0], tau, scorer.skipped)


def outer_hull_cloud(
    K: CompactCloud, probe: GridSpec, spec: PolyBasisSpec, tau: Optional[float] = None
) -> CompactCloud:
    """Probe points not excluded by the tested family (an outer approximation)."""
    tau = default_tau(K, spec) if tau is None else float(tau)
    P = probe.points()
    scorer = HullScorer(K, spec)
    s, _ = scorer.scores(P)
    keep = s <= 1.0 + tau
    if not keep.any():
        raise EmptyCloudError("no probe point survived the hull test (tau inconsistent with the data)")
    res = max(probe.cell_diagonal, K.resolution)
    meta = {"one_sided": True, "tau": tau, "probes": int(P.shape[0]), "candidates": int(keep.sum())}
    return CompactCloud(P[keep], res, meta)


@dataclass(frozen=True)
class HullInvarianceReport:
    violations: int
    worst_score_jump: float
    candidates: int
    tau: float
    slack: float

    def to_json(self) -> dict:
        return {
            "violations": self.violations,
            "worst_score_jump": self.worst_score_jump,
            "candidates": self.candidates,
            "tau": self.tau,
            "slack": self.slack,
        }


def hull_invariance_check(
    f,
    C: CompactCloud,
    probe: GridSpec,
    spec: PolyBasisSpec,
    tau: Optional[float] = None,
    slack: Optional[float] = None,
) -> HullInvarianceReport:
    """Count candidate probes whose image is excluded by more than ``slack``."""
    defect = forward_invariance_defect(f, C)
    if not defect <= C.resolution:
        raise HullPreconditionError(f"C is not f-invariant at its resolution (defect {defect:.3e})")
    tau = default_tau(C, spec) if tau is None else float(tau)
    slack = 2.0 * tau if slack is None else float(slack)
    scorer = HullScorer(C, spec)
    P = probe.points()
    s0, _ = scorer.scores(P)
    cand = s0 <= 1.0 + tau
    if not cand.any():
        return HullInvarianceReport(0, 0.0, 0, tau, slack)
    Y = evaluate(f, P[cand])
    s1, _ = scorer.scores(Y)
    jump = s1 - np.maximum(s0[cand], 1.0)
    viol = (s1 > 1.0 + tau) & (jump > slack)
    return HullInvarianceReport(int(viol.sum()), float(max(jump.max(), 0.0)), int(cand.sum()), tau, slack)
