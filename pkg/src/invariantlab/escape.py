"""Escape-time computation of bounded-orbit sets for automorphism chains.

``K+`` is the set of points with bounded forward orbit, ``K-`` the same for
the inverse map, and ``K = K+ & K-``. "Bounded" is the finite proxy: the sup
norm stays at or below the escape radius for ``nmax`` steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from . import _kernels as K
from .compact import (
    CompactCloud,
    EmptyCloudError,
    as_real,
    boundary_distance,
    directed_distance,
    forward_invariance_defect,
)
from .geometry import InvalidInputError
from .maps import Affine, AutomorphismChain, Permutation, Shear, invert_chain

__all__ = [
    "DEFAULT_NMAX",
    "DEFAULT_ESCAPE_RADIUS",
    "UnsupportedMapError",
    "EscapeError",
    "ContractionCapError",
    "GridSpec",
    "EscapeField",
    "FiltrationCheck",
    "CoreReport",
    "filtration_radius",
    "filtration_oracle",
    "escape_field",
    "bounded_cloud",
    "k_compact",
    "attraction_decay",
    "find_strict_contraction_power",
    "core_intersection",
    "field_to_pgm",
]

DEFAULT_NMAX = 200
DEFAULT_ESCAPE_RADIUS = 1e3


class UnsupportedMapError(ValueError):
    pass


class EscapeError(RuntimeError):
    pass


class ContractionCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Sampling of a box in the 2k real coordinates (re_1, im_1, ..., re_k, im_k).

    ``mode="lattice"`` is a tensor grid with ``counts[i]`` points on axis i
    (axes listed in ``fixed`` are pinned to the given value). ``mode="sobol"``
    draws ``n_points`` scrambled Sobol points, seeded, in chunks.
    """

    box: tuple
    counts: tuple = ()
    fixed: tuple = ()
    mode: str = "lattice"
    n_points: int = 0
    seed: int = 0

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "fixed", tuple((int(a), float(v)) for a, v in self.fixed))
        if len(box) % 2 or not box:
            raise InvalidInputError("box needs an even number of real axes")
        if not all(math.isfinite(lo) and math.isfinite(hi) and lo < hi for lo, hi in box):
            raise InvalidInputError("box bounds must be finite with lo < hi")
        if self.mode == "lattice":
            counts = tuple(int(c) for c in self.counts)
            object.__setattr__(self, "counts", counts)
            if len(counts) != len(box):
                raise InvalidInputError("one count per real axis is required")
            if any(counts[i] < 2 for i in self.free_axes):
                raise InvalidInputError("free axes need at least two samples")
        elif self.mode == "sobol":
            if self.n_points < 1:
                raise InvalidInputError("sobol sampling needs n_points >= 1")
            if self.fixed:
                raise InvalidInputError("sobol sampling does not support fixed axes")
        else:
            raise InvalidInputError(f"unknown grid mode {self.mode!r}")

    @classmethod
    def cube(cls, k: int, half_width: float, count: int) -> "GridSpec":
        return cls(((-half_width, half_width),) * (2 * k), (count,) * (2 * k))

    @classmethod
    def real_slice(cls, half_width: float, count: int, k: int = 2) -> "GridSpec":
        """Grid over (Re z_1, Re z_2) with imaginary parts fixed at 0 (k=2)."""
        d = 2 * k
        counts = tuple(count if i % 2 == 0 else 1 for i in range(d))
        fixed = tuple((i, 0.0) for i in range(1, d, 2))
        return cls(((-half_width, half_width),) * d, counts, fixed)

    @classmethod
    def sobol(cls, k: int, half_width: float, n_points: int, seed: int = 0) -> "GridSpec":
        return cls(((-half_width, half_width),) * (2 * k), mode="sobol", n_points=n_points, seed=seed)

    @property
    def k(self) -> int:
        return len(self.box) // 2

    @property
    def free_axes(self) -> list[int]:
        fixed = {a for a, _ in self.fixed}
        return [i for i in range(len(self.box)) if i not in fixed]

    @property
    def shape(self) -> tuple:
        if self.mode != "lattice":
            return (self.n_points,)
        return tuple(self.counts[i] for i in self.free_axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def cell_steps(self) -> np.ndarray:
        d = len(self.box)
        if self.mode == "lattice":
            return np.array([(self.box[i][1] - self.box[i][0]) / (self.counts[i] - 1) for i in self.free_axes])
        vol = np.prod([hi - lo for lo, hi in self.box])
        return np.full(d, (vol / self.n_points) ** (1.0 / d))

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.cell_steps()))

    def chunks(self, chunk: int = 1 << 20) -> Iterator[np.ndarray]:
        """Complex sample points in a fixed order, ``chunk`` at a time."""
        d = len(self.box)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        if self.mode == "sobol":
            eng = qmc.Sobol(d, scramble=True, seed=self.seed)
            left = self.n_points
            while left > 0:
                m = min(chunk, left)
                U = eng.random(m)
                X = lo + U * (hi - lo)
                left -= m
                yield X.view(np.complex128).reshape(m, d // 2)
            return
        axes = {i: np.linspace(lo[i], hi[i], self.counts[i]) for i in self.free_axes}
        fixed = dict(self.fixed)
        free = self.free_axes
        shape = self.shape
        total = self.size
        for start in range(0, total, chunk):
            idx = np.arange(start, min(total, start + chunk))
            multi = np.unravel_index(idx, shape)
            X = np.empty((idx.size, d))
            for j, ax in enumerate(free):
                X[:, ax] = axes[ax][multi[j]]
            for ax, v in fixed.items():
                X[:, ax] = v
            yield X.view(np.complex128).reshape(idx.size, d // 2)

    def points(self) -> np.ndarray:
        return np.vstack(list(self.chunks()))

    def describe(self) -> dict:
        out = {"box": [list(b) for b in self.box], "mode": self.mode}
        if self.mode == "lattice":
            out.update(counts=list(self.counts), fixed=[list(f) for f in self.fixed])
        else:
            out.update(n_points=self.n_points, seed=self.seed)
        return out


@dataclass(frozen=True, eq=False)
class EscapeField:
    grid: GridSpec
    escape_steps: np.ndarray  # -1 where bounded up to nmax
    nmax: int
    escape_radius: float
    direction: str = "forward"

    @property
    def bounded_mask(self) -> np.ndarray:
        return self.escape_steps < 0

    def describe(self) -> dict:
        return {
            "grid": self.grid.describe(),
            "nmax": self.nmax,
            "escape_radius": self.escape_radius,
            "direction": self.direction,
            "bounded": int(self.bounded_mask.sum()),
            "samples": int(self.escape_steps.size),
        }


# ---------------------------------------------------------------------------
# filtration


def _henon_form(f: AutomorphismChain):
    """(mu, a) when f is z -> H(mu z) with H(z, w) = (a z^2 + w, z) written as a chain."""
    if not isinstance(f, AutomorphismChain) or f.k != 2 or len(f.factors) < 2:
        raise UnsupportedMapError("filtration radius is only defined for Henon-type chains")
    *pre, shear, swap = f.factors
    mu = 1.0
    for fac in pre:
        c = fac.is_scalar() if isinstance(fac, Affine) else None
        if c is None or abs(c.imag) > 0 or c.real <= 0:
            raise UnsupportedMapError("only positive homotheties may precede the Henon factors")
        mu *= c.real
    if not (isinstance(swap, Permutation) and swap.perm == (1, 0)):
        raise UnsupportedMapError("Henon chains end with the coordinate swap")
    if not (isinstance(shear, Shear) and shear.axis == 1 and list(shear.poly.terms) == [(2, 0)]):
        raise UnsupportedMapError("Henon chains use a shear w -> w + a z^2")
    a = shear.poly.terms[(2, 0)]
    return mu, a


@dataclass(frozen=True)
class FiltrationCheck:
    radius: float
    passed: bool
    n_points: int
    failures: int
    worst_point: Optional[np.ndarray]


def filtration_oracle(
    f: AutomorphismChain, R: float, n_points: int = 10_000, steps: int = 50, seed: int = 0, target: float = 1e3
) -> FiltrationCheck:
    """Monotone-escape check on random points with |z| >= max(|w|, R).

    Each orbit must have strictly increasing sup norm until it exceeds ``target``,
    which must happen within ``steps`` iterations.
    """
    rng = np.random.default_rng(seed)
    rz = R * (1.0 + 3.0 * rng.random(n_points))
    rw = rz * np.sqrt(rng.random(n_points))
    z = rz * np.exp(2j * np.pi * rng.random(n_points))
    w = rw * np.exp(2j * np.pi * rng.random(n_points))
    P = np.stack([z, w], axis=1)
    prog = f.program.args
    failures = 0
    worst = None
    for i in range(n_points):
        pts, _ = K.orbit(P[i], *prog, steps, target)
        s = np.abs(pts).max(axis=1)
        ok = s[-1] > target and bool(np.all(np.diff(s) > 0))
        if not ok:
            failures += 1
            if worst is None:
                worst = P[i].copy()
    return FiltrationCheck(float(R), failures == 0, n_points, failures, worst)


def filtration_radius(f: AutomorphismChain) -> float:
    """R such that |z| >= max(|w|, R) forces monotone escape.

    For z -> H(mu z) with H(z, w) = (a z^2 + w, z) the first coordinate of the
    image is at least |z| (|a| mu^2 |z| - mu), which exceeds |z| and dominates
    the second coordinate mu |z| once |z| >= (1 + mu) / (|a| mu^2).
    """
    mu, a = _henon_form(f)
    return (1.0 + mu) / (abs(a) * mu * mu)


# ---------------------------------------------------------------------------
# escape fields


def _direction_map(f, direction: str) -> AutomorphismChain:
    if direction == "forward":
        return f
    if direction == "backward":
        if not isinstance(f, AutomorphismChain):
            raise UnsupportedMapError("backward escape needs an invertible automorphism chain")
        return invert_chain(f)
    raise InvalidInputError(f"direction must be forward or backward, got {direction!r}")


def escape_field(
    f,
    grid: GridSpec,
    R: float,
    nmax: int = DEFAULT_NMAX,
    direction: str = "forward",
    escape_radius: float = DEFAULT_ESCAPE_RADIUS,
) -> EscapeField:
    """Per-sample first step with sup norm above max(R, escape_radius); -1 if none."""
    if not R > 0 or nmax < 0:
        raise InvalidInputError("need R > 0 and nmax >= 0")
    g = _direction_map(f, direction)
    radius = max(float(R), float(escape_radius))
    prog = g.program.args
    steps = np.concatenate(
        [K.escape_steps(np.ascontiguousarray(P), *prog, int(nmax), radius) for P in grid.chunks()]
    )
    return EscapeField(grid, steps.astype(np.int32), int(nmax), radius, direction)


def bounded_cloud(field: EscapeField) -> CompactCloud:
    mask = field.bounded_mask
    if not mask.any():
        raise EmptyCloudError("every sample escaped")
    pts = np.vstack(list(field.grid.chunks()))[mask]
    return CompactCloud(pts, field.grid.cell_diagonal, {"direction": field.direction, "nmax": field.nmax})


def k_compact(
    f: AutomorphismChain,
    grid: GridSpec,
    R: float,
    nmax: int = DEFAULT_NMAX,
    escape_radius: float = DEFAULT_ESCAPE_RADIUS,
    chunk: int = 1 << 20,
) -> CompactCloud:
    """Samples bounded under both f and its inverse (chunked, constant memory)."""
    if not isinstance(f, AutomorphismChain):
        raise UnsupportedMapError("K needs an invertible automorphism chain")
    radius = max(float(R), float(escape_radius))
    fwd = f.program.args
    bwd = invert_chain(f).program.args
    keep = []
    total = 0
    for P in grid.chunks(chunk):
        P = np.ascontiguousarray(P)
        total += P.shape[0]
        a = K.escape_steps(P, *fwd, int(nmax), radius) < 0
        Q = np.ascontiguousarray(P[a])
        if Q.shape[0]:
            b = K.escape_steps(Q, *bwd, int(nmax), radius) < 0
            keep.append(Q[b])
    pts = np.vstack(keep) if keep else np.zeros((0, f.k), np.complex128)
    if pts.shape[0] == 0:
        raise EmptyCloudError("no sample stayed bounded in both directions")
    meta = {"samples": total, "nmax": int(nmax), "escape_radius": radius}
    return CompactCloud(pts, grid.cell_diagonal, meta)


# ---------------------------------------------------------------------------
# dynamics of clouds


def _iterate_checked(f, P: np.ndarray, n: int, radius: float) -> np.ndarray:
    Q, steps = K.iterate_batch(np.ascontiguousarray(P), *f.program.args, int(n), float(radius))
    bad = np.flatnonzero(steps >= 0)
    if bad.size:
        p = P[bad[0]]
        raise EscapeError(f"orbit of {p.tolist()} escaped at step {int(steps[bad[0]])}")
    return Q


def attraction_decay(
    f, X: CompactCloud, K_cloud: CompactCloud, n: int, escape_radius: float = DEFAULT_ESCAPE_RADIUS
) -> list[float]:
    """Directed distance from f^j(X) to K for j = 0..n."""
    if n < 0:
        raise InvalidInputError("n must be nonnegative")
    tree = cKDTree(K_cloud.real)
    P = X.points
    out = []
    for j in range(n + 1):
        if j:
            P = _iterate_checked(f, P, 1, escape_radius)
        out.append(float(tree.query(as_real(P))[0].max()))
    return out


def find_strict_contraction_power(
    f,
    X: CompactCloud,
    U,
    K_cloud: CompactCloud,
    cap: int = 200,
    escape_radius: float = DEFAULT_ESCAPE_RADIUS,
) -> int:
    """Smallest n with f^n(X) -> X within X.resolution and f^n(X) -> K below half of dist(K, boundary U)."""
    defect = forward_invariance_defect(f, X)
    if not defect <= X.resolution:
        raise InvalidInputError(f"X is not forward invariant at its resolution (defect {defect:.3e})")
    margin = 0.5 * boundary_distance(U, K_cloud)
    tx = cKDTree(X.real)
    tk = cKDTree(K_cloud.real)
    P = X.points
    for n in range(1, cap + 1):
        P = _iterate_checked(f, P, 1, escape_radius)
        R = as_real(P)
        if tx.query(R)[0].max() <= X.resolution and tk.query(R)[0].max() < margin:
            return n
    raise ContractionCapError(f"no strict contraction power up to the cap {cap}")


@dataclass(frozen=True, eq=False)
class CoreReport:
    cloud: CompactCloud
    forward_defect: float
    backward_defect: Optional[float]
    kept: int
    total: int


def core_intersection(f, K_cloud: CompactCloud, n: int, escape_radius: float = DEFAULT_ESCAPE_RADIUS) -> CoreReport:
    """Points of K within K.resolution of every image f^j(K), j = 1..n."""
    defect = forward_invariance_defect(f, K_cloud)
    if not defect <= K_cloud.resolution:
        raise InvalidInputError(f"K is not forward invariant at its resolution (defect {defect:.3e})")
    res = K_cloud.resolution
    keep = np.ones(len(K_cloud), bool)
    P = K_cloud.points
    prog = f.program.args
    for _ in range(n):
        P, steps = K.iterate_batch(np.ascontiguousarray(P), *prog, 1, float(escape_radius))
        P = P[steps < 0]
        if P.shape[0] == 0:
            break
        d = cKDTree(as_real(P)).query(K_cloud.real)[0]
        keep &= d <= res
    if P.shape[0] == 0 or not keep.any():
        raise EmptyCloudError("the invariant core is empty at cloud resolution")
    X = CompactCloud(K_cloud.points[keep], res, {"iterations": int(n)})
    fd = forward_invariance_defect(f, X)
    bd = forward_invariance_defect(invert_chain(f), X) if isinstance(f, AutomorphismChain) else None
    return CoreReport(X, fd, bd, int(keep.sum()), len(K_cloud))


# ---------------------------------------------------------------------------
# images


def field_to_pgm(field: EscapeField) -> bytes:
    """Binary PGM of a 2D slice: bounded samples black, faster escape brighter."""
    shape = field.grid.shape
    if len(shape) != 2:
        raise InvalidInputError("PGM output needs a grid with exactly two free axes")
    s = field.escape_steps.reshape(shape).astype(np.float64)
    nmax = max(field.nmax, 1)
    gray = np.where(s < 0, 0, np.clip(np.rint(255 - 254 * (s - 1) / nmax), 1, 255))
    # rows run top to bottom along decreasing second axis
    img = gray.T[::-1].astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    return header + img.tobytes()
