"""Finite point clouds standing in for compact subsets of C^k.

A :class:`CompactCloud` is an epsilon-net: every point of the intended compact
lies within ``resolution`` of some cloud point. All set-level claims made from
clouds (inclusion, invariance, touching, connectivity) hold at that resolution.
"""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels as K
from .geometry import DimensionError, InvalidInputError
from .maps import evaluate, jacobian_batch

__all__ = [
    "EmptyCloudError",
    "SamplingBudgetError",
    "CompactCloud",
    "Ball",
    "Polydisc",
    "Scaled",
    "DomainShape",
    "HausdorffReport",
    "InclusionReport",
    "Membership",
    "as_real",
    "from_real",
    "directed_distance",
    "hausdorff_distance",
    "membership",
    "cloud_inside",
    "touches_boundary",
    "boundary_distance",
    "component_count",
    "is_eps_connected",
    "image_cloud",
    "forward_invariance_defect",
    "sample_domain",
    "union",
    "voxel_thin",
    "write_cloud_csv",
    "read_cloud_csv",
    "DEFAULT_POINT_BUDGET",
]

DEFAULT_POINT_BUDGET = 4_000_000


class EmptyCloudError(ValueError):
    pass


class SamplingBudgetError(ValueError):
    pass


def as_real(P: np.ndarray) -> np.ndarray:
    """(n, k) complex -> (n, 2k) real laid out as re_1, im_1, ..., re_k, im_k."""
    P = np.ascontiguousarray(P, dtype=np.complex128)
    return P.view(np.float64).reshape(P.shape[0], 2 * P.shape[1])


def from_real(X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.shape[1] % 2:
        raise DimensionError("real layout needs an even number of columns")
    return X.view(np.complex128).reshape(X.shape[0], X.shape[1] // 2)


@dataclass(frozen=True, eq=False)
class CompactCloud:
    points: np.ndarray
    resolution: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.array(self.points, dtype=np.complex128)
        if P.ndim == 1:
            P = P[None, :]
        if P.ndim != 2 or P.shape[0] == 0:
            raise EmptyCloudError("a compact cloud needs at least one point")
        if not np.all(np.isfinite(P)):
            raise InvalidInputError("cloud points must be finite")
        if not self.resolution > 0 or not math.isfinite(self.resolution):
            raise InvalidInputError(f"resolution must be positive, got {self.resolution}")
        P.setflags(write=False)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def k(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def real(self) -> np.ndarray:
        return as_real(self.points)

    def with_resolution(self, resolution: float) -> "CompactCloud":
        return CompactCloud(self.points, resolution, dict(self.meta))

    def contains_point(self, p, tol: float = 0.0) -> bool:
        d = np.linalg.norm(self.points - np.asarray(p, dtype=np.complex128), axis=1)
        return bool(d.min() <= tol)

    def max_norm(self) -> float:
        return float(np.linalg.norm(self.points, axis=1).max())


# ---------------------------------------------------------------------------
# domains


class _Domain:
    k: int

    def canonical(self):
        return self

    def signed_distance(self, P) -> np.ndarray:
        raise NotImplementedError

    def gauge(self, P) -> np.ndarray:
        raise NotImplementedError

    def kernel_params(self):
        c = self.canonical()
        return c._kernel_params()


@dataclass(frozen=True, eq=False)
class Ball(_Domain):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=np.complex128).ravel()
        if not self.radius > 0:
            raise InvalidInputError("ball radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def origin(cls, radius: float, k: int = 2) -> "Ball":
        return cls(np.zeros(k), radius)

    @property
    def k(self) -> int:
        return self.center.shape[0]

    @property
    def outer_radius(self) -> float:
        return float(np.linalg.norm(self.center)) + self.radius

    @property
    def diameter(self) -> float:
        return 2 * self.radius

    def signed_distance(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=np.complex128))
        return np.linalg.norm(P - self.center, axis=1) - self.radius

    def gauge(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=np.complex128))
        return np.linalg.norm(P - self.center, axis=1) / self.radius

    def project(self, P):
        """Nearest point of the closed ball."""
        D = P - self.center
        n = np.linalg.norm(D, axis=1)
        s = np.where(n > self.radius, self.radius / np.maximum(n, 1e-300), 1.0)
        return self.center + D * s[:, None]

    def _kernel_params(self):
        return K.GAUGE_BALL, self.center, np.array([self.radius])

    def describe(self) -> dict:
        return {"kind": "ball", "center": _cjson(self.center), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Polydisc(_Domain):
    center: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        c = np.array(self.center, dtype=np.complex128).ravel()
        r = np.array(self.radii, dtype=np.float64).ravel()
        if r.shape == (1,):
            r = np.full(c.shape[0], r[0])
        if r.shape != c.shape or not np.all(r > 0):
            raise InvalidInputError("polydisc radii must be positive, one per coordinate")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radii", r)

    @property
    def k(self) -> int:
        return self.center.shape[0]

    @property
    def outer_radius(self) -> float:
        return float(np.linalg.norm(self.center) + np.linalg.norm(self.radii))

    @property
    def diameter(self) -> float:
        return 2 * float(np.linalg.norm(self.radii))

    def signed_distance(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=np.complex128))
        return (np.abs(P - self.center) - self.radii).max(axis=1)

    def gauge(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=np.complex128))
        return (np.abs(P - self.center) / self.radii).max(axis=1)

    def project(self, P):
        D = P - self.center
        a = np.abs(D)
        s = np.where(a > self.radii, self.radii / np.maximum(a, 1e-300), 1.0)
        return self.center + D * s

    def _kernel_params(self):
        return K.GAUGE_POLYDISC, self.center, self.radii.copy()

    def describe(self) -> dict:
        return {"kind": "polydisc", "center": _cjson(self.center), "radii": self.radii.tolist()}


@dataclass(frozen=True, eq=False)
class Scaled(_Domain):
    """Homothetic copy ``factor * base`` (scaling about the origin)."""

    base: "DomainShape"
    factor: float

    def __post_init__(self):
        if not self.factor > 0:
            raise InvalidInputError("scale factor must be positive")
        object.__setattr__(self, "factor", float(self.factor))

    @property
    def k(self) -> int:
        return self.base.k

    def canonical(self):
        b = self.base.canonical()
        t = self.factor
        if isinstance(b, Ball):
            return Ball(t * b.center, t * b.radius)
        return Polydisc(t * b.center, t * b.radii)

    @property
    def center(self):
        return self.canonical().center

    @property
    def outer_radius(self) -> float:
        return self.factor * self.base.outer_radius

    @property
    def diameter(self) -> float:
        return self.factor * self.base.diameter

    def signed_distance(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=np.complex128))
        return self.factor * self.base.signed_distance(P / self.factor)

    def gauge(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=np.complex128))
        return self.base.gauge(P / self.factor)

    def project(self, P):
        return self.factor * self.base.project(P / self.factor)

    def describe(self) -> dict:
        return {"kind": "scaled", "factor": self.factor, "base": self.base.describe()}


DomainShape = Union[Ball, Polydisc, Scaled]


def _cjson(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v).ravel()]


class Membership(str, enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary_within"
    OUTSIDE = "outside"


def membership(U: DomainShape, p, tau: float) -> Membership:
    if tau < 0:
        raise ValueError("tolerance must be nonnegative")
    sd = float(U.signed_distance(p)[0])
    if abs(sd) <= tau:
        return Membership.BOUNDARY
    return Membership.INSIDE if sd < 0 else Membership.OUTSIDE


@dataclass(frozen=True)
class InclusionReport:
    inside: bool
    witness: Optional[np.ndarray]
    max_signed_distance: float

    def __bool__(self) -> bool:
        return self.inside


def cloud_inside(U: DomainShape, A: CompactCloud, tau: float) -> InclusionReport:
    if tau < 0:
        raise ValueError("tolerance must be nonnegative")
    sd = U.signed_distance(A.points)
    bad = np.flatnonzero(sd > tau)
    witness = A.points[bad[0]].copy() if bad.size else None
    return InclusionReport(bad.size == 0, witness, float(sd.max()))


def touches_boundary(U: DomainShape, A: CompactCloud, tau: float) -> bool:
    if not tau > 0:
        raise ValueError("tolerance must be positive")
    return bool(np.any(np.abs(U.signed_distance(A.points)) <= tau))


def boundary_distance(U: DomainShape, A: CompactCloud) -> float:
    """Smallest distance from the cloud to the boundary of U (points assumed inside)."""
    return float(np.abs(U.signed_distance(A.points)).min())


# ---------------------------------------------------------------------------
# metric


@dataclass(frozen=True)
class HausdorffReport:
    distance: float
    directed_ab: float
    directed_ba: float
    witness_ab: np.ndarray
    witness_ba: np.ndarray


def _directed(A: np.ndarray, B: np.ndarray, tree: Optional[cKDTree] = None):
    tree = tree if tree is not None else cKDTree(as_real(B))
    d, _ = tree.query(as_real(A), k=1)
    i = int(np.argmax(d))
    return float(d[i]), i


def directed_distance(A, B) -> float:
    """sup over a in A of dist(a, B)."""
    a = A.points if isinstance(A, CompactCloud) else np.atleast_2d(A)
    b = B.points if isinstance(B, CompactCloud) else np.atleast_2d(B)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptyCloudError("directed distance of an empty cloud")
    return _directed(a, b)[0]


def hausdorff_distance(A: CompactCloud, B: CompactCloud) -> HausdorffReport:
    if A.k != B.k:
        raise DimensionError("clouds live in different dimensions")
    dab, i = _directed(A.points, B.points)
    dba, j = _directed(B.points, A.points)
    return HausdorffReport(max(dab, dba), dab, dba, A.points[i].copy(), B.points[j].copy())


# ---------------------------------------------------------------------------
# connectivity


def component_count(A: CompactCloud, eps: float) -> int:
    """Number of components of the graph joining points at distance <= eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    X = A.real
    n, d = X.shape
    if n == 1:
        return 1
    h = eps / math.sqrt(d)  # cell diagonal equals eps, so same-cell points are joined
    lo = X.min(axis=0)
    C = np.floor((X - lo) / h).astype(np.int64)
    dims = C.max(axis=0) + 1
    if float(np.prod(dims.astype(np.float64))) > 2.0**62:
        raise SamplingBudgetError("cloud extent too large for the cell index at this eps")
    strides = np.ones(d, np.int64)
    for ax in range(d - 2, -1, -1):
        strides[ax] = strides[ax + 1] * dims[ax + 1]
    keys = C @ strides
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    Xs = np.ascontiguousarray(X[order])
    cell_keys, cell_start = np.unique(keys_sorted, return_index=True)
    cell_start = np.append(cell_start, n).astype(np.int64)
    cell_of = np.searchsorted(cell_keys, keys_sorted)
    reach = int(math.ceil(math.sqrt(d)))
    grids = np.meshgrid(*[np.arange(-reach, reach + 1)] * d, indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    gap = np.maximum(np.abs(offs) - 1, 0)
    offs = offs[(h * h * (gap**2).sum(axis=1) <= eps * eps) & np.any(offs != 0, axis=1)]
    table = np.hstack([(offs @ strides)[:, None], offs]).astype(np.int64)
    return int(K.cell_components(Xs, cell_of, cell_start, cell_keys, table, dims.astype(np.int64), float(eps)))


def is_eps_connected(A: CompactCloud, eps: float) -> bool:
    return component_count(A, eps) == 1


# ---------------------------------------------------------------------------
# images and invariance


def image_cloud(f, A: CompactCloud) -> CompactCloud:
    """Pointwise image; non-finite images are dropped and counted in ``meta``."""
    if f.k != A.k:
        raise DimensionError("map and cloud dimensions differ")
    with np.errstate(all="ignore"):
        Y = evaluate(f, A.points)
        J = jacobian_batch(f, A.points)
        ok = np.all(np.isfinite(Y), axis=1)
        lip = np.linalg.norm(J[ok], ord=2, axis=(1, 2)).max() if ok.any() else np.inf
    if not ok.any():
        raise EmptyCloudError("every image point is non-finite")
    res = A.resolution * (1.0 + float(lip))
    meta = {"dropped_nonfinite": int((~ok).sum()), "lipschitz_estimate": float(lip)}
    return CompactCloud(Y[ok], res, meta)


def forward_invariance_defect(f, A: CompactCloud) -> float:
    """Directed distance from f(A) to A (0 means invariant at cloud resolution)."""
    with np.errstate(all="ignore"):
        Y = evaluate(f, A.points)
    if not np.all(np.isfinite(Y)):
        return math.inf
    return directed_distance(Y, A.points)


def union(*clouds: CompactCloud, resolution: Optional[float] = None) -> CompactCloud:
    pts = np.vstack([c.points for c in clouds])
    res = resolution if resolution is not None else max(c.resolution for c in clouds)
    return CompactCloud(pts, res)


def voxel_thin(P: np.ndarray, voxel: float) -> np.ndarray:
    """Keep the first point in each cubic voxel (deterministic, order preserving)."""
    if P.shape[0] == 0:
        return P
    X = as_real(P)
    keys = np.floor(X / voxel).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return P[np.sort(idx)]


# ---------------------------------------------------------------------------
# sampling


def _solid_lattice(D, spacing: float, budget: int) -> np.ndarray:
    """Cubic lattice through the center with covering radius <= spacing, projected into D."""
    k = D.k
    d = 2 * k
    h = 2.0 * spacing / math.sqrt(d)
    cover = h * math.sqrt(d) / 2.0
    reach = D.outer_radius - float(np.linalg.norm(D.center)) + cover
    m = int(math.floor(reach / h))
    est_vol = (math.pi ** k / math.factorial(k)) * (reach ** d) if isinstance(D, Ball) else (2 * reach) ** d
    est = est_vol / h**d
    if est > budget:
        raise SamplingBudgetError(
            f"spacing {spacing:g} needs about {est:.3g} points, above the budget {budget}"
        )
    axis = np.arange(-m, m + 1) * h
    tail_grids = np.meshgrid(*[axis] * (d - 1), indexing="ij")
    tail = np.stack([g.ravel() for g in tail_grids], axis=1)
    c_real = as_real(D.center[None, :])[0]
    chunks = []
    for x0 in axis:
        X = np.empty((tail.shape[0], d))
        X[:, 0] = x0
        X[:, 1:] = tail
        X += c_real
        P = from_real(X)
        keep = D.signed_distance(P) <= cover
        if keep.any():
            chunks.append(D.project(P[keep]))
    return np.vstack(chunks)


def _sphere_k2(center, radius: float, spacing: float, budget: int) -> np.ndarray:
    """Grid on the 3-sphere in Hopf coordinates (cos a e^{i p}, sin a e^{i q})."""
    step = spacing / 1.25
    na = max(2, int(math.ceil(radius * (math.pi / 2) / step)) + 1)
    a = np.linspace(0.0, math.pi / 2, na)
    n1 = np.maximum(1, np.ceil(2 * math.pi * radius * np.cos(a) / step)).astype(int)
    n2 = np.maximum(1, np.ceil(2 * math.pi * radius * np.sin(a) / step)).astype(int)
    total = int((n1 * n2).sum())
    if total > budget:
        raise SamplingBudgetError(f"surface spacing {spacing:g} needs {total} points, above {budget}")
    out = []
    for ai, m1, m2 in zip(a, n1, n2):
        p = np.exp(2j * math.pi * np.arange(m1) / m1)
        q = np.exp(2j * math.pi * np.arange(m2) / m2)
        P, Q = np.meshgrid(p, q, indexing="ij")
        out.append(np.stack([math.cos(ai) * P.ravel(), math.sin(ai) * Q.ravel()], axis=1))
    return center + radius * np.vstack(out)


def _circle(center, radius, spacing, budget):
    n = max(3, int(math.ceil(2 * math.pi * radius / spacing)))
    if n > budget:
        raise SamplingBudgetError(f"surface spacing {spacing:g} needs {n} points, above {budget}")
    return center + radius * np.exp(2j * math.pi * np.arange(n) / n)[:, None]


def _generic_surface(D, spacing: float, budget: int) -> np.ndarray:
    """Lattice points near the boundary pushed radially onto it."""
    pts = _solid_lattice_shell(D, spacing / 2.0, budget)
    c = D.center
    g = D.gauge(pts)
    ok = g > 0
    return c + (pts[ok] - c) / g[ok, None]


def _solid_lattice_shell(D, spacing, budget):
    P = _solid_lattice(D, spacing, budget * 8)
    h = 2.0 * spacing / math.sqrt(2 * D.k)
    sd = D.signed_distance(P)
    return P[sd >= -h * math.sqrt(2 * D.k)]


def sample_domain(
    U: DomainShape, spacing: float, surface_only: bool = False, budget: int = DEFAULT_POINT_BUDGET
) -> CompactCloud:
    """Deterministic sample of U (or its boundary) with covering radius <= spacing."""
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if isinstance(U, Scaled):
        base = sample_domain(U.base, spacing / U.factor, surface_only, budget)
        return CompactCloud(U.factor * base.points, spacing, {"surface": surface_only})
    if surface_only:
        if isinstance(U, Ball) and U.k == 2:
            P = _sphere_k2(U.center, U.radius, spacing, budget)
        elif isinstance(U, Ball) and U.k == 1:
            P = _circle(U.center, U.radius, spacing, budget)
        else:
            P = _generic_surface(U, spacing, budget)
    else:
        P = _solid_lattice(U, spacing, budget)
    return CompactCloud(P, spacing, {"surface": surface_only})


# ---------------------------------------------------------------------------
# CSV


def write_cloud_csv(path, cloud: CompactCloud) -> None:
    k = cloud.k
    cols = ",".join(f"re_{i + 1},im_{i + 1}" for i in range(k))
    buf = io.StringIO()
    buf.write(f"# resolution={cloud.resolution!r}\n")
    if cloud.meta:
        buf.write(f"# meta={json.dumps(cloud.meta, sort_keys=True)}\n")
    buf.write(cols + "\n")
    np.savetxt(buf, cloud.real, fmt="%.17g", delimiter=",")
    Path(path).write_text(buf.getvalue())


def read_cloud_csv(path) -> CompactCloud:
    res = None
    meta = {}
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("# resolution="):
            res = float(line.split("=", 1)[1])
        elif line.startswith("# meta="):
            meta = json.loads(line.split("=", 1)[1])
        elif line.startswith("re_"):
            continue
        elif line.strip():
            body.append(line)
    if res is None:
        raise InvalidInputError(f"{path}: missing resolution header")
    X = np.loadtxt(io.StringIO("\n".join(body)), delimiter=",", ndmin=2)
    return CompactCloud(from_real(X), res, meta)
