"""Forward-invariant compacts for maps fixing 0 with all multipliers of modulus 1.

Pipeline for one scaling factor mu < 1:

1. ``g = f(mu .)`` attracts 0; a small body ``B = eps U`` with ``g(B) inside B``.
2. ``n0``: the last inverse iterate of B that still lies in U.
3. ``t_bar``: the largest t with ``g^{-n0}(t B)`` inside U (bisection), so the
   pulled-back body touches the boundary of U.
4. ``F_mu = g^{-n0}(t_bar B)``, sampled by pulling back a solid sample of
   ``t_bar B`` together with the refined boundary sample.

Running along an increasing schedule of mu and unioning over several eps gives
the limit compact K, with Hausdorff distances between consecutive stages as
the convergence record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .compact import (
    Ball,
    CompactCloud,
    DomainShape,
    Polydisc,
    Scaled,
    as_real,
    forward_invariance_defect,
    hausdorff_distance,
    is_eps_connected,
    sample_domain,
    touches_boundary,
    voxel_thin,
)
from .geometry import eigenvalues_2x2
from .maps import AutomorphismChain, compose, evaluate, invert_chain, jacobian, scale_map

__all__ = [
    "HypothesisError",
    "BasinError",
    "CalibrationError",
    "CommutativityError",
    "BirkhoffConfig",
    "HypothesisReport",
    "Calibration",
    "ForwardCompact",
    "BirkhoffResult",
    "LinearizationReport",
    "SharedInvariantReport",
    "default_mu_schedule",
    "check_hypotheses",
    "basin_escape_index",
    "calibrate_t",
    "forward_invariant_compact_for_mu",
    "birkhoff_limit",
    "linearization_average",
    "shared_invariant_check",
]

INSIDE_TOL = 1e-12


class HypothesisError(ValueError):
    pass


class BasinError(RuntimeError):
    pass


class CalibrationError(RuntimeError):
    pass


class CommutativityError(ValueError):
    pass


def default_mu_schedule(j_max: int = 8, j_min: int = 1) -> tuple:
    return tuple(1.0 - 2.0**-j for j in range(j_min, j_max + 1))


@dataclass(frozen=True)
class BirkhoffConfig:
    U: DomainShape
    mu_schedule: tuple = field(default_factory=default_mu_schedule)
    epsilons: tuple = (0.2, 0.1, 0.05)
    t_tol: float = 1e-6
    spacing: float = 0.1
    surface_spacing: Optional[float] = None
    n0_cap: int = 100_000
    hausdorff_cauchy_tol: Optional[float] = None
    direction: str = "forward"
    refine_rounds: int = 4
    refine_top: int = 64
    refine_draws: int = 16
    max_recalibrations: int = 3
    point_budget: int = 4_000_000
    seed: int = 0

    def __post_init__(self):
        mus = tuple(float(m) for m in self.mu_schedule)
        object.__setattr__(self, "mu_schedule", mus)
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if not mus or any(not 0 < m < 1 for m in mus) or any(b <= a for a, b in zip(mus, mus[1:])):
            raise ValueError("mu schedule must be strictly increasing inside (0, 1)")
        if not self.epsilons or any(not 0 < e < 1 for e in self.epsilons):
            raise ValueError("epsilon values must lie in (0, 1)")
        for name in ("t_tol", "spacing"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n0_cap < 1:
            raise ValueError("n0_cap must be >= 1")
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be forward or backward")
        if np.any(np.abs(self.U.canonical().center) > 0):
            raise ValueError("U must be centered at 0")

    @property
    def cauchy_tol(self) -> float:
        return 2.0 * self.spacing if self.hausdorff_cauchy_tol is None else self.hausdorff_cauchy_tol

    @property
    def boundary_sample_spacing(self) -> float:
        return self.spacing if self.surface_spacing is None else self.surface_spacing

    def touch_tol(self) -> float:
        return max(self.t_tol * self.U.diameter, 2.0 * self.spacing)

    def describe(self) -> dict:
        return {
            "U": self.U.describe(),
            "mu_schedule": list(self.mu_schedule),
            "epsilons": list(self.epsilons),
            "t_tol": self.t_tol,
            "spacing": self.spacing,
            "surface_spacing": self.boundary_sample_spacing,
            "n0_cap": self.n0_cap,
            "hausdorff_cauchy_tol": self.cauchy_tol,
            "direction": self.direction,
            "refine_rounds": self.refine_rounds,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# hypotheses


@dataclass(frozen=True)
class HypothesisReport:
    passed: bool
    failures: list
    eigenvalues: list
    fixed_point_error: float
    notes: dict

    def require(self) -> "HypothesisReport":
        if not self.passed:
            raise HypothesisError("; ".join(self.failures))
        return self

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "failures": list(self.failures),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "fixed_point_error": self.fixed_point_error,
            "notes": dict(self.notes),
        }


def _spectrum(A: np.ndarray) -> list:
    if A.shape == (2, 2):
        return list(eigenvalues_2x2(A).eigenvalues)
    ev = np.linalg.eigvals(A)
    return sorted(ev.tolist(), key=lambda z: (-abs(z), np.angle(z)))


def check_hypotheses(f, U: DomainShape, tol: float = 1e-9) -> HypothesisReport:
    failures = []
    zero = np.zeros(f.k, np.complex128)
    err = float(np.linalg.norm(evaluate(f, zero)))
    if not err <= 1e-12:
        failures.append(f"fixed point: |f(0)| = {err:.3e} > 1e-12")
    ev = _spectrum(jacobian(f, zero))
    bad = [z for z in ev if not abs(abs(z) - 1.0) <= tol]
    if bad:
        mods = ", ".join(f"{abs(z):.6g}" for z in bad)
        failures.append(f"multipliers: |lambda| = {mods} not within {tol:g} of 1")
    c = U.canonical()
    if np.any(np.abs(c.center) > 0):
        failures.append("domain: U must be star-shaped about 0 (center at the origin)")
    notes = {"runge": "by construction (ball or polydisc)"}
    if isinstance(f, AutomorphismChain):
        notes["injective"] = "by construction (automorphism chain)"
    else:
        failures.append("injectivity: only automorphism chains are supported")
    return HypothesisReport(not failures, failures, ev, err, notes)


# ---------------------------------------------------------------------------
# basin index and calibration


def _gauge_args(U):
    kind, center, radii = U.kernel_params()
    return int(kind), np.ascontiguousarray(center, dtype=np.complex128), np.ascontiguousarray(radii, dtype=np.float64)


def _surface(B: DomainShape, U: DomainShape, cfg: BirkhoffConfig) -> np.ndarray:
    """Boundary sample of B at the configured spacing measured on the scale of U."""
    rel = B.outer_radius / U.outer_radius
    return sample_domain(B, cfg.boundary_sample_spacing * rel, True, cfg.point_budget).points


def _pulled_gauge(ginv, S: np.ndarray, n: int, U) -> np.ndarray:
    kind, c, r = _gauge_args(U)
    return K.gauge_after(np.ascontiguousarray(S), *ginv.program.args, int(n), kind, c, r)


def basin_escape_index(
    g: AutomorphismChain, B: DomainShape, U: DomainShape, cfg: BirkhoffConfig, S: Optional[np.ndarray] = None
) -> int:
    """Largest n0 >= 1 with g^{-n0}(B) inside U while g^{-(n0+1)}(B) is not."""
    ginv = invert_chain(g)
    if S is None:
        S = _surface(B, U, cfg)
    if np.any(U.gauge(S) > 1.0 + INSIDE_TOL):
        raise BasinError("B is not contained in U")
    kind, c, r = _gauge_args(U)
    lev = K.exit_levels(np.ascontiguousarray(S), *ginv.program.args, int(cfg.n0_cap), kind, c, r, 1.0 + INSIDE_TOL)
    first_exit = int(lev.min())
    if first_exit > cfg.n0_cap:
        raise BasinError(f"inverse images of B stay inside U for all {cfg.n0_cap} steps (n0_cap exceeded)")
    n0 = first_exit - 1
    if n0 < 1:
        raise BasinError("g^-1(B) already leaves U; choose a smaller epsilon")
    return n0


@dataclass(frozen=True, eq=False)
class Calibration:
    t_bar: float
    surface: np.ndarray  # refined boundary sample of B (t = 1)
    max_gauge: float
    touches: bool
    bisection_steps: int
    refinements: int


def _bisect(ginv, S, n0, U, lo, hi, t_tol):
    steps = 0
    while hi - lo > t_tol:
        mid = 0.5 * (lo + hi)
        if _pulled_gauge(ginv, mid * S, n0, U).max() <= 1.0 + INSIDE_TOL:
            lo = mid
        else:
            hi = mid
        steps += 1
    return lo, hi, steps


def _refine(ginv, B, U, S, t, n0, cfg, rng, sigma):
    """Jitter the boundary sample around its worst points; keep draws that raise the max gauge."""
    g = _pulled_gauge(ginv, t * S, n0, U)
    top = np.argsort(-g, kind="stable")[: cfg.refine_top]
    base = S[top]
    n = base.shape[0] * cfg.refine_draws
    k = S.shape[1]
    noise = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    cand = np.repeat(base, cfg.refine_draws, axis=0) + sigma * noise / math.sqrt(2 * k)
    cand = cand / B.gauge(cand)[:, None]
    gc = _pulled_gauge(ginv, t * cand, n0, U)
    better = gc > g.max()
    keep = np.isfinite(gc) & (gc >= np.sort(g)[-min(len(g), cfg.refine_top)])
    return np.vstack([S, cand[keep]]), bool(better.any())


def calibrate_t(
    g: AutomorphismChain,
    n0: int,
    B: DomainShape,
    U: DomainShape,
    cfg: BirkhoffConfig,
    S: Optional[np.ndarray] = None,
) -> Calibration:
    """Largest t (to t_tol) with g^{-n0}(t B) inside U, refined adaptively near the worst directions."""
    ginv = invert_chain(g)
    if S is None:
        S = _surface(B, U, cfg)
    if _pulled_gauge(ginv, S, n0, U).max() > 1.0 + INSIDE_TOL:
        raise CalibrationError("inclusion fails at t = 1; n0 is inconsistent with the sample")
    hi = 2.0
    while _pulled_gauge(ginv, hi * S, n0, U).max() <= 1.0 + INSIDE_TOL:
        hi *= 2.0
        if hi > 2.0**60:
            raise CalibrationError("inclusion never fails as t grows")
    lo, hi, steps = _bisect(ginv, S, n0, U, 1.0, hi, cfg.t_tol)
    rng = np.random.default_rng(cfg.seed)
    sigma = cfg.boundary_sample_spacing * B.outer_radius / U.outer_radius
    refinements = 0
    for _ in range(cfg.refine_rounds):
        S, improved = _refine(ginv, B, U, S, lo, n0, cfg, rng, sigma)
        sigma *= 0.5
        if _pulled_gauge(ginv, lo * S, n0, U).max() > 1.0 + INSIDE_TOL:
            refinements += 1
            if _pulled_gauge(ginv, S, n0, U).max() > 1.0 + INSIDE_TOL:
                raise CalibrationError("refined sample violates inclusion at t = 1; n0 needs recomputation")
            lo, hi, more = _bisect(ginv, S, n0, U, 1.0, lo, cfg.t_tol)
            steps += more
    check = _pulled_gauge(ginv, max(lo - cfg.t_tol, 1.0) * S, n0, U).max()
    if check > 1.0 + INSIDE_TOL:
        raise CalibrationError("inclusion is not monotone in t at this sampling; use a finer spacing")
    gmax = float(_pulled_gauge(ginv, lo * S, n0, U).max())
    pulled = _pull(ginv, lo * S, n0)
    touch = touches_boundary(U, CompactCloud(pulled, cfg.spacing), cfg.touch_tol())
    return Calibration(lo, S, gmax, touch, steps, refinements)


def _pull(ginv, S: np.ndarray, n: int) -> np.ndarray:
    keep = np.array([n], np.int64)
    return K.orbit_select(np.ascontiguousarray(S), *ginv.program.args, keep)[:, 0, :]


# ---------------------------------------------------------------------------
# one scaling factor


@dataclass(frozen=True, eq=False)
class ForwardCompact:
    cloud: CompactCloud
    mu: float
    epsilon: float
    n0: int
    t_bar: float
    g_defect: float
    connected: bool
    contains_zero: bool
    touches: bool
    recalibrations: int

    def summary(self) -> dict:
        return {
            "mu": self.mu,
            "epsilon": self.epsilon,
            "n0": self.n0,
            "t_bar": self.t_bar,
            "points": len(self.cloud),
            "g_defect": self.g_defect,
            "connected": self.connected,
            "contains_zero": self.contains_zero,
            "touches_boundary": self.touches,
            "recalibrations": self.recalibrations,
        }


def _kept_levels(n0: int) -> np.ndarray:
    """Levels n0 - i for i in {0, 1, 2, 4, 8, ...} plus 0: dense near the outer level."""
    offs = {0, 1, 2}
    s = 4
    while s < n0:
        offs.add(s)
        s *= 2
    lv = sorted({n0 - i for i in offs if i <= n0} | {0})
    return np.array(lv, np.int64)


def _pull_levels(ginv, seeds: np.ndarray, levels: np.ndarray, voxel: float, chunk_points: int = 2_000_000):
    per = max(1, chunk_points // len(levels))
    out = []
    for s in range(0, seeds.shape[0], per):
        L = K.orbit_select(np.ascontiguousarray(seeds[s : s + per]), *ginv.program.args, levels)
        P = L.reshape(-1, seeds.shape[1])
        P = P[np.all(np.isfinite(P), axis=1)]
        out.append(voxel_thin(P, voxel))
    return voxel_thin(np.vstack(out), voxel)


def _small_body(g, U, eps: float, cfg: BirkhoffConfig):
    """Shrink eps until g maps the boundary sample of eps U into eps U."""
    for _ in range(40):
        B = Scaled(U, eps)
        S = _surface(B, U, cfg)
        if np.max(B.gauge(evaluate(g, S))) <= 1.0:
            return eps, B, S
        eps *= 0.5
    raise BasinError("could not find a g-invariant body eps U")


def forward_invariant_compact_for_mu(f, mu: float, cfg: BirkhoffConfig, epsilon: Optional[float] = None) -> ForwardCompact:
    U = cfg.U
    g = scale_map(f, mu)
    ginv = invert_chain(g)
    eps, B, S = _small_body(g, U, cfg.epsilons[0] if epsilon is None else epsilon, cfg)
    n0 = basin_escape_index(g, B, U, cfg, S)
    cal = calibrate_t(g, n0, B, U, cfg, S)
    rel = B.outer_radius / U.outer_radius
    solid_unit = sample_domain(U, cfg.spacing, False, cfg.point_budget).points
    levels = _kept_levels(n0)
    voxel = cfg.spacing / 4.0
    S = cal.surface
    recal = 0
    kind, c, r = _gauge_args(U)
    while True:
        t = cal.t_bar
        solid = (t * eps) * solid_unit
        g_out = K.gauge_after(np.ascontiguousarray(solid), *ginv.program.args, n0, kind, c, r)
        bad = g_out > 1.0 + INSIDE_TOL
        if not bad.any() or recal >= cfg.max_recalibrations:
            solid = solid[~bad]
            break
        # solid seeds leaving U reveal boundary directions the sample missed
        extra = solid[bad] / (t * B.gauge(solid[bad]))[:, None]
        S = np.vstack([S, extra])
        cal = calibrate_t(g, n0, B, U, cfg, S)
        recal += 1
    # the solid sample covers F at the outer level; the boundary sample at all kept
    # levels adds the nested shells g^{-j}(t_bar dB), j < n0, which lie inside F
    pts = np.vstack(
        [
            _pull_levels(ginv, solid, np.array([n0], np.int64), voxel),
            _pull_levels(ginv, t * S, levels, voxel),
        ]
    )
    pts = voxel_thin(pts, voxel)
    pts = np.vstack([np.zeros((1, f.k), np.complex128), pts])
    cloud = CompactCloud(pts, cfg.spacing, {"mu": mu, "epsilon": eps, "n0": n0, "t_bar": cal.t_bar})
    zero = bool(np.any(np.all(pts == 0, axis=1)))
    return ForwardCompact(
        cloud=cloud,
        mu=float(mu),
        epsilon=float(eps),
        n0=int(n0),
        t_bar=float(cal.t_bar),
        g_defect=float(forward_invariance_defect(g, cloud)),
        connected=is_eps_connected(cloud, 3.0 * cfg.spacing),
        contains_zero=zero,
        touches=touches_boundary(U, cloud, cfg.touch_tol()),
        recalibrations=recal,
    )


# ---------------------------------------------------------------------------
# limit


@dataclass(frozen=True, eq=False)
class BirkhoffResult:
    K: CompactCloud
    per_mu: list
    converged: bool
    stop_reason: str
    hausdorff_deltas: list
    f_defect: float
    boundary_touch: bool
    connected: bool
    contains_zero: bool
    hypotheses: HypothesisReport
    config: BirkhoffConfig

    def to_json(self) -> dict:
        return {
            "config": self.config.describe(),
            "hypotheses": self.hypotheses.to_json(),
            "per_mu": self.per_mu,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "hausdorff_deltas": self.hausdorff_deltas,
            "diagnostics": {
                "points": len(self.K),
                "resolution": self.K.resolution,
                "f_defect": self.f_defect,
                "boundary_touch": self.boundary_touch,
                "connected": self.connected,
                "contains_zero": self.contains_zero,
                "maximality": "approximate (union over configured seed bodies)",
            },
        }


def birkhoff_limit(f, cfg: BirkhoffConfig) -> BirkhoffResult:
    hyp = check_hypotheses(f, cfg.U).require()
    h = invert_chain(f) if cfg.direction == "backward" else f
    if cfg.direction == "backward":
        check_hypotheses(h, cfg.U).require()
    per_mu = []
    deltas = []
    prev = None
    current = None
    converged = False
    for mu in cfg.mu_schedule:
        parts = []
        entries = []
        for eps in cfg.epsilons:
            fc = forward_invariant_compact_for_mu(h, mu, cfg, eps)
            parts.append(fc.cloud.points)
            entries.append(fc.summary())
        pts = voxel_thin(np.vstack(parts), cfg.spacing / 4.0)
        current = CompactCloud(pts, cfg.spacing, {"mu": mu})
        record = {"mu": mu, "seeds": entries, "points": len(current)}
        if prev is not None:
            d = hausdorff_distance(prev, current).distance
            deltas.append(d)
            record["hausdorff_delta"] = d
        per_mu.append(record)
        if prev is not None and deltas[-1] <= cfg.cauchy_tol:
            converged = True
            break
        prev = current
    reason = "hausdorff-cauchy tolerance reached" if converged else "mu schedule exhausted"
    Kc = current
    return BirkhoffResult(
        K=Kc,
        per_mu=per_mu,
        converged=converged,
        stop_reason=reason,
        hausdorff_deltas=deltas,
        f_defect=float(forward_invariance_defect(h, Kc)),
        boundary_touch=touches_boundary(cfg.U, Kc, cfg.touch_tol()),
        connected=is_eps_connected(Kc, 3.0 * cfg.spacing),
        contains_zero=bool(np.any(np.all(Kc.points == 0, axis=1))),
        hypotheses=hyp,
        config=cfg,
    )


# ---------------------------------------------------------------------------
# linearization


@dataclass(frozen=True, eq=False)
class LinearizationReport:
    h_values: np.ndarray
    convergence: float
    h_zero: float
    jacobian_error: float
    residual: float
    n: int

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "convergence_proxy": self.convergence,
            "h_zero_norm": self.h_zero,
            "jacobian_minus_identity": self.jacobian_error,
            "conjugacy_residual": self.residual,
        }


def _cesaro(f, Ainv: np.ndarray, P: np.ndarray, n: int, bound: float):
    """Partial averages (1/m) sum_{j<m} A^{-j} f^j(z) for m = n and 2n."""
    x = np.array(P, dtype=np.complex128)
    M = np.eye(P.shape[1], dtype=np.complex128)
    acc = np.zeros_like(x)
    h_n = None
    prog = f.program.args
    for j in range(2 * n):
        if j:
            x = K.eval_batch(np.ascontiguousarray(x), *prog)
            M = M @ Ainv
        norms = np.linalg.norm(x, axis=1)
        bad = np.flatnonzero(~(norms <= bound))
        if bad.size:
            raise BasinError(f"orbit of sample {P[bad[0]].tolist()} left the ball of radius {bound:g} at step {j}")
        acc += x @ M.T
        if j == n - 1:
            h_n = acc / n
    return h_n, acc / (2 * n)


def linearization_average(
    f, A, samples: CompactCloud, n: int, bound: Optional[float] = None, fd_step: float = 1e-4
) -> LinearizationReport:
    A = np.asarray(A, dtype=np.complex128)
    if abs(np.linalg.det(A)) < 1e-14:
        raise ValueError("A must be invertible")
    if n < 1:
        raise ValueError("n must be >= 1")
    Ainv = np.linalg.inv(A)
    P = samples.points
    bound = 10.0 * max(samples.max_norm(), 1e-300) if bound is None else float(bound)
    h_n, h_2n = _cesaro(f, Ainv, P, n, bound)
    k = P.shape[1]
    E = np.eye(k, dtype=np.complex128)
    probes = np.vstack([np.zeros((1, k)), fd_step * E, -fd_step * E])
    _, hp = _cesaro(f, Ainv, probes, n, bound)
    Jh = ((hp[1 : k + 1] - hp[k + 1 :]) / (2 * fd_step)).T
    fz = evaluate(f, P)
    _, h_f = _cesaro(f, Ainv, fz, n, max(bound, 10.0 * float(np.abs(fz).max())))
    residual = float(np.linalg.norm(h_f - h_2n @ A.T, axis=1).max())
    return LinearizationReport(
        h_values=h_2n,
        convergence=float(np.linalg.norm(h_2n - h_n, axis=1).max()),
        h_zero=float(np.linalg.norm(hp[0])),
        jacobian_error=float(np.abs(Jh - np.eye(k)).max()),
        residual=residual,
        n=int(n),
    )


# ---------------------------------------------------------------------------
# commuting maps


@dataclass(frozen=True)
class SharedInvariantReport:
    hausdorff: float
    g_defect_on_Kf: float
    f_defect_on_Kg: float
    combined_resolution: float

    @property
    def consistent(self) -> bool:
        tol = 3.0 * self.combined_resolution
        return self.hausdorff <= tol and self.g_defect_on_Kf <= tol and self.f_defect_on_Kg <= tol

    def to_json(self) -> dict:
        return {
            "hausdorff": self.hausdorff,
            "g_defect_on_Kf": self.g_defect_on_Kf,
            "f_defect_on_Kg": self.f_defect_on_Kg,
            "combined_resolution": self.combined_resolution,
            "consistent": self.consistent,
        }


def shared_invariant_check(
    f, g, K_f: CompactCloud, K_g: CompactCloud, n_test: int = 256, seed: int = 0, tol: float = 1e-10
) -> SharedInvariantReport:
    rng = np.random.default_rng(seed)
    radius = max(K_f.max_norm(), K_g.max_norm(), 1e-3)
    k = f.k
    X = rng.standard_normal((n_test, k)) + 1j * rng.standard_normal((n_test, k))
    X *= (radius * rng.random(n_test) ** (1 / (2 * k)) / np.linalg.norm(X, axis=1))[:, None]
    X = np.vstack([X, K_f.points[:: max(1, len(K_f) // n_test)], K_g.points[:: max(1, len(K_g) // n_test)]])
    with np.errstate(all="ignore"):
        fg = evaluate(f, evaluate(g, X))
        gf = evaluate(g, evaluate(f, X))
    err = np.linalg.norm(fg - gf, axis=1) / (1.0 + np.linalg.norm(fg, axis=1))
    if not np.all(err <= tol):
        i = int(np.argmax(np.where(np.isfinite(err), err, np.inf)))
        raise CommutativityError(f"f o g != g o f at {X[i].tolist()} (relative gap {err[i]:.3e})")
    return SharedInvariantReport(
        hausdorff=hausdorff_distance(K_f, K_g).distance,
        g_defect_on_Kf=forward_invariance_defect(g, K_f),
        f_defect_on_Kg=forward_invariance_defect(f, K_g),
        combined_resolution=K_f.resolution + K_g.resolution,
    )
