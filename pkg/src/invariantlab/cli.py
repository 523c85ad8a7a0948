"""Command-line entry point.

    invariantlab COMMAND --config run.cfg --out DIR [--seed N] [--threads N] [--verbose]

Commands: henon-k, birkhoff, classify, hull-test, linearize, decay,
core-intersect, shared-k. Exit status 0 on success, 1 on a computation
error, 2 on a configuration error; failures also write ``error.json``.

Map literal grammar (the ``map`` key)::

    henon                              (z, w) -> (z^2 + w, z)
    identity
    linear: [[a, b], [c, d]]
    diag: a, b
    rotation: theta1, theta2           diag(exp(i theta1), exp(i theta2))
    scale: c
    poly: z^2 + w, z                   variables z, w or z1..zk
    chain: shear axis=1 poly=z^2; swap factors applied left to right
                                       (also: affine A=[[..]] b=[..]; scale c; perm p=[..])
    <literal>^n                        n-fold composition, e.g. henon^2

Numbers accept complex literals (1j) and exp, sqrt, cos, sin, log, pi.
Domains: ``ball:0,3`` (center 0, radius 3) or ``polydisc:0,1``.
mu schedules: ``1-2^-j:8`` (j = 1..8), ``1-2^-j:3..8`` or ``[0.5, 0.75]``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path
from typing import Optional

import numpy as np

from . import REPORT_SCHEMA_VERSION, __version__
from .birkhoff import (
    BirkhoffConfig,
    birkhoff_limit,
    linearization_average,
    shared_invariant_check,
)
from .classify import classify_trichotomy, detect_recurrent_points, extract_limit_map
from .compact import CompactCloud, sample_domain, read_cloud_csv, write_cloud_csv, boundary_distance
from .config import COMMANDS, ConfigError, RunConfig, parse_config, parse_domain
from .escape import (
    GridSpec,
    attraction_decay,
    core_intersection,
    escape_field,
    field_to_pgm,
    filtration_radius,
    k_compact,
)
from .hull import PolyBasisSpec, HullScorer, default_tau, hull_invariance_check
from .maps import jacobian, parse_map, parse_number

__all__ = ["main", "run_command", "write_report"]

log = logging.getLogger("invariantlab")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_report(path: Path, payload: dict) -> None:
    text = json.dumps(_clean(payload), sort_keys=True, indent=2)
    path.write_text(text + "\n")


def _envelope(cfg: RunConfig, seed: int, body: dict) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "software": {"name": "invariantlab", "version": __version__},
        "command": cfg.command,
        "seed": seed,
        "config": cfg.echo(),
        "result": body,
    }


def _birkhoff_cfg(cfg: RunConfig, seed: int) -> BirkhoffConfig:
    return BirkhoffConfig(
        U=parse_domain(cfg["U"]),
        mu_schedule=cfg["mu"],
        epsilons=cfg["epsilons"],
        t_tol=cfg["t_tol"],
        spacing=cfg["spacing"],
        surface_spacing=cfg["surface_spacing"],
        n0_cap=cfg["n0_cap"],
        hausdorff_cauchy_tol=cfg["cauchy_tol"],
        direction=cfg["direction"],
        point_budget=cfg["budget"],
        seed=seed,
    )


# ---------------------------------------------------------------------------
# commands


def _run_henon_k(cfg: RunConfig, out: Path, seed: int) -> dict:
    f = parse_map(cfg["map"])
    R = cfg["R"] if cfg["R"] is not None else filtration_radius(f)
    grid = GridSpec.sobol(f.k, cfg["half_width"], cfg["samples"], seed)
    K = k_compact(f, grid, R, cfg["nmax"], cfg["escape_radius"])
    write_cloud_csv(out / "K.csv", K)
    sl = GridSpec.real_slice(cfg["slice_half_width"], cfg["slice_count"], f.k)
    fld = escape_field(f, sl, R, cfg["nmax"], "forward", cfg["escape_radius"])
    (out / "kplus.pgm").write_bytes(field_to_pgm(fld))
    return {
        "filtration_radius": R,
        "k_points": len(K),
        "k_resolution": K.resolution,
        "k_max_norm": K.max_norm(),
        "contains_origin_within_resolution": K.contains_point(np.zeros(f.k), K.resolution),
        "slice": fld.describe(),
        "files": ["K.csv", "kplus.pgm"],
    }


def _run_birkhoff(cfg: RunConfig, out: Path, seed: int) -> dict:
    f = parse_map(cfg["map"])
    res = birkhoff_limit(f, _birkhoff_cfg(cfg, seed))
    write_cloud_csv(out / "K.csv", res.K)
    body = res.to_json()
    body["boundary_touch"] = res.boundary_touch
    body["files"] = ["K.csv"]
    return body


def _run_classify(cfg: RunConfig, out: Path, seed: int) -> dict:
    f = parse_map(cfg["map"])
    W = sample_domain(parse_domain(cfg["W"], f.k), cfg["W_spacing"], cfg["W_surface"])
    scan = detect_recurrent_points(f, W, cfg["nmax"], cfg["delta"])
    verdicts = []
    counts: dict[str, int] = {}
    for rec in scan.records[: cfg["max_records"]]:
        est = extract_limit_map(f, rec, cfg["stencil_radius"], cfg["min_gap"])
        r = classify_trichotomy(est, f.k, cfg["rank_tol"])
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
        verdicts.append({"point": rec.point.tolist(), "returns": len(rec.return_times), **r.to_json()})
    lines = ["re_1,im_1,re_2,im_2,returns"] + [
        ",".join(f"{v:.17g}" for v in np.concatenate([np.column_stack([p.real, p.imag]).ravel(), [len(r.return_times)]]))
        for p, r in ((rec.point, rec) for rec in scan.records)
    ]
    (out / "records.csv").write_text("\n".join(lines) + "\n")
    verdict = max(sorted(counts), key=lambda k: counts[k]) if counts else "Inconclusive"
    return {
        "verdict": verdict,
        "verdict_counts": counts,
        "recurrent": len(scan.records),
        "escaped": scan.escaped,
        "scanned": scan.scanned,
        "records": verdicts,
        "files": ["records.csv"],
    }


def _ppm(mask: np.ndarray) -> bytes:
    """Candidate probes green, excluded red; rows top to bottom along decreasing second axis."""
    img = np.zeros(mask.shape + (3,), np.uint8)
    img[mask] = (40, 200, 60)
    img[~mask] = (200, 40, 40)
    img = img.transpose(1, 0, 2)[::-1]
    return f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode() + img.tobytes()


def _run_hull(cfg: RunConfig, out: Path, seed: int) -> dict:
    f = parse_map(cfg["map"])
    C = sample_domain(parse_domain(cfg["K"], f.k), cfg["K_spacing"], cfg["K_surface"])
    spec = PolyBasisSpec(cfg["degree"], cfg["num_random"], seed)
    tau = cfg["tau"] if cfg["tau"] is not None else default_tau(C, spec)
    probe = GridSpec.real_slice(cfg["probe_half_width"], cfg["probe_count"], f.k)
    scores, _ = HullScorer(C, spec).scores(probe.points())
    cand = scores <= 1 + tau
    (out / "hull.ppm").write_bytes(_ppm(cand.reshape(probe.shape)))
    inv = hull_invariance_check(f, C, probe, spec, tau)
    return {
        "basis": spec.describe(),
        "tau": tau,
        "probes": int(cand.size),
        "candidates": int(cand.sum()),
        "invariance": inv.to_json(),
        "semantics": "candidate set is an outer approximation; exclusion is a certificate",
        "files": ["hull.ppm"],
    }


def _run_linearize(cfg: RunConfig, out: Path, seed: int) -> dict:
    f = parse_map(cfg["map"])
    A = np.asarray(parse_number(cfg["A"]), dtype=np.complex128) if cfg["A"] else jacobian(f, np.zeros(f.k))
    S = sample_domain(parse_domain(f"ball:0,{cfg['radius']}", f.k), cfg["spacing"])
    rep = linearization_average(f, A, S, cfg["n"], cfg["bound"])
    return {"A": [[[z.real, z.imag] for z in row] for row in A], "samples": len(S), **rep.to_json()}


def _run_decay(cfg: RunConfig, out: Path, seed: int) -> dict:
    f = parse_map(cfg["map"])
    X = read_cloud_csv(cfg["X"])
    K = read_cloud_csv(cfg["K"])
    U = parse_domain(cfg["U"], f.k)
    seq = attraction_decay(f, X, K, cfg["n"])
    threshold = 0.5 * boundary_distance(U, K)
    return {"decay": seq, "threshold": threshold, "below_threshold": seq[-1] < threshold}


def _run_core(cfg: RunConfig, out: Path, seed: int) -> dict:
    f = parse_map(cfg["map"])
    X = read_cloud_csv(cfg["X"])
    rep = core_intersection(f, X, cfg["n"])
    write_cloud_csv(out / "core.csv", rep.cloud)
    return {
        "kept": rep.kept,
        "total": rep.total,
        "forward_defect": rep.forward_defect,
        "backward_defect": rep.backward_defect,
        "files": ["core.csv"],
    }


def _run_shared(cfg: RunConfig, out: Path, seed: int) -> dict:
    f = parse_map(cfg["map"])
    g = parse_map(cfg["map2"])
    bcfg = _birkhoff_cfg(cfg, seed)
    rf = birkhoff_limit(f, bcfg)
    rg = birkhoff_limit(g, bcfg)
    write_cloud_csv(out / "K_f.csv", rf.K)
    write_cloud_csv(out / "K_g.csv", rg.K)
    rep = shared_invariant_check(f, g, rf.K, rg.K, seed=seed)
    return {"f": rf.to_json()["diagnostics"], "g": rg.to_json()["diagnostics"], **rep.to_json(), "files": ["K_f.csv", "K_g.csv"]}


RUNNERS = {
    "henon-k": _run_henon_k,
    "birkhoff": _run_birkhoff,
    "classify": _run_classify,
    "hull-test": _run_hull,
    "linearize": _run_linearize,
    "decay": _run_decay,
    "core-intersect": _run_core,
    "shared-k": _run_shared,
}


def run_command(cfg: RunConfig, out: Path, seed: Optional[int] = None) -> int:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg["seed"] if seed is None else int(seed)
    try:
        body = RUNNERS[cfg.command](cfg, out, seed)
    except Exception as exc:  # computation errors become exit status 1
        log.debug("computation failed", exc_info=True)
        write_report(
            out / "error.json",
            {"kind": "computation", "error": type(exc).__name__, "message": str(exc), "command": cfg.command},
        )
        return 1
    write_report(out / "report.json", _envelope(cfg, seed, body))
    return 0


def _set_threads(n: Optional[int]) -> None:
    if n is None:
        env = os.environ.get("INVARIANTLAB_THREADS")
        n = int(env) if env and env.isdigit() else None
    if n:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def main(argv: Optional[list] = None) -> int:
    ap = argparse.ArgumentParser(prog="invariantlab", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = args.out
    try:
        text = args.config.read_text(encoding="utf-8")
        cfg = parse_config(text, args.command)
    except (OSError, UnicodeDecodeError) as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_report(out / "error.json", {"kind": "config", "errors": [str(exc)], "command": args.command})
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_report(out / "error.json", {"kind": "config", "errors": exc.errors, "command": args.command})
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.raw["seed"] = str(args.seed)
    _set_threads(args.threads)
    status = run_command(cfg, out, args.seed)
    if status and args.verbose:
        print((out / "error.json").read_text(), file=sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
