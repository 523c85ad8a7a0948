import numpy as np
import pytest

from invariantlab.classify import (
    RecurrenceRecord,
    classify_point,
    classify_trichotomy,
    detect_recurrent_points,
    extract_limit_map,
)
from invariantlab.compact import Ball, CompactCloud, sample_domain
from invariantlab.maps import diagonal_chain, evaluate, henon, identity_chain, jacobian, rotation_chain

ROT = rotation_chain(1.0, 2**0.5)
HALF = diagonal_chain(0.5, 0.5)
MIXED = diagonal_chain(0.5, np.exp(1j))


def rotation_return_distances(P, nmax):
    n = np.arange(1, nmax + 1)
    a = np.abs(np.exp(1j * n) - 1)
    b = np.abs(np.exp(1j * 2**0.5 * n) - 1)
    return np.sqrt(np.abs(P[:, 0, None]) ** 2 * a**2 + np.abs(P[:, 1, None]) ** 2 * b**2)


def test_rotation_sphere_recurrence_matches_direct_simulation():
    W = sample_domain(Ball.origin(1.0), 0.5, surface_only=True)
    nmax, delta = 10_000, 0.05
    scan = detect_recurrent_points(ROT, W, nmax, delta)
    D = rotation_return_distances(W.points, nmax)
    assert scan.escaped == 0 and scan.scanned == len(W)
    # every sample returns at least once within the budget
    assert np.all((D <= delta).any(axis=1))
    got = {tuple(r.point): r.return_times for r in scan.records}
    for i, p in enumerate(W.points):
        near_edge = np.abs(D[i] - delta) <= 1e-9
        expect = np.flatnonzero(D[i] <= delta) + 1
        if len(expect) >= 2 and not near_edge.any():
            assert np.array_equal(got[tuple(p)], expect)
        elif not near_edge.any():
            assert tuple(p) not in got


def test_rotation_sphere_every_sample_recurs_with_longer_budget():
    W = sample_domain(Ball.origin(1.0), 0.5, surface_only=True)
    scan = detect_recurrent_points(ROT, W, 30_000, 0.05)
    assert len(scan.records) == len(W)


def test_contraction_recurrence_only_near_fixed_point():
    W = CompactCloud([[0, 0], [0.01, 0], [0.5, 0.5]], 0.1)
    scan = detect_recurrent_points(HALF, W, 200, 0.05)
    pts = [tuple(r.point) for r in scan.records]
    assert pts == [(0j, 0j), (0.01 + 0j, 0j)]
    assert np.array_equal(scan.records[0].return_times, np.arange(1, 201))


def test_escaping_samples_are_dropped_and_counted():
    W = CompactCloud([[10, 0], [10.1, 0.2]], 0.1)
    scan = detect_recurrent_points(henon(), W, 500, 0.05)
    assert scan.records == [] and scan.escaped == 2


def test_detection_is_order_independent():
    W = sample_domain(Ball.origin(1.0), 0.5, surface_only=True)
    perm = np.random.default_rng(0).permutation(len(W))
    a = detect_recurrent_points(ROT, W, 3000, 0.05)
    b = detect_recurrent_points(ROT, CompactCloud(W.points[perm], W.resolution), 3000, 0.05)
    ka = {tuple(r.point): tuple(r.return_times) for r in a.records}
    kb = {tuple(r.point): tuple(r.return_times) for r in b.records}
    assert ka == kb


def test_limit_map_rotation_closed_form():
    rec = detect_recurrent_points(ROT, CompactCloud([[0.6, 0.8]], 0.1), 5000, 0.05).records[0]
    est = extract_limit_map(ROT, rec, 1e-2)
    m = est.gap
    expect = np.diag([np.exp(1j * m), np.exp(1j * 2**0.5 * m)])
    assert np.abs(est.jacobian - expect).max() <= 1e-9
    assert est.residual <= 0.05 and not est.inconclusive


def test_limit_map_identity():
    rec = RecurrenceRecord(np.array([0.3, -0.2j]), np.arange(1, 50), 0.05)
    est = extract_limit_map(identity_chain(), rec, 1e-2)
    assert np.array_equal(est.stencil_values, est.stencil)
    assert est.residual == 0 and np.allclose(est.jacobian, np.eye(2), atol=1e-12)


def test_limit_map_mixed_diagonal():
    rec = detect_recurrent_points(MIXED, CompactCloud([[0, 0]], 0.1), 2000, 0.05).records[0]
    est = extract_limit_map(MIXED, rec, 1e-2)
    m = est.gap
    assert np.abs(est.jacobian - np.diag([0.5**m, np.exp(1j * m)])).max() <= 1e-9


def test_finite_difference_jacobian_matches_chain_rule():
    f = rotation_chain(0.3, 0.7)
    rec = detect_recurrent_points(f, CompactCloud([[0.5, 0.5j]], 0.1), 2000, 0.05).records[0]
    est = extract_limit_map(f, rec, 1e-2)
    J = np.eye(2, dtype=complex)
    p = est.base_point
    for _ in range(est.gap):
        J = jacobian(f, p) @ J
        p = evaluate(f, p)
    assert np.abs(est.jacobian - J).max() <= 1e-5 * np.abs(J).max()


def test_residual_bound_marks_inconclusive():
    rec = detect_recurrent_points(ROT, CompactCloud([[0.6, 0.8]], 0.1), 5000, 0.05).records[0]
    est = extract_limit_map(ROT, rec, 1e-2, residual_bound=1e-12)
    assert est.inconclusive
    assert classify_trichotomy(est, 2).verdict == "Inconclusive"


def test_two_returns_required():
    with pytest.raises(ValueError):
        extract_limit_map(ROT, RecurrenceRecord(np.zeros(2), np.array([5]), 0.05), 1e-2)


@pytest.mark.parametrize(
    "f,p,verdict,rank",
    [
        (HALF, [0, 0], "AttractingPeriodic", 0),
        (ROT, [0.6, 0.8], "Siegel", 2),
        (MIXED, [0, 0], "IntermediateRank", 1),
    ],
)
def test_trichotomy_on_linear_maps_and_stencil_halving(f, p, verdict, rank):
    for r in (1e-2, 5e-3, 2.5e-3):
        res = classify_point(f, p, 2000, 0.05, r)
        assert res.verdict == verdict and res.rank == rank


def test_contraction_period_and_jacobian():
    rec = detect_recurrent_points(HALF, CompactCloud([[0, 0]], 0.1), 200, 0.05).records[0]
    est = extract_limit_map(HALF, rec, 1e-2)
    assert est.gap >= 20
    assert np.abs(est.jacobian).max() <= 2.0**-20 * (1 + 1e-9)
    res = classify_trichotomy(est, 2)
    assert res.period == 1


def test_siegel_identity_evidence():
    res = classify_point(ROT, [0.6, 0.8], 5000, 0.05, 1e-2)
    ev = res.evidence
    assert ev["identity_deviation"] <= ev["identity_tol"] and "note" not in ev


def test_maximal_rank_far_from_identity_carries_note():
    rec = RecurrenceRecord(np.zeros(2, complex), np.array([20, 40]), 0.05)
    f = diagonal_chain(np.exp(0.5j), np.exp(0.25j))
    est = extract_limit_map(f, rec, 1.0)
    res = classify_trichotomy(est, 2)
    assert res.verdict == "Siegel" and "note" in res.evidence
