import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from invariantlab.compact import (
    Ball,
    CompactCloud,
    EmptyCloudError,
    Membership,
    Polydisc,
    SamplingBudgetError,
    Scaled,
    as_real,
    cloud_inside,
    component_count,
    directed_distance,
    forward_invariance_defect,
    hausdorff_distance,
    image_cloud,
    is_eps_connected,
    membership,
    read_cloud_csv,
    sample_domain,
    touches_boundary,
    union,
    write_cloud_csv,
)
from invariantlab.maps import diagonal_chain, henon, identity_chain, rotation_chain

seeds = st.integers(0, 2**31 - 1)
U1 = Ball.origin(1.0)


def cloud(points, res=0.1):
    return CompactCloud(np.asarray(points, dtype=complex), res)


def random_cloud(seed, n, scale=1.0):
    r = np.random.default_rng(seed)
    return cloud(scale * (r.standard_normal((n, 2)) + 1j * r.standard_normal((n, 2))))


def brute_hausdorff(A, B):
    D = cdist(as_real(A.points), as_real(B.points))
    return max(D.min(axis=1).max(), D.min(axis=0).max())


def brute_components(A, eps):
    D = cdist(A.real, A.real)
    return connected_components(D <= eps, directed=False)[0]


def test_cloud_invariants():
    with pytest.raises(EmptyCloudError):
        CompactCloud(np.zeros((0, 2)), 0.1)
    with pytest.raises(ValueError):
        CompactCloud([[0, 0]], 0.0)
    with pytest.raises(ValueError):
        CompactCloud([[np.nan, 0]], 0.1)


def test_hausdorff_examples():
    A = random_cloud(0, 30)
    assert hausdorff_distance(A, A).distance == 0
    assert hausdorff_distance(cloud([[0, 0]]), cloud([[3 + 4j, 0]])).distance == 5
    rep = hausdorff_distance(cloud([[0, 0]]), cloud([[0, 0], [1, 0]]))
    assert rep.distance == 1 and rep.directed_ab == 0 and rep.directed_ba == 1
    assert np.array_equal(rep.witness_ba, [1, 0])


@given(seeds, st.integers(1, 60), st.integers(1, 60))
def test_hausdorff_matches_brute_force(seed, n, m):
    A, B = random_cloud(seed, n), random_cloud(seed + 1, m, 2.0)
    rep = hausdorff_distance(A, B)
    assert rep.distance == pytest.approx(brute_hausdorff(A, B), rel=1e-12)
    assert rep.distance == max(rep.directed_ab, rep.directed_ba)
    assert directed_distance(rep.witness_ab, B) == rep.directed_ab


@given(seeds)
def test_hausdorff_is_a_metric(seed):
    A, B, C = random_cloud(seed, 20), random_cloud(seed + 1, 25), random_cloud(seed + 2, 15)
    d = lambda X, Y: hausdorff_distance(X, Y).distance
    assert d(A, B) == d(B, A)
    assert d(A, C) <= d(A, B) + d(B, C) + 1e-12
    assert d(A, B) > 0


def test_membership_examples():
    assert membership(U1, [0, 0], 1e-9) is Membership.INSIDE
    assert membership(U1, [1, 0], 1e-9) is Membership.BOUNDARY
    assert membership(U1, [2, 0], 1e-9) is Membership.OUTSIDE


def test_membership_polydisc_and_scaled():
    D = Polydisc(np.zeros(2), [1.0, 2.0])
    assert membership(D, [0.5, 1.9], 1e-9) is Membership.INSIDE
    assert membership(D, [0.5, 2.0], 1e-9) is Membership.BOUNDARY
    S = Scaled(U1, 3.0)
    assert membership(S, [2.9, 0], 1e-9) is Membership.INSIDE
    assert membership(S, [3.0, 0], 1e-9) is Membership.BOUNDARY


def test_cloud_inside_examples():
    assert cloud_inside(U1, sample_domain(Ball.origin(0.5), 0.1), 0.0)
    bad = cloud([[0, 0], [2, 0]])
    rep = cloud_inside(U1, bad, 1e-9)
    assert not rep and np.array_equal(rep.witness, [2, 0])
    assert cloud_inside(U1, sample_domain(U1, 0.1, surface_only=True), 1e-6)


def test_touches_boundary_examples():
    assert touches_boundary(U1, sample_domain(U1, 0.1, surface_only=True), 1e-6)
    assert not touches_boundary(U1, sample_domain(Ball.origin(0.5), 0.1), 1e-3)
    assert touches_boundary(U1, cloud([[1 - 1e-7, 0]]), 1e-6)


def test_connectivity_examples():
    assert is_eps_connected(cloud([[0, 0]]), 0.1)
    assert not is_eps_connected(cloud([[0, 0], [1, 0]]), 0.5)
    seg = cloud(np.stack([np.linspace(0, 1, 101), np.zeros(101)], axis=1))
    assert is_eps_connected(seg, 0.02)
    assert brute_components(seg, 0.02) == 1


@given(seeds, st.integers(1, 200), st.floats(0.05, 1.5))
def test_components_match_brute_force(seed, n, eps):
    A = random_cloud(seed, n)
    assert component_count(A, eps) == brute_components(A, eps)


def test_image_cloud_examples():
    A = random_cloud(3, 40)
    assert np.array_equal(image_cloud(identity_chain(), A).points, A.points)
    assert np.array_equal(image_cloud(henon(), cloud([[0, 0]])).points, [[0, 0]])
    S = sample_domain(U1, 0.2, surface_only=True)
    half = image_cloud(diagonal_chain(0.5, 0.5), S)
    assert np.allclose(np.linalg.norm(half.points, axis=1), 0.5, atol=1e-12)
    assert half.resolution == pytest.approx(0.2 * 1.5)


def test_image_cloud_drops_nonfinite():
    big = cloud([[1e200, 0], [0, 0]])
    img = image_cloud(henon(), big)
    assert len(img) == 1 and img.meta["dropped_nonfinite"] == 1


def test_invariance_defect_examples():
    assert forward_invariance_defect(henon(), cloud([[0, 0]])) == 0
    ball = sample_domain(U1, 0.1)
    assert forward_invariance_defect(rotation_chain(1.0, 2**0.5), ball) <= 0.1
    assert forward_invariance_defect(diagonal_chain(0.5, 0.5), cloud([[1, 0]])) == 0.5


@given(seeds, st.integers(1, 30))
def test_defect_decreases_when_image_is_added(seed, n):
    f = diagonal_chain(0.7, 0.9j)
    A = random_cloud(seed, n)
    grown = union(A, image_cloud(f, A))
    assert forward_invariance_defect(f, grown) <= forward_invariance_defect(f, A) + 1e-15


def test_sample_domain_examples():
    r = 0.7
    S = sample_domain(Ball.origin(r), r)
    assert S.resolution == r
    assert S.contains_point([0, 0])
    sph = sample_domain(U1, 0.1, surface_only=True)
    assert np.abs(np.linalg.norm(sph.points, axis=1) - 1).max() <= 1e-12
    base = sample_domain(U1, 0.1 / 2.5)
    scaled = sample_domain(Scaled(U1, 2.5), 0.1)
    assert np.array_equal(scaled.points, 2.5 * base.points)


@pytest.mark.parametrize(
    "U,surface",
    [(U1, False), (U1, True), (Polydisc(np.zeros(2), [1.0, 0.5]), False), (Ball.origin(2.0, 1), True)],
)
def test_sample_domain_covering(U, surface):
    spacing = 0.15
    S = sample_domain(U, spacing, surface_only=surface)
    r = np.random.default_rng(7)
    P = r.standard_normal((1000, U.k)) + 1j * r.standard_normal((1000, U.k))
    if surface:
        P = U.project(P * 1e6)
    else:
        P = U.project(P)
    assert directed_distance(P, S) <= spacing
    assert cloud_inside(U, S, 1e-12)


def test_sample_domain_budget():
    with pytest.raises(SamplingBudgetError):
        sample_domain(U1, 1e-3, budget=10_000)


def test_csv_round_trip(tmp_path):
    A = CompactCloud(random_cloud(5, 50).points * np.pi, 0.123456789, {"mu": 0.75})
    path = tmp_path / "a.csv"
    write_cloud_csv(path, A)
    B = read_cloud_csv(path)
    assert np.array_equal(A.points, B.points)
    assert A.resolution == B.resolution and B.meta == {"mu": 0.75}
    assert path.read_text().splitlines()[2] == "re_1,im_1,re_2,im_2"
