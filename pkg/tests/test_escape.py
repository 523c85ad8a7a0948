import numpy as np
import pytest

from invariantlab.compact import Ball, CompactCloud, EmptyCloudError, sample_domain
from invariantlab.escape import (
    ContractionCapError,
    EscapeError,
    GridSpec,
    UnsupportedMapError,
    attraction_decay,
    bounded_cloud,
    core_intersection,
    escape_field,
    field_to_pgm,
    filtration_oracle,
    filtration_radius,
    find_strict_contraction_power,
    k_compact,
)
from invariantlab.maps import diagonal_chain, henon, identity_chain, invert_chain, iterate, rotation_chain, scale_map
from invariantlab.geometry import InvalidInputError

H = henon()
HALF = diagonal_chain(0.5, 0.5)


def test_henon_filtration_radius_passes_oracle():
    R = filtration_radius(H)
    assert R == 2.0
    chk = filtration_oracle(H, R, 10_000, 50)
    assert chk.passed and chk.failures == 0


def test_scaled_henon_filtration_radius():
    g = scale_map(H, 0.9)
    R = filtration_radius(g)
    assert R == pytest.approx(1.9 / 0.81)
    assert filtration_oracle(g, R, 10_000, 50).passed


def test_plain_rescaled_radius_is_too_small_for_scaled_henon():
    # R/mu is the naive guess; the oracle finds monotone-escape failures there
    chk = filtration_oracle(scale_map(H, 0.9), 2.0 / 0.9, 10_000, 50)
    assert not chk.passed and chk.worst_point is not None


def test_filtration_radius_rejects_other_maps():
    with pytest.raises(UnsupportedMapError):
        filtration_radius(rotation_chain(1.0, 2.0))


def test_escape_field_examples():
    g = GridSpec(((-1, 1), (0, 0.1), (-1, 1), (0, 0.1)), (3, 2, 3, 2), fixed=((1, 0.0), (3, 0.0)))
    fld = escape_field(H, g, 2.0)
    P = g.points()
    origin = np.flatnonzero(np.all(P == 0, axis=1))
    assert origin.size == 1 and fld.escape_steps[origin[0]] == -1
    single = GridSpec(((10, 11), (0, 1), (0, 1), (0, 1)), (2, 2, 2, 2), fixed=((1, 0), (2, 0), (3, 0)))
    steps = escape_field(H, single, 2.0).escape_steps
    assert steps[0] >= 0 and steps[0] < 10
    assert steps[0] == iterate(H, [10, 0], 200, 1e3).escaped_at


def test_contraction_field_all_bounded():
    g = GridSpec.cube(2, 0.5, 4)
    fld = escape_field(HALF, g, 1.0)
    assert fld.bounded_mask.all()
    assert len(bounded_cloud(fld)) == g.size


def test_nmax_zero_is_vacuously_bounded():
    g = GridSpec.cube(2, 3.0, 3)
    assert len(bounded_cloud(escape_field(H, g, 2.0, nmax=0))) == g.size


def test_coarse_forward_cloud_contains_origin():
    g = GridSpec.cube(2, 3.0, 7)
    C = bounded_cloud(escape_field(H, g, 2.0))
    assert C.contains_point([0, 0])
    assert C.resolution == pytest.approx(g.cell_diagonal)


def test_backward_field_equals_forward_field_of_inverse():
    g = GridSpec.real_slice(2.5, 64)
    a = escape_field(H, g, 2.0, direction="backward")
    b = escape_field(invert_chain(H), g, 2.0)
    assert np.array_equal(a.escape_steps, b.escape_steps)


def test_all_escaped_is_an_error():
    g = GridSpec(((5, 6),) * 4, (2, 2, 2, 2))
    with pytest.raises(EmptyCloudError):
        bounded_cloud(escape_field(H, g, 2.0))


def test_forward_field_is_invariant_at_grid_scale():
    g = GridSpec.cube(2, 2.0, 9)
    fld = escape_field(H, g, 2.0, nmax=100)
    C = bounded_cloud(fld)
    box = 2.0
    img = H(C.points)
    inside = np.all(np.abs(img.view(float)) <= box, axis=1)
    from invariantlab.compact import directed_distance

    assert directed_distance(img[inside], C) <= g.cell_diagonal


def test_k_compact_points_bounded_both_ways():
    K = k_compact(H, GridSpec.sobol(2, 2.0, 1 << 16, seed=1), 2.0)
    for f in (H, invert_chain(H)):
        for p in K.points:
            assert not iterate(f, p, 200, 1e3).escaped
    assert np.abs(K.points.view(float)).max() <= 2.0


def test_k_compact_of_rotation_is_full_grid():
    g = GridSpec.cube(2, 1.0, 4)
    assert len(k_compact(rotation_chain(1.0, 2.0), g, 5.0)) == g.size


def test_attraction_decay_trivial_cases():
    K = sample_domain(Ball.origin(0.5), 0.25)
    d = attraction_decay(H, K.with_resolution(0.25), K, 0)
    assert d == [0.0]
    d = attraction_decay(H, CompactCloud([[0, 0]], 0.1), K, 5)
    assert len(d) == 6 and max(d) <= K.resolution


def test_attraction_decay_names_escaping_point():
    X = CompactCloud([[0, 0], [10, 0]], 0.1)
    with pytest.raises(EscapeError, match="10"):
        attraction_decay(H, X, CompactCloud([[0, 0]], 0.1), 5)


def test_strict_contraction_power_examples():
    X = sample_domain(Ball.origin(1.0), 0.25)
    K0 = CompactCloud([[0, 0]], 0.25)
    assert find_strict_contraction_power(HALF, X, Ball.origin(2.0), K0) == 1
    with pytest.raises(ContractionCapError):
        find_strict_contraction_power(rotation_chain(1.0, 2**0.5), X, Ball.origin(2.0), K0, cap=20)


def test_strict_contraction_precondition():
    with pytest.raises(InvalidInputError):
        find_strict_contraction_power(
            diagonal_chain(2.0, 2.0), CompactCloud([[1, 0]], 0.1), Ball.origin(3.0), CompactCloud([[0, 0]], 0.1)
        )


def test_core_intersection_identity_and_contraction():
    K = sample_domain(Ball.origin(1.0), 0.2)
    rep = core_intersection(identity_chain(), K, 5)
    assert np.array_equal(rep.cloud.points, K.points)
    rep = core_intersection(HALF, K, 20)
    assert np.linalg.norm(rep.cloud.points, axis=1).max() <= 2**-20 + K.resolution
    assert rep.cloud.contains_point([0, 0])


def test_pgm_output():
    g = GridSpec.real_slice(2.5, 32)
    img = field_to_pgm(escape_field(H, g, 2.0))
    assert img.startswith(b"P5\n32 32\n255\n")
    assert len(img) == len(b"P5\n32 32\n255\n") + 32 * 32
    # bounded pixels are black; the origin sits near the center
    body = np.frombuffer(img[13:], np.uint8).reshape(32, 32)
    assert body[15:17, 15:17].min() == 0
