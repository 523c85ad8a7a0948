import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invariantlab.geometry import DimensionError, eigenvalues_2x2
from invariantlab.maps import (
    Affine,
    AutomorphismChain,
    DegreeOverflowError,
    MapParseError,
    NonInvertibleError,
    Polynomial,
    PolynomialMap,
    as_polymap,
    compose,
    diagonal_chain,
    evaluate,
    henon,
    identity_chain,
    invert_chain,
    iterate,
    jacobian,
    linear_chain,
    parse_map,
    parse_polynomial,
    power,
    scale_map,
)

from .conftest import random_points

seeds = st.integers(0, 2**31 - 1)


def random_polymap(seed, degree=3):
    r = np.random.default_rng(seed)
    comps = []
    for _ in range(2):
        terms = {
            (i, j): complex(*r.standard_normal(2))
            for i in range(degree + 1)
            for j in range(degree + 1 - i)
            if r.random() < 0.6
        }
        comps.append(Polynomial(2, terms))
    return PolynomialMap(tuple(comps))


def fd_jacobian(f, p, h=1e-6):
    k = p.shape[0]
    J = np.zeros((k, k), complex)
    for j in range(k):
        e = np.zeros(k, complex)
        e[j] = h
        J[:, j] = (evaluate(f, p + e) - evaluate(f, p - e)) / (2 * h)
    return J


def test_henon_fixes_origin_exactly():
    assert np.array_equal(evaluate(henon(), [0, 0]), [0, 0])


def test_henon_at_one_one():
    assert np.array_equal(evaluate(henon(), [1, 1]), [2, 1])


def test_identity_chain_is_identity(rng):
    P = random_points(rng, 50)
    assert np.array_equal(evaluate(identity_chain(), P), P)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        evaluate(henon(), [1, 2, 3])


def test_henon_jacobian_examples():
    assert np.array_equal(jacobian(henon(), [3, 0]), [[6, 1], [1, 0]])
    assert np.array_equal(jacobian(henon(), [0, 0]), [[0, 1], [1, 0]])


def test_linear_jacobian_is_matrix(rng):
    A = np.array([[1, 2j], [0.5, -1]])
    for p in random_points(rng, 5):
        assert np.array_equal(jacobian(linear_chain(A), p), A)


@pytest.mark.parametrize("maker", [lambda s: henon(), random_polymap])
@given(seed=seeds)
def test_jacobian_matches_finite_differences(maker, seed):
    f = maker(seed)
    r = np.random.default_rng(seed)
    for _ in range(5):
        p = r.uniform(0, 1, 2) * np.exp(2j * np.pi * r.random(2))
        J = jacobian(f, p)
        assert np.abs(J - fd_jacobian(f, p)).max() <= 1e-7 * (1 + np.linalg.norm(J))


@given(seed=seeds)
def test_henon_determinant_is_minus_one(seed):
    P = random_points(np.random.default_rng(seed), 20, scale=3.0)
    dets = np.linalg.det(jacobian(henon(), P))
    assert np.abs(dets + 1).max() <= 1e-12


def test_henon_determinant_symbolic():
    f = as_polymap(henon())
    (a, b), (c, d) = [[p.derivative(j) for j in range(2)] for p in f.components]
    det = (a * d - b * c).cleaned()
    assert det == Polynomial.constant(2, -1)


def test_scale_map_identity_scaling(rng):
    P = random_points(rng, 100)
    assert np.array_equal(evaluate(scale_map(henon(), 1.0), P), evaluate(henon(), P))


def test_scale_map_jacobian_at_origin():
    g = scale_map(henon(), 0.9)
    J = jacobian(g, [0, 0])
    assert np.allclose(J, [[0, 0.9], [0.9, 0]], atol=0)
    assert np.abs(J - fd_jacobian(g, np.zeros(2, complex))).max() <= 1e-8
    assert eigenvalues_2x2(J).moduli == pytest.approx((0.9, 0.9), abs=1e-15)


@given(seed=seeds, mu=st.floats(0.01, 1.0))
def test_scale_map_matches_prescaled_evaluation(seed, mu):
    P = random_points(np.random.default_rng(seed), 30)
    f = henon()
    assert np.array_equal(evaluate(scale_map(f, mu), P), evaluate(f, mu * P))
    pm = random_polymap(seed)
    assert np.array_equal(evaluate(scale_map(pm, mu), P), evaluate(pm, mu * P))


def test_scale_map_rejects_nonpositive():
    with pytest.raises(ValueError):
        scale_map(henon(), 0.0)


def test_henon_inverse_closed_form(rng):
    P = random_points(rng, 100)
    u, v = P[:, 0], P[:, 1]
    assert np.allclose(evaluate(invert_chain(henon()), P), np.stack([v, u - v**2], axis=1), rtol=1e-14, atol=1e-14)


def test_affine_inverse():
    A = np.array([[2, 1], [0, 1j]])
    b = np.array([1, -1j])
    inv = Affine(A, b).inverse()
    Ai = np.linalg.inv(A)
    assert np.allclose(inv.A, Ai) and np.allclose(inv.b, -Ai @ b)


def test_singular_affine_rejected():
    with pytest.raises(NonInvertibleError):
        AutomorphismChain((Affine(np.array([[1, 1], [1, 1]]), np.zeros(2)),))


def test_identity_inverse_is_identity(rng):
    P = random_points(rng, 10)
    assert np.array_equal(evaluate(invert_chain(identity_chain()), P), P)


@given(seed=seeds)
def test_inverse_round_trip(seed):
    r = np.random.default_rng(seed)
    P = r.uniform(0, 10, (50, 2)) * np.exp(2j * np.pi * r.random((50, 2)))
    f = compose(henon(), linear_chain([[1, 0.5], [0, 1j]], [0.1, 0]))
    fi = invert_chain(f)
    assert np.abs(evaluate(f, evaluate(fi, P)) - P).max() <= 1e-10 * max(1.0, np.abs(P).max() ** 2)
    assert np.abs(evaluate(compose(f, fi), P[:, :] / 10) - P / 10).max() <= 1e-12


def test_chain_expansion_matches_evaluation(rng):
    f = compose(henon(), compose(linear_chain([[1, 2], [0, 1]]), henon()))
    P = random_points(rng, 100, scale=0.7)
    assert np.abs(evaluate(as_polymap(f), P) - evaluate(f, P)).max() <= 1e-12 * (1 + np.abs(evaluate(f, P)).max())


def test_compose_examples(rng):
    f = henon()
    P = random_points(rng, 20)
    assert np.array_equal(evaluate(compose(f, identity_chain()), P), evaluate(f, P))
    assert np.array_equal(evaluate(compose(f, f), [0, 0]), [0, 0])
    assert np.array_equal(evaluate(compose(f, f), [1, 0]), [2, 1])
    assert np.array_equal(evaluate(power(f, 2), [1, 0]), [2, 1])


@given(seed=seeds)
def test_compose_associative(seed):
    f, g, h = random_polymap(seed, 2), random_polymap(seed + 1, 2), random_polymap(seed + 2, 2)
    P = random_points(np.random.default_rng(seed), 20, scale=0.5)
    a = evaluate(compose(compose(f, g), h), P)
    b = evaluate(compose(f, compose(g, h)), P)
    assert np.abs(a - b).max() <= 1e-10 * (1 + np.abs(a).max())
    seq = evaluate(f, evaluate(g, evaluate(h, P)))
    assert np.abs(a - seq).max() <= 1e-10 * (1 + np.abs(seq).max())


def test_degree_overflow_names_bound():
    f = as_polymap(henon())
    with pytest.raises(DegreeOverflowError, match="16"):
        power(f, 5)
    assert power(f, 4).degree == 16


def test_iterate_fixed_point():
    rec = iterate(henon(), [0, 0], 100, 10.0)
    assert not rec.escaped and rec.points.shape == (101, 2) and not rec.points.any()


def test_iterate_escape_golden_step():
    rec = iterate(henon(), [10, 0], 50, 100.0)
    # (10,0) -> (100,10) has sup norm exactly 100, (10010,100) crosses
    assert rec.escaped_at == 2


def test_iterate_contraction():
    rec = iterate(diagonal_chain(0.5, 0.5), [1, 1], 10, 10.0)
    assert not rec.escaped
    assert np.array_equal(rec.points[-1], [2**-10, 2**-10])


def test_parse_map_literals(rng):
    P = random_points(rng, 10)
    assert np.array_equal(evaluate(parse_map("henon"), P), evaluate(henon(), P))
    assert np.allclose(evaluate(parse_map("linear: [[1,2],[3,4]]"), P), P @ np.array([[1, 2], [3, 4]]).T)
    rot = parse_map("rotation: 1, 2")
    assert np.allclose(evaluate(rot, P), P * np.exp(1j * np.array([1, 2])))
    chain = parse_map("chain: shear axis=1 poly=z^2; swap")
    assert np.array_equal(evaluate(chain, P), evaluate(henon(), P))
    sq = parse_map("henon^2")
    assert np.array_equal(evaluate(sq, [1, 0]), [2, 1])


def test_parse_polynomial():
    p = parse_polynomial("z^2 + 3*w - 1j")
    assert p.terms == {(0, 0): -1j, (0, 1): 3, (2, 0): 1}


@pytest.mark.parametrize("text", ["", "nonsense", "linear: [[1,2]]", "chain: shear axis=5 poly=z", "henon^-1"])
def test_parse_map_errors(text):
    with pytest.raises(MapParseError):
        parse_map(text)
