import numpy as np
import pytest

import transfun as tf
from transfun.batteries import lipschitz_fields, random_measure, rng_from_seed


def test_coalesce_and_prune():
    m = tf.DiscreteMeasure([[0.0], [1.0], [0.0]], [1.0, 2.0, -1.0])
    assert len(m) == 1
    assert m.weights[0] == 2.0
    # exact zeros vanish
    z = tf.DiscreteMeasure([[3.0]], [0.0])
    assert len(z) == 0
    # tiny relative weights are pruned during coalescing
    m2 = tf.DiscreteMeasure([[0.0], [1.0]], [1.0, 1e-17])
    assert len(m2) == 1


def test_support_sorted_and_immutable():
    m = tf.DiscreteMeasure([[2.0], [0.0], [1.0]], [1, 1, 1])
    assert list(m.points.ravel()) == [0.0, 1.0, 2.0]
    with pytest.raises(ValueError):
        m.points[0] = 5.0
    with pytest.raises(AttributeError):
        m.weights = np.zeros(3)


def test_validation_errors():
    with pytest.raises(ValueError):
        tf.DiscreteMeasure([[np.inf]], [1.0])
    with pytest.raises(ValueError):
        tf.DiscreteMeasure([[0.0]], [np.nan])
    with pytest.raises(ValueError):
        tf.DiscreteMeasure([[0.0], [1.0]], [1.0])
    with pytest.raises(tf.DimensionMismatch):
        tf.DiscreteMeasure(np.zeros((2, 4)), [1.0, 1.0])


def test_integrate_examples():
    lam = tf.DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    assert tf.integrate(tf.Constant(1.0), lam) == pytest.approx(1.0, abs=1e-15)

    cov = tf.build_covering([0.0, 1.0], [4])
    empty_cell_field = tf.CellIndicator(cov, 4, [2])   # cell away from the support
    lam2 = tf.DiscreteMeasure([[0.4], [0.6]], [1.0, 1.0])
    assert tf.integrate(empty_cell_field, lam2) == 0.0

    ident = tf.Affine([1.0], 0.0, [[0.0, 2.0]])
    lam3 = tf.DiscreteMeasure([[0.0], [2.0]], [1.0, 0.5])
    assert tf.integrate(ident, lam3) == pytest.approx(1.0, abs=1e-15)


def test_integrate_dimension_mismatch():
    lam = tf.DiscreteMeasure([[0.0, 0.0]], [1.0])
    f = tf.Affine([1.0], 0.0, [[0.0, 1.0]])
    with pytest.raises(tf.DimensionMismatch):
        tf.integrate(f, lam)


def test_jordan_examples():
    pos, neg = tf.jordan(tf.DiscreteMeasure([[0.0], [1.0]], [1.0, -2.0]))
    assert list(pos.points.ravel()) == [0.0] and pos.weights[0] == 1.0
    assert list(neg.points.ravel()) == [1.0] and neg.weights[0] == 2.0

    m = tf.DiscreteMeasure([[0.0], [1.0]], [1.0, 2.0])
    pos, neg = tf.jordan(m)
    assert pos == m and len(neg) == 0

    pos, neg = tf.jordan(tf.DiscreteMeasure.zero(1))
    assert len(pos) == 0 and len(neg) == 0


def test_jordan_variation_split():
    rng = rng_from_seed(2)
    for _ in range(20):
        lam = random_measure(rng, [0.0, 1.0], 8, positive=False)
        pos, neg = tf.jordan(lam)
        assert (pos - neg - lam).total_variation <= 1e-15
        assert abs(pos.total_variation + neg.total_variation - lam.total_variation) <= 1e-15


def test_density_correspondence_round_trip():
    mu = tf.DiscreteMeasure([[0.0], [1.0]], [0.5, 0.25])
    # hand-checked: weights (2, -1) * (0.5, 0.25) and the L1 norm identity
    lam = tf.to_measure([2.0, -1.0], mu)
    np.testing.assert_allclose(lam.weights, [1.0, -0.25])
    assert lam.total_variation == pytest.approx(1.25)
    assert lam.total_variation == pytest.approx(abs(2.0) * 0.5 + abs(-1.0) * 0.25)

    np.testing.assert_allclose(tf.to_density(lam, mu), [2.0, -1.0])
    # f == 1 reproduces mu, and the inverse direction gives the unit density
    assert tf.to_measure(np.ones(2), mu) == mu
    np.testing.assert_allclose(tf.to_density(mu, mu), [1.0, 1.0])


def test_density_positivity_and_isometry_property():
    rng = rng_from_seed(5)
    mu = random_measure(rng, [0.0, 1.0], 12, positive=True)
    for _ in range(50):
        f = rng.uniform(0.0, 3.0, len(mu))
        lam = tf.to_measure(f, mu)
        assert lam.is_positive()
        l1 = float(np.sum(np.abs(f) * mu.weights))
        assert lam.total_variation == pytest.approx(l1, rel=1e-12)


def test_to_density_absolute_continuity_error():
    mu = tf.DiscreteMeasure([[0.0]], [1.0])
    lam = tf.DiscreteMeasure([[0.5]], [1.0])
    with pytest.raises(tf.AbsoluteContinuityError) as err:
        tf.to_density(lam, mu)
    assert err.value.point == (0.5,)


def test_pushforward_examples():
    lam = tf.DiscreteMeasure([[0.0], [1.0]], [1.0, 1.0])
    assert tf.pushforward(lambda p: p, lam) == lam

    collapsed = tf.pushforward(lambda p: np.full_like(p, 7.0), lam)
    assert len(collapsed) == 1
    assert collapsed.total_mass == pytest.approx(lam.total_mass)

    shifted = tf.pushforward(lambda p: p + 1.0, lam)
    assert list(shifted.points.ravel()) == [1.0, 2.0]
    np.testing.assert_allclose(shifted.weights, [1.0, 1.0])


def test_pushforward_pairing_identity():
    rng = rng_from_seed(9)
    lam = random_measure(rng, [0.0, 1.0], 10, positive=False)
    shift = lambda p: 2.0 * p + 0.25
    for g in lipschitz_fields(rng, 6, [[0.0, 3.0]]):
        lhs = tf.integrate(g, tf.pushforward(shift, lam))
        rhs = tf.integrate(tf.Pullback(g, shift), lam)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_density_multiply_examples():
    lam = tf.DiscreteMeasure([[2.0]], [0.5])
    assert tf.density_multiply(tf.Constant(1.0), lam) == lam
    assert len(tf.density_multiply(tf.Constant(0.0), lam)) == 0
    out = tf.density_multiply(tf.Affine([1.0], 0.0, [[0.0, 3.0]]), lam)
    np.testing.assert_allclose(out.weights, [1.0])

    # pairing identity <g, f*lam> = <g*f, lam>
    rng = rng_from_seed(4)
    lam = random_measure(rng, [0.0, 1.0], 8, positive=False)
    f = tf.DistanceField([0.3], box=[[0.0, 1.0]])
    for g in lipschitz_fields(rng, 5, [[0.0, 1.0]]):
        lhs = tf.integrate(g, tf.density_multiply(f, lam))
        rhs = tf.integrate(tf.PointwiseProduct(g, f), lam)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_pairing_bilinearity():
    rng = rng_from_seed(13)
    lam1 = random_measure(rng, [0.0, 1.0], 7, positive=False)
    lam2 = random_measure(rng, [0.0, 1.0], 5, positive=False)
    f1, f2 = lipschitz_fields(rng, 2, [[0.0, 1.0]], include_constant=False)
    a, b = 1.7, -0.6
    combo_field = tf.LinearCombination([f1, f2], [a, b])
    lhs = tf.integrate(combo_field, lam1)
    rhs = a * tf.integrate(f1, lam1) + b * tf.integrate(f2, lam1)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    combo_measure = a * lam1 + b * lam2
    lhs = tf.integrate(f1, combo_measure)
    rhs = a * tf.integrate(f1, lam1) + b * tf.integrate(f1, lam2)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_pairing_bound():
    rng = rng_from_seed(21)
    for _ in range(25):
        lam = random_measure(rng, [0.0, 1.0], 6, positive=False)
        for f in lipschitz_fields(rng, 4, [[0.0, 1.0]]):
            assert abs(tf.integrate(f, lam)) <= f.bound * lam.total_variation + 1e-12


def test_cell_indicator_separation():
    # measures with equal pairings against all cell indicators of a level
    # that isolates their supports must be equal
    cov = tf.build_covering([0.0, 1.0], [16])
    grid = cov.grid(16)
    pts = np.array([[0.1], [0.4], [0.9]])
    idx = grid.classify(pts)
    assert len(set(idx.tolist())) == 3          # the level separates the points
    lam1 = tf.DiscreteMeasure(pts, [0.2, 0.3, 0.5])
    lam2 = tf.DiscreteMeasure(pts, [0.2, 0.3, 0.5])
    pair1 = [tf.integrate(grid.indicator(i), lam1) for i in range(grid.p)]
    pair2 = [tf.integrate(grid.indicator(i), lam2) for i in range(grid.p)]
    np.testing.assert_allclose(pair1, pair2)
    assert lam1 == lam2


def test_measure_json_round_trip(tmp_path):
    rng = rng_from_seed(3)
    m = random_measure(rng, [[0.0, 1.0], [0.0, 1.0]], 6, positive=False)
    path = tmp_path / "m.json"
    tf.write_measure(m, path)
    again = tf.read_measure(path)
    assert again == m


def test_measure_json_validation(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"dimension": 1, "points": [[0.0], [1.0]], "weights": [1.0]}')
    with pytest.raises(ValueError):
        tf.read_measure(path)
    path.write_text('{"dimension": 2, "points": [[0.0]], "weights": [1.0]}')
    with pytest.raises(ValueError):
        tf.read_measure(path)
