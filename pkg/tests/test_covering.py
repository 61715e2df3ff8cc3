import json

import numpy as np
import pytest

import transfun as tf
from transfun.batteries import rng_from_seed, uniform_grid_measure


def brute_first_hit(centers, r, x):
    """Reference classification: scan balls in order, return the first hit."""
    for i, c in enumerate(centers):
        if np.linalg.norm(np.asarray(x) - c) <= r:
            return i
    return -1


def test_single_ball_covers_unit_interval():
    cov = tf.build_covering([0.0, 1.0], [1])
    # radius 1 exceeds the box, so the centered ball alone suffices
    assert cov.p(1) == 1
    assert cov.centers[0, 0] == pytest.approx(0.5)


def test_level4_prefix_and_cover_sample():
    cov = tf.build_covering([0.0, 1.0], [4])
    centers = cov.level_centers(4)
    # dyadic centers at spacing at most 2 * (1/4)
    gaps = np.diff(np.sort(centers.ravel()))
    assert gaps.max() <= 0.5 + 1e-15
    xs = np.linspace(0.0, 1.0, 1000).reshape(-1, 1)
    dmin = np.abs(xs - centers.T).min(axis=1)
    assert (dmin <= 0.25 + 1e-12).all()


def test_kn_contains_box_sample():
    rng = rng_from_seed(0)
    for box in ([0.0, 1.0], [[-1.0, 2.0]], [[0.0, 1.0], [0.0, 1.0]]):
        cov = tf.build_covering(box, [3, 5])
        b = np.asarray(box, dtype=float).reshape(-1, 2)
        pts = rng.uniform(b[:, 0], b[:, 1], size=(500, b.shape[0]))
        for n in (3, 5):
            assert (cov.classify(n, pts) >= 0).all()


def test_minimal_prefix_is_minimal():
    # dropping the last ball of the prefix must break the cover
    for n in (2, 3, 4, 7):
        cov = tf.build_covering([0.0, 1.0], [n])
        p = cov.p(n)
        if p == 1:
            continue
        centers = cov.centers[:p - 1]
        xs = np.linspace(0.0, 1.0, 4001).reshape(-1, 1)
        dmin = np.abs(xs - centers.T).min(axis=1)
        assert dmin.max() > 1.0 / n - 1e-12


def test_first_hit_rules():
    cov = tf.build_covering([0.0, 1.0], [4])
    # a center itself belongs to the first ball that reaches it
    assert cov.cell_index(4, [0.5]) == 0
    # far outside the box: no cell
    assert cov.cell_index(4, [5.0]) is None
    # boundary point lying in two closed balls takes the smaller index:
    # 0.375 is at distance 0.125 <= 0.25 from both 0.5 (index 0) and 0.25 (index 1)
    assert cov.cell_index(4, [0.375]) == 0


def test_classify_matches_brute_force():
    rng = rng_from_seed(7)
    cov = tf.build_covering([[0.0, 1.0], [0.0, 1.0]], [2, 4])
    pts = rng.uniform(-0.2, 1.2, size=(300, 2))
    for n in (2, 4):
        got = cov.classify(n, pts)
        centers = cov.level_centers(n)
        want = [brute_first_hit(centers, 1.0 / n, x) for x in pts]
        np.testing.assert_array_equal(got, want)


def test_cells_partition_kn():
    cov = tf.build_covering([0.0, 1.0], [8])
    xs = np.linspace(-0.5, 1.5, 2000).reshape(-1, 1)
    idx = cov.classify(8, xs)
    centers = cov.level_centers(8)
    hit = (np.abs(xs - centers.T) <= 1.0 / 8).any(axis=1)
    # exactly the points of K_n get a cell, and only one (classify is a function)
    assert ((idx >= 0) == hit).all()


def test_diameter_control():
    cov = tf.build_covering([[0.0, 1.0], [0.0, 1.0]], [4])
    rng = rng_from_seed(1)
    pts = rng.uniform(0, 1, size=(500, 2))
    idx = cov.classify(4, pts)
    centers = cov.level_centers(4)
    d = np.linalg.norm(pts - centers[idx], axis=1)
    assert (d <= 0.25 + 1e-15).all()


def test_cell_masses_examples():
    cov = tf.build_covering([0.0, 1.0], [5])
    grid = cov.grid(5)
    # a point mass at a center that owns its cell
    assert cov.cell_index(5, cov.centers[1]) == 1
    masses = grid.masses(tf.delta(cov.centers[1]))
    expected = np.zeros(grid.p)
    expected[1] = 1.0
    np.testing.assert_allclose(masses, expected)

    # two points sharing a cell sum there
    two = tf.DiscreteMeasure([[0.45], [0.55]], [0.25, 0.5])
    idx = grid.classify(two.points)
    assert idx[0] == idx[1]
    masses = grid.masses(two)
    assert masses[idx[0]] == pytest.approx(0.75)


def test_cell_masses_against_scan_oracle():
    cov = tf.build_covering([0.0, 1.0], [4])
    lam = uniform_grid_measure([0.0, 1.0], 4)
    masses = cov.cell_masses(4, lam)
    centers = cov.level_centers(4)
    want = np.zeros(cov.p(4))
    for x, w in zip(lam.points, lam.weights):
        want[brute_first_hit(centers, 0.25, x)] += w
    np.testing.assert_allclose(masses, want)
    assert masses.sum() == pytest.approx(lam.total_mass)


def test_cell_masses_outside_error():
    cov = tf.build_covering([0.0, 1.0], [4])
    stray = tf.DiscreteMeasure([[0.5], [9.0]], [1.0, 1.0])
    with pytest.raises(tf.CoverageError) as err:
        cov.cell_masses(4, stray)
    assert (9.0,) in err.value.points


def test_ungenerated_level_errors():
    cov = tf.build_covering([0.0, 1.0], [4])
    with pytest.raises(tf.TransfunError):
        cov.classify(3, np.array([[0.5]]))
    with pytest.raises(tf.TransfunError):
        cov.grid(6).masses(tf.delta([0.5]))


def test_cell_samples_are_members():
    cov = tf.build_covering([[0.0, 1.0], [0.0, 1.0]], [4])
    groups = cov.cell_samples(4)
    assert len(groups) == cov.p(4)
    for i, g in enumerate(groups):
        if g.shape[0]:
            np.testing.assert_array_equal(cov.classify(4, g), i)


def test_representatives():
    cov = tf.build_covering([0.0, 1.0], [8])
    reps = cov.cell_representatives(8)
    for i, pt in reps.items():
        assert cov.cell_index(8, pt) == i


def test_summary_deterministic(tmp_path):
    cov1 = tf.build_covering([0.0, 1.0], [2, 4])
    cov2 = tf.build_covering([0.0, 1.0], [2, 4])
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    cov1.write_summary(p1)
    cov2.write_summary(p2)
    assert p1.read_bytes() == p2.read_bytes()
    data = json.loads(p1.read_text())
    assert data["levels"] == {"2": cov1.p(2), "4": cov1.p(4)}


def test_three_dimensional_smoke():
    cov = tf.build_covering([[0.0, 1.0]] * 3, [2])
    rng = rng_from_seed(11)
    pts = rng.uniform(0, 1, size=(200, 3))
    assert (cov.classify(2, pts) >= 0).all()


def test_bad_boxes():
    with pytest.raises(ValueError):
        tf.build_covering([[1.0, 0.0]], [2])
    with pytest.raises(ValueError):
        tf.build_covering([0.0, 1.0], [])
    with pytest.raises(ValueError):
        tf.build_covering([0.0, 1.0], [0])
