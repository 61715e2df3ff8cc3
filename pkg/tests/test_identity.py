import numpy as np
import pytest

import transfun as tf
from transfun.batteries import (lipschitz_fields, random_density, rng_from_seed,
                                uniform_grid_measure)


def brute_cell_masses(cov, n, lam):
    centers = cov.level_centers(n)
    out = np.zeros(cov.p(n))
    for x, w in zip(lam.points, lam.weights):
        d = np.linalg.norm(centers - x, axis=1)
        hit = np.nonzero(d <= 1.0 / n)[0]
        out[hit[0]] += w
    return out


# -- point-mass setting -----------------------------------------------------------


def test_pointmass_center_fixed_point():
    cov = tf.build_covering([0.0, 1.0], [5])
    grid = cov.grid(5)
    i = 1
    assert cov.cell_index(5, cov.centers[i]) == i   # center owns its cell here
    phi = tf.identity_pointmass(grid)
    out = tf.apply(phi, tf.delta(cov.centers[i]))
    assert out == tf.delta(cov.centers[i])


def test_pointmass_zero_and_mass_preservation():
    grid = tf.build_covering([0.0, 1.0], [4]).grid(4)
    phi = tf.identity_pointmass(grid)
    assert len(tf.apply(phi, tf.DiscreteMeasure.zero(1))) == 0
    lam = uniform_grid_measure([0.0, 1.0], 10)
    out = tf.apply(phi, lam)
    assert out.total_mass == pytest.approx(lam.total_mass, abs=1e-14)
    assert out.is_positive()


def test_pointmass_matches_cell_masses():
    cov = tf.build_covering([0.0, 1.0], [10])
    grid = cov.grid(10)
    lam = uniform_grid_measure([0.0, 1.0], 100)
    out = tf.apply(tf.identity_pointmass(grid), lam)
    want = brute_cell_masses(cov, 10, lam)
    got = np.zeros(grid.p)
    for pt, w in zip(out.points, out.weights):
        centers = grid.centers()
        i = int(np.nonzero((centers == pt).all(axis=1))[0][0])
        got[i] = w
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_identity_transfunctions_are_markov():
    cov = tf.build_covering([0.0, 1.0], [4])
    grid = cov.grid(4)
    mu = uniform_grid_measure([0.0, 1.0], 12)
    basis = [grid.restrict(mu, i) for i in range(grid.p)]
    basis = [b for b in basis if len(b)]
    for phi in (tf.identity_pointmass(grid), tf.identity_continuous(grid),
                tf.identity_measurable(grid, mu)):
        assert tf.markov_check(phi, basis).passed, phi.label


# -- continuous setting ------------------------------------------------------------


def test_tent_partition_of_unity():
    cov = tf.build_covering([0.0, 1.0], [6])
    grid = cov.grid(6)
    system = tf.TentSystem(cov, 6)
    rng = rng_from_seed(3)
    pts = rng.uniform(-0.5, 1.5, size=(2000, 1))
    m = system.raw_matrix(pts)
    sums = m.sum(axis=1)
    inside = cov.classify(6, pts) >= 0
    # partition of unity on K_n, and nothing anywhere exceeds one
    np.testing.assert_allclose(sums[inside], 1.0, atol=1e-12)
    assert (sums <= 1.0 + 1e-12).all()
    assert (m >= 0.0).all()


def test_tent_support_bound():
    cov = tf.build_covering([0.0, 1.0], [6])
    system = tf.TentSystem(cov, 6)
    samples = cov.cell_samples(6, spacing=1.0 / 64)
    rng = rng_from_seed(4)
    pts = rng.uniform(-0.5, 1.5, size=(800, 1))
    m = system.raw_matrix(pts)
    for i, cell_pts in enumerate(samples):
        active = np.nonzero(m[:, i] > 0)[0]
        if cell_pts.shape[0] == 0:
            assert active.size == 0 or (cov.classify(6, pts[active]) == i).all()
            continue
        for k in active:
            d = np.linalg.norm(cell_pts - pts[k], axis=1).min()
            own = cov.cell_index(6, pts[k]) == i
            assert own or d < 1.0 / 6 + 1e-9

    far = pts[np.abs(pts[:, 0] - 0.5) > 0.5 + 2.0 / 6]
    if far.size:
        assert (system.raw_matrix(far) == 0).all()


def test_continuous_single_active_bump():
    # a point deep inside a cell, far from every other cell, maps to that center
    cov = tf.build_covering([0.0, 1.0], [2])
    grid = cov.grid(2)
    assert grid.p == 1
    phi = tf.identity_continuous(grid)
    out = tf.apply(phi, tf.delta([0.5]))
    assert out == tf.delta(cov.centers[0])


def test_continuous_mass_preservation_inside_kn():
    grid = tf.build_covering([0.0, 1.0], [8]).grid(8)
    phi = tf.identity_continuous(grid)
    lam = uniform_grid_measure([0.0, 1.0], 37)
    out = tf.apply(phi, lam)
    assert out.total_mass == pytest.approx(lam.total_mass, abs=1e-13)


# -- measurable setting -------------------------------------------------------------


def test_measurable_fixed_points():
    cov = tf.build_covering([0.0, 1.0], [4])
    grid = cov.grid(4)
    mu = uniform_grid_measure([0.0, 1.0], 16)
    phi = tf.identity_measurable(grid, mu)
    # the reference measure itself is fixed
    assert (tf.apply(phi, mu) - mu).total_variation <= 1e-14
    # a cell-adapted slice is fixed
    slice2 = grid.restrict(mu, 2)
    assert len(slice2)
    assert (tf.apply(phi, slice2) - slice2).total_variation <= 1e-14


def test_measurable_cell_average_oracle():
    cov = tf.build_covering([0.0, 1.0], [4])
    grid = cov.grid(4)
    mu = uniform_grid_measure([0.0, 1.0], 8)
    f = np.arange(1.0, 9.0)
    lam = tf.to_measure(f, mu)
    out = tf.apply(tf.identity_measurable(grid, mu), lam)
    # oracle: within each cell the density becomes its mu-average
    idx = grid.classify(mu.points)
    want_w = np.zeros(len(mu))
    for i in np.unique(idx):
        sel = idx == i
        avg = np.sum(f[sel] * mu.weights[sel]) / np.sum(mu.weights[sel])
        want_w[sel] = avg * mu.weights[sel]
    want = tf.DiscreteMeasure(mu.points, want_w)
    assert (out - want).total_variation <= 1e-14


def test_measurable_requires_positive_reference():
    grid = tf.build_covering([0.0, 1.0], [4]).grid(4)
    signed = tf.DiscreteMeasure([[0.2], [0.8]], [1.0, -1.0])
    with pytest.raises(ValueError):
        tf.identity_measurable(grid, signed)


# -- weak-gap diagnostic --------------------------------------------------------------


def test_weak_gap_zero_for_constant_sequence():
    lam = uniform_grid_measure([0.0, 1.0], 8)
    battery = lipschitz_fields(rng_from_seed(0), 5, [[0.0, 1.0]])
    table = tf.weak_gap([lam, lam, lam], lam, battery)
    assert table.max_gap() == 0.0


def test_weak_gap_mass_conserving_sequence():
    lam = uniform_grid_measure([0.0, 1.0], 8)
    grid = tf.build_covering([0.0, 1.0], [4]).grid(4)
    seq = [tf.apply(tf.identity_pointmass(grid), lam)]
    table = tf.weak_gap(seq, lam, [tf.Constant(1.0)])
    assert table.max_gap() <= 1e-14


def test_weak_gap_pointmass_rate_with_per_cell_oracle():
    cov = tf.build_covering([0.0, 1.0], [2, 4, 8, 16])
    lam = uniform_grid_measure([0.0, 1.0], 64)
    battery = lipschitz_fields(rng_from_seed(8), 10, [[0.0, 1.0]], lipschitz=1.0)
    seq, per_cell_budget = [], {}
    for n in (2, 4, 8, 16):
        grid = cov.grid(n)
        seq.append(tf.apply(tf.identity_pointmass(grid), lam))
        # per-cell certificate: sum_i max-distance-to-center * cell mass
        idx = grid.classify(lam.points)
        d = np.abs(lam.points - grid.centers()[idx]).ravel()
        budget = sum(d[idx == i].max() * lam.weights[idx == i].sum()
                     for i in np.unique(idx))
        per_cell_budget[n] = budget
    table = tf.weak_gap(seq, lam, battery, steps=[2, 4, 8, 16])
    for n in (2, 4, 8, 16):
        gap = table.max_gap(step=n)
        assert gap <= per_cell_budget[n] + 1e-12
        assert gap <= lam.total_variation / n + 1e-12


def test_weak_gap_requires_battery():
    lam = uniform_grid_measure([0.0, 1.0], 4)
    with pytest.raises(ValueError):
        tf.weak_gap([lam], lam, [])


def test_weak_gap_table_output(tmp_path):
    lam = uniform_grid_measure([0.0, 1.0], 8)
    grid = tf.build_covering([0.0, 1.0], [4]).grid(4)
    seq = [tf.apply(tf.identity_pointmass(grid), lam)]
    table = tf.weak_gap(seq, lam, lipschitz_fields(rng_from_seed(1), 3, [[0.0, 1.0]]),
                        steps=[4], bounds=lambda step, f: (f.lipschitz or 1.0) / step)
    csv_path = tmp_path / "gaps.csv"
    table.write_csv(csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "step,field,gap,bound"
    assert len(lines) == 1 + len(table.rows)
    json_path = tmp_path / "gaps.json"
    table.write_json(json_path)
    assert json_path.exists()
