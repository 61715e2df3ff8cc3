"""Seeded generators for test batteries and fixtures.

Everything here is deterministic given a numpy Generator, so reports built
from these batteries are reproducible from their recorded seed.
"""

import numpy as np

from .fields import Affine, Constant, DistanceField, LinearCombination
from .measure import DiscreteMeasure


def rng_from_seed(seed):
    return np.random.default_rng(int(seed))


def uniform_grid_measure(box, per_axis, total_mass=1.0):
    """Equal weights on an axis-aligned grid of cell midpoints inside the box."""
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = box.reshape(1, 2)
    axes = [box[a, 0] + (np.arange(per_axis) + 0.5) * (box[a, 1] - box[a, 0]) / per_axis
            for a in range(box.shape[0])]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    w = np.full(pts.shape[0], total_mass / pts.shape[0])
    return DiscreteMeasure(pts, w)


def random_measure(rng, box, size, positive=True, total=1.0):
    """Random cloud in the box; weights sum (in absolute value) to `total`."""
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = box.reshape(1, 2)
    pts = rng.uniform(box[:, 0], box[:, 1], size=(size, box.shape[0]))
    w = rng.uniform(0.1, 1.0, size)
    if not positive:
        w = w * rng.choice([-1.0, 1.0], size)
    w = w * (total / np.abs(w).sum())
    return DiscreteMeasure(pts, w)


def random_density(rng, measure, low=0.0, high=2.0):
    return rng.uniform(low, high, len(measure))


def lipschitz_fields(rng, count, box, lipschitz=1.0, include_constant=True):
    """Battery of fields with exact Lipschitz constant at most `lipschitz`.

    Mixes signed multiples of distance-to-anchor fields with affine fields;
    every entry carries its constant and a finite bound over the box.
    """
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = box.reshape(1, 2)
    d = box.shape[0]
    fields = []
    if include_constant:
        fields.append(Constant(1.0, dimension=d))
    while len(fields) < count:
        k = len(fields)
        scale = float(rng.uniform(0.3, 1.0) * lipschitz * rng.choice([-1.0, 1.0]))
        if k % 3 == 2:
            direction = rng.normal(size=d)
            direction = direction / np.linalg.norm(direction)
            f = Affine(scale * direction, float(rng.uniform(-1, 1)), box)
        else:
            margin = 0.25 * (box[:, 1] - box[:, 0])
            anchor = rng.uniform(box[:, 0] - margin, box[:, 1] + margin)
            base = DistanceField(anchor, box=box)
            f = LinearCombination([base], [scale], label=f"dist*{scale:.3g}")
        fields.append(f)
    return fields[:count]


def random_plan_matrix(rng, n_rows, n_cols, total=1.0):
    """Strictly positive coupling matrix with the given total mass."""
    m = rng.uniform(0.1, 1.0, (n_rows, n_cols))
    return m * (total / m.sum())


def random_coupling_matrix(rng, mu_weights, nu_weights, iterations=40):
    """Strictly positive matrix with exactly the prescribed marginals.

    Alternating rescaling of a random seed matrix followed by one rank-one
    correction that zeroes the residual row drift without moving the columns.
    Requires equal totals.
    """
    a = np.asarray(mu_weights, dtype=float).ravel()
    b = np.asarray(nu_weights, dtype=float).ravel()
    total = a.sum()
    if abs(total - b.sum()) > 1e-12 * max(1.0, total):
        raise ValueError("marginals must carry equal mass")
    g = rng.uniform(0.2, 1.0, (a.size, b.size))
    for _ in range(iterations):
        g *= (a / g.sum(axis=1))[:, None]
        g *= (b / g.sum(axis=0))[None, :]
    g = g + np.outer(a - g.sum(axis=1), b) / total
    return g


def random_markov_transfunction(rng, mu, nu, label="seeded"):
    """Markov instructions between two positive measures of equal mass.

    One term per source atom: the normalized atom indicator paired with a
    random positive slice of nu, so the atom-level coupling has marginals
    exactly (mu, nu).
    """
    from .fields import LinearCombination, PointSetIndicator
    from .transfunction import SimpleTransfunction
    gamma = random_coupling_matrix(rng, mu.weights, nu.weights)
    terms = []
    for k in range(len(mu)):
        f = LinearCombination([PointSetIndicator(mu.points[k:k + 1])],
                              [1.0 / mu.weights[k]], label=f"atom{k}")
        terms.append((f, DiscreteMeasure(nu.points, gamma[k])))
    phi = SimpleTransfunction(terms, dimension_in=mu.dimension,
                              dimension_out=nu.dimension, label=label)
    phi.coupling_matrix = gamma
    return phi


def measures_on_cells(grid, cell_values, representatives=None):
    """Measure with prescribed per-cell masses, supported on cell members."""
    reps = representatives or grid.representatives()
    pts, w = [], []
    for i, v in enumerate(np.asarray(cell_values, dtype=float)):
        if v == 0.0:
            continue
        if i not in reps:
            raise ValueError(f"cell {i} has no representative point")
        pts.append(reps[i])
        w.append(v)
    if not pts:
        return DiscreteMeasure.zero(grid.dimension)
    return DiscreteMeasure(np.array(pts), np.array(w), dimension=grid.dimension)
