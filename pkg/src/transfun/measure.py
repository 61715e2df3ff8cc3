"""Finite signed measures on low-dimensional Euclidean space, stored as weighted point clouds.

A measure is a finite list of distinct support points with signed weights.
All operations are pure: they return new measures and never mutate inputs.
"""

import json

import numpy as np

from .errors import AbsoluteContinuityError, DimensionMismatch

# Weights smaller than this fraction of the total variation are dropped when
# supports are merged, so repeated algebra cannot grow the support without bound.
PRUNE_REL = 1e-15

_MAX_DIM = 3


def _as_point_array(points, dimension=None):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        # A flat array is a list of 1-d points unless told otherwise.
        if dimension is not None and dimension > 1 and pts.shape[0] == dimension:
            pts = pts.reshape(1, -1)
        else:
            pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise ValueError("points must form an (n, d) array")
    return pts


class DiscreteMeasure:
    """Finite signed measure with finite support in dimension 1, 2 or 3.

    Construction coalesces duplicate support points (exact coordinate
    equality) by summing their weights, drops weights that vanish relative
    to the total variation, and orders the support lexicographically so that
    equal measures have identical storage.
    """

    __slots__ = ("points", "weights", "dimension")

    def __init__(self, points, weights, dimension=None):
        pts = _as_point_array(points, dimension)
        w = np.asarray(weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        dim = pts.shape[1] if pts.size else (dimension or 1)
        if dimension is not None and dim != dimension:
            raise DimensionMismatch(f"points have dimension {dim}, expected {dimension}")
        if not 1 <= dim <= _MAX_DIM:
            raise DimensionMismatch(f"dimension {dim} not supported (1..{_MAX_DIM})")
        if pts.size and not np.isfinite(pts).all():
            raise ValueError("support points must be finite")
        if w.size and not np.isfinite(w).all():
            raise ValueError("weights must be finite")

        if pts.shape[0]:
            merged = {}
            for k in range(pts.shape[0]):
                key = tuple(pts[k])
                merged[key] = merged.get(key, 0.0) + w[k]
            keys = list(merged.keys())
            vals = np.array([merged[k] for k in keys], dtype=float)
            arr = np.array(keys, dtype=float).reshape(-1, dim)
            cutoff = PRUNE_REL * np.abs(vals).sum()
            keep = np.abs(vals) > cutoff
            arr, vals = arr[keep], vals[keep]
            if arr.shape[0]:
                order = np.lexsort(arr.T[::-1])
                arr, vals = arr[order], vals[order]
        else:
            arr = np.zeros((0, dim))
            vals = np.zeros(0)

        arr.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "points", arr)
        object.__setattr__(self, "weights", vals)
        object.__setattr__(self, "dimension", dim)

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteMeasure is immutable")

    # -- basic queries ----------------------------------------------------

    def __len__(self):
        return self.points.shape[0]

    @property
    def total_mass(self):
        """lambda(X), the signed total."""
        return float(self.weights.sum())

    @property
    def total_variation(self):
        """||lambda||, the sum of absolute weights."""
        return float(np.abs(self.weights).sum())

    def is_positive(self, tol=0.0):
        return bool(np.all(self.weights >= -tol))

    def support_keys(self):
        """Support points as hashable tuples, in storage order."""
        return [tuple(p) for p in self.points]

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (self.dimension == other.dimension
                and self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    def __repr__(self):
        return (f"DiscreteMeasure(dim={self.dimension}, n={len(self)}, "
                f"mass={self.total_mass:.6g}, tv={self.total_variation:.6g})")

    # -- linear structure -------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        if other.dimension != self.dimension:
            raise DimensionMismatch("cannot add measures of different dimension")
        return DiscreteMeasure(
            np.vstack([self.points, other.points]),
            np.concatenate([self.weights, other.weights]),
            dimension=self.dimension,
        )

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return DiscreteMeasure(self.points, float(scalar) * self.weights, dimension=self.dimension)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def restrict(self, mask):
        """Measure keeping only the support points selected by a boolean mask."""
        mask = np.asarray(mask, dtype=bool)
        return DiscreteMeasure(self.points[mask], self.weights[mask], dimension=self.dimension)

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "points": [list(p) for p in self.points],
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, data):
        dim = int(data["dimension"])
        pts = data["points"]
        w = data["weights"]
        if len(pts) != len(w):
            raise ValueError(f"{len(pts)} points but {len(w)} weights in measure file")
        for row in pts:
            if len(row) != dim:
                raise ValueError(f"point {row} does not match dimension {dim}")
        return cls(np.array(pts, dtype=float).reshape(-1, dim), w, dimension=dim)

    @classmethod
    def zero(cls, dimension):
        return cls(np.zeros((0, dimension)), [], dimension=dimension)


def delta(point, weight=1.0):
    """Point mass at the given point."""
    pts = _as_point_array(point)
    if pts.shape[0] != 1:
        pts = np.asarray(point, dtype=float).reshape(1, -1)
    return DiscreteMeasure(pts, [weight])


def read_measure(path):
    with open(path) as fh:
        data = json.load(fh)
    return DiscreteMeasure.from_dict(data)


def write_measure(measure, path):
    with open(path, "w") as fh:
        json.dump(measure.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- pairing and the density correspondence --------------------------------


def integrate(field, measure):
    """<f, lambda>: the weighted sum of field values over the support."""
    fd = getattr(field, "dimension", None)
    if fd is not None and fd != measure.dimension:
        raise DimensionMismatch(f"field dimension {fd} != measure dimension {measure.dimension}")
    if len(measure) == 0:
        return 0.0
    return float(np.dot(field(measure.points), measure.weights))


def jordan(measure):
    """Split into (positive part, negative part) with disjoint supports."""
    pos = measure.weights > 0
    neg = measure.weights < 0
    lam_pos = DiscreteMeasure(measure.points[pos], measure.weights[pos], dimension=measure.dimension)
    lam_neg = DiscreteMeasure(measure.points[neg], -measure.weights[neg], dimension=measure.dimension)
    return lam_pos, lam_neg


def to_measure(density, mu):
    """Send a density vector over supp(mu) to the measure with that density.

    `density` is aligned with `mu.points` (storage order). The result has
    weight density[k] * mu.weights[k] at each support point.
    """
    f = np.asarray(density, dtype=float).ravel()
    if f.shape[0] != len(mu):
        raise ValueError(f"density has {f.shape[0]} values for {len(mu)} support points")
    return DiscreteMeasure(mu.points, f * mu.weights, dimension=mu.dimension)


def to_density(lam, mu):
    """Invert `to_measure`: the density of lam with respect to mu.

    Every support point of lam must carry nonzero mu-weight; otherwise the
    offending point is reported. Returns a vector aligned with mu.points.
    """
    index = {key: k for k, key in enumerate(mu.support_keys())}
    out = np.zeros(len(mu))
    for k, key in enumerate(lam.support_keys()):
        j = index.get(key)
        if j is None or mu.weights[j] == 0.0:
            raise AbsoluteContinuityError(key)
        out[j] = lam.weights[k] / mu.weights[j]
    return out


def pushforward(map_fn, lam):
    """Transport mass along a point map; colliding images are merged.

    `map_fn` takes an (n, d) array of points and returns the mapped points.
    """
    if len(lam) == 0:
        return lam
    images = np.asarray(map_fn(lam.points), dtype=float)
    if images.ndim == 1:
        images = images.reshape(len(lam), -1)
    return DiscreteMeasure(images, lam.weights.copy())


def density_multiply(field, lam):
    """The measure f*lambda with weight f(p) * w at each support point p."""
    fd = getattr(field, "dimension", None)
    if fd is not None and fd != lam.dimension:
        raise DimensionMismatch(f"field dimension {fd} != measure dimension {lam.dimension}")
    if len(lam) == 0:
        return lam
    return DiscreteMeasure(lam.points, field(lam.points) * lam.weights, dimension=lam.dimension)
