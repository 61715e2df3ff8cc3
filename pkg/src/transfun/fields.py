"""Evaluatable bounded test functions.

Every field evaluates vectorized on an (n, d) array of points and carries an
explicit bound >= sup|f|. Fields that are Lipschitz advertise their constant
so convergence diagnostics can budget rates.
"""

import numpy as np


def _pts(x, dimension=None):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        if dimension is not None and dimension > 1 and arr.shape[0] == dimension:
            arr = arr.reshape(1, -1)
        else:
            arr = arr.reshape(-1, 1)
    elif arr.ndim == 0:
        arr = arr.reshape(1, 1)
    return arr


class ScalarField:
    """Base class: subclasses implement `values(pts)` on an (n, d) array."""

    bound = np.inf
    dimension = None
    lipschitz = None
    label = ""

    def values(self, pts):
        raise NotImplementedError

    def __call__(self, x):
        pts = _pts(x, self.dimension)
        out = np.asarray(self.values(pts), dtype=float)
        return out

    def at(self, x):
        """Evaluate at a single point, returning a float."""
        return float(self(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def __repr__(self):
        name = self.label or type(self).__name__
        return f"<{name} bound={self.bound:.4g}>"


class Constant(ScalarField):
    def __init__(self, value, dimension=None):
        self.value = float(value)
        self.bound = abs(self.value)
        self.dimension = dimension
        self.lipschitz = 0.0
        self.label = f"const({self.value:g})"

    def values(self, pts):
        return np.full(pts.shape[0], self.value)


class Affine(ScalarField):
    """a . x + b, with the bound taken over an enclosing box."""

    def __init__(self, slope, intercept, box):
        self.slope = np.asarray(slope, dtype=float).ravel()
        self.intercept = float(intercept)
        self.dimension = self.slope.shape[0]
        box = np.asarray(box, dtype=float).reshape(self.dimension, 2)
        corners = np.stack(np.meshgrid(*box, indexing="ij"), axis=-1).reshape(-1, self.dimension)
        self.bound = float(np.abs(corners @ self.slope + self.intercept).max())
        self.lipschitz = float(np.linalg.norm(self.slope))
        self.label = "affine"

    def values(self, pts):
        return pts @ self.slope + self.intercept


class DistanceField(ScalarField):
    """Euclidean distance to an anchor point; 1-Lipschitz by construction."""

    def __init__(self, anchor, box=None):
        self.anchor = np.asarray(anchor, dtype=float).ravel()
        self.dimension = self.anchor.shape[0]
        self.lipschitz = 1.0
        if box is not None:
            box = np.asarray(box, dtype=float).reshape(self.dimension, 2)
            corners = np.stack(np.meshgrid(*box, indexing="ij"), axis=-1).reshape(-1, self.dimension)
            self.bound = float(np.linalg.norm(corners - self.anchor, axis=1).max())
        self.label = "dist"

    def values(self, pts):
        return np.linalg.norm(pts - self.anchor, axis=1)


class Lipschitz(ScalarField):
    """Wrap an arbitrary vectorized callable with declared constants."""

    def __init__(self, fn, bound, lipschitz=None, dimension=None, label="lipschitz"):
        self.fn = fn
        self.bound = float(bound)
        self.lipschitz = lipschitz
        self.dimension = dimension
        self.label = label

    def values(self, pts):
        return np.asarray(self.fn(pts), dtype=float)


class Bump(ScalarField):
    """Radial plateau: 1 inside the inner radius, linear taper to 0 at the outer."""

    def __init__(self, center, r_inner, r_outer):
        if not 0.0 <= r_inner < r_outer:
            raise ValueError("need 0 <= r_inner < r_outer")
        self.center = np.asarray(center, dtype=float).ravel()
        self.r_inner = float(r_inner)
        self.r_outer = float(r_outer)
        self.dimension = self.center.shape[0]
        self.bound = 1.0
        self.lipschitz = 1.0 / (self.r_outer - self.r_inner)
        self.label = "bump"

    def values(self, pts):
        d = np.linalg.norm(pts - self.center, axis=1)
        return np.clip((self.r_outer - d) / (self.r_outer - self.r_inner), 0.0, 1.0)


class CellIndicator(ScalarField):
    """Indicator of a union of first-hit cells at one covering level."""

    def __init__(self, covering, level, indices):
        if np.isscalar(indices):
            indices = [int(indices)]
        self.covering = covering
        self.level = int(level)
        self.indices = np.unique(np.asarray(indices, dtype=int))
        self.dimension = covering.dimension
        self.bound = 1.0
        self.label = f"cell[n={level}]{list(self.indices)}"

    def values(self, pts):
        idx = self.covering.classify(self.level, pts)
        return np.isin(idx, self.indices).astype(float)


class PointSetIndicator(ScalarField):
    """Indicator of a finite point set (exact coordinate match)."""

    def __init__(self, points, dimension=None):
        pts = _pts(points, dimension)
        self.keys = {tuple(p) for p in pts}
        self.dimension = pts.shape[1] if pts.size else dimension
        self.bound = 1.0
        self.label = f"points({len(self.keys)})"

    def values(self, pts):
        return np.array([1.0 if tuple(p) in self.keys else 0.0 for p in pts])


class LinearCombination(ScalarField):
    """sum_i c_i f_i with the triangle-inequality bound."""

    def __init__(self, fields, coeffs, label="lincomb"):
        if len(fields) != len(coeffs):
            raise ValueError("one coefficient per field")
        self.fields = list(fields)
        self.coeffs = np.asarray(coeffs, dtype=float)
        dims = {f.dimension for f in fields if f.dimension is not None}
        self.dimension = dims.pop() if len(dims) == 1 else None
        self.bound = float(sum(abs(c) * f.bound for c, f in zip(self.coeffs, fields)))
        lips = [f.lipschitz for f in fields]
        if all(l is not None for l in lips):
            self.lipschitz = float(sum(abs(c) * l for c, l in zip(self.coeffs, lips)))
        self.label = label

    def values(self, pts):
        out = np.zeros(pts.shape[0])
        for c, f in zip(self.coeffs, self.fields):
            if c != 0.0:
                out += c * f.values(pts)
        return out


def scaled(field, coeff, label=None):
    return LinearCombination([field], [coeff], label=label or f"{coeff:g}*{field.label}")


class Pullback(ScalarField):
    """g composed with a point map: (g o m)(x) = g(m(x))."""

    def __init__(self, field, map_fn, dimension=None, lipschitz=None):
        self.field = field
        self.map_fn = map_fn
        self.bound = field.bound
        self.dimension = dimension
        self.lipschitz = lipschitz
        self.label = f"pullback({field.label})"

    def values(self, pts):
        images = np.asarray(self.map_fn(pts), dtype=float)
        if images.ndim == 1:
            images = images.reshape(pts.shape[0], -1)
        return self.field.values(images)


class PointwiseProduct(ScalarField):
    """f * g on a common space."""

    def __init__(self, f, g):
        self.f = f
        self.g = g
        self.bound = f.bound * g.bound
        dims = {d for d in (f.dimension, g.dimension) if d is not None}
        self.dimension = dims.pop() if len(dims) == 1 else None
        if f.lipschitz is not None and g.lipschitz is not None:
            self.lipschitz = f.lipschitz * g.bound + g.lipschitz * f.bound
        self.label = f"{f.label}*{g.label}"

    def values(self, pts):
        return self.f.values(pts) * self.g.values(pts)


class Product(ScalarField):
    """f (x) g on the product space: evaluates on concatenated (x, y) coordinates."""

    def __init__(self, f_x, g_y):
        if f_x.dimension is None or g_y.dimension is None:
            raise ValueError("product factors need explicit dimensions")
        self.f_x = f_x
        self.g_y = g_y
        self.split = f_x.dimension
        self.dimension = f_x.dimension + g_y.dimension
        self.bound = f_x.bound * g_y.bound
        self.label = f"{f_x.label}(x){g_y.label}"

    def values(self, pts):
        return self.f_x.values(pts[:, :self.split]) * self.g_y.values(pts[:, self.split:])
