"""Ball coverings of a workspace box and their first-hit cells.

A covering is a fixed sequence of dyadic grid centers with unit radius
parameters. At level n the first p(n) closed balls of radius 1/n cover the
box; the cells are the first-hit differences, which partition the covered
compactum K_n. Cell membership drives every discretization in the package.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DimensionMismatch, TransfunError
from .measure import DiscreteMeasure

_CELL_BUDGET = 500_000


def _normalize_box(box):
    arr = np.asarray(box, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("box must be (d, 2) bounds")
    if not np.isfinite(arr).all():
        raise ValueError("box bounds must be finite")
    if np.any(arr[:, 0] > arr[:, 1]):
        raise ValueError("box has lo > hi on some axis")
    if not 1 <= arr.shape[0] <= 3:
        raise DimensionMismatch("box dimension must be 1, 2 or 3")
    return arr


def _dyadic_block(box, k):
    """Centers of the 2^k-per-axis subdivision, lexicographic in cell index."""
    d = box.shape[0]
    side = box[:, 1] - box[:, 0]
    axes = [box[a, 0] + (np.arange(2 ** k) + 0.5) * side[a] / 2 ** k for a in range(d)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def _half_diag(box, k):
    side = box[:, 1] - box[:, 0]
    return float(np.linalg.norm(side / 2 ** (k + 1)))


def _split_cells(cells):
    """Subdivide (m, d, 2) box cells into their 2^d dyadic children."""
    m, d, _ = cells.shape
    mid = cells.mean(axis=2)
    children = []
    for mask in range(2 ** d):
        lo = cells[:, :, 0].copy()
        hi = cells[:, :, 1].copy()
        for a in range(d):
            if (mask >> a) & 1:
                lo[:, a] = mid[:, a]
            else:
                hi[:, a] = mid[:, a]
        children.append(np.stack([lo, hi], axis=2))
    return np.concatenate(children, axis=0)


def _prefix_covers(centers, r, box, max_depth):
    """Exact test that the union of closed balls B(c, r) contains the box.

    Recursively splits the box into dyadic cells. A cell is certified when a
    single ball contains it entirely (farthest corner within r); the test
    fails as soon as some cell midpoint is outside every ball. Undecided
    cells at the depth cap count as uncovered, so a True answer is reliable.
    """
    if centers.shape[0] == 0:
        return False
    r2 = r * r
    cells = box[None, :, :]
    for depth in range(max_depth + 1):
        lo = cells[:, None, :, 0]
        hi = cells[:, None, :, 1]
        c = centers[None, :, :]
        far = np.maximum(np.abs(c - lo), np.abs(hi - c))
        far2 = np.einsum("mnd,mnd->mn", far, far)
        covered = (far2 <= r2).any(axis=1)
        cells = cells[~covered]
        if cells.shape[0] == 0:
            return True
        mids = cells.mean(axis=2)
        d2 = ((mids[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        if np.any(d2.min(axis=1) > r2):
            return False
        if depth == max_depth or cells.shape[0] * 2 ** box.shape[0] > _CELL_BUDGET:
            return False
        cells = _split_cells(cells)
    return False


class Covering:
    """Dyadic ball covering of a box with per-level prefix lengths p(n)."""

    def __init__(self, box, centers, radii, levels, block_sizes):
        self.box = box
        self.centers = centers
        self.radii = radii
        self.levels = dict(levels)       # n -> p(n)
        self.block_sizes = block_sizes   # centers per refinement depth
        self.dimension = box.shape[0]
        self._samples = {}

    def p(self, n):
        try:
            return self.levels[int(n)]
        except KeyError:
            raise TransfunError(f"level {n} was not generated; have {sorted(self.levels)}") from None

    def radius(self, n):
        return 1.0 / int(n)

    def level_centers(self, n):
        return self.centers[: self.p(n)]

    # -- cell queries -------------------------------------------------------

    def classify(self, n, pts):
        """First-hit cell index for each point; -1 if outside K_n."""
        p = self.p(n)
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dimension)
        if pts.shape[1] != self.dimension:
            raise DimensionMismatch(f"points have dimension {pts.shape[1]}, covering is {self.dimension}")
        if pts.shape[0] == 0:
            return np.zeros(0, dtype=int)
        r2 = self.radius(n) ** 2
        d2 = ((pts[:, None, :] - self.centers[None, :p, :]) ** 2).sum(axis=2)
        inside = d2 <= r2
        idx = np.argmax(inside, axis=1)
        idx[~inside.any(axis=1)] = -1
        return idx

    def cell_index(self, n, x):
        """Least ball index containing x at level n, or None outside K_n."""
        i = int(self.classify(n, np.asarray(x, dtype=float).reshape(1, -1))[0])
        return None if i < 0 else i

    def contains(self, n, pts):
        return self.classify(n, pts) >= 0

    def cell_masses(self, n, measure):
        """Per-cell mass vector of a measure whose support lies in K_n."""
        if measure.dimension != self.dimension:
            raise DimensionMismatch("measure dimension does not match covering")
        p = self.p(n)
        if len(measure) == 0:
            return np.zeros(p)
        idx = self.classify(n, measure.points)
        if np.any(idx < 0):
            raise CoverageError(measure.points[idx < 0])
        return np.bincount(idx, weights=measure.weights, minlength=p)

    def cell_samples(self, n, spacing=None):
        """Finite point sets inside each cell, from a global grid plus centers.

        The grid has the given spacing (default 1/(4n)) over the inflated box,
        so every returned point is an exact cell member. Cached per level.
        """
        key = (int(n), spacing)
        if key in self._samples:
            return self._samples[key]
        p = self.p(n)
        r = self.radius(n)
        h = spacing if spacing is not None else r / 4.0
        axes = []
        for a in range(self.dimension):
            lo, hi = self.box[a, 0] - r, self.box[a, 1] + r
            count = int(np.floor((hi - lo) / h)) + 1
            axes.append(lo + h * np.arange(count))
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        candidates = [grid]
        candidates.append(self.centers[:p])
        pts = np.vstack(candidates)
        idx = self.classify(n, pts)
        groups = [pts[idx == i] for i in range(p)]
        self._samples[key] = groups
        return groups

    def cell_representatives(self, n):
        """One exact member point per nonempty cell (center preferred)."""
        reps = {}
        p = self.p(n)
        center_cells = self.classify(n, self.centers[:p])
        for i in range(p):
            if center_cells[i] == i:
                reps[i] = self.centers[i].copy()
        for i, group in enumerate(self.cell_samples(n)):
            if i not in reps and group.shape[0]:
                reps[i] = group[0].copy()
        return reps

    # -- serialization --------------------------------------------------------

    def summary_dict(self):
        return {
            "dimension": self.dimension,
            "box": [list(b) for b in self.box],
            "levels": {str(n): int(p) for n, p in sorted(self.levels.items())},
            "centers": [list(c) for c in self.centers],
            "radii": list(self.radii),
        }

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def grid(self, n):
        return CellGrid(self, int(n))


def build_covering(box, levels):
    """Covering of the box whose level-n ball prefix is minimal.

    Centers enumerate dyadic grid refinements of the box, ordered by
    refinement depth and then lexicographically; all radius parameters are 1.
    For each requested level the prefix length p(n) is the smallest count
    whose balls of radius 1/n provably cover the box.
    """
    box = _normalize_box(box)
    levels = sorted({int(n) for n in levels})
    if not levels:
        raise ValueError("need at least one level")
    if levels[0] < 1:
        raise ValueError("levels must be positive integers")

    depth_for = {}
    for n in levels:
        k = 0
        while _half_diag(box, k) > 1.0 / n:
            k += 1
            if k > 30:
                raise TransfunError("refinement depth exploded; check box scale")
        depth_for[n] = k
    max_depth = max(depth_for.values())

    blocks = [_dyadic_block(box, k) for k in range(max_depth + 1)]
    centers = np.vstack(blocks)
    block_sizes = [b.shape[0] for b in blocks]
    offsets = np.cumsum(block_sizes)

    level_p = {}
    for n in levels:
        r = 1.0 / n
        full = int(offsets[depth_for[n]])
        test_depth = depth_for[n] + 6
        if not _prefix_covers(centers[:full], r, box, test_depth):
            raise TransfunError(f"full dyadic prefix failed to cover at level {n}")
        lo, hi = 1, full
        while lo < hi:
            mid = (lo + hi) // 2
            if _prefix_covers(centers[:mid], r, box, test_depth):
                hi = mid
            else:
                lo = mid + 1
        level_p[n] = lo

    needed = max(level_p.values())
    radii = np.ones(needed)
    return Covering(box, centers[:needed].copy(), radii, level_p, block_sizes)


@dataclass(frozen=True)
class CellGrid:
    """A covering pinned to one level: the unit of resolution for plans."""

    covering: Covering
    level: int

    @property
    def p(self):
        return self.covering.p(self.level)

    @property
    def dimension(self):
        return self.covering.dimension

    def centers(self):
        return self.covering.level_centers(self.level)

    def classify(self, pts):
        return self.covering.classify(self.level, pts)

    def masses(self, measure):
        return self.covering.cell_masses(self.level, measure)

    def indicator(self, indices):
        from .fields import CellIndicator
        return CellIndicator(self.covering, self.level, indices)

    def restrict(self, measure, i):
        """1_{C_i} * measure."""
        idx = self.classify(measure.points) if len(measure) else np.zeros(0, dtype=int)
        return measure.restrict(idx == i)

    def representatives(self):
        return self.covering.cell_representatives(self.level)
