"""Approximations of identity over a covering level, in three flavors.

point-mass    cell indicators paired with point masses at the ball centers
continuous    normalized tent fields paired with the same point masses
measurable    cell-average projections onto a positive reference measure

All three produce simple transfunctions; applied to measures supported in
K_n they preserve mass and positivity, and their weak gaps against Lipschitz
fields shrink like the cell size.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .fields import LinearCombination, ScalarField
from .measure import delta, integrate
from .transfunction import SimpleTransfunction


class TentSystem:
    """Shared evaluation state for the continuous-setting tent fields.

    Each cell gets an anchor set of exact cell members (grid sample plus the
    ball center when it belongs to its own cell). The raw tent for cell i is
    g_i(x) = max(0, 1 - n * dist(x, anchors_i)), forced to 1 when x lies in
    cell i itself, and the emitted fields are f_i = g_i / max(1, sum_j g_j).
    Consequences, exact at every evaluated point: each f_i vanishes outside
    the 1/n-inflation of its cell, the f_i sum to 1 on K_n, and they sum to
    at most 1 everywhere.
    """

    def __init__(self, covering, level):
        self.covering = covering
        self.level = int(level)
        self.p = covering.p(level)
        groups = covering.cell_samples(level)
        self.anchors = np.vstack([g for g in groups if g.shape[0]]) if any(
            g.shape[0] for g in groups) else np.zeros((0, covering.dimension))
        self.anchor_cell = np.concatenate(
            [np.full(g.shape[0], i) for i, g in enumerate(groups)]) if self.anchors.shape[0] else np.zeros(0, dtype=int)
        self._memo_key = None
        self._memo_val = None

    def raw_matrix(self, pts):
        """(m, p) matrix of normalized tent values; rows sum to <= 1."""
        key = pts.tobytes()
        if self._memo_key == key:
            return self._memo_val
        m = pts.shape[0]
        n = self.level
        g = np.zeros((m, self.p))
        if self.anchors.shape[0]:
            d2 = ((pts[:, None, :] - self.anchors[None, :, :]) ** 2).sum(axis=2)
            dist_min = np.full((m, self.p), np.inf)
            np.minimum.at(dist_min.T, self.anchor_cell, np.sqrt(d2).T)
            g = np.maximum(0.0, 1.0 - n * dist_min)
        own = self.covering.classify(self.level, pts)
        hit = own >= 0
        g[np.nonzero(hit)[0], own[hit]] = 1.0
        denom = np.maximum(1.0, g.sum(axis=1))
        out = g / denom[:, None]
        self._memo_key = key
        self._memo_val = out
        return out

    def field(self, i):
        return NormalizedTent(self, i)


class NormalizedTent(ScalarField):
    """One member of the tent partition of unity."""

    def __init__(self, system, index):
        self.system = system
        self.index = int(index)
        self.bound = 1.0
        self.dimension = system.covering.dimension
        self.label = f"tent[n={system.level}]{index}"

    def values(self, pts):
        return self.system.raw_matrix(pts)[:, self.index]


def identity_pointmass(grid):
    """Cell masses concentrated at the ball centers."""
    cov, n = grid.covering, grid.level
    terms = [(grid.indicator(i), delta(cov.centers[i])) for i in range(grid.p)]
    return SimpleTransfunction(terms, dimension_in=cov.dimension, dimension_out=cov.dimension,
                               label=f"I_{n}^pointmass")


def identity_continuous(grid):
    """Tent-weighted masses at the ball centers (continuous test fields)."""
    cov, n = grid.covering, grid.level
    system = TentSystem(cov, n)
    terms = [(system.field(i), delta(cov.centers[i])) for i in range(grid.p)]
    phi = SimpleTransfunction(terms, dimension_in=cov.dimension, dimension_out=cov.dimension,
                              label=f"I_{n}^continuous")
    phi.tent_system = system
    return phi


def identity_measurable(grid, mu):
    """Cell-conditional averaging against a positive reference measure.

    Terms are (1_{C_i} / mu(C_i), mu restricted to C_i); cells without
    reference mass contribute nothing.
    """
    if not mu.is_positive():
        raise ValueError("reference measure must be positive")
    masses = grid.masses(mu)   # rejects supports outside K_n
    terms = []
    for i in range(grid.p):
        if masses[i] <= 0.0:
            continue
        field = LinearCombination([grid.indicator(i)], [1.0 / masses[i]],
                                  label=f"1_C{i}/mu")
        terms.append((field, grid.restrict(mu, i)))
    return SimpleTransfunction(terms, dimension_in=mu.dimension, dimension_out=mu.dimension,
                               label=f"I_{grid.level}^measurable")


# -- weak-convergence diagnostic ------------------------------------------------


@dataclass
class WeakGapTable:
    """Pairing gaps |<f, lambda_k> - <f, lambda>| per step and field."""

    rows: list        # dicts: step, field, gap, bound (bound may be None)
    summary: list     # dicts: step, max_gap

    def max_gap(self, step=None):
        gaps = [r["gap"] for r in self.rows if step is None or r["step"] == step]
        return max(gaps) if gaps else 0.0

    def to_dict(self):
        return {"rows": self.rows, "summary": self.summary}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "field", "gap", "bound"])
            for r in self.rows:
                writer.writerow([r["step"], r["field"], repr(r["gap"]),
                                 "" if r["bound"] is None else repr(r["bound"])])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def weak_gap(sequence, target, battery, steps=None, bounds=None):
    """Tabulate pairing gaps of a measure sequence against a field battery.

    `bounds` is optional: either one budget per step or a (step, field) ->
    budget callable; budgets are recorded next to the measured gaps.
    """
    battery = list(battery)
    if not battery:
        raise ValueError("battery must not be empty")
    for f in battery:
        if not np.isfinite(f.bound):
            raise ValueError(f"field {f.label or f} has no finite bound")
    sequence = list(sequence)
    if steps is None:
        steps = list(range(len(sequence)))
    target_pairings = [integrate(f, target) for f in battery]
    rows, summary = [], []
    for step, lam in zip(steps, sequence):
        worst = 0.0
        for f, tp in zip(battery, target_pairings):
            gap = abs(integrate(f, lam) - tp)
            worst = max(worst, gap)
            if bounds is None:
                budget = None
            elif callable(bounds):
                budget = bounds(step, f)
            else:
                budget = bounds[steps.index(step)]
            rows.append({"step": step, "field": f.label or repr(f), "gap": gap,
                         "bound": budget})
        summary.append({"step": step, "max_gap": worst})
    return WeakGapTable(rows=rows, summary=summary)
