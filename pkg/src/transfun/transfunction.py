"""Simple transfunctions and the plan / Markov-operator / transfunction triple.

A simple transfunction is a finite list of (field, output measure) terms and
acts by lambda -> sum_i <f_i, lambda> rho_i. At one covering resolution the
same transport information can be stored three ways: as a transfunction, as
a cell-indexed coupling matrix (plan), or as a column-stochastic matrix
acting on cell densities (Markov operator). The conversions here move
between the three representations and certify the Markov axioms.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import MarkovCheckError, PlanConsistencyError, TransfunError
from .fields import LinearCombination
from .measure import DiscreteMeasure, integrate, to_measure


class SimpleTransfunction:
    """Finite-rank map between measures: lambda -> sum_i <f_i, lambda> rho_i."""

    def __init__(self, terms, dimension_in=None, dimension_out=None, label=""):
        self.terms = [(f, rho) for f, rho in terms]
        self.label = label
        if dimension_in is None:
            dims = {f.dimension for f, _ in self.terms if f.dimension is not None}
            dimension_in = dims.pop() if len(dims) == 1 else None
        if dimension_out is None:
            dims = {rho.dimension for _, rho in self.terms if len(rho)}
            dimension_out = dims.pop() if len(dims) == 1 else None
        self.dimension_in = dimension_in
        self.dimension_out = dimension_out

    def __len__(self):
        return len(self.terms)

    def __call__(self, lam):
        return apply(self, lam)

    def coefficients(self, lam):
        """The pairing vector (<f_i, lambda>)_i."""
        return np.array([integrate(f, lam) for f, _ in self.terms])

    def scaled(self, c):
        return SimpleTransfunction(
            [(f, c * rho) for f, rho in self.terms],
            self.dimension_in, self.dimension_out,
            label=f"{c:g}*{self.label}" if self.label else "",
        )

    @property
    def norm_budget(self):
        """Crude certificate: ||Phi(lam)|| <= norm_budget * ||lam||."""
        return float(sum(f.bound * rho.total_variation for f, rho in self.terms))

    def __repr__(self):
        return f"SimpleTransfunction({len(self.terms)} terms{', ' + self.label if self.label else ''})"


def apply(phi, lam):
    """Evaluate a transfunction. Accepts any callable measure -> measure."""
    if not isinstance(phi, SimpleTransfunction):
        return phi(lam)
    pieces_pts, pieces_w = [], []
    for f, rho in phi.terms:
        c = integrate(f, lam)
        if c != 0.0 and len(rho):
            pieces_pts.append(rho.points)
            pieces_w.append(c * rho.weights)
    dim_out = phi.dimension_out or lam.dimension
    if not pieces_pts:
        return DiscreteMeasure.zero(dim_out)
    return DiscreteMeasure(np.vstack(pieces_pts), np.concatenate(pieces_w), dimension=dim_out)


# -- Markov property check ---------------------------------------------------


@dataclass
class MarkovReport:
    rows: list
    additivity: list
    sigma_probe: float
    tol: float
    passed: bool
    max_residual: float

    def to_dict(self):
        return {
            "tol": self.tol,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "sigma_probe": self.sigma_probe,
            "additivity": self.additivity,
            "rows": self.rows,
        }


def markov_check(phi, basis, tol=1e-10, combos=5, seed=0):
    """Certify positivity, measure preservation, and finite additivity.

    Runs over each positive basis measure and over seeded nonnegative random
    combinations, plus one truncated geometric-series linearity probe. The
    check passes when every residual is within tol (the series probe gets a
    looser 1e-6 budget since it stands in for a limit).
    """
    basis = list(basis)
    if not basis:
        raise ValueError("need at least one basis measure")
    for b in basis:
        if not b.is_positive():
            raise ValueError("basis measures must be positive")
    rng = np.random.default_rng(seed)
    rows = []

    def probe(lam, name):
        out = apply(phi, lam)
        min_w = float(out.weights.min()) if len(out) else 0.0
        mass_res = abs(out.total_mass - lam.total_mass)
        rows.append({
            "input": name,
            "min_output_weight": min_w,
            "mass_residual": mass_res,
            "positive": min_w >= -tol,
        })
        return out

    outs = [probe(b, f"basis[{k}]") for k, b in enumerate(basis)]

    add_res = []
    for k in range(len(basis) - 1):
        combined = apply(phi, basis[k] + basis[k + 1])
        add_res.append((combined - outs[k] - outs[k + 1]).total_variation)
    for c in range(combos):
        coeffs = rng.uniform(0.0, 2.0, len(basis))
        lam = DiscreteMeasure.zero(basis[0].dimension)
        for w, b in zip(coeffs, basis):
            lam = lam + w * b
        probe(lam, f"combo[{c}]")
        expected = DiscreteMeasure.zero(outs[0].dimension if outs[0].dimension else basis[0].dimension)
        for w, out in zip(coeffs, outs):
            expected = expected + w * out
        add_res.append((apply(phi, lam) - expected).total_variation)

    # geometric-series linearity probe, truncated at 20 terms
    series = DiscreteMeasure.zero(basis[0].dimension)
    expected = DiscreteMeasure.zero(outs[0].dimension if outs[0].dimension else basis[0].dimension)
    for k in range(20):
        b = basis[k % len(basis)]
        series = series + (0.5 ** (k + 1)) * b
        expected = expected + (0.5 ** (k + 1)) * outs[k % len(basis)]
    sigma_res = (apply(phi, series) - expected).total_variation

    worst = 0.0
    ok = True
    for row in rows:
        worst = max(worst, row["mass_residual"], max(0.0, -row["min_output_weight"]))
        ok = ok and row["positive"] and row["mass_residual"] <= tol
    for r in add_res:
        worst = max(worst, r)
        ok = ok and r <= tol
    ok = ok and sigma_res <= 1e-6
    worst = max(worst, sigma_res)
    return MarkovReport(rows=rows, additivity=add_res, sigma_probe=sigma_res,
                        tol=tol, passed=ok, max_residual=worst)


# -- cell-resolution representations -----------------------------------------


class DiscretePlan:
    """Nonnegative cell-to-cell coupling matrix with pinned marginals."""

    def __init__(self, matrix, mu_cells, nu_cells, grid_x=None, grid_y=None, validate=True):
        self.matrix = np.asarray(matrix, dtype=float)
        self.mu_cells = np.asarray(mu_cells, dtype=float).ravel()
        self.nu_cells = np.asarray(nu_cells, dtype=float).ravel()
        self.grid_x = grid_x
        self.grid_y = grid_y
        if self.matrix.shape != (self.mu_cells.shape[0], self.nu_cells.shape[0]):
            raise PlanConsistencyError(
                f"matrix shape {self.matrix.shape} does not match marginals "
                f"({self.mu_cells.shape[0]}, {self.nu_cells.shape[0]})")
        if validate:
            self.validate()

    def validate(self, atol=None):
        total = self.matrix.sum()
        scale = max(1.0, abs(total))
        tol = atol if atol is not None else 1e-12 * scale
        if self.matrix.size and self.matrix.min() < -tol:
            raise PlanConsistencyError(f"negative coupling entry {self.matrix.min():.3e}")
        row = np.abs(self.matrix.sum(axis=1) - self.mu_cells).max() if self.matrix.size else 0.0
        col = np.abs(self.matrix.sum(axis=0) - self.nu_cells).max() if self.matrix.size else 0.0
        if row > tol:
            raise PlanConsistencyError(f"row sums deviate from source marginal by {row:.3e}")
        if col > tol:
            raise PlanConsistencyError(f"column sums deviate from target marginal by {col:.3e}")
        if abs(self.mu_cells.sum() - self.nu_cells.sum()) > tol:
            raise PlanConsistencyError("marginals have different total mass")

    @property
    def total_mass(self):
        return float(self.matrix.sum())

    def mass(self, rows, cols):
        """kappa(A x B) for cell-index collections A and B."""
        rows = np.atleast_1d(np.asarray(rows, dtype=int))
        cols = np.atleast_1d(np.asarray(cols, dtype=int))
        return float(self.matrix[np.ix_(rows, cols)].sum())

    def transpose(self):
        return DiscretePlan(self.matrix.T.copy(), self.nu_cells.copy(), self.mu_cells.copy(),
                            grid_x=self.grid_y, grid_y=self.grid_x, validate=False)

    def to_dict(self):
        return {
            "n_x": self.grid_x.level if self.grid_x else None,
            "n_y": self.grid_y.level if self.grid_y else None,
            "matrix": [list(row) for row in self.matrix],
            "mu": list(self.mu_cells),
            "nu": list(self.nu_cells),
        }

    @classmethod
    def from_dict(cls, data, grid_x=None, grid_y=None, validate=True):
        return cls(np.array(data["matrix"], dtype=float), data["mu"], data["nu"],
                   grid_x=grid_x, grid_y=grid_y, validate=validate)

    def __repr__(self):
        return f"DiscretePlan({self.matrix.shape[0]}x{self.matrix.shape[1]}, mass={self.total_mass:.6g})"


def read_plan(path, grid_x=None, grid_y=None, validate=True):
    with open(path) as fh:
        return DiscretePlan.from_dict(json.load(fh), grid_x=grid_x, grid_y=grid_y, validate=validate)


def write_plan(plan, path):
    with open(path, "w") as fh:
        json.dump(plan.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


class MarkovMatrix:
    """Cell-density action of a Markov transfunction.

    Entry t[i, j] is the fraction of target cell j's mass drawn from source
    cell i, so columns over positive-mass target cells sum to one and
    t @ nu_cells recovers the source marginal.
    """

    def __init__(self, t, mu_cells, nu_cells, grid_x=None, grid_y=None, validate=True):
        self.t = np.asarray(t, dtype=float)
        self.mu_cells = np.asarray(mu_cells, dtype=float).ravel()
        self.nu_cells = np.asarray(nu_cells, dtype=float).ravel()
        self.grid_x = grid_x
        self.grid_y = grid_y
        if validate:
            self.validate()

    def validate(self, atol=1e-10):
        if self.t.shape != (self.mu_cells.shape[0], self.nu_cells.shape[0]):
            raise PlanConsistencyError(f"matrix shape {self.t.shape} does not match marginals")
        if self.t.size and self.t.min() < -atol:
            raise PlanConsistencyError(f"negative entry {self.t.min():.3e}")
        col_sums = self.t.sum(axis=0)
        for j, (s, w) in enumerate(zip(col_sums, self.nu_cells)):
            if w > 0 and abs(s - 1.0) > atol:
                raise PlanConsistencyError(f"column {j} sums to {s:.12g}, expected 1")
            if w == 0 and abs(s) > atol:
                raise PlanConsistencyError(f"column {j} has mass but its target cell is empty")
        balance = self.t @ self.nu_cells
        err = np.abs(balance - self.mu_cells)
        if err.size and err.max() > atol * max(1.0, self.nu_cells.sum()):
            i = int(err.argmax())
            raise PlanConsistencyError(
                f"row {i} mass balance off by {err[i]:.3e} (t @ nu != mu)")

    def apply_to_density(self, f_cells):
        """Push a cell density forward: g_j = sum_i f_i t[i, j]."""
        return np.asarray(f_cells, dtype=float) @ self.t

    def output_rows(self):
        """The same matrix stored with target cells as rows."""
        return self.t.T.copy()

    def __repr__(self):
        return f"MarkovMatrix({self.t.shape[0]}x{self.t.shape[1]})"


# -- conversions --------------------------------------------------------------


def plan_to_transfunction(plan, mu, nu, grid_x=None, grid_y=None):
    """Transfunction following the plan's instructions on cell-measurable inputs.

    Terms are (1_{C_i} / mu(C_i), sum_j kappa_ij * normalized nu on C_j).
    """
    gx = grid_x or plan.grid_x
    gy = grid_y or plan.grid_y
    if gx is None or gy is None:
        raise TransfunError("plan needs cell grids on both sides")
    mu_cells = gx.masses(mu)
    nu_cells = gy.masses(nu)
    if np.abs(mu_cells - plan.mu_cells).max() > 1e-9 * max(1.0, plan.total_mass):
        raise PlanConsistencyError("measure mu does not reproduce the plan's source marginal")
    if np.abs(nu_cells - plan.nu_cells).max() > 1e-9 * max(1.0, plan.total_mass):
        raise PlanConsistencyError("measure nu does not reproduce the plan's target marginal")

    nu_parts = {}
    idx_nu = gy.classify(nu.points) if len(nu) else np.zeros(0, dtype=int)
    terms = []
    for i in range(plan.matrix.shape[0]):
        row = plan.matrix[i]
        if mu_cells[i] <= 0.0:
            if row.sum() > 1e-12 * max(1.0, plan.total_mass):
                raise PlanConsistencyError(f"plan row {i} moves mass but source cell {i} is empty")
            continue
        pieces_pts, pieces_w = [], []
        for j in np.nonzero(row)[0]:
            if nu_cells[j] <= 0.0:
                raise PlanConsistencyError(f"plan entry ({i},{j}) targets an empty cell")
            if j not in nu_parts:
                mask = idx_nu == j
                nu_parts[j] = (nu.points[mask], nu.weights[mask] / nu_cells[j])
            pts, unit_w = nu_parts[j]
            pieces_pts.append(pts)
            pieces_w.append(row[j] * unit_w)
        out = DiscreteMeasure(np.vstack(pieces_pts), np.concatenate(pieces_w),
                              dimension=nu.dimension)
        field = LinearCombination([gx.indicator(i)], [1.0 / mu_cells[i]],
                                  label=f"1_C{i}/mu")
        terms.append((field, out))
    return SimpleTransfunction(terms, dimension_in=mu.dimension, dimension_out=nu.dimension,
                               label="plan")


def transfunction_to_plan(phi, mu, grid_x, grid_y, check_markov=True, markov_tol=1e-10):
    """Cell coupling kappa_ij = mass of Phi(1_{C_i} mu) landing in cell j."""
    mu_cells = grid_x.masses(mu)
    basis = [grid_x.restrict(mu, i) for i in range(grid_x.p) if mu_cells[i] > 0]
    if check_markov:
        report = markov_check(phi, basis, tol=markov_tol)
        if not report.passed:
            raise MarkovCheckError(report)
    matrix = np.zeros((grid_x.p, grid_y.p))
    for i in range(grid_x.p):
        if mu_cells[i] <= 0:
            continue
        out = apply(phi, grid_x.restrict(mu, i))
        matrix[i] = grid_y.masses(out)
    nu_cells = matrix.sum(axis=0)
    return DiscretePlan(matrix, mu_cells, nu_cells, grid_x=grid_x, grid_y=grid_y)


def operator_to_transfunction(T, mu, nu):
    """Compose the density isometries around a Markov matrix.

    The result sends 1_{C_i} mu to sum_j t[i, j] * nu_j restricted to C_j,
    i.e. it is the transfunction carrying the operator's instructions.
    """
    if T.grid_x is None or T.grid_y is None:
        raise TransfunError("operator needs cell grids on both sides")
    T.validate()
    mu_cells = T.grid_x.masses(mu)
    nu_cells = T.grid_y.masses(nu)
    scale = max(1.0, float(T.nu_cells.sum()))
    if np.abs(mu_cells - T.mu_cells).max() > 1e-9 * scale:
        raise PlanConsistencyError("measure mu does not reproduce the operator's source marginal")
    if np.abs(nu_cells - T.nu_cells).max() > 1e-9 * scale:
        raise PlanConsistencyError("measure nu does not reproduce the operator's target marginal")
    plan = DiscretePlan(T.t * nu_cells[None, :], mu_cells, nu_cells,
                        grid_x=T.grid_x, grid_y=T.grid_y)
    return plan_to_transfunction(plan, mu, nu)


def transfunction_to_operator(phi, lam, grid_x, grid_y, check_markov=True):
    """Matrix of the operator J_rho^{-1} Phi J_lambda on cell densities.

    rho is Phi(lambda). Raises when mass lands in a cell where rho vanishes,
    since no density can represent it there.
    """
    if not lam.is_positive():
        raise ValueError("reference measure must be positive")
    plan = transfunction_to_plan(phi, lam, grid_x, grid_y, check_markov=check_markov)
    rho_cells = plan.nu_cells
    t = np.zeros_like(plan.matrix)
    for j in range(plan.matrix.shape[1]):
        col = plan.matrix[:, j]
        if rho_cells[j] > 0:
            t[:, j] = col / rho_cells[j]
        elif col.max(initial=0.0) > 1e-12 * max(1.0, plan.total_mass):
            raise PlanConsistencyError(f"output cell {j} receives mass but rho vanishes there")
    return MarkovMatrix(t, plan.mu_cells, rho_cells, grid_x=grid_x, grid_y=grid_y)


def dagger(phi, mu, nu, grid_x, grid_y, check_markov=False):
    """Marginal-swapped transfunction: dagger(1_B nu)(A) = Phi(1_A mu)(B).

    Realized by transposing the cell plan of Phi with respect to mu. The
    target side must stay inside nu's support cells.
    """
    plan = transfunction_to_plan(phi, mu, grid_x, grid_y, check_markov=check_markov)
    nu_cells = grid_y.masses(nu)
    scale = max(1.0, plan.total_mass)
    bad = (nu_cells <= 0) & (plan.matrix.sum(axis=0) > 1e-12 * scale)
    if np.any(bad):
        raise PlanConsistencyError(
            f"Phi sends mass into cells {np.nonzero(bad)[0].tolist()} where nu vanishes")

    idx_mu = grid_x.classify(mu.points) if len(mu) else np.zeros(0, dtype=int)
    mu_cells = plan.mu_cells
    terms = []
    for j in range(grid_y.p):
        if nu_cells[j] <= 0:
            continue
        col = plan.matrix[:, j]
        nz = np.nonzero(col)[0]
        field = LinearCombination([grid_y.indicator(j)], [1.0 / nu_cells[j]],
                                  label=f"1_C{j}/nu")
        if nz.size == 0:
            out = DiscreteMeasure.zero(mu.dimension)
        else:
            pieces_pts, pieces_w = [], []
            for i in nz:
                mask = idx_mu == i
                pieces_pts.append(mu.points[mask])
                pieces_w.append(col[i] * mu.weights[mask] / mu_cells[i])
            out = DiscreteMeasure(np.vstack(pieces_pts), np.concatenate(pieces_w),
                                  dimension=mu.dimension)
        terms.append((field, out))
    return SimpleTransfunction(terms, dimension_in=nu.dimension, dimension_out=mu.dimension,
                               label=f"dagger({phi.label})" if phi.label else "dagger")


def reweight_instructions(phi, h, mu, grid_x, grid_y, check_markov=True):
    """Restrict the instructions of Phi to the reweighted reference h * mu.

    h is a nonnegative density vector over supp(mu). Returns the (unchanged)
    transfunction, now read as acting on measures dominated by h * mu, and
    the reweighted plan whose rows are scaled by the per-cell averages of h.
    The plan transform is exact when Phi is cell-measurable at this grid.
    """
    h = np.asarray(h, dtype=float).ravel()
    if h.shape[0] != len(mu):
        raise ValueError("density h must align with supp(mu)")
    if h.min(initial=0.0) < 0:
        raise ValueError("density h must be nonnegative")
    plan = transfunction_to_plan(phi, mu, grid_x, grid_y, check_markov=check_markov)
    h_mu = to_measure(h, mu)
    hmu_cells = grid_x.masses(h_mu)
    h_bar = np.divide(hmu_cells, plan.mu_cells,
                      out=np.zeros_like(hmu_cells), where=plan.mu_cells > 0)
    matrix = h_bar[:, None] * plan.matrix
    reweighted = DiscretePlan(matrix, hmu_cells, matrix.sum(axis=0),
                              grid_x=grid_x, grid_y=grid_y)
    return phi, reweighted


# -- point-resolution coupling -------------------------------------------------


class PointCoupling:
    """Coupling between two finite supports, stored as a dense mass matrix."""

    def __init__(self, points_x, points_y, matrix, validate=True):
        self.points_x = np.asarray(points_x, dtype=float)
        self.points_y = np.asarray(points_y, dtype=float)
        if self.points_x.ndim == 1:
            self.points_x = self.points_x.reshape(-1, 1)
        if self.points_y.ndim == 1:
            self.points_y = self.points_y.reshape(-1, 1)
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.shape != (self.points_x.shape[0], self.points_y.shape[0]):
            raise PlanConsistencyError("coupling matrix shape does not match point lists")
        if validate and self.matrix.size:
            if not np.isfinite(self.matrix).all():
                raise PlanConsistencyError("coupling entries must be finite")
            if self.matrix.min() < -1e-15 * max(1.0, abs(self.matrix).sum()):
                raise PlanConsistencyError("coupling entries must be nonnegative")

    @property
    def total_mass(self):
        return float(self.matrix.sum())

    def marginal_x(self):
        return DiscreteMeasure(self.points_x, self.matrix.sum(axis=1))

    def marginal_y(self):
        return DiscreteMeasure(self.points_y, self.matrix.sum(axis=0))

    def pair(self, f_x, g_y):
        """<f (x) g, coupling> for fields on the two factors."""
        return float(self.matrix.ravel() @ np.outer(f_x(self.points_x), g_y(self.points_y)).ravel())

    def pair_product_field(self, product_field):
        """Pair against a field on the concatenated product space."""
        m, k = self.matrix.shape
        xs = np.repeat(self.points_x, k, axis=0)
        ys = np.tile(self.points_y, (m, 1))
        vals = product_field(np.hstack([xs, ys]))
        return float(vals @ self.matrix.ravel())


def transfunction_to_point_coupling(phi, mu):
    """Atom-level plan of Phi on mu: row k is Phi(mu restricted to atom k)."""
    if not mu.is_positive():
        raise ValueError("reference measure must be positive")
    outs = []
    for k in range(len(mu)):
        atom = DiscreteMeasure(mu.points[k:k + 1], mu.weights[k:k + 1], dimension=mu.dimension)
        outs.append(apply(phi, atom))
    keys = {}
    for out in outs:
        for key in out.support_keys():
            keys.setdefault(key, len(keys))
    if keys:
        order = sorted(keys, key=lambda t: t)
        index = {key: j for j, key in enumerate(order)}
        points_y = np.array(order, dtype=float)
    else:
        points_y = np.zeros((0, phi.dimension_out or mu.dimension))
        index = {}
    matrix = np.zeros((len(mu), points_y.shape[0]))
    for k, out in enumerate(outs):
        for key, w in zip(out.support_keys(), out.weights):
            matrix[k, index[key]] = w
    return PointCoupling(mu.points.copy(), points_y, matrix)
