"""Optimal-transport layer: costs, exact solvers, and the warehouse strategy.

The exact discrete solver is a linear program over the transportation
polytope (HiGHS backend) and returns dual potentials so optimality can be
certified by complementary slackness. The assignment solver is a shortest
augmenting path Hungarian method. The warehouse strategy composes three
transfunction steps (discretize to cell centers, move mass between centers,
redistribute) and reports every step cost against its budget.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import (CoverageError, MarkovCheckError, PlanConsistencyError,
                     TransfunError)
from .measure import DiscreteMeasure
from .transfunction import (DiscretePlan, MarkovMatrix, PointCoupling,
                            apply, markov_check, plan_to_transfunction,
                            transfunction_to_point_coupling)
from .identity import identity_measurable


# -- cost functions ------------------------------------------------------------


class CostFunction:
    """Pairwise nonnegative ground cost, evaluated as a matrix."""

    label = "cost"

    def matrix(self, points_x, points_y):
        raise NotImplementedError


class PowerDistance(CostFunction):
    """c(x, y) = alpha * d(x, y)^power."""

    def __init__(self, alpha=1.0, power=1.0):
        if alpha <= 0 or power <= 0:
            raise ValueError("alpha and power must be positive")
        self.alpha = float(alpha)
        self.power = float(power)
        self.label = f"{alpha:g}*d^{power:g}"

    def matrix(self, points_x, points_y):
        px = np.atleast_2d(np.asarray(points_x, dtype=float))
        py = np.atleast_2d(np.asarray(points_y, dtype=float))
        d = np.linalg.norm(px[:, None, :] - py[None, :, :], axis=2)
        return self.alpha * d ** self.power


class Tabulated(CostFunction):
    """Costs listed per support-point pair, matched by exact coordinates."""

    def __init__(self, points_x, points_y, table):
        self.points_x = np.atleast_2d(np.asarray(points_x, dtype=float))
        self.points_y = np.atleast_2d(np.asarray(points_y, dtype=float))
        self.table = np.asarray(table, dtype=float)
        if self.table.shape != (self.points_x.shape[0], self.points_y.shape[0]):
            raise ValueError("cost table shape does not match point lists")
        if self.table.size and self.table.min() < 0:
            raise ValueError("costs must be nonnegative")
        self._ix = {tuple(p): k for k, p in enumerate(self.points_x)}
        self._iy = {tuple(p): k for k, p in enumerate(self.points_y)}
        self.label = "tabulated"

    def matrix(self, points_x, points_y):
        px = np.atleast_2d(np.asarray(points_x, dtype=float))
        py = np.atleast_2d(np.asarray(points_y, dtype=float))
        try:
            rows = [self._ix[tuple(p)] for p in px]
            cols = [self._iy[tuple(p)] for p in py]
        except KeyError as err:
            raise TransfunError(f"tabulated cost has no entry for point {err.args[0]}") from None
        return self.table[np.ix_(rows, cols)]


class ProductCost(CostFunction):
    """c(x, y) = f(x) * g(y) for scalar fields on the two factors."""

    def __init__(self, f_x, g_y):
        self.f_x = f_x
        self.g_y = g_y
        self.label = f"{f_x.label}(x){g_y.label}"

    def matrix(self, points_x, points_y):
        return np.outer(self.f_x(np.atleast_2d(points_x)), self.g_y(np.atleast_2d(points_y)))


def plan_cost(plan, cost):
    """Integral of the cost against a coupling.

    DiscretePlans are priced at their cell centers; PointCouplings at their
    own support pairs.
    """
    if isinstance(plan, PointCoupling):
        c = cost.matrix(plan.points_x, plan.points_y)
        return float((c * plan.matrix).sum())
    if isinstance(plan, DiscretePlan):
        if plan.grid_x is None or plan.grid_y is None:
            raise TransfunError("cell plan needs grids to locate its representatives")
        c = cost.matrix(plan.grid_x.centers(), plan.grid_y.centers())
        return float((c * plan.matrix).sum())
    raise TypeError(f"cannot price object of type {type(plan).__name__}")


# -- exact discrete solvers ------------------------------------------------------


def discrete_ot_exact(mu_w, nu_w, cost, return_duals=False):
    """Minimal-cost coupling between weight vectors (exact LP solve).

    Returns (plan, cost) and optionally the dual potentials (u, v), which
    satisfy u_i + v_j <= c_ij with equality on the support of the plan.
    """
    mu_w = np.asarray(mu_w, dtype=float).ravel()
    nu_w = np.asarray(nu_w, dtype=float).ravel()
    C = np.asarray(cost, dtype=float)
    if C.shape != (mu_w.shape[0], nu_w.shape[0]):
        raise ValueError(f"cost shape {C.shape} does not match weights")
    if mu_w.size == 0 or nu_w.size == 0:
        raise ValueError("weight vectors must be nonempty")
    if mu_w.min() < 0 or nu_w.min() < 0:
        raise ValueError("weights must be nonnegative")
    if C.size and C.min() < 0:
        raise ValueError("costs must be nonnegative")
    total = mu_w.sum()
    if abs(total - nu_w.sum()) > 1e-12 * max(1.0, total):
        raise PlanConsistencyError(
            f"total masses differ: {total!r} vs {nu_w.sum()!r}")

    m, k = C.shape
    rows = np.nonzero(mu_w > 0)[0]
    cols = np.nonzero(nu_w > 0)[0]
    plan = np.zeros((m, k))
    u = np.zeros(m)
    v = np.zeros(k)
    if rows.size == 0:
        return (plan, 0.0, (u, v)) if return_duals else (plan, 0.0)

    a = mu_w[rows]
    b = nu_w[cols]
    sub = C[np.ix_(rows, cols)]
    mm, kk = sub.shape
    # equality rows: per-source mass, then per-sink mass
    A_eq = np.zeros((mm + kk, mm * kk))
    for i in range(mm):
        A_eq[i, i * kk:(i + 1) * kk] = 1.0
    for j in range(kk):
        A_eq[mm + j, j::kk] = 1.0
    b_eq = np.concatenate([a, b])
    res = linprog(sub.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise TransfunError(f"transport LP failed: {res.message}")
    plan[np.ix_(rows, cols)] = res.x.reshape(mm, kk)
    value = float(res.fun)
    if return_duals:
        marg = np.asarray(res.eqlin.marginals, dtype=float)
        u[rows] = marg[:mm]
        v[cols] = marg[mm:]
        return plan, value, (u, v)
    return plan, value


def ot_optimality_certificate(plan, cost, duals):
    """Largest complementary-slackness violation of a candidate optimum.

    Checks dual feasibility (u_i + v_j <= c_ij) and support tightness
    (plan_ij > 0 implies u_i + v_j = c_ij). Near zero certifies optimality.
    """
    u, v = duals
    slack = np.asarray(cost, dtype=float) - u[:, None] - v[None, :]
    infeas = max(0.0, float(-slack.min())) if slack.size else 0.0
    mass_scale = max(1.0, float(np.abs(plan).max(initial=0.0)))
    support = np.abs(plan) > 1e-12 * mass_scale
    tight = float(np.abs(slack[support]).max()) if support.any() else 0.0
    return max(infeas, tight)


def nw_vertex_minimum(mu_w, nu_w, cost):
    """Brute-force minimum over northwest-corner basic solutions.

    Enumerates the NW-corner plan for every row and column permutation;
    intended as an independent oracle for small instances (<= 4 a side).
    """
    from itertools import permutations

    mu_w = np.asarray(mu_w, dtype=float).ravel()
    nu_w = np.asarray(nu_w, dtype=float).ravel()
    C = np.asarray(cost, dtype=float)
    best = np.inf
    for pr in permutations(range(mu_w.shape[0])):
        for pc in permutations(range(nu_w.shape[0])):
            a = mu_w[list(pr)].copy()
            b = nu_w[list(pc)].copy()
            i = j = 0
            value = 0.0
            while i < a.size and j < b.size:
                move = min(a[i], b[j])
                value += move * C[pr[i], pc[j]]
                a[i] -= move
                b[j] -= move
                if a[i] <= b[j] and i + 1 <= a.size:
                    i += 1
                else:
                    j += 1
            best = min(best, value)
    return float(best)


def assignment_solve(cost, max_side=1024):
    """Minimal-cost perfect assignment via shortest augmenting paths.

    Returns (permutation, cost) where permutation[i] is the column assigned
    to row i. The scan order breaks ties deterministically at the lowest
    index; the optimal value is unique regardless.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"assignment needs a square matrix, got {C.shape}")
    n = C.shape[0]
    if n > max_side:
        raise ValueError(f"side {n} exceeds configured maximum {max_side}")
    if C.size and (not np.isfinite(C).all() or C.min() < 0):
        raise ValueError("costs must be finite and nonnegative")

    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    way = np.zeros(n + 1, dtype=int)
    col_owner = np.full(n + 1, 0, dtype=int)   # 1-based rows; 0 = free
    Cp = np.zeros((n + 1, n + 1))
    Cp[1:, 1:] = C

    for i in range(1, n + 1):
        col_owner[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = col_owner[j0]
            free = ~used
            free[0] = False
            cur = Cp[i0, 1:] - u[i0] - v[1:]
            cand = np.nonzero(free[1:])[0] + 1
            better = cur[cand - 1] < minv[cand]
            minv[cand[better]] = cur[cand[better] - 1]
            way[cand[better]] = j0
            j1 = cand[np.argmin(minv[cand])]
            delta = minv[j1]
            u[col_owner[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if col_owner[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            col_owner[j0] = col_owner[j1]
            j0 = j1

    perm = np.zeros(n, dtype=int)
    for j in range(1, n + 1):
        perm[col_owner[j] - 1] = j - 1
    value = float(C[np.arange(n), perm].sum())
    return perm, value


def wasserstein_1d(x, wx, y, wy, power=1.0):
    """Quantile-coupling transport cost between 1-d weighted clouds.

    Independent of the LP route: sorts both clouds, aligns their cumulative
    masses, and integrates |difference|^power over the shared mass axis.
    Total masses must agree.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    wx = np.asarray(wx, dtype=float).ravel()
    wy = np.asarray(wy, dtype=float).ravel()
    if wx.min(initial=0.0) < 0 or wy.min(initial=0.0) < 0:
        raise ValueError("weights must be nonnegative")
    total = wx.sum()
    if abs(total - wy.sum()) > 1e-12 * max(1.0, total):
        raise PlanConsistencyError("total masses differ")
    if total == 0:
        return 0.0
    ox, oy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    xs, ws = x[ox], wx[ox]
    ys, vs = y[oy], wy[oy]
    cx, cy = np.cumsum(ws), np.cumsum(vs)
    grid = np.unique(np.concatenate([cx, cy]))
    seg = np.diff(np.concatenate([[0.0], grid]))
    qx = xs[np.minimum(np.searchsorted(cx, grid - 1e-15 * total, side="left"), xs.size - 1)]
    qy = ys[np.minimum(np.searchsorted(cy, grid - 1e-15 * total, side="left"), ys.size - 1)]
    return float(np.sum(seg * np.abs(qx - qy) ** power))


# -- warehouse strategy ------------------------------------------------------------


def largest_remainder(values, total):
    """Round nonnegative reals to integers with the prescribed sum."""
    values = np.asarray(values, dtype=float)
    floors = np.floor(values).astype(int)
    short = int(total) - int(floors.sum())
    if short < 0:
        raise ValueError("floor sum already exceeds the target total")
    remainders = values - floors
    order = np.lexsort((np.arange(values.size), -remainders))
    floors[order[:short]] += 1
    return floors


@dataclass
class WarehouseReport:
    """Costs and budgets of the three-step center-to-center transport."""

    level: int
    alpha: float
    power: float
    lam_cells: np.ndarray
    rho_cells: np.ndarray
    discretized_lam: DiscreteMeasure
    discretized_rho: DiscreteMeasure
    middle_plan: DiscretePlan
    cost_first: float
    cost_middle_exact: float
    cost_middle_assignment: float
    cost_last: float
    end_step_budget: float
    scaling: dict            # integer masses a, b, scale z, rounding slack bound
    assignment_route: str    # "hungarian" or "integer-lp"

    @property
    def total(self):
        return self.cost_first + self.cost_middle_exact + self.cost_last

    @property
    def total_assignment(self):
        return self.cost_first + self.cost_middle_assignment + self.cost_last

    @property
    def middle_gap(self):
        return abs(self.cost_middle_assignment - self.cost_middle_exact)

    @property
    def error_budget(self):
        """2 * alpha * n^-power * ||lam|| plus the scaling slack."""
        return 2.0 * self.end_step_budget + self.scaling["slack_bound"]

    def to_dict(self):
        return {
            "level": self.level,
            "alpha": self.alpha,
            "power": self.power,
            "cost_first": self.cost_first,
            "cost_middle_exact": self.cost_middle_exact,
            "cost_middle_assignment": self.cost_middle_assignment,
            "cost_last": self.cost_last,
            "total": self.total,
            "total_assignment": self.total_assignment,
            "middle_gap": self.middle_gap,
            "end_step_budget": self.end_step_budget,
            "error_budget": self.error_budget,
            "assignment_route": self.assignment_route,
            "scaling": {
                "z": self.scaling["z"],
                "a": [int(x) for x in self.scaling["a"]],
                "b": [int(x) for x in self.scaling["b"]],
                "slack_bound": self.scaling["slack_bound"],
            },
            "lam_cells": list(self.lam_cells),
            "rho_cells": list(self.rho_cells),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def warehouse_strategy(lam, rho, cost, grid, z=None, assignment_cap=200):
    """Three-step transport through cell-center warehouses.

    Mass first collapses within each cell to its center (cost at most
    alpha * n^-power * ||lam||), moves between centers by discrete optimal
    transport, and finally spreads back onto the target support (same end
    budget). The middle step is solved exactly by LP and again by the
    integer-scaled assignment route; both values and their gap are reported.
    The report deliberately claims a near-optimal cost, not an optimal plan.
    """
    if not isinstance(cost, PowerDistance):
        raise TypeError("warehouse budgets require a PowerDistance cost")
    if not (lam.is_positive() and rho.is_positive()):
        raise ValueError("marginals must be positive")
    tv = lam.total_variation
    if abs(tv - rho.total_variation) > 1e-12 * max(1.0, tv):
        raise PlanConsistencyError("marginals must carry equal mass")

    n = grid.level
    idx_l = grid.classify(lam.points)
    idx_r = grid.classify(rho.points)
    if np.any(idx_l < 0):
        raise CoverageError(lam.points[idx_l < 0])
    if np.any(idx_r < 0):
        raise CoverageError(rho.points[idx_r < 0])

    centers = grid.centers()
    lam_cells = np.bincount(idx_l, weights=lam.weights, minlength=grid.p)
    rho_cells = np.bincount(idx_r, weights=rho.weights, minlength=grid.p)

    move_l = np.linalg.norm(lam.points - centers[idx_l], axis=1)
    move_r = np.linalg.norm(rho.points - centers[idx_r], axis=1)
    cost_first = float(np.sum(lam.weights * cost.alpha * move_l ** cost.power))
    cost_last = float(np.sum(rho.weights * cost.alpha * move_r ** cost.power))

    active = np.nonzero((lam_cells > 0) | (rho_cells > 0))[0]
    sub_cost = cost.matrix(centers[active], centers[active])
    sub_plan, cost_middle = discrete_ot_exact(lam_cells[active], rho_cells[active], sub_cost)
    matrix = np.zeros((grid.p, grid.p))
    matrix[np.ix_(active, active)] = sub_plan
    middle_plan = DiscretePlan(matrix, lam_cells, rho_cells, grid_x=grid, grid_y=grid,
                               validate=False)

    # integer-scaled route: masses become a_i/z and b_j/z with equal totals
    if z is None:
        z = 1e4 / tv if tv > 0 else 1.0
    target = int(round(z * tv))
    a = largest_remainder(z * lam_cells[active], target)
    b = largest_remainder(z * rho_cells[active], target)
    max_cost = float(sub_cost.max(initial=0.0))
    slack = max_cost * (np.abs(a / z - lam_cells[active]).sum()
                        + np.abs(b / z - rho_cells[active]).sum())

    if target <= assignment_cap:
        rows = np.repeat(np.arange(active.size), a)
        cols = np.repeat(np.arange(active.size), b)
        big = sub_cost[np.ix_(rows, cols)]
        _, raw = assignment_solve(big, max_side=max(assignment_cap, 1))
        cost_assign = raw / z
        route = "hungarian"
    else:
        # same optimum as the replicated assignment: integral marginals make
        # the transport polytope's vertices integral
        _, raw = discrete_ot_exact(a.astype(float), b.astype(float), sub_cost)
        cost_assign = raw / z
        route = "integer-lp"

    budget = cost.alpha * float(n) ** (-cost.power) * tv
    return WarehouseReport(
        level=n, alpha=cost.alpha, power=cost.power,
        lam_cells=lam_cells, rho_cells=rho_cells,
        discretized_lam=DiscreteMeasure(centers[lam_cells > 0], lam_cells[lam_cells > 0]),
        discretized_rho=DiscreteMeasure(centers[rho_cells > 0], rho_cells[rho_cells > 0]),
        middle_plan=middle_plan,
        cost_first=cost_first,
        cost_middle_exact=float(cost_middle),
        cost_middle_assignment=float(cost_assign),
        cost_last=cost_last,
        end_step_budget=float(budget),
        scaling={"z": float(z), "a": a, "b": b, "slack_bound": float(slack)},
        assignment_route=route,
    )


# -- coarse graining and the simple Markov approximation -----------------------------


def coarse_grain_plan(coupling, grid_x, grid_y, mu, nu):
    """Aggregate a point coupling onto cells: entry (i, j) is kappa(C_i x C_j)."""
    scale = max(1.0, coupling.total_mass)
    mx = coupling.marginal_x()
    my = coupling.marginal_y()
    if (mx - mu).total_variation > 1e-12 * scale:
        raise PlanConsistencyError("coupling source marginal does not match mu")
    if (my - nu).total_variation > 1e-12 * scale:
        raise PlanConsistencyError("coupling target marginal does not match nu")
    ix = grid_x.classify(coupling.points_x)
    iy = grid_y.classify(coupling.points_y)
    if np.any(ix < 0):
        raise CoverageError(coupling.points_x[ix < 0])
    if np.any(iy < 0):
        raise CoverageError(coupling.points_y[iy < 0])
    matrix = np.zeros((grid_x.p, grid_y.p))
    np.add.at(matrix, (ix[:, None], iy[None, :]), coupling.matrix)
    return DiscretePlan(matrix, grid_x.masses(mu), grid_y.masses(nu),
                        grid_x=grid_x, grid_y=grid_y)


@dataclass
class OscillationReport:
    """Sample certificates |<c, kappa - kappa_n>| <= beta_n * ||kappa||.

    beta values are oscillations of each cost over finite cell samples
    (support points plus in-cell centers), so the bound is a certificate for
    the measures at hand, not a statement about the continuum cells.
    """

    level: int
    total_mass: float
    rows: list   # dicts: cost, beta_n, bound, measured_gap

    @property
    def max_beta(self):
        return max((r["beta_n"] for r in self.rows), default=0.0)

    @property
    def max_gap(self):
        return max((r["measured_gap"] for r in self.rows), default=0.0)

    def to_dict(self):
        return {"level": self.level, "total_mass": self.total_mass, "rows": self.rows}

    def write_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["level", "cost", "beta_n", "bound", "measured_gap"])
            for r in self.rows:
                writer.writerow([self.level, r["cost"], repr(r["beta_n"]),
                                 repr(r["bound"]), repr(r["measured_gap"])])


def _cell_pair_oscillations(cost_fn, samples_x, samples_y, occupied):
    """sup - inf of the cost over sampled points of each occupied cell pair."""
    beta = {}
    for (i, j) in occupied:
        sx, sy = samples_x[i], samples_y[j]
        if sx.shape[0] == 0 or sy.shape[0] == 0:
            beta[(i, j)] = 0.0
            continue
        block = cost_fn.matrix(sx, sy)
        beta[(i, j)] = float(block.max() - block.min())
    return beta


def simple_markov_approx(phi, mu, nu, grid, cost_battery=(), check_markov=True):
    """Project a Markov transfunction onto cell resolution.

    Builds the atom-level plan of phi on mu, aggregates it to cells, and
    returns the cell transfunction, its matrix on cell densities (entry
    [i, j] = kappa(C_i x C_j) / nu(C_j)), and an oscillation report that
    certifies the weak gap between the fine and coarse plans for each cost
    in the battery. Also verifies the projection identity: the coarse map
    composed with cell averaging is itself.
    """
    if not (mu.is_positive() and nu.is_positive()):
        raise ValueError("marginals must be positive")
    scale = max(1.0, mu.total_variation)
    if abs(mu.total_variation - nu.total_variation) > 1e-12 * scale:
        raise PlanConsistencyError("marginals must carry equal mass")
    if check_markov:
        mu_cells = grid.masses(mu)
        basis = [grid.restrict(mu, i) for i in range(grid.p) if mu_cells[i] > 0]
        report = markov_check(phi, basis)
        if not report.passed:
            raise MarkovCheckError(report)

    coupling = transfunction_to_point_coupling(phi, mu)
    out_marginal = coupling.marginal_y()
    if (out_marginal - nu).total_variation > 1e-9 * scale:
        raise PlanConsistencyError("phi(mu) does not match the supplied nu")

    kappa_n = coarse_grain_plan(coupling, grid, grid, mu, nu)
    phi_n = plan_to_transfunction(kappa_n, mu, nu)
    nu_cells = kappa_n.nu_cells
    t = np.divide(kappa_n.matrix, nu_cells[None, :],
                  out=np.zeros_like(kappa_n.matrix), where=nu_cells[None, :] > 0)
    m_n = MarkovMatrix(t, kappa_n.mu_cells, nu_cells, grid_x=grid, grid_y=grid)

    # projection identity: applying after cell averaging changes nothing
    averager = identity_measurable(grid, mu)
    proj_residual = 0.0
    for i in range(grid.p):
        basis = grid.restrict(mu, i)
        if len(basis) == 0:
            continue
        direct = apply(phi_n, basis)
        through = apply(phi_n, apply(averager, basis))
        proj_residual = max(proj_residual, (direct - through).total_variation)

    # oscillation samples: coupled support points, in-cell centers, and the
    # covering's cell grid sample. All are exact cell members, so the
    # certificate value only tightens toward the true oscillation.
    ix = grid.classify(coupling.points_x)
    iy = grid.classify(coupling.points_y)
    sup_x = [coupling.points_x[ix == i] for i in range(grid.p)]
    sup_y = [coupling.points_y[iy == j] for j in range(grid.p)]
    cell_grid = grid.covering.cell_samples(grid.level)
    osc_x, osc_y = [], []
    for i in range(grid.p):
        osc_x.append(np.vstack([sup_x[i], cell_grid[i]]))
        osc_y.append(np.vstack([sup_y[i], cell_grid[i]]))

    occupied = [(i, j) for i, j in zip(*np.nonzero(kappa_n.matrix))]
    total = kappa_n.total_mass
    rows = []
    for cost_fn in cost_battery:
        beta = _cell_pair_oscillations(cost_fn, osc_x, osc_y, occupied)
        beta_n = max(beta.values(), default=0.0)
        fine_val = float((cost_fn.matrix(coupling.points_x, coupling.points_y)
                          * coupling.matrix).sum())
        coarse_val = 0.0
        for (i, j) in occupied:
            if sup_x[i].shape[0] == 0 or sup_y[j].shape[0] == 0:
                continue
            wx = mu.weights[ix == i]
            wy = nu.weights[iy == j]
            block = cost_fn.matrix(sup_x[i], sup_y[j])
            coarse_val += kappa_n.matrix[i, j] * float(
                wx @ block @ wy) / (wx.sum() * wy.sum())
        gap = abs(fine_val - coarse_val)
        rows.append({"cost": cost_fn.label, "beta_n": beta_n,
                     "bound": beta_n * total, "measured_gap": gap})

    report = OscillationReport(level=grid.level, total_mass=total, rows=rows)
    report.projection_residual = proj_residual
    report.fine_coupling = coupling
    return phi_n, m_n, report


def restriction_optimality_check(plan, h_cells, cost, tol=1e-9):
    """Verify that row-reweighted optimal plans stay optimal.

    Starting from a plan that is optimal for its own marginals, scaling the
    rows by a [0, 1] density and re-solving for the restricted marginals
    must reproduce the restricted plan's cost. `cost` may be a CostFunction
    (priced at the plan's cell centers) or a ready cell-pair matrix. Returns
    a dict report; if the input plan is not optimal the check is skipped and
    reported as such.
    """
    h = np.asarray(h_cells, dtype=float).ravel()
    if h.shape[0] != plan.mu_cells.shape[0]:
        raise ValueError("need one density value per source cell")
    if h.min(initial=0.0) < 0 or h.max(initial=0.0) > 1:
        raise ValueError("density values must lie in [0, 1]")
    if isinstance(cost, CostFunction):
        if plan.grid_x is None or plan.grid_y is None:
            raise TransfunError("plan needs grids so costs can be evaluated at centers")
        C = cost.matrix(plan.grid_x.centers(), plan.grid_y.centers())
    else:
        C = np.asarray(cost, dtype=float)
        if C.shape != plan.matrix.shape:
            raise ValueError("cost matrix shape does not match the plan")
    base_cost = float((C * plan.matrix).sum())
    _, opt = discrete_ot_exact(plan.mu_cells, plan.nu_cells, C)
    if abs(base_cost - opt) > tol * max(1.0, abs(opt)):
        return {"skipped": True, "reason": "input plan is not optimal",
                "plan_cost": base_cost, "optimal_cost": opt}

    restricted = h[:, None] * plan.matrix
    mu_r = restricted.sum(axis=1)
    nu_r = restricted.sum(axis=0)
    restricted_cost = float((C * restricted).sum())
    _, opt_r = discrete_ot_exact(mu_r, nu_r, C)
    residual = abs(restricted_cost - opt_r)
    return {
        "skipped": False,
        "restricted_cost": restricted_cost,
        "optimal_cost": float(opt_r),
        "residual": residual,
        "passed": residual <= tol * max(1.0, abs(opt_r)),
    }
