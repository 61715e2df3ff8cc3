"""Radon adjoints: operators on test fields paired with transfunctions.

An operator S is the Radon adjoint of a transfunction Phi when
<g, Phi(lambda)> = <S(g), lambda> for every field g and measure lambda in
the working families. For simple transfunctions the adjoint is the explicit
finite sum S(g) = sum_i <g, rho_i> f_i; for the measurable setting it is the
density-isometry composite around the marginal-swapped transfunction.
"""

import json
from dataclasses import dataclass

import numpy as np

from .fields import Bump, LinearCombination, PointwiseProduct, Pullback
from .measure import delta, integrate, to_density, to_measure
from .transfunction import apply, dagger


class AdjointOperator:
    """Linear operator on fields, evaluated through a synthesis rule.

    `field_for(g)` returns S(g) as a ScalarField; `pair(g, lam)` computes
    <S(g), lam>. The measurable setting overrides `pair` to work through
    densities over the reference measures.
    """

    def __init__(self, field_for, setting="continuous", label=""):
        self._field_for = field_for
        self.setting = setting
        self.label = label

    def field(self, g):
        return self._field_for(g)

    def pair(self, g, lam):
        return integrate(self.field(g), lam)

    def __call__(self, g):
        return self.field(g)


def adjoint_of_simple(phi):
    """S(g) = sum_i <g, rho_i> f_i, the adjoint of a simple transfunction."""

    def field_for(g):
        coeffs = [integrate(g, rho) for _, rho in phi.terms]
        return LinearCombination([f for f, _ in phi.terms], coeffs,
                                 label=f"S({g.label or 'g'})")

    return AdjointOperator(field_for, setting="continuous",
                           label=f"adjoint({phi.label})" if phi.label else "adjoint")


def adjoint_continuous(phi, x, g):
    """Pointwise adjoint evaluation <g, Phi(delta_x)> in the continuous setting."""
    return integrate(g, apply(phi, delta(x)))


def pushforward_adjoint(map_fn, dimension=None, lipschitz=None):
    """Adjoint of the push-forward along a point map: the pull-back g o m."""
    return AdjointOperator(
        lambda g: Pullback(g, map_fn, dimension=dimension, lipschitz=lipschitz),
        setting="continuous", label="pullback")


def multiplier_adjoint(f):
    """Adjoint of lambda -> f * lambda, namely g -> g * f."""
    return AdjointOperator(lambda g: PointwiseProduct(g, f),
                           setting="continuous", label="multiplier")


def adjoint_measurable(phi, mu, nu, g_values, grid_x, grid_y):
    """Density-level adjoint: J_mu^{-1} after the dagger after J_nu.

    `g_values` is a density vector over supp(nu); the result is a density
    vector over supp(mu).
    """
    dag = dagger(phi, mu, nu, grid_x, grid_y)
    return to_density(apply(dag, to_measure(g_values, nu)), mu)


class MeasurableAdjoint(AdjointOperator):
    """Adjoint in the measurable setting, acting through densities.

    Fields are read as densities by evaluation on supp(nu); pairing works
    against measures dominated by mu.
    """

    def __init__(self, phi, mu, nu, grid_x, grid_y):
        super().__init__(None, setting="measurable", label="measurable-adjoint")
        self.reference = (mu, nu)
        self._dagger = dagger(phi, mu, nu, grid_x, grid_y)

    def density_for(self, g):
        mu, nu = self.reference
        g_vals = g(nu.points) if callable(g) else np.asarray(g, dtype=float)
        return to_density(apply(self._dagger, to_measure(g_vals, nu)), mu)

    def field(self, g):
        raise NotImplementedError("measurable adjoints produce densities, use density_for")

    def pair(self, g, lam):
        mu, _ = self.reference
        f_vals = to_density(lam, mu)
        return float(np.sum(self.density_for(g) * f_vals * mu.weights))


def measurable_adjoint(phi, mu, nu, grid_x, grid_y):
    return MeasurableAdjoint(phi, mu, nu, grid_x, grid_y)


# -- residual and norm reporting ------------------------------------------------


@dataclass
class ResidualReport:
    rows: list
    max_residual: float
    norm_phi: float
    norm_adjoint: float
    tol: float

    @property
    def norm_gap(self):
        return abs(self.norm_phi - self.norm_adjoint)

    @property
    def passed(self):
        return self.max_residual <= self.tol

    def to_dict(self):
        return {
            "tol": self.tol,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "norm_certificate_transfunction": self.norm_phi,
            "norm_certificate_adjoint": self.norm_adjoint,
            "norm_gap": self.norm_gap,
            "rows": self.rows,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def pairing_residual(phi, adjoint_op, g_battery, lam_battery, tol=1e-12,
                     eval_points_x=None, eval_points_y=None):
    """Check <g, Phi(lam)> = <S(g), lam> over batteries and certify norms.

    The norm certificates are battery suprema: max ||Phi lam|| / ||lam|| and
    max ||S g|| / ||g||, with field norms taken over evaluation grids (battery
    supports plus any extra points supplied). Finite batteries can only
    bracket the true operator norms, so the report carries the two
    certificates and their gap rather than asserting equality.
    """
    g_battery = list(g_battery)
    lam_battery = list(lam_battery)
    if not g_battery or not lam_battery:
        raise ValueError("batteries must not be empty")

    outputs = [apply(phi, lam) for lam in lam_battery]

    rows = []
    worst = 0.0
    for gi, g in enumerate(g_battery):
        for li, (lam, out) in enumerate(zip(lam_battery, outputs)):
            lhs = integrate(g, out)
            rhs = adjoint_op.pair(g, lam)
            res = abs(lhs - rhs)
            worst = max(worst, res)
            rows.append({"field": g.label or f"g[{gi}]", "measure": f"lam[{li}]",
                         "lhs": lhs, "rhs": rhs, "residual": res})

    norm_phi = 0.0
    for lam, out in zip(lam_battery, outputs):
        tv = lam.total_variation
        if tv > 0:
            norm_phi = max(norm_phi, out.total_variation / tv)

    # evaluation grids for uniform-norm certificates
    pts_x = [lam.points for lam in lam_battery if len(lam)]
    if eval_points_x is not None:
        pts_x.append(np.asarray(eval_points_x, dtype=float))
    pts_y = [out.points for out in outputs if len(out)]
    if eval_points_y is not None:
        pts_y.append(np.asarray(eval_points_y, dtype=float))

    norm_adj = 0.0
    if adjoint_op.setting == "measurable":
        mu, nu = adjoint_op.reference
        for g in g_battery:
            g_vals = g(nu.points)
            g_norm = np.abs(g_vals).max() if g_vals.size else 0.0
            if g_norm > 0:
                s_vals = adjoint_op.density_for(g)
                norm_adj = max(norm_adj, np.abs(s_vals).max() / g_norm)
    else:
        grid_x = np.vstack(pts_x) if pts_x else np.zeros((0, 1))
        grid_y = np.vstack(pts_y) if pts_y else np.zeros((0, 1))
        for g in g_battery:
            g_norm = np.abs(g(grid_y)).max() if grid_y.size else g.bound
            if g_norm > 0:
                s = adjoint_op.field(g)
                s_norm = np.abs(s(grid_x)).max() if grid_x.size else 0.0
                norm_adj = max(norm_adj, s_norm / g_norm)

    return ResidualReport(rows=rows, max_residual=worst, norm_phi=float(norm_phi),
                          norm_adjoint=float(norm_adj), tol=tol)


def extremal_norm_battery(phi, eval_points):
    """Battery additions that make both norm certificates meet.

    For a simple transfunction the operator norm equals the largest total
    variation of sum_i f_i(x) rho_i over points x. Returns the witness point
    mass and a continuous field that attains the same value through the
    adjoint: bumps carrying the weight signs of the extremal output measure.
    """
    pts = np.asarray(eval_points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    best_tv, best_x, best_out = -1.0, None, None
    for x in pts:
        out = apply(phi, delta(x))
        tv = out.total_variation
        if tv > best_tv:
            best_tv, best_x, best_out = tv, x, out
    lam_extra = [delta(best_x)]
    if len(best_out) == 0:
        return [], lam_extra
    support = best_out.points
    if support.shape[0] > 1:
        d = np.linalg.norm(support[:, None, :] - support[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        radius = 0.49 * d.min()
    else:
        radius = 0.5
    bumps = [Bump(pt, 0.0, radius) for pt in support]
    signs = np.sign(best_out.weights)
    g_star = LinearCombination(bumps, signs, label="extremal-sign")
    return [g_star], lam_extra
