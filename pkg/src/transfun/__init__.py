"""Transfunction algebra on weighted point clouds.

Measures are finite weighted point clouds; transfunctions map measures to
measures. The package covers the plan / Markov-operator / transfunction
correspondence at cell resolution, Radon adjoints, approximations of
identity over ball coverings, and a warehouse strategy that brackets
optimal transport costs with simple Markov transfunctions.
"""

from .errors import (AbsoluteContinuityError, CoverageError, DimensionMismatch,
                     MarkovCheckError, PlanConsistencyError, TransfunError)
from .measure import (DiscreteMeasure, delta, density_multiply, integrate,
                      jordan, pushforward, read_measure, to_density,
                      to_measure, write_measure)
from .fields import (Affine, Bump, CellIndicator, Constant, DistanceField,
                     LinearCombination, Lipschitz, PointSetIndicator,
                     PointwiseProduct, Product, Pullback, ScalarField, scaled)
from .covering import CellGrid, Covering, build_covering
from .identity import (TentSystem, WeakGapTable, identity_continuous,
                       identity_measurable, identity_pointmass, weak_gap)
from .transfunction import (DiscretePlan, MarkovMatrix, MarkovReport,
                            PointCoupling, SimpleTransfunction, apply, dagger,
                            markov_check, operator_to_transfunction,
                            plan_to_transfunction, read_plan,
                            reweight_instructions, transfunction_to_operator,
                            transfunction_to_plan,
                            transfunction_to_point_coupling, write_plan)
from .adjoint import (AdjointOperator, MeasurableAdjoint, ResidualReport,
                      adjoint_continuous, adjoint_measurable,
                      adjoint_of_simple, extremal_norm_battery,
                      measurable_adjoint, multiplier_adjoint,
                      pairing_residual, pushforward_adjoint)
from .ot import (CostFunction, OscillationReport, PowerDistance, ProductCost,
                 Tabulated, WarehouseReport, assignment_solve,
                 coarse_grain_plan, discrete_ot_exact, largest_remainder,
                 nw_vertex_minimum, ot_optimality_certificate, plan_cost,
                 restriction_optimality_check, simple_markov_approx,
                 warehouse_strategy, wasserstein_1d)

__version__ = "0.1.0"
