"""Mixed-type duality for multiobjective variational problems with
square-root terms: discretization, duals, solver, multiplier recovery and
invexity certificates."""

from .catalog import get_problem, listing, load_catalog
from .dual import (DualKind, DualPoint, Partition, classify, dual_feasibility, dual_objective,
                   parse_partition, static_duality_pair, stationarity_residual,
                   transversality_residual, weak_duality_check)
from .errors import MixDualError
from .expr import Expr, parse
from .grid import TimeGrid, Trajectory, make_grid
from .invexity import (FunctionalSpec, certify_invex, certify_pseudoinvex,
                       certify_quasiinvex)
from .problem import Boundary, PrimalPoint, ProblemSpec, load_problem, parse_problem
from .recovery import (converse_duality_check, recover_multipliers, recover_z, schwartz_gap,
                       strong_duality_check)
from .report import Report
from .solver import (SolverOptions, efficiency_check, pareto_sweep, solve_epsilon_constraint,
                     solve_weighted)

__version__ = "0.1.0"
