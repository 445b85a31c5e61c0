"""Variational time discretizations VTD(r, k) with quadrature and interpolation, in extended precision."""

from .cases import CASES, CaseConfig, get_case, load_config
from .diagnostics import (
    OrderDiagnostics,
    PredictedOrders,
    cascade_lower_bounds,
    compute_diagnostics,
    j_error_orders,
    predict_orders,
    predicted_j_orders,
    stage_orders,
)
from .errors import (
    AssumptionViolated,
    ExactSolutionMissing,
    InvalidNodeSet,
    LengthMismatch,
    NewtonDiverged,
    OutOfDomain,
    PrecisionError,
    SingularJacobian,
    SingularMatrix,
    TotalDerivativeUnavailable,
    UnknownCase,
    VTDError,
    ZeroError,
)
from .legendre import RefPolynomial
from .nodes import NodeSet, QuadRule, apply_rule, make_nodes, make_rule, parse_nodes
from .operators import IDENTITY, InterpCascade, JOperator, POperator, cascade_apply, make_cascade
from .precision import DEFAULT_BITS, big, working_precision
from .problems import Jet, OdeProblem, get_problem, initial_jet, paper_test_problem, register_problem, total_derivative
from .solver import DiscreteSolution, MethodConfig, NewtonReport, TimeMesh, assemble_residual, eval_solution, run_vtd, solve_local
from .study import ConvergenceTable, ErrorReport, emit_table, eoc, error_norms, parse_csv, run_case

__version__ = "0.1.0"
