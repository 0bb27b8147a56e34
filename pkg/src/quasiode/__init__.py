"""quasiode: odd-order quasi-differential expressions with singular coefficients.

The package regularizes differential expressions of order 2n+1 whose
coefficients may be distributions (derivatives of steps), by rewriting
them through a structured first-order system. It provides

  * an exact symbolic engine proving the rewriting identity termwise,
  * the system matrix pattern and its pointwise evaluation,
  * numeric quasi-derivative chains with a two-route cross-check,
  * an adaptive complex integrator aware of coefficient jumps, and
  * boundary-eigenvalue search via the characteristic determinant,

plus a batch CLI (``quasiode``) over one JSON problem-document format.
"""

from .coeffs import (
    Coefficient,
    CoefficientSet,
    eval_coefficient,
    expr_coefficient,
    grid_coefficient,
    load_coefficient_set,
    phi,
    serialize_coefficient_set,
    steps_coefficient,
)
from .errors import (
    CoefficientError,
    EvaluationError,
    IntegrationError,
    ParseError,
    QuasiodeError,
    SchemaError,
    SmoothnessError,
)
from .expr import differentiate, evaluate, parse_expression
from .quasi import QuasiVector, SmoothFunction, apply_tau, quasi_derivatives
from .shinzettl import (
    EntryKind,
    ShinZettlMatrix,
    eval_entry,
    eval_matrix,
    shin_zettl_matrix,
    sparsity_pattern,
)
from .solver import (
    BoundaryProblem,
    ComplexRectSearch,
    Eigenvalue,
    FundamentalMatrix,
    RealIntervalSearch,
    SpectralSystem,
    boundary_problem,
    characteristic_det,
    find_eigenvalues,
    fundamental_matrix,
    integrate_system,
    liouville_check,
    spectral_system,
)
from .symbolic import (
    Atom,
    AtomicDivergentExpr,
    EqualityReport,
    ExactComplex,
    FormalExpr,
    FormalTerm,
    divergent_form,
    expand,
    expr_equal,
    formal_adjoint,
    formal_derivative,
    quasi_chain,
    quasi_tau,
    verify_identity,
)

__version__ = "0.1.0"
