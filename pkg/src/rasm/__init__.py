"""Risk-averse coverage maximization.

Maximizes the conditional value-at-risk (CVaR) of the random number of
covered items under a cardinality budget, using delayed constraint
generation with exact-oracle optimality cuts. See README.md for the CLI
and file formats.
"""

from .cuts import (
    Cut,
    CutFamily,
    cut_to_text,
    exact_lifting_coefficients,
    greedy_lifted_cut,
    greedy_lifting_order,
    lshaped_cut,
    new_cut,
    rhs,
)
from .distribution import (
    Pmf,
    coverage_pmf,
    cvar_from_scenarios,
    item_coverage_probs,
    pmf_bruteforce,
)
from .errors import CapacityError, ParameterError, ParseError
from .instance import (
    CoverageInstance,
    FeasibleRegion,
    as_selection,
    generate_instance,
    load_instance,
    save_instance,
    selection_from_support,
    support_of,
)
from .master import CutPool, MasterSolution, export_lp, solve_master
from .risk import (
    RascCvarOracle,
    RiskParams,
    cvar_alpha,
    cvar_bruteforce,
    evaluate_support,
    expectation,
    rasc_oracle,
    var_alpha,
)
from .solver import (
    SolveConfig,
    SolveResult,
    SolveStatus,
    count_feasible_supports,
    solve_exhaustive,
    solve_rasm,
    solve_with_pool,
)

__version__ = "0.1.0"
