"""Online contract selection: optimal policies, exact ratios, bounds, simulation."""

from .distributions import (
    DiscreteLaw,
    Distribution,
    Exponential,
    NonIidInstance,
    PiecewiseInverseCdf,
    UniformInterval,
    UniformUnit,
    distribution_from_json,
    opt_expected,
    opt_trajectory,
    parse_dist_spec,
    validate,
)
from .osdc import (
    DpTable,
    NonIidDpTable,
    act,
    build_dp,
    build_noniid_dp,
    noniid_alg_cost,
    noniid_opt_exact,
    optimal_alg_cost,
)
from .bounds import (
    CostLadder,
    GeneralDualBound,
    UniformDual,
    contract_cost,
    cost_ladder,
    general_dual_bound,
    ladder_ratio,
    published_table_objective,
    uniform_dual,
)
from .oscc import (
    ContractRecord,
    OsccPolicyParams,
    disser_params,
    family_params,
    queue_contracts,
    run,
)
from .ratio import (
    OdeSolution,
    RatioCertificate,
    solve_zeta,
    solve_zeta_star,
    step_eps,
    worst_case_distribution,
)
from .harness import SimulationReport, make_noniid_impossibility, simulate

__all__ = [
    "DiscreteLaw", "Distribution", "Exponential", "NonIidInstance",
    "PiecewiseInverseCdf", "UniformInterval", "UniformUnit",
    "distribution_from_json", "opt_expected", "opt_trajectory",
    "parse_dist_spec", "validate",
    "DpTable", "NonIidDpTable", "act", "build_dp", "build_noniid_dp",
    "noniid_alg_cost", "noniid_opt_exact", "optimal_alg_cost",
    "OdeSolution", "RatioCertificate", "solve_zeta", "solve_zeta_star",
    "step_eps", "worst_case_distribution",
    "ContractRecord", "OsccPolicyParams", "disser_params", "family_params",
    "queue_contracts", "run",
    "CostLadder", "GeneralDualBound", "UniformDual", "contract_cost",
    "cost_ladder", "general_dual_bound", "ladder_ratio",
    "published_table_objective", "uniform_dual",
    "SimulationReport", "make_noniid_impossibility", "simulate",
]
