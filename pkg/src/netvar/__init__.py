"""Grouped time-varying network VAR: simulation, estimation and inference."""

from .cluster import (
    DistanceMatrix,
    MergeTrace,
    agglomerate,
    build_merge_trace,
    distance_matrix,
    full_pipeline,
    grid_points,
    pair_distance,
    trimmed_grid,
)
from .config import RunConfig, apply_overrides, load_config, parse_config_text
from .data import ErrorModel, GroupStructure, Network, Panel
from .errors import (
    DegenerateResidualsError,
    GenerationFailure,
    InputError,
    InstabilityError,
    InsufficientLocalDataError,
    NetvarError,
    SingularDesignError,
)
from .kernels import Bandwidths, Kernel, kernel_eval, kernel_moment, rule_of_thumb
from .linalg import sym_inv, sym_inv_sqrt
from .mc import (
    McSummary,
    RepOutcome,
    match_to_truth,
    purity,
    run_mc,
    run_replication,
    summarize,
)
from .local import (
    CoefficientPathSet,
    CovPlugins,
    NodeFit,
    build_plugins,
    delta_hat,
    fit_all_nodes,
    fit_node,
    fit_node_bc,
    residuals,
    sigma_pair_hat,
)
from .postgroup import GroupPath, group_paths, omega_hat, post_fit, rmse
from .scenarios import (
    CoefExpr,
    CoefficientScenario,
    paper_scenario,
    paper_test_scenario,
    parse_coef_expr,
    parse_scenario,
)
from .select import ICReport, default_rho, ic_curve, pooled_fit, sigma2_nt
from .simulate import (
    StabilityReport,
    assign_groups,
    gen_adjacency,
    gen_error_cov,
    simulate_panel,
    stability_check,
)
from .spectest import (
    NullModel,
    TestResult,
    custom_null,
    fit_constant_null,
    null_residuals,
    q_statistic,
    run_test,
    standardize,
)

__version__ = "0.1.0"
