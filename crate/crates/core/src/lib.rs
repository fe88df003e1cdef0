//! Exact solvers for the minimum-cost k-hop Steiner tree problem.
//!
//! Given a metric, a root `r`, terminals `X` and a hop bound `k`, find the
//! cheapest tree rooted at `r` that spans `X` with every vertex at most `k`
//! edges from the root. The crate has exact dynamic programs for path, tree
//! and bounded-treewidth metrics, an exhaustive oracle for small inputs, and
//! a δ-net heuristic that trades one extra hop for a smaller search space.

pub mod cost;
pub mod decomposition;
pub mod format;
pub mod generate;
pub mod instance;
pub mod metric;
pub mod model;
pub mod netlift;
pub mod oracle;
pub mod path;
pub mod solve;
pub mod tree;
pub mod treewidth;
pub mod util;
pub mod verify;

pub use cost::Cost;
pub use decomposition::{
    heuristic_decompose, make_nice, validate_decomposition, DecompositionError, NiceKind, NiceNode,
    NiceTreeDecomposition, TreeDecomposition, Violation,
};
pub use format::{
    parse_decomposition, parse_instance, write_decomposition, write_instance, FormatError, InstanceFile, SolutionFile,
};
pub use generate::{generate, GenKind, GenParams, Generated};
pub use instance::{Instance, InstanceError, MetricClass};
pub use metric::{
    build_metric, closest, minimal_inducing_subgraph, Metric, MetricError, VertexOrBottom, WeightedGraph,
};
pub use model::{
    anchoring_from_labeling, audit_charges, lap_cost, lap_to_tree, validate_lap, Label, Lap, ModelError, Solution,
    SteinerTree,
};
pub use netlift::{
    build_delta_net, lift_solution, net_instance, net_pipeline, prunable_pairs, star_upper_bound, DeltaNet, NetError,
    NetOutcome, SolverChoice,
};
pub use oracle::{
    oracle_khop, oracle_mst, oracle_parent_functions, oracle_star, oracle_ufl, OracleError, OracleResult,
};
pub use path::{path_dp_cell, reduce_to_terminals, solve_path, PathError, PathInstance};
pub use solve::{solve_with, Algorithm, SolveError, SolveOptions};
pub use tree::{anchor_cost_cv, child_phi_candidates, child_rho, solve_tree, RootedMetricTree, TreeDp, TreeError};
pub use treewidth::{
    bag_cell, check_budget, heuristic_nice, solve_treewidth, solve_treewidth_heuristic, state_space_log10,
    TreewidthError, TwDp, DEFAULT_BUDGET,
};
pub use verify::{verify, Problem, VerifyReport};
