//! One entry point over every exact solver.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::decomposition::NiceTreeDecomposition;
use crate::instance::Instance;
use crate::model::{ModelError, Solution};
use crate::oracle::{oracle_khop, OracleError};
use crate::path::{solve_path, PathError};
use crate::tree::{solve_tree, TreeError};
use crate::treewidth::{check_budget, heuristic_nice, solve_treewidth, TreewidthError, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Path,
    Tree,
    Treewidth,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Path, Algorithm::Tree, Algorithm::Treewidth, Algorithm::Oracle];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Path => "path",
            Algorithm::Tree => "tree",
            Algorithm::Treewidth => "treewidth",
            Algorithm::Oracle => "oracle",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected path, tree, treewidth or oracle)"))
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Decomposition for the treewidth solver; a heuristic one otherwise.
    pub decomposition: Option<NiceTreeDecomposition>,
    pub budget: f64,
    /// Run the treewidth solver even past the budget.
    pub force: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { decomposition: None, budget: DEFAULT_BUDGET, force: false }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Treewidth(#[from] TreewidthError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl SolveError {
    /// No tree exists, or the solver declined the instance size.
    pub fn is_infeasible_or_budget(&self) -> bool {
        matches!(
            self,
            SolveError::Tree(TreeError::Infeasible)
                | SolveError::Treewidth(TreewidthError::Infeasible | TreewidthError::BudgetExceeded { .. })
                | SolveError::Oracle(OracleError::Infeasible | OracleError::TooLarge { .. })
                | SolveError::Path(PathError::TooLarge(_))
        )
    }
}

pub fn solve_with(instance: &Instance, algorithm: Algorithm, options: &SolveOptions) -> Result<Solution, SolveError> {
    Ok(match algorithm {
        Algorithm::Path => solve_path(instance)?,
        Algorithm::Tree => solve_tree(instance)?,
        Algorithm::Treewidth => {
            let nice = match &options.decomposition {
                Some(nice) => nice.clone(),
                None => heuristic_nice(instance)?,
            };
            if !options.force {
                check_budget(instance.n(), instance.hops(), nice.width() + 1, options.budget)?;
            }
            solve_treewidth(instance, &nice)?
        }
        Algorithm::Oracle => {
            let o = oracle_khop(instance)?;
            let charges = Solution::lap_charges(instance.metric(), &o.witness);
            Solution::from_lap(instance, o.witness, o.cost, charges, o.labelings)?
        }
    })
}
