//! δ-nets and the one-extra-hop lift.
//!
//! Solving on a sparse net `U` and then hanging every off-net terminal on
//! its nearest net vertex gives a `(k + 1)`-hop tree whose extra cost is at
//! most `n · δ`.

use thiserror::Error;

use crate::cost::Cost;
use crate::decomposition::NiceTreeDecomposition;
use crate::instance::{Instance, InstanceError};
use crate::metric::{Metric, VertexOrBottom};
use crate::model::{ModelError, Solution, SteinerTree};
use crate::oracle::{oracle_khop, OracleError};
use crate::tree::{solve_tree, TreeError};
use crate::treewidth::{solve_treewidth, solve_treewidth_heuristic, TreewidthError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("net tree is invalid: {0}")]
    InvalidNetTree(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Treewidth(#[from] TreewidthError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaNet {
    /// Net vertices in insertion order; the root comes first.
    pub net: Vec<usize>,
    pub delta: Cost,
    /// Nearest net vertex of every vertex.
    pub assignment: Vec<usize>,
    member: Vec<bool>,
}

impl DeltaNet {
    pub fn contains(&self, v: usize) -> bool {
        self.member[v]
    }

    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    /// Every vertex within `δ` of the net.
    pub fn is_covering(&self, metric: &Metric) -> bool {
        (0..metric.n()).all(|v| self.net.iter().any(|&u| metric.dist(u, v) <= self.delta))
    }

    /// Net vertices pairwise more than `δ` apart.
    pub fn is_packing(&self, metric: &Metric) -> bool {
        self.net.iter().enumerate().all(|(i, &u)| self.net[i + 1..].iter().all(|&v| metric.dist(u, v) > self.delta))
    }
}

/// Greedy scan from `r`, then by increasing id, keeping each vertex farther
/// than `δ` from everything kept so far.
pub fn build_delta_net(metric: &Metric, r: usize, delta: Cost) -> DeltaNet {
    let n = metric.n();
    let mut net = vec![r];
    for v in (0..n).filter(|&v| v != r) {
        if net.iter().all(|&u| metric.dist(u, v) > delta) {
            net.push(v);
        }
    }
    let mut member = vec![false; n];
    for &u in &net {
        member[u] = true;
    }
    let assignment = (0..n)
        .map(|v| {
            metric.closest_of(v, net.iter().map(|&u| VertexOrBottom::Vertex(u))).vertex().expect("net is never empty")
        })
        .collect();
    DeltaNet { net, delta, assignment, member }
}

/// The sub-instance solved on the net: each terminal replaced by its net
/// vertex, only net vertices usable.
pub fn net_instance(instance: &Instance, net: &DeltaNet) -> Result<Instance, InstanceError> {
    let terminals: Vec<usize> = instance.terminals().map(|x| net.assignment[x]).collect();
    instance.restricted(terminals, net.net.iter().copied())
}

/// Hangs every terminal outside the net on its net vertex.
pub fn lift_solution(net_tree: &SteinerTree, instance: &Instance, net: &DeltaNet) -> Result<SteinerTree, NetError> {
    let sub = net_instance(instance, net)?;
    net_tree.check_against(&sub, instance.hops()).map_err(|e| NetError::InvalidNetTree(e.to_string()))?;
    if let Some(v) = net_tree.vertices().find(|&v| !net.contains(v)) {
        return Err(NetError::InvalidNetTree(format!("vertex {v} is not a net vertex")));
    }
    let parents = net_tree
        .edges()
        .into_iter()
        .map(|(p, c)| (c, p))
        .chain(instance.terminals().filter(|&x| !net.contains(x)).map(|x| (x, net.assignment[x])));
    Ok(SteinerTree::from_parents(instance.root(), parents)?)
}

/// Exact solver applied to the net sub-instance.
#[derive(Debug, Clone)]
pub enum SolverChoice {
    Oracle,
    Tree,
    /// Uses the supplied decomposition, or a heuristic one when absent.
    Treewidth(Option<NiceTreeDecomposition>),
}

#[derive(Debug, Clone)]
pub struct NetOutcome {
    pub net: DeltaNet,
    /// Optimum of the net sub-instance.
    pub net_cost: Cost,
    pub tree: SteinerTree,
    pub cost: Cost,
    /// `Σ d(x, assignment(x))` over the terminals outside the net.
    pub lift_cost: Cost,
    /// `n · δ`, the bound `lift_cost` never exceeds.
    pub bound: Cost,
}

pub fn net_pipeline(instance: &Instance, delta: Cost, choice: &SolverChoice) -> Result<NetOutcome, NetError> {
    let metric = instance.metric();
    let net = build_delta_net(metric, instance.root(), delta);
    let sub = net_instance(instance, &net)?;
    let solved: Solution = match choice {
        SolverChoice::Oracle => {
            let o = oracle_khop(&sub)?;
            Solution::from_lap(&sub, o.witness, o.cost, Vec::new(), o.labelings)?
        }
        SolverChoice::Tree => solve_tree(&sub)?,
        SolverChoice::Treewidth(Some(nice)) => solve_treewidth(&sub, nice)?,
        SolverChoice::Treewidth(None) => solve_treewidth_heuristic(&sub)?,
    };
    let tree = lift_solution(&solved.tree, instance, &net)?;
    tree.check_against(instance, instance.hops() + 1)?;
    let cost = tree.cost(metric);
    let lift_cost: Cost =
        instance.terminals().filter(|&x| !net.contains(x)).map(|x| metric.dist(x, net.assignment[x])).sum();
    let bound = delta.times(instance.n() as u64);
    assert_eq!(cost, solved.cost + lift_cost, "lift cost must be exactly additive");
    assert!(lift_cost <= bound, "lift cost exceeds n·δ");
    Ok(NetOutcome { net, net_cost: solved.cost, tree, cost, lift_cost, bound })
}

/// `Σ_{v ≠ r} d(v, r)` over the terminals: the 1-hop star, valid for every k.
pub fn star_upper_bound(instance: &Instance) -> Cost {
    let r = instance.root();
    instance.terminals().filter(|&x| x != r).map(|x| instance.metric().dist(x, r)).sum()
}

/// Vertex pairs no optimal tree can use as an edge: their distance alone
/// exceeds the star bound.
pub fn prunable_pairs(instance: &Instance) -> Vec<(usize, usize)> {
    let bound = star_upper_bound(instance);
    let n = instance.n();
    let m = instance.metric();
    (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|&(u, v)| m.dist(u, v) > bound).collect()
}
