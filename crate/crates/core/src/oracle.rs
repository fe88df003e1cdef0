//! Brute-force reference solvers and closed forms for special cases.
//!
//! These are deliberately naive: they exist to check the dynamic programs,
//! so nothing here prunes beyond what is needed to finish on small inputs.

use rayon::prelude::*;
use thiserror::Error;

use crate::cost::Cost;
use crate::instance::Instance;
use crate::model::{anchoring_from_labeling, lap_cost, Label, Lap, SteinerTree};

/// Largest instance [`oracle_khop`] accepts.
pub const ORACLE_MAX_N: usize = 10;
/// Largest instance [`oracle_parent_functions`] accepts.
pub const PARENT_ENUM_MAX_N: usize = 6;
/// Largest instance [`oracle_ufl`] accepts.
pub const UFL_MAX_N: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance has {n} vertices; this oracle is limited to {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("this oracle needs hop bound {expected}, got {got}")]
    HopMismatch { expected: usize, got: usize },
    #[error("this oracle needs every vertex to be a terminal")]
    NotSpanning,
    #[error("no feasible k-hop Steiner tree exists")]
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub cost: Cost,
    pub witness: Lap,
    /// Labelings examined.
    pub labelings: usize,
}

fn guard(instance: &Instance, limit: usize) -> Result<(), OracleError> {
    if instance.n() > limit {
        return Err(OracleError::TooLarge { n: instance.n(), limit });
    }
    Ok(())
}

/// Label options per vertex in lexicographic order (`Depth` before
/// `Infinite`). Depths beyond `n - 1` cannot occur in any tree.
fn label_options(instance: &Instance) -> Vec<Vec<Label>> {
    let n = instance.n();
    let top = instance.hops().min(n.saturating_sub(1));
    (0..n)
        .map(|v| {
            if v == instance.root() {
                return vec![Label::Depth(0)];
            }
            let mut opts = Vec::new();
            if instance.is_usable(v) {
                opts.extend((1..=top).map(Label::Depth));
            }
            if !instance.is_terminal(v) {
                opts.push(Label::Infinite);
            }
            opts
        })
        .collect()
}

/// Cost of the cheapest anchoring for `labels`, or infinity when some level
/// is empty below a populated one.
fn labeling_cost(dist: &[Cost], n: usize, labels: &[Label], levels: &mut [Vec<usize>]) -> Cost {
    for level in levels.iter_mut() {
        level.clear();
    }
    for (v, l) in labels.iter().enumerate() {
        if let Label::Depth(d) = l {
            levels[*d].push(v);
        }
    }
    let mut total = Cost::ZERO;
    for (v, l) in labels.iter().enumerate() {
        if let Label::Depth(d) = *l {
            if d == 0 {
                continue;
            }
            let best = levels[d - 1].iter().map(|&w| dist[v * n + w]).min();
            match best {
                Some(c) => total += c,
                None => return Cost::INFINITY,
            }
        }
    }
    total
}

/// Minimum over labelings of one subtree of the odometer, scanning in
/// lexicographic order and keeping the first minimum.
fn scan(dist: &[Cost], n: usize, options: &[Vec<Label>], prefix: &[Label]) -> (Cost, Vec<Label>, usize) {
    let fixed = prefix.len();
    let mut labels: Vec<Label> = prefix.iter().copied().chain(options[fixed..].iter().map(|o| o[0])).collect();
    let mut idx = vec![0usize; n];
    let mut levels = vec![Vec::new(); n.max(1)];
    let mut best = (Cost::INFINITY, labels.clone());
    let mut count = 0usize;
    loop {
        count += 1;
        let c = labeling_cost(dist, n, &labels, &mut levels);
        if c < best.0 {
            best = (c, labels.clone());
        }
        let mut pos = n;
        loop {
            if pos == fixed {
                return (best.0, best.1, count);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                labels[pos] = options[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            labels[pos] = options[pos][0];
        }
    }
}

/// Exhaustive optimum over all labelings, each anchored greedily. The
/// witness is the lexicographically smallest optimal labeling.
pub fn oracle_khop(instance: &Instance) -> Result<OracleResult, OracleError> {
    guard(instance, ORACLE_MAX_N)?;
    let n = instance.n();
    let metric = instance.metric();
    let dist: Vec<Cost> = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).map(|(u, v)| metric.dist(u, v)).collect();
    let options = label_options(instance);
    if options.iter().any(Vec::is_empty) {
        return Err(OracleError::Infeasible);
    }
    // Split the odometer on its first two positions so the halves can run in
    // parallel; the minimum over (cost, labeling) is order independent.
    let split = n.min(2);
    let mut prefixes: Vec<Vec<Label>> = vec![Vec::new()];
    for opts in &options[..split] {
        prefixes = prefixes
            .into_iter()
            .flat_map(|p| opts.iter().map(move |&o| p.iter().copied().chain([o]).collect()))
            .collect();
    }
    let results: Vec<_> = prefixes.par_iter().map(|p| scan(&dist, n, &options, p)).collect();
    let labelings = results.iter().map(|r| r.2).sum();
    let (cost, labels, _) =
        results.into_iter().min_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1))).expect("at least one prefix");
    if cost.is_infinite() {
        return Err(OracleError::Infeasible);
    }
    let witness = anchoring_from_labeling(instance, &labels).expect("finite labeling is feasible");
    debug_assert_eq!(lap_cost(metric, &witness), cost);
    Ok(OracleResult { cost, witness, labelings })
}

/// Independent check of [`oracle_khop`]: enumerates every parent function
/// (each non-root vertex picks a parent or excludes itself) and keeps the
/// cheapest one forming a valid k-hop Steiner tree.
pub fn oracle_parent_functions(instance: &Instance) -> Result<Cost, OracleError> {
    guard(instance, PARENT_ENUM_MAX_N)?;
    let n = instance.n();
    let r = instance.root();
    let metric = instance.metric();
    let others: Vec<usize> = (0..n).filter(|&v| v != r).collect();
    // `v` itself stands for "excluded".
    let choices: Vec<Vec<usize>> = vec![(0..n).collect(); others.len()];
    let mut best = Cost::INFINITY;
    crate::util::for_each_product(&choices, |parents| {
        let mut included = vec![true; n];
        for (&v, &p) in others.iter().zip(parents) {
            if p == v {
                if instance.is_terminal(v) {
                    return;
                }
                included[v] = false;
            } else if !instance.is_usable(v) {
                return;
            }
        }
        let edges = others.iter().zip(parents).filter(|(v, p)| *v != *p).map(|(&v, &p)| (v, p));
        if edges.clone().any(|(_, p)| !included[p]) {
            return;
        }
        let cost: Cost = edges.clone().map(|(v, p)| metric.dist(v, p)).sum();
        if cost >= best {
            return;
        }
        if let Ok(tree) = SteinerTree::from_parents(r, edges) {
            if tree.max_depth() <= instance.hops() {
                best = cost;
            }
        }
    });
    if best.is_infinite() {
        return Err(OracleError::Infeasible);
    }
    Ok(best)
}

/// Exact k = 2 optimum via facility location: every depth-1 vertex is an
/// open facility paying its distance to the root, and every other terminal
/// connects to its nearest open facility or to the root.
pub fn oracle_ufl(instance: &Instance) -> Result<Cost, OracleError> {
    if instance.hops() != 2 {
        return Err(OracleError::HopMismatch { expected: 2, got: instance.hops() });
    }
    guard(instance, UFL_MAX_N)?;
    let r = instance.root();
    let metric = instance.metric();
    let candidates: Vec<usize> = (0..instance.n()).filter(|&v| v != r && instance.is_usable(v)).collect();
    let terminals: Vec<usize> = instance.terminals().filter(|&x| x != r).collect();
    let best = (0u32..1 << candidates.len())
        .into_par_iter()
        .map(|mask| {
            let open: Vec<usize> =
                (0..candidates.len()).filter(|i| mask >> i & 1 == 1).map(|i| candidates[i]).collect();
            let opening: Cost = open.iter().map(|&s| metric.dist(r, s)).sum();
            let service: Cost = terminals
                .iter()
                .filter(|x| !open.contains(x))
                .map(|&x| open.iter().chain([&r]).map(|&s| metric.dist(x, s)).min().expect("root is open"))
                .sum();
            opening + service
        })
        .min()
        .unwrap_or(Cost::ZERO);
    Ok(best)
}

/// The forced k = 1 solution: every terminal hangs off the root.
pub fn oracle_star(instance: &Instance) -> Cost {
    let r = instance.root();
    instance.terminals().map(|x| instance.metric().dist(r, x)).sum()
}

/// Minimum spanning tree weight of the metric closure (Prim).
pub fn oracle_mst(instance: &Instance) -> Result<Cost, OracleError> {
    if !instance.is_spanning() {
        return Err(OracleError::NotSpanning);
    }
    let n = instance.n();
    let metric = instance.metric();
    let mut in_tree = vec![false; n];
    let mut best = vec![Cost::INFINITY; n];
    let mut total = Cost::ZERO;
    best[instance.root()] = Cost::ZERO;
    for _ in 0..n {
        let u = (0..n).filter(|&v| !in_tree[v]).min_by_key(|&v| (best[v], v)).expect("vertex left");
        in_tree[u] = true;
        total += best[u];
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(metric.dist(u, v));
            }
        }
    }
    Ok(total)
}
