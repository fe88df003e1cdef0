//! Seeded instance generators.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomposition::TreeDecomposition;
use crate::format::{write_decomposition, write_instance};
use crate::instance::{Instance, MetricClass};
use crate::metric::{build_metric, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Path,
    Tree,
    /// Subgraph of a random k-tree, so treewidth is at most `k`.
    PartialKTree(usize),
    RandomConnected,
}

impl fmt::Display for GenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenKind::Path => f.write_str("path"),
            GenKind::Tree => f.write_str("tree"),
            GenKind::PartialKTree(k) => write!(f, "partial-ktree:{k}"),
            GenKind::RandomConnected => f.write_str("random-connected"),
        }
    }
}

impl FromStr for GenKind {
    type Err = String;

    /// `path`, `tree`, `random-connected`, or `partial-ktree[:k]` (default 2).
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "path" => Ok(GenKind::Path),
            "tree" => Ok(GenKind::Tree),
            "random-connected" => Ok(GenKind::RandomConnected),
            "partial-ktree" => Ok(GenKind::PartialKTree(2)),
            _ => match s.strip_prefix("partial-ktree:").map(str::parse) {
                Some(Ok(k)) if k >= 1 => Ok(GenKind::PartialKTree(k)),
                _ => Err(format!("unknown generator `{s}`")),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenParams {
    pub kind: GenKind,
    pub n: usize,
    pub seed: u64,
    /// Inclusive integer weight range.
    pub weights: (u64, u64),
    /// Probability that a non-root vertex is a terminal.
    pub density: f64,
    pub hops: usize,
    /// Extra-edge probability for `RandomConnected`.
    pub extra_edges: f64,
}

impl GenParams {
    pub fn new(kind: GenKind, n: usize, seed: u64) -> Self {
        GenParams { kind, n, seed, weights: (1, 10), density: 0.5, hops: 2, extra_edges: 0.3 }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub graph: WeightedGraph,
    pub class: MetricClass,
    pub root: usize,
    pub terminals: Vec<usize>,
    pub hops: usize,
    /// Witnessing decomposition for partial k-trees.
    pub decomposition: Option<TreeDecomposition>,
}

impl Generated {
    pub fn instance(&self) -> Instance {
        let metric = build_metric(&self.graph).expect("generated graphs are connected");
        Instance::new(Arc::new(metric), self.terminals.iter().copied(), self.root, self.hops)
            .expect("generated instances are well formed")
    }

    pub fn instance_text(&self) -> String {
        write_instance(&self.graph, self.class, self.root, &self.terminals, self.hops)
    }

    pub fn decomposition_text(&self) -> Option<String> {
        self.decomposition.as_ref().map(|td| write_decomposition(td, self.graph.n()))
    }
}

pub fn generate(params: &GenParams) -> Generated {
    assert!(params.n >= 1, "generators need at least one vertex");
    assert!(params.weights.0 >= 1 && params.weights.0 <= params.weights.1, "weights must be a positive range");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n;
    let (lo, hi) = params.weights;
    let weight = |rng: &mut ChaCha8Rng| rng.gen_range(lo..=hi);
    let mut decomposition = None;

    let (pairs, class): (Vec<(usize, usize)>, MetricClass) = match params.kind {
        GenKind::Path => ((1..n).map(|v| (v - 1, v)).collect(), MetricClass::Path),
        GenKind::Tree => ((1..n).map(|v| (rng.gen_range(0..v), v)).collect(), MetricClass::Tree),
        GenKind::RandomConnected => {
            let mut set: BTreeSet<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(params.extra_edges) {
                        set.insert((u, v));
                    }
                }
            }
            (set.into_iter().collect(), MetricClass::General)
        }
        GenKind::PartialKTree(k) => {
            let (pairs, td) = partial_ktree(&mut rng, n, k);
            decomposition = Some(td);
            (pairs, MetricClass::General)
        }
    };
    let edges: Vec<(usize, usize, u64)> = pairs.into_iter().map(|(u, v)| (u, v, weight(&mut rng))).collect();
    let graph = WeightedGraph::from_int_edges(n, &edges).expect("generated edges are simple");
    let root = 0;
    let terminals = (1..n).filter(|_| rng.gen_bool(params.density)).collect();
    Generated { graph, class, root, terminals, hops: params.hops, decomposition }
}

/// A random k-tree on `n` vertices with edges dropped while the graph stays
/// connected, plus the decomposition the construction yields.
fn partial_ktree(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Vec<(usize, usize)>, TreeDecomposition) {
    let base = n.min(k + 1);
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for u in 0..base {
        for v in u + 1..base {
            edges.insert((u, v));
        }
    }
    let mut bags = vec![(0..base).collect::<Vec<_>>()];
    let mut tree_edges = Vec::new();
    // k-cliques available for attachment, each with a bag containing it.
    let mut cliques: Vec<(Vec<usize>, usize)> = Vec::new();
    if base == k + 1 {
        for skip in 0..base {
            cliques.push(((0..base).filter(|&x| x != skip).collect(), 0));
        }
    }
    for v in base..n {
        let (clique, host) = cliques[rng.gen_range(0..cliques.len())].clone();
        for &u in &clique {
            edges.insert((u, v));
        }
        let mut bag = clique.clone();
        bag.push(v);
        bags.push(bag);
        let id = bags.len() - 1;
        tree_edges.push((host, id));
        for skip in 0..clique.len() {
            let mut c: Vec<usize> = clique.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &x)| x).collect();
            c.push(v);
            cliques.push((c, id));
        }
    }
    let mut list: Vec<(usize, usize)> = edges.into_iter().collect();
    list.shuffle(rng);
    let mut kept: BTreeSet<(usize, usize)> = list.iter().copied().collect();
    for e in list {
        if rng.gen_bool(0.3) {
            kept.remove(&e);
            if !connected(n, &kept) {
                kept.insert(e);
            }
        }
    }
    (kept.into_iter().collect(), TreeDecomposition::new(bags, tree_edges))
}

fn connected(n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
