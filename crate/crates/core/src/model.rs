//! Labeling-anchoring pairs (LAPs) and explicit k-hop Steiner trees.
//!
//! A labeling assigns each vertex its depth in the tree, or
//! [`Label::Infinite`] when the vertex is left out. An anchoring assigns each
//! non-root vertex its parent; excluded vertices anchor to themselves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::cost::Cost;
use crate::instance::Instance;
use crate::metric::{Metric, VertexOrBottom};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("labeling is malformed: {0}")]
    InvalidLabeling(String),
    #[error("vertex {vertex} has label {label} but no vertex has label {}", label - 1)]
    InfeasibleLabeling { vertex: usize, label: usize },
    #[error("not a k-hop Steiner tree: {0}")]
    NotAKHopTree(String),
}

/// Depth of a vertex in the tree, or `Infinite` for vertices not in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Depth(usize),
    Infinite,
}

impl Label {
    pub fn depth(self) -> Option<usize> {
        match self {
            Label::Depth(d) => Some(d),
            Label::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Label::Depth(_))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Depth(d) => write!(f, "{d}"),
            Label::Infinite => f.write_str("inf"),
        }
    }
}

/// A (possibly partial) labeling-anchoring pair. Its domain is the key set
/// of `labels`; `anchors` covers the domain minus the root.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lap {
    pub labels: BTreeMap<usize, Label>,
    pub anchors: BTreeMap<usize, usize>,
}

impl Lap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, v: usize, label: Label, anchor: Option<usize>) {
        self.labels.insert(v, label);
        if let Some(a) = anchor {
            self.anchors.insert(v, a);
        }
    }

    pub fn label(&self, v: usize) -> Option<Label> {
        self.labels.get(&v).copied()
    }

    pub fn anchor(&self, v: usize) -> Option<usize> {
        self.anchors.get(&v).copied()
    }

    pub fn domain(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.keys().copied()
    }

    /// Full labeling as a dense vector, if the domain is `0..n`.
    pub fn dense_labels(&self, n: usize) -> Option<Vec<Label>> {
        (0..n).map(|v| self.label(v)).collect()
    }
}

/// Checks every LAP condition and reports the first violation.
pub fn check_lap(instance: &Instance, lap: &Lap) -> Result<(), String> {
    let n = instance.n();
    let r = instance.root();
    let k = instance.hops();
    for (&u, &label) in &lap.labels {
        if u >= n {
            return Err(format!("vertex {u} out of range"));
        }
        match label {
            Label::Depth(0) if u != r => return Err(format!("label 0 on non-root vertex {u}")),
            Label::Depth(d) if u == r && d != 0 => return Err(format!("root has label {d}")),
            Label::Infinite if u == r => return Err("root has label inf".into()),
            Label::Depth(d) if d > k => return Err(format!("vertex {u} has label {d} > {k}")),
            Label::Depth(_) if !instance.is_usable(u) => {
                return Err(format!("vertex {u} is not usable but has a finite label"))
            }
            Label::Infinite if instance.is_terminal(u) => return Err(format!("terminal {u} has label inf")),
            _ => {}
        }
        if u == r {
            if lap.anchors.contains_key(&u) {
                return Err("root is anchored".into());
            }
            continue;
        }
        let Some(&a) = lap.anchors.get(&u) else {
            return Err(format!("vertex {u} has no anchor"));
        };
        if a >= n {
            return Err(format!("vertex {u} anchored to out-of-range {a}"));
        }
        match label {
            Label::Infinite => {
                if a != u {
                    return Err(format!("excluded vertex {u} is anchored to {a}"));
                }
            }
            Label::Depth(d) => {
                if let Some(parent_label) = lap.label(a) {
                    if parent_label != Label::Depth(d.wrapping_sub(1)) || d == 0 {
                        return Err(format!("vertex {u} has label {d} but its anchor {a} has label {parent_label}"));
                    }
                }
            }
        }
    }
    for (&w, &a) in &lap.anchors {
        if !lap.labels.contains_key(&w) {
            return Err(format!("anchor given for {w} outside the domain"));
        }
        if w != a && lap.label(a) == Some(Label::Infinite) {
            return Err(format!("vertex {w} anchored to excluded vertex {a}"));
        }
    }
    Ok(())
}

/// True iff `lap` is a consistent labeling-anchoring pair for `instance`.
pub fn validate_lap(instance: &Instance, lap: &Lap) -> bool {
    check_lap(instance, lap).is_ok()
}

/// Total anchoring cost; self-anchored vertices contribute nothing.
pub fn lap_cost(metric: &Metric, lap: &Lap) -> Cost {
    lap.anchors.iter().map(|(&u, &a)| metric.dist(u, a)).sum()
}

fn check_labeling(instance: &Instance, labels: &[Label]) -> Result<(), ModelError> {
    let bad = |msg: String| Err(ModelError::InvalidLabeling(msg));
    if labels.len() != instance.n() {
        return bad(format!("{} labels for {} vertices", labels.len(), instance.n()));
    }
    for (v, &label) in labels.iter().enumerate() {
        let is_root = v == instance.root();
        match label {
            Label::Depth(0) if !is_root => return bad(format!("label 0 on non-root {v}")),
            Label::Depth(d) if is_root && d != 0 => return bad(format!("root labeled {d}")),
            Label::Infinite if is_root || instance.is_terminal(v) => return bad(format!("terminal {v} labeled inf")),
            Label::Depth(d) if d > instance.hops() => return bad(format!("label {d} on {v} exceeds the hop bound")),
            Label::Depth(_) if !instance.is_usable(v) => return bad(format!("unusable vertex {v} labeled")),
            _ => {}
        }
    }
    Ok(())
}

/// The cheapest anchoring consistent with a full labeling: every labeled
/// vertex anchors to its closest vertex one level up.
pub fn anchoring_from_labeling(instance: &Instance, labels: &[Label]) -> Result<Lap, ModelError> {
    check_labeling(instance, labels)?;
    let metric = instance.metric();
    let mut levels: Vec<Vec<usize>> = vec![Vec::new(); instance.hops() + 1];
    for (v, label) in labels.iter().enumerate() {
        if let Label::Depth(d) = label {
            levels[*d].push(v);
        }
    }
    let mut lap = Lap::new();
    for (v, &label) in labels.iter().enumerate() {
        match label {
            Label::Depth(0) => lap.set(v, label, None),
            Label::Depth(d) => {
                let parent = metric
                    .closest_of(v, levels[d - 1].iter().map(|&w| VertexOrBottom::Vertex(w)))
                    .vertex()
                    .ok_or(ModelError::InfeasibleLabeling { vertex: v, label: d })?;
                lap.set(v, label, Some(parent));
            }
            Label::Infinite => lap.set(v, label, Some(v)),
        }
    }
    Ok(lap)
}

/// An explicit rooted tree: parent and depth of every included vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteinerTree {
    root: usize,
    parent: BTreeMap<usize, usize>,
    depth: BTreeMap<usize, usize>,
}

impl SteinerTree {
    /// Builds a tree from child -> parent pairs, rejecting cycles, vertices
    /// with two parents and vertices not connected to `root`.
    pub fn from_parents(root: usize, parents: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, ModelError> {
        let bad = |m: String| Err(ModelError::NotAKHopTree(m));
        let mut parent = BTreeMap::new();
        for (child, p) in parents {
            if child == root {
                return bad(format!("root {root} has parent {p}"));
            }
            if child == p {
                return bad(format!("self-loop at {child}"));
            }
            if parent.insert(child, p).is_some() {
                return bad(format!("vertex {child} has two parents"));
            }
        }
        let mut depth = BTreeMap::new();
        depth.insert(root, 0);
        for &start in parent.keys() {
            let mut chain = Vec::new();
            let mut cur = start;
            let base = loop {
                if let Some(&d) = depth.get(&cur) {
                    break d;
                }
                if chain.len() > parent.len() {
                    return bad(format!("cycle through vertex {start}"));
                }
                chain.push(cur);
                match parent.get(&cur) {
                    Some(&p) => cur = p,
                    None => return bad(format!("vertex {start} is not connected to the root")),
                }
            };
            for (i, &v) in chain.iter().rev().enumerate() {
                depth.insert(v, base + i + 1);
            }
        }
        Ok(SteinerTree { root, parent, depth })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn contains(&self, v: usize) -> bool {
        self.depth.contains_key(&v)
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent.get(&v).copied()
    }

    pub fn depth(&self, v: usize) -> Option<usize> {
        self.depth.get(&v).copied()
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.depth.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.depth.values().copied().max().unwrap_or(0)
    }

    /// Edges as `(parent, child)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self.parent.iter().map(|(&c, &p)| (p, c)).collect();
        e.sort_unstable();
        e
    }

    pub fn cost(&self, metric: &Metric) -> Cost {
        self.parent.iter().map(|(&c, &p)| metric.dist(c, p)).sum()
    }

    /// Full LAP on `0..n`; vertices outside the tree are self-anchored.
    pub fn to_lap(&self, n: usize) -> Lap {
        let mut lap = Lap::new();
        for v in 0..n {
            match self.depth(v) {
                Some(d) if v == self.root => lap.set(v, Label::Depth(d), None),
                Some(d) => lap.set(v, Label::Depth(d), self.parent(v)),
                None => lap.set(v, Label::Infinite, Some(v)),
            }
        }
        lap
    }

    /// Checks the hop bound and terminal coverage for `instance`.
    pub fn check_against(&self, instance: &Instance, hops: usize) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::NotAKHopTree(m));
        if self.root != instance.root() {
            return bad(format!("rooted at {} instead of {}", self.root, instance.root()));
        }
        if let Some(v) = self.vertices().find(|&v| v >= instance.n()) {
            return bad(format!("vertex {v} out of range"));
        }
        if let Some((&v, &d)) = self.depth.iter().find(|(_, &d)| d > hops) {
            return bad(format!("vertex {v} at depth {d} exceeds hop bound {hops}"));
        }
        if let Some(t) = instance.terminals().find(|&t| !self.contains(t)) {
            return bad(format!("terminal {t} not spanned"));
        }
        Ok(())
    }
}

/// Converts a full, valid LAP into an explicit tree, checking the hop bound,
/// terminal coverage and acyclicity.
pub fn lap_to_tree(instance: &Instance, lap: &Lap) -> Result<SteinerTree, ModelError> {
    let n = instance.n();
    if lap.labels.len() != n || lap.domain().any(|v| v >= n) {
        return Err(ModelError::NotAKHopTree("LAP does not cover every vertex".into()));
    }
    check_lap(instance, lap).map_err(ModelError::NotAKHopTree)?;
    let parents =
        lap.anchors.iter().filter(|(&u, _)| lap.label(u).is_some_and(Label::is_finite)).map(|(&u, &a)| (u, a));
    let tree = SteinerTree::from_parents(instance.root(), parents)?;
    tree.check_against(instance, instance.hops())?;
    for v in tree.vertices() {
        if lap.label(v) != Some(Label::Depth(tree.depth(v).unwrap_or(usize::MAX))) {
            return Err(ModelError::NotAKHopTree(format!("label of {v} disagrees with its depth")));
        }
    }
    Ok(tree)
}

/// Output of every exact solver.
#[derive(Debug, Clone)]
pub struct Solution {
    pub cost: Cost,
    pub lap: Lap,
    pub tree: SteinerTree,
    /// Anchoring cost as charged by the solver, one entry per non-root vertex.
    pub charges: Vec<(usize, Cost)>,
    /// DP cells (or oracle labelings) evaluated.
    pub cells: usize,
}

impl Solution {
    /// Assembles a solution from a full LAP, checking it along the way.
    pub fn from_lap(
        instance: &Instance,
        lap: Lap,
        cost: Cost,
        charges: Vec<(usize, Cost)>,
        cells: usize,
    ) -> Result<Self, ModelError> {
        let tree = lap_to_tree(instance, &lap)?;
        let actual = lap_cost(instance.metric(), &lap);
        if actual != cost {
            return Err(ModelError::NotAKHopTree(format!(
                "reconstructed LAP costs {actual} but the solver reported {cost}"
            )));
        }
        Ok(Solution { cost, lap, tree, charges, cells })
    }

    /// Charges derived directly from the LAP, for solvers that do not
    /// account per vertex.
    pub fn lap_charges(metric: &Metric, lap: &Lap) -> Vec<(usize, Cost)> {
        lap.anchors.iter().map(|(&u, &a)| (u, metric.dist(u, a))).collect()
    }
}

/// Verifies that every non-root vertex was charged exactly once, that each
/// charge is its anchoring distance, and that the charges sum to the cost.
pub fn audit_charges(instance: &Instance, solution: &Solution) -> Result<(), String> {
    let metric = instance.metric();
    let mut seen = BTreeSet::new();
    let mut total = Cost::ZERO;
    for &(v, c) in &solution.charges {
        if v == instance.root() {
            return Err("root was charged".into());
        }
        if !seen.insert(v) {
            return Err(format!("vertex {v} charged twice"));
        }
        let anchor = solution.lap.anchor(v).ok_or(format!("charged vertex {v} has no anchor"))?;
        if metric.dist(v, anchor) != c {
            return Err(format!("vertex {v} charged {c} but anchoring costs {}", metric.dist(v, anchor)));
        }
        total += c;
    }
    if let Some(v) = (0..instance.n()).find(|&v| v != instance.root() && !seen.contains(&v)) {
        return Err(format!("vertex {v} never charged"));
    }
    if total != solution.cost {
        return Err(format!("charges sum to {total}, cost is {}", solution.cost));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{build_metric, WeightedGraph};
    use std::sync::Arc;
    use Label::{Depth, Infinite};

    fn unit_path(n: usize) -> Arc<Metric> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1)).collect();
        Arc::new(build_metric(&WeightedGraph::from_int_edges(n, &edges).unwrap()).unwrap())
    }

    #[test]
    fn validate_examples() {
        let inst = Instance::new(unit_path(3), [], 0, 2).unwrap();
        let mut root_only = Lap::new();
        root_only.set(0, Depth(0), None);
        assert!(validate_lap(&inst, &root_only));

        let mut wrong_depth = root_only.clone();
        wrong_depth.set(1, Depth(2), Some(0));
        assert!(!validate_lap(&inst, &wrong_depth));

        // An excluded vertex may not serve as anybody's anchor.
        let mut excluded_used = root_only.clone();
        excluded_used.set(1, Infinite, Some(1));
        excluded_used.set(2, Depth(1), Some(1));
        assert!(!validate_lap(&inst, &excluded_used));

        let mut excluded_terminal = root_only.clone();
        let inst_t = Instance::new(unit_path(3), [1], 0, 2).unwrap();
        excluded_terminal.set(1, Infinite, Some(1));
        assert!(!validate_lap(&inst_t, &excluded_terminal));
    }

    #[test]
    fn cost_examples() {
        let m = unit_path(3);
        let mut lap = Lap::new();
        lap.set(0, Depth(0), None);
        lap.set(1, Infinite, Some(1));
        lap.set(2, Infinite, Some(2));
        assert_eq!(lap_cost(&m, &lap), Cost::ZERO);

        let far = Arc::new(build_metric(&WeightedGraph::from_int_edges(2, &[(0, 1, 7)]).unwrap()).unwrap());
        let mut single = Lap::new();
        single.set(0, Depth(0), None);
        single.set(1, Depth(1), Some(0));
        assert_eq!(lap_cost(&far, &single), Cost::from_int(7));

        let mut chain = Lap::new();
        chain.set(0, Depth(0), None);
        chain.set(1, Depth(1), Some(0));
        chain.set(2, Depth(2), Some(1));
        assert_eq!(lap_cost(&m, &chain), Cost::from_int(2));
    }

    #[test]
    fn anchoring_examples() {
        let one = Arc::new(build_metric(&WeightedGraph::from_int_edges(1, &[]).unwrap()).unwrap());
        let inst1 = Instance::new(one, [], 0, 1).unwrap();
        let lap = anchoring_from_labeling(&inst1, &[Depth(0)]).unwrap();
        assert!(lap.anchors.is_empty());

        let inst = Instance::new(unit_path(3), [2], 0, 2).unwrap();
        assert_eq!(
            anchoring_from_labeling(&inst, &[Depth(0), Infinite, Depth(2)]).unwrap_err(),
            ModelError::InfeasibleLabeling { vertex: 2, label: 2 }
        );

        let lap = anchoring_from_labeling(&inst, &[Depth(0), Depth(1), Depth(2)]).unwrap();
        assert_eq!(lap.anchor(1), Some(0));
        assert_eq!(lap.anchor(2), Some(1));
        assert_eq!(lap_cost(inst.metric(), &lap), Cost::from_int(2));
        assert!(matches!(
            anchoring_from_labeling(&inst, &[Depth(1), Depth(1), Depth(2)]),
            Err(ModelError::InvalidLabeling(_))
        ));
    }

    #[test]
    fn lap_to_tree_examples() {
        let one = Arc::new(build_metric(&WeightedGraph::from_int_edges(1, &[]).unwrap()).unwrap());
        let inst1 = Instance::new(one, [], 0, 1).unwrap();
        let mut lap = Lap::new();
        lap.set(0, Depth(0), None);
        let t = lap_to_tree(&inst1, &lap).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.cost(inst1.metric()), Cost::ZERO);

        let inst = Instance::spanning(unit_path(3), 0, 2).unwrap();
        let lap = anchoring_from_labeling(&inst, &[Depth(0), Depth(1), Depth(2)]).unwrap();
        let t = lap_to_tree(&inst, &lap).unwrap();
        assert_eq!(t.max_depth(), 2);
        assert_eq!(t.edges(), vec![(0, 1), (1, 2)]);

        let tight = inst.with_hops(1).unwrap();
        let mut deep = Lap::new();
        deep.set(0, Depth(0), None);
        deep.set(1, Depth(1), Some(0));
        deep.set(2, Depth(2), Some(1));
        assert!(matches!(lap_to_tree(&tight, &deep), Err(ModelError::NotAKHopTree(_))));
    }

    #[test]
    fn from_parents_rejects_cycles() {
        assert!(SteinerTree::from_parents(0, [(1, 2), (2, 1)]).is_err());
        assert!(SteinerTree::from_parents(0, [(1, 0), (1, 0)]).is_err());
        assert!(SteinerTree::from_parents(0, [(1, 3)]).is_err());
        let t = SteinerTree::from_parents(0, [(2, 1), (1, 0)]).unwrap();
        assert_eq!(t.depth(2), Some(2));
    }

    fn arb_labeled() -> impl Strategy<Value = (Instance, Vec<Label>)> {
        (2usize..=6).prop_flat_map(|n| {
            (
                proptest::collection::vec((any::<prop::sample::Index>(), 1u64..=9), n - 1),
                proptest::collection::vec(0usize..=4, n),
                proptest::collection::vec(any::<bool>(), n),
                1usize..=4,
            )
                .prop_map(move |(tree, raw, term, k)| {
                    let edges: Vec<_> =
                        tree.iter().enumerate().map(|(i, (p, w))| (p.index(i + 1), i + 1, *w)).collect();
                    let m = Arc::new(build_metric(&WeightedGraph::from_int_edges(n, &edges).unwrap()).unwrap());
                    let labels: Vec<Label> = (0..n)
                        .map(|v| match (v, raw[v]) {
                            (0, _) => Depth(0),
                            (_, 0) => Infinite,
                            (_, d) => Depth(d.min(k)),
                        })
                        .collect();
                    let terms: Vec<usize> = (0..n).filter(|&v| term[v] && labels[v].is_finite()).collect();
                    (Instance::new(m, terms, 0, k).unwrap(), labels)
                })
        })
    }

    fn all_anchorings(inst: &Instance, labels: &[Label]) -> Vec<Cost> {
        let n = inst.n();
        let choices: Vec<Vec<usize>> = (1..n)
            .map(|v| match labels[v] {
                Infinite => vec![v],
                Depth(d) => (0..n).filter(|&u| labels[u] == Depth(d - 1)).collect(),
            })
            .collect();
        let mut out = Vec::new();
        crate::util::for_each_product(&choices, |pick| {
            let mut lap = Lap::new();
            lap.set(0, Depth(0), None);
            for (i, &a) in pick.iter().enumerate() {
                lap.set(i + 1, labels[i + 1], Some(a));
            }
            if validate_lap(inst, &lap) {
                out.push(lap_cost(inst.metric(), &lap));
            }
        });
        out
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn labeling_round_trip((inst, labels) in arb_labeled()) {
            let Ok(lap) = anchoring_from_labeling(&inst, &labels) else {
                prop_assert!(all_anchorings(&inst, &labels).is_empty());
                return Ok(());
            };
            prop_assert!(validate_lap(&inst, &lap));
            let tree = lap_to_tree(&inst, &lap).unwrap();
            prop_assert_eq!(tree.cost(inst.metric()), lap_cost(inst.metric(), &lap));
            prop_assert_eq!(lap_to_tree(&inst, &tree.to_lap(inst.n())).unwrap(), tree.clone());
            prop_assert_eq!(lap_cost(inst.metric(), &tree.to_lap(inst.n())), tree.cost(inst.metric()));
            let cheapest = all_anchorings(&inst, &labels).into_iter().min().unwrap();
            prop_assert_eq!(lap_cost(inst.metric(), &lap), cheapest);
        }
    }
}
