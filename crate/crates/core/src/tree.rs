//! Exact DP for tree metrics.
//!
//! A cell `A[v, ρ, φ]` is the cheapest labeling of the subtree `T[v]` in
//! which, for every label `i` in `1..k`, `φ_i` is the vertex of label `i`
//! in `T[v]` closest to `v` and `ρ_i` is the closest one outside `T[v]`
//! (either may be ⊥). Index 0 is fixed: `ρ_0 = r`, `φ_0 = ⊥`. Vertices of
//! label `k` never anchor anyone, so they need no guarantee.

use std::collections::HashMap;

use thiserror::Error;

use crate::cost::Cost;
use crate::instance::Instance;
use crate::metric::{minimal_inducing_subgraph, Metric, VertexOrBottom, WeightedGraph};
use crate::model::{Label, Lap, ModelError, Solution};
use crate::util::for_each_product;

use VertexOrBottom::{Bottom, Vertex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("the metric is not induced by a tree")]
    NotATree,
    #[error("no feasible k-hop Steiner tree exists")]
    Infeasible,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The tree inducing the metric, rooted at the instance root.
#[derive(Debug, Clone)]
pub struct RootedMetricTree {
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    tin: Vec<usize>,
    tout: Vec<usize>,
    order: Vec<usize>,
}

impl RootedMetricTree {
    /// Roots `graph`, which must be a tree.
    pub fn new(graph: &WeightedGraph, root: usize) -> Result<Self, TreeError> {
        if !graph.is_tree() || root >= graph.n() {
            return Err(TreeError::NotATree);
        }
        let n = graph.n();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut tin = vec![0; n];
        let mut tout = vec![0; n];
        let mut order = Vec::with_capacity(n);
        // Iterative DFS; neighbours are sorted, so children come out sorted.
        let mut stack = vec![(root, usize::MAX, false)];
        while let Some((v, from, done)) = stack.pop() {
            if done {
                tout[v] = order.len();
                continue;
            }
            tin[v] = order.len();
            order.push(v);
            if from != usize::MAX {
                parent[v] = Some(from);
                children[from].push(v);
            }
            stack.push((v, from, true));
            for &(w, _) in graph.neighbors(v).iter().rev() {
                if w != from {
                    stack.push((w, v, false));
                }
            }
        }
        Ok(RootedMetricTree { root, parent, children, tin, tout, order })
    }

    /// Roots the minimal graph inducing the instance metric.
    pub fn from_instance(instance: &Instance) -> Result<Self, TreeError> {
        let metric = instance.metric();
        Self::new(&minimal_inducing_subgraph(metric.graph(), metric), instance.root())
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Whether `w` lies in `T[v]`.
    #[inline]
    pub fn in_subtree(&self, w: usize, v: usize) -> bool {
        self.tin[v] <= self.tin[w] && self.tin[w] < self.tout[v]
    }

    #[inline]
    pub fn contains(&self, x: VertexOrBottom, v: usize) -> bool {
        x.vertex().is_some_and(|w| self.in_subtree(w, v))
    }

    /// Vertices of `T[v]` in preorder.
    pub fn subtree(&self, v: usize) -> &[usize] {
        &self.order[self.tin[v]..self.tout[v]]
    }
}

fn guarantee(vec: &[VertexOrBottom], i: usize, root: usize) -> VertexOrBottom {
    if i == 0 {
        Vertex(root)
    } else {
        vec[i - 1]
    }
}

fn phi_at(phi: &[VertexOrBottom], i: usize) -> VertexOrBottom {
    if i == 0 {
        Bottom
    } else {
        phi[i - 1]
    }
}

/// Label and anchor that the guarantees force on `v` itself: label `i` if
/// `φ_i = v`; label `k` for a terminal no guarantee names; excluded for a
/// non-terminal no guarantee names. `None` when contradictory.
fn own_label(
    metric: &Metric,
    root: usize,
    v: usize,
    rho: &[VertexOrBottom],
    phi: &[VertexOrBottom],
    is_terminal: bool,
) -> Option<(Label, VertexOrBottom)> {
    let k = phi.len() + 1;
    let mut hits = (1..k).filter(|&i| phi[i - 1] == Vertex(v));
    let label = match (hits.next(), hits.next()) {
        (Some(_), Some(_)) => return None,
        (Some(i), None) => i,
        (None, _) if is_terminal => k,
        (None, _) => return Some((Label::Infinite, Vertex(v))),
    };
    let up = [guarantee(rho, label - 1, root), phi_at(phi, label - 1)];
    Some((Label::Depth(label), metric.closest_of(v, up)))
}

/// Cost `c_v` of anchoring `v` itself under the guarantees `(ρ, φ)`.
pub fn anchor_cost_cv(
    metric: &Metric,
    root: usize,
    v: usize,
    rho: &[VertexOrBottom],
    phi: &[VertexOrBottom],
    is_terminal: bool,
) -> Cost {
    match own_label(metric, root, v, rho, phi, is_terminal) {
        None => Cost::INFINITY,
        Some((Label::Infinite, _)) => Cost::ZERO,
        Some((_, anchor)) => metric.dist_to(v, anchor),
    }
}

/// Possible values of the child guarantee `φ_i(v_j)` given `φ_i` at `v`,
/// ordered by closeness to `v` with ⊥ last.
pub fn child_phi_candidates(
    metric: &Metric,
    tree: &RootedMetricTree,
    v: usize,
    vj: usize,
    phi_i: VertexOrBottom,
) -> Vec<VertexOrBottom> {
    if tree.contains(phi_i, vj) {
        return vec![phi_i];
    }
    if phi_i.is_bottom() {
        return vec![Bottom];
    }
    let bar = metric.rank(v, phi_i);
    let mut out: Vec<usize> = tree.subtree(vj).iter().copied().filter(|&w| metric.rank(v, Vertex(w)) > bar).collect();
    out.sort_by_key(|&w| metric.rank(v, Vertex(w)));
    out.into_iter().map(Vertex).chain([Bottom]).collect()
}

/// The child guarantee `ρ_i(v_j)`: unchanged if `φ_i` lies below `v_j`,
/// otherwise whichever of `ρ_i`, `φ_i` is closer to `v`.
pub fn child_rho(
    metric: &Metric,
    tree: &RootedMetricTree,
    v: usize,
    vj: usize,
    rho_i: VertexOrBottom,
    phi_i: VertexOrBottom,
) -> VertexOrBottom {
    if tree.contains(phi_i, vj) {
        rho_i
    } else {
        metric.closest_of(v, [rho_i, phi_i])
    }
}

type Key = (usize, Vec<VertexOrBottom>, Vec<VertexOrBottom>);

/// Memoized evaluation of tree DP cells for one instance.
pub struct TreeDp<'a> {
    instance: &'a Instance,
    tree: &'a RootedMetricTree,
    memo: HashMap<Key, (Cost, Vec<Vec<VertexOrBottom>>)>,
}

impl<'a> TreeDp<'a> {
    pub fn new(instance: &'a Instance, tree: &'a RootedMetricTree) -> Self {
        TreeDp { instance, tree, memo: HashMap::new() }
    }

    /// Number of distinct cells evaluated so far.
    pub fn cells(&self) -> usize {
        self.memo.len()
    }

    fn well_formed(&self, v: usize, rho: &[VertexOrBottom], phi: &[VertexOrBottom]) -> bool {
        let tree = self.tree;
        let k = self.instance.hops();
        if rho.len() + 1 != k || phi.len() + 1 != k {
            return false;
        }
        if phi.iter().any(|&x| !x.is_bottom() && !tree.contains(x, v)) {
            return false;
        }
        if phi.iter().any(|&x| x.vertex().is_some_and(|w| !self.instance.is_usable(w))) {
            return false;
        }
        if rho.iter().any(|&x| tree.contains(x, v)) {
            return false;
        }
        // A vertex carries a single label.
        !phi.iter().enumerate().any(|(i, &x)| !x.is_bottom() && phi[..i].contains(&x))
    }

    /// `A[v, ρ, φ]`; infinite when no labeling of `T[v]` meets the guarantees.
    pub fn cell(&mut self, v: usize, rho: &[VertexOrBottom], phi: &[VertexOrBottom]) -> Cost {
        if !self.well_formed(v, rho, phi) {
            return Cost::INFINITY;
        }
        let key = (v, rho.to_vec(), phi.to_vec());
        if let Some(&(c, _)) = self.memo.get(&key) {
            return c;
        }
        let (cost, choice) = self.evaluate(v, rho, phi);
        self.memo.insert(key, (cost, choice));
        cost
    }

    fn evaluate(
        &mut self,
        v: usize,
        rho: &[VertexOrBottom],
        phi: &[VertexOrBottom],
    ) -> (Cost, Vec<Vec<VertexOrBottom>>) {
        let metric = self.instance.metric();
        let r = self.instance.root();
        let is_terminal = self.instance.is_terminal(v);
        let own = if self.instance.is_usable(v) || !phi.contains(&Vertex(v)) {
            anchor_cost_cv(metric, r, v, rho, phi, is_terminal)
        } else {
            Cost::INFINITY
        };
        if own.is_infinite() {
            return (Cost::INFINITY, Vec::new());
        }
        let mut total = own;
        let mut choices = Vec::new();
        for &vj in self.tree.children(v) {
            let rho_j: Vec<_> = rho.iter().zip(phi).map(|(&p, &f)| child_rho(metric, self.tree, v, vj, p, f)).collect();
            let cands: Vec<Vec<_>> = phi
                .iter()
                .map(|&f| {
                    let mut c = child_phi_candidates(metric, self.tree, v, vj, f);
                    c.retain(|x| x.vertex().is_none_or(|w| self.instance.is_usable(w)));
                    c
                })
                .collect();
            let (best, arg) = self.best_child(vj, &rho_j, &cands);
            if best.is_infinite() {
                return (Cost::INFINITY, Vec::new());
            }
            total += best;
            choices.push(arg);
        }
        (total, choices)
    }

    fn best_child(
        &mut self,
        vj: usize,
        rho_j: &[VertexOrBottom],
        cands: &[Vec<VertexOrBottom>],
    ) -> (Cost, Vec<VertexOrBottom>) {
        let mut best = (Cost::INFINITY, Vec::new());
        let mut combos = Vec::new();
        for_each_product(cands, |c| combos.push(c.to_vec()));
        for phi_j in combos {
            let c = self.cell(vj, rho_j, &phi_j);
            if c < best.0 {
                best = (c, phi_j);
            }
        }
        best
    }

    /// Optimal cost at the root, with the chosen child guarantees.
    fn root_value(&mut self) -> (Cost, Vec<Vec<VertexOrBottom>>) {
        let r = self.tree.root();
        let k = self.instance.hops();
        let metric = self.instance.metric();
        let rho_empty = vec![Bottom; k - 1];
        let mut total = Cost::ZERO;
        let mut choices = Vec::new();
        for &vj in self.tree.children(r) {
            let mut all: Vec<usize> =
                self.tree.subtree(vj).iter().copied().filter(|&w| self.instance.is_usable(w)).collect();
            all.sort_by_key(|&w| metric.rank(r, Vertex(w)));
            let options: Vec<VertexOrBottom> = all.into_iter().map(Vertex).chain([Bottom]).collect();
            let cands = vec![options; k - 1];
            let (best, arg) = self.best_child(vj, &rho_empty, &cands);
            if best.is_infinite() {
                return (Cost::INFINITY, Vec::new());
            }
            total += best;
            choices.push(arg);
        }
        (total, choices)
    }

    /// Replays the stored decisions from `(v, ρ, φ)` into `lap`.
    fn reconstruct(
        &self,
        v: usize,
        rho: &[VertexOrBottom],
        phi: &[VertexOrBottom],
        lap: &mut Lap,
        charges: &mut Vec<(usize, Cost)>,
    ) {
        let metric = self.instance.metric();
        let r = self.instance.root();
        let (label, anchor) = own_label(metric, r, v, rho, phi, self.instance.is_terminal(v)).expect("finite cell");
        let anchor = anchor.vertex().expect("finite anchor");
        lap.set(v, label, Some(anchor));
        charges.push((v, metric.dist(v, anchor)));
        let key = (v, rho.to_vec(), phi.to_vec());
        let choices = &self.memo[&key].1;
        for (&vj, phi_j) in self.tree.children(v).iter().zip(choices) {
            let rho_j: Vec<_> = rho.iter().zip(phi).map(|(&p, &f)| child_rho(metric, self.tree, v, vj, p, f)).collect();
            self.reconstruct(vj, &rho_j, phi_j, lap, charges);
        }
    }
}

/// Solves a tree-metric instance exactly.
pub fn solve_tree(instance: &Instance) -> Result<Solution, TreeError> {
    let tree = RootedMetricTree::from_instance(instance)?;
    solve_tree_with(instance, &tree)
}

/// Solves using an already rooted inducing tree.
pub fn solve_tree_with(instance: &Instance, tree: &RootedMetricTree) -> Result<Solution, TreeError> {
    if tree.root() != instance.root() || tree.order.len() != instance.n() {
        return Err(TreeError::NotATree);
    }
    let mut dp = TreeDp::new(instance, tree);
    let (cost, choices) = dp.root_value();
    if cost.is_infinite() {
        return Err(TreeError::Infeasible);
    }
    let r = instance.root();
    let mut lap = Lap::new();
    let mut charges = Vec::new();
    lap.set(r, Label::Depth(0), None);
    let rho_empty = vec![Bottom; instance.hops() - 1];
    for (&vj, phi_j) in tree.children(r).iter().zip(&choices) {
        dp.reconstruct(vj, &rho_empty, phi_j, &mut lap, &mut charges);
    }
    charges.sort_unstable();
    let cells = dp.cells();
    Ok(Solution::from_lap(instance, lap, cost, charges, cells)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::build_metric;
    use crate::model::{audit_charges, validate_lap};
    use crate::oracle::oracle_khop;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn tree_instance(n: usize, edges: &[(usize, usize, u64)], terminals: &[usize], root: usize, k: usize) -> Instance {
        let m = Arc::new(build_metric(&WeightedGraph::from_int_edges(n, edges).unwrap()).unwrap());
        Instance::new(m, terminals.iter().copied(), root, k).unwrap()
    }

    #[test]
    fn cv_examples() {
        let inst = tree_instance(3, &[(0, 1, 5), (1, 2, 1)], &[], 0, 3);
        let m = inst.metric();
        assert_eq!(anchor_cost_cv(m, 0, 2, &[Bottom, Bottom], &[Bottom, Bottom], false), Cost::ZERO);
        // A terminal nobody names falls to label k; with nothing at label k-1 it cannot anchor.
        assert_eq!(anchor_cost_cv(m, 0, 2, &[Bottom, Bottom], &[Bottom, Bottom], true), Cost::INFINITY);
        // φ_2 = v with ρ_1 at distance 5 and φ_1 = ⊥.
        let far = tree_instance(2, &[(0, 1, 5)], &[], 0, 3);
        assert_eq!(
            anchor_cost_cv(far.metric(), 0, 1, &[Vertex(0), Bottom], &[Bottom, Vertex(1)], true),
            Cost::from_int(5)
        );
        assert_eq!(anchor_cost_cv(m, 0, 2, &[Bottom, Bottom], &[Vertex(2), Vertex(2)], false), Cost::INFINITY);
        // k = 1: an unnamed terminal hangs off the root.
        assert_eq!(anchor_cost_cv(m, 0, 2, &[], &[], true), Cost::from_int(6));
    }

    #[test]
    fn candidate_examples() {
        // Unit star: centre 0 with children 1, 2; vertex 3 below 1.
        let inst = tree_instance(4, &[(0, 1, 1), (0, 2, 1), (1, 3, 1)], &[], 0, 2);
        let tree = RootedMetricTree::from_instance(&inst).unwrap();
        let m = inst.metric();
        assert_eq!(child_phi_candidates(m, &tree, 0, 1, Bottom), vec![Bottom]);
        assert_eq!(child_phi_candidates(m, &tree, 0, 1, Vertex(3)), vec![Vertex(3)]);
        // From the centre, 1 ties with 2 at distance 1 but loses nothing on id; 3 is farther.
        assert_eq!(child_phi_candidates(m, &tree, 0, 1, Vertex(2)), vec![Vertex(3), Bottom]);
        assert_eq!(child_phi_candidates(m, &tree, 0, 2, Vertex(1)), vec![Vertex(2), Bottom]);

        assert_eq!(child_rho(m, &tree, 0, 1, Bottom, Vertex(3)), Bottom);
        assert_eq!(child_rho(m, &tree, 0, 1, Vertex(2), Bottom), Vertex(2));
    }

    #[test]
    fn child_rho_prefers_closer_phi() {
        // v = 1 with ρ_i = 0 at distance 4 and φ_i = 3 in a sibling subtree at distance 2.
        let inst = tree_instance(4, &[(0, 1, 4), (1, 2, 1), (1, 3, 2)], &[], 0, 2);
        let tree = RootedMetricTree::from_instance(&inst).unwrap();
        assert_eq!(child_rho(inst.metric(), &tree, 1, 2, Vertex(0), Vertex(3)), Vertex(3));
    }

    #[test]
    fn leaf_cells() {
        let inst = tree_instance(2, &[(0, 1, 5)], &[1], 0, 3);
        let tree = RootedMetricTree::from_instance(&inst).unwrap();
        let mut dp = TreeDp::new(&inst, &tree);
        assert_eq!(dp.cell(1, &[Vertex(0), Bottom], &[Bottom, Vertex(1)]), Cost::from_int(5));
        assert_eq!(dp.cell(1, &[Bottom, Bottom], &[Bottom, Bottom]), Cost::INFINITY);

        let steiner = tree_instance(2, &[(0, 1, 5)], &[], 0, 3);
        let mut dp = TreeDp::new(&steiner, &tree);
        assert_eq!(dp.cell(1, &[Bottom, Bottom], &[Bottom, Bottom]), Cost::ZERO);
    }

    #[test]
    fn solve_examples() {
        let single = tree_instance(1, &[], &[], 0, 2);
        assert_eq!(solve_tree(&single).unwrap().cost, Cost::ZERO);

        let star = tree_instance(4, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)], &[1, 2, 3], 0, 1);
        assert_eq!(solve_tree(&star).unwrap().cost, Cost::from_int(3));

        let path = tree_instance(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)], &[1, 2, 3], 0, 2);
        assert_eq!(solve_tree(&path).unwrap().cost, Cost::from_int(4));
    }

    #[test]
    fn rejects_cycles() {
        let cyc = tree_instance(3, &[(0, 1, 1), (1, 2, 1), (2, 0, 1)], &[], 0, 2);
        assert_eq!(solve_tree(&cyc).unwrap_err(), TreeError::NotATree);
    }

    #[test]
    fn metric_redundant_edges_are_ignored() {
        // The 0-2 edge is implied by 0-1-2, so the metric is still a tree metric.
        let inst = tree_instance(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 2)], &[2], 0, 2);
        assert_eq!(solve_tree(&inst).unwrap().cost, oracle_khop(&inst).unwrap().cost);
    }

    /// Brute-force value of a cell: every labeling of `T[v]` whose closest
    /// label-i vertices match `φ`, with each vertex anchored as cheaply as
    /// the guarantees allow.
    fn brute_cell(
        inst: &Instance,
        tree: &RootedMetricTree,
        v: usize,
        rho: &[VertexOrBottom],
        phi: &[VertexOrBottom],
    ) -> Cost {
        let m = inst.metric();
        let k = inst.hops();
        let sub = tree.subtree(v).to_vec();
        let options: Vec<Vec<Label>> = sub
            .iter()
            .map(|&w| {
                let mut o: Vec<Label> = (1..=k).map(Label::Depth).collect();
                if !inst.is_terminal(w) {
                    o.push(Label::Infinite);
                }
                o
            })
            .collect();
        let mut best = Cost::INFINITY;
        for_each_product(&options, |labels| {
            for i in 1..k {
                let closest = m.closest_of(
                    v,
                    sub.iter().zip(labels).filter(|(_, &l)| l == Label::Depth(i)).map(|(&w, _)| Vertex(w)),
                );
                if closest != phi[i - 1] {
                    return;
                }
            }
            let mut total = Cost::ZERO;
            for (&w, &l) in sub.iter().zip(labels) {
                if let Label::Depth(d) = l {
                    let inside =
                        sub.iter().zip(labels).filter(|(_, &l2)| l2 == Label::Depth(d - 1)).map(|(&x, _)| m.dist(w, x));
                    let outside = m.dist_to(w, guarantee(rho, d - 1, inst.root()));
                    total += inside.chain([outside]).min().unwrap();
                }
            }
            best = best.min(total);
        });
        best
    }

    fn arb_tree_instance(max_n: usize, max_k: usize) -> impl Strategy<Value = Instance> {
        (1..=max_n).prop_flat_map(move |n| {
            (
                proptest::collection::vec((any::<prop::sample::Index>(), 1u64..=10), n - 1),
                proptest::collection::vec(any::<bool>(), n),
                0..n,
                1..=max_k,
            )
                .prop_map(move |(shape, term, root, k)| {
                    let edges: Vec<_> =
                        shape.iter().enumerate().map(|(i, (p, w))| (p.index(i + 1), i + 1, *w)).collect();
                    let terms: Vec<usize> = (0..n).filter(|&v| term[v]).collect();
                    tree_instance(n, &edges, &terms, root, k)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_oracle(inst in arb_tree_instance(8, 3)) {
            let sol = solve_tree(&inst).unwrap();
            prop_assert_eq!(sol.cost, oracle_khop(&inst).unwrap().cost);
            prop_assert!(validate_lap(&inst, &sol.lap));
            prop_assert_eq!(audit_charges(&inst, &sol), Ok(()));
        }

        #[test]
        fn cells_match_brute_force(inst in arb_tree_instance(5, 3)) {
            prop_assume!(inst.hops() >= 2);
            let tree = RootedMetricTree::from_instance(&inst).unwrap();
            let mut dp = TreeDp::new(&inst, &tree);
            let k = inst.hops();
            for v in (0..inst.n()).filter(|&v| v != inst.root()) {
                let inside: Vec<_> = tree.subtree(v).iter().map(|&w| Vertex(w)).chain([Bottom]).collect();
                let outside: Vec<_> = (0..inst.n()).filter(|&w| !tree.in_subtree(w, v)).map(Vertex).chain([Bottom]).collect();
                let mut cases = Vec::new();
                for_each_product(&vec![outside; k - 1], |rho| {
                    for_each_product(&vec![inside.clone(); k - 1], |phi| cases.push((rho.to_vec(), phi.to_vec())));
                });
                for (rho, phi) in cases {
                    let dup = phi.iter().enumerate().any(|(i, x)| !x.is_bottom() && phi[..i].contains(x));
                    let got = dp.cell(v, &rho, &phi);
                    let expect = if dup { Cost::INFINITY } else { brute_cell(&inst, &tree, v, &rho, &phi) };
                    prop_assert_eq!(got, expect, "v={} rho={:?} phi={:?}", v, rho, phi);
                }
            }
        }
    }
}
