//! Exact DP over a nice tree decomposition.
//!
//! A cell is indexed by a node `b` and, for every bag vertex `u` and label
//! `i` in `1..k`, a pair of guarantees: `φ_i^u`, the label-`i` vertex of the
//! below-set `C_b` closest to `u`, and `ρ_i^u`, a label-`i` vertex outside
//! `C_b` that `C_b` vertices may anchor to. Its value is the cheapest
//! labeling of `C_b` honouring them. Each vertex is labeled and paid for
//! when it is forgotten; root-bag vertices are settled at extraction.

use std::collections::HashMap;

use thiserror::Error;

use crate::cost::Cost;
use crate::decomposition::{heuristic_decompose, make_nice, DecompositionError, NiceKind, NiceTreeDecomposition};
use crate::instance::Instance;
use crate::metric::{minimal_inducing_subgraph, Metric, VertexOrBottom};
use crate::model::{Label, Lap, ModelError, Solution};
use crate::util::for_each_product;

use VertexOrBottom::{Bottom, Vertex};

/// Default cap on the estimated state space.
pub const DEFAULT_BUDGET: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreewidthError {
    #[error("the root bag does not contain the instance root")]
    RootNotInRootBag,
    #[error("decomposition covers {got} vertices, instance has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("estimated state space 10^{log10_states:.1} exceeds the budget of {budget:e}")]
    BudgetExceeded { log10_states: f64, budget: f64 },
    #[error("no feasible k-hop Steiner tree exists")]
    Infeasible,
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `log10` of `(n + 2)^(2 (k - 1) · max_bag)`, the guarantee combinations a
/// single node may index.
pub fn state_space_log10(n: usize, k: usize, max_bag: usize) -> f64 {
    (2 * k.saturating_sub(1) * max_bag) as f64 * ((n + 2) as f64).log10()
}

/// Refuses instances whose state-space estimate exceeds `budget`.
pub fn check_budget(n: usize, k: usize, max_bag: usize, budget: f64) -> Result<(), TreewidthError> {
    let log10_states = state_space_log10(n, k, max_bag);
    if log10_states > budget.log10() {
        return Err(TreewidthError::BudgetExceeded { log10_states, budget });
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Decision {
    None,
    Forget { label: Label, phi: Vec<VertexOrBottom> },
    Join { left: Vec<VertexOrBottom>, right: Vec<VertexOrBottom> },
}

type Guarantees = Vec<VertexOrBottom>;
type Key = (usize, Guarantees, Guarantees);

/// Memoized evaluation of bag cells. Guarantee vectors are laid out bag
/// vertex by bag vertex (sorted bag order), `k - 1` labels each.
pub struct TwDp<'a> {
    instance: &'a Instance,
    nice: &'a NiceTreeDecomposition,
    width: usize,
    memo: HashMap<Key, (Cost, Decision)>,
}

impl<'a> TwDp<'a> {
    pub fn new(instance: &'a Instance, nice: &'a NiceTreeDecomposition) -> Self {
        TwDp { instance, nice, width: instance.hops() - 1, memo: HashMap::new() }
    }

    pub fn cells(&self) -> usize {
        self.memo.len()
    }

    fn metric(&self) -> &'a Metric {
        self.instance.metric()
    }

    fn bag(&self, b: usize) -> &'a [usize] {
        &self.nice.nodes[b].bag
    }

    /// `ρ_i^u` with `ρ_0 = r`.
    fn rho_at(&self, rho: &[VertexOrBottom], pos: usize, i: usize) -> VertexOrBottom {
        if i == 0 {
            Vertex(self.instance.root())
        } else {
            rho[pos * self.width + i - 1]
        }
    }

    /// `φ_i^u` with `φ_0 = ⊥`.
    fn phi_at(&self, phi: &[VertexOrBottom], pos: usize, i: usize) -> VertexOrBottom {
        if i == 0 {
            Bottom
        } else {
            phi[pos * self.width + i - 1]
        }
    }

    /// Conditions every satisfiable cell meets: guarantees on the correct
    /// side of the bag, every `ρ_i^u` at least as close to `u` as any other
    /// bag vertex's `ρ_i`, and the `φ` entries of each label being
    /// mutually consistent closest choices over distinct vertices.
    fn well_formed(&self, b: usize, rho: &[VertexOrBottom], phi: &[VertexOrBottom]) -> bool {
        let bag = self.bag(b);
        let w = self.width;
        if rho.len() != bag.len() * w || phi.len() != bag.len() * w {
            return false;
        }
        let m = self.metric();
        for &x in phi {
            if let Vertex(v) = x {
                if !self.nice.in_below(b, v) || !self.instance.is_usable(v) {
                    return false;
                }
            }
        }
        if rho.iter().any(|x| x.vertex().is_some_and(|v| self.nice.in_below(b, v))) {
            return false;
        }
        for (p, &u) in bag.iter().enumerate() {
            for i in 0..w {
                let own = m.rank(u, rho[p * w + i]);
                if (0..bag.len()).any(|q| m.rank(u, rho[q * w + i]) < own) {
                    return false;
                }
            }
        }
        phi_consistent(m, bag, w, phi)
    }

    /// `A[b, ρ, φ]`.
    pub fn cell(&mut self, b: usize, rho: &[VertexOrBottom], phi: &[VertexOrBottom]) -> Cost {
        if !self.well_formed(b, rho, phi) {
            return Cost::INFINITY;
        }
        let key = (b, rho.to_vec(), phi.to_vec());
        if let Some(&(c, _)) = self.memo.get(&key) {
            return c;
        }
        let (cost, decision) = match self.nice.nodes[b].kind {
            NiceKind::Leaf => (Cost::ZERO, Decision::None),
            NiceKind::Introduce { v, child } => (self.introduce(b, v, child, rho, phi), Decision::None),
            NiceKind::Forget { v, child } => self.forget(b, v, child, rho, phi),
            NiceKind::Join { left, right } => self.join(b, left, right, rho, phi),
        };
        self.memo.insert(key, (cost, decision));
        cost
    }

    fn introduce(&mut self, b: usize, v: usize, child: usize, rho: &[VertexOrBottom], phi: &[VertexOrBottom]) -> Cost {
        let (rho1, phi1) = self.introduce_child(b, v, rho, phi);
        let bag = self.bag(b);
        let pv = bag.iter().position(|&x| x == v).expect("introduced vertex is in the bag");
        let m = self.metric();
        for i in 1..=self.width {
            let via = m.closest_of(v, (0..bag.len()).filter(|&p| p != pv).map(|p| self.phi_at(phi, p, i)));
            if via != self.phi_at(phi, pv, i) {
                return Cost::INFINITY;
            }
        }
        self.cell(child, &rho1, &phi1)
    }

    fn introduce_child(
        &self,
        b: usize,
        v: usize,
        rho: &[VertexOrBottom],
        phi: &[VertexOrBottom],
    ) -> (Vec<VertexOrBottom>, Vec<VertexOrBottom>) {
        let bag = self.bag(b);
        let w = self.width;
        let pv = bag.iter().position(|&x| x == v).expect("introduced vertex is in the bag");
        let strip = |vec: &[VertexOrBottom]| -> Vec<VertexOrBottom> {
            vec.iter().enumerate().filter(|(j, _)| j / w.max(1) != pv || w == 0).map(|(_, &x)| x).collect()
        };
        (strip(rho), strip(phi))
    }

    /// Labels `v` may take when it is forgotten below guarantees `φ`.
    fn forget_labels(&self, b: usize, v: usize, phi: &[VertexOrBottom]) -> Vec<Label> {
        let bag = self.bag(b);
        let m = self.metric();
        let k = self.instance.hops();
        let named: Vec<usize> = (0..bag.len())
            .flat_map(|p| (1..=self.width).filter(move |&i| self.phi_at(phi, p, i) == Vertex(v)))
            .collect();
        if !self.instance.is_usable(v) {
            return if named.is_empty() { vec![Label::Infinite] } else { Vec::new() };
        }
        let mut labels: Vec<Label> = (1..=k)
            .filter(|&i| named.iter().all(|&j| j == i))
            .filter(|&i| {
                i == k
                    || bag.iter().enumerate().all(|(p, &u)| m.rank(u, Vertex(v)) >= m.rank(u, self.phi_at(phi, p, i)))
            })
            .map(Label::Depth)
            .collect();
        if named.is_empty() && !self.instance.is_terminal(v) {
            labels.push(Label::Infinite);
        }
        labels
    }

    /// Candidates, in closeness order from `u`, of the vertices of `C_c`
    /// (plus ⊥) that `keep` accepts.
    fn below_candidates(&self, c: usize, u: usize, keep: impl Fn(VertexOrBottom) -> bool) -> Vec<VertexOrBottom> {
        let m = self.metric();
        let mut out: Vec<VertexOrBottom> = (0..self.instance.n())
            .filter(|&x| self.nice.in_below(c, x) && self.instance.is_usable(x))
            .map(Vertex)
            .chain([Bottom])
            .filter(|&x| keep(x))
            .collect();
        out.sort_by_key(|&x| m.rank(u, x));
        out
    }

    /// `x` is no closer to any bag vertex `z` than `φ_i^z`.
    fn star(&self, b: usize, phi: &[VertexOrBottom], i: usize, x: VertexOrBottom) -> bool {
        let m = self.metric();
        self.bag(b).iter().enumerate().all(|(p, &z)| m.rank(z, self.phi_at(phi, p, i)) <= m.rank(z, x))
    }

    fn forget(
        &mut self,
        b: usize,
        v: usize,
        child: usize,
        rho: &[VertexOrBottom],
        phi: &[VertexOrBottom],
    ) -> (Cost, Decision) {
        let labels = self.forget_labels(b, v, phi);
        if labels.is_empty() {
            return (Cost::INFINITY, Decision::None);
        }
        let bag = self.bag(b);
        let bag1 = self.bag(child);
        let w = self.width;
        let m = self.metric();
        let parent_pos = |u: usize| bag.iter().position(|&x| x == u);

        let mut cands: Vec<Vec<VertexOrBottom>> = Vec::with_capacity(bag1.len() * w);
        for &u in bag1 {
            for i in 1..=w {
                let list = match parent_pos(u) {
                    None => self.below_candidates(child, v, |x| self.star(b, phi, i, x)),
                    Some(p) => {
                        let f = self.phi_at(phi, p, i);
                        if f == Vertex(v) {
                            let bar = m.rank(u, Vertex(v));
                            self.below_candidates(child, u, |x| m.rank(u, x) > bar)
                        } else {
                            vec![f]
                        }
                    }
                };
                cands.push(list);
            }
        }
        let pv = bag1.iter().position(|&x| x == v).expect("forgotten vertex is in the child bag");
        let rhos: Vec<Vec<VertexOrBottom>> = labels.iter().map(|&l| self.forget_rho(b, v, child, rho, l)).collect();

        let mut best = (Cost::INFINITY, Decision::None);
        let mut combos = Vec::new();
        enumerate_phi(m, bag1, w, &cands, |c| combos.push(c.to_vec()));
        for (label, rho1) in labels.iter().zip(&rhos) {
            for phi1 in &combos {
                let charge = match *label {
                    Label::Infinite => Cost::ZERO,
                    Label::Depth(i) => {
                        let up = m.closest_of(v, [self.phi_at(phi1, pv, i - 1), self.rho_at(rho1, pv, i - 1)]);
                        m.dist_to(v, up)
                    }
                };
                if charge >= best.0 {
                    continue;
                }
                let total = charge + self.cell(child, rho1, phi1);
                if total < best.0 {
                    best = (total, Decision::Forget { label: *label, phi: phi1.clone() });
                }
            }
        }
        best
    }

    fn join(
        &mut self,
        b: usize,
        left: usize,
        right: usize,
        rho: &[VertexOrBottom],
        phi: &[VertexOrBottom],
    ) -> (Cost, Decision) {
        let mut total = Cost::ZERO;
        let mut chosen = Vec::with_capacity(2);
        for c in [left, right] {
            let (rho_c, cands) = self.join_child(b, c, rho, phi);
            let m = self.metric();
            let mut combos = Vec::new();
            enumerate_phi(m, self.bag(b), self.width, &cands, |x| combos.push(x.to_vec()));
            let mut best = (Cost::INFINITY, Vec::new());
            for phi_c in combos {
                let v = self.cell(c, &rho_c, &phi_c);
                if v < best.0 {
                    best = (v, phi_c);
                }
            }
            if best.0.is_infinite() {
                return (Cost::INFINITY, Decision::None);
            }
            total += best.0;
            chosen.push(best.1);
        }
        let right_phi = chosen.pop().expect("two children");
        let left_phi = chosen.pop().expect("two children");
        (total, Decision::Join { left: left_phi, right: right_phi })
    }

    fn join_child(
        &self,
        b: usize,
        c: usize,
        rho: &[VertexOrBottom],
        phi: &[VertexOrBottom],
    ) -> (Vec<VertexOrBottom>, Vec<Vec<VertexOrBottom>>) {
        let bag = self.bag(b);
        let m = self.metric();
        let mut rho_c = Vec::with_capacity(rho.len());
        let mut cands = Vec::with_capacity(phi.len());
        for (p, &u) in bag.iter().enumerate() {
            for i in 1..=self.width {
                let elsewhere = (0..bag.len())
                    .map(|q| self.phi_at(phi, q, i))
                    .filter(|x| x.vertex().is_some_and(|y| !self.nice.in_below(c, y)));
                rho_c.push(m.closest_of(u, elsewhere.chain([self.rho_at(rho, p, i)])));
                let f = self.phi_at(phi, p, i);
                if f.vertex().is_some_and(|y| self.nice.in_below(c, y)) {
                    cands.push(vec![f]);
                } else {
                    cands.push(self.below_candidates(c, u, |x| self.star(b, phi, i, x)));
                }
            }
        }
        (rho_c, cands)
    }

    /// Replays decisions below `(b, ρ, φ)`, labeling every forgotten vertex.
    fn reconstruct(
        &self,
        b: usize,
        rho: &[VertexOrBottom],
        phi: &[VertexOrBottom],
        lap: &mut Lap,
        charges: &mut Vec<(usize, Cost)>,
    ) {
        let key = (b, rho.to_vec(), phi.to_vec());
        let decision = &self.memo.get(&key).expect("reconstructing an evaluated cell").1;
        let m = self.metric();
        match (self.nice.nodes[b].kind, decision) {
            (NiceKind::Leaf, _) => {}
            (NiceKind::Introduce { v, child }, _) => {
                let (rho1, phi1) = self.introduce_child(b, v, rho, phi);
                self.reconstruct(child, &rho1, &phi1, lap, charges);
            }
            (NiceKind::Forget { v, child }, Decision::Forget { label, phi: phi1 }) => {
                let rho1 = self.forget_rho(b, v, child, rho, *label);
                let pv = self.bag(child).iter().position(|&x| x == v).expect("in child bag");
                match *label {
                    Label::Infinite => {
                        lap.set(v, Label::Infinite, Some(v));
                        charges.push((v, Cost::ZERO));
                    }
                    Label::Depth(i) => {
                        let up = m.closest_of(v, [self.phi_at(phi1, pv, i - 1), self.rho_at(&rho1, pv, i - 1)]);
                        let a = up.vertex().expect("finite cell has a finite anchor");
                        lap.set(v, *label, Some(a));
                        charges.push((v, m.dist(v, a)));
                    }
                }
                self.reconstruct(child, &rho1, phi1, lap, charges);
            }
            (NiceKind::Join { left, right }, Decision::Join { left: pl, right: pr }) => {
                let (rl, _) = self.join_child(b, left, rho, phi);
                let (rr, _) = self.join_child(b, right, rho, phi);
                self.reconstruct(left, &rl, pl, lap, charges);
                self.reconstruct(right, &rr, pr, lap, charges);
            }
            _ => unreachable!("decision does not match node type"),
        }
    }

    fn forget_rho(
        &self,
        b: usize,
        v: usize,
        child: usize,
        rho: &[VertexOrBottom],
        label: Label,
    ) -> Vec<VertexOrBottom> {
        let bag = self.bag(b);
        let m = self.metric();
        let mut out = Vec::new();
        for &u in self.bag(child) {
            for i in 1..=self.width {
                let hit = label == Label::Depth(i);
                let p = bag.iter().position(|&x| x == u);
                out.push(match p {
                    None if hit => Vertex(v),
                    None => m.closest_of(v, (0..bag.len()).map(|q| self.rho_at(rho, q, i))),
                    Some(p) if hit => m.closest_of(u, [self.rho_at(rho, p, i), Vertex(v)]),
                    Some(p) => self.rho_at(rho, p, i),
                });
            }
        }
        out
    }
}

/// Consistency of a full `φ` vector for `bag`: per label, either every
/// entry is ⊥ or none is, each entry is at least as close to its own bag
/// vertex as every other entry, and no vertex carries two labels.
fn phi_consistent(m: &Metric, bag: &[usize], w: usize, phi: &[VertexOrBottom]) -> bool {
    for i in 0..w {
        for (p, &u) in bag.iter().enumerate() {
            let own = phi[p * w + i];
            for q in 0..bag.len() {
                let other = phi[q * w + i];
                if own.is_bottom() != other.is_bottom() || m.rank(u, other) < m.rank(u, own) {
                    return false;
                }
            }
        }
    }
    for (a, x) in phi.iter().enumerate() {
        if !x.is_bottom() && phi[..a].iter().enumerate().any(|(c, y)| y == x && c % w != a % w) {
            return false;
        }
    }
    true
}

/// Calls `f` on every `φ` vector drawn from `cands` that passes
/// [`phi_consistent`], pruning partial vectors as soon as they fail.
fn enumerate_phi(
    m: &Metric,
    bag: &[usize],
    w: usize,
    cands: &[Vec<VertexOrBottom>],
    mut f: impl FnMut(&[VertexOrBottom]),
) {
    fn go(
        m: &Metric,
        bag: &[usize],
        w: usize,
        cands: &[Vec<VertexOrBottom>],
        cur: &mut Vec<VertexOrBottom>,
        f: &mut dyn FnMut(&[VertexOrBottom]),
    ) {
        let a = cur.len();
        if a == cands.len() {
            f(cur);
            return;
        }
        let (p, i) = (a / w, a % w);
        'next: for &x in &cands[a] {
            for (c, &y) in cur.iter().enumerate() {
                if c % w == i {
                    let q = c / w;
                    if x.is_bottom() != y.is_bottom()
                        || m.rank(bag[p], y) < m.rank(bag[p], x)
                        || m.rank(bag[q], x) < m.rank(bag[q], y)
                    {
                        continue 'next;
                    }
                } else if !x.is_bottom() && x == y {
                    continue 'next;
                }
            }
            cur.push(x);
            go(m, bag, w, cands, cur, f);
            cur.pop();
        }
    }
    if w == 0 {
        f(&[]);
        return;
    }
    go(m, bag, w, cands, &mut Vec::with_capacity(cands.len()), &mut f);
}

/// Solves exactly over the given nice decomposition, whose root bag must
/// contain the instance root.
pub fn solve_treewidth(instance: &Instance, nice: &NiceTreeDecomposition) -> Result<Solution, TreewidthError> {
    if nice.n() != instance.n() {
        return Err(TreewidthError::SizeMismatch { expected: instance.n(), got: nice.n() });
    }
    let br = nice.root;
    let bag = &nice.nodes[br].bag;
    let r = instance.root();
    if !bag.contains(&r) {
        return Err(TreewidthError::RootNotInRootBag);
    }
    let k = instance.hops();
    let w = k - 1;
    let m = instance.metric();
    let mut dp = TwDp::new(instance, nice);

    let options: Vec<Vec<Label>> = bag
        .iter()
        .map(|&v| {
            if v == r {
                return vec![Label::Depth(0)];
            }
            let mut o = Vec::new();
            if instance.is_usable(v) {
                o.extend((1..=k).map(Label::Depth));
            }
            if !instance.is_terminal(v) {
                o.push(Label::Infinite);
            }
            o
        })
        .collect();
    let cands: Vec<Vec<VertexOrBottom>> = bag
        .iter()
        .flat_map(|&u| {
            let dp = &dp;
            (0..w).map(move |_| dp.below_candidates(br, u, |_| true))
        })
        .collect();
    let mut phis = Vec::new();
    enumerate_phi(m, bag, w, &cands, |x| phis.push(x.to_vec()));

    let mut labelings = Vec::new();
    for_each_product(&options, |l| labelings.push(l.to_vec()));
    // (cost, root-bag labels, ρ, φ)
    let mut best: Option<(Cost, Vec<Label>, Guarantees, Guarantees)> = None;
    for lbar in labelings {
        let rho: Vec<VertexOrBottom> = bag
            .iter()
            .flat_map(|&v| {
                let lbar = &lbar;
                (1..=w).map(move |i| {
                    m.closest_of(
                        v,
                        bag.iter().zip(lbar).filter(|(_, &l)| l == Label::Depth(i)).map(|(&x, _)| Vertex(x)),
                    )
                })
            })
            .collect();
        for phi in &phis {
            let mut extra = Cost::ZERO;
            for (p, (&v, &l)) in bag.iter().zip(&lbar).enumerate() {
                if let Label::Depth(i) = l {
                    if i > 0 {
                        let up = m.closest_of(v, [dp.phi_at(phi, p, i - 1), dp.rho_at(&rho, p, i - 1)]);
                        extra += m.dist_to(v, up);
                    }
                }
            }
            if best.as_ref().is_some_and(|b| extra >= b.0) || extra.is_infinite() {
                continue;
            }
            let total = extra + dp.cell(br, &rho, phi);
            if total.is_finite() && best.as_ref().is_none_or(|b| total < b.0) {
                best = Some((total, lbar.clone(), rho.clone(), phi.clone()));
            }
        }
    }
    let Some((cost, lbar, rho, phi)) = best else {
        return Err(TreewidthError::Infeasible);
    };

    let mut lap = Lap::new();
    let mut charges = Vec::new();
    for (p, (&v, &l)) in bag.iter().zip(&lbar).enumerate() {
        match l {
            Label::Depth(0) => lap.set(v, l, None),
            Label::Depth(i) => {
                let up = m.closest_of(v, [dp.phi_at(&phi, p, i - 1), dp.rho_at(&rho, p, i - 1)]);
                let a = up.vertex().expect("finite root charge");
                lap.set(v, l, Some(a));
                charges.push((v, m.dist(v, a)));
            }
            Label::Infinite => {
                lap.set(v, l, Some(v));
                charges.push((v, Cost::ZERO));
            }
        }
    }
    dp.reconstruct(br, &rho, &phi, &mut lap, &mut charges);
    charges.sort_unstable();
    let cells = dp.cells();
    Ok(Solution::from_lap(instance, lap, cost, charges, cells)?)
}

/// Builds a min-fill decomposition of the minimal graph inducing the
/// metric, makes it nice, and solves over it.
pub fn solve_treewidth_heuristic(instance: &Instance) -> Result<Solution, TreewidthError> {
    let nice = heuristic_nice(instance)?;
    solve_treewidth(instance, &nice)
}

/// The nice decomposition [`solve_treewidth_heuristic`] uses.
pub fn heuristic_nice(instance: &Instance) -> Result<NiceTreeDecomposition, TreewidthError> {
    let metric = instance.metric();
    let graph = minimal_inducing_subgraph(metric.graph(), metric);
    let td = heuristic_decompose(&graph);
    Ok(make_nice(&td, &graph, instance.root())?)
}

/// Value of a single cell on a fresh memo.
pub fn bag_cell(
    instance: &Instance,
    nice: &NiceTreeDecomposition,
    b: usize,
    rho: &[VertexOrBottom],
    phi: &[VertexOrBottom],
) -> Cost {
    TwDp::new(instance, nice).cell(b, rho, phi)
}
