//! Exact DP for path metrics.
//!
//! On a line, an optimal tree can be assumed to give every vertex a subtree
//! occupying a contiguous interval. `A[p, s, a, b]` is the cheapest way to
//! hang the interval `[a, b]` below `s` (which lies outside it) with at most
//! `p` further hops. The child `s'` of `s` whose subtree reaches `b` owns an
//! interval `[c, b]`; the rest `[a, c-1]` stays with `s`.

use std::collections::HashMap;

use thiserror::Error;

use crate::cost::Cost;
use crate::instance::Instance;
use crate::metric::minimal_inducing_subgraph;
use crate::model::{Label, Lap, ModelError, Solution};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("the metric is not induced by a path")]
    NotAPath,
    #[error("vertex order violates the line distances between positions {i} and {j}")]
    NotAPathOrder { i: usize, j: usize },
    #[error("path instance with {0} vertices exceeds the solver limit")]
    TooLarge(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Terminals of a path instance in line order, with their coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathInstance {
    /// Original vertex id at each position.
    pub vertices: Vec<usize>,
    /// Coordinate of each position, strictly increasing.
    pub coords: Vec<Cost>,
    pub root: usize,
    pub hops: usize,
}

impl PathInstance {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> Cost {
        let (a, b) = (self.coords[i].micros(), self.coords[j].micros());
        Cost::from_micros(a.abs_diff(b))
    }
}

/// Restricts a path instance to its terminals, using the vertex order of
/// the minimal graph inducing the metric.
pub fn reduce_to_terminals(instance: &Instance) -> Result<PathInstance, PathError> {
    let metric = instance.metric();
    let order = minimal_inducing_subgraph(metric.graph(), metric).path_order().ok_or(PathError::NotAPath)?;
    reduce_with_order(instance, &order)
}

/// Like [`reduce_to_terminals`], with the line order supplied by the caller.
pub fn reduce_with_order(instance: &Instance, order: &[usize]) -> Result<PathInstance, PathError> {
    let metric = instance.metric();
    let n = instance.n();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&v| v >= n || std::mem::replace(&mut seen[v], true)) {
        return Err(PathError::NotAPath);
    }
    let coords: Vec<Cost> = order.iter().map(|&v| metric.dist(order[0], v)).collect();
    for i in 0..n {
        for j in i + 1..n {
            let line = coords[j].checked_sub(coords[i]);
            if line != Some(metric.dist(order[i], order[j])) || line == Some(Cost::ZERO) {
                return Err(PathError::NotAPathOrder { i, j });
            }
        }
    }
    let kept: Vec<usize> = (0..n).filter(|&i| instance.is_terminal(order[i])).collect();
    let root = kept.iter().position(|&i| order[i] == instance.root()).expect("the root is a terminal");
    Ok(PathInstance {
        vertices: kept.iter().map(|&i| order[i]).collect(),
        coords: kept.iter().map(|&i| coords[i]).collect(),
        root,
        hops: instance.hops(),
    })
}

/// Memoized, literal evaluation of single cells; slow but easy to audit.
pub struct PathDpMemo<'a> {
    path: &'a PathInstance,
    memo: HashMap<(usize, usize, usize, usize), Cost>,
}

impl<'a> PathDpMemo<'a> {
    pub fn new(path: &'a PathInstance) -> Self {
        PathDpMemo { path, memo: HashMap::new() }
    }

    /// `A[p, s, a, b]`; an interval with `a > b` is empty and costs nothing.
    pub fn cell(&mut self, p: usize, s: usize, a: usize, b: usize) -> Cost {
        if a > b {
            return Cost::ZERO;
        }
        assert!(p >= 1 && !(a..=b).contains(&s), "A[{p}, {s}, {a}, {b}] is not a valid cell");
        if a == b {
            return self.path.dist(s, a);
        }
        if p == 1 {
            return (a..=b).map(|x| self.path.dist(s, x)).sum();
        }
        if let Some(&c) = self.memo.get(&(p, s, a, b)) {
            return c;
        }
        let mut best = Cost::INFINITY;
        for s2 in a..=b {
            for c in a..=s2 {
                let left = if c == a { Cost::ZERO } else { self.cell(p, s, a, c - 1) };
                let inner = if c == s2 { Cost::ZERO } else { self.cell(p - 1, s2, c, s2 - 1) };
                let right = self.cell(p - 1, s2, s2 + 1, b);
                best = best.min(self.path.dist(s2, s) + left + inner + right);
            }
        }
        self.memo.insert((p, s, a, b), best);
        best
    }
}

/// `A[p, s, a, b]` on a fresh memo.
pub fn path_dp_cell(path: &PathInstance, p: usize, s: usize, a: usize, b: usize) -> Cost {
    PathDpMemo::new(path).cell(p, s, a, b)
}

/// Optimal tree on a reduced instance: its cost, each position's parent
/// position (`None` for the root) and the number of cells filled.
#[derive(Debug, Clone)]
pub struct PathTree {
    pub cost: Cost,
    pub parent: Vec<Option<usize>>,
    pub cells: usize,
}

const NONE: u16 = u16::MAX;

/// Bottom-up table over (hop budget, interval length). The inner minimum
/// over `c` only depends on `(p, s, a, s')`, so it is tabulated once as `M`
/// and shared by every right endpoint `b`.
pub fn solve_path_reduced(path: &PathInstance) -> Result<PathTree, PathError> {
    let n = path.len();
    if n >= NONE as usize {
        return Err(PathError::TooLarge(n));
    }
    let hops = path.hops.min(n.saturating_sub(1)).max(1);
    let idx = |s: usize, a: usize, b: usize| (s * n + a) * n + b;
    let dist: Vec<u64> = (0..n * n).map(|i| path.dist(i / n, i % n).micros()).collect();
    let d = |i: usize, j: usize| dist[i * n + j];
    let size = n * n * n;

    // Costs are plain u64 micros with u64::MAX as infinity.
    let add = |x: u64, y: u64| x.saturating_add(y);
    let mut prev = vec![0u64; size];
    let mut cur = vec![0u64; size];
    let mut m_val = vec![0u64; size];
    let mut m_arg = vec![NONE; size];
    // Back-pointers (s', c) for every layer p >= 2.
    let mut back: Vec<Vec<(u16, u16)>> = vec![Vec::new(); hops + 1];
    let mut cells = 0usize;

    for s in 0..n {
        for a in 0..n {
            let mut acc = 0u64;
            for b in a..n {
                if (a..=b).contains(&s) {
                    break;
                }
                acc += d(s, b);
                prev[idx(s, a, b)] = acc;
                cells += 1;
            }
        }
    }

    for p in 2..=hops {
        let mut bp = vec![(NONE, NONE); size];
        for len in 1..=n {
            for a in 0..=n - len {
                let b = a + len - 1;
                for s in (0..n).filter(|s| !(a..=b).contains(s)) {
                    // M[s, a, b]: s' = b owns [c, b], s keeps [a, c-1].
                    let mut best = (u64::MAX, NONE);
                    for c in a..=b {
                        let left = if c == a { 0 } else { cur[idx(s, a, c - 1)] };
                        let inner = if c == b { 0 } else { prev[idx(b, c, b - 1)] };
                        let v = add(left, inner);
                        if v < best.0 {
                            best = (v, c as u16);
                        }
                    }
                    m_val[idx(s, a, b)] = best.0;
                    m_arg[idx(s, a, b)] = best.1;

                    let mut cell = (u64::MAX, NONE, NONE);
                    for s2 in a..=b {
                        let right = if s2 == b { 0 } else { prev[idx(s2, s2 + 1, b)] };
                        let v = add(add(d(s2, s), m_val[idx(s, a, s2)]), right);
                        if v < cell.0 {
                            cell = (v, s2 as u16, m_arg[idx(s, a, s2)]);
                        }
                    }
                    cur[idx(s, a, b)] = cell.0;
                    bp[idx(s, a, b)] = (cell.1, cell.2);
                    cells += 1;
                }
            }
        }
        back[p] = bp;
        std::mem::swap(&mut prev, &mut cur);
    }

    let r = path.root;
    let layer = &prev;
    let left = if r == 0 { 0 } else { layer[idx(r, 0, r - 1)] };
    let right = if r + 1 == n { 0 } else { layer[idx(r, r + 1, n - 1)] };
    let total = add(left, right);

    let mut parent = vec![None; n];
    let mut stack = vec![(hops, r, 0usize, r as isize - 1), (hops, r, r + 1, n as isize - 1)];
    while let Some((p, s, a, b)) = stack.pop() {
        if (a as isize) > b {
            continue;
        }
        let b = b as usize;
        if p == 1 {
            for x in a..=b {
                parent[x] = Some(s);
            }
            continue;
        }
        let (s2, c) = back[p][idx(s, a, b)];
        let (s2, c) = (s2 as usize, c as usize);
        parent[s2] = Some(s);
        stack.push((p, s, a, c as isize - 1));
        stack.push((p - 1, s2, c, s2 as isize - 1));
        stack.push((p - 1, s2, s2 + 1, b as isize));
    }
    Ok(PathTree { cost: Cost::from_micros(total), parent, cells })
}

/// Solves a path-metric instance exactly.
pub fn solve_path(instance: &Instance) -> Result<Solution, PathError> {
    let path = reduce_to_terminals(instance)?;
    solve_reduced_into(instance, &path)
}

/// Solves with a caller-supplied line order.
pub fn solve_path_with_order(instance: &Instance, order: &[usize]) -> Result<Solution, PathError> {
    let path = reduce_with_order(instance, order)?;
    solve_reduced_into(instance, &path)
}

fn solve_reduced_into(instance: &Instance, path: &PathInstance) -> Result<Solution, PathError> {
    let result = solve_path_reduced(path)?;
    let parents: Vec<(usize, usize)> =
        result.parent.iter().enumerate().filter_map(|(i, p)| p.map(|p| (path.vertices[i], path.vertices[p]))).collect();
    let tree = crate::model::SteinerTree::from_parents(instance.root(), parents)?;
    let mut lap = Lap::new();
    for v in 0..instance.n() {
        match (tree.depth(v), tree.parent(v)) {
            (Some(d), p) => lap.set(v, Label::Depth(d), p),
            (None, _) => lap.set(v, Label::Infinite, Some(v)),
        }
    }
    let charges = Solution::lap_charges(instance.metric(), &lap);
    Ok(Solution::from_lap(instance, lap, result.cost, charges, result.cells)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{build_metric, Metric, WeightedGraph};
    use crate::model::{validate_lap, SteinerTree};
    use crate::oracle::oracle_khop;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn path_metric(weights: &[u64]) -> Arc<Metric> {
        let edges: Vec<_> = weights.iter().enumerate().map(|(i, &w)| (i, i + 1, w)).collect();
        Arc::new(build_metric(&WeightedGraph::from_int_edges(weights.len() + 1, &edges).unwrap()).unwrap())
    }

    fn unit_line(n: usize) -> PathInstance {
        PathInstance {
            vertices: (0..n).collect(),
            coords: (0..n as u64).map(Cost::from_int).collect(),
            root: 0,
            hops: n,
        }
    }

    /// Cheapest tree rooted at `s` over `[a, b]` with depth at most `p`,
    /// enumerating every parent function on the interval.
    fn brute_cell(line: &PathInstance, p: usize, s: usize, a: usize, b: usize) -> Cost {
        let members: Vec<usize> = (a..=b).collect();
        let choices: Vec<Vec<usize>> =
            members.iter().map(|&x| members.iter().copied().chain([s]).filter(|&y| y != x).collect()).collect();
        let mut best = Cost::INFINITY;
        crate::util::for_each_product(&choices, |parents| {
            if let Ok(t) = SteinerTree::from_parents(s, members.iter().copied().zip(parents.iter().copied())) {
                if t.max_depth() <= p {
                    best = best.min(members.iter().zip(parents).map(|(&x, &y)| line.dist(x, y)).sum());
                }
            }
        });
        best
    }

    #[test]
    fn cell_examples() {
        let line = unit_line(6);
        assert_eq!(path_dp_cell(&line, 3, 0, 5, 3), Cost::ZERO);
        // Positions 0..4 stand for v1..v4: A[1, v4, v1..v3] is the star sum 3 + 2 + 1.
        assert_eq!(path_dp_cell(&line, 1, 3, 0, 2), Cost::from_int(6));
        // Two hops from v1 over v2..v4: the chain v1-v2-{v3,v4} or the hub v3 both cost 4.
        let four = unit_line(4);
        let expect = brute_cell(&four, 2, 0, 1, 3);
        assert_eq!(expect, Cost::from_int(4));
        assert_eq!(path_dp_cell(&four, 2, 0, 1, 3), expect);
    }

    #[test]
    fn memo_matches_brute_force_cells() {
        let line = PathInstance {
            vertices: (0..6).collect(),
            coords: [0, 2, 3, 7, 8, 12].into_iter().map(Cost::from_int).collect(),
            root: 0,
            hops: 5,
        };
        let mut memo = PathDpMemo::new(&line);
        for p in 1..=4 {
            for s in 0..6 {
                for a in 0..6 {
                    for b in a..6 {
                        if !(a..=b).contains(&s) && b - a < 4 {
                            assert_eq!(memo.cell(p, s, a, b), brute_cell(&line, p, s, a, b), "A[{p},{s},{a},{b}]");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn four_unit_vertices() {
        let m = path_metric(&[1, 1, 1]);
        for (k, expect) in [(1, 6), (2, 4), (3, 3)] {
            let inst = Instance::spanning(m.clone(), 0, k).unwrap();
            let sol = solve_path(&inst).unwrap();
            assert_eq!(sol.cost, Cost::from_int(expect), "k = {k}");
            assert!(sol.tree.max_depth() <= k);
        }
    }

    #[test]
    fn reduction_examples() {
        let m = path_metric(&[1, 1]);
        let all = Instance::spanning(m.clone(), 0, 2).unwrap();
        let id = reduce_to_terminals(&all).unwrap();
        assert_eq!(id.vertices, vec![0, 1, 2]);

        let ends = Instance::new(m, [2], 0, 2).unwrap();
        let red = reduce_to_terminals(&ends).unwrap();
        assert_eq!(red.vertices, vec![0, 2]);
        assert_eq!(red.dist(0, 1), Cost::from_int(2));

        let five = path_metric(&[1, 1, 1, 1]);
        let inst = Instance::new(five, [2, 4], 0, 2).unwrap();
        let red = reduce_to_terminals(&inst).unwrap();
        assert_eq!(red.coords, vec![Cost::from_int(0), Cost::from_int(2), Cost::from_int(4)]);
        let expect = oracle_khop(&inst).unwrap().cost;
        assert_eq!(solve_path(&inst).unwrap().cost, expect);
    }

    #[test]
    fn rejects_bad_orders() {
        let m = path_metric(&[1, 2]);
        let inst = Instance::spanning(m, 0, 2).unwrap();
        assert_eq!(solve_path_with_order(&inst, &[0, 2, 1]).unwrap_err(), PathError::NotAPathOrder { i: 1, j: 2 });
        let star = Arc::new(
            build_metric(&WeightedGraph::from_int_edges(4, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)]).unwrap()).unwrap(),
        );
        assert_eq!(solve_path(&Instance::spanning(star, 0, 2).unwrap()).unwrap_err(), PathError::NotAPath);
    }

    #[test]
    fn root_in_the_middle() {
        let m = path_metric(&[3, 1, 4, 1, 5]);
        for k in 1..=5 {
            let inst = Instance::spanning(m.clone(), 2, k).unwrap();
            assert_eq!(solve_path(&inst).unwrap().cost, oracle_khop(&inst).unwrap().cost, "k = {k}");
        }
    }

    fn arb_path_instance(max_n: usize) -> impl Strategy<Value = Instance> {
        (1..=max_n).prop_flat_map(|n| {
            (proptest::collection::vec(1u64..=10, n - 1), proptest::collection::vec(any::<bool>(), n), 0..n, 1usize..=4)
                .prop_map(move |(w, term, root, k)| {
                    let terms = (0..n).filter(|&v| term[v]);
                    Instance::new(path_metric(&w), terms, root, k).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_oracle(inst in arb_path_instance(8)) {
            let sol = solve_path(&inst).unwrap();
            prop_assert_eq!(sol.cost, oracle_khop(&inst).unwrap().cost);
            prop_assert!(validate_lap(&inst, &sol.lap));
        }

        #[test]
        fn more_hops_never_cost_more(inst in arb_path_instance(10)) {
            let now = solve_path(&inst).unwrap().cost;
            let next = solve_path(&inst.with_hops(inst.hops() + 1).unwrap()).unwrap().cost;
            prop_assert!(next <= now);
        }

        #[test]
        fn table_matches_memo(inst in arb_path_instance(9)) {
            let path = reduce_to_terminals(&inst).unwrap();
            let mut memo = PathDpMemo::new(&path);
            let r = path.root;
            let k = path.hops;
            let left = if r == 0 { Cost::ZERO } else { memo.cell(k, r, 0, r - 1) };
            let expect = left + memo.cell(k, r, r + 1, path.len() - 1);
            prop_assert_eq!(solve_path_reduced(&path).unwrap().cost, expect);
        }

        /// An edge never jumps over a vertex that sits strictly higher in the
        /// tree than the edge's parent end.
        #[test]
        fn edges_do_not_cross_shallower_vertices(inst in arb_path_instance(12)) {
            let sol = solve_path(&inst).unwrap();
            let path = reduce_to_terminals(&inst).unwrap();
            let pos: HashMap<usize, usize> = path.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            for (u, w) in sol.tree.edges() {
                let (pu, pw) = (pos[&u], pos[&w]);
                let du = sol.tree.depth(u).unwrap();
                for x in pu.min(pw) + 1..pu.max(pw) {
                    prop_assert!(sol.tree.depth(path.vertices[x]).unwrap() > du);
                }
            }
        }
    }
}
