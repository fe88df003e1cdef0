//! Weighted graphs, their shortest-path metrics, and closest-vertex queries.
//!
//! Shortest paths are made unique by a lexicographic rule: among all
//! shortest `u`-`v` paths the one whose vertex-id sequence is smallest is
//! recorded. Closest-vertex queries break distance ties by smaller id, with
//! the auxiliary vertex [`VertexOrBottom::Bottom`] losing every comparison.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rayon::prelude::*;
use thiserror::Error;

use crate::cost::Cost;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("edge ({u}, {v}) references a vertex outside 0..{n}")]
    VertexOutOfRange { u: usize, v: usize, n: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize },
    #[error("edge ({u}, {v}) has non-positive weight {weight}")]
    NonPositiveWeight { u: usize, v: usize, weight: Cost },
    #[error("graph is disconnected: no path between {u} and {v}")]
    DisconnectedGraph { u: usize, v: usize },
    #[error("closest() called with an empty candidate set")]
    EmptySet,
}

/// An undirected edge with a positive weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: Cost,
}

/// An undirected graph on vertices `0..n` with positive edge weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, Cost)>>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, Cost)>) -> Result<Self, MetricError> {
        let mut seen = BTreeSet::new();
        let mut stored = Vec::new();
        let mut adjacency = vec![Vec::new(); n];
        for (u, v, weight) in edges {
            if u >= n || v >= n {
                return Err(MetricError::VertexOutOfRange { u, v, n });
            }
            if u == v {
                return Err(MetricError::SelfLoop(u));
            }
            if weight == Cost::ZERO || weight.is_infinite() {
                return Err(MetricError::NonPositiveWeight { u, v, weight });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(MetricError::DuplicateEdge { u, v });
            }
            stored.push(Edge { u, v, weight });
            adjacency[u].push((v, weight));
            adjacency[v].push((u, weight));
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(w, _)| w);
        }
        Ok(WeightedGraph { n, edges: stored, adjacency })
    }

    /// Convenience constructor for whole-unit weights.
    pub fn from_int_edges(n: usize, edges: &[(usize, usize, u64)]) -> Result<Self, MetricError> {
        Self::new(n, edges.iter().map(|&(u, v, w)| (u, v, Cost::from_int(w))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `v` sorted by id, with edge weights.
    pub fn neighbors(&self, v: usize) -> &[(usize, Cost)] {
        &self.adjacency[v]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<Cost> {
        self.adjacency[u].iter().find(|&&(w, _)| w == v).map(|&(_, c)| c)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(w, _) in &self.adjacency[u] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    /// True when the graph is a tree (connected with `n - 1` edges).
    pub fn is_tree(&self) -> bool {
        self.n > 0 && self.edges.len() + 1 == self.n && self.is_connected()
    }

    /// If the graph is a simple path, its vertices from the lower-id end.
    pub fn path_order(&self) -> Option<Vec<usize>> {
        if !self.is_tree() || self.adjacency.iter().any(|a| a.len() > 2) {
            return None;
        }
        let start = (0..self.n).find(|&v| self.adjacency[v].len() <= 1)?;
        let mut order = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        while let Some(&(next, _)) = self.adjacency[cur].iter().find(|&&(w, _)| w != prev) {
            order.push(next);
            prev = cur;
            cur = next;
        }
        Some(order)
    }
}

/// A vertex of the metric or the auxiliary vertex at infinite distance.
///
/// The derived order puts every vertex before `Bottom`; it is only used for
/// deterministic iteration, never for closeness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexOrBottom {
    Vertex(usize),
    Bottom,
}

impl VertexOrBottom {
    pub fn vertex(self) -> Option<usize> {
        match self {
            VertexOrBottom::Vertex(v) => Some(v),
            VertexOrBottom::Bottom => None,
        }
    }

    pub fn is_bottom(self) -> bool {
        self == VertexOrBottom::Bottom
    }
}

impl From<usize> for VertexOrBottom {
    fn from(v: usize) -> Self {
        VertexOrBottom::Vertex(v)
    }
}

/// Closeness key of a candidate as seen from some vertex: distance first,
/// then id. `Bottom` gets `(INFINITY, usize::MAX)` and so loses every tie.
pub type Rank = (Cost, usize);

/// All-pairs shortest-path metric of a connected [`WeightedGraph`].
#[derive(Debug, Clone)]
pub struct Metric {
    n: usize,
    dist: Vec<Cost>,
    next_hop: Vec<u32>,
    graph: WeightedGraph,
}

const NO_HOP: u32 = u32::MAX;

fn dijkstra(graph: &WeightedGraph, source: usize) -> Vec<Cost> {
    let mut dist = vec![Cost::INFINITY; graph.n()];
    let mut heap = BinaryHeap::new();
    dist[source] = Cost::ZERO;
    heap.push(Reverse((Cost::ZERO, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(w, c) in graph.neighbors(u) {
            let nd = d + c;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Reverse((nd, w)));
            }
        }
    }
    dist
}

/// Computes exact all-pairs distances and the lexicographically smallest
/// shortest path for every ordered pair.
pub fn build_metric(graph: &WeightedGraph) -> Result<Metric, MetricError> {
    let n = graph.n();
    for e in graph.edges() {
        if e.weight == Cost::ZERO {
            return Err(MetricError::NonPositiveWeight { u: e.u, v: e.v, weight: e.weight });
        }
    }
    let rows: Vec<Vec<Cost>> = (0..n).into_par_iter().map(|s| dijkstra(graph, s)).collect();
    for (u, row) in rows.iter().enumerate() {
        if let Some(v) = row.iter().position(|d| d.is_infinite()) {
            return Err(MetricError::DisconnectedGraph { u: u.min(v), v: u.max(v) });
        }
    }
    let dist: Vec<Cost> = rows.into_iter().flatten().collect();

    // The lexicographically smallest shortest u-v path is built greedily: its
    // next vertex is the smallest neighbour still on some shortest path.
    let next_hop: Vec<u32> = (0..n)
        .into_par_iter()
        .flat_map_iter(|u| {
            let dist = &dist;
            (0..n).map(move |v| {
                if u == v {
                    return NO_HOP;
                }
                let target = dist[u * n + v];
                graph
                    .neighbors(u)
                    .iter()
                    .find(|&&(w, c)| c + dist[w * n + v] == target)
                    .map(|&(w, _)| w as u32)
                    .expect("a shortest path leaves u through some neighbour")
            })
        })
        .collect();

    Ok(Metric { n, dist, next_hop, graph: graph.clone() })
}

impl Metric {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    #[inline]
    pub fn dist(&self, u: usize, v: usize) -> Cost {
        self.dist[u * self.n + v]
    }

    /// Distance where either endpoint may be the auxiliary vertex.
    #[inline]
    pub fn dist_to(&self, u: usize, x: VertexOrBottom) -> Cost {
        match x {
            VertexOrBottom::Vertex(v) => self.dist(u, v),
            VertexOrBottom::Bottom => Cost::INFINITY,
        }
    }

    #[inline]
    pub fn rank(&self, from: usize, x: VertexOrBottom) -> Rank {
        match x {
            VertexOrBottom::Vertex(v) => (self.dist(from, v), v),
            VertexOrBottom::Bottom => (Cost::INFINITY, usize::MAX),
        }
    }

    /// Closest candidate to `from`, or `Bottom` for an empty candidate list.
    pub fn closest_of(&self, from: usize, candidates: impl IntoIterator<Item = VertexOrBottom>) -> VertexOrBottom {
        candidates.into_iter().min_by_key(|&x| self.rank(from, x)).unwrap_or(VertexOrBottom::Bottom)
    }

    /// The recorded shortest path from `u` to `v`, both endpoints included.
    pub fn path(&self, u: usize, v: usize) -> Vec<usize> {
        let mut path = vec![u];
        let mut cur = u;
        while cur != v {
            cur = self.next_hop[cur * self.n + v] as usize;
            path.push(cur);
        }
        path
    }

    pub fn diameter(&self) -> Cost {
        self.dist.iter().copied().max().unwrap_or(Cost::ZERO)
    }
}

/// The element of `set` closest to `v`; ties go to the smaller id and
/// `Bottom` loses every tie.
pub fn closest(metric: &Metric, v: usize, set: &[VertexOrBottom]) -> Result<VertexOrBottom, MetricError> {
    if set.is_empty() {
        return Err(MetricError::EmptySet);
    }
    Ok(metric.closest_of(v, set.iter().copied()))
}

/// Drops every edge `{u, v}` that some other `u`-`v` path of length at most
/// `w(u, v)` makes redundant. The result induces the same metric.
pub fn minimal_inducing_subgraph(graph: &WeightedGraph, metric: &Metric) -> WeightedGraph {
    let n = graph.n();
    let kept = graph
        .edges()
        .iter()
        .filter(|e| !(0..n).any(|x| x != e.u && x != e.v && metric.dist(e.u, x) + metric.dist(x, e.v) <= e.weight));
    WeightedGraph::new(n, kept.map(|e| (e.u, e.v, e.weight))).expect("subgraph of a valid graph is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use VertexOrBottom::{Bottom, Vertex};

    fn unit(n: usize, edges: &[(usize, usize)]) -> WeightedGraph {
        WeightedGraph::from_int_edges(n, &edges.iter().map(|&(u, v)| (u, v, 1)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn triangle_with_unit_edges() {
        let m = build_metric(&unit(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                let expect = if u == v { Cost::ZERO } else { Cost::from_int(1) };
                assert_eq!(m.dist(u, v), expect);
            }
        }
    }

    #[test]
    fn weighted_path_distance() {
        let g = WeightedGraph::from_int_edges(3, &[(0, 1, 2), (1, 2, 3)]).unwrap();
        let m = build_metric(&g).unwrap();
        assert_eq!(m.dist(0, 2), Cost::from_int(5));
        assert_eq!(m.path(0, 2), vec![0, 1, 2]);
    }

    #[test]
    fn four_cycle_tie_goes_to_smaller_intermediate() {
        // 0-1-2-3-0: both 0->2 paths have length 2; [0,1,2] < [0,3,2].
        let m = build_metric(&unit(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])).unwrap();
        assert_eq!(m.dist(0, 2), Cost::from_int(2));
        assert_eq!(m.path(0, 2), vec![0, 1, 2]);
        assert_eq!(m.dist(1, 3), Cost::from_int(2));
        assert_eq!(m.path(1, 3), vec![1, 0, 3]);
        assert_eq!(m.path(3, 1), vec![3, 0, 1]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(WeightedGraph::from_int_edges(2, &[(0, 0, 1)]).unwrap_err(), MetricError::SelfLoop(0));
        assert!(matches!(WeightedGraph::from_int_edges(2, &[(0, 1, 0)]), Err(MetricError::NonPositiveWeight { .. })));
        assert!(matches!(
            WeightedGraph::from_int_edges(2, &[(0, 1, 1), (1, 0, 2)]),
            Err(MetricError::DuplicateEdge { .. })
        ));
        assert!(matches!(WeightedGraph::from_int_edges(2, &[(0, 2, 1)]), Err(MetricError::VertexOutOfRange { .. })));
        let disconnected = unit(3, &[(0, 1)]);
        assert_eq!(build_metric(&disconnected).unwrap_err(), MetricError::DisconnectedGraph { u: 0, v: 2 });
    }

    #[test]
    fn minimal_subgraph_examples() {
        let g = WeightedGraph::from_int_edges(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 2)]).unwrap();
        let m = build_metric(&g).unwrap();
        let min = minimal_inducing_subgraph(&g, &m);
        assert_eq!(min.edges().len(), 2);
        assert!(min.weight(0, 2).is_none());

        let tree = WeightedGraph::from_int_edges(4, &[(0, 1, 3), (1, 2, 1), (1, 3, 7)]).unwrap();
        let mt = build_metric(&tree).unwrap();
        assert_eq!(minimal_inducing_subgraph(&tree, &mt), tree);

        // Alternative path 1+1+1 = 3 <= 3.
        let cyc = WeightedGraph::from_int_edges(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 3)]).unwrap();
        let mc = build_metric(&cyc).unwrap();
        let minc = minimal_inducing_subgraph(&cyc, &mc);
        assert_eq!(minc.edges().len(), 3);
        assert!(minc.weight(3, 0).is_none());
    }

    #[test]
    fn closest_examples() {
        let m = build_metric(&unit(3, &[(0, 1), (1, 2)])).unwrap();
        assert_eq!(closest(&m, 1, &[Bottom]).unwrap(), Bottom);
        assert_eq!(closest(&m, 1, &[Vertex(1)]).unwrap(), Vertex(1));
        assert_eq!(closest(&m, 1, &[Vertex(2), Vertex(0)]).unwrap(), Vertex(0));
        assert_eq!(closest(&m, 1, &[Bottom, Vertex(2)]).unwrap(), Vertex(2));
        assert_eq!(closest(&m, 1, &[]).unwrap_err(), MetricError::EmptySet);
        assert_eq!(m.dist_to(0, Bottom), Cost::INFINITY);
    }

    /// All simple u-v paths, for brute-force checks on tiny graphs.
    fn simple_paths(g: &WeightedGraph, u: usize, v: usize) -> Vec<(Cost, Vec<usize>)> {
        fn go(
            g: &WeightedGraph,
            cur: usize,
            v: usize,
            path: &mut Vec<usize>,
            len: Cost,
            out: &mut Vec<(Cost, Vec<usize>)>,
        ) {
            if cur == v {
                out.push((len, path.clone()));
                return;
            }
            for &(w, c) in g.neighbors(cur) {
                if !path.contains(&w) {
                    path.push(w);
                    go(g, w, v, path, len + c, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(g, u, v, &mut vec![u], Cost::ZERO, &mut out);
        out
    }

    fn arb_connected_graph(max_n: usize) -> impl Strategy<Value = WeightedGraph> {
        (1..=max_n).prop_flat_map(|n| {
            let tree = proptest::collection::vec((any::<prop::sample::Index>(), 1u64..=4), n.saturating_sub(1));
            let extra = proptest::collection::vec((0..n, 0..n, 1u64..=4), 0..=n);
            (Just(n), tree, extra).prop_map(|(n, tree, extra)| {
                let mut edges = BTreeSet::new();
                let mut list = Vec::new();
                for (i, (parent, w)) in tree.into_iter().enumerate() {
                    let v = i + 1;
                    let p = parent.index(v);
                    edges.insert((p, v));
                    list.push((p, v, w));
                }
                for (a, b, w) in extra {
                    if a != b && edges.insert((a.min(b), a.max(b))) {
                        list.push((a, b, w));
                    }
                }
                WeightedGraph::from_int_edges(n, &list).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn metric_axioms_hold(g in arb_connected_graph(12)) {
            let m = build_metric(&g).unwrap();
            let n = g.n();
            for u in 0..n {
                prop_assert_eq!(m.dist(u, u), Cost::ZERO);
                for v in 0..n {
                    prop_assert_eq!(m.dist(u, v), m.dist(v, u));
                    if u != v {
                        prop_assert!(m.dist(u, v) > Cost::ZERO && m.dist(u, v).is_finite());
                    }
                    for w in 0..n {
                        prop_assert!(m.dist(u, w) <= m.dist(u, v) + m.dist(v, w));
                    }
                }
            }
        }

        #[test]
        fn recorded_paths_are_lexicographic_minima(g in arb_connected_graph(8)) {
            let m = build_metric(&g).unwrap();
            for u in 0..g.n() {
                for v in 0..g.n() {
                    let recorded = m.path(u, v);
                    let len: Cost = recorded.windows(2).map(|p| g.weight(p[0], p[1]).unwrap()).sum();
                    prop_assert_eq!(len, m.dist(u, v));
                    let best = simple_paths(&g, u, v)
                        .into_iter()
                        .filter(|(c, _)| *c == m.dist(u, v))
                        .map(|(_, p)| p)
                        .min()
                        .unwrap();
                    prop_assert_eq!(recorded, best);
                }
            }
        }

        #[test]
        fn minimal_subgraph_preserves_metric(g in arb_connected_graph(12)) {
            let m = build_metric(&g).unwrap();
            let min = minimal_inducing_subgraph(&g, &m);
            let m2 = build_metric(&min).unwrap();
            for u in 0..g.n() {
                for v in 0..g.n() {
                    prop_assert_eq!(m.dist(u, v), m2.dist(u, v));
                }
            }
        }

        #[test]
        fn closest_is_deterministic(g in arb_connected_graph(10), v in any::<prop::sample::Index>(), picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..5)) {
            let m = build_metric(&g).unwrap();
            let v = v.index(g.n());
            let set: Vec<_> = picks.iter().map(|i| Vertex(i.index(g.n()))).chain([Bottom]).collect();
            let a = closest(&m, v, &set).unwrap();
            let b = closest(&m, v, &set).unwrap();
            prop_assert_eq!(a, b);
            let best = set.iter().map(|&x| m.dist_to(v, x)).min().unwrap();
            prop_assert_eq!(m.dist_to(v, a), best);
        }
    }

    #[test]
    fn axioms_on_fifty_vertices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
        let n = 50;
        let mut edges: Vec<(usize, usize, u64)> =
            (1..n).map(|v| (rng.gen_range(0..v), v, rng.gen_range(1..=20))).collect();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.05) && !edges.iter().any(|&(a, b, _)| (a, b) == (u, v)) {
                    edges.push((u, v, rng.gen_range(1..=20)));
                }
            }
        }
        let m = build_metric(&WeightedGraph::from_int_edges(n, &edges).unwrap()).unwrap();
        for u in 0..n {
            assert_eq!(m.dist(u, u), Cost::ZERO);
            for v in 0..n {
                assert_eq!(m.dist(u, v), m.dist(v, u));
                assert!(u == v || m.dist(u, v) > Cost::ZERO);
                for w in 0..n {
                    assert!(m.dist(u, w) <= m.dist(u, v) + m.dist(v, w));
                }
            }
        }
    }
}
