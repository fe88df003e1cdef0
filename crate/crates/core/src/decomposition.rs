//! Tree decompositions: validation, a min-fill heuristic, and conversion to
//! nice form (leaf, introduce, forget and join nodes).

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::metric::WeightedGraph;

/// Which defining property a decomposition violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NotATree,
    VertexOutOfRange(usize),
    VertexNotCovered(usize),
    EdgeNotCovered(usize, usize),
    BagsNotConnected(usize),
    RootNotInRootBag(usize),
    BadNiceNode(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotATree => f.write_str("decomposition edges do not form a tree"),
            Violation::VertexOutOfRange(v) => write!(f, "bag mentions vertex {v} outside the graph"),
            Violation::VertexNotCovered(v) => write!(f, "vertex {v} is in no bag"),
            Violation::EdgeNotCovered(u, v) => write!(f, "edge ({u}, {v}) is in no bag"),
            Violation::BagsNotConnected(v) => write!(f, "bags containing vertex {v} are not connected"),
            Violation::RootNotInRootBag(r) => write!(f, "root bag does not contain root {r}"),
            Violation::BadNiceNode(b) => write!(f, "node {b} breaks the nice-form rules"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompositionError {
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(Violation),
}

fn invalid<T>(v: Violation) -> Result<T, DecompositionError> {
    Err(DecompositionError::InvalidDecomposition(v))
}

/// Bags plus undirected tree edges between bag indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
}

impl TreeDecomposition {
    pub fn new(bags: Vec<Vec<usize>>, edges: Vec<(usize, usize)>) -> Self {
        let bags = bags
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b.dedup();
                b
            })
            .collect();
        TreeDecomposition { bags, edges }
    }

    pub fn max_bag_size(&self) -> usize {
        self.bags.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn adjacency(&self) -> Option<Vec<Vec<usize>>> {
        let mut adj = vec![Vec::new(); self.bags.len()];
        for &(a, b) in &self.edges {
            if a >= self.bags.len() || b >= self.bags.len() || a == b {
                return None;
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Some(adj)
    }
}

/// Checks the decomposition against `graph` and returns its width.
pub fn validate_decomposition(graph: &WeightedGraph, td: &TreeDecomposition) -> Result<usize, DecompositionError> {
    let n = graph.n();
    let nb = td.bags.len();
    let adj = match td.adjacency() {
        Some(a) if nb > 0 && td.edges.len() + 1 == nb => a,
        _ if nb == 0 && n == 0 => return Ok(0),
        _ => return invalid(Violation::NotATree),
    };
    if reachable(&adj, 0, |_| true).len() != nb {
        return invalid(Violation::NotATree);
    }
    let mut holders = vec![Vec::new(); n];
    for (b, bag) in td.bags.iter().enumerate() {
        for &v in bag {
            if v >= n {
                return invalid(Violation::VertexOutOfRange(v));
            }
            holders[v].push(b);
        }
    }
    if let Some(v) = (0..n).find(|&v| holders[v].is_empty()) {
        return invalid(Violation::VertexNotCovered(v));
    }
    for e in graph.edges() {
        if !holders[e.u].iter().any(|&b| td.bags[b].binary_search(&e.v).is_ok()) {
            return invalid(Violation::EdgeNotCovered(e.u.min(e.v), e.u.max(e.v)));
        }
    }
    for v in 0..n {
        let reached = reachable(&adj, holders[v][0], |b| td.bags[b].binary_search(&v).is_ok());
        if reached.len() != holders[v].len() {
            return invalid(Violation::BagsNotConnected(v));
        }
    }
    Ok(td.max_bag_size().saturating_sub(1))
}

fn reachable(adj: &[Vec<usize>], start: usize, keep: impl Fn(usize) -> bool) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(b) = stack.pop() {
        for &c in &adj[b] {
            if keep(c) && seen.insert(c) {
                stack.push(c);
            }
        }
    }
    seen
}

/// Decomposition from a min-fill elimination order. Ties go to the lower
/// degree, then the smaller id. Each vertex's bag is itself plus its
/// neighbours at elimination time, attached to the bag of whichever of
/// those neighbours is eliminated next.
pub fn heuristic_decompose(graph: &WeightedGraph) -> TreeDecomposition {
    let n = graph.n();
    let mut nbrs: Vec<BTreeSet<usize>> = (0..n).map(|v| graph.neighbors(v).iter().map(|&(w, _)| w).collect()).collect();
    let mut alive = vec![true; n];
    let mut position = vec![usize::MAX; n];
    let mut bags = Vec::with_capacity(n);
    let mut order = Vec::with_capacity(n);
    for step in 0..n {
        let fill = |v: usize| {
            let list: Vec<usize> = nbrs[v].iter().copied().collect();
            let mut missing = 0;
            for (i, &a) in list.iter().enumerate() {
                missing += list[i + 1..].iter().filter(|&&b| !nbrs[a].contains(&b)).count();
            }
            missing
        };
        let v = (0..n).filter(|&v| alive[v]).min_by_key(|&v| (fill(v), nbrs[v].len(), v)).expect("a vertex remains");
        let list: Vec<usize> = nbrs[v].iter().copied().collect();
        for (i, &a) in list.iter().enumerate() {
            for &b in &list[i + 1..] {
                nbrs[a].insert(b);
                nbrs[b].insert(a);
            }
            nbrs[a].remove(&v);
        }
        alive[v] = false;
        position[v] = step;
        bags.push(std::iter::once(v).chain(list).collect::<Vec<_>>());
        order.push(v);
    }
    let mut edges = Vec::new();
    for (step, bag) in bags.iter().enumerate() {
        if step + 1 == n {
            break;
        }
        let next = bag[1..].iter().map(|&w| position[w]).min().unwrap_or(n - 1);
        edges.push((step, next));
    }
    TreeDecomposition::new(bags, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiceKind {
    Leaf,
    Introduce { v: usize, child: usize },
    Forget { v: usize, child: usize },
    Join { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiceNode {
    pub kind: NiceKind,
    /// Sorted bag contents.
    pub bag: Vec<usize>,
}

/// A rooted nice tree decomposition with its below-sets.
#[derive(Debug, Clone)]
pub struct NiceTreeDecomposition {
    pub nodes: Vec<NiceNode>,
    pub root: usize,
    n: usize,
    below: Vec<Vec<bool>>,
}

impl NiceTreeDecomposition {
    /// Builds from typed nodes; children must precede their parents.
    pub fn from_nodes(nodes: Vec<NiceNode>, root: usize, n: usize) -> Self {
        let mut below: Vec<Vec<bool>> = Vec::with_capacity(nodes.len());
        for node in &nodes {
            let c = match node.kind {
                NiceKind::Leaf => vec![false; n],
                NiceKind::Introduce { child, .. } => below[child].clone(),
                NiceKind::Forget { v, child } => {
                    let mut c = below[child].clone();
                    c[v] = true;
                    c
                }
                NiceKind::Join { left, right } => {
                    below[left].iter().zip(&below[right]).map(|(a, b)| *a || *b).collect()
                }
            };
            below.push(c);
        }
        NiceTreeDecomposition { nodes, root, n, below }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn width(&self) -> usize {
        self.nodes.iter().map(|x| x.bag.len()).max().unwrap_or(0).saturating_sub(1)
    }

    /// Whether `v` lies in the below-set `C_b`.
    #[inline]
    pub fn in_below(&self, b: usize, v: usize) -> bool {
        self.below[b][v]
    }

    /// `C_b` as a sorted list.
    pub fn below_set(&self, b: usize) -> Vec<usize> {
        (0..self.n).filter(|&v| self.below[b][v]).collect()
    }

    /// The plain decomposition underlying this nice one.
    pub fn to_decomposition(&self) -> TreeDecomposition {
        let mut edges = Vec::new();
        for (b, node) in self.nodes.iter().enumerate() {
            match node.kind {
                NiceKind::Leaf => {}
                NiceKind::Introduce { child, .. } | NiceKind::Forget { child, .. } => edges.push((child, b)),
                NiceKind::Join { left, right } => {
                    edges.push((left, b));
                    edges.push((right, b));
                }
            }
        }
        TreeDecomposition::new(self.nodes.iter().map(|x| x.bag.clone()).collect(), edges)
    }

    /// Checks the node typing rules, the root bag, and the decomposition
    /// properties against `graph`.
    pub fn validate(&self, graph: &WeightedGraph, root_vertex: usize) -> Result<usize, DecompositionError> {
        for (b, node) in self.nodes.iter().enumerate() {
            let bag = &node.bag;
            let without = |child: usize, v: usize| {
                let mut c = self.nodes[child].bag.clone();
                c.retain(|&x| x != v);
                c
            };
            let ok = match node.kind {
                NiceKind::Leaf => bag.is_empty(),
                NiceKind::Introduce { v, child } => {
                    child < b
                        && bag.contains(&v)
                        && !self.nodes[child].bag.contains(&v)
                        && without(child, v) == without_vec(bag, v)
                }
                NiceKind::Forget { v, child } => {
                    child < b && !bag.contains(&v) && self.nodes[child].bag.contains(&v) && without(child, v) == *bag
                }
                NiceKind::Join { left, right } => {
                    left < b
                        && right < b
                        && self.nodes[left].bag == *bag
                        && self.nodes[right].bag == *bag
                        && !self.below[left].iter().zip(&self.below[right]).any(|(x, y)| *x && *y)
                }
            };
            if !ok {
                return invalid(Violation::BadNiceNode(b));
            }
        }
        if self.nodes.get(self.root).is_none_or(|x| !x.bag.contains(&root_vertex)) {
            return invalid(Violation::RootNotInRootBag(root_vertex));
        }
        validate_decomposition(graph, &self.to_decomposition())
    }
}

fn without_vec(bag: &[usize], v: usize) -> Vec<usize> {
    bag.iter().copied().filter(|&x| x != v).collect()
}

/// Converts a valid decomposition into nice form, rooted at the first bag
/// that contains `r`. Each tree edge becomes a run of forgets followed by a
/// run of introduces; several children are merged by a chain of joins.
pub fn make_nice(
    td: &TreeDecomposition,
    graph: &WeightedGraph,
    r: usize,
) -> Result<NiceTreeDecomposition, DecompositionError> {
    validate_decomposition(graph, td)?;
    let Some(root_bag) = td.bags.iter().position(|b| b.contains(&r)) else {
        return invalid(Violation::RootNotInRootBag(r));
    };
    let adj = td.adjacency().expect("validated");
    let mut nodes: Vec<NiceNode> = Vec::new();

    // Post-order over the rooted decomposition tree without recursion.
    let mut order = Vec::new();
    let mut parent = vec![usize::MAX; td.bags.len()];
    let mut stack = vec![root_bag];
    parent[root_bag] = root_bag;
    while let Some(b) = stack.pop() {
        order.push(b);
        for &c in &adj[b] {
            if parent[c] == usize::MAX {
                parent[c] = b;
                stack.push(c);
            }
        }
    }
    let mut top = vec![usize::MAX; td.bags.len()];
    for &b in order.iter().rev() {
        let bag = &td.bags[b];
        let children: Vec<usize> = adj[b].iter().copied().filter(|&c| parent[c] == b && c != b).collect();
        let mut branches = Vec::new();
        if children.is_empty() {
            nodes.push(NiceNode { kind: NiceKind::Leaf, bag: Vec::new() });
            let leaf = nodes.len() - 1;
            branches.push(extend(&mut nodes, leaf, bag));
        }
        for c in children {
            branches.push(extend(&mut nodes, top[c], bag));
        }
        let mut acc = branches[0];
        for &other in &branches[1..] {
            nodes.push(NiceNode { kind: NiceKind::Join { left: acc, right: other }, bag: bag.clone() });
            acc = nodes.len() - 1;
        }
        top[b] = acc;
    }
    Ok(NiceTreeDecomposition::from_nodes(nodes, top[root_bag], graph.n()))
}

/// Appends forgets then introduces turning the bag of `from` into `target`.
fn extend(nodes: &mut Vec<NiceNode>, from: usize, target: &[usize]) -> usize {
    let mut cur = from;
    let start = nodes[from].bag.clone();
    for &v in start.iter().filter(|v| !target.contains(v)) {
        let bag = without_vec(&nodes[cur].bag, v);
        nodes.push(NiceNode { kind: NiceKind::Forget { v, child: cur }, bag });
        cur = nodes.len() - 1;
    }
    for &v in target.iter().filter(|v| !start.contains(v)) {
        let mut bag = nodes[cur].bag.clone();
        bag.push(v);
        bag.sort_unstable();
        nodes.push(NiceNode { kind: NiceKind::Introduce { v, child: cur }, bag });
        cur = nodes.len() - 1;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize, edges: &[(usize, usize)]) -> WeightedGraph {
        WeightedGraph::from_int_edges(n, &edges.iter().map(|&(u, v)| (u, v, 1)).collect::<Vec<_>>()).unwrap()
    }

    fn path4() -> WeightedGraph {
        unit(4, &[(0, 1), (1, 2), (2, 3)])
    }

    #[test]
    fn validation_examples() {
        let g = path4();
        let single = TreeDecomposition::new(vec![vec![0, 1, 2, 3]], vec![]);
        assert_eq!(validate_decomposition(&g, &single), Ok(3));

        let chain = TreeDecomposition::new(vec![vec![0, 1], vec![1, 2], vec![2, 3]], vec![(0, 1), (1, 2)]);
        assert_eq!(validate_decomposition(&g, &chain), Ok(1));

        let missing =
            TreeDecomposition::new(vec![vec![0, 1], vec![2], vec![2, 3], vec![1]], vec![(0, 1), (1, 2), (0, 3)]);
        assert_eq!(
            validate_decomposition(&g, &missing),
            Err(DecompositionError::InvalidDecomposition(Violation::EdgeNotCovered(1, 2)))
        );

        let split = TreeDecomposition::new(vec![vec![0, 1], vec![2, 3], vec![1, 2]], vec![(0, 1), (1, 2)]);
        assert_eq!(
            validate_decomposition(&g, &split),
            Err(DecompositionError::InvalidDecomposition(Violation::BagsNotConnected(1)))
        );

        let cyclic = TreeDecomposition::new(vec![vec![0, 1], vec![1, 2], vec![2, 3]], vec![(0, 1), (1, 2), (2, 0)]);
        assert_eq!(
            validate_decomposition(&g, &cyclic),
            Err(DecompositionError::InvalidDecomposition(Violation::NotATree))
        );
    }

    #[test]
    fn heuristic_widths() {
        let tree = unit(6, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)]);
        assert_eq!(validate_decomposition(&tree, &heuristic_decompose(&tree)), Ok(1));

        let cycle = unit(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
        assert_eq!(validate_decomposition(&cycle, &heuristic_decompose(&cycle)), Ok(2));

        let k4 = unit(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(validate_decomposition(&k4, &heuristic_decompose(&k4)), Ok(3));

        let one = unit(1, &[]);
        assert_eq!(validate_decomposition(&one, &heuristic_decompose(&one)), Ok(0));
    }

    #[test]
    fn single_bag_becomes_a_chain() {
        let g = unit(2, &[(0, 1)]);
        let td = TreeDecomposition::new(vec![vec![0, 1]], vec![]);
        let nice = make_nice(&td, &g, 0).unwrap();
        let kinds: Vec<_> = nice.nodes.iter().map(|x| x.kind).collect();
        assert_eq!(
            kinds,
            vec![NiceKind::Leaf, NiceKind::Introduce { v: 0, child: 0 }, NiceKind::Introduce { v: 1, child: 1 },]
        );
        assert_eq!(nice.root, 2);
        assert_eq!(nice.validate(&g, 0), Ok(1));
    }

    #[test]
    fn four_path_nice_form() {
        let g = path4();
        let chain = TreeDecomposition::new(vec![vec![0, 1], vec![1, 2], vec![2, 3]], vec![(0, 1), (1, 2)]);
        for r in 0..4 {
            let nice = make_nice(&chain, &g, r).unwrap();
            assert!(nice.len() <= 16);
            assert_eq!(nice.validate(&g, r), Ok(1));
            // Re-converting the nice form is idempotent up to relabeling.
            let again = make_nice(&nice.to_decomposition(), &g, r).unwrap();
            assert_eq!(again.validate(&g, r), Ok(1));
        }
    }

    #[test]
    fn below_sets() {
        let g = path4();
        let chain = TreeDecomposition::new(vec![vec![0, 1], vec![1, 2], vec![2, 3]], vec![(0, 1), (1, 2)]);
        let nice = make_nice(&chain, &g, 0).unwrap();
        assert_eq!(nice.below_set(nice.root), vec![2, 3]);
        let leaf = nice.nodes.iter().position(|x| x.kind == NiceKind::Leaf).unwrap();
        assert!(nice.below_set(leaf).is_empty());
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = WeightedGraph> {
        (1..=max_n).prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<prop::sample::Index>(), n - 1),
                proptest::collection::vec((0..n, 0..n), 0..2 * n),
            )
                .prop_map(move |(tree, extra)| {
                    let mut set = BTreeSet::new();
                    for (i, p) in tree.iter().enumerate() {
                        set.insert((p.index(i + 1), i + 1));
                    }
                    for (a, b) in extra {
                        if a != b {
                            set.insert((a.min(b), a.max(b)));
                        }
                    }
                    unit(n, &set.into_iter().collect::<Vec<_>>())
                })
        })
    }

    proptest! {
        #[test]
        fn heuristic_and_nice_are_valid(g in arb_graph(12), r in any::<prop::sample::Index>()) {
            let td = heuristic_decompose(&g);
            let width = validate_decomposition(&g, &td).unwrap();
            let r = r.index(g.n());
            let nice = make_nice(&td, &g, r).unwrap();
            prop_assert_eq!(nice.validate(&g, r), Ok(width));
            prop_assert!(nice.len() <= 4 * g.n() * (width + 2));
        }
    }
}
