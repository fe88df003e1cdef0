//! Independent re-check of a serialized solution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cost::Cost;
use crate::format::SolutionFile;
use crate::instance::Instance;
use crate::model::Label;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Problem {
    VertexOutOfRange(usize),
    CostMismatch {
        reported: Cost,
        actual: Cost,
    },
    TwoParents(usize),
    RootHasParent,
    /// Some vertex does not reach the root through parent links.
    Cycle(usize),
    Depth {
        vertex: usize,
        depth: usize,
        hops: usize,
    },
    TerminalNotCovered(usize),
    LabelMismatch {
        vertex: usize,
        label: Label,
        expected: Label,
    },
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::VertexOutOfRange(v) => write!(f, "vertex {v} is out of range"),
            Problem::CostMismatch { reported, actual } => {
                write!(f, "cost mismatch: reported {reported}, edges sum to {actual}")
            }
            Problem::TwoParents(v) => write!(f, "vertex {v} has more than one parent"),
            Problem::RootHasParent => f.write_str("the root has a parent"),
            Problem::Cycle(v) => write!(f, "vertex {v} lies on a cycle or is detached from the root"),
            Problem::Depth { vertex, depth, hops } => {
                write!(f, "depth violation: vertex {vertex} at depth {depth} > {hops}")
            }
            Problem::TerminalNotCovered(v) => write!(f, "terminal {v} is not covered"),
            Problem::LabelMismatch { vertex, label, expected } => {
                write!(f, "vertex {vertex} is labeled {label} but sits at {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub problems: Vec<Problem>,
}

impl VerifyReport {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Checks cost arithmetic, acyclicity, the hop bound (the instance's, or
/// `hops` when given) and terminal coverage. Labels, when present, must
/// match tree depths.
pub fn verify(solution: &SolutionFile, instance: &Instance, hops: Option<usize>) -> VerifyReport {
    let n = instance.n();
    let r = instance.root();
    let hops = hops.unwrap_or(instance.hops());
    let metric = instance.metric();
    let mut problems = Vec::new();

    let bad: BTreeSet<usize> = solution
        .edges
        .iter()
        .flat_map(|&(p, c)| [p, c])
        .chain(solution.labels.keys().copied())
        .filter(|&v| v >= n)
        .collect();
    if !bad.is_empty() {
        problems.extend(bad.into_iter().map(Problem::VertexOutOfRange));
        return VerifyReport { problems };
    }

    let actual: Cost = solution.edges.iter().map(|&(p, c)| metric.dist(p, c)).sum();
    if actual != solution.cost {
        problems.push(Problem::CostMismatch { reported: solution.cost, actual });
    }

    let mut parent = BTreeMap::new();
    for &(p, c) in &solution.edges {
        if c == r {
            problems.push(Problem::RootHasParent);
        } else if parent.insert(c, p).is_some() {
            problems.push(Problem::TwoParents(c));
        }
    }

    let mut depth: BTreeMap<usize, usize> = BTreeMap::from([(r, 0)]);
    for &start in parent.keys() {
        let mut chain = vec![start];
        let mut cur = start;
        let base = loop {
            if let Some(&d) = depth.get(&cur) {
                break Some(d);
            }
            match parent.get(&cur) {
                Some(&p) if chain.len() <= n => {
                    chain.push(p);
                    cur = p;
                }
                _ => break None,
            }
        };
        let Some(base) = base else {
            if !problems.contains(&Problem::Cycle(start)) {
                problems.push(Problem::Cycle(start));
            }
            continue;
        };
        chain.pop();
        for (i, &v) in chain.iter().rev().enumerate() {
            depth.insert(v, base + i + 1);
        }
    }

    for (&v, &d) in &depth {
        if d > hops {
            problems.push(Problem::Depth { vertex: v, depth: d, hops });
        }
    }
    for t in instance.terminals() {
        if !depth.contains_key(&t) {
            problems.push(Problem::TerminalNotCovered(t));
        }
    }
    for (&v, &label) in &solution.labels {
        let expected = depth.get(&v).map_or(Label::Infinite, |&d| Label::Depth(d));
        if label != expected {
            problems.push(Problem::LabelMismatch { vertex: v, label, expected });
        }
    }
    VerifyReport { problems }
}
