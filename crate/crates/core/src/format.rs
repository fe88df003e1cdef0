//! Text formats: instance files, PACE-style decompositions, solution JSON.
//!
//! Instance file:
//!
//! ```text
//! c optional comment
//! p khop <n> <m> <k>
//! class path|tree|general      (optional, default general)
//! r <root>
//! t <terminal>                 (repeated)
//! e <u> <v> <weight>           (m lines)
//! ```
//!
//! Decomposition file, bag ids 1-based and vertices 0-based:
//!
//! ```text
//! s td <bags> <max bag size> <n>
//! b <id> <v>...
//! <b1> <b2>
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::value::RawValue;
use thiserror::Error;

use crate::cost::Cost;
use crate::decomposition::TreeDecomposition;
use crate::instance::{Instance, MetricClass};
use crate::metric::{build_metric, minimal_inducing_subgraph, Metric, MetricError, WeightedGraph};
use crate::model::{Label, Solution, SteinerTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("declared {declared} metric, but {reason}")]
    ClassMismatch { declared: MetricClass, reason: String },
    #[error("invalid solution JSON: {0}")]
    Json(String),
}

fn at<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError::Parse { line, message: message.into() })
}

/// A parsed instance together with its graph and declared class.
#[derive(Debug, Clone)]
pub struct InstanceFile {
    pub graph: WeightedGraph,
    pub class: MetricClass,
    pub instance: Instance,
}

fn field<T: FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T, FormatError> {
    match tok {
        None => at(line, format!("missing {what}")),
        Some(t) => t.parse().or_else(|_| at(line, format!("invalid {what} `{t}`"))),
    }
}

fn no_more<'a>(line: usize, mut toks: impl Iterator<Item = &'a str>) -> Result<(), FormatError> {
    match toks.next() {
        Some(t) => at(line, format!("unexpected token `{t}`")),
        None => Ok(()),
    }
}

pub fn parse_instance(text: &str) -> Result<InstanceFile, FormatError> {
    let mut header: Option<(usize, usize, usize, usize)> = None;
    let mut class: Option<MetricClass> = None;
    let mut root: Option<usize> = None;
    let mut terminals = Vec::new();
    let mut edges: Vec<(usize, usize, Cost)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut last = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last = line;
        let mut toks = raw.split_whitespace();
        let Some(tag) = toks.next() else { continue };
        if tag == "c" {
            continue;
        }
        let n = match (tag, header) {
            ("p", None) => {
                if toks.next() != Some("khop") {
                    return at(line, "expected `p khop <n> <m> <k>`");
                }
                let n = field(line, toks.next(), "vertex count")?;
                let m = field(line, toks.next(), "edge count")?;
                let k = field(line, toks.next(), "hop bound")?;
                no_more(line, toks)?;
                if n == 0 {
                    return at(line, "instance needs at least one vertex");
                }
                if k == 0 {
                    return at(line, "hop bound must be at least 1");
                }
                header = Some((n, m, k, line));
                continue;
            }
            ("p", Some(_)) => return at(line, "duplicate header"),
            (_, None) => return at(line, "expected the `p khop` header first"),
            (_, Some((n, ..))) => n,
        };
        let vertex = |tok: Option<&str>, what: &str| -> Result<usize, FormatError> {
            let v: usize = field(line, tok, what)?;
            if v >= n {
                return at(line, format!("{what} {v} out of range 0..{n}"));
            }
            Ok(v)
        };
        match tag {
            "class" => {
                if class.is_some() {
                    return at(line, "duplicate class line");
                }
                class = Some(field(line, toks.next(), "metric class")?);
            }
            "r" => {
                if root.is_some() {
                    return at(line, "duplicate root line");
                }
                root = Some(vertex(toks.next(), "root")?);
            }
            "t" => terminals.push(vertex(toks.next(), "terminal")?),
            "e" => {
                let u = vertex(toks.next(), "endpoint")?;
                let v = vertex(toks.next(), "endpoint")?;
                let w = toks.next().ok_or(()).or_else(|_| at(line, "missing weight"))?;
                let w: Cost = w.parse().or_else(|e| at(line, format!("{e}")))?;
                if u == v {
                    return at(line, format!("self-loop at vertex {u}"));
                }
                if w == Cost::ZERO || w.is_infinite() {
                    return at(line, format!("edge weight must be positive and finite, got {w}"));
                }
                if !seen.insert((u.min(v), u.max(v))) {
                    return at(line, format!("duplicate edge {u} {v}"));
                }
                edges.push((u, v, w));
            }
            other => return at(line, format!("unknown line type `{other}`")),
        }
        no_more(line, toks)?;
    }

    let Some((n, m, k, header_line)) = header else {
        return at(last.max(1), "missing `p khop` header");
    };
    if edges.len() != m {
        return at(header_line, format!("header declares {m} edges, found {}", edges.len()));
    }
    let Some(root) = root else {
        return at(header_line, "missing root line");
    };
    let graph = WeightedGraph::new(n, edges).or_else(|e| at(header_line, e.to_string()))?;
    let metric = match build_metric(&graph) {
        Ok(m) => m,
        Err(MetricError::DisconnectedGraph { u, v }) => {
            return at(header_line, format!("graph is disconnected: no path between {u} and {v}"))
        }
        Err(e) => return at(header_line, e.to_string()),
    };
    let class = class.unwrap_or(MetricClass::General);
    let minimal = minimal_inducing_subgraph(&graph, &metric);
    match class {
        MetricClass::Path if minimal.path_order().is_none() => {
            return Err(FormatError::ClassMismatch {
                declared: class,
                reason: "the metric is not induced by a path".into(),
            })
        }
        MetricClass::Tree if !minimal.is_tree() => {
            return Err(FormatError::ClassMismatch {
                declared: class,
                reason: "the metric is not induced by a tree".into(),
            })
        }
        _ => {}
    }
    let instance = Instance::new(Arc::new(metric), terminals, root, k).or_else(|e| at(header_line, e.to_string()))?;
    Ok(InstanceFile { graph, class, instance })
}

pub fn write_instance(graph: &WeightedGraph, class: MetricClass, root: usize, terminals: &[usize], k: usize) -> String {
    let mut out = format!("p khop {} {} {}\n", graph.n(), graph.edges().len(), k);
    if class != MetricClass::General {
        let _ = writeln!(out, "class {class}");
    }
    let _ = writeln!(out, "r {root}");
    for t in terminals {
        let _ = writeln!(out, "t {t}");
    }
    for e in graph.edges() {
        let _ = writeln!(out, "e {} {} {}", e.u, e.v, e.weight);
    }
    out
}

/// Reads a decomposition of a graph on `n` vertices.
pub fn parse_decomposition(text: &str, n: usize) -> Result<TreeDecomposition, FormatError> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut bags: Vec<Option<Vec<usize>>> = Vec::new();
    let mut edges = Vec::new();
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last = line;
        let mut toks = raw.split_whitespace();
        let Some(tag) = toks.next() else { continue };
        if tag == "c" {
            continue;
        }
        match (tag, header) {
            ("s", None) => {
                if toks.next() != Some("td") {
                    return at(line, "expected `s td <bags> <max bag size> <n>`");
                }
                let count = field(line, toks.next(), "bag count")?;
                let size = field(line, toks.next(), "max bag size")?;
                let verts: usize = field(line, toks.next(), "vertex count")?;
                no_more(line, toks)?;
                if verts != n {
                    return at(line, format!("decomposition is for {verts} vertices, instance has {n}"));
                }
                bags = vec![None; count];
                header = Some((count, size, line));
            }
            ("s", Some(_)) => return at(line, "duplicate header"),
            (_, None) => return at(line, "expected the `s td` header first"),
            ("b", Some((count, size, _))) => {
                let id: usize = field(line, toks.next(), "bag id")?;
                if id == 0 || id > count {
                    return at(line, format!("bag id {id} out of range 1..={count}"));
                }
                let mut bag = Vec::new();
                for t in toks {
                    let v: usize = field(line, Some(t), "vertex")?;
                    if v >= n {
                        return at(line, format!("vertex {v} out of range 0..{n}"));
                    }
                    bag.push(v);
                }
                if bag.len() > size {
                    return at(line, format!("bag has {} vertices, header allows {size}", bag.len()));
                }
                if bags[id - 1].replace(bag).is_some() {
                    return at(line, format!("duplicate bag {id}"));
                }
            }
            (_, Some((count, _, _))) => {
                let a: usize = field(line, Some(tag), "bag id")?;
                let b: usize = field(line, toks.next(), "bag id")?;
                no_more(line, toks)?;
                if a == 0 || b == 0 || a > count || b > count {
                    return at(line, format!("edge {a} {b} names a bag outside 1..={count}"));
                }
                edges.push((a - 1, b - 1));
            }
        }
    }
    let Some((_, _, header_line)) = header else {
        return at(last.max(1), "missing `s td` header");
    };
    let bags = bags
        .into_iter()
        .enumerate()
        .map(|(i, b)| b.ok_or(i + 1))
        .collect::<Result<Vec<_>, _>>()
        .or_else(|id| at(header_line, format!("bag {id} is never defined")))?;
    Ok(TreeDecomposition::new(bags, edges))
}

pub fn write_decomposition(td: &TreeDecomposition, n: usize) -> String {
    let mut out = format!("s td {} {} {}\n", td.bags.len(), td.max_bag_size(), n);
    for (i, bag) in td.bags.iter().enumerate() {
        let _ = write!(out, "b {}", i + 1);
        for v in bag {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    for &(a, b) in &td.edges {
        let _ = writeln!(out, "{} {}", a + 1, b + 1);
    }
    out
}

/// The serialized form of a solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionFile {
    pub cost: Cost,
    /// `(parent, child)`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub labels: BTreeMap<usize, Label>,
}

impl SolutionFile {
    pub fn from_solution(solution: &Solution) -> Self {
        SolutionFile { cost: solution.cost, edges: solution.tree.edges(), labels: solution.lap.labels.clone() }
    }

    /// A bare tree, labeled by depth.
    pub fn from_tree(tree: &SteinerTree, metric: &Metric, n: usize) -> Self {
        SolutionFile { cost: tree.cost(metric), edges: tree.edges(), labels: tree.to_lap(n).labels }
    }

    /// Keys in `cost`, `edges`, `labels` order; labels by vertex id.
    pub fn to_json(&self) -> String {
        let edges: Vec<[usize; 2]> = self.edges.iter().map(|&(p, c)| [p, c]).collect();
        let labels: Vec<String> = self
            .labels
            .iter()
            .map(|(v, l)| match l {
                Label::Depth(d) => format!("\"{v}\": {d}"),
                Label::Infinite => format!("\"{v}\": \"inf\""),
            })
            .collect();
        format!(
            "{{\"cost\": {}, \"edges\": {}, \"labels\": {{{}}}}}\n",
            self.cost,
            serde_json::to_string(&edges).expect("plain integers serialize"),
            labels.join(", ")
        )
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw<'a> {
            #[serde(borrow)]
            cost: &'a RawValue,
            edges: Vec<[usize; 2]>,
            labels: BTreeMap<String, serde_json::Value>,
        }
        let bad = |m: String| FormatError::Json(m);
        let raw: Raw = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let cost_text = raw.cost.get();
        let cost: Cost = cost_text.trim_matches('"').parse().map_err(|e| bad(format!("cost: {e}")))?;
        let mut labels = BTreeMap::new();
        for (k, v) in raw.labels {
            let vertex: usize = k.parse().map_err(|_| bad(format!("label key `{k}` is not a vertex id")))?;
            let label = match &v {
                serde_json::Value::String(s) if s == "inf" => Label::Infinite,
                serde_json::Value::Number(d) => {
                    Label::Depth(d.as_u64().ok_or_else(|| bad(format!("label of {vertex} is not a depth")))? as usize)
                }
                _ => return Err(bad(format!("label of {vertex} must be a depth or \"inf\""))),
            };
            labels.insert(vertex, label);
        }
        let mut edges: Vec<(usize, usize)> = raw.edges.into_iter().map(|[p, c]| (p, c)).collect();
        edges.sort_unstable();
        Ok(SolutionFile { cost, edges, labels })
    }
}
