use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::metric::Metric;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("hop bound must be at least 1")]
    ZeroHops,
    #[error("vertex {0} is out of range")]
    VertexOutOfRange(usize),
    #[error("terminal {0} is excluded from the usable vertex set")]
    TerminalNotUsable(usize),
}

/// Declared class of the metric, which decides the applicable exact solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricClass {
    Path,
    Tree,
    General,
}

impl fmt::Display for MetricClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricClass::Path => "path",
            MetricClass::Tree => "tree",
            MetricClass::General => "general",
        })
    }
}

impl FromStr for MetricClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "path" => Ok(MetricClass::Path),
            "tree" => Ok(MetricClass::Tree),
            "general" => Ok(MetricClass::General),
            other => Err(format!("unknown metric class `{other}`")),
        }
    }
}

/// A k-hop Steiner tree instance: metric, terminals, root and hop bound.
///
/// The root is always a terminal. An instance may additionally restrict the
/// vertices that are allowed to appear in a solution; vertices outside that
/// set must stay out of the tree.
#[derive(Debug, Clone)]
pub struct Instance {
    metric: Arc<Metric>,
    terminal: Vec<bool>,
    usable: Option<Vec<bool>>,
    root: usize,
    hops: usize,
}

impl Instance {
    pub fn new(
        metric: Arc<Metric>,
        terminals: impl IntoIterator<Item = usize>,
        root: usize,
        hops: usize,
    ) -> Result<Self, InstanceError> {
        let n = metric.n();
        if hops == 0 {
            return Err(InstanceError::ZeroHops);
        }
        if root >= n {
            return Err(InstanceError::VertexOutOfRange(root));
        }
        let mut terminal = vec![false; n];
        terminal[root] = true;
        for t in terminals {
            if t >= n {
                return Err(InstanceError::VertexOutOfRange(t));
            }
            terminal[t] = true;
        }
        Ok(Instance { metric, terminal, usable: None, root, hops })
    }

    /// Every vertex is a terminal.
    pub fn spanning(metric: Arc<Metric>, root: usize, hops: usize) -> Result<Self, InstanceError> {
        let n = metric.n();
        Self::new(metric, 0..n, root, hops)
    }

    /// Same instance with another hop bound.
    pub fn with_hops(&self, hops: usize) -> Result<Self, InstanceError> {
        if hops == 0 {
            return Err(InstanceError::ZeroHops);
        }
        Ok(Instance { hops, ..self.clone() })
    }

    /// Same metric and root, new terminal set, and only `usable` vertices
    /// allowed in the tree.
    pub fn restricted(
        &self,
        terminals: impl IntoIterator<Item = usize>,
        usable: impl IntoIterator<Item = usize>,
    ) -> Result<Self, InstanceError> {
        let mut inst = Self::new(self.metric.clone(), terminals, self.root, self.hops)?;
        let mut mask = vec![false; self.n()];
        for u in usable {
            if u >= self.n() {
                return Err(InstanceError::VertexOutOfRange(u));
            }
            mask[u] = true;
        }
        if let Some(t) = (0..self.n()).find(|&t| inst.terminal[t] && !mask[t]) {
            return Err(InstanceError::TerminalNotUsable(t));
        }
        inst.usable = Some(mask);
        Ok(inst)
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn metric_arc(&self) -> &Arc<Metric> {
        &self.metric
    }

    pub fn n(&self) -> usize {
        self.metric.n()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    #[inline]
    pub fn is_terminal(&self, v: usize) -> bool {
        self.terminal[v]
    }

    /// Whether `v` may appear in a solution at all.
    #[inline]
    pub fn is_usable(&self, v: usize) -> bool {
        self.usable.as_ref().is_none_or(|m| m[v])
    }

    pub fn is_restricted(&self) -> bool {
        self.usable.is_some()
    }

    pub fn terminals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(|&v| self.terminal[v])
    }

    pub fn terminal_count(&self) -> usize {
        self.terminal.iter().filter(|&&t| t).count()
    }

    pub fn is_spanning(&self) -> bool {
        self.terminal.iter().all(|&t| t)
    }
}
