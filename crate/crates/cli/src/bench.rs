use std::path::Path;
use std::time::Instant;

use khop_core::{parse_instance, solve_with, Algorithm, Cost, SolveError, SolveOptions};

pub const HEADER: &str = "instance,algo,k,cost,ms,cells,agree";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub instance: String,
    pub algo: Algorithm,
    pub k: usize,
    /// Optimal cost, or a short failure tag.
    pub outcome: Result<Cost, String>,
    pub ms: f64,
    pub cells: usize,
    pub agree: bool,
}

fn failure_tag(e: &SolveError) -> String {
    match e {
        SolveError::Treewidth(khop_core::TreewidthError::BudgetExceeded { .. }) => "budget-exceeded".into(),
        e if e.is_infeasible_or_budget() => "infeasible".into(),
        SolveError::Path(_) => "not-a-path".into(),
        SolveError::Tree(_) => "not-a-tree".into(),
        _ => "error".into(),
    }
}

/// Runs every algorithm on every instance file. Rows come out sorted by
/// instance name, then algorithm.
pub fn run(paths: &[impl AsRef<Path>], algos: &[Algorithm], k: Option<usize>, options: &SolveOptions) -> Vec<Row> {
    let mut rows = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let name = path.file_name().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let parsed = std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_instance(&text).map_err(|e| e.to_string()));
        let instance = match (parsed, k) {
            (Ok(f), Some(k)) => f.instance.with_hops(k).map_err(|e| e.to_string()),
            (Ok(f), None) => Ok(f.instance),
            (Err(e), _) => Err(e),
        };
        let mut group = Vec::new();
        for &algo in algos {
            let row = match &instance {
                Err(_) => Row {
                    instance: name.clone(),
                    algo,
                    k: k.unwrap_or(0),
                    outcome: Err("parse-error".into()),
                    ms: 0.0,
                    cells: 0,
                    agree: false,
                },
                Ok(inst) => {
                    let start = Instant::now();
                    let result = solve_with(inst, algo, options);
                    let ms = start.elapsed().as_secs_f64() * 1e3;
                    let (outcome, cells) = match result {
                        Ok(s) => (Ok(s.cost), s.cells),
                        Err(e) => (Err(failure_tag(&e)), 0),
                    };
                    Row { instance: name.clone(), algo, k: inst.hops(), outcome, ms, cells, agree: false }
                }
            };
            group.push(row);
        }
        let costs: Vec<Cost> = group.iter().filter_map(|r| r.outcome.clone().ok()).collect();
        let agree = costs.windows(2).all(|w| w[0] == w[1]);
        for r in &mut group {
            r.agree = r.outcome.is_ok() && agree;
        }
        rows.extend(group);
    }
    rows.sort_by(|a, b| (&a.instance, a.algo).cmp(&(&b.instance, b.algo)));
    rows
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = format!("{HEADER}\n");
    for r in rows {
        let cost = match &r.outcome {
            Ok(c) => c.to_string(),
            Err(tag) => tag.clone(),
        };
        out.push_str(&format!("{},{},{},{},{:.3},{},{}\n", r.instance, r.algo, r.k, cost, r.ms, r.cells, r.agree));
    }
    out
}
