//! `khop`: solve, generate, verify and benchmark k-hop Steiner tree instances.

mod bench;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use khop_core::{
    generate, make_nice, net_pipeline, parse_decomposition, parse_instance, solve_with, validate_decomposition, verify,
    Algorithm, Cost, GenKind, GenParams, InstanceFile, MetricClass, NetError, NiceTreeDecomposition, SolutionFile,
    SolveOptions, SolverChoice, DEFAULT_BUDGET,
};

#[derive(Parser)]
#[command(name = "khop", version, about = "Exact solvers for the minimum-cost k-hop Steiner tree problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SolverFlags {
    /// path, tree, treewidth or oracle; defaults to the declared metric class
    #[arg(long)]
    algo: Option<Algorithm>,
    /// Override the hop bound from the instance file
    #[arg(long)]
    k: Option<usize>,
    /// Tree decomposition file for the treewidth solver
    #[arg(long)]
    td: Option<PathBuf>,
    /// Largest state space the treewidth solver accepts
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: f64,
    /// Ignore the state-space budget
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance exactly
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
        /// Write the solution JSON here instead of stdout
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a seeded random instance
    Gen {
        /// path, tree, random-connected or partial-ktree[:k]
        kind: GenKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hop bound written into the instance
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Inclusive integer weight range, `lo..hi`
        #[arg(long, default_value = "1..10", value_parser = parse_range)]
        weights: (u64, u64),
        /// Probability that a non-root vertex is a terminal
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        /// Instance output path (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the witnessing decomposition of a partial k-tree
        #[arg(long)]
        td: Option<PathBuf>,
    },
    /// Re-check a solution file against an instance
    Verify {
        solution: PathBuf,
        instance: PathBuf,
        /// Hop bound to check against, e.g. k+1 for lifted trees
        #[arg(long)]
        hops: Option<usize>,
    },
    /// Run several algorithms over instance files and print a CSV table
    Bench {
        instances: Vec<PathBuf>,
        /// Comma-separated algorithms
        #[arg(long, value_delimiter = ',', default_value = "path,tree,treewidth,oracle")]
        algo: Vec<Algorithm>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: f64,
        #[arg(long)]
        force: bool,
        /// CSV output path (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve on a δ-net and lift to a (k+1)-hop tree
    Net {
        instance: PathBuf,
        #[arg(long)]
        delta: Cost,
        #[command(flatten)]
        flags: SolverFlags,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = s.split_once("..").ok_or("expected lo..hi")?;
    let lo: u64 = lo.parse().map_err(|_| format!("bad lower bound `{lo}`"))?;
    let hi: u64 = hi.parse().map_err(|_| format!("bad upper bound `{hi}`"))?;
    if lo == 0 || lo > hi {
        return Err("need 1 <= lo <= hi".into());
    }
    Ok((lo, hi))
}

/// Failure classes, each with its own exit code.
enum Failure {
    Parse(anyhow::Error),
    Infeasible(anyhow::Error),
    Invalid(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Invalid(_) => 4,
        }
    }
}

type Run = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Parse)
}

fn load_instance(path: &Path, k: Option<usize>) -> Result<InstanceFile, Failure> {
    let mut file = parse_instance(&read(path)?).with_context(|| path.display().to_string()).map_err(Failure::Parse)?;
    if let Some(k) = k {
        file.instance = file.instance.with_hops(k).map_err(|e| Failure::Parse(e.into()))?;
    }
    Ok(file)
}

fn load_nice(path: &Path, file: &InstanceFile) -> Result<NiceTreeDecomposition, Failure> {
    let td = parse_decomposition(&read(path)?, file.graph.n())
        .with_context(|| path.display().to_string())
        .map_err(Failure::Parse)?;
    let parse = |e: khop_core::DecompositionError| Failure::Parse(anyhow!("{}: {e}", path.display()));
    validate_decomposition(&file.graph, &td).map_err(parse)?;
    make_nice(&td, &file.graph, file.instance.root()).map_err(parse)
}

fn default_algo(class: MetricClass) -> Algorithm {
    match class {
        MetricClass::Path => Algorithm::Path,
        MetricClass::Tree => Algorithm::Tree,
        MetricClass::General => Algorithm::Treewidth,
    }
}

fn emit(json: &str, out: Option<&Path>) -> Run {
    match out {
        Some(p) => fs::write(p, json).with_context(|| format!("writing {}", p.display())).map_err(Failure::Other),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn solve(instance: &Path, flags: &SolverFlags, json: Option<&Path>) -> Run {
    let file = load_instance(instance, flags.k)?;
    let decomposition = flags.td.as_deref().map(|p| load_nice(p, &file)).transpose()?;
    let algo = flags.algo.unwrap_or(default_algo(file.class));
    let options = SolveOptions { decomposition, budget: flags.budget, force: flags.force };
    let solution = solve_with(&file.instance, algo, &options).map_err(|e| {
        if e.is_infeasible_or_budget() {
            Failure::Infeasible(e.into())
        } else {
            Failure::Other(e.into())
        }
    })?;
    eprintln!("{algo}: cost {} ({} cells)", solution.cost, solution.cells);
    emit(&SolutionFile::from_solution(&solution).to_json(), json)
}

fn net(instance: &Path, delta: Cost, flags: &SolverFlags, json: Option<&Path>) -> Run {
    let file = load_instance(instance, flags.k)?;
    let choice = match flags.algo.unwrap_or(default_algo(file.class)) {
        Algorithm::Oracle => SolverChoice::Oracle,
        // A path metric is also a tree metric.
        Algorithm::Tree | Algorithm::Path => SolverChoice::Tree,
        Algorithm::Treewidth => SolverChoice::Treewidth(flags.td.as_deref().map(|p| load_nice(p, &file)).transpose()?),
    };
    let out = net_pipeline(&file.instance, delta, &choice).map_err(|e| match e {
        NetError::Tree(khop_core::TreeError::Infeasible)
        | NetError::Treewidth(khop_core::TreewidthError::Infeasible)
        | NetError::Oracle(khop_core::OracleError::Infeasible | khop_core::OracleError::TooLarge { .. }) => {
            Failure::Infeasible(e.into())
        }
        e => Failure::Other(e.into()),
    })?;
    eprintln!(
        "net of {} vertices, net cost {}, lift {} <= n*delta = {}, total {} at depth {}",
        out.net.len(),
        out.net_cost,
        out.lift_cost,
        out.bound,
        out.cost,
        out.tree.max_depth()
    );
    let metric = file.instance.metric();
    emit(&SolutionFile::from_tree(&out.tree, metric, file.instance.n()).to_json(), json)
}

fn check(solution: &Path, instance: &Path, hops: Option<usize>) -> Run {
    let file = load_instance(instance, None)?;
    let sol = SolutionFile::from_json(&read(solution)?).map_err(|e| Failure::Parse(e.into()))?;
    let report = verify(&sol, &file.instance, hops);
    if report.is_valid() {
        println!("valid");
        return Ok(());
    }
    let text: Vec<String> = report.problems.iter().map(ToString::to_string).collect();
    Err(Failure::Invalid(text.join("\n")))
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Solve { instance, flags, json } => solve(&instance, &flags, json.as_deref()),
        Command::Net { instance, delta, flags, json } => net(&instance, delta, &flags, json.as_deref()),
        Command::Verify { solution, instance, hops } => check(&solution, &instance, hops),
        Command::Gen { kind, n, seed, k, weights, density, out, td } => {
            if n == 0 || k == 0 || !(0.0..=1.0).contains(&density) {
                return Err(Failure::Parse(anyhow!("need n >= 1, k >= 1 and density in [0, 1]")));
            }
            let params = GenParams { weights, density, hops: k, ..GenParams::new(kind, n, seed) };
            let g = generate(&params);
            emit(&g.instance_text(), out.as_deref())?;
            match (td, g.decomposition_text()) {
                (Some(path), Some(text)) => fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))
                    .map_err(Failure::Other),
                (Some(_), None) => {
                    Err(Failure::Other(anyhow!("only partial-ktree instances come with a decomposition")))
                }
                _ => Ok(()),
            }
        }
        Command::Bench { instances, algo, k, budget, force, out } => {
            let options = SolveOptions { decomposition: None, budget, force };
            let rows = bench::run(&instances, &algo, k, &options);
            emit(&bench::to_csv(&rows), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(report) => eprintln!("{report}"),
                Failure::Parse(e) | Failure::Infeasible(e) | Failure::Other(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
