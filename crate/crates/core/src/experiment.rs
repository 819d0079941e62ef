//! Multi-seed experiment runner.
//!
//! One run per seed (one run total for the deterministic oracles), one
//! convergence CSV per run, and a `summary.json` aggregating final costs.
//! Reported final costs are the last `best_cost` of each run's trace at the
//! CSV's six-decimal precision, so the summary can be recomputed exactly from
//! the CSV files.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{sa_solve, SaParams};
use crate::error::DispatchError;
use crate::hybrid::{hybrid_solve, HybridParams};
use crate::instance::{parse_problem, InstanceError};
use crate::model::{DispatchProblem, DispatchSolution};
use crate::oracle::{grid_search, lambda_dispatch, OracleParams};
use crate::pso::{pso_solve, PsoParams};
use crate::trace::{write_convergence_csv, ConvergenceTrace, TraceIoError};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Pso,
    Sa,
    SaPso,
    Lambda,
    Grid,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Pso,
        SolverKind::Sa,
        SolverKind::SaPso,
        SolverKind::Lambda,
        SolverKind::Grid,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Pso => "pso",
            SolverKind::Sa => "sa",
            SolverKind::SaPso => "sa-pso",
            SolverKind::Lambda => "lambda",
            SolverKind::Grid => "grid",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, SolverKind::Pso | SolverKind::Sa | SolverKind::SaPso)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| {
                format!("unknown solver `{s}` (expected pso, sa, sa-pso, lambda, or grid)")
            })
    }
}

/// Solver parameters shared by every run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverParams {
    /// `pso.iter_max` is also the SA temperature-level count.
    pub pso: PsoParams,
    pub sa: SaParams,
    pub oracle: OracleParams,
}

/// Runs one solver on a problem. Deterministic solvers ignore `seed` and
/// produce a single-row trace.
pub fn solve(
    problem: &DispatchProblem,
    solver: SolverKind,
    params: &SolverParams,
    seed: u64,
) -> Result<(DispatchSolution, ConvergenceTrace), DispatchError> {
    let single = |s: DispatchSolution| {
        let mut trace = ConvergenceTrace::with_capacity(1);
        trace.push(1, s.cost, s.cost);
        (s, trace)
    };
    match solver {
        SolverKind::Pso => pso_solve(problem, &params.pso, seed),
        SolverKind::Sa => sa_solve(problem, &params.sa, params.pso.iter_max, seed),
        SolverKind::SaPso => hybrid_solve(
            problem,
            &HybridParams {
                pso: params.pso,
                sa: params.sa,
            },
            seed,
        ),
        SolverKind::Lambda => lambda_dispatch(problem, &params.oracle).map(single),
        SolverKind::Grid => grid_search(problem, &params.oracle).map(single),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem_path: PathBuf,
    pub solver: SolverKind,
    pub seeds: Vec<u64>,
    pub params: SolverParams,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(
        problem_path: impl Into<PathBuf>,
        solver: SolverKind,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            problem_path: problem_path.into(),
            solver,
            seeds: (0..20).collect(),
            params: SolverParams::default(),
            output_dir: output_dir.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: Option<u64>,
    pub csv: Option<String>,
    pub final_cost: Option<f64>,
    pub power: Option<Vec<f64>>,
    pub residual: Option<f64>,
    pub wall_time_s: f64,
    pub relative_gap: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub solver: SolverKind,
    pub problem: String,
    pub runs: Vec<RunRecord>,
    pub completed: usize,
    pub failed: usize,
    pub best: f64,
    pub worst: f64,
    pub mean: f64,
    pub stddev: f64,
    pub mean_residual: f64,
    pub mean_wall_time_s: f64,
    pub oracle_cost: Option<f64>,
    /// `(mean − oracle) / oracle`.
    pub relative_gap: Option<f64>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid solver parameters: {0}")]
    Params(DispatchError),
    #[error("all {} runs failed; first error: {}", .0.len(), .0.first().map_or("", String::as_str))]
    AllRunsFailed(Vec<String>),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

impl ExperimentError {
    /// 2 validation, 3 infeasible, 4 solver failure, 1 output I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Instance(InstanceError::Infeasible { .. }) => 3,
            ExperimentError::Instance(_)
            | ExperimentError::Config(_)
            | ExperimentError::Params(_) => 2,
            ExperimentError::AllRunsFailed(_) => 4,
            ExperimentError::Output { .. } => 1,
        }
    }
}

/// Rounds to the six decimals used in the CSV files.
pub fn csv_precision(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

/// `(best, worst, mean, population stddev)`.
pub fn cost_statistics(costs: &[f64]) -> (f64, f64, f64, f64) {
    let n = costs.len() as f64;
    let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let worst = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    (best, worst, mean.clamp(best, worst), var.sqrt())
}

pub fn csv_file_name(solver: SolverKind, run: usize, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("{solver}_run{run:03}_seed{s}.csv"),
        None => format!("{solver}_run{run:03}.csv"),
    }
}

fn execute_run(
    problem: &DispatchProblem,
    config: &ExperimentConfig,
    oracle_cost: Option<f64>,
    run: usize,
    seed: Option<u64>,
) -> RunRecord {
    let start = Instant::now();
    let outcome = solve(problem, config.solver, &config.params, seed.unwrap_or(0))
        .and_then(|(solution, trace)| solution.validate(problem).map(|()| (solution, trace)));
    let wall_time_s = start.elapsed().as_secs_f64();
    let mut record = RunRecord {
        run,
        seed,
        csv: None,
        final_cost: None,
        power: None,
        residual: None,
        wall_time_s,
        relative_gap: None,
        error: None,
    };
    match outcome {
        Ok((solution, trace)) => {
            let name = csv_file_name(config.solver, run, seed);
            let path = config.output_dir.join(&name);
            if let Err(e) = write_convergence_csv(&trace, &path) {
                record.error = Some(e.to_string());
                return record;
            }
            record.csv = Some(name);
            record.final_cost = trace.final_best().map(csv_precision);
            record.relative_gap = oracle_cost.map(|o| (solution.cost - o) / o);
            record.residual = Some(solution.residual);
            record.power = Some(solution.power);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary, ExperimentError> {
    let problem = parse_problem(&config.problem_path)?;
    if config.solver.is_stochastic() && config.seeds.is_empty() {
        return Err(ExperimentError::Config(format!(
            "solver `{}` needs at least one seed",
            config.solver
        )));
    }
    let params = &config.params;
    params.pso.validate().map_err(ExperimentError::Params)?;
    params.sa.validate().map_err(ExperimentError::Params)?;
    params.oracle.validate().map_err(ExperimentError::Params)?;

    fs::create_dir_all(&config.output_dir).map_err(|source| ExperimentError::Output {
        path: config.output_dir.clone(),
        source,
    })?;

    // a ≥ 0 is enforced at load, so every instance is convex
    let oracle_cost = lambda_dispatch(&problem, &OracleParams::default())
        .ok()
        .map(|s| s.cost);

    let seeds: Vec<Option<u64>> = if config.solver.is_stochastic() {
        config.seeds.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let runs: Vec<RunRecord> = seeds
        .par_iter()
        .enumerate()
        .map(|(run, &seed)| execute_run(&problem, config, oracle_cost, run, seed))
        .collect();

    let summary = summarize(config, runs, oracle_cost)?;
    let path = config.output_dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, json + "\n").map_err(|source| ExperimentError::Output { path, source })?;
    Ok(summary)
}

fn summarize(
    config: &ExperimentConfig,
    runs: Vec<RunRecord>,
    oracle_cost: Option<f64>,
) -> Result<ExperimentSummary, ExperimentError> {
    let done: Vec<&RunRecord> = runs.iter().filter(|r| r.final_cost.is_some()).collect();
    if done.is_empty() {
        return Err(ExperimentError::AllRunsFailed(
            runs.iter().filter_map(|r| r.error.clone()).collect(),
        ));
    }
    let costs: Vec<f64> = done.iter().filter_map(|r| r.final_cost).collect();
    let (best, worst, mean, stddev) = cost_statistics(&costs);
    let n = done.len() as f64;
    Ok(ExperimentSummary {
        solver: config.solver,
        problem: config.problem_path.display().to_string(),
        completed: done.len(),
        failed: runs.len() - done.len(),
        best,
        worst,
        mean,
        stddev,
        mean_residual: done.iter().filter_map(|r| r.residual).sum::<f64>() / n,
        mean_wall_time_s: done.iter().map(|r| r.wall_time_s).sum::<f64>() / n,
        oracle_cost,
        relative_gap: oracle_cost.map(|o| (mean - o) / o),
        runs,
    })
}

/// Reads a summary written by [`run_experiment`].
pub fn read_summary(dir: &Path) -> Result<ExperimentSummary, TraceIoError> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|source| TraceIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| TraceIoError::Io {
        path: path.display().to_string(),
        source: io::Error::new(io::ErrorKind::InvalidData, e),
    })
}
