use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use econ_dispatch::experiment::{run_experiment, ExperimentConfig, SolverKind, SolverParams};
use econ_dispatch::{OracleParams, PsoParams, SaParams};

/// Solve an economic dispatch instance over a set of seeds and write
/// per-run convergence CSVs plus a JSON summary.
#[derive(Debug, Parser)]
#[command(name = "econ-dispatch", version)]
struct Cli {
    /// Instance file (JSON).
    #[arg(long)]
    problem: PathBuf,

    /// One of: pso, sa, sa-pso, lambda, grid.
    #[arg(long, default_value = "pso")]
    solver: SolverKind,

    /// Seeds as a comma-separated list of values or inclusive ranges, e.g. `0-19` or `1,4,7-9`.
    #[arg(long, default_value = "0-19", value_parser = parse_seeds)]
    seeds: Seeds,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Iterations (PSO, SA-PSO) or temperature levels (SA).
    #[arg(long, default_value_t = PsoParams::default().iter_max)]
    iters: usize,

    #[arg(long, default_value_t = PsoParams::default().n_particles)]
    particles: usize,

    #[arg(long, default_value_t = PsoParams::default().c1)]
    c1: f64,

    #[arg(long, default_value_t = PsoParams::default().c2)]
    c2: f64,

    #[arg(long, default_value_t = PsoParams::default().w_max)]
    w_max: f64,

    #[arg(long, default_value_t = PsoParams::default().w_min)]
    w_min: f64,

    /// $/h per MW of balance residual.
    #[arg(long, default_value_t = PsoParams::default().penalty_weight)]
    penalty: f64,

    /// Initial temperature; derived from the initial fitness spread when omitted.
    #[arg(long)]
    t0: Option<f64>,

    #[arg(long, default_value_t = SaParams::default().alpha)]
    alpha: f64,

    /// Neighbour proposals per temperature level (SA).
    #[arg(long, default_value_t = SaParams::default().moves_per_temp)]
    moves: usize,

    /// Neighbour half-width as a fraction of unit range.
    #[arg(long, default_value_t = SaParams::default().neighbor_scale)]
    neighbor_scale: f64,

    #[arg(long, default_value_t = OracleParams::default().lambda_tol)]
    lambda_tol: f64,

    #[arg(long, default_value_t = OracleParams::default().max_bisections)]
    max_bisections: usize,

    /// Grid step in MW for the brute-force solver.
    #[arg(long, default_value_t = OracleParams::default().grid_resolution)]
    resolution: f64,
}

#[derive(Debug, Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u64 = lo
                    .trim()
                    .parse()
                    .map_err(|e| format!("bad seed `{lo}`: {e}"))?;
                let hi: u64 = hi
                    .trim()
                    .parse()
                    .map_err(|e| format!("bad seed `{hi}`: {e}"))?;
                if lo > hi {
                    return Err(format!("empty seed range `{part}`"));
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(
                part.parse()
                    .map_err(|e| format!("bad seed `{part}`: {e}"))?,
            ),
        }
    }
    Ok(Seeds(seeds))
}

impl Cli {
    fn into_config(self) -> ExperimentConfig {
        let params = SolverParams {
            pso: PsoParams {
                n_particles: self.particles,
                iter_max: self.iters,
                c1: self.c1,
                c2: self.c2,
                w_max: self.w_max,
                w_min: self.w_min,
                penalty_weight: self.penalty,
            },
            sa: SaParams {
                t0: self.t0,
                alpha: self.alpha,
                moves_per_temp: self.moves,
                neighbor_scale: self.neighbor_scale,
            },
            oracle: OracleParams {
                lambda_tol: self.lambda_tol,
                max_bisections: self.max_bisections,
                grid_resolution: self.resolution,
            },
        };
        ExperimentConfig {
            problem_path: self.problem,
            solver: self.solver,
            seeds: self.seeds.0,
            params,
            output_dir: self.out,
        }
    }
}

fn main() -> ExitCode {
    let config = Cli::parse().into_config();
    match run_experiment(&config) {
        Ok(summary) => {
            for run in &summary.runs {
                let seed = run.seed.map_or_else(|| "-".to_owned(), |s| s.to_string());
                match (&run.final_cost, &run.error) {
                    (Some(cost), _) => {
                        println!("run {:>3} seed {seed:>4}  cost {cost:.6}", run.run)
                    }
                    (None, Some(err)) => {
                        println!("run {:>3} seed {seed:>4}  FAILED: {err}", run.run)
                    }
                    (None, None) => {}
                }
            }
            println!(
                "{}: {} ok, {} failed; best {:.6} mean {:.6} worst {:.6} sd {:.6}",
                summary.solver,
                summary.completed,
                summary.failed,
                summary.best,
                summary.mean,
                summary.worst,
                summary.stddev
            );
            if let (Some(oracle), Some(gap)) = (summary.oracle_cost, summary.relative_gap) {
                println!("oracle {oracle:.6}  mean gap {:.4}%", 100.0 * gap);
            }
            println!("wrote {}", config.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0-19").unwrap().0, (0..20).collect::<Vec<_>>());
        assert_eq!(parse_seeds("7,7").unwrap().0, vec![7, 7]);
        assert_eq!(parse_seeds("1, 4-6").unwrap().0, vec![1, 4, 5, 6]);
        assert!(parse_seeds("5-2").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
