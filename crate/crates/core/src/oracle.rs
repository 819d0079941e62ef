//! Deterministic reference solvers used as ground truth.
//!
//! [`lambda_dispatch`] bisects the system incremental cost λ. For lossy
//! problems the per-unit optimality condition
//! `2·a_i·p_i + b_i = λ·(1 − ∂P_L/∂P_i)` is solved by Gauss-Seidel sweeps at
//! each trial λ, which is the classical penalty-factor construction.
//! [`grid_search`] enumerates the free units on a fixed MW grid and lets the
//! last unit close the balance.

use crate::error::{invalid_param, DispatchError, Result};
use crate::model::{
    check_feasible, power_mismatch, repair_balance_in_place, total_cost, DispatchProblem,
    DispatchSolution, GeneratingUnit,
};

pub const LAMBDA_ID: &str = "lambda";
pub const GRID_ID: &str = "grid";

/// Largest unit count [`grid_search`] accepts.
pub const GRID_MAX_UNITS: usize = 3;

const SWEEP_LIMIT: usize = 1000;
const BRACKET_GROWTH_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    /// Balance tolerance for the λ search, MW.
    pub lambda_tol: f64,
    pub max_bisections: usize,
    /// Grid step for brute force, MW.
    pub grid_resolution: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            lambda_tol: 1e-8,
            max_bisections: 200,
            grid_resolution: 0.01,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_tol > 0.0) {
            return Err(invalid_param("lambda_tol", "must be positive"));
        }
        if self.max_bisections < 1 {
            return Err(invalid_param("max_bisections", "must be at least 1"));
        }
        if !(self.grid_resolution > 0.0 && self.grid_resolution.is_finite()) {
            return Err(invalid_param("grid_resolution", "must be positive"));
        }
        Ok(())
    }
}

fn step_output(unit: &GeneratingUnit, drive: f64) -> f64 {
    if drive > 0.0 {
        unit.p_max
    } else {
        unit.p_min
    }
}

/// Optimal unit outputs for a fixed incremental cost λ.
fn dispatch_at(problem: &DispatchProblem, lambda: f64) -> Vec<f64> {
    let units = problem.units();
    match problem.loss() {
        None => units
            .iter()
            .map(|u| {
                if u.a > 0.0 {
                    u.clamp((lambda - u.b) / (2.0 * u.a))
                } else {
                    step_output(u, lambda - u.b)
                }
            })
            .collect(),
        Some(b) => {
            let mut p = problem.min_vector();
            for _ in 0..SWEEP_LIMIT {
                let mut moved = 0.0_f64;
                for (i, u) in units.iter().enumerate() {
                    let cross: f64 = (0..p.len())
                        .filter(|&j| j != i)
                        .map(|j| b.get(i, j) * p[j])
                        .sum();
                    let num = lambda * (1.0 - 2.0 * cross) - u.b;
                    let den = 2.0 * u.a + 2.0 * lambda * b.get(i, i);
                    let next = if den > 0.0 {
                        u.clamp(num / den)
                    } else {
                        step_output(u, num)
                    };
                    moved = moved.max((next - p[i]).abs());
                    p[i] = next;
                }
                if moved <= 1e-13 * problem.demand().max(1.0) {
                    break;
                }
            }
            p
        }
    }
}

/// Units whose output jumps at `lambda` (zero curvature and no self-loss),
/// ordered by linear cost then index.
fn marginal_linear_units(problem: &DispatchProblem, lambda: f64) -> Vec<usize> {
    let self_loss = |i: usize| problem.loss().map_or(0.0, |b| b.get(i, i));
    let mut idx: Vec<usize> = problem
        .units()
        .iter()
        .enumerate()
        .filter(|&(i, u)| {
            u.a == 0.0
                && self_loss(i) == 0.0
                && (u.b - lambda).abs() <= 1e-9 * lambda.abs().max(1.0)
        })
        .map(|(i, _)| i)
        .collect();
    idx.sort_by(|&i, &j| {
        problem.units()[i]
            .b
            .total_cmp(&problem.units()[j].b)
            .then(i.cmp(&j))
    });
    idx
}

/// Equal-incremental-cost dispatch by bisection on λ.
pub fn lambda_dispatch(
    problem: &DispatchProblem,
    params: &OracleParams,
) -> Result<DispatchSolution> {
    params.validate()?;
    check_feasible(problem)?;
    let mismatch = |lambda: f64| {
        let p = dispatch_at(problem, lambda);
        let m = power_mismatch(problem, &p);
        (p, m)
    };

    let units = problem.units();
    let mut lo = units.iter().map(|u| u.b).fold(f64::INFINITY, f64::min);
    let mut hi = units
        .iter()
        .map(|u| u.marginal_cost(u.p_max))
        .fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    // Losses raise the λ needed to cover demand; widen until bracketed.
    for _ in 0..BRACKET_GROWTH_LIMIT {
        if mismatch(hi).1 >= 0.0 {
            break;
        }
        hi = lo + 2.0 * (hi - lo);
    }
    for _ in 0..BRACKET_GROWTH_LIMIT {
        if mismatch(lo).1 <= 0.0 {
            break;
        }
        lo = hi - 2.0 * (hi - lo);
    }

    let not_converged = |detail: String| DispatchError::SolverFailure {
        solver: LAMBDA_ID.into(),
        reason: format!(
            "no convergence after {} bisections ({detail})",
            params.max_bisections
        ),
    };

    let mut power = None;
    for _ in 0..params.max_bisections {
        let mid = 0.5 * (lo + hi);
        let (p, m) = mismatch(mid);
        if m.abs() <= params.lambda_tol {
            power = Some(p);
            break;
        }
        if m < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }

    let power = match power {
        Some(p) => p,
        None => {
            // λ sits on a jump of some linear unit: run everything at the
            // lower side and let the marginal units absorb the shortfall.
            let (mut p, _) = mismatch(lo);
            for k in marginal_linear_units(problem, 0.5 * (lo + hi)) {
                let shortfall = -power_mismatch(problem, &p);
                if shortfall.abs() <= params.lambda_tol {
                    break;
                }
                p[k] = units[k].clamp(p[k] + shortfall);
                if problem.is_lossy() {
                    repair_balance_in_place(problem, &mut p, k);
                }
            }
            let m = power_mismatch(problem, &p);
            if m.abs() > params.lambda_tol {
                return Err(not_converged(format!("residual {m} MW")));
            }
            p
        }
    };
    DispatchSolution::evaluate(problem, power, LAMBDA_ID, None)
}

/// Grid values from `p_min` to `p_max` in `step` increments, `p_max` included.
fn grid_points(unit: &GeneratingUnit, step: f64) -> Vec<f64> {
    let count = (unit.range() / step - 1e-9).ceil().max(0.0) as usize;
    (0..=count)
        .map(|k| (unit.p_min + k as f64 * step).min(unit.p_max))
        .collect()
}

/// Exhaustive search over the first `N − 1` units; the last unit balances.
pub fn grid_search(problem: &DispatchProblem, params: &OracleParams) -> Result<DispatchSolution> {
    params.validate()?;
    let n = problem.len();
    if n > GRID_MAX_UNITS {
        return Err(DispatchError::InvalidProblem(format!(
            "grid search supports at most {GRID_MAX_UNITS} units, got {n}"
        )));
    }
    let dependent = n - 1;
    let axes: Vec<Vec<f64>> = problem.units()[..dependent]
        .iter()
        .map(|u| grid_points(u, params.grid_resolution))
        .collect();

    let tol = problem.balance_tol();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut p = vec![0.0; n];
    let mut consider = |p: &mut Vec<f64>| {
        repair_balance_in_place(problem, p, dependent);
        if power_mismatch(problem, p).abs() > tol {
            return;
        }
        let cost = total_cost(problem, p).expect("sized to problem");
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, p.clone()));
        }
    };
    match axes.as_slice() {
        [] => consider(&mut p),
        [xs] => {
            for &x in xs {
                p[0] = x;
                consider(&mut p);
            }
        }
        [xs, ys] => {
            for &x in xs {
                for &y in ys {
                    p[0] = x;
                    p[1] = y;
                    consider(&mut p);
                }
            }
        }
        _ => unreachable!("unit count checked above"),
    }

    match best {
        Some((_, power)) => DispatchSolution::evaluate(problem, power, GRID_ID, None),
        None => Err(DispatchError::SolverFailure {
            solver: GRID_ID.into(),
            reason: "no feasible grid point".into(),
        }),
    }
}

/// Worst-case cost gap between the grid optimum and the continuous optimum:
/// `N · max(a) · max(range) · resolution`. Valid when no unit is clamped at
/// the optimum; clamped units add up to one grid step times the marginal-cost spread.
pub fn grid_error_bound(problem: &DispatchProblem, resolution: f64) -> f64 {
    let units = problem.units();
    let max_a = units.iter().map(|u| u.a).fold(0.0, f64::max);
    let max_range = units.iter().map(GeneratingUnit::range).fold(0.0, f64::max);
    units.len() as f64 * max_a * max_range * resolution
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LossMatrix;

    fn unit(a: f64, b: f64, lo: f64, hi: f64) -> GeneratingUnit {
        GeneratingUnit::new(a, b, 0.0, lo, hi).unwrap()
    }

    fn twins() -> DispatchProblem {
        DispatchProblem::new(vec![unit(0.01, 2.0, 0.0, 200.0); 2], 200.0).unwrap()
    }

    #[test]
    fn lambda_symmetric_twins() {
        let sol = lambda_dispatch(&twins(), &OracleParams::default()).unwrap();
        assert!((sol.power[0] - 100.0).abs() < 1e-8);
        assert!((sol.power[1] - 100.0).abs() < 1e-8);
        assert_eq!(sol.seed, None);
        assert_eq!(sol.solver_id, "lambda");
    }

    #[test]
    fn lambda_with_capped_unit() {
        let p = DispatchProblem::new(
            vec![unit(0.001, 1.0, 0.0, 50.0), unit(0.01, 3.0, 0.0, 200.0)],
            100.0,
        )
        .unwrap();
        let sol = lambda_dispatch(&p, &OracleParams::default()).unwrap();
        assert_eq!(sol.power[0], 50.0);
        assert!((sol.power[1] - 50.0).abs() < 1e-8);
        let grid = grid_search(&p, &OracleParams::default()).unwrap();
        assert!((grid.power[0] - 50.0).abs() <= 0.01);
        assert!((grid.cost - sol.cost).abs() <= grid_error_bound(&p, 0.01));
    }

    #[test]
    fn lambda_linear_units_use_marginal_unit() {
        let p = DispatchProblem::new(
            vec![
                unit(0.0, 5.0, 0.0, 100.0),
                unit(0.0, 3.0, 10.0, 60.0),
                unit(0.0, 5.0, 0.0, 100.0),
            ],
            150.0,
        )
        .unwrap();
        let sol = lambda_dispatch(&p, &OracleParams::default()).unwrap();
        // cheapest unit full, then the two b=5 units in index order
        assert_eq!(sol.power, vec![90.0, 60.0, 0.0]);
        let grid = grid_search(
            &p,
            &OracleParams {
                grid_resolution: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((grid.cost - sol.cost).abs() < 1e-9);
    }

    #[test]
    fn lambda_mixed_linear_and_quadratic() {
        let p = DispatchProblem::new(
            vec![unit(0.0, 4.0, 0.0, 30.0), unit(0.02, 2.0, 0.0, 200.0)],
            120.0,
        )
        .unwrap();
        let sol = lambda_dispatch(&p, &OracleParams::default()).unwrap();
        // the linear unit saturates at λ = 4; the quadratic unit covers the rest at λ = 5.6
        assert_eq!(sol.power[0], 30.0);
        assert!((sol.power[1] - 90.0).abs() < 1e-8);
        let grid = grid_search(&p, &OracleParams::default()).unwrap();
        assert!(sol.cost <= grid.cost + 1e-9);
        assert!((grid.cost - sol.cost).abs() <= grid_error_bound(&p, 0.01));
    }

    #[test]
    fn lambda_lossy_satisfies_penalty_factor_condition() {
        let b = LossMatrix::from_rows(&[vec![1e-4, 2e-5], vec![2e-5, 1.5e-4]]).unwrap();
        let p = DispatchProblem::with_options(
            vec![unit(0.01, 2.0, 0.0, 200.0), unit(0.012, 1.8, 0.0, 200.0)],
            200.0,
            Some(b.clone()),
            1e-4,
        )
        .unwrap();
        let sol = lambda_dispatch(&p, &OracleParams::default()).unwrap();
        assert!(sol.residual <= 1e-8);
        let lambdas: Vec<f64> = p
            .units()
            .iter()
            .enumerate()
            .map(|(i, u)| u.marginal_cost(sol.power[i]) / (1.0 - b.loss_gradient(&sol.power, i)))
            .collect();
        assert!((lambdas[0] - lambdas[1]).abs() < 1e-6, "{lambdas:?}");
    }

    #[test]
    fn lambda_reports_infeasible() {
        let p = DispatchProblem::new(vec![unit(0.01, 2.0, 0.0, 50.0)], 80.0).unwrap();
        assert!(matches!(
            lambda_dispatch(&p, &OracleParams::default()),
            Err(DispatchError::Infeasible(_))
        ));
    }

    #[test]
    fn lambda_gives_up_without_enough_bisections() {
        let params = OracleParams {
            max_bisections: 3,
            ..OracleParams::default()
        };
        let p = DispatchProblem::new(
            vec![unit(0.01, 2.0, 0.0, 200.0), unit(0.013, 2.2, 0.0, 200.0)],
            170.0,
        )
        .unwrap();
        assert!(matches!(
            lambda_dispatch(&p, &params),
            Err(DispatchError::SolverFailure { .. })
        ));
    }

    #[test]
    fn grid_single_unit_and_twins() {
        let one = DispatchProblem::new(vec![unit(0.01, 2.0, 10.0, 85.0)], 42.0).unwrap();
        assert_eq!(
            grid_search(&one, &OracleParams::default()).unwrap().power,
            vec![42.0]
        );
        let sol = grid_search(&twins(), &OracleParams::default()).unwrap();
        assert!((sol.power[0] - 100.0).abs() <= 0.01);
        assert!((sol.power[1] - 100.0).abs() <= 0.01);
    }

    #[test]
    fn grid_rejects_large_and_empty_cases() {
        let four = DispatchProblem::new(vec![unit(0.01, 2.0, 0.0, 100.0); 4], 100.0).unwrap();
        assert!(matches!(
            grid_search(&four, &OracleParams::default()),
            Err(DispatchError::InvalidProblem(_))
        ));
        // Lossless demand outside the aggregate limits leaves no feasible point.
        let short = DispatchProblem::new(vec![unit(0.01, 2.0, 0.0, 10.0); 2], 50.0).unwrap();
        assert!(matches!(
            grid_search(&short, &OracleParams::default()),
            Err(DispatchError::SolverFailure { .. })
        ));
    }

    #[test]
    fn grid_points_cover_limits() {
        let pts = grid_points(&unit(0.0, 1.0, 10.0, 10.25), 0.1);
        assert_eq!(pts.first(), Some(&10.0));
        assert_eq!(pts.last(), Some(&10.25));
        assert_eq!(pts.len(), 4);
        assert_eq!(grid_points(&unit(0.0, 1.0, 5.0, 5.0), 0.1), vec![5.0]);
    }
}
