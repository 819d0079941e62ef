//! Simulated annealing: Metropolis acceptance, geometric cooling, a
//! neighbourhood move that stays on the balance manifold, and a standalone
//! SA dispatch solver.

use crate::error::{invalid_param, DispatchError, Result};
use crate::model::{check_feasible, repair_balance_in_place, DispatchProblem, DispatchSolution};
use crate::pso::{finish, penalized_cost, DEFAULT_PENALTY_WEIGHT};
use crate::rng::{seeded_rng, UniformSource};
use crate::trace::ConvergenceTrace;

pub const SOLVER_ID: &str = "sa";

/// Lowest temperature an automatically scaled schedule may start from.
pub const MIN_AUTO_T0: f64 = 1e-6;

/// Random restarts sampled to size the automatic initial temperature.
const T0_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaParams {
    /// Initial temperature in $/h. `None` derives it from the spread of
    /// fitness over random feasible points.
    pub t0: Option<f64>,
    pub alpha: f64,
    pub moves_per_temp: usize,
    /// Perturbation half-width as a fraction of the unit's range.
    pub neighbor_scale: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            t0: None,
            alpha: 0.98,
            moves_per_temp: 10,
            neighbor_scale: 0.1,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(t0) = self.t0 {
            if !(t0 > 0.0 && t0.is_finite()) {
                return Err(invalid_param("t0", format!("{t0} is not positive")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid_param(
                "alpha",
                format!("{} not in (0, 1)", self.alpha),
            ));
        }
        if self.moves_per_temp < 1 {
            return Err(invalid_param("moves_per_temp", "must be at least 1"));
        }
        if !(self.neighbor_scale > 0.0 && self.neighbor_scale <= 1.0) {
            return Err(invalid_param(
                "neighbor_scale",
                format!("{} not in (0, 1]", self.neighbor_scale),
            ));
        }
        Ok(())
    }
}

/// Accepts downhill moves outright and uphill moves with probability
/// `exp(-delta / temperature)`. Draws from `rng` only when `delta > 0`.
pub fn metropolis_accept<R: UniformSource + ?Sized>(
    delta: f64,
    temperature: f64,
    rng: &mut R,
) -> Result<bool> {
    if !(temperature > 0.0) {
        return Err(invalid_param(
            "temperature",
            format!("{temperature} is not positive"),
        ));
    }
    if delta <= 0.0 {
        return Ok(true);
    }
    Ok(rng.uniform() < (-delta / temperature).exp())
}

#[inline]
pub fn cooling_step(temperature: f64, params: &SaParams) -> f64 {
    params.alpha * temperature
}

/// Perturbs one random unit by up to `±neighbor_scale·range`, then restores
/// the balance through the next unit in cyclic order.
pub fn propose_neighbor<R: UniformSource + ?Sized>(
    problem: &DispatchProblem,
    power: &[f64],
    params: &SaParams,
    rng: &mut R,
) -> Vec<f64> {
    let n = problem.len();
    let mut next = power.to_vec();
    let j = rng.index(n);
    let unit = &problem.units()[j];
    let half_width = params.neighbor_scale * unit.range();
    next[j] = unit.clamp(next[j] + rng.uniform_in(-half_width, half_width));
    repair_balance_in_place(problem, &mut next, (j + 1) % n);
    next
}

/// Uniform point in the box, repaired through `dependent`.
pub(crate) fn random_feasible_point<R: UniformSource + ?Sized>(
    problem: &DispatchProblem,
    dependent: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut p: Vec<f64> = problem
        .units()
        .iter()
        .map(|u| rng.uniform_in(u.p_min, u.p_max))
        .collect();
    repair_balance_in_place(problem, &mut p, dependent);
    p
}

/// Population standard deviation, floored at [`MIN_AUTO_T0`].
pub(crate) fn temperature_from_spread(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt().max(MIN_AUTO_T0)
}

/// Standalone SA. `iter_max` counts temperature levels; each level makes
/// `moves_per_temp` proposals. Returns the best point ever visited.
pub fn sa_solve(
    problem: &DispatchProblem,
    params: &SaParams,
    iter_max: usize,
    seed: u64,
) -> Result<(DispatchSolution, ConvergenceTrace)> {
    params.validate()?;
    if iter_max < 1 {
        return Err(invalid_param("iter_max", "must be at least 1"));
    }
    check_feasible(problem)?;
    let cost = |p: &[f64]| penalized_cost(problem, p, DEFAULT_PENALTY_WEIGHT);
    let mut rng = seeded_rng(seed);
    let n = problem.len();

    let mut current = random_feasible_point(problem, 0, &mut rng);
    let mut current_cost = cost(&current);
    let mut temperature = match params.t0 {
        Some(t0) => t0,
        None => {
            let mut samples = vec![current_cost];
            for k in 1..T0_SAMPLES {
                samples.push(cost(&random_feasible_point(problem, k % n, &mut rng)));
            }
            temperature_from_spread(&samples)
        }
    };

    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut trace = ConvergenceTrace::with_capacity(iter_max);
    for level in 0..iter_max {
        let mut level_sum = 0.0;
        for _ in 0..params.moves_per_temp {
            let candidate = propose_neighbor(problem, &current, params, &mut rng);
            let candidate_cost = cost(&candidate);
            if metropolis_accept(candidate_cost - current_cost, temperature, &mut rng)? {
                current = candidate;
                current_cost = candidate_cost;
                if current_cost < best_cost {
                    best_cost = current_cost;
                    best.clone_from(&current);
                }
            }
            level_sum += current_cost;
        }
        trace.push(
            level + 1,
            best_cost,
            level_sum / params.moves_per_temp as f64,
        );
        temperature = cooling_step(temperature, params);
        if !(temperature > 0.0) {
            return Err(DispatchError::SolverFailure {
                solver: SOLVER_ID.into(),
                reason: "temperature underflowed to zero".into(),
            });
        }
    }
    let solution = finish(problem, best, SOLVER_ID, seed)?;
    Ok((solution, trace))
}
