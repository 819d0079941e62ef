//! Particle swarm solver for economic dispatch.
//!
//! Each particle is a full dispatch vector. An iteration updates velocities
//! with a linearly decreasing inertia weight, clamps them to the per-unit
//! band `[-0.5·p_min, +0.5·p_max]`, moves and clamps positions, restores the
//! power balance through one dependent unit (chosen cyclically by iteration),
//! then refreshes personal and global bests.

use crate::error::{invalid_param, DispatchError, Result};
use crate::model::{
    check_feasible, power_mismatch, repair_balance_in_place, total_cost, DispatchProblem,
    DispatchSolution, GeneratingUnit,
};
use crate::rng::{seeded_rng, UniformSource};
use crate::trace::ConvergenceTrace;

pub const SOLVER_ID: &str = "pso";

pub const DEFAULT_PENALTY_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoParams {
    pub n_particles: usize,
    pub iter_max: usize,
    pub c1: f64,
    pub c2: f64,
    pub w_max: f64,
    pub w_min: f64,
    /// $/h charged per MW of balance residual.
    pub penalty_weight: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            n_particles: 10,
            iter_max: 200,
            c1: 1.99,
            c2: 1.99,
            w_max: 0.9,
            w_min: 0.4,
            penalty_weight: DEFAULT_PENALTY_WEIGHT,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 1 {
            return Err(invalid_param("n_particles", "must be at least 1"));
        }
        if self.iter_max < 1 {
            return Err(invalid_param("iter_max", "must be at least 1"));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(invalid_param("c1", format!("{} is not positive", self.c1)));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(invalid_param("c2", format!("{} is not positive", self.c2)));
        }
        if !(0.0 <= self.w_min && self.w_min <= self.w_max && self.w_max.is_finite()) {
            return Err(invalid_param(
                "w_min",
                format!(
                    "need 0 <= w_min <= w_max, got {} and {}",
                    self.w_min, self.w_max
                ),
            ));
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return Err(invalid_param("penalty_weight", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Fitness of `position`.
    pub fitness: f64,
    pub pbest_position: Vec<f64>,
    pub pbest_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub gbest_position: Vec<f64>,
    pub gbest_fitness: f64,
    pub iteration: usize,
}

impl Swarm {
    pub fn mean_fitness(&self) -> f64 {
        self.particles.iter().map(|p| p.fitness).sum::<f64>() / self.particles.len() as f64
    }

    /// Runs one velocity/position/repair/evaluate cycle.
    ///
    /// `accept(delta, rng)` decides whether a particle moves to its candidate
    /// position given the fitness change; plain PSO always accepts. Bests are
    /// only replaced on strict improvement.
    pub(crate) fn advance<R, A>(
        &mut self,
        problem: &DispatchProblem,
        params: &PsoParams,
        rng: &mut R,
        mut accept: A,
    ) where
        R: UniformSource + ?Sized,
        A: FnMut(f64, &mut R) -> bool,
    {
        let w = inertia_weight(params, self.iteration);
        let dependent = self.iteration % problem.len();
        for particle in &mut self.particles {
            let velocity = update_velocity(particle, &self.gbest_position, w, params, rng);
            let velocity = clamp_velocity(&velocity, problem);
            let mut candidate = update_position(&particle.position, &velocity, problem);
            repair_balance_in_place(problem, &mut candidate, dependent);
            let candidate_fitness = fitness(problem, &candidate, params);

            particle.velocity = velocity;
            if accept(candidate_fitness - particle.fitness, rng) {
                particle.position = candidate;
                particle.fitness = candidate_fitness;
            }
            if particle.fitness < particle.pbest_fitness {
                particle.pbest_fitness = particle.fitness;
                particle.pbest_position.clone_from(&particle.position);
            }
        }
        self.refresh_gbest();
        self.iteration += 1;
    }

    fn refresh_gbest(&mut self) {
        for p in &self.particles {
            if p.pbest_fitness < self.gbest_fitness {
                self.gbest_fitness = p.pbest_fitness;
                self.gbest_position.clone_from(&p.pbest_position);
            }
        }
    }
}

/// `w_max − (w_max − w_min)/iter_max · iter`.
pub fn inertia_weight(params: &PsoParams, iter: usize) -> f64 {
    params.w_max - (params.w_max - params.w_min) / params.iter_max as f64 * iter as f64
}

#[inline]
pub fn velocity_bounds(unit: &GeneratingUnit) -> (f64, f64) {
    (-0.5 * unit.p_min, 0.5 * unit.p_max)
}

/// Inertia plus cognitive and social pulls, with fresh `r1`, `r2` per dimension.
pub fn update_velocity<R: UniformSource + ?Sized>(
    particle: &Particle,
    gbest: &[f64],
    w: f64,
    params: &PsoParams,
    rng: &mut R,
) -> Vec<f64> {
    particle
        .velocity
        .iter()
        .zip(&particle.position)
        .zip(particle.pbest_position.iter().zip(gbest))
        .map(|((&v, &x), (&pbest, &gbest))| {
            let r1 = rng.uniform();
            let r2 = rng.uniform();
            w * v + params.c1 * r1 * (pbest - x) + params.c2 * r2 * (gbest - x)
        })
        .collect()
}

pub fn clamp_velocity(velocity: &[f64], problem: &DispatchProblem) -> Vec<f64> {
    velocity
        .iter()
        .zip(problem.units())
        .map(|(&v, u)| {
            let (lo, hi) = velocity_bounds(u);
            v.clamp(lo, hi)
        })
        .collect()
}

/// `x + v`, hard-clamped to each unit's limits.
pub fn update_position(position: &[f64], velocity: &[f64], problem: &DispatchProblem) -> Vec<f64> {
    position
        .iter()
        .zip(velocity)
        .zip(problem.units())
        .map(|((&x, &v), u)| u.clamp(x + v))
        .collect()
}

/// Total cost plus `penalty_weight · |mismatch|`.
pub fn fitness(problem: &DispatchProblem, power: &[f64], params: &PsoParams) -> f64 {
    penalized_cost(problem, power, params.penalty_weight)
}

pub(crate) fn penalized_cost(problem: &DispatchProblem, power: &[f64], penalty_weight: f64) -> f64 {
    let cost = total_cost(problem, power).expect("power vector sized to the problem");
    let residual = power_mismatch(problem, power).abs();
    if residual == 0.0 {
        cost
    } else {
        cost + penalty_weight * residual
    }
}

/// Random feasible start: uniform positions repaired through unit `k mod N`
/// for particle `k`, uniform velocities inside the clamp band.
pub fn init_swarm<R: UniformSource + ?Sized>(
    problem: &DispatchProblem,
    params: &PsoParams,
    rng: &mut R,
) -> Result<Swarm> {
    params.validate()?;
    check_feasible(problem)?;
    let n = problem.len();
    let mut particles = Vec::with_capacity(params.n_particles);
    for k in 0..params.n_particles {
        let mut position: Vec<f64> = problem
            .units()
            .iter()
            .map(|u| rng.uniform_in(u.p_min, u.p_max))
            .collect();
        let velocity: Vec<f64> = problem
            .units()
            .iter()
            .map(|u| {
                let (lo, hi) = velocity_bounds(u);
                rng.uniform_in(lo, hi)
            })
            .collect();
        repair_balance_in_place(problem, &mut position, k % n);
        let f = fitness(problem, &position, params);
        particles.push(Particle {
            pbest_position: position.clone(),
            pbest_fitness: f,
            position,
            velocity,
            fitness: f,
        });
    }
    let mut swarm = Swarm {
        gbest_position: particles[0].pbest_position.clone(),
        gbest_fitness: particles[0].pbest_fitness,
        particles,
        iteration: 0,
    };
    swarm.refresh_gbest();
    Ok(swarm)
}

/// Converts a final global best into a validated solution.
pub(crate) fn finish(
    problem: &DispatchProblem,
    power: Vec<f64>,
    solver_id: &str,
    seed: u64,
) -> Result<DispatchSolution> {
    let solution = DispatchSolution::evaluate(problem, power, solver_id, Some(seed))?;
    solution.validate(problem).map_err(|e| match e {
        DispatchError::SolverFailure { reason, .. } => DispatchError::SolverFailure {
            solver: solver_id.to_owned(),
            reason: format!("no balanced dispatch found ({reason})"),
        },
        other => other,
    })?;
    Ok(solution)
}

pub fn pso_solve(
    problem: &DispatchProblem,
    params: &PsoParams,
    seed: u64,
) -> Result<(DispatchSolution, ConvergenceTrace)> {
    let mut rng = seeded_rng(seed);
    let mut swarm = init_swarm(problem, params, &mut rng)?;
    let mut trace = ConvergenceTrace::with_capacity(params.iter_max);
    for _ in 0..params.iter_max {
        swarm.advance(problem, params, &mut rng, |_, _| true);
        trace.push(swarm.iteration, swarm.gbest_fitness, swarm.mean_fitness());
    }
    let solution = finish(problem, swarm.gbest_position, SOLVER_ID, seed)?;
    Ok((solution, trace))
}
