//! Hybrid SA-PSO solver.
//!
//! The PSO loop runs unchanged except for two annealing hooks: a particle
//! moves to its candidate position only if the Metropolis test at the
//! current temperature accepts the fitness change, and after every iteration
//! one neighbourhood move around the global best is tried and kept only if
//! strictly better. Personal and global bests stay greedy, so the best-cost
//! trace is non-increasing.

use crate::anneal::{
    cooling_step, metropolis_accept, propose_neighbor, temperature_from_spread, SaParams,
};
use crate::error::Result;
use crate::model::{DispatchProblem, DispatchSolution};
use crate::pso::{finish, fitness, init_swarm, PsoParams};
use crate::rng::seeded_rng;
use crate::trace::ConvergenceTrace;

pub const SOLVER_ID: &str = "sa-pso";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HybridParams {
    pub pso: PsoParams,
    /// `sa.t0 = None` starts at the fitness spread of the initial swarm.
    /// `moves_per_temp` is unused here.
    pub sa: SaParams,
}

impl HybridParams {
    pub fn validate(&self) -> Result<()> {
        self.pso.validate()?;
        self.sa.validate()
    }
}

pub fn hybrid_solve(
    problem: &DispatchProblem,
    params: &HybridParams,
    seed: u64,
) -> Result<(DispatchSolution, ConvergenceTrace)> {
    params.validate()?;
    let pso = &params.pso;
    let mut rng = seeded_rng(seed);
    let mut swarm = init_swarm(problem, pso, &mut rng)?;
    let mut temperature = params.sa.t0.unwrap_or_else(|| {
        let initial: Vec<f64> = swarm.particles.iter().map(|p| p.fitness).collect();
        temperature_from_spread(&initial)
    });

    let mut trace = ConvergenceTrace::with_capacity(pso.iter_max);
    for _ in 0..pso.iter_max {
        let t = temperature;
        swarm.advance(problem, pso, &mut rng, |delta, rng| {
            // t > 0 is maintained below, so this cannot fail
            metropolis_accept(delta, t, rng).unwrap_or(false)
        });

        let probe = propose_neighbor(problem, &swarm.gbest_position, &params.sa, &mut rng);
        let probe_fitness = fitness(problem, &probe, pso);
        if probe_fitness < swarm.gbest_fitness {
            swarm.gbest_fitness = probe_fitness;
            swarm.gbest_position = probe;
        }

        trace.push(swarm.iteration, swarm.gbest_fitness, swarm.mean_fitness());
        temperature = cooling_step(temperature, &params.sa).max(f64::MIN_POSITIVE);
    }
    let solution = finish(problem, swarm.gbest_position, SOLVER_ID, seed)?;
    Ok((solution, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{unit_cost, GeneratingUnit};

    fn three_unit() -> DispatchProblem {
        let u = |a, b, lo, hi| GeneratingUnit::new(a, b, 0.0, lo, hi).unwrap();
        DispatchProblem::new(
            vec![
                u(0.008, 7.0, 10.0, 85.0),
                u(0.009, 6.3, 10.0, 80.0),
                u(0.007, 6.8, 10.0, 70.0),
            ],
            150.0,
        )
        .unwrap()
    }

    #[test]
    fn single_unit() {
        let p = DispatchProblem::new(
            vec![GeneratingUnit::new(0.01, 2.0, 3.0, 10.0, 85.0).unwrap()],
            40.0,
        )
        .unwrap();
        let (sol, _) = hybrid_solve(&p, &HybridParams::default(), 0).unwrap();
        assert_eq!(sol.power, vec![40.0]);
        assert_eq!(sol.cost, unit_cost(&p.units()[0], 40.0));
    }

    #[test]
    fn frozen_temperature_makes_particles_greedy() {
        // At T ≈ 0 no particle accepts an uphill move, so every particle's
        // current fitness, and hence the swarm mean, never increases.
        let params = HybridParams {
            sa: SaParams {
                t0: Some(1e-9),
                ..SaParams::default()
            },
            ..HybridParams::default()
        };
        let (sol, trace) = hybrid_solve(&three_unit(), &params, 3).unwrap();
        // uphill moves of ~1e-10 $/h (rounding noise) can still pass at T = 1e-9
        assert!(trace
            .rows
            .windows(2)
            .all(|w| w[1].mean_cost <= w[0].mean_cost + 1e-6));
        assert!(trace.is_best_non_increasing());
        sol.validate(&three_unit()).unwrap();
    }

    #[test]
    fn deterministic_and_monotone() {
        let p = three_unit();
        let (a, ta) = hybrid_solve(&p, &HybridParams::default(), 9).unwrap();
        let (b, tb) = hybrid_solve(&p, &HybridParams::default(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert!(ta.is_best_non_increasing());
        assert_eq!(a.solver_id, "sa-pso");
    }
}
