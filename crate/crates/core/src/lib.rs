//! Economic dispatch with particle swarm, simulated annealing, and a hybrid
//! SA-PSO solver, checked against lambda-iteration and grid-search
//! references.
//!
//! ```
//! use econ_dispatch::{pso_solve, DispatchProblem, GeneratingUnit, PsoParams};
//!
//! let units = vec![
//!     GeneratingUnit::new(0.008, 7.0, 200.0, 10.0, 85.0).unwrap(),
//!     GeneratingUnit::new(0.009, 6.3, 180.0, 10.0, 80.0).unwrap(),
//!     GeneratingUnit::new(0.007, 6.8, 140.0, 10.0, 70.0).unwrap(),
//! ];
//! let problem = DispatchProblem::new(units, 150.0).unwrap();
//! let (solution, trace) = pso_solve(&problem, &PsoParams::default(), 0).unwrap();
//! assert!(solution.residual <= problem.balance_tol());
//! assert!(trace.is_best_non_increasing());
//! ```

// NaN must fail parameter checks, hence `!(x > 0.0)` rather than `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod error;
pub mod experiment;
pub mod hybrid;
pub mod instance;
pub mod model;
pub mod oracle;
pub mod pso;
pub mod rng;
pub mod trace;

pub use anneal::{cooling_step, metropolis_accept, propose_neighbor, sa_solve, SaParams};
pub use error::{DispatchError, Result};
pub use experiment::{
    run_experiment, solve, ExperimentConfig, ExperimentSummary, SolverKind, SolverParams,
};
pub use hybrid::{hybrid_solve, HybridParams};
pub use instance::{parse_problem, InstanceError, ProblemFile};
pub use model::{
    check_feasible, power_mismatch, repair_balance, total_cost, transmission_loss, unit_cost,
    DispatchProblem, DispatchSolution, GeneratingUnit, LossMatrix,
};
pub use oracle::{grid_search, lambda_dispatch, OracleParams};
pub use pso::{
    clamp_velocity, fitness, inertia_weight, init_swarm, pso_solve, update_position,
    update_velocity, Particle, PsoParams, Swarm,
};
pub use rng::{seeded_rng, SolverRng, UniformSource};
pub use trace::{read_convergence_csv, write_convergence_csv, ConvergenceTrace, TraceRow};
