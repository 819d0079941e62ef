//! Economic dispatch problem model.
//!
//! A [`DispatchProblem`] is an ordered set of thermal units with quadratic
//! fuel-cost curves, a total demand, and an optional B-coefficient loss
//! matrix. Units are identified by position. Everything here is a pure
//! function of its inputs; the solvers build on [`repair_balance`] to keep
//! candidates on the power-balance manifold.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{DispatchError, Result};

/// Default equality-constraint tolerance in MW.
pub const DEFAULT_BALANCE_TOL: f64 = 1e-4;

/// Maximum fixed-point rounds used by the lossy balance repair.
pub const LOSSY_REPAIR_ROUNDS: usize = 20;

/// One committed thermal unit: cost `a·p² + b·p + c` ($/h) on `[p_min, p_max]` MW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratingUnit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl GeneratingUnit {
    pub fn new(a: f64, b: f64, c: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let unit = Self {
            a,
            b,
            c,
            p_min,
            p_max,
        };
        unit.validate(0)?;
        Ok(unit)
    }

    /// Checks the unit invariants, reporting `index` as the offending unit.
    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |field: &'static str, reason: String| DispatchError::InvalidUnit {
            unit: index,
            field,
            reason,
        };
        for (field, value) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("p_min", self.p_min),
            ("p_max", self.p_max),
        ] {
            if !value.is_finite() {
                return Err(bad(field, format!("{value} is not finite")));
            }
        }
        if self.a < 0.0 {
            return Err(bad(
                "a",
                format!("{} is negative; cost curve must be convex", self.a),
            ));
        }
        if self.p_min < 0.0 {
            return Err(bad("p_min", format!("{} is negative", self.p_min)));
        }
        if self.p_min > self.p_max {
            return Err(bad(
                "p_min",
                format!("{} exceeds p_max {}", self.p_min, self.p_max),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.p_min, self.p_max)
    }

    #[inline]
    pub fn range(&self) -> f64 {
        self.p_max - self.p_min
    }

    /// Incremental cost `2·a·p + b` in $/MWh.
    #[inline]
    pub fn marginal_cost(&self, p: f64) -> f64 {
        2.0 * self.a * p + self.b
    }
}

/// Square, symmetric B-coefficient matrix for the quadratic loss form.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    dim: usize,
    // row-major
    coeffs: Vec<f64>,
}

impl LossMatrix {
    /// Builds the matrix from rows, replacing it with `(B + Bᵀ)/2`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(DispatchError::InvalidLossMatrix("matrix is empty".into()));
        }
        let mut coeffs = Vec::with_capacity(dim * dim);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(DispatchError::InvalidLossMatrix(format!(
                    "row {r} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(DispatchError::InvalidLossMatrix(format!(
                    "row {r} contains non-finite entry {v}"
                )));
            }
            coeffs.extend_from_slice(row);
        }
        let mut sym = coeffs.clone();
        for i in 0..dim {
            for j in 0..dim {
                sym[i * dim + j] = 0.5 * (coeffs[i * dim + j] + coeffs[j * dim + i]);
            }
        }
        Ok(Self { dim, coeffs: sym })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            coeffs: vec![0.0; dim * dim],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.coeffs[row * self.dim + col]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.coeffs.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for i in 0..self.dim {
            for j in 0..self.dim {
                coeffs[j * self.dim + i] = self.get(i, j);
            }
        }
        Self {
            dim: self.dim,
            coeffs,
        }
    }

    /// Smallest eigenvalue is at least `-tol · max|B|`.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.coeffs);
        let scale = self.coeffs.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let eig = SymmetricEigen::new(m);
        eig.eigenvalues.iter().all(|&l| l >= -tol * scale)
    }

    /// `∂P_L/∂P_i = 2·Σ_j B_ij·P_j`.
    pub fn loss_gradient(&self, power: &[f64], i: usize) -> f64 {
        let row = &self.coeffs[i * self.dim..(i + 1) * self.dim];
        2.0 * row.iter().zip(power).map(|(b, p)| b * p).sum::<f64>()
    }
}

/// Units, demand, optional losses, and the balance tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchProblem {
    units: Vec<GeneratingUnit>,
    demand: f64,
    loss: Option<LossMatrix>,
    balance_tol: f64,
}

impl DispatchProblem {
    pub fn new(units: Vec<GeneratingUnit>, demand: f64) -> Result<Self> {
        Self::with_options(units, demand, None, DEFAULT_BALANCE_TOL)
    }

    pub fn with_options(
        units: Vec<GeneratingUnit>,
        demand: f64,
        loss: Option<LossMatrix>,
        balance_tol: f64,
    ) -> Result<Self> {
        if units.is_empty() {
            return Err(DispatchError::InvalidProblem(
                "at least one unit is required".into(),
            ));
        }
        for (i, u) in units.iter().enumerate() {
            u.validate(i)?;
        }
        if !(demand.is_finite() && demand > 0.0) {
            return Err(DispatchError::InvalidProblem(format!(
                "demand must be positive, got {demand}"
            )));
        }
        if !(balance_tol.is_finite() && balance_tol > 0.0) {
            return Err(DispatchError::InvalidProblem(format!(
                "balance_tol must be positive, got {balance_tol}"
            )));
        }
        if let Some(b) = &loss {
            if b.dim() != units.len() {
                return Err(DispatchError::InvalidLossMatrix(format!(
                    "matrix is {0}x{0} but there are {1} units",
                    b.dim(),
                    units.len()
                )));
            }
        }
        Ok(Self {
            units,
            demand,
            loss,
            balance_tol,
        })
    }

    #[inline]
    pub fn units(&self) -> &[GeneratingUnit] {
        &self.units
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.units.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    #[inline]
    pub fn demand(&self) -> f64 {
        self.demand
    }

    #[inline]
    pub fn loss(&self) -> Option<&LossMatrix> {
        self.loss.as_ref()
    }

    #[inline]
    pub fn balance_tol(&self) -> f64 {
        self.balance_tol
    }

    #[inline]
    pub fn is_lossy(&self) -> bool {
        self.loss.is_some()
    }

    pub fn min_vector(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.p_min).collect()
    }

    pub fn max_vector(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.p_max).collect()
    }

    /// Loss at `power`, or zero for a lossless problem.
    pub fn loss_at(&self, power: &[f64]) -> f64 {
        self.loss.as_ref().map_or(0.0, |b| quadratic_form(b, power))
    }

    fn check_dim(&self, power: &[f64]) -> Result<()> {
        if power.len() != self.units.len() {
            return Err(DispatchError::DimensionMismatch {
                expected: self.units.len(),
                actual: power.len(),
            });
        }
        Ok(())
    }
}

#[inline]
pub fn unit_cost(unit: &GeneratingUnit, p: f64) -> f64 {
    (unit.a * p + unit.b) * p + unit.c
}

pub fn total_cost(problem: &DispatchProblem, power: &[f64]) -> Result<f64> {
    problem.check_dim(power)?;
    Ok(problem
        .units
        .iter()
        .zip(power)
        .map(|(u, &p)| unit_cost(u, p))
        .sum())
}

/// `P_L = Σ_m Σ_n P_m·B_mn·P_n` in MW.
pub fn transmission_loss(loss: &LossMatrix, power: &[f64]) -> Result<f64> {
    if power.len() != loss.dim() {
        return Err(DispatchError::DimensionMismatch {
            expected: loss.dim(),
            actual: power.len(),
        });
    }
    Ok(quadratic_form(loss, power))
}

fn quadratic_form(loss: &LossMatrix, power: &[f64]) -> f64 {
    let n = loss.dim();
    let mut sum = 0.0;
    for (m, &pm) in power.iter().enumerate() {
        let row = &loss.coeffs[m * n..(m + 1) * n];
        let inner: f64 = row.iter().zip(power).map(|(b, p)| b * p).sum();
        sum += pm * inner;
    }
    sum
}

/// `ΣP − P_D − P_L`; positive means surplus generation.
pub fn power_mismatch(problem: &DispatchProblem, power: &[f64]) -> f64 {
    power.iter().sum::<f64>() - problem.demand - problem.loss_at(power)
}

/// Sets unit `dependent` so the balance holds, then clamps it to its limits.
///
/// Lossy problems resolve the circular dependence on `P_L` by fixed-point
/// iteration. If the clamp binds the returned vector keeps a nonzero
/// residual; callers price that in.
pub fn repair_balance(problem: &DispatchProblem, power: &[f64], dependent: usize) -> Vec<f64> {
    let mut out = power.to_vec();
    repair_balance_in_place(problem, &mut out, dependent);
    out
}

pub(crate) fn repair_balance_in_place(
    problem: &DispatchProblem,
    power: &mut [f64],
    dependent: usize,
) {
    debug_assert!(dependent < power.len());
    let unit = &problem.units[dependent];
    let others: f64 = power
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != dependent)
        .map(|(_, p)| p)
        .sum();
    match &problem.loss {
        None => power[dependent] = unit.clamp(problem.demand - others),
        Some(b) => {
            // Run the fixed point until it stops moving, not just until the
            // residual drops under balance_tol, so balanced candidates carry
            // no residual penalty.
            for _ in 0..LOSSY_REPAIR_ROUNDS {
                let loss = quadratic_form(b, power);
                let next = unit.clamp(problem.demand + loss - others);
                let step = (next - power[dependent]).abs();
                power[dependent] = next;
                if step <= 1e-12 * next.abs().max(1.0) {
                    break;
                }
            }
        }
    }
}

/// Conservative aggregate-limit feasibility test.
///
/// Lossless: `Σp_min ≤ P_D ≤ Σp_max`. Lossy: running every unit at its
/// minimum must not overshoot `P_D + P_L(p_min)`, and running every unit at
/// its maximum must cover `P_D + P_L(p_max)`.
pub fn check_feasible(problem: &DispatchProblem) -> Result<()> {
    let min_sum: f64 = problem.units.iter().map(|u| u.p_min).sum();
    let max_sum: f64 = problem.units.iter().map(|u| u.p_max).sum();
    let demand = problem.demand;
    let (low_need, high_need) = match &problem.loss {
        None => (demand, demand),
        Some(b) => (
            demand + quadratic_form(b, &problem.min_vector()),
            demand + quadratic_form(b, &problem.max_vector()),
        ),
    };
    if min_sum > low_need {
        return Err(DispatchError::Infeasible(format!(
            "aggregate minimum generation {min_sum} MW exceeds demand plus losses {low_need} MW"
        )));
    }
    if max_sum < high_need {
        return Err(DispatchError::Infeasible(format!(
            "demand plus losses {high_need} MW exceeds aggregate maximum generation {max_sum} MW"
        )));
    }
    Ok(())
}

/// A dispatch with its cost, loss, residual, and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub power: Vec<f64>,
    pub cost: f64,
    pub loss: f64,
    pub residual: f64,
    pub solver_id: String,
    pub seed: Option<u64>,
}

impl DispatchSolution {
    pub fn evaluate(
        problem: &DispatchProblem,
        power: Vec<f64>,
        solver_id: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let cost = total_cost(problem, &power)?;
        let loss = problem.loss_at(&power);
        let residual = power_mismatch(problem, &power).abs();
        Ok(Self {
            power,
            cost,
            loss,
            residual,
            solver_id: solver_id.into(),
            seed,
        })
    }

    /// Every unit within limits and the residual within `balance_tol`.
    pub fn validate(&self, problem: &DispatchProblem) -> Result<()> {
        problem.check_dim(&self.power)?;
        let fail = |reason: String| DispatchError::SolverFailure {
            solver: self.solver_id.clone(),
            reason,
        };
        for (i, (u, &p)) in problem.units.iter().zip(&self.power).enumerate() {
            if !(u.p_min..=u.p_max).contains(&p) {
                return Err(fail(format!(
                    "unit {i} output {p} MW outside [{}, {}]",
                    u.p_min, u.p_max
                )));
            }
        }
        if !(self.residual <= problem.balance_tol) {
            return Err(fail(format!(
                "balance residual {} MW exceeds tolerance {} MW",
                self.residual, problem.balance_tol
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> GeneratingUnit {
        GeneratingUnit::new(a, b, c, lo, hi).unwrap()
    }

    fn three_equal(demand: f64) -> DispatchProblem {
        DispatchProblem::new(vec![unit(0.0, 1.0, 0.0, 0.0, 200.0); 3], demand).unwrap()
    }

    #[test]
    fn unit_cost_examples() {
        assert_eq!(unit_cost(&unit(0.0, 1.0, 0.0, 0.0, 200.0), 100.0), 100.0);
        assert!((unit_cost(&unit(0.008, 7.0, 200.0, 0.0, 200.0), 100.0) - 980.0).abs() < 1e-12);
        assert_eq!(unit_cost(&unit(0.01, 2.0, 5.0, 0.0, 200.0), 0.0), 5.0);
    }

    #[test]
    fn total_cost_examples() {
        let p = DispatchProblem::new(vec![unit(0.0, 1.0, 0.0, 0.0, 100.0); 2], 120.0).unwrap();
        assert_eq!(total_cost(&p, &[50.0, 70.0]).unwrap(), 120.0);

        let p = DispatchProblem::new(
            vec![
                unit(0.01, 2.0, 10.0, 0.0, 100.0),
                unit(0.02, 3.0, 20.0, 0.0, 100.0),
            ],
            50.0,
        )
        .unwrap();
        assert_eq!(total_cost(&p, &[0.0, 0.0]).unwrap(), 30.0);
        assert_eq!(
            total_cost(&p, &[1.0]),
            Err(DispatchError::DimensionMismatch {
                expected: 2,
                actual: 1
            })
        );
    }

    #[test]
    fn loss_examples() {
        let b = LossMatrix::from_rows(&[vec![0.0001]]).unwrap();
        assert!((transmission_loss(&b, &[100.0]).unwrap() - 1.0).abs() < 1e-12);

        let z = LossMatrix::zeros(3);
        assert_eq!(transmission_loss(&z, &[10.0, 20.0, 30.0]).unwrap(), 0.0);

        let b = LossMatrix::from_rows(&[vec![0.0001, 0.00002], vec![0.00002, 0.0001]]).unwrap();
        assert!((transmission_loss(&b, &[100.0, 200.0]).unwrap() - 5.8).abs() < 1e-12);
        assert!(transmission_loss(&b, &[1.0]).is_err());
    }

    #[test]
    fn loss_matrix_is_symmetrized() {
        let b = LossMatrix::from_rows(&[vec![1.0, 4.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(b.get(0, 1), 2.0);
        assert_eq!(b.get(1, 0), 2.0);
        assert!(LossMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn mismatch_examples() {
        let p = three_equal(300.0);
        assert_eq!(power_mismatch(&p, &[100.0, 100.0, 100.0]), 0.0);
        assert_eq!(power_mismatch(&p, &[100.0, 100.0, 90.0]), -10.0);

        let lossy = DispatchProblem::with_options(
            vec![unit(0.0, 1.0, 0.0, 0.0, 200.0)],
            99.0,
            Some(LossMatrix::from_rows(&[vec![0.0001]]).unwrap()),
            DEFAULT_BALANCE_TOL,
        )
        .unwrap();
        assert!(power_mismatch(&lossy, &[100.0]).abs() < 1e-12);
    }

    #[test]
    fn lossless_repair() {
        let p = three_equal(300.0);
        assert_eq!(
            repair_balance(&p, &[100.0, 100.0, 90.0], 2),
            vec![100.0, 100.0, 100.0]
        );

        let mut units = vec![unit(0.0, 1.0, 0.0, 0.0, 200.0); 3];
        units[2].p_max = 95.0;
        let p = DispatchProblem::new(units, 300.0).unwrap();
        let fixed = repair_balance(&p, &[100.0, 100.0, 90.0], 2);
        assert_eq!(fixed, vec![100.0, 100.0, 95.0]);
        assert_eq!(power_mismatch(&p, &fixed), -5.0);
    }

    #[test]
    fn feasibility_examples() {
        let one = |d| DispatchProblem::new(vec![unit(0.01, 2.0, 0.0, 10.0, 85.0)], d).unwrap();
        assert!(check_feasible(&one(50.0)).is_ok());
        let err = check_feasible(&one(100.0)).unwrap_err();
        assert!(
            err.to_string().contains("exceeds aggregate maximum"),
            "{err}"
        );
        assert!(check_feasible(&one(5.0)).is_err());

        let p = DispatchProblem::new(
            vec![
                unit(0.0, 1.0, 0.0, 10.0, 85.0),
                unit(0.0, 1.0, 0.0, 10.0, 80.0),
                unit(0.0, 1.0, 0.0, 10.0, 70.0),
            ],
            235.0,
        )
        .unwrap();
        assert!(check_feasible(&p).is_ok());
    }

    #[test]
    fn rejects_bad_units() {
        assert!(matches!(
            GeneratingUnit::new(-0.1, 1.0, 0.0, 0.0, 1.0),
            Err(DispatchError::InvalidUnit { field: "a", .. })
        ));
        assert!(matches!(
            GeneratingUnit::new(0.1, 1.0, 0.0, 5.0, 1.0),
            Err(DispatchError::InvalidUnit { field: "p_min", .. })
        ));
        assert!(DispatchProblem::new(vec![], 10.0).is_err());
        assert!(DispatchProblem::new(vec![unit(0.0, 1.0, 0.0, 0.0, 1.0)], 0.0).is_err());
        assert!(DispatchProblem::with_options(
            vec![unit(0.0, 1.0, 0.0, 0.0, 1.0)],
            1.0,
            Some(LossMatrix::zeros(2)),
            1e-4
        )
        .is_err());
    }

    #[test]
    fn solution_validation() {
        let p = three_equal(300.0);
        let ok = DispatchSolution::evaluate(&p, vec![100.0; 3], "test", None).unwrap();
        assert!(ok.validate(&p).is_ok());
        let short = DispatchSolution::evaluate(&p, vec![100.0, 100.0, 90.0], "test", None).unwrap();
        assert!(short.validate(&p).is_err());
    }

    fn psd_matrix(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-1e-2..1e-2f64, n), n).prop_map(move |g| {
            // G·Gᵀ is PSD
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|k| g[i][k] * g[j][k]).sum())
                        .collect()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn total_cost_is_sum_of_unit_costs(
            coeffs in prop::collection::vec((0.0..0.1f64, -10.0..10.0f64, 0.0..500.0f64, 0.0..300.0f64), 1..8)
        ) {
            let units: Vec<_> = coeffs.iter().map(|&(a, b, c, _)| unit(a, b, c, 0.0, 300.0)).collect();
            let power: Vec<_> = coeffs.iter().map(|c| c.3).collect();
            let p = DispatchProblem::new(units.clone(), 1.0).unwrap();
            let total = total_cost(&p, &power).unwrap();
            // pairwise accumulation
            let mut terms: Vec<f64> = units.iter().zip(&power).map(|(u, &x)| unit_cost(u, x)).collect();
            while terms.len() > 1 {
                terms = terms.chunks(2).map(|c| c.iter().sum()).collect();
            }
            prop_assert!((total - terms[0]).abs() <= 1e-12 * total.abs().max(1.0));
        }

        #[test]
        fn loss_nonnegative_for_psd(
            (rows, power) in (1usize..6).prop_flat_map(|n| (psd_matrix(n), prop::collection::vec(0.0..500.0f64, n)))
        ) {
            let b = LossMatrix::from_rows(&rows).unwrap();
            let loss = transmission_loss(&b, &power).unwrap();
            prop_assert!(loss >= -1e-12);
            let lt = transmission_loss(&b.transpose(), &power).unwrap();
            prop_assert!((loss - lt).abs() <= 1e-12 * loss.abs().max(1.0));
            prop_assert_eq!(transmission_loss(&b, &vec![0.0; rows.len()]).unwrap(), 0.0);
        }

        #[test]
        fn lossless_repair_balances_and_touches_only_dependent(
            power in prop::collection::vec(0.0..100.0f64, 2..6),
            dep_seed in 0usize..100,
        ) {
            let n = power.len();
            let dependent = dep_seed % n;
            let others: f64 = power.iter().enumerate().filter(|&(i, _)| i != dependent).map(|(_, p)| p).sum();
            // choose demand so the dependent unit lands inside [0, 1000]
            let demand = others + 50.0;
            let units = vec![unit(0.01, 1.0, 0.0, 0.0, 1000.0); n];
            let p = DispatchProblem::new(units, demand).unwrap();
            let fixed = repair_balance(&p, &power, dependent);
            prop_assert!(power_mismatch(&p, &fixed).abs() <= 1e-9);
            for i in 0..n {
                if i != dependent {
                    prop_assert_eq!(fixed[i], power[i]);
                }
            }
        }

        #[test]
        fn lossy_repair_converges_within_tolerance(
            rows in psd_matrix(3),
            power in prop::collection::vec(20.0..60.0f64, 3),
            dependent in 0usize..3,
        ) {
            let units = vec![unit(0.01, 1.0, 0.0, 0.0, 1000.0); 3];
            let others: f64 = power.iter().enumerate().filter(|&(i, _)| i != dependent).map(|(_, p)| p).sum();
            let b = LossMatrix::from_rows(&rows).unwrap();
            let p = DispatchProblem::with_options(units, others + 40.0, Some(b), DEFAULT_BALANCE_TOL).unwrap();
            let fixed = repair_balance(&p, &power, dependent);
            prop_assert!(power_mismatch(&p, &fixed).abs() <= p.balance_tol());
        }
    }
}
