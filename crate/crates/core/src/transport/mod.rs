//! Discrete measures, optimal couplings, and particle-level ensemble steering.

mod ensemble;
mod exact;
mod io;
mod measure;
mod sinkhorn;

pub use ensemble::{
    ensemble_steer, steer_pair, steer_pairs, summarize as summarize_ensemble, EnsembleResult,
    PairOutcome,
};
pub use exact::{solve_exact, solve_exact_brute_force, BRUTE_FORCE_MAX};
pub use io::{write_coupling_csv, write_measure_csv, CouplingSummary};
pub use measure::{
    pullback_inertia, pushforward_inertia, sample_gaussian, second_moment, DiscreteMeasure,
    GaussianSpec, MASS_TOL,
};
pub use sinkhorn::{solve_sinkhorn, SinkhornSettings};

use crate::ground_cost::CostMatrix;
use crate::{Error, Result};

/// Largest marginal residual accepted for an exact coupling.
pub const MARGINAL_TOL: f64 = 1e-9;

/// How a coupling was computed.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "solver", rename_all = "kebab-case")]
pub enum SolverInfo {
    Hungarian,
    NetworkSimplex {
        pivots: usize,
    },
    BruteForce,
    /// The independent coupling `a ⊗ b`.
    Product,
    Sinkhorn {
        epsilon: f64,
        iterations: usize,
        log_domain: bool,
        /// L1 column-marginal residual after each iteration at the final `ε`.
        residual_history: Vec<f64>,
    },
}

impl SolverInfo {
    pub fn name(&self) -> &'static str {
        match self {
            SolverInfo::Hungarian => "hungarian",
            SolverInfo::NetworkSimplex { .. } => "network-simplex",
            SolverInfo::BruteForce => "brute-force",
            SolverInfo::Product => "product",
            SolverInfo::Sinkhorn { .. } => "sinkhorn",
        }
    }
}

/// A transport plan between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    plan: Vec<f64>,
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    cost: f64,
    solver: SolverInfo,
}

impl Coupling {
    /// Wraps a row-major `plan`; the cost is `Σ plan_ij c_ij`.
    pub fn new(
        plan: Vec<f64>,
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        costs: &CostMatrix,
        solver: SolverInfo,
    ) -> Result<Self> {
        check_dimensions(costs, &source, &target)?;
        if plan.len() != costs.entries().len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} plan entries", costs.entries().len()),
                found: plan.len().to_string(),
            });
        }
        if plan.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "plan entries must be finite and nonnegative".into(),
            ));
        }
        let cost = plan.iter().zip(costs.entries()).map(|(p, c)| p * c).sum();
        Ok(Self {
            plan,
            source,
            target,
            cost,
            solver,
        })
    }

    /// The product coupling `a ⊗ b`.
    pub fn product(
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        costs: &CostMatrix,
    ) -> Result<Self> {
        let plan = source
            .weights()
            .iter()
            .flat_map(|a| target.weights().iter().map(move |b| a * b))
            .collect();
        Self::new(plan, source, target, costs, SolverInfo::Product)
    }

    pub fn plan(&self) -> &[f64] {
        &self.plan
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.target.len() + j]
    }

    pub fn rows(&self) -> usize {
        self.source.len()
    }

    pub fn cols(&self) -> usize {
        self.target.len()
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    /// `Σ plan_ij c_ij`.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn solver(&self) -> &SolverInfo {
        &self.solver
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.plan
            .chunks(self.cols())
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols()];
        for row in self.plan.chunks(self.cols()) {
            for (s, p) in sums.iter_mut().zip(row) {
                *s += p;
            }
        }
        sums
    }

    /// Largest absolute deviation of the row sums from the source weights.
    pub fn row_residual(&self) -> f64 {
        max_deviation(&self.row_sums(), self.source.weights())
    }

    /// Largest absolute deviation of the column sums from the target weights.
    pub fn col_residual(&self) -> f64 {
        max_deviation(&self.col_sums(), self.target.weights())
    }

    /// Entries with positive mass, row-major.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.cols();
        self.plan
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(move |(k, p)| (k / n, k % n, *p))
    }
}

fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn check_dimensions(
    costs: &CostMatrix,
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
) -> Result<()> {
    if costs.rows() != source.len() || costs.cols() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} cost matrix", source.len(), target.len()),
            found: format!("{}x{}", costs.rows(), costs.cols()),
        });
    }
    Ok(())
}

pub(crate) fn check_balance(source: &DiscreteMeasure, target: &DiscreteMeasure) -> Result<()> {
    let source_mass: f64 = source.weights().iter().sum();
    let target_mass: f64 = target.weights().iter().sum();
    if (source_mass - target_mass).abs() > MARGINAL_TOL {
        return Err(Error::MarginalMismatch {
            source_mass,
            target_mass,
        });
    }
    Ok(())
}
