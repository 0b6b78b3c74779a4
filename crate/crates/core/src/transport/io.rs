//! CSV and JSON artifacts for measures and couplings.

use std::io::Write;

use super::{Coupling, DiscreteMeasure, SolverInfo};
use crate::ground_cost::CostMatrix;
use crate::Result;

/// `x1,x2,x3,weight`, one atom per line.
pub fn write_measure_csv<W: Write>(measure: &DiscreteMeasure, mut w: W) -> Result<()> {
    writeln!(w, "x1,x2,x3,weight")?;
    for (x, weight) in measure.support().iter().zip(measure.weights()) {
        writeln!(w, "{},{},{},{}", x[0], x[1], x[2], weight)?;
    }
    Ok(())
}

/// `i,j,mass,cost`, one line per positive plan entry in row-major order.
pub fn write_coupling_csv<W: Write>(
    coupling: &Coupling,
    costs: &CostMatrix,
    mut w: W,
) -> Result<()> {
    writeln!(w, "i,j,mass,cost")?;
    for (i, j, mass) in coupling.support() {
        writeln!(w, "{},{},{},{}", i, j, mass, costs.get(i, j))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CouplingSummary {
    pub transport_cost: f64,
    pub row_residual: f64,
    pub col_residual: f64,
    pub solver: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pivots: Option<usize>,
}

impl From<&Coupling> for CouplingSummary {
    fn from(c: &Coupling) -> Self {
        let (epsilon, iterations, pivots) = match c.solver() {
            SolverInfo::Sinkhorn {
                epsilon,
                iterations,
                ..
            } => (Some(*epsilon), Some(*iterations), None),
            SolverInfo::NetworkSimplex { pivots } => (None, None, Some(*pivots)),
            _ => (None, None, None),
        };
        Self {
            transport_cost: c.cost(),
            row_residual: c.row_residual(),
            col_residual: c.col_residual(),
            solver: c.solver().name().to_string(),
            epsilon,
            iterations,
            pivots,
        }
    }
}
