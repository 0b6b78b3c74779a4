//! Particle-level realization of a coupling by closed-loop steering.

use rayon::prelude::*;

use super::{Coupling, DiscreteMeasure, MASS_TOL};
use crate::ground_cost::GroundCostSpec;
use crate::rigid_body::{Drift, ZeroDrift};
use crate::steering::{integrate, two_phase_policy, PolicyKind, SteeringPolicy, Trajectory};
use crate::{Error, Result, StateVec};

/// One steered plan entry.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PairOutcome {
    pub source_index: usize,
    pub target_index: usize,
    pub mass: f64,
    /// Control energy of the single trajectory.
    pub cost: f64,
    pub terminal_error: f64,
    #[serde(skip)]
    pub terminal: StateVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Terminal particles weighted by their plan mass.
    pub terminal: DiscreteMeasure,
    /// `Σ plan_ij · cost_ij` over the steered trajectories.
    pub total_cost: f64,
    /// The coupling's own objective value.
    pub transport_cost: f64,
    pub max_terminal_error: f64,
    pub pairs: Vec<PairOutcome>,
}

/// Closed-loop run from `x0` to `x_f` under the dynamics of `spec`: the
/// Euler drift of its body if it has one, the pure integrator otherwise.
pub fn steer_pair(
    spec: &GroundCostSpec,
    kind: PolicyKind,
    x0: &StateVec,
    x_f: &StateVec,
    step: f64,
) -> Result<Trajectory<3>> {
    let t_f = spec.horizon();
    match spec.body() {
        Some(body) => {
            let policy = match kind {
                PolicyKind::FeasibleUstar => SteeringPolicy::feasible(body, x0, x_f, t_f)?,
                _ => build_policy(body, kind, x0, x_f, t_f, step)?,
            };
            integrate(body, &policy, x0, step)
        }
        None => integrate(
            &ZeroDrift,
            &build_policy(&ZeroDrift, kind, x0, x_f, t_f, step)?,
            x0,
            step,
        ),
    }
}

fn build_policy<F: Drift<3>>(
    drift: &F,
    kind: PolicyKind,
    x0: &StateVec,
    x_f: &StateVec,
    t_f: f64,
    step: f64,
) -> Result<SteeringPolicy<3>> {
    match kind {
        PolicyKind::FeasibleUstar | PolicyKind::NorminvUstarstar => {
            SteeringPolicy::norm_invariant(x0, x_f, t_f)
        }
        PolicyKind::TwoPhase => two_phase_policy(drift, x0, x_f, t_f, step),
        PolicyKind::OpenLoop => Err(Error::InvalidArgument(
            "open-loop policies cannot be built per pair".into(),
        )),
    }
}

/// Steers every positive-mass entry of `coupling`, in parallel. The output
/// order is the row-major order of the plan regardless of scheduling.
pub fn steer_pairs(
    coupling: &Coupling,
    spec: &GroundCostSpec,
    kind: PolicyKind,
    step: f64,
) -> Vec<Result<PairOutcome>> {
    let entries: Vec<(usize, usize, f64)> = coupling.support().collect();
    let sources = coupling.source().support();
    let targets = coupling.target().support();
    entries
        .into_par_iter()
        .map(|(i, j, mass)| {
            steer_pair(spec, kind, &sources[i], &targets[j], step)
                .map(|traj| PairOutcome {
                    source_index: i,
                    target_index: j,
                    mass,
                    cost: traj.cost(),
                    terminal_error: traj.terminal_error(),
                    terminal: *traj.terminal_state(),
                })
                .map_err(|e| Error::PairFailed {
                    source_index: i,
                    target_index: j,
                    reason: Box::new(e),
                })
        })
        .collect()
}

/// Splits each source atom across its coupled targets, steers every piece,
/// and returns the terminal particles with the plan-weighted control cost.
/// Fails with the first failing pair in row-major order.
pub fn ensemble_steer(
    coupling: &Coupling,
    spec: &GroundCostSpec,
    kind: PolicyKind,
    step: f64,
) -> Result<EnsembleResult> {
    let pairs = steer_pairs(coupling, spec, kind, step)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    summarize(coupling, pairs)
}

/// Assembles the terminal measure and cost totals from steered pairs.
pub fn summarize(coupling: &Coupling, pairs: Vec<PairOutcome>) -> Result<EnsembleResult> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "no plan entry could be steered".into(),
        ));
    }
    let support: Vec<StateVec> = pairs.iter().map(|p| p.terminal).collect();
    let masses: Vec<f64> = pairs.iter().map(|p| p.mass).collect();
    let terminal = if (masses.iter().sum::<f64>() - 1.0).abs() <= MASS_TOL {
        DiscreteMeasure::new(support, masses)?
    } else {
        DiscreteMeasure::normalized(support, masses)?
    };
    Ok(EnsembleResult {
        terminal,
        total_cost: pairs.iter().map(|p| p.mass * p.cost).sum(),
        transport_cost: coupling.cost(),
        max_terminal_error: pairs.iter().map(|p| p.terminal_error).fold(0.0, f64::max),
        pairs,
    })
}
