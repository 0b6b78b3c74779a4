//! Direct-transcription oracle for the minimum-energy transfer problem
//!
//! ```text
//! c(x0, x_f) = min ∫ ½‖u‖² dt   s.t.  x' = f(x) + u,  x(0) = x0,  x(t_f) = x_f.
//! ```
//!
//! Controls are piecewise constant on `N` intervals; the state is propagated
//! by `M` RK4 substeps per interval. The terminal constraint is replaced by
//! the penalty `½ρ‖x_N - x_f‖²` and `ρ` is continued through an increasing
//! schedule, each stage warm-started from the previous one. Each stage is a
//! smooth unconstrained problem solved by limited-memory quasi-Newton descent
//! with Armijo backtracking; gradients come from the discrete adjoint of the
//! RK4 rollout, so they are exact for the discretized objective.
//!
//! For nonconvex drifts the result is a feasible local optimum, i.e. an upper
//! envelope of the true ground cost, not a certificate of global optimality.

use std::collections::VecDeque;

use nalgebra::{SMatrix, SVector};

use crate::rigid_body::{Drift, InertiaBody};
use crate::steering::{integrate, ControlTable, SteeringPolicy};
use crate::{Error, Result, StateVec};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranscriptionSettings {
    /// Number of piecewise-constant control intervals.
    pub intervals: usize,
    /// RK4 substeps per control interval.
    pub substeps: usize,
    /// Terminal penalty weights, strictly increasing.
    pub penalties: Vec<f64>,
    /// Tolerance on the L2-in-time norm of the objective gradient.
    pub grad_tol: f64,
    /// Iteration cap per penalty stage.
    pub max_iter: usize,
    /// Largest terminal violation accepted as converged.
    pub violation_tol: f64,
    /// Number of curvature pairs kept by the quasi-Newton update.
    pub memory: usize,
}

impl Default for TranscriptionSettings {
    fn default() -> Self {
        Self {
            intervals: 100,
            substeps: 4,
            penalties: vec![10.0, 100.0, 1e3, 1e4, 1e5],
            grad_tol: 1e-5,
            max_iter: 3000,
            violation_tol: 1e-4,
            memory: 12,
        }
    }
}

impl TranscriptionSettings {
    pub fn validate(&self) -> Result<()> {
        if self.intervals < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 intervals, got {}",
                self.intervals
            )));
        }
        if self.substeps == 0 || self.max_iter == 0 || self.memory == 0 {
            return Err(Error::InvalidArgument(
                "substeps, max_iter and memory must be positive".into(),
            ));
        }
        if self.penalties.is_empty()
            || self.penalties[0] <= 0.0
            || self.penalties.windows(2).any(|w| !(w[1] > w[0]))
            || self.penalties.iter().any(|p| !p.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "penalty schedule must be positive and strictly increasing, got {:?}",
                self.penalties
            )));
        }
        if !(self.grad_tol > 0.0) || !(self.violation_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// A fixed-endpoint minimum-energy problem under drift `F`.
#[derive(Debug, Clone)]
pub struct TranscriptionProblem<'a, const D: usize, F: ?Sized> {
    drift: &'a F,
    x0: SVector<f64, D>,
    x_f: SVector<f64, D>,
    horizon: f64,
    settings: TranscriptionSettings,
}

/// Starting point for [`solve`].
#[derive(Debug, Clone)]
pub enum InitialGuess<'a, const D: usize> {
    Zero,
    Table(Vec<SVector<f64, D>>),
    /// Interval averages of a closed-loop run of the policy.
    Policy(&'a SteeringPolicy<D>),
}

/// Penalized objective and its gradient with respect to each control interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective<const D: usize> {
    pub value: f64,
    pub energy: f64,
    pub violation: f64,
    pub gradient: Vec<SVector<f64, D>>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StageLog {
    pub penalty: f64,
    pub cost: f64,
    pub violation: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptionSolution<const D: usize> {
    pub controls: Vec<SVector<f64, D>>,
    /// Control energy `Σ ½‖u_k‖² Δt` (penalty excluded).
    pub cost: f64,
    pub violation: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub stages: Vec<StageLog>,
}

impl<'a, const D: usize, F: Drift<D> + ?Sized> TranscriptionProblem<'a, D, F> {
    pub fn new(
        drift: &'a F,
        x0: SVector<f64, D>,
        x_f: SVector<f64, D>,
        horizon: f64,
        settings: TranscriptionSettings,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if x0.iter().chain(x_f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("endpoints must be finite".into()));
        }
        settings.validate()?;
        Ok(Self {
            drift,
            x0,
            x_f,
            horizon,
            settings,
        })
    }

    pub fn settings(&self) -> &TranscriptionSettings {
        &self.settings
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Length of one control interval.
    pub fn interval(&self) -> f64 {
        self.horizon / self.settings.intervals as f64
    }

    fn substep(&self) -> f64 {
        self.interval() / self.settings.substeps as f64
    }

    fn check_controls(&self, controls: &[SVector<f64, D>]) -> Result<()> {
        if controls.len() != self.settings.intervals {
            return Err(Error::DimensionMismatch {
                expected: format!("{} control intervals", self.settings.intervals),
                found: controls.len().to_string(),
            });
        }
        Ok(())
    }

    /// States at every substep node, `N·M + 1` in total.
    pub fn rollout(&self, controls: &[SVector<f64, D>]) -> Result<Vec<SVector<f64, D>>> {
        self.check_controls(controls)?;
        let m = self.settings.substeps;
        let h = self.substep();
        let mut states = Vec::with_capacity(controls.len() * m + 1);
        let mut x = self.x0;
        states.push(x);
        for (k, u) in controls.iter().enumerate() {
            for j in 0..m {
                x = rk4_control_step(self.drift, &x, u, h);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence {
                        time: ((k * m + j + 1) as f64) * h,
                    });
                }
                states.push(x);
            }
        }
        Ok(states)
    }

    /// States at the control-interval boundaries.
    pub fn interval_states(&self, controls: &[SVector<f64, D>]) -> Result<Vec<SVector<f64, D>>> {
        let m = self.settings.substeps;
        Ok(self.rollout(controls)?.into_iter().step_by(m).collect())
    }

    pub fn energy(&self, controls: &[SVector<f64, D>]) -> f64 {
        0.5 * self.interval() * controls.iter().map(|u| u.norm_squared()).sum::<f64>()
    }

    /// Penalized objective `J_ρ` and its adjoint gradient.
    pub fn evaluate(&self, controls: &[SVector<f64, D>], penalty: f64) -> Result<Objective<D>> {
        let states = self.rollout(controls)?;
        Ok(self.objective_from(&states, controls, penalty))
    }

    fn objective_from(
        &self,
        states: &[SVector<f64, D>],
        controls: &[SVector<f64, D>],
        penalty: f64,
    ) -> Objective<D> {
        let miss = states[states.len() - 1] - self.x_f;
        let energy = self.energy(controls);
        let value = energy + 0.5 * penalty * miss.norm_squared();

        let dt = self.interval();
        let mut gradient: Vec<SVector<f64, D>> = controls.iter().map(|u| u * dt).collect();
        self.backward_sweep(states, controls, miss * penalty, |k, lu| gradient[k] += lu);
        Objective {
            value,
            energy,
            violation: miss.norm(),
            gradient,
        }
    }

    /// Propagates a terminal costate backwards through the rollout, handing
    /// each substep's control sensitivity to `sink(interval, ·)`.
    fn backward_sweep(
        &self,
        states: &[SVector<f64, D>],
        controls: &[SVector<f64, D>],
        terminal: SVector<f64, D>,
        mut sink: impl FnMut(usize, SVector<f64, D>),
    ) {
        let m = self.settings.substeps;
        let h = self.substep();
        let mut costate = terminal;
        for k in (0..controls.len()).rev() {
            for j in (0..m).rev() {
                let (lx, lu) =
                    rk4_control_vjp(self.drift, &states[k * m + j], &controls[k], h, &costate);
                costate = lx;
                sink(k, lu);
            }
        }
    }

    /// `∂x_N/∂u_k` for every interval, one `D×D` block each.
    fn terminal_sensitivity(
        &self,
        states: &[SVector<f64, D>],
        controls: &[SVector<f64, D>],
    ) -> Vec<SMatrix<f64, D, D>> {
        let mut blocks = vec![SMatrix::<f64, D, D>::zeros(); controls.len()];
        for i in 0..D {
            let mut unit = SVector::<f64, D>::zeros();
            unit[i] = 1.0;
            self.backward_sweep(states, controls, unit, |k, lu| {
                let mut row = blocks[k].row_mut(i);
                row += lu.transpose();
            });
        }
        blocks
    }

    /// Interval averages of the controls a closed-loop policy applies.
    pub fn sample_policy(&self, policy: &SteeringPolicy<D>) -> Result<Vec<SVector<f64, D>>> {
        let traj = integrate(self.drift, policy, &self.x0, self.substep())?;
        let table = ControlTable::new(traj.times, traj.controls)?;
        let dt = self.interval();
        let m = self.settings.substeps;
        Ok((0..self.settings.intervals)
            .map(|k| {
                let t0 = k as f64 * dt;
                (0..m)
                    .map(|j| table.at(t0 + (j as f64 + 0.5) * dt / m as f64))
                    .sum::<SVector<f64, D>>()
                    / m as f64
            })
            .collect())
    }

    fn gradient_norm(&self, gradient: &[SVector<f64, D>]) -> f64 {
        (gradient.iter().map(|g| g.norm_squared()).sum::<f64>() / self.interval()).sqrt()
    }
}

/// Gradient of `J_ρ` with respect to each control interval.
pub fn adjoint_gradient<const D: usize, F: Drift<D> + ?Sized>(
    problem: &TranscriptionProblem<'_, D, F>,
    controls: &[SVector<f64, D>],
    penalty: f64,
) -> Result<Vec<SVector<f64, D>>> {
    Ok(problem.evaluate(controls, penalty)?.gradient)
}

/// Runs penalty continuation from `init` and returns the final stage.
pub fn solve<const D: usize, F: Drift<D> + ?Sized>(
    problem: &TranscriptionProblem<'_, D, F>,
    init: InitialGuess<'_, D>,
) -> Result<TranscriptionSolution<D>> {
    let mut controls = match init {
        InitialGuess::Zero => vec![SVector::zeros(); problem.settings.intervals],
        InitialGuess::Table(table) => {
            problem.check_controls(&table)?;
            table
        }
        InitialGuess::Policy(policy) => problem.sample_policy(policy)?,
    };

    let settings = &problem.settings;
    let mut stages = Vec::with_capacity(settings.penalties.len());
    let mut gradient_norm = f64::INFINITY;
    for &penalty in &settings.penalties {
        let outcome = minimize(problem, &mut controls, penalty)?;
        gradient_norm = outcome.gradient_norm;
        stages.push(StageLog {
            penalty,
            cost: outcome.objective.energy,
            violation: outcome.objective.violation,
            iterations: outcome.iterations,
            gradient_norm,
        });
    }
    let last = stages.last().expect("schedule is nonempty");
    let (cost, violation) = (last.cost, last.violation);
    Ok(TranscriptionSolution {
        converged: gradient_norm <= settings.grad_tol && violation <= settings.violation_tol,
        controls,
        cost,
        violation,
        gradient_norm,
        stages,
    })
}

struct StageOutcome<const D: usize> {
    objective: Objective<D>,
    gradient_norm: f64,
    iterations: usize,
}

/// Limited-memory BFGS whose initial inverse Hessian is the Gauss-Newton
/// matrix `(Δt I + ρ GᵀG)⁻¹`, `G = ∂x_N/∂u`, applied through the
/// Sherman-Morrison-Woodbury identity. The penalty makes the problem stiff
/// in the `D` directions spanned by `G`; the preconditioner removes that
/// stiffness and the curvature pairs pick up the drift's second-order terms.
fn minimize<const D: usize, F: Drift<D> + ?Sized>(
    problem: &TranscriptionProblem<'_, D, F>,
    controls: &mut [SVector<f64, D>],
    penalty: f64,
) -> Result<StageOutcome<D>> {
    const ARMIJO: f64 = 1e-4;
    const SHRINK: f64 = 0.5;
    const MAX_BACKTRACKS: usize = 40;
    const STALL_LIMIT: usize = 5;

    let settings = &problem.settings;
    let dt = problem.interval();
    let mut states = problem.rollout(controls)?;
    let mut current = problem.objective_from(&states, controls, penalty);
    let mut history: VecDeque<Pair<D>> = VecDeque::new();
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < settings.max_iter {
        if problem.gradient_norm(&current.gradient) <= settings.grad_tol {
            break;
        }
        let sensitivity = problem.terminal_sensitivity(&states, controls);
        let precondition = |q: &[SVector<f64, D>]| gauss_newton_solve(&sensitivity, q, dt, penalty);
        let mut direction = two_loop(&current.gradient, &history, precondition);
        let mut slope = dot(&direction, &current.gradient);
        if !(slope < 0.0) {
            history.clear();
            direction = current.gradient.iter().map(|g| -g).collect();
            slope = dot(&direction, &current.gradient);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<_> = controls
                .iter()
                .zip(&direction)
                .map(|(u, d)| u + d * step)
                .collect();
            match problem.rollout(&trial) {
                Ok(trial_states) => {
                    let obj = problem.objective_from(&trial_states, &trial, penalty);
                    if obj.value <= current.value + ARMIJO * step * slope {
                        accepted = Some((trial, trial_states, obj));
                        break;
                    }
                }
                Err(Error::Divergence { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= SHRINK;
        }
        iterations += 1;
        // No sufficient decrease representable in floating point.
        let Some((trial, trial_states, next)) = accepted else {
            break;
        };

        if current.value - next.value <= 1e-15 * current.value.abs() {
            stalled += 1;
        } else {
            stalled = 0;
        }

        let s: Vec<_> = trial
            .iter()
            .zip(controls.iter())
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<_> = next
            .gradient
            .iter()
            .zip(&current.gradient)
            .map(|(a, b)| a - b)
            .collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        controls.copy_from_slice(&trial);
        states = trial_states;
        current = next;
        if stalled >= STALL_LIMIT {
            break;
        }
    }

    Ok(StageOutcome {
        gradient_norm: problem.gradient_norm(&current.gradient),
        objective: current,
        iterations,
    })
}

/// `(Δt I + ρ GᵀG)⁻¹ q = (q - Gᵀ (Δt/ρ I + G Gᵀ)⁻¹ G q) / Δt`.
fn gauss_newton_solve<const D: usize>(
    blocks: &[SMatrix<f64, D, D>],
    q: &[SVector<f64, D>],
    dt: f64,
    penalty: f64,
) -> Vec<SVector<f64, D>> {
    let mut gram = nalgebra::DMatrix::<f64>::identity(D, D) * (dt / penalty);
    let mut gq = nalgebra::DVector::<f64>::zeros(D);
    for (b, qk) in blocks.iter().zip(q) {
        let bq = b * qk;
        let bbt = b * b.transpose();
        for i in 0..D {
            gq[i] += bq[i];
            for j in 0..D {
                gram[(i, j)] += bbt[(i, j)];
            }
        }
    }
    let w = match gram.cholesky() {
        Some(chol) => chol.solve(&gq),
        None => return q.iter().map(|v| v / dt).collect(),
    };
    let w = SVector::<f64, D>::from_iterator(w.iter().copied());
    blocks
        .iter()
        .zip(q)
        .map(|(b, qk)| (qk - b.transpose() * w) / dt)
        .collect()
}

type Pair<const D: usize> = (Vec<SVector<f64, D>>, Vec<SVector<f64, D>>, f64);

fn two_loop<const D: usize>(
    gradient: &[SVector<f64, D>],
    history: &VecDeque<Pair<D>>,
    initial: impl Fn(&[SVector<f64, D>]) -> Vec<SVector<f64, D>>,
) -> Vec<SVector<f64, D>> {
    let mut q: Vec<_> = gradient.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= yi * a;
        }
        alphas.push(a);
    }
    let mut r = initial(&q);
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &r);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += si * (a - b);
        }
    }
    r.iter().map(|v| -v).collect()
}

fn dot<const D: usize>(a: &[SVector<f64, D>], b: &[SVector<f64, D>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm<const D: usize>(a: &[SVector<f64, D>]) -> f64 {
    dot(a, a).sqrt()
}

fn rk4_control_step<const D: usize, F: Drift<D> + ?Sized>(
    drift: &F,
    x: &SVector<f64, D>,
    u: &SVector<f64, D>,
    h: f64,
) -> SVector<f64, D> {
    let k1 = drift.eval(x) + u;
    let k2 = drift.eval(&(x + k1 * (0.5 * h))) + u;
    let k3 = drift.eval(&(x + k2 * (0.5 * h))) + u;
    let k4 = drift.eval(&(x + k3 * h)) + u;
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Reverse-mode derivative of one RK4 step with constant control: given the
/// costate `λ` of the step's output, returns `(∂/∂x, ∂/∂u)` of `⟨λ, Φ(x, u)⟩`.
fn rk4_control_vjp<const D: usize, F: Drift<D> + ?Sized>(
    drift: &F,
    x: &SVector<f64, D>,
    u: &SVector<f64, D>,
    h: f64,
    costate: &SVector<f64, D>,
) -> (SVector<f64, D>, SVector<f64, D>) {
    let k1 = drift.eval(x) + u;
    let x2 = x + k1 * (0.5 * h);
    let k2 = drift.eval(&x2) + u;
    let x3 = x + k2 * (0.5 * h);
    let k3 = drift.eval(&x3) + u;
    let x4 = x + k3 * h;

    let bar_k4 = costate * (h / 6.0);
    let bar_x4 = drift.vjp(&x4, &bar_k4);
    let bar_k3 = costate * (h / 3.0) + bar_x4 * h;
    let bar_x3 = drift.vjp(&x3, &bar_k3);
    let bar_k2 = costate * (h / 3.0) + bar_x3 * (0.5 * h);
    let bar_x2 = drift.vjp(&x2, &bar_k2);
    let bar_k1 = costate * (h / 6.0) + bar_x2 * (0.5 * h);
    let bar_x1 = drift.vjp(x, &bar_k1);

    (
        costate + bar_x1 + bar_x2 + bar_x3 + bar_x4,
        bar_k1 + bar_k2 + bar_k3 + bar_k4,
    )
}

/// One start of the multi-start ground-cost search.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StartReport {
    pub start: &'static str,
    pub cost: f64,
    pub violation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericGroundCost {
    pub cost: f64,
    pub converged: bool,
    pub certificate: TranscriptionSolution<3>,
    pub starts: Vec<StartReport>,
}

/// Numerical ground cost for the Euler dynamics: solves from the zero control
/// and from the `u*` warm start and keeps the cheapest converged solution
/// (or, if none converged, the one with the smallest violation).
pub fn ground_cost_numeric(
    body: &InertiaBody,
    x0: &StateVec,
    x_f: &StateVec,
    horizon: f64,
    settings: &TranscriptionSettings,
) -> Result<NumericGroundCost> {
    let problem = TranscriptionProblem::new(body, *x0, *x_f, horizon, settings.clone())?;
    let warm = SteeringPolicy::feasible(body, x0, x_f, horizon)?;

    let mut solutions = Vec::with_capacity(2);
    for (label, init) in [
        ("zero", InitialGuess::Zero),
        ("ustar", InitialGuess::Policy(&warm)),
    ] {
        match solve(&problem, init) {
            Ok(sol) => solutions.push((label, sol)),
            Err(Error::Divergence { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    if solutions.is_empty() {
        return Err(Error::Divergence { time: horizon });
    }

    let starts = solutions
        .iter()
        .map(|(label, sol)| StartReport {
            start: label,
            cost: sol.cost,
            violation: sol.violation,
            converged: sol.converged,
        })
        .collect();
    let best = if solutions.iter().any(|(_, s)| s.converged) {
        solutions
            .into_iter()
            .filter(|(_, s)| s.converged)
            .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
    } else {
        solutions
            .into_iter()
            .min_by(|a, b| a.1.violation.total_cmp(&b.1.violation))
    }
    .expect("at least one solution")
    .1;
    Ok(NumericGroundCost {
        cost: best.cost,
        converged: best.converged,
        certificate: best,
        starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigid_body::ZeroDrift;
    use approx::assert_relative_eq;

    fn small(intervals: usize) -> TranscriptionSettings {
        TranscriptionSettings {
            intervals,
            substeps: 2,
            ..Default::default()
        }
    }

    #[test]
    fn settings_validation() {
        let body = InertiaBody::new([1.0, 2.0, 3.0]).unwrap();
        let x = StateVec::zeros();
        let bad = [
            TranscriptionSettings {
                intervals: 1,
                ..Default::default()
            },
            TranscriptionSettings {
                penalties: vec![10.0, 10.0],
                ..Default::default()
            },
            TranscriptionSettings {
                penalties: vec![-1.0, 10.0],
                ..Default::default()
            },
            TranscriptionSettings {
                penalties: vec![],
                ..Default::default()
            },
            TranscriptionSettings {
                grad_tol: 0.0,
                ..Default::default()
            },
        ];
        for s in bad {
            assert!(TranscriptionProblem::new(&body, x, x, 1.0, s).is_err());
        }
        assert!(TranscriptionProblem::new(&body, x, x, 0.0, Default::default()).is_err());
    }

    #[test]
    fn zero_gradient_at_global_minimum() {
        let x = StateVec::new(0.5, -1.0, 2.0);
        let p = TranscriptionProblem::new(&ZeroDrift, x, x, 1.0, small(8)).unwrap();
        let g = adjoint_gradient(&p, &[StateVec::zeros(); 8], 1e3).unwrap();
        assert!(g.iter().all(|v| *v == StateVec::zeros()));
    }

    #[test]
    fn energy_gradient_without_penalty() {
        let body = InertiaBody::new([1.0, 2.0, 3.0]).unwrap();
        let p = TranscriptionProblem::new(
            &body,
            StateVec::new(1.0, 0.0, 0.0),
            StateVec::zeros(),
            2.0,
            small(8),
        )
        .unwrap();
        let controls: Vec<_> = (0..8)
            .map(|k| StateVec::new(k as f64, -1.0, 0.5 * k as f64))
            .collect();
        let g = adjoint_gradient(&p, &controls, 0.0).unwrap();
        for (gk, uk) in g.iter().zip(&controls) {
            assert_eq!(*gk, uk * p.interval());
        }
    }

    #[test]
    fn wrong_table_length_is_rejected() {
        let p = TranscriptionProblem::new(
            &ZeroDrift,
            StateVec::zeros(),
            StateVec::zeros(),
            1.0,
            small(8),
        )
        .unwrap();
        assert!(matches!(
            solve(&p, InitialGuess::Table(vec![StateVec::zeros(); 3])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn integrator_recovers_classical_cost() {
        let x0 = StateVec::new(1.0, 2.0, 3.0);
        let p =
            TranscriptionProblem::new(&ZeroDrift, x0, StateVec::zeros(), 2.0, small(20)).unwrap();
        let sol = solve(&p, InitialGuess::Zero).unwrap();
        assert!(sol.converged, "{:?}", sol.stages);
        assert_relative_eq!(sol.cost, 3.5, max_relative = 1e-3);
        for u in &sol.controls {
            assert!((u + x0 / 2.0).amax() < 1e-3);
        }
        assert!(sol
            .stages
            .windows(2)
            .all(|w| w[1].violation <= w[0].violation * (1.0 + 1e-9)));
    }

    #[test]
    fn equilibrium_endpoints_cost_nothing() {
        let body = InertiaBody::new([1.0, 2.0, 3.0]).unwrap();
        let x = StateVec::new(1.0, 0.0, 0.0);
        let r = ground_cost_numeric(&body, &x, &x, 2.0, &small(10)).unwrap();
        assert!(r.converged);
        assert!(r.cost < 1e-12, "cost {}", r.cost);
    }
}
