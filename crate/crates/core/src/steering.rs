//! Steering controllers and closed-loop integration.
//!
//! The radial law
//!
//! ```text
//! u*(z) = ( -‖z0‖/t_f - ⟨z, A z + b⟩/‖z‖ ) z/‖z‖
//! ```
//!
//! enforces `d‖z‖/dt = -‖z0‖/t_f` for the translated dynamics
//! `z' = f(z) + A z + b + u` whenever `⟨f(z), z⟩ = 0`, so `‖z(t)‖` decays
//! linearly and reaches zero exactly at `t_f`. With `A = 0, b = 0` it reduces
//! to the constant-magnitude law `u**`, which is the minimum-energy control
//! for translated norm-invariant drifts.
//!
//! Both laws divide by `‖z‖`. Each policy carries a terminal guard radius:
//! inside an integration interval that started outside the guard, stage
//! states that fall inside it use the limit value of the law along the
//! interval's starting direction; intervals that start inside the guard
//! hold the state with `u = -f(x)`.

use nalgebra::{Matrix3, SMatrix, SVector};

use crate::ode::{rk4_step, uniform_grid};
use crate::rigid_body::{AffinePair, Drift, InertiaBody, Reversed};
use crate::{Error, Result, StateVec};

/// Which closed-form or tabulated law a [`SteeringPolicy`] realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// `u*` with the affine correction of the target.
    FeasibleUstar,
    /// `u**`, the radial law without affine correction.
    NorminvUstarstar,
    /// Steer to the origin over the first half horizon, then replay the
    /// time-reversed steering from the origin to the target.
    TwoPhase,
    /// A tabulated control signal.
    OpenLoop,
}

/// The radial feedback law around `target` over `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialLaw<const D: usize> {
    target: SVector<f64, D>,
    z0_norm: f64,
    horizon: f64,
    affine: Option<(SMatrix<f64, D, D>, SVector<f64, D>)>,
}

impl<const D: usize> RadialLaw<D> {
    /// `u**` steering `x0` to `target` over `horizon`.
    pub fn norm_invariant(
        x0: &SVector<f64, D>,
        target: &SVector<f64, D>,
        horizon: f64,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self {
            target: *target,
            z0_norm: (x0 - target).norm(),
            horizon,
            affine: None,
        })
    }

    /// `u*` with an explicit affine drift `A z + b`.
    pub fn with_affine(
        x0: &SVector<f64, D>,
        target: &SVector<f64, D>,
        horizon: f64,
        a: SMatrix<f64, D, D>,
        b: SVector<f64, D>,
    ) -> Result<Self> {
        let mut law = Self::norm_invariant(x0, target, horizon)?;
        law.affine = Some((a, b));
        Ok(law)
    }

    pub fn target(&self) -> &SVector<f64, D> {
        &self.target
    }

    /// The constant norm rate `k = -‖z0‖/t_f`.
    pub fn rate(&self) -> f64 {
        -self.z0_norm / self.horizon
    }

    pub fn z0_norm(&self) -> f64 {
        self.z0_norm
    }

    /// Evaluates the law at translated state `z`.
    pub fn eval(&self, z: &SVector<f64, D>) -> Result<SVector<f64, D>> {
        if self.z0_norm == 0.0 && self.affine.is_none() {
            return Ok(SVector::zeros());
        }
        let norm = z.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::SingularState);
        }
        Ok(self.eval_unchecked(z, norm))
    }

    fn eval_unchecked(&self, z: &SVector<f64, D>, norm: f64) -> SVector<f64, D> {
        let projection = match &self.affine {
            Some((a, b)) => z.dot(&(a * z + b)) / norm,
            None => 0.0,
        };
        z * ((self.rate() - projection) / norm)
    }

    /// The value approached as `z → 0` along unit direction `dir`.
    fn limit(&self, dir: &SVector<f64, D>) -> SVector<f64, D> {
        let projection = match &self.affine {
            Some((_, b)) => dir.dot(b),
            None => 0.0,
        };
        dir * (self.rate() - projection)
    }

    fn default_guard(&self) -> f64 {
        1e-8 * self.z0_norm.max(1.0)
    }
}

/// `u*(z)` for the Euler dynamics translated by `pair`.
pub fn ustar(z0: &StateVec, horizon: f64, pair: &AffinePair, z: &StateVec) -> Result<StateVec> {
    RadialLaw::with_affine(z0, &StateVec::zeros(), horizon, *pair.a(), *pair.b())?.eval(z)
}

/// `u**(z) = -(‖z0‖/t_f) z/‖z‖`.
pub fn ustarstar<const D: usize>(
    z0: &SVector<f64, D>,
    horizon: f64,
    z: &SVector<f64, D>,
) -> Result<SVector<f64, D>> {
    RadialLaw::norm_invariant(z0, &SVector::zeros(), horizon)?.eval(z)
}

/// A control signal sampled on a time grid and linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTable<const D: usize> {
    times: Vec<f64>,
    controls: Vec<SVector<f64, D>>,
}

impl<const D: usize> ControlTable<D> {
    pub fn new(times: Vec<f64>, controls: Vec<SVector<f64, D>>) -> Result<Self> {
        if times.is_empty() || times.len() != controls.len() {
            return Err(Error::InvalidArgument(format!(
                "control table needs matching nonempty columns (times {}, controls {})",
                times.len(),
                controls.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "control table times must increase".into(),
            ));
        }
        Ok(Self { times, controls })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn controls(&self) -> &[SVector<f64, D>] {
        &self.controls
    }

    /// Linear interpolation, clamped to the end values outside the grid.
    pub fn at(&self, t: f64) -> SVector<f64, D> {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            return self.controls[0];
        }
        if idx == self.times.len() {
            return self.controls[idx - 1];
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = (t - t0) / (t1 - t0);
        self.controls[idx - 1] * (1.0 - w) + self.controls[idx] * w
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Law<const D: usize> {
    Radial(RadialLaw<D>),
    TwoPhase {
        first: RadialLaw<D>,
        switch: f64,
        second: ControlTable<D>,
        intervals: usize,
    },
    OpenLoop(ControlTable<D>),
}

/// A state-feedback (or tabulated) steering law from `x0` to `target`
/// over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringPolicy<const D: usize> {
    kind: PolicyKind,
    horizon: f64,
    target: SVector<f64, D>,
    guard_eps: f64,
    law: Law<D>,
}

enum IntervalMode<'a, const D: usize> {
    Radial {
        law: &'a RadialLaw<D>,
        anchor: SVector<f64, D>,
    },
    Hold,
    Table(&'a ControlTable<D>),
}

impl SteeringPolicy<3> {
    /// `u*` for the Euler dynamics of `body`.
    pub fn feasible(
        body: &InertiaBody,
        x0: &StateVec,
        x_f: &StateVec,
        horizon: f64,
    ) -> Result<Self> {
        let pair = body.affine_pair(x_f);
        let law = RadialLaw::with_affine(x0, x_f, horizon, *pair.a(), *pair.b())?;
        Ok(Self::from_law(PolicyKind::FeasibleUstar, law))
    }
}

impl<const D: usize> SteeringPolicy<D> {
    fn from_law(kind: PolicyKind, law: RadialLaw<D>) -> Self {
        Self {
            kind,
            horizon: law.horizon,
            target: law.target,
            guard_eps: law.default_guard(),
            law: Law::Radial(law),
        }
    }

    /// `u*` for a generic drift given its affine correction at the target.
    pub fn feasible_with_affine(
        x0: &SVector<f64, D>,
        x_f: &SVector<f64, D>,
        horizon: f64,
        a: SMatrix<f64, D, D>,
        b: SVector<f64, D>,
    ) -> Result<Self> {
        Ok(Self::from_law(
            PolicyKind::FeasibleUstar,
            RadialLaw::with_affine(x0, x_f, horizon, a, b)?,
        ))
    }

    /// `u**` from `x0` to `x_f`.
    pub fn norm_invariant(
        x0: &SVector<f64, D>,
        x_f: &SVector<f64, D>,
        horizon: f64,
    ) -> Result<Self> {
        Ok(Self::from_law(
            PolicyKind::NorminvUstarstar,
            RadialLaw::norm_invariant(x0, x_f, horizon)?,
        ))
    }

    /// Replays `table` open loop. `target` is only used for reporting.
    pub fn open_loop(
        table: ControlTable<D>,
        target: &SVector<f64, D>,
        horizon: f64,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self {
            kind: PolicyKind::OpenLoop,
            horizon,
            target: *target,
            guard_eps: 0.0,
            law: Law::OpenLoop(table),
        })
    }

    /// Overrides the terminal guard radius.
    pub fn with_guard(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "guard radius must be >= 0, got {eps}"
            )));
        }
        self.guard_eps = eps;
        Ok(self)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn target(&self) -> &SVector<f64, D> {
        &self.target
    }

    pub fn guard_eps(&self) -> f64 {
        self.guard_eps
    }

    fn mode(&self, t: f64, x: &SVector<f64, D>) -> Result<IntervalMode<'_, D>> {
        let law = match &self.law {
            Law::Radial(law) => law,
            Law::TwoPhase { first, switch, .. } if t < switch - 1e-12 * self.horizon => first,
            Law::TwoPhase { second, .. } => return Ok(IntervalMode::Table(second)),
            Law::OpenLoop(table) => return Ok(IntervalMode::Table(table)),
        };
        let z = x - law.target;
        let norm = z.norm();
        if norm < self.guard_eps {
            return Ok(IntervalMode::Hold);
        }
        if norm == 0.0 {
            if law.z0_norm == 0.0 && law.affine.is_none() {
                return Ok(IntervalMode::Hold);
            }
            return Err(Error::SingularState);
        }
        Ok(IntervalMode::Radial {
            law,
            anchor: z / norm,
        })
    }

    fn control_in(
        &self,
        mode: &IntervalMode<'_, D>,
        t: f64,
        x: &SVector<f64, D>,
        fx: &SVector<f64, D>,
    ) -> SVector<f64, D> {
        match mode {
            IntervalMode::Radial { law, anchor } => {
                let z = x - law.target;
                let norm = z.norm();
                // At the law's own horizon the analytic state is exactly the
                // target, so the direction of the numerical stage state is noise.
                if norm < self.guard_eps || norm == 0.0 || t >= law.horizon * (1.0 - 1e-12) {
                    law.limit(anchor)
                } else {
                    law.eval_unchecked(&z, norm)
                }
            }
            IntervalMode::Hold => -fx,
            IntervalMode::Table(table) => table.at(t),
        }
    }

    fn grid(&self, step: f64) -> (usize, f64) {
        match &self.law {
            Law::TwoPhase { intervals, .. }
                if (self.horizon / *intervals as f64 - step).abs() <= 1e-12 * step =>
            {
                (*intervals, self.horizon / *intervals as f64)
            }
            Law::TwoPhase { .. } => {
                let (n, _) = uniform_grid(self.horizon, step);
                let n = n + n % 2;
                (n, self.horizon / n as f64)
            }
            _ => uniform_grid(self.horizon, step),
        }
    }
}

/// Builds the two-phase bounding controller for a drift with
/// `⟨f(x), x⟩ = 0`.
///
/// Phase one applies `u**` toward the origin over `[0, t_f/2]`. Phase two is
/// obtained by integrating the reversed system `y' = -f(y) + v` from `x_f`
/// to the origin under `u**` and replaying `u(t) = -v(t_f - t)` open loop.
/// The table is sampled at half the integration step that [`integrate`]
/// should later be called with, so RK4 stages land on table nodes.
pub fn two_phase_policy<const D: usize, F: Drift<D>>(
    drift: &F,
    x0: &SVector<f64, D>,
    x_f: &SVector<f64, D>,
    horizon: f64,
    step: f64,
) -> Result<SteeringPolicy<D>> {
    check_horizon(horizon)?;
    check_step(horizon, step)?;
    let half = 0.5 * horizon;
    let origin = SVector::zeros();
    let first = RadialLaw::norm_invariant(x0, &origin, half)?;

    let (n, _) = uniform_grid(horizon, step);
    let n = n + n % 2;
    let reversed_policy = SteeringPolicy::norm_invariant(x_f, &origin, half)?;
    let reversed = integrate(&Reversed(drift), &reversed_policy, x_f, half / n as f64)?;

    let mut times = Vec::with_capacity(reversed.times.len());
    let mut controls = Vec::with_capacity(reversed.times.len());
    for (s, v) in reversed.times.iter().zip(&reversed.controls).rev() {
        times.push(horizon - s);
        controls.push(-v);
    }
    let second = ControlTable::new(times, controls)?;

    let guard_eps = first.default_guard().max(reversed_policy.guard_eps);
    Ok(SteeringPolicy {
        kind: PolicyKind::TwoPhase,
        horizon,
        target: *x_f,
        guard_eps,
        law: Law::TwoPhase {
            first,
            switch: half,
            second,
            intervals: n,
        },
    })
}

/// Time-stamped states and controls of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    pub times: Vec<f64>,
    pub states: Vec<SVector<f64, D>>,
    pub controls: Vec<SVector<f64, D>>,
    /// Accumulated `∫ ½‖u‖² dt` at each node.
    pub running_cost: Vec<f64>,
    pub target: SVector<f64, D>,
}

impl<const D: usize> Trajectory<D> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_state(&self) -> &SVector<f64, D> {
        self.states
            .last()
            .expect("trajectory has at least one node")
    }

    pub fn terminal_error(&self) -> f64 {
        (self.terminal_state() - self.target).norm()
    }

    pub fn cost(&self) -> f64 {
        *self
            .running_cost
            .last()
            .expect("trajectory has at least one node")
    }

    /// `‖x(t) - x_f‖` at each node.
    pub fn distances_to_target(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|x| (x - self.target).norm())
            .collect()
    }
}

/// Total control energy of a trajectory.
pub fn policy_cost<const D: usize>(trajectory: &Trajectory<D>) -> f64 {
    trajectory.cost()
}

/// Fixed-step RK4 integration of `x' = f(x) + u` under `policy`, starting at
/// `x0`. The grid is uniform with the largest step not exceeding `step` that
/// divides the horizon. The running cost is integrated with the trapezoidal
/// rule using one-sided control values at each interval's end points.
pub fn integrate<const D: usize, F: Drift<D> + ?Sized>(
    drift: &F,
    policy: &SteeringPolicy<D>,
    x0: &SVector<f64, D>,
    step: f64,
) -> Result<Trajectory<D>> {
    check_step(policy.horizon, step)?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "initial state must be finite".into(),
        ));
    }
    let (n, h) = policy.grid(step);

    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n + 1);
    let mut running_cost = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(*x0);
    running_cost.push(0.0);

    let mut x = *x0;
    let mut cost = 0.0;
    let mut last_control = SVector::zeros();
    for k in 0..n {
        let t = k as f64 * h;
        let t_next = if k + 1 == n {
            policy.horizon
        } else {
            (k + 1) as f64 * h
        };
        let mode = policy.mode(t, &x)?;
        let u_left = policy.control_in(&mode, t, &x, &drift.eval(&x));
        let next = rk4_step(t, &x, t_next - t, |s, y| {
            let fy = drift.eval(y);
            fy + policy.control_in(&mode, s, y, &fy)
        });
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t_next });
        }
        let u_right = policy.control_in(&mode, t_next, &next, &drift.eval(&next));
        cost += 0.25 * (t_next - t) * (u_left.norm_squared() + u_right.norm_squared());

        controls.push(u_left);
        times.push(t_next);
        states.push(next);
        running_cost.push(cost);
        last_control = u_right;
        x = next;
    }
    controls.push(last_control);

    Ok(Trajectory {
        times,
        states,
        controls,
        running_cost,
        target: policy.target,
    })
}

/// Change of control variable between the weighted Lagrangian `½ uᵀ R u`
/// and the unweighted `½ vᵀ v`, with `v = R^{1/2} u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlWeight {
    sqrt: Matrix3<f64>,
    inv_sqrt: Matrix3<f64>,
}

impl ControlWeight {
    pub fn new(weight: &Matrix3<f64>) -> Result<Self> {
        let scale = weight.amax().max(f64::MIN_POSITIVE);
        if weight.iter().any(|v| !v.is_finite())
            || (weight - weight.transpose()).amax() > 1e-12 * scale
        {
            return Err(Error::InvalidWeight);
        }
        let eig = nalgebra::SymmetricEigen::new(0.5 * (weight + weight.transpose()));
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidWeight);
        }
        let q = eig.eigenvectors;
        let sqrt_diag = Matrix3::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let inv_diag = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        Ok(Self {
            sqrt: q * sqrt_diag * q.transpose(),
            inv_sqrt: q * inv_diag * q.transpose(),
        })
    }

    /// Maps a weighted-problem control path `u` to the unweighted `v = R^{1/2} u`.
    pub fn to_unweighted(&self, path: &[StateVec]) -> Vec<StateVec> {
        path.iter().map(|u| self.sqrt * u).collect()
    }

    /// Inverse of [`ControlWeight::to_unweighted`].
    pub fn to_weighted(&self, path: &[StateVec]) -> Vec<StateVec> {
        path.iter().map(|v| self.inv_sqrt * v).collect()
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    Ok(())
}

fn check_step(horizon: f64, step: f64) -> Result<()> {
    if !(step > 0.0) || step > horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "step must lie in (0, horizon], got {step} for horizon {horizon}"
        )));
    }
    Ok(())
}
