//! Scenario files and the experiment runners behind the `gomt` binary.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! task = "steer"              # steer | ground-cost | transport | ensemble
//! horizon = 2.0
//! seed = 7                    # sampled endpoints only
//! output_dir = "out/reference_steer"
//!
//! [body]
//! inertia = [1.0, 2.0, 3.0]
//!
//! [endpoints]
//! mode = "fixed"              # or "sampled" with [endpoints.source] / [endpoints.target]
//! x0 = [1.0, 0.0, 0.5]
//! x_f = [0.0, 1.0, 0.0]
//!
//! [settings]
//! policy = "feasible-ustar"
//! step = 1e-3
//! ```
//!
//! Unknown keys are rejected.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::ground_cost::{
    cost_classical, cost_lower_bound, cost_norminv, cost_upper_bound, sandwich_violation,
    CostEvaluator, CostKind, GroundCostSpec,
};
use crate::rigid_body::{is_translated_norm_invariant, InertiaBody, NormInvarianceCheck};
use crate::steering::{integrate, two_phase_policy, PolicyKind, SteeringPolicy, Trajectory};
use crate::trajopt::{ground_cost_numeric, StartReport, TranscriptionSettings};
use crate::transport::{
    sample_gaussian, second_moment, solve_exact, solve_sinkhorn, steer_pairs, write_coupling_csv,
    write_measure_csv, Coupling, CouplingSummary, DiscreteMeasure, GaussianSpec, SinkhornSettings,
};
use crate::{Error, Result, StateVec};

/// Output directory used when neither the command line, the environment,
/// nor the scenario names one.
pub const DEFAULT_OUTPUT_DIR: &str = "out";

/// Environment variable that overrides the scenario's output directory.
pub const OUTPUT_DIR_ENV: &str = "GOMT_OUTPUT_DIR";

/// Trajectory CSV header.
pub const TRAJECTORY_HEADER: &str = "t,x1,x2,x3,u1,u2,u3,znorm,cost";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Steer,
    GroundCost,
    Transport,
    Ensemble,
}

/// Coordinates in which endpoints are written.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// The state `x = J ⊙ ω` directly.
    #[default]
    State,
    /// Angular velocity `ω`, mapped through the inertia before use.
    AngularVelocity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub inertia: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub mean: [f64; 3],
    /// Full covariance, row by row. Mutually exclusive with `variances`.
    #[serde(default)]
    pub covariance: Option<[[f64; 3]; 3]>,
    /// Diagonal covariance.
    #[serde(default)]
    pub variances: Option<[f64; 3]>,
    pub count: usize,
    /// Overrides the stream seed of this side.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl GaussianConfig {
    pub fn spec(&self) -> Result<GaussianSpec> {
        let mean = StateVec::from(self.mean);
        match (&self.covariance, &self.variances) {
            (Some(rows), None) => GaussianSpec::new(mean, Matrix3::from_fn(|i, j| rows[i][j])),
            (None, Some(diag)) => GaussianSpec::diagonal(mean, *diag),
            _ => Err(Error::Config(
                "give exactly one of `covariance` or `variances`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Endpoints {
    Fixed {
        x0: [f64; 3],
        x_f: [f64; 3],
        #[serde(default)]
        frame: Frame,
    },
    Sampled {
        source: GaussianConfig,
        target: GaussianConfig,
        #[serde(default)]
        frame: Frame,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSettings {
    /// Steering law (`steer`, `ensemble`).
    #[serde(default)]
    pub policy: Option<PolicyKind>,
    /// RK4 step of closed-loop runs.
    #[serde(default)]
    pub step: Option<f64>,
    /// Ground cost (`transport`, `ensemble`).
    #[serde(default)]
    pub cost: Option<CostKind>,
    #[serde(default)]
    pub solver: Option<SolverKind>,
    #[serde(default)]
    pub sinkhorn: Option<SinkhornSettings>,
    #[serde(default)]
    pub transcription: Option<TranscriptionSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub task: Task,
    pub horizon: f64,
    pub body: BodyConfig,
    pub endpoints: Endpoints,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub settings: TaskSettings,
}

pub const DEFAULT_STEP: f64 = 1e-3;

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        self.body()?;
        if let Some(step) = self.settings.step {
            if !(step > 0.0) || step > self.horizon {
                return Err(Error::Config(format!(
                    "step must lie in (0, horizon], got {step}"
                )));
            }
        }
        if let Some(t) = &self.settings.transcription {
            t.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let sampled = matches!(self.endpoints, Endpoints::Sampled { .. });
        let missing =
            |what: &str| Error::Config(format!("task {:?} needs settings.{what}", self.task));
        match self.task {
            Task::Steer | Task::GroundCost if sampled => {
                return Err(Error::Config(format!(
                    "task {:?} needs fixed endpoints",
                    self.task
                )));
            }
            Task::Transport | Task::Ensemble if !sampled => {
                return Err(Error::Config(format!(
                    "task {:?} needs sampled endpoints",
                    self.task
                )));
            }
            _ => {}
        }
        match self.task {
            Task::Steer if self.settings.policy.is_none() => return Err(missing("policy")),
            Task::Transport if self.settings.cost.is_none() => return Err(missing("cost")),
            Task::Ensemble if self.settings.cost.is_none() => return Err(missing("cost")),
            Task::Ensemble if self.settings.policy.is_none() => return Err(missing("policy")),
            _ => {}
        }
        if matches!(self.settings.policy, Some(PolicyKind::OpenLoop)) {
            return Err(Error::Config(
                "open-loop policies cannot be configured from a scenario".into(),
            ));
        }
        if let Endpoints::Sampled { source, target, .. } = &self.endpoints {
            for side in [source, target] {
                if side.count == 0 {
                    return Err(Error::Config("sample counts must be positive".into()));
                }
                side.spec()?;
            }
        }
        Ok(())
    }

    pub fn body(&self) -> Result<InertiaBody> {
        InertiaBody::new(self.body.inertia)
    }

    pub fn step(&self) -> f64 {
        self.settings.step.unwrap_or(DEFAULT_STEP)
    }

    pub fn transcription(&self) -> TranscriptionSettings {
        self.settings.transcription.clone().unwrap_or_default()
    }

    /// Fixed endpoints in state coordinates.
    pub fn fixed_endpoints(&self) -> Result<(StateVec, StateVec)> {
        let body = self.body()?;
        match &self.endpoints {
            Endpoints::Fixed { x0, x_f, frame } => {
                let (x0, x_f) = (StateVec::from(*x0), StateVec::from(*x_f));
                Ok(match frame {
                    Frame::State => (x0, x_f),
                    Frame::AngularVelocity => (body.momentum(&x0), body.momentum(&x_f)),
                })
            }
            Endpoints::Sampled { .. } => Err(Error::Config("fixed endpoints required".into())),
        }
    }

    /// Source and target particle measures in state coordinates. The source
    /// stream uses `seed`, the target stream `seed + 1`, unless a side names
    /// its own seed.
    pub fn sampled_endpoints(&self) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        let body = self.body()?;
        let Endpoints::Sampled {
            source,
            target,
            frame,
        } = &self.endpoints
        else {
            return Err(Error::Config("sampled endpoints required".into()));
        };
        let seed = self
            .seed
            .ok_or_else(|| Error::Config("sampled endpoints need a seed".into()))?;
        let draw = |side: &GaussianConfig, default_seed: u64| -> Result<DiscreteMeasure> {
            let cloud =
                sample_gaussian(&side.spec()?, side.count, side.seed.unwrap_or(default_seed))?;
            match frame {
                Frame::State => Ok(cloud),
                Frame::AngularVelocity => crate::transport::pushforward_inertia(&cloud, &body),
            }
        };
        Ok((draw(source, seed)?, draw(target, seed.wrapping_add(1))?))
    }

    /// The ground-cost spec used by `transport` and `ensemble`.
    pub fn cost_spec(&self) -> Result<GroundCostSpec> {
        let kind = self
            .settings
            .cost
            .ok_or_else(|| Error::Config("settings.cost is required".into()))?;
        let body = match kind {
            CostKind::Classical => None,
            _ => Some(self.body()?),
        };
        GroundCostSpec::new(kind, self.horizon, body)?
            .with_settings(self.transcription())?
            .with_step(self.step())
    }
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = Some(seed);
        }
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = Some(dir.clone());
        }
    }

    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

/// Process exit status for an error: `2` configuration, `3` divergence,
/// `4` marginal mismatch, `1` anything else.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::InvalidInertia(_)
        | Error::InvalidCovariance => 2,
        Error::Divergence { .. } | Error::PairFailed { .. } => 3,
        Error::MarginalMismatch { .. } => 4,
        _ => 1,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn write_with<F>(dir: &Path, name: &str, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(dir, name)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `t,x1,x2,x3,u1,u2,u3,znorm,cost` rows.
pub fn write_trajectory_csv<W: Write>(trajectory: &Trajectory<3>, mut w: W) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for k in 0..trajectory.len() {
        let x = trajectory.states[k];
        let u = trajectory.controls[k];
        let z = (x - trajectory.target).norm();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            trajectory.times[k], x[0], x[1], x[2], u[0], u[1], u[2], z, trajectory.running_cost[k]
        )?;
    }
    Ok(())
}

fn vec3(v: &StateVec) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteerSummary {
    pub policy: PolicyKind,
    pub horizon: f64,
    pub step: f64,
    pub x0: [f64; 3],
    pub x_f: [f64; 3],
    pub terminal_error: f64,
    pub total_cost: f64,
    /// `max_k |‖z(t_k)‖ - (1 - t_k/t_f)‖z0‖|` for the radial laws.
    pub norm_law_deviation: Option<f64>,
}

fn build_policy(
    body: &InertiaBody,
    kind: PolicyKind,
    x0: &StateVec,
    x_f: &StateVec,
    t_f: f64,
    step: f64,
) -> Result<SteeringPolicy<3>> {
    match kind {
        PolicyKind::FeasibleUstar => SteeringPolicy::feasible(body, x0, x_f, t_f),
        PolicyKind::NorminvUstarstar => SteeringPolicy::norm_invariant(x0, x_f, t_f),
        PolicyKind::TwoPhase => two_phase_policy(body, x0, x_f, t_f, step),
        PolicyKind::OpenLoop => Err(Error::Config(
            "open-loop policies cannot be configured from a scenario".into(),
        )),
    }
}

/// Deviation of `‖z(t)‖` from the linear decay law along a trajectory.
pub fn norm_law_deviation(trajectory: &Trajectory<3>, horizon: f64) -> f64 {
    let z0 = (trajectory.states[0] - trajectory.target).norm();
    trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .map(|(t, x)| ((x - trajectory.target).norm() - (1.0 - t / horizon) * z0).abs())
        .fold(0.0, f64::max)
}

/// Integrates the configured policy between the fixed endpoints and writes
/// `trajectory.csv` and `steer.json`.
pub fn run_steer(scenario: &Scenario, out: &Path) -> Result<SteerSummary> {
    let body = scenario.body()?;
    let (x0, x_f) = scenario.fixed_endpoints()?;
    let kind = scenario
        .settings
        .policy
        .ok_or_else(|| Error::Config("settings.policy is required".into()))?;
    let step = scenario.step();
    let policy = build_policy(&body, kind, &x0, &x_f, scenario.horizon, step)?;
    let traj = integrate(&body, &policy, &x0, step)?;

    let radial = matches!(
        kind,
        PolicyKind::FeasibleUstar | PolicyKind::NorminvUstarstar
    );
    let summary = SteerSummary {
        policy: kind,
        horizon: scenario.horizon,
        step,
        x0: vec3(&x0),
        x_f: vec3(&x_f),
        terminal_error: traj.terminal_error(),
        total_cost: traj.cost(),
        norm_law_deviation: radial.then(|| norm_law_deviation(&traj, scenario.horizon)),
    };
    fs::create_dir_all(out)?;
    write_with(out, "trajectory.csv", |w| write_trajectory_csv(&traj, w))?;
    write_json(out, "steer.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// The numeric optimum matches the closed-form norm-invariant cost.
    EqualityCertified,
    /// The numeric optimum lies between the lower and upper bounds.
    Sandwiched,
    BoundViolation,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundCostSummary {
    pub x0: [f64; 3],
    pub x_f: [f64; 3],
    pub horizon: f64,
    pub classical: f64,
    /// Present when no counterexample to translated norm invariance at the
    /// target was found.
    pub norm_invariant: Option<f64>,
    pub upper_bound: f64,
    /// Trajectory-dependent bound evaluated on the `u*` run.
    pub lower_bound: f64,
    pub ustar_cost: f64,
    pub numeric_cost: f64,
    pub numeric_converged: bool,
    pub numeric_violation: f64,
    pub starts: Vec<StartReport>,
    pub verdict: Verdict,
}

/// Evaluates every closed form, bound, and the numeric oracle for the fixed
/// endpoints and writes `ground_cost.json`. Non-convergence is reported in
/// the verdict, not as an error.
pub fn run_ground_cost(scenario: &Scenario, out: &Path) -> Result<GroundCostSummary> {
    let body = scenario.body()?;
    let (x0, x_f) = scenario.fixed_endpoints()?;
    let t_f = scenario.horizon;
    let step = scenario.step();

    let invariant = is_translated_norm_invariant(&body, &x_f, &NormInvarianceCheck::default())?;
    let pair = body.affine_pair(&x_f);
    let ustar = integrate(
        &body,
        &SteeringPolicy::feasible(&body, &x0, &x_f, t_f)?,
        &x0,
        step,
    )?;
    let numeric = ground_cost_numeric(&body, &x0, &x_f, t_f, &scenario.transcription())?;

    let upper = cost_upper_bound(&x0, &x_f, t_f);
    let lower = cost_lower_bound(&x0, &x_f, t_f, &pair, &ustar);
    let norm_invariant = invariant.then(|| cost_norminv(&x0, &x_f, t_f));
    // The trajectory bound certifies only the `u*` run; the optimum is
    // bounded below by it only when the affine pair vanishes.
    let applicable_lower = if pair.a().iter().chain(pair.b().iter()).all(|v| *v == 0.0) {
        lower
    } else {
        0.0
    };
    let verdict = if !numeric.converged {
        Verdict::NotConverged
    } else if sandwich_violation(numeric.cost, applicable_lower, upper).is_some() {
        Verdict::BoundViolation
    } else if norm_invariant
        .is_some_and(|c| (numeric.cost - c).abs() <= 0.01 * c.max(f64::MIN_POSITIVE))
    {
        Verdict::EqualityCertified
    } else {
        Verdict::Sandwiched
    };
    let summary = GroundCostSummary {
        x0: vec3(&x0),
        x_f: vec3(&x_f),
        horizon: t_f,
        classical: cost_classical(&x0, &x_f, t_f),
        norm_invariant,
        upper_bound: upper,
        lower_bound: lower,
        ustar_cost: ustar.cost(),
        numeric_cost: numeric.cost,
        numeric_converged: numeric.converged,
        numeric_violation: numeric.certificate.violation,
        starts: numeric.starts,
        verdict,
    };
    fs::create_dir_all(out)?;
    write_json(out, "ground_cost.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagReport {
    pub row: usize,
    pub col: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportSummary {
    pub cost_kind: CostKind,
    pub horizon: f64,
    pub sources: usize,
    pub targets: usize,
    #[serde(flatten)]
    pub coupling: CouplingSummary,
    pub flagged_entries: Vec<FlagReport>,
    pub source_second_moment: f64,
    pub target_second_moment: f64,
}

struct TransportRun {
    coupling: Coupling,
    summary: TransportSummary,
}

fn transport_core(scenario: &Scenario, out: &Path) -> Result<TransportRun> {
    let spec = scenario.cost_spec()?;
    let (source, target) = scenario.sampled_endpoints()?;
    let costs = CostEvaluator::new(spec.clone()).matrix(source.support(), target.support())?;
    let coupling = match scenario.settings.solver.unwrap_or(SolverKind::Exact) {
        SolverKind::Exact => solve_exact(&costs, &source, &target)?,
        SolverKind::Sinkhorn => {
            let settings = scenario.settings.sinkhorn.clone().unwrap_or_default();
            solve_sinkhorn(&costs, &source, &target, &settings)?
        }
    };
    let summary = TransportSummary {
        cost_kind: spec.kind(),
        horizon: spec.horizon(),
        sources: source.len(),
        targets: target.len(),
        coupling: CouplingSummary::from(&coupling),
        flagged_entries: costs
            .flagged()
            .iter()
            .map(|f| FlagReport {
                row: f.row,
                col: f.col,
                reason: f.reason.clone(),
            })
            .collect(),
        source_second_moment: second_moment(&source),
        target_second_moment: second_moment(&target),
    };
    fs::create_dir_all(out)?;
    write_with(out, "source.csv", |w| write_measure_csv(&source, w))?;
    write_with(out, "target.csv", |w| write_measure_csv(&target, w))?;
    write_with(out, "cost_matrix.csv", |w| costs.write_csv(w))?;
    write_with(out, "coupling.csv", |w| {
        write_coupling_csv(&coupling, &costs, w)
    })?;
    Ok(TransportRun { coupling, summary })
}

/// Samples both endpoint measures, assembles the cost matrix, solves the
/// coupling, and writes the measures, matrix, coupling, and `transport.json`.
pub fn run_transport(scenario: &Scenario, out: &Path) -> Result<TransportSummary> {
    let run = transport_core(scenario, out)?;
    write_json(out, "transport.json", &run.summary)?;
    Ok(run.summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFailure {
    pub source_index: usize,
    pub target_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub policy: PolicyKind,
    pub step: f64,
    pub transport: TransportSummary,
    /// `Σ plan_ij · (trajectory cost)_ij` over the steered pairs.
    pub realized_cost: f64,
    pub transport_cost: f64,
    pub cost_ratio: f64,
    pub steered_pairs: usize,
    pub max_terminal_error: f64,
    pub terminal_mean: [f64; 3],
    pub target_mean: [f64; 3],
    pub terminal_second_moment: f64,
    pub target_second_moment: f64,
    pub failures: Vec<PairFailure>,
}

/// Solves the coupling as in [`run_transport`], steers every plan entry, and
/// writes `terminal.csv` and `ensemble.json`. Failed pairs are listed and
/// left out of the totals.
pub fn run_ensemble(scenario: &Scenario, out: &Path) -> Result<EnsembleSummary> {
    let kind = scenario
        .settings
        .policy
        .ok_or_else(|| Error::Config("settings.policy is required".into()))?;
    let spec = scenario.cost_spec()?;
    let step = scenario.step();
    let run = transport_core(scenario, out)?;

    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for outcome in steer_pairs(&run.coupling, &spec, kind, step) {
        match outcome {
            Ok(p) => pairs.push(p),
            Err(Error::PairFailed {
                source_index,
                target_index,
                reason,
            }) => failures.push(PairFailure {
                source_index,
                target_index,
                reason: reason.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let result = crate::transport::summarize_ensemble(&run.coupling, pairs)?;
    let target = run.coupling.target();
    let summary = EnsembleSummary {
        policy: kind,
        step,
        realized_cost: result.total_cost,
        transport_cost: result.transport_cost,
        cost_ratio: result.total_cost / result.transport_cost,
        steered_pairs: result.pairs.len(),
        max_terminal_error: result.max_terminal_error,
        terminal_mean: vec3(&result.terminal.mean()),
        target_mean: vec3(&target.mean()),
        terminal_second_moment: second_moment(&result.terminal),
        target_second_moment: second_moment(target),
        failures,
        transport: run.summary,
    };
    write_with(out, "terminal.csv", |w| {
        write_measure_csv(&result.terminal, w)
    })?;
    write_json(out, "transport.json", &summary.transport)?;
    write_json(out, "ensemble.json", &summary)?;
    Ok(summary)
}

/// Result of [`run`], one variant per task.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RunSummary {
    Steer(SteerSummary),
    GroundCost(GroundCostSummary),
    Transport(TransportSummary),
    Ensemble(EnsembleSummary),
}

/// Runs the scenario's task, writing artifacts under `out`.
pub fn run(scenario: &Scenario, out: &Path) -> Result<RunSummary> {
    scenario.validate()?;
    Ok(match scenario.task {
        Task::Steer => RunSummary::Steer(run_steer(scenario, out)?),
        Task::GroundCost => RunSummary::GroundCost(run_ground_cost(scenario, out)?),
        Task::Transport => RunSummary::Transport(run_transport(scenario, out)?),
        Task::Ensemble => RunSummary::Ensemble(run_ensemble(scenario, out)?),
    })
}
