//! Ground costs `c(x0, x_f)` for the coupling program and cost-matrix assembly.

use std::collections::HashMap;
use std::io::Write;
use std::sync::RwLock;

use rayon::prelude::*;

use crate::rigid_body::{AffinePair, InertiaBody};
use crate::steering::{integrate, SteeringPolicy, Trajectory};
use crate::trajopt::{ground_cost_numeric, TranscriptionSettings};
use crate::{Error, Result, StateVec};

/// Slack allowed when checking a numeric cost against its bounds.
pub const SANDWICH_TOL: f64 = 1e-3;

/// Default RK4 step for the closed-loop run behind [`CostKind::EulerBounded`].
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// `‖x0 - x_f‖² / (2 t_f)` for the drift-free integrator.
    Classical,
    /// Same value as `Classical`, for translated norm-invariant drifts.
    NormInvariant,
    /// Direct-transcription optimum under the Euler drift.
    EulerNumeric,
    /// The cheaper of the measured `u*` cost and the two-phase bound.
    EulerBounded,
}

impl CostKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CostKind::Classical => "classical",
            CostKind::NormInvariant => "norm-invariant",
            CostKind::EulerNumeric => "euler-numeric",
            CostKind::EulerBounded => "euler-bounded",
        }
    }

    pub fn needs_body(&self) -> bool {
        matches!(self, CostKind::EulerNumeric | CostKind::EulerBounded)
    }
}

impl std::fmt::Display for CostKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundCostSpec {
    kind: CostKind,
    horizon: f64,
    body: Option<InertiaBody>,
    settings: TranscriptionSettings,
    step: f64,
}

impl GroundCostSpec {
    pub fn new(kind: CostKind, horizon: f64, body: Option<InertiaBody>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if kind.needs_body() && body.is_none() {
            return Err(Error::InvalidArgument(format!(
                "cost kind {kind} requires a body"
            )));
        }
        Ok(Self {
            kind,
            horizon,
            body,
            settings: TranscriptionSettings::default(),
            step: DEFAULT_STEP,
        })
    }

    pub fn classical(horizon: f64) -> Result<Self> {
        Self::new(CostKind::Classical, horizon, None)
    }

    pub fn norm_invariant(horizon: f64, body: Option<InertiaBody>) -> Result<Self> {
        Self::new(CostKind::NormInvariant, horizon, body)
    }

    pub fn euler_numeric(body: InertiaBody, horizon: f64) -> Result<Self> {
        Self::new(CostKind::EulerNumeric, horizon, Some(body))
    }

    pub fn euler_bounded(body: InertiaBody, horizon: f64) -> Result<Self> {
        Self::new(CostKind::EulerBounded, horizon, Some(body))
    }

    pub fn with_settings(mut self, settings: TranscriptionSettings) -> Result<Self> {
        settings.validate()?;
        self.settings = settings;
        Ok(self)
    }

    pub fn with_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step must be positive, got {step}"
            )));
        }
        self.step = step;
        Ok(self)
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn body(&self) -> Option<&InertiaBody> {
        self.body.as_ref()
    }

    pub fn settings(&self) -> &TranscriptionSettings {
        &self.settings
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Cost of one pair, with a flag when a numeric entry failed to converge
    /// or left its bounds.
    pub fn evaluate(&self, x0: &StateVec, x_f: &StateVec) -> Result<CostEntry> {
        let t_f = self.horizon;
        match self.kind {
            CostKind::Classical => Ok(CostEntry::exact(cost_classical(x0, x_f, t_f))),
            CostKind::NormInvariant => Ok(CostEntry::exact(cost_norminv(x0, x_f, t_f))),
            CostKind::EulerNumeric => {
                let body = self.body.as_ref().expect("validated at construction");
                let numeric = ground_cost_numeric(body, x0, x_f, t_f, &self.settings)?;
                let upper = cost_upper_bound(x0, x_f, t_f);
                let lower = applicable_lower_bound(body, x0, x_f, t_f);
                let flag = if !numeric.converged {
                    Some(format!(
                        "not converged (violation {:e})",
                        numeric.certificate.violation
                    ))
                } else {
                    sandwich_violation(numeric.cost, lower, upper)
                };
                Ok(CostEntry {
                    cost: numeric.cost.max(0.0),
                    flag,
                })
            }
            CostKind::EulerBounded => {
                let body = self.body.as_ref().expect("validated at construction");
                let upper = cost_upper_bound(x0, x_f, t_f);
                let policy = SteeringPolicy::feasible(body, x0, x_f, t_f)?;
                let cost = match integrate(body, &policy, x0, self.step) {
                    Ok(traj) => traj.cost().min(upper),
                    Err(Error::Divergence { .. }) => upper,
                    Err(e) => return Err(e),
                };
                Ok(CostEntry::exact(cost))
            }
        }
    }
}

/// `Some(reason)` when `cost` falls outside `[lower, upper]` by more than
/// [`SANDWICH_TOL`] (relative to the bound for large costs).
pub fn sandwich_violation(cost: f64, lower: f64, upper: f64) -> Option<String> {
    let slack = |bound: f64| SANDWICH_TOL * bound.abs().max(1.0);
    if cost > upper + slack(upper) {
        Some(format!("cost {cost} above upper bound {upper}"))
    } else if cost < lower - slack(lower) {
        Some(format!("cost {cost} below lower bound {lower}"))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostEntry {
    pub cost: f64,
    pub flag: Option<String>,
}

impl CostEntry {
    fn exact(cost: f64) -> Self {
        Self { cost, flag: None }
    }
}

/// `‖x0 - x_f‖² / (2 t_f)`.
pub fn cost_classical(x0: &StateVec, x_f: &StateVec, t_f: f64) -> f64 {
    (x0 - x_f).norm_squared() / (2.0 * t_f)
}

/// Optimal cost under a translated norm-invariant drift. It coincides with
/// the drift-free value.
pub fn cost_norminv(x0: &StateVec, x_f: &StateVec, t_f: f64) -> f64 {
    cost_classical(x0, x_f, t_f)
}

/// Cost of the two-phase controller, `(‖x0‖² + ‖x_f‖²) / t_f`.
pub fn cost_upper_bound(x0: &StateVec, x_f: &StateVec, t_f: f64) -> f64 {
    x0.norm_squared() / t_f + x_f.norm_squared() / t_f
}

/// `(1/2t_f) · max(0, ‖z0‖ - t_f‖b‖ - ∫‖A z̃‖ dt)²` along `trajectory`
/// (states in `x` coordinates). The integral uses the trapezoidal rule.
///
/// This bounds the energy of any control realizing that particular state
/// path; it is not a bound on the optimal cost unless `A = 0`.
pub fn cost_lower_bound(
    x0: &StateVec,
    x_f: &StateVec,
    t_f: f64,
    pair: &AffinePair,
    trajectory: &Trajectory<3>,
) -> f64 {
    let a = pair.a();
    let drift_norms: Vec<f64> = trajectory
        .states
        .iter()
        .map(|x| (a * (x - x_f)).norm())
        .collect();
    let integral: f64 = trajectory
        .times
        .windows(2)
        .zip(drift_norms.windows(2))
        .map(|(t, n)| 0.5 * (t[1] - t[0]) * (n[0] + n[1]))
        .sum();
    let inner = (x0 - x_f).norm() - t_f * pair.b().norm() - integral;
    inner.max(0.0).powi(2) / (2.0 * t_f)
}

/// The trajectory-independent part of the lower bound: `‖z0‖²/(2 t_f)` when
/// the target's affine pair vanishes, `0` otherwise.
pub fn applicable_lower_bound(body: &InertiaBody, x0: &StateVec, x_f: &StateVec, t_f: f64) -> f64 {
    let pair = body.affine_pair(x_f);
    if pair.a().iter().all(|v| *v == 0.0) && pair.b().iter().all(|v| *v == 0.0) {
        cost_norminv(x0, x_f, t_f)
    } else {
        0.0
    }
}

/// An entry flagged during matrix assembly.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FlaggedEntry {
    pub row: usize,
    pub col: usize,
    pub reason: String,
}

/// Dense row-major matrix of ground costs between two supports.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    kind: String,
    horizon: f64,
    flagged: Vec<FlaggedEntry>,
}

impl CostMatrix {
    /// A matrix from explicit entries, labelled `kind`.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
        kind: &str,
        horizon: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(
                "cost matrix must be nonempty".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                found: entries.len().to_string(),
            });
        }
        if let Some(bad) = entries.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cost entries must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            kind: kind.to_string(),
            horizon,
            flagged: Vec::new(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("ragged cost matrix".into()));
        }
        Self::from_entries(m, n, rows.concat(), "custom", f64::NAN)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn flagged(&self) -> &[FlaggedEntry] {
        &self.flagged
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    pub fn median(&self) -> f64 {
        let mut sorted = self.entries.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        }
    }

    /// CSV: a `m,n,kind,t_f` header, its values, then one line per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "m,n,kind,t_f")?;
        writeln!(
            w,
            "{},{},{},{}",
            self.rows, self.cols, self.kind, self.horizon
        )?;
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

type PairKey = [u64; 6];

fn pair_key(x0: &StateVec, x_f: &StateVec) -> PairKey {
    [
        x0[0].to_bits(),
        x0[1].to_bits(),
        x0[2].to_bits(),
        x_f[0].to_bits(),
        x_f[1].to_bits(),
        x_f[2].to_bits(),
    ]
}

/// Evaluates a [`GroundCostSpec`], memoizing the expensive kinds on the
/// exact bit patterns of the endpoints.
#[derive(Debug)]
pub struct CostEvaluator {
    spec: GroundCostSpec,
    cache: RwLock<HashMap<PairKey, CostEntry>>,
}

impl CostEvaluator {
    pub fn new(spec: GroundCostSpec) -> Self {
        Self {
            spec,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &GroundCostSpec {
        &self.spec
    }

    pub fn cached(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    pub fn evaluate(&self, x0: &StateVec, x_f: &StateVec) -> Result<CostEntry> {
        if !self.spec.kind.needs_body() {
            return self.spec.evaluate(x0, x_f);
        }
        let key = pair_key(x0, x_f);
        if let Some(hit) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let entry = self.spec.evaluate(x0, x_f)?;
        self.cache
            .write()
            .expect("cache lock")
            .insert(key, entry.clone());
        Ok(entry)
    }

    /// All source-target costs, evaluated in parallel.
    pub fn matrix(&self, sources: &[StateVec], targets: &[StateVec]) -> Result<CostMatrix> {
        if sources.is_empty() || targets.is_empty() {
            return Err(Error::InvalidArgument(
                "cost matrix needs nonempty supports".into(),
            ));
        }
        let n = targets.len();
        let entries: Vec<CostEntry> = (0..sources.len() * n)
            .into_par_iter()
            .map(|k| self.evaluate(&sources[k / n], &targets[k % n]))
            .collect::<Result<_>>()?;
        let flagged = entries
            .iter()
            .enumerate()
            .filter_map(|(k, e)| {
                e.flag.as_ref().map(|reason| FlaggedEntry {
                    row: k / n,
                    col: k % n,
                    reason: reason.clone(),
                })
            })
            .collect();
        let mut matrix = CostMatrix::from_entries(
            sources.len(),
            n,
            entries.into_iter().map(|e| e.cost).collect(),
            self.spec.kind.as_str(),
            self.spec.horizon,
        )?;
        matrix.flagged = flagged;
        Ok(matrix)
    }
}

/// Cost matrix of `spec` between two supports.
pub fn cost_matrix(
    spec: &GroundCostSpec,
    sources: &[StateVec],
    targets: &[StateVec],
) -> Result<CostMatrix> {
    CostEvaluator::new(spec.clone()).matrix(sources, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigid_body::InertiaBody;
    use crate::steering::{integrate, SteeringPolicy};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_pair() -> (InertiaBody, StateVec, StateVec, f64) {
        (
            InertiaBody::new([1.0, 2.0, 3.0]).unwrap(),
            StateVec::new(1.0, 0.0, 0.5),
            StateVec::new(0.0, 1.0, 0.0),
            2.0,
        )
    }

    #[test]
    fn classical_examples() {
        let (_, x0, xf, tf) = reference_pair();
        assert_eq!(cost_classical(&x0, &x0, tf), 0.0);
        assert_relative_eq!(cost_classical(&x0, &xf, tf), 0.5625, epsilon = 1e-15);
    }

    #[test]
    fn norminv_examples() {
        let x0 = StateVec::new(1.0, 0.0, 0.0);
        assert_relative_eq!(
            cost_norminv(&x0, &StateVec::zeros(), 2.0),
            0.25,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            cost_norminv(&x0, &StateVec::zeros(), 4.0),
            0.5 * cost_norminv(&x0, &StateVec::zeros(), 2.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn upper_bound_examples() {
        let (_, x0, xf, tf) = reference_pair();
        assert_relative_eq!(cost_upper_bound(&x0, &xf, tf), 1.125, epsilon = 1e-15);
        assert_eq!(
            cost_upper_bound(&StateVec::zeros(), &StateVec::zeros(), tf),
            0.0
        );
    }

    #[test]
    fn lower_bound_with_vanishing_pair_is_the_optimum() {
        let body = InertiaBody::new([1.0, 2.0, 3.0]).unwrap();
        let x0 = StateVec::new(1.0, 0.0, 0.5);
        let xf = StateVec::zeros();
        let pair = body.affine_pair(&xf);
        let policy = SteeringPolicy::norm_invariant(&x0, &xf, 2.0).unwrap();
        let traj = integrate(&body, &policy, &x0, 1e-3).unwrap();
        let lb = cost_lower_bound(&x0, &xf, 2.0, &pair, &traj);
        assert_relative_eq!(lb, 0.3125, epsilon = 1e-15);
        assert!(traj.cost() >= lb * (1.0 - 1e-6));
    }

    #[test]
    fn lower_bound_clamps_to_zero() {
        // ‖z0‖ is far below t_f ‖b‖.
        let body = InertiaBody::new([1.0, 2.0, 3.0]).unwrap();
        let xf = StateVec::new(1.0, 1.0, 1.0);
        let x0 = xf + StateVec::new(1e-3, 0.0, 0.0);
        let pair = body.affine_pair(&xf);
        assert!(pair.b().norm() * 2.0 > 1e-3);
        let policy = SteeringPolicy::feasible(&body, &x0, &xf, 2.0).unwrap();
        let traj = integrate(&body, &policy, &x0, 1e-3).unwrap();
        assert_eq!(cost_lower_bound(&x0, &xf, 2.0, &pair, &traj), 0.0);
    }

    #[test]
    fn spec_requires_body_for_euler_kinds() {
        assert!(GroundCostSpec::new(CostKind::EulerNumeric, 1.0, None).is_err());
        assert!(GroundCostSpec::new(CostKind::EulerBounded, 1.0, None).is_err());
        assert!(GroundCostSpec::classical(0.0).is_err());
        assert!(GroundCostSpec::classical(1.0)
            .unwrap()
            .with_step(-1.0)
            .is_err());
    }

    #[test]
    fn classical_matrix_on_basis() {
        let e = [StateVec::x(), StateVec::y()];
        let m = cost_matrix(&GroundCostSpec::classical(1.0).unwrap(), &e, &e).unwrap();
        assert_eq!(m.entries(), &[0.0, 1.0, 1.0, 0.0]);
        let single = cost_matrix(
            &GroundCostSpec::norm_invariant(1.0, None).unwrap(),
            &e[..1],
            &e[..1],
        )
        .unwrap();
        assert_eq!(single.entries(), &[0.0]);
    }

    #[test]
    fn euler_numeric_reference_entry_is_bounded() {
        let (body, x0, xf, tf) = reference_pair();
        let spec = GroundCostSpec::euler_numeric(body, tf).unwrap();
        let m = cost_matrix(&spec, &[x0], &[xf]).unwrap();
        assert!(m.get(0, 0) <= 1.125);
        assert!(m.flagged().is_empty(), "{:?}", m.flagged());
    }

    #[test]
    fn euler_bounded_is_at_most_the_upper_bound() {
        let (body, x0, xf, tf) = reference_pair();
        let spec = GroundCostSpec::euler_bounded(body, tf).unwrap();
        let entry = spec.evaluate(&x0, &xf).unwrap();
        assert!(entry.cost <= 1.125);
        let policy = SteeringPolicy::feasible(&body, &x0, &xf, tf).unwrap();
        let ustar = integrate(&body, &policy, &x0, DEFAULT_STEP).unwrap().cost();
        assert_eq!(entry.cost, ustar.min(1.125));
    }

    #[test]
    fn evaluator_caches_numeric_entries() {
        let (body, x0, xf, tf) = reference_pair();
        let spec = GroundCostSpec::euler_bounded(body, tf).unwrap();
        let eval = CostEvaluator::new(spec);
        let a = eval.evaluate(&x0, &xf).unwrap();
        let b = eval.evaluate(&x0, &xf).unwrap();
        assert_eq!(a, b);
        assert_eq!(eval.cached(), 1);
        let m = eval.matrix(&[x0, xf], &[x0, xf]).unwrap();
        assert_eq!(eval.cached(), 4);
        assert_eq!(m.get(0, 1), a.cost);
    }

    #[test]
    fn sandwich_flags() {
        assert!(sandwich_violation(0.5, 0.0, 1.0).is_none());
        assert!(sandwich_violation(1.1, 0.0, 1.0).is_some());
        assert!(sandwich_violation(0.1, 0.5, 1.0).is_some());
    }

    #[test]
    fn csv_layout() {
        let m =
            CostMatrix::from_entries(2, 2, vec![0.0, 1.0, 0.5, 0.25], "classical", 1.0).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "m,n,kind,t_f\n2,2,classical,1\n0,1\n0.5,0.25\n"
        );
    }

    #[test]
    fn matrix_rejects_bad_entries() {
        assert!(CostMatrix::from_entries(1, 2, vec![0.0], "x", 1.0).is_err());
        assert!(CostMatrix::from_entries(1, 1, vec![-1.0], "x", 1.0).is_err());
        assert!(CostMatrix::from_entries(1, 1, vec![f64::NAN], "x", 1.0).is_err());
        assert!(CostMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0]]).is_err());
    }

    #[test]
    fn median_of_entries() {
        let m = CostMatrix::from_rows(&[vec![3.0, 1.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(m.median(), 2.5);
        assert_eq!(m.max(), 4.0);
    }

    fn vec3() -> impl Strategy<Value = StateVec> {
        prop::array::uniform3(-2.0f64..2.0).prop_map(StateVec::from)
    }

    proptest! {
        #[test]
        fn classical_is_symmetric(a in vec3(), b in vec3(), tf in 0.1f64..5.0) {
            prop_assert_eq!(cost_classical(&a, &b, tf), cost_classical(&b, &a, tf));
        }

        #[test]
        fn norminv_equals_classical(a in vec3(), b in vec3(), tf in 0.1f64..5.0) {
            prop_assert_eq!(cost_norminv(&a, &b, tf), cost_classical(&a, &b, tf));
        }

        #[test]
        fn closed_forms_are_nonnegative(a in vec3(), b in vec3(), tf in 0.1f64..5.0) {
            prop_assert!(cost_classical(&a, &b, tf) >= 0.0);
            prop_assert!(cost_upper_bound(&a, &b, tf) >= 0.0);
        }

        #[test]
        fn identity_of_indiscernibles(a in vec3(), b in vec3(), tf in 0.1f64..5.0) {
            prop_assert_eq!(cost_classical(&a, &b, tf) == 0.0, a == b);
        }

        #[test]
        fn upper_bound_dominates_classical(a in vec3(), b in vec3(), tf in 0.1f64..5.0) {
            // ‖a‖² + ‖b‖² ≥ ‖a - b‖²/2, evaluated in exact terms of the inputs.
            let lhs = a.norm_squared() + b.norm_squared();
            let rhs = 0.5 * (a - b).norm_squared();
            prop_assert!(lhs >= rhs - 1e-12);
            prop_assert!(cost_upper_bound(&a, &b, tf) >= cost_classical(&a, &b, tf) - 1e-12);
        }

        #[test]
        fn matrix_matches_pointwise(
            src in prop::collection::vec(vec3(), 1..5),
            dst in prop::collection::vec(vec3(), 1..5),
            tf in 0.1f64..5.0,
        ) {
            let spec = GroundCostSpec::classical(tf).unwrap();
            let m = cost_matrix(&spec, &src, &dst).unwrap();
            for (i, a) in src.iter().enumerate() {
                for (j, b) in dst.iter().enumerate() {
                    prop_assert_eq!(m.get(i, j).to_bits(), cost_classical(a, b, tf).to_bits());
                }
            }
        }
    }
}
