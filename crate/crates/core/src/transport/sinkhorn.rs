//! Entropic regularization of the coupling program.

use nalgebra::{DMatrix, DVector};

use super::{check_balance, check_dimensions, Coupling, DiscreteMeasure, SolverInfo};
use crate::ground_cost::CostMatrix;
use crate::{Error, Result};

/// Below `LOG_DOMAIN_RATIO · median(cost)` the iteration runs on potentials.
const LOG_DOMAIN_RATIO: f64 = 0.05;

/// `ε` shrinks by this factor between warm-started stages.
const SCALING_FACTOR: f64 = 0.5;

/// Iteration cap and residual target of every stage but the last.
const STAGE_ITERS: usize = 200;
const STAGE_TOL: f64 = 1e-6;

/// At the final `ε`, a Newton step is tried once plain iterations reduce
/// the residual by less than `NEWTON_RATIO` per iteration.
const NEWTON_AFTER: usize = 10;
const NEWTON_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinkhornSettings {
    /// Regularization strength. `None` uses `0.05 · median(cost)`.
    pub epsilon: Option<f64>,
    pub max_iter: usize,
    /// Target for the L1 column-marginal residual.
    pub tol: f64,
    /// Forces the log-domain (`true`) or kernel (`false`) iteration. `None`
    /// picks the log domain when `ε < 0.05 · median(cost)`.
    pub log_domain: Option<bool>,
}

impl Default for SinkhornSettings {
    fn default() -> Self {
        Self {
            epsilon: None,
            max_iter: 10_000,
            tol: 1e-9,
            log_domain: None,
        }
    }
}

impl SinkhornSettings {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon: Some(epsilon),
            ..Self::default()
        }
    }

    /// The `ε` used for `costs`.
    pub fn resolve_epsilon(&self, costs: &CostMatrix) -> f64 {
        self.epsilon.unwrap_or_else(|| {
            let scale = if costs.median() > 0.0 {
                costs.median()
            } else if costs.max() > 0.0 {
                costs.max()
            } else {
                1.0
            };
            LOG_DOMAIN_RATIO * scale
        })
    }
}

/// Sinkhorn scaling of `exp(-C/ε)` to the prescribed marginals.
///
/// Each iteration updates the column scaling and then the row scaling, so the
/// returned plan matches the source weights up to rounding and the residual
/// sits on the target side. In the log domain `ε` is approached from
/// `max(cost)` by halving, each stage warm-started from the last; only the
/// final stage is recorded in the residual history.
pub fn solve_sinkhorn(
    costs: &CostMatrix,
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    settings: &SinkhornSettings,
) -> Result<Coupling> {
    check_dimensions(costs, source, target)?;
    check_balance(source, target)?;
    let epsilon = settings.resolve_epsilon(costs);
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(settings.tol > 0.0) || settings.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "tol and max_iter must be positive".into(),
        ));
    }
    let log_domain = settings
        .log_domain
        .unwrap_or(epsilon < LOG_DOMAIN_RATIO * costs.median());

    let run = if log_domain {
        log_sinkhorn(costs, source.weights(), target.weights(), epsilon, settings)
    } else {
        kernel_sinkhorn(costs, source.weights(), target.weights(), epsilon, settings)?
    };
    let info = SolverInfo::Sinkhorn {
        epsilon,
        iterations: run.iterations,
        log_domain,
        residual_history: run.history,
    };
    Coupling::new(run.plan, source.clone(), target.clone(), costs, info)
}

struct Run {
    plan: Vec<f64>,
    iterations: usize,
    history: Vec<f64>,
}

fn column_residual(plan: &[f64], b: &[f64]) -> f64 {
    let n = b.len();
    let mut sums = vec![0.0; n];
    for row in plan.chunks(n) {
        for (s, p) in sums.iter_mut().zip(row) {
            *s += p;
        }
    }
    sums.iter().zip(b).map(|(s, w)| (s - w).abs()).sum()
}

fn kernel_sinkhorn(
    costs: &CostMatrix,
    a: &[f64],
    b: &[f64],
    epsilon: f64,
    settings: &SinkhornSettings,
) -> Result<Run> {
    let (m, n) = (a.len(), b.len());
    let kernel: Vec<f64> = costs
        .entries()
        .iter()
        .map(|c| (-c / epsilon).exp())
        .collect();
    let underflow = Error::EpsilonTooSmall { epsilon };
    for i in 0..m {
        if a[i] > 0.0 && kernel[i * n..(i + 1) * n].iter().all(|k| *k == 0.0) {
            return Err(underflow);
        }
    }
    for j in 0..n {
        if b[j] > 0.0 && (0..m).all(|i| kernel[i * n + j] == 0.0) {
            return Err(underflow);
        }
    }

    let mut u = vec![1.0; m];
    let mut v = vec![1.0; n];
    let mut plan = vec![0.0; m * n];
    let c = costs.entries();
    let log_a: Vec<f64> = a.iter().map(|w| w.ln()).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut previous = f64::INFINITY;
    while iterations < settings.max_iter {
        for j in 0..n {
            let s: f64 = (0..m).map(|i| kernel[i * n + j] * u[i]).sum();
            v[j] = if b[j] > 0.0 { b[j] / s } else { 0.0 };
        }
        for i in 0..m {
            let s: f64 = (0..n).map(|j| kernel[i * n + j] * v[j]).sum();
            u[i] = if a[i] > 0.0 { a[i] / s } else { 0.0 };
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(underflow);
        }
        iterations += 1;
        for i in 0..m {
            for j in 0..n {
                plan[i * n + j] = u[i] * kernel[i * n + j] * v[j];
            }
        }
        let mut residual = column_residual(&plan, b);
        if iterations > NEWTON_AFTER
            && residual > settings.tol
            && residual > NEWTON_RATIO * previous
        {
            // Same polish as the log domain, on the potentials of the scalings.
            let mut f: Vec<f64> = u.iter().map(|x| epsilon * x.ln()).collect();
            let mut g: Vec<f64> = v.iter().map(|x| epsilon * x.ln()).collect();
            if let Some(r) = newton_step(
                c, a, b, &log_a, &mut f, &mut g, epsilon, &mut plan, residual,
            ) {
                residual = r;
                u.iter_mut()
                    .zip(&f)
                    .for_each(|(x, f)| *x = (f / epsilon).exp());
                v.iter_mut()
                    .zip(&g)
                    .for_each(|(x, g)| *x = (g / epsilon).exp());
            }
        }
        history.push(residual);
        previous = residual;
        if residual <= settings.tol {
            break;
        }
    }
    for (row, w) in plan.chunks_mut(n).zip(a) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|p| *p *= w / s);
        }
    }
    Ok(Run {
        plan,
        iterations,
        history,
    })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn log_sinkhorn(
    costs: &CostMatrix,
    a: &[f64],
    b: &[f64],
    epsilon: f64,
    settings: &SinkhornSettings,
) -> Run {
    let (m, n) = (a.len(), b.len());
    let c = costs.entries();
    let log_a: Vec<f64> = a.iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut plan = vec![0.0; m * n];

    let mut schedule = Vec::new();
    let mut eps = costs.max().max(epsilon);
    while eps > epsilon {
        schedule.push(eps);
        eps *= SCALING_FACTOR;
    }
    schedule.push(epsilon);

    let mut history = Vec::new();
    let mut iterations = 0;
    let last = schedule.len() - 1;
    for (stage, &eps) in schedule.iter().enumerate() {
        let (cap, tol) = if stage == last {
            (settings.max_iter, settings.tol)
        } else {
            (STAGE_ITERS, STAGE_TOL.max(settings.tol))
        };
        let mut previous = f64::INFINITY;
        for k in 0..cap {
            update_g(c, &f, &mut g, &log_b, eps);
            update_f(c, &mut f, &g, &log_a, eps);
            fill_plan(c, &f, &g, eps, &mut plan);
            let mut residual = column_residual(&plan, b);
            if stage == last
                && k >= NEWTON_AFTER
                && residual > tol
                && residual > NEWTON_RATIO * previous
            {
                if let Some(r) =
                    newton_step(c, a, b, &log_a, &mut f, &mut g, eps, &mut plan, residual)
                {
                    residual = r;
                }
            }
            if stage == last {
                iterations += 1;
                history.push(residual);
            }
            previous = residual;
            if residual <= tol {
                break;
            }
        }
    }
    // Zero-weight atoms give `-inf` potentials; their plan rows and columns are exactly zero.
    for p in &mut plan {
        if !p.is_finite() {
            *p = 0.0;
        }
    }
    // Rounding in `(f + g - c)/ε` is amplified by `1/ε`; rescale rows onto the source weights.
    for (row, w) in plan.chunks_mut(n).zip(a) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|p| *p *= w / s);
        }
    }
    Run {
        plan,
        iterations,
        history,
    }
}

fn update_g(c: &[f64], f: &[f64], g: &mut [f64], log_b: &[f64], eps: f64) {
    let n = g.len();
    for j in 0..n {
        let lse = log_sum_exp((0..f.len()).map(|i| (f[i] - c[i * n + j]) / eps));
        g[j] = eps * (log_b[j] - lse);
    }
}

fn update_f(c: &[f64], f: &mut [f64], g: &[f64], log_a: &[f64], eps: f64) {
    let n = g.len();
    for i in 0..f.len() {
        let lse = log_sum_exp((0..n).map(|j| (g[j] - c[i * n + j]) / eps));
        f[i] = eps * (log_a[i] - lse);
    }
}

fn fill_plan(c: &[f64], f: &[f64], g: &[f64], eps: f64, plan: &mut [f64]) {
    let n = g.len();
    for i in 0..f.len() {
        for j in 0..n {
            plan[i * n + j] = ((f[i] + g[j] - c[i * n + j]) / eps).exp();
        }
    }
}

/// One damped Newton step on the column potentials `g`, with `f` eliminated
/// by the row update. The Jacobian of the column sums `s(g)` is
/// `(diag(s) - Pᵀ diag(1/a) P) / ε`, symmetric positive semidefinite with
/// the constant vector in its kernel. Returns the new residual if a step
/// along the Newton direction reduced it; otherwise leaves the state alone.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    c: &[f64],
    a: &[f64],
    b: &[f64],
    log_a: &[f64],
    f: &mut Vec<f64>,
    g: &mut Vec<f64>,
    eps: f64,
    plan: &mut Vec<f64>,
    residual: f64,
) -> Option<f64> {
    if a.iter().chain(b).any(|w| *w <= 0.0) {
        return None;
    }
    let (m, n) = (a.len(), b.len());
    let mut sums = vec![0.0; n];
    for row in plan.chunks(n) {
        for (s, p) in sums.iter_mut().zip(row) {
            *s += p;
        }
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..m {
        let row = &plan[i * n..(i + 1) * n];
        for j in 0..n {
            let pj = row[j] / a[i];
            if pj == 0.0 {
                continue;
            }
            for k in 0..n {
                jac[(j, k)] -= pj * row[k];
            }
        }
    }
    let scale = sums.iter().copied().fold(0.0, f64::max);
    for j in 0..n {
        jac[(j, j)] += sums[j] + 1e-13 * scale;
    }
    // Pin the kernel direction: the right-hand side sums to zero, so adding
    // `11ᵀ` changes nothing but makes the system definite.
    jac.add_scalar_mut(scale / n as f64);
    let rhs = DVector::from_iterator(n, b.iter().zip(&sums).map(|(w, s)| eps * (w - s)));
    let step = jac.cholesky()?.solve(&rhs);

    let mut trial_f = f.clone();
    let mut trial_plan = plan.clone();
    let mut t = 1.0;
    for _ in 0..12 {
        let trial_g: Vec<f64> = g.iter().zip(step.iter()).map(|(x, d)| x + t * d).collect();
        update_f(c, &mut trial_f, &trial_g, log_a, eps);
        fill_plan(c, &trial_f, &trial_g, eps, &mut trial_plan);
        let r = column_residual(&trial_plan, b);
        if r < residual {
            *f = trial_f;
            *g = trial_g;
            *plan = trial_plan;
            return Some(r);
        }
        t *= 0.5;
    }
    None
}
