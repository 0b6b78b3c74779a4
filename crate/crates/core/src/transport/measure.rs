use nalgebra::{Cholesky, Matrix3, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rigid_body::InertiaBody;
use crate::{Error, Result, StateVec};

/// Tolerance on the total mass of a [`DiscreteMeasure`].
pub const MASS_TOL: f64 = 1e-12;

/// A probability measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Vec<StateVec>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<StateVec>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if support.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidMeasure(
                "support points must be finite".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { support, weights })
    }

    /// Equal weights `1/n` on every point.
    pub fn uniform(support: Vec<StateVec>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n.max(1) as f64; n])
    }

    /// Rescales nonnegative `weights` to unit total mass.
    pub fn normalized(support: Vec<StateVec>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "cannot normalize total mass {total}"
            )));
        }
        Self::new(support, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dirac(point: StateVec) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn support(&self) -> &[StateVec] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// True when every atom carries exactly the same weight.
    pub fn is_equal_weight(&self) -> bool {
        self.weights.iter().all(|w| *w == self.weights[0])
    }

    pub fn mean(&self) -> StateVec {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * *w)
            .sum()
    }

    pub fn covariance(&self) -> Matrix3<f64> {
        let mean = self.mean();
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| {
                let d = x - mean;
                d * d.transpose() * *w
            })
            .sum()
    }

    /// Maps every atom through `f`, keeping the weights.
    pub fn map(&self, f: impl Fn(&StateVec) -> StateVec) -> Result<Self> {
        Self::new(self.support.iter().map(f).collect(), self.weights.clone())
    }
}

/// `Σ w_i ‖x_i‖²`.
pub fn second_moment(measure: &DiscreteMeasure) -> f64 {
    measure
        .support
        .iter()
        .zip(&measure.weights)
        .map(|(x, w)| w * x.norm_squared())
        .sum()
}

/// Angular-velocity particles `ω` to momentum particles `J ⊙ ω`.
pub fn pushforward_inertia(
    measure: &DiscreteMeasure,
    body: &InertiaBody,
) -> Result<DiscreteMeasure> {
    measure.map(|w| body.momentum(w))
}

/// Inverse of [`pushforward_inertia`], `x ⊘ J`.
pub fn pullback_inertia(measure: &DiscreteMeasure, body: &InertiaBody) -> Result<DiscreteMeasure> {
    measure.map(|x| body.angular_velocity(x))
}

/// A Gaussian on ℝ³ with a symmetric positive definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    mean: StateVec,
    covariance: Matrix3<f64>,
    factor: Matrix3<f64>,
}

impl GaussianSpec {
    pub fn new(mean: StateVec, covariance: Matrix3<f64>) -> Result<Self> {
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance);
        }
        let scale = covariance.abs().max();
        if (covariance - covariance.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::InvalidCovariance);
        }
        let symmetric = (covariance + covariance.transpose()) * 0.5;
        if SymmetricEigen::new(symmetric).eigenvalues.min() <= 0.0 {
            return Err(Error::InvalidCovariance);
        }
        let factor = Cholesky::new(symmetric)
            .ok_or(Error::InvalidCovariance)?
            .l();
        Ok(Self {
            mean,
            covariance: symmetric,
            factor,
        })
    }

    /// Independent coordinates with the given variances.
    pub fn diagonal(mean: StateVec, variances: [f64; 3]) -> Result<Self> {
        Self::new(mean, Matrix3::from_diagonal(&StateVec::from(variances)))
    }

    pub fn mean(&self) -> &StateVec {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix3<f64> {
        &self.covariance
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = Σ`.
    pub fn factor(&self) -> &Matrix3<f64> {
        &self.factor
    }
}

/// `n` i.i.d. draws `mean + L ξ`, `ξ ~ N(0, I)`, with equal weights. The
/// generator is ChaCha8 seeded from `seed`, so equal seeds give identical
/// measures on every platform.
pub fn sample_gaussian(spec: &GaussianSpec, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = (0..n)
        .map(|_| {
            let xi = StateVec::from_fn(|_, _| StandardNormal.sample(&mut rng));
            spec.mean + spec.factor * xi
        })
        .collect();
    DiscreteMeasure::uniform(support)
}
