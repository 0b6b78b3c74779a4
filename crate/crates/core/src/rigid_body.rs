//! Euler angular-velocity dynamics in momentum coordinates.
//!
//! With `x = J ⊙ ω` and `u = τ`, the controlled Euler equation reads
//!
//! ```text
//! x1' = α x2 x3 + u1
//! x2' = β x3 x1 + u2
//! x3' = γ x1 x2 + u3
//! ```
//!
//! where `α = 1/J3 - 1/J2`, `β = 1/J1 - 1/J3`, `γ = 1/J2 - 1/J1`. Because
//! `α + β + γ = 0`, the drift is orthogonal to the state and uncontrolled
//! motion preserves `‖x‖`.
//!
//! Translating the target to the origin (`z = x - x_f`) turns the drift into
//! `f0(z) + A z + b` where `(A, b)` depend only on `x_f`; see [`AffinePair`].

use nalgebra::{Matrix3, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::{Error, Result, StateVec};

/// A (time-invariant) drift vector field on `R^D`.
///
/// `vjp` returns `Jf(x)^T v`, the vector-Jacobian product needed by adjoint
/// sweeps.
pub trait Drift<const D: usize>: Sync {
    fn eval(&self, x: &SVector<f64, D>) -> SVector<f64, D>;

    fn vjp(&self, x: &SVector<f64, D>, v: &SVector<f64, D>) -> SVector<f64, D>;
}

/// The pure integrator `x' = u`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroDrift;

impl<const D: usize> Drift<D> for ZeroDrift {
    fn eval(&self, _x: &SVector<f64, D>) -> SVector<f64, D> {
        SVector::zeros()
    }

    fn vjp(&self, _x: &SVector<f64, D>, _v: &SVector<f64, D>) -> SVector<f64, D> {
        SVector::zeros()
    }
}

/// Linear drift `x' = M x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDrift<const D: usize> {
    pub matrix: nalgebra::SMatrix<f64, D, D>,
}

impl<const D: usize> Drift<D> for LinearDrift<D> {
    fn eval(&self, x: &SVector<f64, D>) -> SVector<f64, D> {
        self.matrix * x
    }

    fn vjp(&self, _x: &SVector<f64, D>, v: &SVector<f64, D>) -> SVector<f64, D> {
        self.matrix.transpose() * v
    }
}

/// Time reversal `x' = -f(x)` of a drift.
#[derive(Debug, Clone, Copy)]
pub struct Reversed<'a, F>(pub &'a F);

impl<const D: usize, F: Drift<D>> Drift<D> for Reversed<'_, F> {
    fn eval(&self, x: &SVector<f64, D>) -> SVector<f64, D> {
        -self.0.eval(x)
    }

    fn vjp(&self, x: &SVector<f64, D>, v: &SVector<f64, D>) -> SVector<f64, D> {
        -self.0.vjp(x, v)
    }
}

/// A rigid body described by its principal moments of inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaBody {
    moments: StateVec,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl InertiaBody {
    pub fn new(moments: [f64; 3]) -> Result<Self> {
        if moments.iter().any(|j| !j.is_finite() || *j <= 0.0) {
            return Err(Error::InvalidInertia(moments));
        }
        let [j1, j2, j3] = moments;
        Ok(Self {
            moments: StateVec::from(moments),
            alpha: 1.0 / j3 - 1.0 / j2,
            beta: 1.0 / j1 - 1.0 / j3,
            gamma: 1.0 / j2 - 1.0 / j1,
        })
    }

    pub fn moments(&self) -> StateVec {
        self.moments
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `(α, β, γ)` as a vector.
    pub fn coefficients(&self) -> StateVec {
        StateVec::new(self.alpha, self.beta, self.gamma)
    }

    /// The Euler drift `f0(z) = (α z2 z3, β z3 z1, γ z1 z2)`.
    pub fn drift_f0(&self, z: &StateVec) -> StateVec {
        StateVec::new(
            self.alpha * z[1] * z[2],
            self.beta * z[2] * z[0],
            self.gamma * z[0] * z[1],
        )
    }

    /// Jacobian of `f0` at `x`. Evaluated at `x_f` this is the matrix `A` of
    /// the translated dynamics.
    pub fn drift_jacobian(&self, x: &StateVec) -> Matrix3<f64> {
        let (a, b, g) = (self.alpha, self.beta, self.gamma);
        Matrix3::new(
            0.0,
            a * x[2],
            a * x[1],
            b * x[2],
            0.0,
            b * x[0],
            g * x[1],
            g * x[0],
            0.0,
        )
    }

    /// Right-hand side of the controlled dynamics in `x` coordinates.
    pub fn rhs_x(&self, x: &StateVec, u: &StateVec) -> StateVec {
        self.drift_f0(x) + u
    }

    /// The affine correction induced by translating `x_f` to the origin.
    pub fn affine_pair(&self, x_f: &StateVec) -> AffinePair {
        AffinePair {
            a: self.drift_jacobian(x_f),
            b: self.drift_f0(x_f),
            x_f: *x_f,
        }
    }

    /// `x = J ⊙ ω`.
    pub fn momentum(&self, omega: &StateVec) -> StateVec {
        self.moments.component_mul(omega)
    }

    /// `ω = x ⊘ J`.
    pub fn angular_velocity(&self, x: &StateVec) -> StateVec {
        x.component_div(&self.moments)
    }
}

impl Drift<3> for InertiaBody {
    fn eval(&self, x: &StateVec) -> StateVec {
        self.drift_f0(x)
    }

    fn vjp(&self, x: &StateVec, v: &StateVec) -> StateVec {
        self.drift_jacobian(x).transpose() * v
    }
}

/// The pair `(A, b)` such that `f0(z + x_f) = f0(z) + A z + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePair {
    a: Matrix3<f64>,
    b: StateVec,
    x_f: StateVec,
}

impl AffinePair {
    pub fn a(&self) -> &Matrix3<f64> {
        &self.a
    }

    pub fn b(&self) -> &StateVec {
        &self.b
    }

    pub fn x_f(&self) -> &StateVec {
        &self.x_f
    }

    /// `A z + b`.
    pub fn affine_drift(&self, z: &StateVec) -> StateVec {
        self.a * z + self.b
    }

    /// Right-hand side of the translated dynamics `z' = f0(z) + A z + b + u`.
    pub fn rhs_z(&self, body: &InertiaBody, z: &StateVec, u: &StateVec) -> StateVec {
        body.drift_f0(z) + self.affine_drift(z) + u
    }
}

/// Sampling parameters for [`is_translated_norm_invariant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormInvarianceCheck {
    pub samples: usize,
    pub radius: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NormInvarianceCheck {
    fn default() -> Self {
        Self {
            samples: 1000,
            radius: 10.0,
            tol: 1e-9,
            seed: 0x5eed,
        }
    }
}

/// Monte Carlo falsification test for translated norm invariance at `x_f`:
/// checks `⟨f(z + x_f), z⟩ = 0` on `samples` points drawn uniformly from the
/// ball of the given radius. A `true` result means no counterexample was
/// found, not that the property holds.
pub fn is_translated_norm_invariant<const D: usize, F: Drift<D> + ?Sized>(
    drift: &F,
    x_f: &SVector<f64, D>,
    check: &NormInvarianceCheck,
) -> Result<bool> {
    if check.samples == 0 || !(check.radius > 0.0) || !(check.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "norm-invariance check needs samples >= 1, radius > 0, tol > 0 (got {check:?})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    for _ in 0..check.samples {
        let direction = SVector::<f64, D>::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let norm = direction.norm();
        if norm == 0.0 {
            continue;
        }
        let radial: f64 = unit.sample(&mut rng);
        let r = check.radius * radial.powf(1.0 / D as f64);
        let z = direction * (r / norm);
        let f = drift.eval(&(z + x_f));
        let lhs = f.dot(&z).abs();
        if lhs > check.tol * (1.0 + z.norm() * f.norm()) {
            return Ok(false);
        }
    }
    Ok(true)
}
