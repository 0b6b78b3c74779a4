use nalgebra::SVector;

/// One classical fourth-order Runge-Kutta step of `x' = rhs(t, x)`.
pub(crate) fn rk4_step<const D: usize>(
    t: f64,
    x: &SVector<f64, D>,
    h: f64,
    mut rhs: impl FnMut(f64, &SVector<f64, D>) -> SVector<f64, D>,
) -> SVector<f64, D> {
    let k1 = rhs(t, x);
    let k2 = rhs(t + 0.5 * h, &(x + k1 * (0.5 * h)));
    let k3 = rhs(t + 0.5 * h, &(x + k2 * (0.5 * h)));
    let k4 = rhs(t + h, &(x + k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Uniform grid on `[0, horizon]` with step no larger than `step`.
/// Returns the number of intervals and the realized step.
pub(crate) fn uniform_grid(horizon: f64, step: f64) -> (usize, f64) {
    let ratio = horizon / step;
    let n = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.ceil()
    };
    let n = (n as usize).max(1);
    (n, horizon / n as f64)
}
