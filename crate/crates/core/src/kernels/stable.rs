//! One-sided alpha-stable increments.
//!
//! Draws follow the totally skewed stable law with Laplace transform
//! `E[exp(-lambda * X)] = exp(-dt * lambda^alpha)` for `alpha` in `(0,1)`,
//! i.e. the increment over `dt` of the alpha-stable subordinator. Sampling
//! uses the Chambers-Mallows-Stuck construction, which is exact and needs
//! no rejection loop.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::kernels::stream::RandomStream;

/// Draw the subordinator increment over a step of length `dt`.
pub fn sample_stable_increment(stream: &mut RandomStream, alpha: f64, dt: f64) -> Result<f64> {
    validate(alpha, dt)?;
    Ok(dt.powf(1.0 / alpha) * standard_positive_stable(stream, alpha))
}

pub(crate) fn validate(alpha: f64, dt: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "stable index alpha must lie in (0,1), got {alpha}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "stepsize dt must be positive and finite, got {dt}"
        )));
    }
    Ok(())
}

/// Standard draw with Laplace transform `exp(-lambda^alpha)`.
///
/// U is uniform on `(-pi/2, pi/2]` (the open left endpoint keeps every
/// trigonometric factor strictly positive), E is standard exponential.
pub(crate) fn standard_positive_stable(stream: &mut RandomStream, alpha: f64) -> f64 {
    let u = (stream.uniform_open_closed() - 0.5) * PI;
    let e = stream.exponential();
    let au = alpha * (u + FRAC_PI_2);
    (au.sin() / u.cos().powf(1.0 / alpha)) * ((u - au).cos() / e).powf((1.0 - alpha) / alpha)
}
