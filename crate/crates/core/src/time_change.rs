//! The alpha-stable subordinator on a uniform grid and its discretized
//! inverse.
//!
//! `simulate_subordinator` accumulates i.i.d. stable increments until the
//! running value D(t_n) first exceeds the horizon T. The inverse time change
//! is the step function
//!
//! ```text
//! E(t) = (min{ n : D(n * delta) > t } - 1) * delta,   t in [0, T],
//! ```
//!
//! nondecreasing with constant jump size `delta`, and `E(T) = N * delta`
//! where N is the last index with `D(N * delta) <= T`. One fine increment
//! sequence can be subsampled to coarser grids (`coarsen_path`) so that
//! reference and coarse approximations share their driving randomness.

use crate::error::{Error, Result};
use crate::kernels::{sample_stable_increment, RandomStream};

/// Hard cap on subordinator grid length; hitting it signals pathological
/// parameters rather than a legitimate run.
const MAX_STEPS: usize = 1_000_000_000;

/// Grid samples `[D(0), D(delta), ...]` of an alpha-stable subordinator,
/// extended at least one step past the first exceedance of the horizon.
#[derive(Debug, Clone)]
pub struct SubordinatorPath {
    alpha: f64,
    delta: f64,
    horizon: f64,
    /// `values[n] = D(n * delta)`; nondecreasing, `values[0] = 0`.
    values: Vec<f64>,
    /// Smallest `n` with `values[n] > horizon`; the index N above is this - 1.
    exceed_index: usize,
}

impl SubordinatorPath {
    /// Construct from explicit grid values (used by tests and coarsening).
    pub fn from_values(alpha: f64, delta: f64, horizon: f64, values: Vec<f64>) -> Result<Self> {
        validate_grid_params(alpha, delta, horizon)?;
        if values.first().copied() != Some(0.0) {
            return Err(Error::TimeChangeParameter(
                "subordinator values must start at 0".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::TimeChangeParameter(
                "subordinator values must be nondecreasing".into(),
            ));
        }
        let exceed_index = match values.iter().position(|v| *v > horizon) {
            Some(i) => i,
            None => {
                return Err(Error::TimeChangeParameter(
                    "subordinator values never exceed the horizon".into(),
                ))
            }
        };
        Ok(Self {
            alpha,
            delta,
            horizon,
            values,
            exceed_index,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The index N with `D(N delta) <= T < D((N+1) delta)`.
    pub fn last_index_within_horizon(&self) -> usize {
        self.exceed_index - 1
    }
}

fn validate_grid_params(alpha: f64, delta: f64, horizon: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::TimeChangeParameter(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::TimeChangeParameter(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::TimeChangeParameter(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    Ok(())
}

/// Simulate until the first grid value exceeding the horizon.
pub fn simulate_subordinator(
    stream: &mut RandomStream,
    alpha: f64,
    delta: f64,
    horizon: f64,
) -> Result<SubordinatorPath> {
    simulate_subordinator_padded(stream, alpha, delta, horizon, 0)
}

/// Simulate until the first exceedance, then draw `pad` further increments.
///
/// Padding guarantees that a subsequent `coarsen_path` by any factor up to
/// `pad` still finds a coarse grid value beyond the horizon.
pub fn simulate_subordinator_padded(
    stream: &mut RandomStream,
    alpha: f64,
    delta: f64,
    horizon: f64,
    pad: usize,
) -> Result<SubordinatorPath> {
    validate_grid_params(alpha, delta, horizon)?;
    let mut values = Vec::with_capacity(64 + pad);
    values.push(0.0);
    let mut level = 0.0;
    while level <= horizon {
        if values.len() > MAX_STEPS {
            return Err(Error::SubordinatorCap {
                cap: MAX_STEPS,
                alpha,
                delta,
            });
        }
        level += sample_stable_increment(stream, alpha, delta)?;
        values.push(level);
    }
    let exceed_index = values.len() - 1;
    for _ in 0..pad {
        level += sample_stable_increment(stream, alpha, delta)?;
        values.push(level);
    }
    Ok(SubordinatorPath {
        alpha,
        delta,
        horizon,
        values,
        exceed_index,
    })
}

/// Subsample every `factor`-th grid value onto the stepsize `factor * delta`,
/// truncating right after the first coarse exceedance of the horizon.
pub fn coarsen_path(path: &SubordinatorPath, factor: usize) -> Result<SubordinatorPath> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::CoarsenFactorNotPowerOfTwo { factor });
    }
    if factor >= path.values.len() {
        return Err(Error::CoarsenFactorTooLarge {
            factor,
            len: path.values.len(),
        });
    }
    let coarse_delta = factor as f64 * path.delta;
    if !(coarse_delta < 1.0 && coarse_delta > 0.0) {
        return Err(Error::TimeChangeParameter(format!(
            "coarsened stepsize {coarse_delta} must stay below 1"
        )));
    }
    let mut values: Vec<f64> = path.values.iter().copied().step_by(factor).collect();
    let exceed_index = match values.iter().position(|v| *v > path.horizon) {
        Some(i) => i,
        None => return Err(Error::CoarsenTooShort),
    };
    values.truncate(exceed_index + 1);
    Ok(SubordinatorPath {
        alpha: path.alpha,
        delta: coarse_delta,
        horizon: path.horizon,
        values,
        exceed_index,
    })
}

/// The step function `E(t)` derived from a subordinator path, with
/// constant-time queries by binary search.
#[derive(Debug, Clone)]
pub struct InverseTimeChange {
    delta: f64,
    horizon: f64,
    /// `breakpoints[i] = D((i + 1) * delta)` for `i = 0..=N`.
    breakpoints: Vec<f64>,
}

/// Build the inverse step function of a path.
pub fn build_inverse(path: &SubordinatorPath) -> InverseTimeChange {
    let n_plus_one = path.exceed_index;
    InverseTimeChange {
        delta: path.delta,
        horizon: path.horizon,
        breakpoints: path.values[1..=n_plus_one].to_vec(),
    }
}

impl InverseTimeChange {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of solver steps needed to reach `E(horizon)`, i.e. N.
    pub fn steps_at_horizon(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// `E(horizon) = N * delta`, exact.
    pub fn value_at_horizon(&self) -> f64 {
        self.steps_at_horizon() as f64 * self.delta
    }

    /// The grid index `n` with `E(t) = n * delta`. Intervals are closed on
    /// the left: `t = D(n delta)` maps to `n`.
    pub fn eval_index(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::QueryOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.breakpoints.partition_point(|b| *b <= t))
    }

    /// `E(t)` itself.
    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.eval_index(t)? as f64 * self.delta)
    }
}

/// Brute-force evaluation of the inverse directly from the defining scan;
/// the binary-search implementation must agree with this everywhere.
pub fn eval_inverse_by_scan(path: &SubordinatorPath, t: f64) -> Result<f64> {
    if !(0.0..=path.horizon).contains(&t) {
        return Err(Error::QueryOutOfRange {
            t,
            horizon: path.horizon,
        });
    }
    let n_first_above = path
        .values
        .iter()
        .position(|v| *v > t)
        .expect("path exceeds its horizon by construction");
    Ok((n_first_above - 1) as f64 * path.delta)
}
