//! Random streams and the samplers driving every simulation: Gaussian
//! increments, one-sided stable increments and compensated Poisson jump
//! batches, plus the compensator integral.

mod measure;
pub(crate) mod quadrature;
mod stable;
mod stream;

pub use measure::{JumpBatch, JumpEvent, LevyMeasureSpec};
pub use stable::sample_stable_increment;
pub use stream::RandomStream;

use crate::error::{Error, Result};

/// Draw an m-dimensional Brownian increment over a step of length `dt`:
/// independent components, each `N(0, dt)`.
pub fn sample_gaussian_increment(stream: &mut RandomStream, dt: f64, m: usize) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "stepsize dt must be positive and finite, got {dt}"
        )));
    }
    let scale = dt.sqrt();
    Ok((0..m).map(|_| scale * stream.standard_normal()).collect())
}

/// Draw the compound-Poisson jump batch of one step: `Poisson(mass * dt)`
/// events with i.i.d. marks from the normalized measure and uniform arrival
/// offsets, sorted ascending.
pub fn sample_jump_batch(
    stream: &mut RandomStream,
    measure: &LevyMeasureSpec,
    dt: f64,
) -> Result<JumpBatch> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "stepsize dt must be positive and finite, got {dt}"
        )));
    }
    let count = stream.poisson(measure.total_mass() * dt);
    let mut events = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let offset = dt * stream.uniform();
        let mark = measure.sample_mark(stream);
        debug_assert!(mark.abs() < measure.truncation_radius());
        events.push(JumpEvent { offset, mark });
    }
    events.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    Ok(JumpBatch { events })
}

/// Compute the compensator `integral of h(t, x, z) nu(dz)` by quadrature.
///
/// Problems with a closed-form compensator should short-circuit this; the
/// quadrature route needs the measure to carry a density and converges by
/// node doubling (64 -> 128 -> 256) to a relative tolerance of 1e-8.
pub fn compensator_value(
    measure: &LevyMeasureSpec,
    jump: impl Fn(f64, &mut [f64]),
    out: &mut [f64],
) -> Result<()> {
    let density = measure.density().ok_or(Error::MissingDensity)?;
    let radius = measure.truncation_radius();
    let dim = out.len();
    let mut scratch = vec![0.0; dim];
    let mut previous = vec![0.0; dim];
    let mut jump = jump;

    quadrature::accumulate_weighted(64, radius, &**density, &mut jump, &mut scratch, out);
    for nodes in [128usize, 256] {
        previous.copy_from_slice(out);
        quadrature::accumulate_weighted(nodes, radius, &**density, &mut jump, &mut scratch, out);
        let change: f64 = out
            .iter()
            .zip(previous.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = out.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        if change / scale <= 1e-8 {
            return Ok(());
        }
        if nodes == 256 {
            return Err(Error::QuadratureNonConvergence {
                change: change / scale,
                nodes,
            });
        }
    }
    unreachable!()
}
