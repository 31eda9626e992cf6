//! Finite-activity Levy measures and the jump batches they generate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::stream::RandomStream;

type MarkSampler = dyn Fn(&mut RandomStream) -> f64 + Send + Sync;
type Density = dyn Fn(f64) -> f64 + Send + Sync;

/// A jump measure `nu` restricted to `{|z| < c}` with finite total mass, so
/// its jumps form a compound Poisson process. Infinite-activity measures are
/// rejected at construction.
#[derive(Clone)]
pub struct LevyMeasureSpec {
    truncation_radius: f64,
    total_mass: f64,
    second_moment: f64,
    mark_sampler: Arc<MarkSampler>,
    density: Option<Arc<Density>>,
}

impl fmt::Debug for LevyMeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyMeasureSpec")
            .field("truncation_radius", &self.truncation_radius)
            .field("total_mass", &self.total_mass)
            .field("second_moment", &self.second_moment)
            .field("has_density", &self.density.is_some())
            .finish()
    }
}

impl LevyMeasureSpec {
    /// Build a measure from its total mass, second moment and normalized
    /// mark sampler. The radius may be `f64::INFINITY` as long as the mass
    /// is finite.
    pub fn new(
        truncation_radius: f64,
        total_mass: f64,
        second_moment: f64,
        mark_sampler: Arc<MarkSampler>,
    ) -> Result<Self> {
        if !total_mass.is_finite() || total_mass < 0.0 {
            return Err(Error::InfiniteActivity { mass: total_mass });
        }
        if truncation_radius <= 0.0 || truncation_radius.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "truncation radius must be positive, got {truncation_radius}"
            )));
        }
        if !second_moment.is_finite() || second_moment < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "second moment must be finite and nonnegative, got {second_moment}"
            )));
        }
        Ok(Self {
            truncation_radius,
            total_mass,
            second_moment,
            mark_sampler,
            density: None,
        })
    }

    /// Attach a density `z -> d nu / dz`, enabling the quadrature route for
    /// compensators.
    pub fn with_density(mut self, density: Arc<Density>) -> Self {
        self.density = Some(density);
        self
    }

    /// The measure with no jumps at all.
    pub fn zero() -> Self {
        Self {
            truncation_radius: f64::INFINITY,
            total_mass: 0.0,
            second_moment: 0.0,
            mark_sampler: Arc::new(|_| 0.0),
            density: Some(Arc::new(|_| 0.0)),
        }
    }

    /// `nu(dz) = mass * phi(z) dz` with `phi` the standard normal density:
    /// total mass `mass`, standard normal marks, second moment `mass`.
    pub fn scaled_gaussian(mass: f64) -> Result<Self> {
        let spec = Self::new(
            f64::INFINITY,
            mass,
            mass,
            Arc::new(|stream: &mut RandomStream| stream.standard_normal()),
        )?;
        Ok(spec.with_density(Arc::new(move |z: f64| {
            mass * (-(z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })))
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// The analytic value of `integral of z^2 nu(dz)`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn sample_mark(&self, stream: &mut RandomStream) -> f64 {
        (self.mark_sampler)(stream)
    }

    pub fn density(&self) -> Option<&Arc<Density>> {
        self.density.as_ref()
    }

    /// Monte Carlo estimate `(mean of z^2, standard error)` over `n` marks;
    /// used to cross-check `second_moment` against the sampler.
    pub fn empirical_second_moment(&self, stream: &mut RandomStream, n: usize) -> (f64, f64) {
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let z = self.sample_mark(stream);
            let v = z * z;
            sum += v;
            sumsq += v * v;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let se = ((sumsq / nf - mean * mean).max(0.0) / nf).sqrt();
        (mean, se)
    }
}

/// One jump event inside a time step: offset from the step start and mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub offset: f64,
    pub mark: f64,
}

/// The jump events of one time step, sorted by arrival offset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JumpBatch {
    pub events: Vec<JumpEvent>,
}

impl JumpBatch {
    pub fn empty() -> Self {
        Self { events: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn marks(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.mark)
    }
}
