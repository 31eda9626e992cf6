//! Coupled-noise Monte Carlo experiments estimating strong (root mean
//! square) and weak errors across a ladder of stepsizes, with a log2-log2
//! order regression and a path-level bootstrap for the slope.
//!
//! One `NoiseGrid` per path holds the finest-resolution Brownian increments
//! and the global jump event list; every stepsize consumes the same grid
//! through `aggregate_noise`, and every stepsize shares one subordinator
//! realization through `coarsen_path`. Resampling the randomness per level
//! would swamp the discretization error being measured.

pub mod csv;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{JumpEvent, LevyMeasureSpec, RandomStream};
use crate::problem::SdeProblem;
use crate::solver::{
    compose_time_changed, simulate_original_path, SolverConfig, StepIncrements,
    DEFAULT_NEWTON_MAX_ITERATIONS, DEFAULT_NEWTON_TOLERANCE,
};
use crate::time_change::{build_inverse, coarsen_path, simulate_subordinator_padded};

/// Stream ids are laid out as `path * STREAMS_PER_PATH + component` so that
/// the subordinator and the driving noise of one path are independent
/// streams, and all paths are independent of each other.
const STREAMS_PER_PATH: u64 = 4;
const SUBORDINATOR_COMPONENT: u64 = 0;
const NOISE_COMPONENT: u64 = 1;
/// Reserved stream id for bootstrap resampling.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// Cap on fine steps per noise grid.
const MAX_FINE_STEPS: usize = 100_000_000;

/// Finest-resolution randomness over an original-time window `[0, horizon)`.
#[derive(Debug, Clone)]
pub struct NoiseGrid {
    fine_delta: f64,
    horizon: f64,
    brownian_dim: usize,
    /// `n_steps * m` values, row-major per step.
    increments: Vec<f64>,
    /// Jump events as (absolute time, mark), sorted by time.
    jumps: Vec<JumpEvent>,
}

impl NoiseGrid {
    pub fn fine_delta(&self) -> f64 {
        self.fine_delta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_fine_steps(&self) -> usize {
        self.increments.len() / self.brownian_dim
    }

    pub fn jump_events(&self) -> &[JumpEvent] {
        &self.jumps
    }

    pub fn fine_increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.brownian_dim..(n + 1) * self.brownian_dim]
    }
}

/// Draw one path's randomness at the finest resolution: i.i.d. `N(0, delta)`
/// Brownian increments per fine step and one compound-Poisson event stream
/// over the whole window.
pub fn generate_coupled_noise(
    stream: &mut RandomStream,
    finest_delta: f64,
    horizon: f64,
    measure: &LevyMeasureSpec,
    brownian_dim: usize,
) -> Result<NoiseGrid> {
    if !(finest_delta > 0.0 && horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Harness(format!(
            "noise grid needs positive stepsize and horizon, got delta={finest_delta}, horizon={horizon}"
        )));
    }
    let steps_exact = horizon / finest_delta;
    let n_steps = steps_exact.round() as usize;
    if n_steps == 0 || (steps_exact - n_steps as f64).abs() > 1e-9 * steps_exact.max(1.0) {
        return Err(Error::NonDivisibleStepsize {
            coarse: horizon,
            fine: finest_delta,
        });
    }
    if n_steps.saturating_mul(brownian_dim) > MAX_FINE_STEPS {
        return Err(Error::ResourceCap(format!(
            "noise grid would hold {} fine steps (cap {MAX_FINE_STEPS})",
            n_steps * brownian_dim
        )));
    }
    let scale = finest_delta.sqrt();
    let mut increments = Vec::with_capacity(n_steps * brownian_dim);
    for _ in 0..n_steps * brownian_dim {
        increments.push(scale * stream.standard_normal());
    }
    let count = stream.poisson(measure.total_mass() * horizon);
    let mut jumps = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let time = horizon * stream.uniform();
        let mark = measure.sample_mark(stream);
        jumps.push(JumpEvent { offset: time, mark });
    }
    jumps.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    Ok(NoiseGrid {
        fine_delta: finest_delta,
        horizon,
        brownian_dim,
        increments,
        jumps,
    })
}

/// Re-express the grid on a coarser stepsize `k * fine_delta`: Brownian
/// increments are summed over each window, jump events keep their absolute
/// order with offsets relative to their window start. Trailing fine steps
/// that do not fill a whole window are dropped.
pub fn aggregate_noise(noise: &NoiseGrid, coarse_delta: f64) -> Result<Vec<StepIncrements>> {
    let ratio = coarse_delta / noise.fine_delta;
    let k = ratio.round() as usize;
    if k == 0 || (ratio - k as f64).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::NonDivisibleStepsize {
            coarse: coarse_delta,
            fine: noise.fine_delta,
        });
    }
    let m = noise.brownian_dim;
    let n_coarse = noise.n_fine_steps() / k;
    let mut out: Vec<StepIncrements> = (0..n_coarse)
        .map(|_| StepIncrements {
            brownian: vec![0.0; m],
            ..Default::default()
        })
        .collect();
    for (fine_idx, chunk) in noise.increments.chunks_exact(m).enumerate() {
        let window = fine_idx / k;
        if window >= n_coarse {
            break;
        }
        for (acc, v) in out[window].brownian.iter_mut().zip(chunk) {
            *acc += v;
        }
    }
    for event in &noise.jumps {
        let window = (event.offset / coarse_delta).floor() as usize;
        if window >= n_coarse {
            continue;
        }
        let offset = event.offset - window as f64 * coarse_delta;
        out[window].jumps.events.push(JumpEvent {
            offset,
            mark: event.mark,
        });
    }
    Ok(out)
}

/// Parameters shared by the strong- and weak-error experiments.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub theta: f64,
    pub alpha: f64,
    /// Coarse stepsizes under test; each must be an integer multiple of
    /// `ref_delta`.
    pub deltas: Vec<f64>,
    pub ref_delta: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub newton_tolerance: f64,
    pub newton_max_iterations: usize,
    /// Bootstrap resamples for the slope confidence interval.
    pub bootstrap_resamples: usize,
}

impl ExperimentConfig {
    pub fn new(
        theta: f64,
        alpha: f64,
        deltas: Vec<f64>,
        ref_delta: f64,
        n_paths: usize,
        horizon: f64,
        seed: u64,
    ) -> Self {
        Self {
            theta,
            alpha,
            deltas,
            ref_delta,
            n_paths,
            horizon,
            seed,
            newton_tolerance: DEFAULT_NEWTON_TOLERANCE,
            newton_max_iterations: DEFAULT_NEWTON_MAX_ITERATIONS,
            bootstrap_resamples: 1000,
        }
    }

    fn validate(&self, problem: &SdeProblem) -> Result<Vec<f64>> {
        if self.deltas.is_empty() {
            return Err(Error::Harness("at least one stepsize is required".into()));
        }
        if self.n_paths < 2 {
            return Err(Error::Harness("at least 2 paths are required".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Harness(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        SolverConfig::new(self.theta, self.ref_delta)?;
        let mut sorted = self.deltas.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted.dedup();
        if sorted.len() != self.deltas.len() {
            return Err(Error::Harness("stepsizes must be distinct".into()));
        }
        for &delta in &sorted {
            let ratio = delta / self.ref_delta;
            let k = ratio.round();
            if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio {
                return Err(Error::NonDivisibleStepsize {
                    coarse: delta,
                    fine: self.ref_delta,
                });
            }
            SolverConfig::new(self.theta, delta)?;
        }
        // guard at the coarsest stepsize covers the whole ladder
        SolverConfig::new(self.theta, sorted[0])?.check_guard(problem)?;
        Ok(sorted)
    }

    fn solver_config(&self, delta: f64) -> Result<SolverConfig> {
        SolverConfig::new(self.theta, delta)?
            .with_newton(self.newton_tolerance, self.newton_max_iterations)
    }
}

/// One stepsize row of an error table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub delta: f64,
    pub error: f64,
    pub std_error: f64,
}

/// Fitted log2-log2 regression of error against stepsize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub used_rows: usize,
    pub excluded_rows: usize,
}

/// Per-stepsize error estimates of one experiment, rows sorted by
/// decreasing stepsize.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub label: String,
    pub theta: f64,
    pub alpha: f64,
    pub rows: Vec<ErrorRow>,
    pub ref_delta: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub fit: Option<OrderFit>,
    /// 95% bootstrap confidence interval for the slope.
    pub slope_ci: Option<(f64, f64)>,
}

/// Ordinary least squares of `log2(error)` on `log2(delta)` over the rows
/// with strictly positive errors. Rows that cannot enter the log fit are
/// excluded and counted; fewer than 2 usable rows is an error.
pub fn fit_order(table: &ErrorTable) -> Result<OrderFit> {
    fit_log2(table.rows.iter().map(|r| (r.delta, r.error)))
}

fn fit_log2(rows: impl Iterator<Item = (f64, f64)>) -> Result<OrderFit> {
    let mut points = Vec::new();
    let mut excluded = 0usize;
    for (delta, error) in rows {
        if error > 0.0 && error.is_finite() {
            points.push((delta.log2(), error.log2()));
        } else {
            excluded += 1;
        }
    }
    if points.len() < 2 {
        return Err(Error::FitUnderdetermined {
            usable: points.len(),
        });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in &points {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    let slope = num / den;
    Ok(OrderFit {
        slope,
        intercept: mean_y - slope * mean_x,
        used_rows: points.len(),
        excluded_rows: excluded,
    })
}

/// Strong-error experiment result: the table plus the per-path squared
/// terminal errors per stepsize (row-major over the sorted stepsizes), kept
/// for bootstrap and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorOutcome {
    pub table: ErrorTable,
    pub squared_errors: Vec<Vec<f64>>,
}

/// Weak-error experiment result with the per-path functional differences.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakErrorOutcome {
    pub table: ErrorTable,
    pub differences: Vec<Vec<f64>>,
}

/// Reference terminal state and the per-stepsize terminal states of a path.
type PathTerminals = (Vec<f64>, Vec<Vec<f64>>);

/// Terminal states of one path solved at the reference and at every coarse
/// stepsize from one shared randomness source.
fn coupled_terminals(
    problem: &SdeProblem,
    cfg: &ExperimentConfig,
    deltas_sorted: &[f64],
    path_index: u64,
) -> Result<PathTerminals> {
    let ref_delta = cfg.ref_delta;
    let max_delta = deltas_sorted[0].max(ref_delta);
    let k_max = (max_delta / ref_delta).round() as usize;

    let mut sub_stream = RandomStream::new(
        cfg.seed,
        path_index * STREAMS_PER_PATH + SUBORDINATOR_COMPONENT,
    );
    let fine =
        simulate_subordinator_padded(&mut sub_stream, cfg.alpha, ref_delta, cfg.horizon, k_max)?;
    let itc_ref = build_inverse(&fine);
    let e_ref = itc_ref.value_at_horizon();

    // original-time window: E_ref(T) plus one coarse step, rounded up to the
    // coarse grid, covers every level's needs
    let noise_horizon = ((e_ref + max_delta) / max_delta).ceil().max(1.0) * max_delta;
    let mut noise_stream =
        RandomStream::new(cfg.seed, path_index * STREAMS_PER_PATH + NOISE_COMPONENT);
    let noise = generate_coupled_noise(
        &mut noise_stream,
        ref_delta,
        noise_horizon,
        problem.measure(),
        problem.brownian_dim(),
    )?;

    let solver_ref = cfg.solver_config(ref_delta)?;
    let incs = aggregate_noise(&noise, ref_delta)?;
    let path = simulate_original_path(problem, &solver_ref, &incs, itc_ref.steps_at_horizon())?;
    let x_ref = compose_time_changed(&path, &itc_ref, cfg.horizon)?.to_vec();

    let mut terminals = Vec::with_capacity(deltas_sorted.len());
    for &delta in deltas_sorted {
        let k = (delta / ref_delta).round() as usize;
        let coarse = coarsen_path(&fine, k)?;
        let itc = build_inverse(&coarse);
        let solver = cfg.solver_config(delta)?;
        let incs = aggregate_noise(&noise, delta)?;
        let path = simulate_original_path(problem, &solver, &incs, itc.steps_at_horizon())?;
        terminals.push(compose_time_changed(&path, &itc, cfg.horizon)?.to_vec());
    }
    Ok((x_ref, terminals))
}

fn run_paths(
    problem: &SdeProblem,
    cfg: &ExperimentConfig,
    deltas_sorted: &[f64],
) -> Result<Vec<PathTerminals>> {
    let results: Vec<Result<PathTerminals>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| coupled_terminals(problem, cfg, deltas_sorted, p))
        .collect();
    // fold sequentially so the reported error (if any) is the first path's
    results.into_iter().collect()
}

/// Root-mean-square terminal error against the coupled fine-step reference,
/// per stepsize, with delta-method standard errors and a bootstrap slope CI.
pub fn strong_error_experiment(
    problem: &SdeProblem,
    cfg: &ExperimentConfig,
) -> Result<StrongErrorOutcome> {
    let deltas_sorted = cfg.validate(problem)?;
    let per_path = run_paths(problem, cfg, &deltas_sorted)?;

    let mut squared_errors = vec![Vec::with_capacity(cfg.n_paths); deltas_sorted.len()];
    for (x_ref, terminals) in &per_path {
        for (level, x) in terminals.iter().enumerate() {
            let sq: f64 = x.iter().zip(x_ref).map(|(a, b)| (a - b) * (a - b)).sum();
            squared_errors[level].push(sq);
        }
    }

    let rows: Vec<ErrorRow> = deltas_sorted
        .iter()
        .zip(&squared_errors)
        .map(|(&delta, sq)| {
            let (mean, se_mean) = mean_and_se(sq);
            let error = mean.max(0.0).sqrt();
            let std_error = if error > 0.0 {
                se_mean / (2.0 * error)
            } else {
                0.0
            };
            ErrorRow {
                delta,
                error,
                std_error,
            }
        })
        .collect();

    let fit = fit_log2(rows.iter().map(|r| (r.delta, r.error))).ok();
    let slope_ci = bootstrap_slope_ci(
        &squared_errors,
        &deltas_sorted,
        cfg.bootstrap_resamples,
        cfg.seed,
        |sample| sample.iter().sum::<f64>().max(0.0).sqrt(),
    );
    let table = ErrorTable {
        label: format!("strong theta={} alpha={}", cfg.theta, cfg.alpha),
        theta: cfg.theta,
        alpha: cfg.alpha,
        rows,
        ref_delta: cfg.ref_delta,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        fit,
        slope_ci,
    };
    Ok(StrongErrorOutcome {
        table,
        squared_errors,
    })
}

/// Weak error `|E Phi(X_delta(T)) - E Phi(X_ref(T))|` per stepsize, using
/// coupled references: the coupling only reduces the estimator's variance,
/// the expectation of the difference is unchanged.
pub fn weak_error_experiment(
    problem: &SdeProblem,
    phi: impl Fn(&[f64]) -> f64 + Sync,
    cfg: &ExperimentConfig,
) -> Result<WeakErrorOutcome> {
    if cfg.theta != 0.0 {
        return Err(Error::Harness(format!(
            "weak-order runs are defined for the explicit scheme only (theta=0), got theta={}",
            cfg.theta
        )));
    }
    let deltas_sorted = cfg.validate(problem)?;
    let per_path = run_paths(problem, cfg, &deltas_sorted)?;

    let mut differences = vec![Vec::with_capacity(cfg.n_paths); deltas_sorted.len()];
    for (x_ref, terminals) in &per_path {
        let phi_ref = phi(x_ref);
        for (level, x) in terminals.iter().enumerate() {
            differences[level].push(phi(x) - phi_ref);
        }
    }

    let rows: Vec<ErrorRow> = deltas_sorted
        .iter()
        .zip(&differences)
        .map(|(&delta, diffs)| {
            let (mean, se_mean) = mean_and_se(diffs);
            ErrorRow {
                delta,
                error: mean.abs(),
                std_error: se_mean,
            }
        })
        .collect();

    let fit = fit_log2(rows.iter().map(|r| (r.delta, r.error))).ok();
    let slope_ci = bootstrap_slope_ci(
        &differences,
        &deltas_sorted,
        cfg.bootstrap_resamples,
        cfg.seed,
        |sample| (sample.iter().sum::<f64>() / sample.len() as f64).abs(),
    );
    let table = ErrorTable {
        label: format!("weak theta={} alpha={}", cfg.theta, cfg.alpha),
        theta: cfg.theta,
        alpha: cfg.alpha,
        rows,
        ref_delta: cfg.ref_delta,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        fit,
        slope_ci,
    };
    Ok(WeakErrorOutcome { table, differences })
}

fn mean_and_se(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Percentile bootstrap over paths: resample path indices jointly across
/// stepsizes, reduce each stepsize's resampled values with `reduce` (which
/// maps a resampled value vector to an error, up to a fixed 1/n factor that
/// cancels in the log-log slope), refit, and take the 2.5%/97.5% quantiles.
fn bootstrap_slope_ci(
    per_level_samples: &[Vec<f64>],
    deltas: &[f64],
    resamples: usize,
    seed: u64,
    reduce: impl Fn(&[f64]) -> f64,
) -> Option<(f64, f64)> {
    if per_level_samples.is_empty() || resamples == 0 {
        return None;
    }
    let n = per_level_samples[0].len();
    if n < 2 || deltas.len() < 2 {
        return None;
    }
    let mut stream = RandomStream::new(seed, BOOTSTRAP_STREAM);
    let mut slopes = Vec::with_capacity(resamples);
    let mut resampled = vec![0.0; n];
    for _ in 0..resamples {
        let indices: Vec<usize> = (0..n)
            .map(|_| (stream.next_u64() % n as u64) as usize)
            .collect();
        let mut pairs = Vec::with_capacity(deltas.len());
        for (level, &delta) in deltas.iter().enumerate() {
            for (slot, &idx) in resampled.iter_mut().zip(&indices) {
                *slot = per_level_samples[level][idx];
            }
            pairs.push((delta, reduce(&resampled)));
        }
        if let Ok(fit) = fit_log2(pairs.into_iter()) {
            slopes.push(fit.slope);
        }
    }
    if slopes.len() < 2 {
        return None;
    }
    slopes.sort_by(f64::total_cmp);
    let last = (slopes.len() - 1) as f64;
    let lo = slopes[(0.025 * last).round() as usize];
    let hi = slopes[(0.975 * last).round() as usize];
    Some((lo, hi))
}
