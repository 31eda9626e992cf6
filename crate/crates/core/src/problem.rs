//! Problem definitions: the coefficient-evaluation contract shared by every
//! solver, the built-in benchmark problem and an analytically tractable
//! linear problem whose second moment is known in closed form.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{compensator_value, LevyMeasureSpec, RandomStream};

/// Drift/diffusion evaluator: `(t, x, out)`. The diffusion writes a
/// `d x m` matrix into `out` in row-major order.
pub type Coeff = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
/// Jump evaluator: `(t, x, z, out)`.
pub type JumpCoeff = dyn Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync;

/// How the compensator `integral of h(t,x,z) nu(dz)` is obtained.
#[derive(Clone)]
pub enum Compensator {
    /// Closed form supplied by the problem author (preferred).
    Analytic(Arc<Coeff>),
    /// Fall back to Gauss-Legendre quadrature against the measure density.
    Quadrature,
}

/// Identifies the built-in families so oracles can recover their parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    Example,
    Linear { a: f64, b: f64, jump_scale: f64 },
    Custom,
}

/// An SDE `dY = f dt + g dW + integral h dN~` with globally Lipschitz
/// coefficients and a finite-activity jump measure.
#[derive(Clone)]
pub struct SdeProblem {
    dim: usize,
    brownian_dim: usize,
    x0: Vec<f64>,
    drift: Arc<Coeff>,
    diffusion: Arc<Coeff>,
    jump: Arc<JumpCoeff>,
    compensator: Compensator,
    drift_jacobian: Option<Arc<Coeff>>,
    measure: LevyMeasureSpec,
    /// User-supplied global Lipschitz bound C* (squared-increment form).
    lipschitz_bound: f64,
    /// Hoelder exponent of the coefficients in time.
    time_hoelder: f64,
    /// Author's assertion that the coefficients admit p-th moment growth
    /// bounds for every p >= 2 (needed by weak-order runs; not machine
    /// checkable, so it is metadata rather than a validated property).
    asserts_moment_bounds: bool,
    kind: ProblemKind,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("dim", &self.dim)
            .field("brownian_dim", &self.brownian_dim)
            .field("x0", &self.x0)
            .field("kind", &self.kind)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .field("time_hoelder", &self.time_hoelder)
            .finish()
    }
}

/// Builder for user-supplied problems.
pub struct SdeProblemBuilder {
    inner: SdeProblem,
}

impl SdeProblemBuilder {
    pub fn drift_jacobian(mut self, jac: Arc<Coeff>) -> Self {
        self.inner.drift_jacobian = Some(jac);
        self
    }

    pub fn analytic_compensator(mut self, comp: Arc<Coeff>) -> Self {
        self.inner.compensator = Compensator::Analytic(comp);
        self
    }

    pub fn lipschitz_bound(mut self, cstar: f64) -> Self {
        self.inner.lipschitz_bound = cstar;
        self
    }

    pub fn time_hoelder(mut self, gamma: f64) -> Self {
        self.inner.time_hoelder = gamma;
        self
    }

    pub fn asserts_moment_bounds(mut self, asserted: bool) -> Self {
        self.inner.asserts_moment_bounds = asserted;
        self
    }

    pub fn build(self) -> Result<SdeProblem> {
        let p = self.inner;
        if p.dim == 0 || p.brownian_dim == 0 {
            return Err(Error::Problem(
                "state and Brownian dimensions must be >= 1".into(),
            ));
        }
        if p.x0.len() != p.dim {
            return Err(Error::Problem(format!(
                "initial state has {} components, expected {}",
                p.x0.len(),
                p.dim
            )));
        }
        if !(p.lipschitz_bound > 0.0 && p.lipschitz_bound.is_finite()) {
            return Err(Error::Problem("Lipschitz bound C* must be positive".into()));
        }
        if !(p.time_hoelder > 0.0 && p.time_hoelder.is_finite()) {
            return Err(Error::Problem(
                "time Hoelder exponent must be positive".into(),
            ));
        }
        Ok(p)
    }
}

impl SdeProblem {
    /// Start building a problem; the compensator defaults to quadrature and
    /// C*, gamma default to 1.
    pub fn builder(
        dim: usize,
        brownian_dim: usize,
        x0: Vec<f64>,
        drift: Arc<Coeff>,
        diffusion: Arc<Coeff>,
        jump: Arc<JumpCoeff>,
        measure: LevyMeasureSpec,
    ) -> SdeProblemBuilder {
        SdeProblemBuilder {
            inner: SdeProblem {
                dim,
                brownian_dim,
                x0,
                drift,
                diffusion,
                jump,
                compensator: Compensator::Quadrature,
                drift_jacobian: None,
                measure,
                lipschitz_bound: 1.0,
                time_hoelder: 1.0,
                asserts_moment_bounds: false,
                kind: ProblemKind::Custom,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn brownian_dim(&self) -> usize {
        self.brownian_dim
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn measure(&self) -> &LevyMeasureSpec {
        &self.measure
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn time_hoelder(&self) -> f64 {
        self.time_hoelder
    }

    pub fn moment_bounds_asserted(&self) -> bool {
        self.asserts_moment_bounds
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out);
    }

    pub fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, out);
    }

    pub fn jump(&self, t: f64, x: &[f64], z: f64, out: &mut [f64]) {
        (self.jump)(t, x, z, out);
    }

    /// `out = integral of h(t, x, z) nu(dz)`, analytic when available.
    pub fn compensator(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.compensator {
            Compensator::Analytic(f) => {
                f(t, x, out);
                Ok(())
            }
            Compensator::Quadrature => {
                let jump = &self.jump;
                compensator_value(&self.measure, |z, o| jump(t, x, z, o), out)
            }
        }
    }

    /// Analytic drift Jacobian if the problem carries one (`d x d`,
    /// row-major). Returns false when the caller must fall back to finite
    /// differences.
    pub fn drift_jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        match &self.drift_jacobian {
            Some(jac) => {
                jac(t, x, out);
                true
            }
            None => false,
        }
    }

    pub fn has_drift_jacobian(&self) -> bool {
        self.drift_jacobian.is_some()
    }

    /// Spot-check the Lipschitz metadata on random pairs: for states in
    /// `[-5,5]^d` and times in `[0,5]`,
    /// `|f(t,x)-f(t,y)|^2 + |g(t,x)-g(t,y)|^2 <= 1.01 * C* * |x-y|^2`.
    pub fn spot_check_lipschitz(&self, stream: &mut RandomStream, pairs: usize) -> Result<()> {
        let d = self.dim;
        let m = self.brownian_dim;
        let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
        let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
        let (mut gx, mut gy) = (vec![0.0; d * m], vec![0.0; d * m]);
        for _ in 0..pairs {
            let t = 5.0 * stream.uniform();
            for i in 0..d {
                x[i] = 10.0 * stream.uniform() - 5.0;
                y[i] = 10.0 * stream.uniform() - 5.0;
            }
            self.drift(t, &x, &mut fx);
            self.drift(t, &y, &mut fy);
            self.diffusion(t, &x, &mut gx);
            self.diffusion(t, &y, &mut gy);
            let df: f64 = fx.iter().zip(&fy).map(|(a, b)| (a - b) * (a - b)).sum();
            let dg: f64 = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum();
            let dx: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
            if df + dg > 1.01 * self.lipschitz_bound * dx {
                return Err(Error::Problem(format!(
                    "Lipschitz spot check failed at t={t}: {} > 1.01 * {} * {dx}",
                    df + dg,
                    self.lipschitz_bound
                )));
            }
        }
        Ok(())
    }
}

/// The built-in one-dimensional benchmark:
/// `f(t,x) = sin(t) + x`, `g(t,x) = t + sin(x)`, `h(t,x,z) = x z`,
/// `nu(dz) = 2 phi(z) dz` (standard normal density `phi`), `x0 = 1`.
/// The measure is symmetric, so the compensator vanishes identically.
pub fn paper_example() -> SdeProblem {
    let measure = LevyMeasureSpec::scaled_gaussian(2.0).expect("finite measure");
    SdeProblem::builder(
        1,
        1,
        vec![1.0],
        Arc::new(|t: f64, x: &[f64], out: &mut [f64]| out[0] = t.sin() + x[0]),
        Arc::new(|t: f64, x: &[f64], out: &mut [f64]| out[0] = t + x[0].sin()),
        Arc::new(|_t: f64, x: &[f64], z: f64, out: &mut [f64]| out[0] = x[0] * z),
        measure,
    )
    .analytic_compensator(Arc::new(|_t, _x, out: &mut [f64]| out[0] = 0.0))
    .drift_jacobian(Arc::new(|_t, _x, out: &mut [f64]| out[0] = 1.0))
    .lipschitz_bound(3.0)
    .time_hoelder(2.0)
    .asserts_moment_bounds(true)
    .build()
    .map(|mut p| {
        p.kind = ProblemKind::Example;
        p
    })
    .expect("builtin problem is valid")
}

/// Linear test problem `f = a x`, `g = b x`, `h = s x z` with the same
/// symmetric jump measure as the benchmark; its second moment is exact.
pub fn linear_problem(a: f64, b: f64, jump_scale: f64) -> SdeProblem {
    let measure = LevyMeasureSpec::scaled_gaussian(2.0).expect("finite measure");
    let cstar = (a * a + b * b + jump_scale * jump_scale * measure.second_moment()).max(1e-12);
    SdeProblem::builder(
        1,
        1,
        vec![1.0],
        Arc::new(move |_t: f64, x: &[f64], out: &mut [f64]| out[0] = a * x[0]),
        Arc::new(move |_t: f64, x: &[f64], out: &mut [f64]| out[0] = b * x[0]),
        Arc::new(move |_t: f64, x: &[f64], z: f64, out: &mut [f64]| out[0] = jump_scale * x[0] * z),
        measure,
    )
    .analytic_compensator(Arc::new(|_t, _x, out: &mut [f64]| out[0] = 0.0))
    .drift_jacobian(Arc::new(move |_t, _x, out: &mut [f64]| out[0] = a))
    .lipschitz_bound(cstar)
    .time_hoelder(1.0)
    .asserts_moment_bounds(true)
    .build()
    .map(|mut p| {
        p.kind = ProblemKind::Linear { a, b, jump_scale };
        p
    })
    .expect("builtin problem is valid")
}

/// Exact `E[|Y(t)|^2]` of the linear problem:
/// `x0^2 * exp((2a + b^2 + s^2 * integral z^2 nu(dz)) * t)`.
pub fn linear_second_moment(problem: &SdeProblem, t: f64) -> Result<f64> {
    match problem.kind {
        ProblemKind::Linear { a, b, jump_scale } => {
            let rate = 2.0 * a + b * b + jump_scale * jump_scale * problem.measure.second_moment();
            Ok(problem.x0[0] * problem.x0[0] * (rate * t).exp())
        }
        _ => Err(Error::NotLinear),
    }
}

/// A discretized solution: states on the uniform grid `t_n = n * delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    delta: f64,
    dim: usize,
    data: Vec<f64>,
}

impl DiscretePath {
    pub fn new(delta: f64, x0: &[f64]) -> Self {
        Self {
            delta,
            dim: x0.len(),
            data: x0.to_vec(),
        }
    }

    pub fn from_states(delta: f64, dim: usize, data: Vec<f64>) -> Self {
        assert!(dim >= 1 && data.len().is_multiple_of(dim) && !data.is_empty());
        Self { delta, dim, data }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored states (grid points), at least 1.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub(crate) fn push_state(&mut self, state: &[f64]) {
        debug_assert_eq!(state.len(), self.dim);
        self.data.extend_from_slice(state);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_coefficients_spot_values() {
        let p = paper_example();
        let mut out = [0.0];
        p.drift(0.0, &[1.0], &mut out);
        assert_eq!(out[0], 1.0); // sin(0) + 1
        p.diffusion(std::f64::consts::PI, &[0.0], &mut out);
        assert_eq!(out[0], std::f64::consts::PI); // pi + sin(0)
        p.jump(0.3, &[3.0], -2.0, &mut out);
        assert_eq!(out[0], -6.0);
        assert_eq!(p.measure().total_mass(), 2.0);
        assert_eq!(p.x0(), &[1.0]);
        assert!(p.moment_bounds_asserted());
    }

    #[test]
    fn example_compensator_is_zero() {
        let p = paper_example();
        let mut out = [1.0];
        for (t, x) in [(0.0, 2.0), (1.5, -3.0), (4.0, 0.25)] {
            p.compensator(t, &[x], &mut out).unwrap();
            assert_eq!(out[0], 0.0);
        }
    }

    #[test]
    fn example_quadrature_route_agrees_with_analytic_zero() {
        // Dropping the analytic compensator forces the quadrature fallback,
        // which must reproduce the symmetric-measure zero.
        let p = paper_example();
        let mut out = [1.0];
        let jump = |z: f64, o: &mut [f64]| p.jump(0.7, &[2.5], z, o);
        compensator_value(p.measure(), jump, &mut out).unwrap();
        assert!(out[0].abs() < 1e-10);
    }

    #[test]
    fn example_satisfies_lipschitz_spot_check() {
        let p = paper_example();
        let mut stream = RandomStream::new(40, 0);
        p.spot_check_lipschitz(&mut stream, 1000).unwrap();
    }

    #[test]
    fn example_time_hoelder_spot_check() {
        // |f(t,x)-f(s,x)|^2 + |g(t,x)-g(s,x)|^2 <= 2 (1+|x|^2) |t-s|^2
        let p = paper_example();
        let mut stream = RandomStream::new(41, 0);
        let (mut ft, mut fs, mut gt, mut gs) = ([0.0], [0.0], [0.0], [0.0]);
        for _ in 0..1000 {
            let t = 5.0 * stream.uniform();
            let s = 5.0 * stream.uniform();
            let x = [10.0 * stream.uniform() - 5.0];
            p.drift(t, &x, &mut ft);
            p.drift(s, &x, &mut fs);
            p.diffusion(t, &x, &mut gt);
            p.diffusion(s, &x, &mut gs);
            let lhs = (ft[0] - fs[0]).powi(2) + (gt[0] - gs[0]).powi(2);
            let rhs = 2.0 * (1.0 + x[0] * x[0]) * (t - s) * (t - s);
            assert!(lhs <= rhs + 1e-12, "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn linear_zero_dynamics_is_constant() {
        let p = linear_problem(0.0, 0.0, 0.0);
        let (mut f, mut g) = ([1.0], [1.0]);
        p.drift(1.0, &[2.0], &mut f);
        p.diffusion(1.0, &[2.0], &mut g);
        assert_eq!(f[0], 0.0);
        assert_eq!(g[0], 0.0);
        assert_eq!(linear_second_moment(&p, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn linear_second_moment_values() {
        let p = linear_problem(-1.0, 0.5, 0.0);
        assert_eq!(linear_second_moment(&p, 0.0).unwrap(), 1.0);
        let expect = (-1.75f64).exp();
        assert!((linear_second_moment(&p, 1.0).unwrap() - expect).abs() < 1e-15);

        let pj = linear_problem(0.0, 0.0, 1.0);
        let expect = (2.0f64).exp();
        assert!((linear_second_moment(&pj, 1.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn linear_second_moment_scales_with_x0() {
        let p = linear_problem(-0.5, 0.3, 0.7);
        let mut doubled = p.clone();
        doubled.x0 = vec![2.0];
        for t in [0.0, 0.5, 1.0, 2.0] {
            let base = linear_second_moment(&p, t).unwrap();
            let big = linear_second_moment(&doubled, t).unwrap();
            assert_eq!(big, 4.0 * base);
        }
    }

    #[test]
    fn second_moment_rejects_other_problems() {
        let p = paper_example();
        assert!(matches!(
            linear_second_moment(&p, 1.0),
            Err(Error::NotLinear)
        ));
    }

    #[test]
    fn discrete_path_layout() {
        let mut path = DiscretePath::new(0.5, &[1.0, 2.0]);
        path.push_state(&[3.0, 4.0]);
        assert_eq!(path.len(), 2);
        assert_eq!(path.state(0), &[1.0, 2.0]);
        assert_eq!(path.state(1), &[3.0, 4.0]);
        assert_eq!(path.last_state(), &[3.0, 4.0]);
    }
}
