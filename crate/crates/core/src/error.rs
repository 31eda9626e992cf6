//! Shared error type. Messages are prefixed with the subsystem that raised
//! them so CLI users can tell where a run failed.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("stochastic-kernels: invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stochastic-kernels: Levy measure must have finite activity (total mass {mass})")]
    InfiniteActivity { mass: f64 },

    #[error(
        "stochastic-kernels: quadrature did not converge: relative change {change:.3e} \
         after {nodes} nodes (tolerance 1e-8)"
    )]
    QuadratureNonConvergence { change: f64, nodes: usize },

    #[error("stochastic-kernels: measure has no density; analytic compensator required")]
    MissingDensity,

    #[error("time-change: invalid parameter: {0}")]
    TimeChangeParameter(String),

    #[error(
        "time-change: safety cap of {cap} steps exceeded before the subordinator \
         reached the horizon (alpha={alpha}, delta={delta})"
    )]
    SubordinatorCap { cap: usize, alpha: f64, delta: f64 },

    #[error("time-change: coarsening factor {factor} is not a power of two")]
    CoarsenFactorNotPowerOfTwo { factor: usize },

    #[error("time-change: coarsening factor {factor} exceeds the grid length {len}")]
    CoarsenFactorTooLarge { factor: usize, len: usize },

    #[error(
        "time-change: coarsened grid never exceeds the horizon; \
         simulate the source path with at least `factor` padding steps"
    )]
    CoarsenTooShort,

    #[error("time-change: query time {t} outside [0, {horizon}]")]
    QueryOutOfRange { t: f64, horizon: f64 },

    #[error("sde-core: {0}")]
    Problem(String),

    #[error("sde-core: second-moment formula is only defined for the linear builtin problem")]
    NotLinear,

    #[error("theta-solver: invalid configuration: {0}")]
    SolverConfig(String),

    #[error(
        "theta-solver: well-posedness guard violated: \
         theta*sqrt(Cstar)*delta must be < 1 (got {value})"
    )]
    GuardViolation { value: f64 },

    #[error(
        "theta-solver: Newton failed to reach tolerance {tol:.1e} in {max_iter} iterations \
             (residual norm {residual:.3e})"
    )]
    NewtonNonConvergence {
        tol: f64,
        max_iter: usize,
        residual: f64,
    },

    #[error("theta-solver: Jacobian is numerically singular (condition estimate {cond:.3e})")]
    SingularJacobian { cond: f64 },

    #[error("theta-solver: step {step}: {source}")]
    StepFailed { step: usize, source: Box<Error> },

    #[error("theta-solver: {needed} step increments required, only {got} provided")]
    InsufficientIncrements { needed: usize, got: usize },

    #[error("theta-solver: time {t} is beyond the last grid point {last}")]
    BeyondGrid { t: f64, last: f64 },

    #[error(
        "theta-solver: path stepsize {path_delta} does not match time-change stepsize {itc_delta}"
    )]
    GridMismatch { path_delta: f64, itc_delta: f64 },

    #[error("theta-solver: path has {len} states but the time change needs index {index}")]
    PathTooShort { len: usize, index: usize },

    #[error("experiment-harness: {0}")]
    Harness(String),

    #[error("experiment-harness: stepsize {coarse} is not an integer multiple of {fine}")]
    NonDivisibleStepsize { coarse: f64, fine: f64 },

    #[error("experiment-harness: resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("experiment-harness: order fit needs at least 2 rows with positive errors ({usable} usable)")]
    FitUnderdetermined { usable: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
