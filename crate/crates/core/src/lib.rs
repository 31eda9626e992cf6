//! Simulation toolkit for stochastic differential equations driven by
//! time-changed Levy noise.
//!
//! The pieces: deterministic splittable random streams and samplers
//! ([`kernels`]), the alpha-stable subordinator and its discretized inverse
//! ([`time_change`]), problem definitions ([`problem`]), the stochastic
//! theta method and the duality composition `X(t) = Y(E(t))` ([`solver`]),
//! and a coupled-noise Monte Carlo harness for strong/weak convergence-order
//! experiments ([`harness`]).

pub mod error;
pub mod harness;
pub mod kernels;
pub mod problem;
pub mod solver;
pub mod time_change;

pub use error::{Error, Result};
pub use kernels::{
    compensator_value, sample_gaussian_increment, sample_jump_batch, sample_stable_increment,
    JumpBatch, JumpEvent, LevyMeasureSpec, RandomStream,
};
pub use problem::{
    linear_problem, linear_second_moment, paper_example, DiscretePath, ProblemKind, SdeProblem,
};
pub use solver::{
    compose_time_changed, eval_piecewise, newton_solve, simulate_original_path, theta_step,
    SolverConfig, StepIncrements,
};
pub use time_change::{
    build_inverse, coarsen_path, simulate_subordinator, simulate_subordinator_padded,
    InverseTimeChange, SubordinatorPath,
};

pub use harness::{
    aggregate_noise, fit_order, generate_coupled_noise, strong_error_experiment,
    weak_error_experiment, ErrorRow, ErrorTable, ExperimentConfig, NoiseGrid, OrderFit,
    StrongErrorOutcome, WeakErrorOutcome,
};
