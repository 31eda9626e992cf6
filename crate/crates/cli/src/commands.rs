//! Command dispatch. Output files are written atomically (temp file in the
//! target directory, then rename), so a failed run leaves nothing behind.

use std::path::{Path, PathBuf};

use tclevy_core::harness::csv;
use tclevy_core::{
    aggregate_noise, build_inverse, generate_coupled_noise, simulate_original_path,
    simulate_subordinator, strong_error_experiment, weak_error_experiment, ErrorTable,
    ExperimentConfig, RandomStream, SolverConfig,
};

use crate::config::{CommandKind, PhiChoice, RunConfig};

pub fn run(config: &RunConfig) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(threads) = config.threads {
        // ignore a second initialization (tests may run several configs in
        // one process); the first pool wins
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match config.command {
        CommandKind::Subordinator => run_subordinator(config),
        CommandKind::Inverse => run_inverse(config),
        CommandKind::Path => run_path(config),
        CommandKind::StrongOrder => run_strong(config),
        CommandKind::WeakOrder => run_weak(config),
    }
}

fn run_subordinator(config: &RunConfig) -> Result<(), Box<dyn std::error::Error>> {
    let delta = config.deltas()[0];
    let mut stream = RandomStream::new(config.seed, 0);
    let path = simulate_subordinator(&mut stream, config.alpha, delta, config.horizon)?;
    write_atomic(&config.out, |buf| csv::write_subordinator_csv(buf, &path))?;
    println!(
        "subordinator: alpha={} delta={} N={} wrote {}",
        config.alpha,
        delta,
        path.last_index_within_horizon(),
        config.out.display()
    );
    Ok(())
}

fn run_inverse(config: &RunConfig) -> Result<(), Box<dyn std::error::Error>> {
    let delta = config.deltas()[0];
    let mut stream = RandomStream::new(config.seed, 0);
    let path = simulate_subordinator(&mut stream, config.alpha, delta, config.horizon)?;
    let itc = build_inverse(&path);
    write_atomic(&config.out, |buf| {
        csv::write_inverse_csv(buf, &itc, config.points)
    })?;
    println!(
        "inverse: alpha={} delta={} E(T)={} wrote {}",
        config.alpha,
        delta,
        itc.value_at_horizon(),
        config.out.display()
    );
    Ok(())
}

fn run_path(config: &RunConfig) -> Result<(), Box<dyn std::error::Error>> {
    let delta = config.deltas()[0];
    let problem = config.problem.build();
    let solver = SolverConfig::new(config.theta, delta)?;
    warn_if_rate_condition_fails(&solver, &problem);

    // stream layout mirrors the harness: component 0 drives the
    // subordinator, component 1 the Brownian/jump noise
    let mut sub_stream = RandomStream::new(config.seed, 0);
    let sub = simulate_subordinator(&mut sub_stream, config.alpha, delta, config.horizon)?;
    let itc = build_inverse(&sub);
    let n_steps = itc.steps_at_horizon();
    let noise_horizon = ((itc.value_at_horizon() + delta) / delta).ceil().max(1.0) * delta;
    let mut noise_stream = RandomStream::new(config.seed, 1);
    let noise = generate_coupled_noise(
        &mut noise_stream,
        delta,
        noise_horizon,
        problem.measure(),
        problem.brownian_dim(),
    )?;
    let increments = aggregate_noise(&noise, delta)?;
    let path = simulate_original_path(&problem, &solver, &increments, n_steps)?;

    write_atomic(&config.out, |buf| {
        csv::write_time_changed_csv(buf, &path, &itc, config.points)
    })?;
    if let Some(original_out) = &config.original_out {
        write_atomic(original_out, |buf| csv::write_path_csv(buf, &path))?;
    }
    println!(
        "path: theta={} alpha={} delta={} steps={} wrote {}",
        config.theta,
        config.alpha,
        delta,
        n_steps,
        config.out.display()
    );
    Ok(())
}

fn experiment_config(config: &RunConfig) -> ExperimentConfig {
    ExperimentConfig::new(
        config.theta,
        config.alpha,
        config.deltas(),
        config.ref_delta(),
        config.n_paths,
        config.horizon,
        config.seed,
    )
}

fn run_strong(config: &RunConfig) -> Result<(), Box<dyn std::error::Error>> {
    let problem = config.problem.build();
    let coarsest = SolverConfig::new(config.theta, config.deltas()[0])?;
    warn_if_rate_condition_fails(&coarsest, &problem);
    let outcome = strong_error_experiment(&problem, &experiment_config(config))?;
    write_table_outputs(config, &outcome.table)?;
    print_order_summary("strong-order", config, &outcome.table);
    Ok(())
}

fn run_weak(config: &RunConfig) -> Result<(), Box<dyn std::error::Error>> {
    let problem = config.problem.build();
    if !problem.moment_bounds_asserted() {
        eprintln!(
            "warning: the problem does not assert p-th moment coefficient bounds; \
             weak-order estimates may not have the expected rate"
        );
    }
    let cfg = experiment_config(config);
    let outcome = match config.phi {
        PhiChoice::Identity => weak_error_experiment(&problem, |x: &[f64]| x[0], &cfg)?,
        PhiChoice::Square => {
            weak_error_experiment(&problem, |x: &[f64]| x.iter().map(|v| v * v).sum(), &cfg)?
        }
    };
    write_table_outputs(config, &outcome.table)?;
    print_order_summary("weak-order", config, &outcome.table);
    Ok(())
}

fn warn_if_rate_condition_fails(solver: &SolverConfig, problem: &tclevy_core::SdeProblem) {
    if !solver.rate_condition_holds(problem) {
        eprintln!(
            "warning: theta*(1+sqrt(Cstar))*delta = {} is not below 1/2; the order-1/2 error \
             bound is not guaranteed at this stepsize (solvability is unaffected)",
            solver.theta * (1.0 + problem.lipschitz_bound().sqrt()) * solver.delta
        );
    }
}

/// `foo.csv -> foo_log2.dat` next to the main output.
fn companion_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}_log2.dat"))
}

fn write_table_outputs(
    config: &RunConfig,
    table: &ErrorTable,
) -> Result<(), Box<dyn std::error::Error>> {
    write_atomic(&config.out, |buf| csv::write_error_table(buf, table))?;
    write_atomic(&companion_path(&config.out), |buf| {
        csv::write_log2_companion(buf, table)
    })?;
    Ok(())
}

fn print_order_summary(label: &str, config: &RunConfig, table: &ErrorTable) {
    let slope = table.fit.map(|f| f.slope).unwrap_or(f64::NAN);
    let ci = table
        .slope_ci
        .map(|(lo, hi)| format!(" ci95=[{lo:.4},{hi:.4}]"))
        .unwrap_or_default();
    if let Some(fit) = &table.fit {
        if fit.excluded_rows > 0 {
            eprintln!(
                "warning: {} stepsize rows had nonpositive errors and were excluded from the fit",
                fit.excluded_rows
            );
        }
    }
    println!(
        "{label}: theta={} alpha={} paths={} slope={slope:.4}{ci} wrote {} and {}",
        config.theta,
        config.alpha,
        config.n_paths,
        config.out.display(),
        companion_path(&config.out).display()
    );
}

/// Build the whole file in memory, then write a temp file in the target
/// directory and rename it over the destination. Nothing is written on error.
fn write_atomic(
    path: &Path,
    build: impl FnOnce(&mut Vec<u8>) -> tclevy_core::Result<()>,
) -> Result<(), Box<dyn std::error::Error>> {
    let mut buf = Vec::new();
    build(&mut buf)?;
    let tmp = path.with_file_name(format!(
        "{}.tmp-{}",
        path.file_name().unwrap_or_default().to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(&tmp, &buf).map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        std::fs::remove_file(&tmp).ok();
        format!("cannot move output into place at {}: {e}", path.display())
    })?;
    Ok(())
}
