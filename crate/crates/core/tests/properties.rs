//! Module invariants as automated tests: randomized structural properties
//! (proptest) plus the Monte Carlo moment and refinement checks that are too
//! heavy for inline unit tests. The desk-scale slope criteria live in the
//! acceptance suite.

use proptest::prelude::*;
use rayon::prelude::*;

use tclevy_core::harness::csv;
use tclevy_core::time_change::eval_inverse_by_scan;
use tclevy_core::{
    aggregate_noise, build_inverse, coarsen_path, compose_time_changed, eval_piecewise,
    generate_coupled_noise, linear_problem, linear_second_moment, paper_example,
    simulate_original_path, simulate_subordinator, weak_error_experiment, DiscretePath,
    ExperimentConfig, RandomStream, SdeProblem, SolverConfig, SubordinatorPath,
};

fn mean_and_se(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Coupled Monte Carlo estimate of E[Y(t)^2] at two stepsizes; returns
/// (estimate at fine delta, standard error, Richardson bias budget).
fn second_moment_estimate(
    problem: &SdeProblem,
    theta: f64,
    fine_delta: f64,
    n_paths: u64,
    seed: u64,
) -> (f64, f64, f64) {
    let coarse_delta = 2.0 * fine_delta;
    let results: Vec<(f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut stream = RandomStream::new(seed, p);
            let noise =
                generate_coupled_noise(&mut stream, fine_delta, 1.0, problem.measure(), 1).unwrap();
            let run = |delta: f64| {
                let config = SolverConfig::new(theta, delta).unwrap();
                let incs = aggregate_noise(&noise, delta).unwrap();
                let path = simulate_original_path(problem, &config, &incs, incs.len()).unwrap();
                let y = path.last_state()[0];
                y * y
            };
            (run(fine_delta), run(coarse_delta))
        })
        .collect();
    let fine: Vec<f64> = results.iter().map(|r| r.0).collect();
    let coarse: Vec<f64> = results.iter().map(|r| r.1).collect();
    let (mean_fine, se) = mean_and_se(&fine);
    let (mean_coarse, _) = mean_and_se(&coarse);
    (mean_fine, se, 2.0 * (mean_coarse - mean_fine).abs())
}

/// The scheme's terminal second moment matches the linear problem's exact
/// formula for every theta, within 5 combined (statistical + bias) units.
#[test]
fn theta_scheme_reproduces_linear_second_moment() {
    let problem = linear_problem(-1.0, 0.5, 0.5);
    let exact = linear_second_moment(&problem, 1.0).unwrap();
    for &theta in &[0.0, 0.5, 1.0] {
        let (estimate, se, bias) =
            second_moment_estimate(&problem, theta, 2f64.powi(-10), 100_000, 600);
        let unit = se + bias;
        assert!(
            (estimate - exact).abs() <= 5.0 * unit,
            "theta={theta}: estimate {estimate} vs exact {exact} (unit {unit})"
        );
    }
}

/// Fine-step Monte Carlo confirms the closed-form second moment of the two
/// documented linear parameter sets.
#[test]
fn linear_second_moment_against_monte_carlo() {
    // diffusion only: E[Y(1)^2] = exp(-1.75)
    let problem = linear_problem(-1.0, 0.5, 0.0);
    let exact = linear_second_moment(&problem, 1.0).unwrap();
    let (estimate, se, bias) = second_moment_estimate(&problem, 0.0, 2f64.powi(-10), 10_000, 601);
    assert!(
        (estimate - exact).abs() <= 5.0 * (se + bias),
        "diffusion case: {estimate} vs {exact}"
    );

    // compensated jumps only: E[Y(1)^2] = exp(2)
    let problem = linear_problem(0.0, 0.0, 1.0);
    let exact = linear_second_moment(&problem, 1.0).unwrap();
    assert!((exact - 2.0f64.exp()).abs() < 1e-12);
    let (estimate, se, bias) = second_moment_estimate(&problem, 0.0, 2f64.powi(-10), 100_000, 602);
    assert!(
        (estimate - exact).abs() <= 5.0 * (se + bias),
        "jump case: {estimate} vs {exact} (se {se}, bias {bias})"
    );
}

/// Composition always lands on a gridpoint: the composed state is exactly a
/// stored path state, never an interpolation.
#[test]
fn composition_lands_on_grid() {
    let problem = paper_example();
    let delta = 2f64.powi(-7);
    let mut sub_stream = RandomStream::new(610, 0);
    let sub = simulate_subordinator(&mut sub_stream, 0.9, delta, 1.0).unwrap();
    let itc = build_inverse(&sub);
    let n_steps = itc.steps_at_horizon();
    let mut noise_stream = RandomStream::new(610, 1);
    let noise_horizon = ((itc.value_at_horizon() + delta) / delta).ceil().max(1.0) * delta;
    let noise = generate_coupled_noise(
        &mut noise_stream,
        delta,
        noise_horizon,
        problem.measure(),
        1,
    )
    .unwrap();
    let incs = aggregate_noise(&noise, delta).unwrap();
    let config = SolverConfig::new(0.5, delta).unwrap();
    let path = simulate_original_path(&problem, &config, &incs, n_steps).unwrap();

    let mut query_stream = RandomStream::new(611, 0);
    for _ in 0..1000 {
        let t = query_stream.uniform();
        let composed = compose_time_changed(&path, &itc, t).unwrap();
        let index = (itc.eval(t).unwrap() / delta).round() as usize;
        assert_eq!(composed, path.state(index));
    }
}

/// Strong errors shrink as the stepsize shrinks, up to one combined
/// standard error between neighbouring rungs.
#[test]
fn strong_error_is_monotone_in_stepsize() {
    let problem = paper_example();
    let deltas: Vec<f64> = [8, 7, 6, 5].iter().map(|e| 2f64.powi(-e)).collect();
    let cfg = ExperimentConfig::new(0.0, 0.9, deltas, 2f64.powi(-10), 500, 1.0, 620);
    let outcome = tclevy_core::strong_error_experiment(&problem, &cfg).unwrap();
    let rows = &outcome.table.rows;
    for pair in rows.windows(2) {
        // rows are sorted by decreasing delta; the finer row may exceed the
        // coarser one by at most the combined standard error
        assert!(
            pair[1].error <= pair[0].error + pair[0].std_error + pair[1].std_error,
            "error rose from {} (delta {}) to {} (delta {})",
            pair[0].error,
            pair[0].delta,
            pair[1].error,
            pair[1].delta
        );
    }
}

/// For affine functionals the weak error scales with the linear coefficient
/// and ignores the offset, up to floating-point roundoff.
#[test]
fn weak_error_affine_functional_scaling() {
    let problem = paper_example();
    let deltas: Vec<f64> = [6, 5].iter().map(|e| 2f64.powi(-e)).collect();
    let cfg = ExperimentConfig::new(0.0, 0.9, deltas, 2f64.powi(-9), 64, 1.0, 630);
    let base = weak_error_experiment(&problem, |x: &[f64]| x[0], &cfg).unwrap();
    let scaled = weak_error_experiment(&problem, |x: &[f64]| 2.0 * x[0] + 3.0, &cfg).unwrap();
    let shifted = weak_error_experiment(&problem, |x: &[f64]| x[0] + 5.0, &cfg).unwrap();
    for ((b, s), sh) in base
        .table
        .rows
        .iter()
        .zip(&scaled.table.rows)
        .zip(&shifted.table.rows)
    {
        let tol = 1e-10 * (1.0 + b.error);
        assert!(
            (s.error - 2.0 * b.error).abs() <= tol,
            "scaling: {} vs 2*{}",
            s.error,
            b.error
        );
        assert!(
            (sh.error - b.error).abs() <= tol,
            "offset: {} vs {}",
            sh.error,
            b.error
        );
    }
}

/// Weak experiments rerun bit-identically, including their CSV rendering.
#[test]
fn weak_experiment_is_deterministic() {
    let problem = linear_problem(-0.5, 0.4, 0.6);
    let cfg = ExperimentConfig::new(
        0.0,
        0.45,
        vec![2f64.powi(-6), 2f64.powi(-5)],
        2f64.powi(-9),
        32,
        1.0,
        640,
    );
    let render = || {
        let outcome = weak_error_experiment(&problem, |x: &[f64]| x[0], &cfg).unwrap();
        let mut bytes = Vec::new();
        csv::write_error_table(&mut bytes, &outcome.table).unwrap();
        bytes
    };
    assert_eq!(render(), render());
}

/// Random-path structural checks of the inverse time change and of the
/// piecewise path evaluation.
mod structural {
    use super::*;

    fn arbitrary_path() -> impl Strategy<Value = (SubordinatorPath, f64)> {
        (
            prop::collection::vec(1e-6f64..2.0, 1..120),
            0.05f64..0.95,
            prop_oneof![Just(0.5f64), Just(0.25), Just(0.125)],
        )
            .prop_filter_map(
                "horizon must fall strictly inside the path",
                |(incs, frac, delta)| {
                    let mut values = vec![0.0];
                    let mut total = 0.0;
                    for inc in &incs {
                        total += inc;
                        values.push(total);
                    }
                    let horizon = frac * total;
                    if horizon <= 0.0 {
                        return None;
                    }
                    SubordinatorPath::from_values(0.5, delta, horizon, values)
                        .ok()
                        .map(|p| (p, horizon))
                },
            )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn inverse_matches_brute_force_everywhere((path, horizon) in arbitrary_path()) {
            let itc = build_inverse(&path);
            prop_assert_eq!(itc.value_at_horizon(), itc.eval(horizon).unwrap());
            let mut previous = 0.0;
            for j in 0..=64 {
                let t = horizon * j as f64 / 64.0;
                let fast = itc.eval(t).unwrap();
                let slow = eval_inverse_by_scan(&path, t).unwrap();
                prop_assert_eq!(fast, slow);
                prop_assert!(fast >= previous);
                previous = fast;
            }
            // exact breakpoints belong to the left-closed interval
            let n_last = path.last_index_within_horizon();
            for n in 0..=n_last {
                let t = path.values()[n];
                prop_assert_eq!(itc.eval(t).unwrap(), n as f64 * path.delta());
            }
        }

        #[test]
        fn coarsened_inverse_matches_brute_force(
            (path, horizon) in arbitrary_path(),
            factor in prop_oneof![Just(2usize), Just(4)],
        ) {
            prop_assume!(path.values().len() > factor);
            let coarse = match coarsen_path(&path, factor) {
                Ok(c) => c,
                // subsampling may legitimately lose the exceedance
                Err(_) => return Ok(()),
            };
            let itc = build_inverse(&coarse);
            for j in 0..=64 {
                let t = horizon * j as f64 / 64.0;
                prop_assert_eq!(itc.eval(t).unwrap(), eval_inverse_by_scan(&coarse, t).unwrap());
            }
        }

        #[test]
        fn piecewise_eval_matches_interval_scan(
            states in prop::collection::vec(-100.0f64..100.0, 2..40),
            delta in prop_oneof![Just(0.5f64), Just(0.125), Just(0.03125)],
            frac in 0.0f64..1.0,
        ) {
            let path = DiscretePath::from_states(delta, 1, states.clone());
            let last = (states.len() - 1) as f64 * delta;
            let t = frac * last;
            let value = eval_piecewise(&path, t).unwrap()[0];
            // scan for the interval [n delta, (n+1) delta) containing t
            let mut expected = states[states.len() - 1];
            for n in 0..states.len() {
                let left = n as f64 * delta;
                let right = (n + 1) as f64 * delta;
                if t >= left && t < right {
                    expected = states[n];
                    break;
                }
            }
            prop_assert_eq!(value, expected);
        }
    }
}

/// The measure's jump events never leave the coarse windows they are
/// assigned to, for arbitrary refinement factors.
#[test]
fn aggregated_jump_offsets_stay_in_window() {
    let problem = paper_example();
    let mut stream = RandomStream::new(650, 0);
    let fine_delta = 2f64.powi(-9);
    let noise = generate_coupled_noise(&mut stream, fine_delta, 2.0, problem.measure(), 1).unwrap();
    for k in [1usize, 4, 32, 128] {
        let coarse = fine_delta * k as f64;
        let incs = aggregate_noise(&noise, coarse).unwrap();
        let total: usize = incs.iter().map(|i| i.jumps.len()).sum();
        assert_eq!(total, noise.jump_events().len(), "k={k}");
        for inc in &incs {
            for e in &inc.jumps.events {
                assert!((0.0..coarse).contains(&e.offset));
            }
        }
    }
}
