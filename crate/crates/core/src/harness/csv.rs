//! CSV emission for experiment tables and path dumps. All formatting uses
//! the shortest round-trip float representation, so identical runs produce
//! byte-identical files.

use std::io::Write;

use crate::error::Result;
use crate::harness::ErrorTable;
use crate::problem::DiscretePath;
use crate::solver::compose_time_changed;
use crate::time_change::{InverseTimeChange, SubordinatorPath};

/// `delta,error,stderr` rows followed by metadata comment lines.
pub fn write_error_table(w: &mut impl Write, table: &ErrorTable) -> Result<()> {
    writeln!(w, "delta,error,stderr")?;
    for row in &table.rows {
        writeln!(w, "{},{},{}", row.delta, row.error, row.std_error)?;
    }
    writeln!(w, "# theta={}", table.theta)?;
    writeln!(w, "# alpha={}", table.alpha)?;
    writeln!(w, "# n_paths={}", table.n_paths)?;
    writeln!(w, "# ref_delta={}", table.ref_delta)?;
    writeln!(w, "# seed={}", table.seed)?;
    match &table.fit {
        Some(fit) => writeln!(w, "# slope={}", fit.slope)?,
        None => writeln!(w, "# slope=nan")?,
    }
    Ok(())
}

/// Gnuplot-ready companion: space-separated `log2(delta) log2(error)`,
/// skipping rows whose error cannot enter the log fit.
pub fn write_log2_companion(w: &mut impl Write, table: &ErrorTable) -> Result<()> {
    writeln!(w, "# log2_delta log2_error")?;
    for row in &table.rows {
        if row.error > 0.0 && row.error.is_finite() {
            writeln!(w, "{} {}", row.delta.log2(), row.error.log2())?;
        }
    }
    Ok(())
}

/// `n,t_n,D_t_n` staircase data of a subordinator path.
pub fn write_subordinator_csv(w: &mut impl Write, path: &SubordinatorPath) -> Result<()> {
    writeln!(w, "n,t_n,D_t_n")?;
    for (n, value) in path.values().iter().enumerate() {
        writeln!(w, "{},{},{}", n, n as f64 * path.delta(), value)?;
    }
    Ok(())
}

/// `t,E_delta_t` sampled on a uniform grid of `points` intervals over
/// `[0, horizon]`.
pub fn write_inverse_csv(w: &mut impl Write, itc: &InverseTimeChange, points: usize) -> Result<()> {
    writeln!(w, "t,E_delta_t")?;
    let horizon = itc.horizon();
    for j in 0..=points {
        let t = horizon * j as f64 / points as f64;
        writeln!(w, "{},{}", t, itc.eval(t)?)?;
    }
    Ok(())
}

/// `n,t_n,Y_n` states of a discrete path; components joined by spaces when
/// the state dimension exceeds one.
pub fn write_path_csv(w: &mut impl Write, path: &DiscretePath) -> Result<()> {
    writeln!(w, "n,t_n,Y_n")?;
    for n in 0..path.len() {
        let state = path.state(n);
        let joined = state
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "{},{},{}", n, n as f64 * path.delta(), joined)?;
    }
    Ok(())
}

/// `t,X_delta_t` of the time-changed solution on a uniform query grid.
pub fn write_time_changed_csv(
    w: &mut impl Write,
    path: &DiscretePath,
    itc: &InverseTimeChange,
    points: usize,
) -> Result<()> {
    writeln!(w, "t,X_delta_t")?;
    let horizon = itc.horizon();
    for j in 0..=points {
        let t = horizon * j as f64 / points as f64;
        let state = compose_time_changed(path, itc, t)?;
        let joined = state
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "{},{}", t, joined)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ErrorRow, OrderFit};
    use crate::time_change::build_inverse;

    fn sample_table() -> ErrorTable {
        ErrorTable {
            label: "strong theta=0 alpha=0.9".into(),
            theta: 0.0,
            alpha: 0.9,
            rows: vec![
                ErrorRow {
                    delta: 0.25,
                    error: 0.5,
                    std_error: 0.01,
                },
                ErrorRow {
                    delta: 0.125,
                    error: 0.35,
                    std_error: 0.008,
                },
            ],
            ref_delta: 0.015625,
            n_paths: 100,
            seed: 7,
            fit: Some(OrderFit {
                slope: 0.51,
                intercept: 0.0,
                used_rows: 2,
                excluded_rows: 0,
            }),
            slope_ci: Some((0.4, 0.6)),
        }
    }

    #[test]
    fn error_table_layout() {
        let mut buf = Vec::new();
        write_error_table(&mut buf, &sample_table()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "delta,error,stderr");
        assert_eq!(lines[1], "0.25,0.5,0.01");
        assert!(lines.contains(&"# theta=0"));
        assert!(lines.contains(&"# alpha=0.9"));
        assert!(lines.contains(&"# n_paths=100"));
        assert!(lines.contains(&"# ref_delta=0.015625"));
        assert!(lines.contains(&"# seed=7"));
        assert!(lines.contains(&"# slope=0.51"));
    }

    #[test]
    fn log2_companion_layout() {
        let mut buf = Vec::new();
        write_log2_companion(&mut buf, &sample_table()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# log2_delta log2_error");
        assert_eq!(lines[1], "-2 -1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn inverse_csv_is_monotone_staircase() {
        let path = SubordinatorPath::from_values(0.5, 0.5, 2.0, vec![0.0, 0.3, 0.9, 2.1]).unwrap();
        let itc = build_inverse(&path);
        let mut buf = Vec::new();
        write_inverse_csv(&mut buf, &itc, 10).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut last = -1.0;
        for line in text.lines().skip(1) {
            let (_, e) = line.split_once(',').unwrap();
            let e: f64 = e.parse().unwrap();
            assert!(e >= last);
            last = e;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn subordinator_csv_rows_match_grid() {
        let path = SubordinatorPath::from_values(0.5, 0.5, 2.0, vec![0.0, 0.3, 0.9, 2.1]).unwrap();
        let mut buf = Vec::new();
        write_subordinator_csv(&mut buf, &path).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().nth(2).unwrap(), "1,0.5,0.3");
    }
}
