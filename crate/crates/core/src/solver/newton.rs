//! Newton iteration for the implicit drift solve, with a dense LU
//! factorization sized for small state dimensions.

use crate::error::{Error, Result};

/// LU factorization with partial pivoting of a row-major `n x n` matrix.
pub(crate) struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub(crate) fn factor(a: &[f64], n: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = lu[col * n + col].abs();
            for row in col + 1..n {
                let v = lu[row * n + col].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = row;
                }
            }
            if pivot_val <= f64::EPSILON * scale.max(1.0) * 1e-4 {
                return Err(Error::SingularJacobian {
                    cond: f64::INFINITY,
                });
            }
            if pivot_row != col {
                for k in 0..n {
                    lu.swap(col * n + k, pivot_row * n + k);
                }
                perm.swap(col, pivot_row);
            }
            let inv_pivot = 1.0 / lu[col * n + col];
            for row in col + 1..n {
                let factor = lu[row * n + col] * inv_pivot;
                lu[row * n + col] = factor;
                for k in col + 1..n {
                    lu[row * n + k] -= factor * lu[col * n + k];
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub(crate) fn solve(&self, b: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] = b[self.perm[i]];
        }
        for i in 0..n {
            for k in 0..i {
                out[i] -= self.lu[i * n + k] * out[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                out[i] -= self.lu[i * n + k] * out[k];
            }
            out[i] /= self.lu[i * n + i];
        }
    }

    /// 1-norm condition estimate via the explicit inverse (n extra solves;
    /// fine for the small systems the drift solve produces).
    pub(crate) fn condition_estimate(&self, a: &[f64]) -> f64 {
        let n = self.n;
        let norm_a = (0..n)
            .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let mut unit = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut norm_inv = 0.0f64;
        for j in 0..n {
            unit.fill(0.0);
            unit[j] = 1.0;
            self.solve(&unit, &mut col);
            norm_inv = norm_inv.max(col.iter().map(|v| v.abs()).sum());
        }
        norm_a * norm_inv
    }
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Jacobian callback: fills a row-major `n x n` matrix at the given point.
pub type JacobianFn<'a> = &'a dyn Fn(&[f64], &mut [f64]);

/// Outcome of a Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub root: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Solve `residual(x) = 0` starting from `x0`.
///
/// The Jacobian is the caller's analytic one when given, otherwise forward
/// finite differences with per-component step `sqrt(eps) * (1 + |x_j|)`.
/// Returns once the residual norm drops to `tol`; a condition estimate above
/// 1e12 reports the Jacobian as singular.
pub fn newton_solve(
    residual: impl Fn(&[f64], &mut [f64]),
    jacobian: Option<JacobianFn<'_>>,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::SolverConfig(format!(
            "Newton tolerance must be positive, got {tol}"
        )));
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut jac = vec![0.0; n * n];
    let mut step = vec![0.0; n];
    let mut perturbed = vec![0.0; n];
    let mut r_shift = vec![0.0; n];

    residual(&x, &mut r);
    let mut norm = euclidean_norm(&r);
    if norm <= tol {
        return Ok(NewtonOutcome {
            root: x,
            iterations: 0,
            residual_norm: norm,
        });
    }

    for iteration in 1..=max_iter {
        match jacobian {
            Some(j) => j(&x, &mut jac),
            None => {
                for col in 0..n {
                    let h = f64::EPSILON.sqrt() * (1.0 + x[col].abs());
                    perturbed.copy_from_slice(&x);
                    perturbed[col] += h;
                    residual(&perturbed, &mut r_shift);
                    for row in 0..n {
                        jac[row * n + col] = (r_shift[row] - r[row]) / h;
                    }
                }
            }
        }
        let lu = Lu::factor(&jac, n)?;
        let cond = lu.condition_estimate(&jac);
        if cond > 1e12 {
            return Err(Error::SingularJacobian { cond });
        }
        lu.solve(&r, &mut step);
        for i in 0..n {
            x[i] -= step[i];
        }
        residual(&x, &mut r);
        norm = euclidean_norm(&r);
        if norm <= tol {
            return Ok(NewtonOutcome {
                root: x,
                iterations: iteration,
                residual_norm: norm,
            });
        }
    }
    Err(Error::NewtonNonConvergence {
        tol,
        max_iter,
        residual: norm,
    })
}
