//! Gauss-Legendre quadrature used as the fallback route for compensator
//! integrals when no analytic form is supplied.

/// Nodes and weights of the n-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Nodes are the roots of the Legendre polynomial P_n, located by Newton
/// iteration from the Chebyshev-like initial guess.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let step = p / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
        if !(n % 2 == 1 && i == half - 1) {
            rule.push((-x, w));
        }
    }
    rule
}

/// Evaluate (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Accumulate the n-node approximation of `integral of f(z) density(z) dz`
/// over `{|z| < radius}` into `out` (adding `weight * density * f`).
///
/// Infinite radii are handled with the rational substitution
/// `z = u / (1 - u^2)` mapping `(-1, 1)` onto the real line.
pub(crate) fn accumulate_weighted(
    n: usize,
    radius: f64,
    density: &dyn Fn(f64) -> f64,
    eval: &mut dyn FnMut(f64, &mut [f64]),
    scratch: &mut [f64],
    out: &mut [f64],
) {
    out.fill(0.0);
    for (node, w) in gauss_legendre(n) {
        let (z, jacobian) = if radius.is_finite() {
            (radius * node, radius)
        } else {
            let u2 = node * node;
            (node / (1.0 - u2), (1.0 + u2) / ((1.0 - u2) * (1.0 - u2)))
        };
        let dens = density(z);
        if dens == 0.0 {
            continue;
        }
        eval(z, scratch);
        let factor = w * jacobian * dens;
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += factor * s;
        }
    }
}
