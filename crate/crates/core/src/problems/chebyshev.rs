//! Chebyshev polynomials and Gauss–Chebyshev coefficient integrals.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::specfun::gauss_chebyshev;

pub const MAX_DEGREE: usize = 64;

/// T_l(x) by the three-term recurrence, |x| ≤ 1, l ≤ 64.
pub fn chebyshev_t(l: usize, x: f64) -> Result<f64> {
    if l > MAX_DEGREE {
        return Err(domain("chebyshev_t", format!("degree {l} > {MAX_DEGREE}")));
    }
    if !(x.abs() <= 1.0) {
        return Err(domain("chebyshev_t", format!("x = {x}")));
    }
    let mut out = vec![0.0; l + 1];
    chebyshev_t_all(x, &mut out);
    Ok(out[l])
}

/// Fills `out[l] = T_l(x)` for l = 0..out.len().
pub fn chebyshev_t_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for l in 2..out.len() {
        out[l] = 2.0 * x * out[l - 1] - out[l - 2];
    }
}

/// (2/π)∫₋₁¹ f(x)T_l(x)/√(1−x²) dx for l = 0..=degree with an n-node
/// Gauss–Chebyshev rule.
pub fn gauss_chebyshev_coefficients<F: Fn(f64) -> f64>(f: F, degree: usize, n: usize) -> Result<Vec<f64>> {
    let rule = gauss_chebyshev(n)?;
    let mut acc = vec![0.0; degree + 1];
    let mut t = vec![0.0; degree + 1];
    for &x in rule.nodes() {
        let fx = f(x);
        chebyshev_t_all(x, &mut t);
        for (a, tl) in acc.iter_mut().zip(&t) {
            *a += fx * tl;
        }
    }
    let scale = 2.0 / PI * rule.weight();
    Ok(acc.into_iter().map(|a| a * scale).collect())
}

/// Coefficient integrals for an integrand with a single break at x = 0.
///
/// With n divisible by 4 the break sits on a cell boundary of the
/// Gauss–Chebyshev rule (a midpoint rule in φ = arccos x) for both n and
/// n/2, so the error expands in even powers of 1/n and one Richardson step
/// `(4·Q(n) − Q(n/2))/3` removes the leading term.
pub fn broken_coefficients<F: Fn(f64) -> f64>(f: F, degree: usize, n: usize) -> Result<Vec<f64>> {
    if n % 4 != 0 || n == 0 {
        return Err(domain("broken_coefficients", format!("n = {n} must be a positive multiple of 4")));
    }
    let fine = gauss_chebyshev_coefficients(&f, degree, n)?;
    let coarse = gauss_chebyshev_coefficients(&f, degree, n / 2)?;
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect())
}
