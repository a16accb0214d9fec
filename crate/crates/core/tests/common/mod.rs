//! Independent numerical oracles for the integration tests. Nothing in this
//! file calls into the library; `suites` compares the library against it.

#![allow(dead_code)]

pub mod suites;

use std::f64::consts::PI;

const WEYL_ROOTS: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];

/// Quasi-random point `i` of coordinate `dim` in [0, 1) (Weyl sequence on
/// the fractional parts of √p).
pub fn weyl(i: usize, dim: usize) -> f64 {
    let alpha = WEYL_ROOTS[dim % WEYL_ROOTS.len()].sqrt().fract();
    ((i as f64 + 1.0) * alpha).fract()
}

/// Maps a unit coordinate onto [lo, hi].
pub fn lerp(lo: f64, hi: f64, t: f64) -> f64 {
    lo + (hi - lo) * t
}

/// Double-exponential (tanh–sinh) quadrature over [a, b]. Abscissae next to
/// an endpoint are formed as endpoint ± distance, so integrable algebraic
/// endpoint singularities are resolved.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    const T_MAX: f64 = 5.0;
    const MAX_LEVEL: u32 = 12;
    let hw = 0.5 * (b - a);
    if hw == 0.0 {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    let term = |t: f64| -> f64 {
        let u = 0.5 * PI * t.sinh();
        let ch = u.cosh();
        let w = hw * 0.5 * PI * t.cosh() / (ch * ch);
        let d = hw * 2.0 / (1.0 + (2.0 * u.abs()).exp());
        if w == 0.0 || d == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let x = if t < 0.0 { a + d } else if t > 0.0 { b - d } else { c };
        w * f(x)
    };
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1.0;
    while k * h <= T_MAX {
        sum += term(k * h) + term(-k * h);
        k += 1.0;
    }
    let mut prev = h * sum;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut k = 1.0;
        while k * h <= T_MAX {
            sum += term(k * h) + term(-k * h);
            k += 2.0;
        }
        let cur = h * sum;
        if level >= 3 && (cur - prev).abs() <= 1e-15 * cur.abs().max(1e-300) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Richardson-extrapolated central difference, truncation error O(h⁴).
pub fn fd<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let central = |s: f64| (f(x + s) - f(x - s)) / (2.0 * s);
    (4.0 * central(0.5 * h) - central(h)) / 3.0
}

/// Partial derivative of `f` in coordinate `i` at `x`.
pub fn fd_partial<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize, h: f64) -> f64 {
    fd(
        |v| {
            let mut y = x.to_vec();
            y[i] = v;
            f(&y)
        },
        x[i],
        h,
    )
}

/// Shift argument for the large-x integral forms.
const SHIFT_TO: f64 = 12.0;

/// ψ(x) by upward recurrence to x ≥ 12 and Binet's second integral
/// ψ(y) = ln y − 1/(2y) − 2∫₀^∞ t/((t²+y²)(e^{2πt}−1)) dt.
pub fn digamma(x: f64) -> f64 {
    let mut y = x;
    let mut shift = Vec::new();
    while y < SHIFT_TO {
        shift.push(1.0 / y);
        y += 1.0;
    }
    let tail = tanh_sinh(|t| t / ((t * t + y * y) * (2.0 * PI * t).exp_m1()), 0.0, 15.0);
    let psi_y = y.ln() - 0.5 / y - 2.0 * tail;
    // smallest reciprocals first
    let correction: f64 = shift.iter().rev().sum();
    psi_y - correction
}

/// ln Γ(x) by upward recurrence and Binet's second formula.
pub fn ln_gamma(x: f64) -> f64 {
    let mut y = x;
    let mut shift = 0.0;
    while y < SHIFT_TO {
        shift += y.ln();
        y += 1.0;
    }
    let tail = tanh_sinh(|t| (t / y).atan() / (2.0 * PI * t).exp_m1(), 0.0, 15.0);
    (y - 0.5) * y.ln() - y + 0.5 * (2.0 * PI).ln() + 2.0 * tail - shift
}

/// P(s, x) = γ(s, x)/Γ(s) by direct quadrature of t^{s−1} e^{−t}.
pub fn reg_lower_inc_gamma(s: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let lg = ln_gamma(s);
    if s < 1.0 {
        // t = v^{1/s} removes the endpoint singularity
        let inv = 1.0 / s;
        return tanh_sinh(|v| (-v.powf(inv) - lg).exp(), 0.0, x.powf(s)) / s;
    }
    tanh_sinh(|t| ((s - 1.0) * t.ln() - t - lg).exp(), 0.0, x)
}

/// I_l(x) by Miller's backward recurrence normalised with
/// e^x = I₀(x) + 2 Σ_{k≥1} I_k(x).
pub fn bessel_i(l: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    let ax = x.abs();
    let n = l + 2 * ax.ceil() as usize + 100;
    const BIG: f64 = 1e250;
    let mut above = 0.0;
    let mut cur = 1e-280;
    let mut sum = 0.0;
    let mut result = None;
    let mut rescales_after = 0i32;
    for k in (1..=n).rev() {
        if k == l {
            result = Some(cur);
        }
        sum += 2.0 * cur;
        let below = above + (2.0 * k as f64 / ax) * cur;
        above = cur;
        cur = below;
        if cur.abs() > BIG {
            cur /= BIG;
            above /= BIG;
            sum /= BIG;
            if result.is_some() {
                rescales_after += 1;
            }
        }
    }
    let r = result.unwrap_or(cur);
    sum += cur;
    let mut v = r / sum * ax.exp();
    for _ in 0..rescales_after {
        v /= BIG;
    }
    if x < 0.0 && l % 2 == 1 {
        -v
    } else {
        v
    }
}

/// I_l(x) from the power series Σ (x/2)^{2k+l}/(k!(k+l)!), terms summed
/// until below 1e−18 of the total.
pub fn bessel_i_series(l: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=l {
        term *= half / k as f64;
    }
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= half * half / (k * (k + l as f64));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() || term == 0.0 {
            return sum;
        }
    }
}

const K_UPPER: f64 = 90.0;

fn split_integral<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let mid = (2.0 * x).min(1.0);
    tanh_sinh(&f, 0.0, mid) + tanh_sinh(&f, mid, K_UPPER)
}

/// K₀(x) = e^{−x} ∫₀^∞ e^{−r} / √(r(2x+r)) dr.
pub fn bessel_k0(x: f64) -> f64 {
    (-x).exp() * split_integral(|r| (-r).exp() / (r * (2.0 * x + r)).sqrt(), x)
}

/// K₁(x) = (e^{−x}/x) ∫₀^∞ e^{−r} √(r(2x+r)) dr.
pub fn bessel_k1(x: f64) -> f64 {
    (-x).exp() / x * split_integral(|r| (-r).exp() * (r * (2.0 * x + r)).sqrt(), x)
}

/// K₁′(x) = −K₀(x) − K₁(x)/x.
pub fn bessel_k1_prime(x: f64) -> f64 {
    -bessel_k0(x) - bessel_k1(x) / x
}

/// F(b; θ) = ∫₀^b dx/√(1 − θ² sin²x) by direct quadrature.
pub fn ellip_f(b: f64, theta: f64) -> f64 {
    tanh_sinh(|x| 1.0 / (1.0 - (theta * x.sin()).powi(2)).sqrt(), 0.0, b)
}

/// ∫₋₁¹ x^{2m}/√(1−x²) dx = π (2m−1)!!/(2m)!!.
pub fn chebyshev_even_moment(m: usize) -> f64 {
    (1..=m).fold(PI, |acc, j| acc * (2 * j - 1) as f64 / (2 * j) as f64)
}

/// Normal inverse Gaussian density written out independently.
pub fn nig_pdf(x: f64, alpha: f64, beta: f64, mu: f64, delta: f64) -> f64 {
    let gamma = (alpha * alpha - beta * beta).sqrt();
    let r = (delta * delta + (x - mu) * (x - mu)).sqrt();
    alpha * delta * bessel_k1(alpha * r) / (PI * r) * (delta * gamma + beta * (x - mu)).exp()
}

/// Kou double-exponential density.
pub fn kou_pdf(x: f64, p: f64, eta1: f64, eta2: f64) -> f64 {
    if x >= 0.0 {
        p * eta1 * (-eta1 * x).exp()
    } else {
        (1.0 - p) * eta2 * (eta2 * x).exp()
    }
}

/// χ² density with `k` degrees of freedom.
pub fn chi2_pdf(x: f64, k: f64) -> f64 {
    let h = 0.5 * k;
    ((h - 1.0) * x.ln() - 0.5 * x - h * 2f64.ln() - ln_gamma(h)).exp()
}

/// Relative difference with a floor on the denominator.
pub fn rel_err(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / want.abs().max(floor)
}
