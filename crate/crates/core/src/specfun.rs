//! Double-precision special functions used by labels, gradients and oracles.
//!
//! Every function is pure and reports out-of-domain arguments as
//! [`Error::Domain`] instead of clamping them.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{domain, Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("ln_gamma", format!("x = {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Digamma ψ(x) for x > 0.
///
/// Small positive integers use ψ(n) = H_{n−1} − γ. Other arguments are
/// shifted above 10 with ψ(x) = ψ(x+1) − 1/x, then the asymptotic series
/// through the x⁻¹⁴ term applies.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("digamma", format!("x = {x}")));
    }
    if x.fract() == 0.0 && x <= 10.0 {
        let harmonic: f64 = (1..x as u32).rev().map(|k| 1.0 / k as f64).sum();
        return Ok(harmonic - EULER_GAMMA);
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Σ B₂ₙ/(2n x²ⁿ) through n = 7
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(shift + x.ln() - 0.5 / x - tail)
}

/// Regularized lower incomplete gamma P(s, x) = γ(s, x) / Γ(s).
///
/// Series expansion for x < s + 1, Lentz continued fraction for the
/// complement otherwise.
pub fn reg_lower_inc_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(domain("reg_lower_inc_gamma", format!("s = {s}")));
    }
    if !(x >= 0.0) {
        return Err(domain("reg_lower_inc_gamma", format!("x = {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let log_prefactor = -x + s * x.ln() - ln_gamma_unchecked(s);
    if x < s + 1.0 {
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut a = s;
        for _ in 0..10_000 {
            a += 1.0;
            term *= x / a;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        Ok((sum * log_prefactor.exp()).min(1.0))
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        Ok((1.0 - log_prefactor.exp() * h).max(0.0))
    }
}

/// Modified Bessel function of the first kind I_l(x), 0 ≤ l ≤ 64, |x| ≤ 50.
///
/// Summed from the power series, whose terms are all of one sign.
pub fn bessel_i(l: u32, x: f64) -> Result<f64> {
    if l > 64 {
        return Err(domain("bessel_i", format!("order {l} > 64")));
    }
    if !(x.abs() <= 50.0) {
        return Err(domain("bessel_i", format!("|x| = {} > 50", x.abs())));
    }
    if x == 0.0 {
        return Ok(if l == 0 { 1.0 } else { 0.0 });
    }
    let half = 0.5 * x.abs();
    let mut term = 1.0;
    for k in 1..=l {
        term *= half / k as f64;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + l as f64));
        sum += term;
        if term <= sum * 1e-17 || term == 0.0 {
            break;
        }
    }
    if x < 0.0 && l % 2 == 1 {
        sum = -sum;
    }
    Ok(sum)
}

/// K₀ and K₁ together, x > 0.
///
/// Power series for x ≤ 2. Above 2 the integral representation
/// K_ν(x) = ∫₀^∞ exp(−x cosh t) cosh(νt) dt is summed with the trapezoidal
/// rule, which converges geometrically for this entire integrand.
pub fn bessel_k01(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("bessel_k", format!("x = {x}")));
    }
    if x <= 2.0 {
        Ok(k01_series(x))
    } else {
        Ok(k01_trapezoid(x))
    }
}

fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_half = (0.5 * x).ln();
    // running pieces: t0 = q^k/(k!)², t1 = q^k/(k!(k+1)!), psi_k = ψ(k+1)
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut psi_k = -EULER_GAMMA;
    let mut i0 = 0.0;
    let mut i1_core = 0.0;
    let mut k0_sum = 0.0;
    let mut k1_sum = 0.0;
    let mut k = 0.0;
    loop {
        let psi_next = psi_k + 1.0 / (k + 1.0);
        i0 += t0;
        i1_core += t1;
        k0_sum += psi_k * t0;
        k1_sum += (psi_k + psi_next) * t1;
        k += 1.0;
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        psi_k = psi_next;
        if t0 < 1e-18 * i0 {
            break;
        }
    }
    let i1 = 0.5 * x * i1_core;
    let k0 = -log_half * i0 + k0_sum;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * k1_sum;
    (k0, k1)
}

fn k01_trapezoid(x: f64) -> (f64, f64) {
    const STEP: f64 = 0.1;
    // scaled by e^{x} so the integrand starts at 1
    let mut sum0 = 0.5;
    let mut sum1 = 0.5;
    let mut n = 1.0;
    loop {
        let t = n * STEP;
        let ch = t.cosh();
        let w = (-x * (ch - 1.0)).exp();
        sum0 += w;
        sum1 += w * ch;
        if w * ch < 1e-18 * sum1 {
            break;
        }
        n += 1.0;
    }
    let scale = STEP * (-x).exp();
    (sum0 * scale, sum1 * scale)
}

pub fn bessel_k0(x: f64) -> Result<f64> {
    bessel_k01(x).map(|(k0, _)| k0)
}

/// Modified Bessel function of the second kind K₁(x), x > 0.
pub fn bessel_k1(x: f64) -> Result<f64> {
    bessel_k01(x).map(|(_, k1)| k1)
}

/// K₁′(x) = −(K₀ + K₂)/2 with K₂ = K₀ + 2K₁/x.
pub fn bessel_k1_prime(x: f64) -> Result<f64> {
    bessel_k1_and_prime(x).map(|(_, d)| d)
}

/// (K₁(x), K₁′(x)) from a single K₀/K₁ evaluation.
pub fn bessel_k1_and_prime(x: f64) -> Result<(f64, f64)> {
    let (k0, k1) = bessel_k01(x)?;
    let k2 = k0 + 2.0 * k1 / x;
    Ok((k1, -0.5 * (k0 + k2)))
}

/// Carlson's symmetric integral R_F(x, y, z) by duplication.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> Result<f64> {
    if x < 0.0 || y < 0.0 || z < 0.0 || [x + y, y + z, x + z].iter().any(|s| *s == 0.0) {
        return Err(domain("carlson_rf", format!("({x}, {y}, {z})")));
    }
    const ERRTOL: f64 = 1e-3;
    let (mut x, mut y, mut z) = (x, y, z);
    let (mean, dx, dy, dz) = loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let mean = (x + y + z) / 3.0;
        let (dx, dy, dz) = (1.0 - x / mean, 1.0 - y / mean, 1.0 - z / mean);
        if dx.abs().max(dy.abs()).max(dz.abs()) < ERRTOL {
            break (mean, dx, dy, dz);
        }
    };
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    let series = 1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0;
    Ok(series / mean.sqrt())
}

/// Incomplete Legendre elliptic integral of the first kind,
/// F(b; θ) = ∫₀^b dx / √(1 − θ² sin² x), for 0 < b ≤ π/2 and 0 ≤ θ < 1.
pub fn ellip_f(b: f64, theta: f64) -> Result<f64> {
    if !(b > 0.0 && b <= FRAC_PI_2) {
        return Err(domain("ellip_f", format!("b = {b}")));
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(domain("ellip_f", format!("theta = {theta}")));
    }
    if theta == 0.0 {
        return Ok(b);
    }
    let (s, c) = b.sin_cos();
    // the integrand is at least 1, so F ≥ b holds through rounding
    carlson_rf(c * c, 1.0 - theta * theta * s * s, 1.0).map(|rf| (s * rf).max(b))
}

/// n-point Gauss–Chebyshev rule for ∫₋₁¹ h(x)/√(1−x²) dx.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weight: f64,
}

impl QuadratureRule {
    /// Nodes cos((2i−1)π/(2n)), strictly decreasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Common weight π/n.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut h: F) -> f64 {
        self.weight * self.nodes.iter().map(|&x| h(x)).sum::<f64>()
    }
}

pub fn gauss_chebyshev(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::Domain {
            func: "gauss_chebyshev",
            detail: "n must be at least 1".into(),
        });
    }
    let nodes = (1..=n)
        .map(|i| ((2 * i - 1) as f64 * PI / (2 * n) as f64).cos())
        .collect();
    Ok(QuadratureRule {
        nodes,
        weight: PI / n as f64,
    })
}
