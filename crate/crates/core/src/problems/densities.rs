//! Probability densities with their parameter gradients.

use std::f64::consts::{LN_2, PI};

use crate::error::{domain, Result};
use crate::specfun::{bessel_k1_and_prime, digamma, ln_gamma};

/// NIG density value and its five partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigGrads {
    pub pdf: f64,
    pub dx: f64,
    pub dalpha: f64,
    pub dbeta: f64,
    pub dmu: f64,
    pub ddelta: f64,
}

fn check_nig(alpha: f64, beta: f64, delta: f64) -> Result<()> {
    if !(alpha > 0.0) || !(beta.abs() < alpha) {
        return Err(domain("nig_pdf", format!("need |beta| < alpha, got alpha = {alpha}, beta = {beta}")));
    }
    if !(delta > 0.0) {
        return Err(domain("nig_pdf", format!("delta = {delta}")));
    }
    Ok(())
}

/// Normal inverse Gaussian density
/// (αδ/π)·exp(δτ + β(x−μ))·K₁(αυ)/υ with τ = √(α²−β²), υ = √(δ²+(x−μ)²).
pub fn nig_pdf(x: f64, alpha: f64, beta: f64, mu: f64, delta: f64) -> Result<f64> {
    check_nig(alpha, beta, delta)?;
    let tau = (alpha * alpha - beta * beta).sqrt();
    let dev = x - mu;
    let upsilon = delta.hypot(dev);
    let (k1, _) = bessel_k1_and_prime(alpha * upsilon)?;
    Ok(alpha * delta / PI * (delta * tau + beta * dev).exp() * k1 / upsilon)
}

pub fn nig_pdf_grads(x: f64, alpha: f64, beta: f64, mu: f64, delta: f64) -> Result<NigGrads> {
    check_nig(alpha, beta, delta)?;
    let tau = (alpha * alpha - beta * beta).sqrt();
    let dev = x - mu;
    let upsilon = delta.hypot(dev);
    let z = alpha * upsilon;
    let (k1, k1p) = bessel_k1_and_prime(z)?;
    let expo = (delta * tau + beta * dev).exp();
    let pdf = alpha * delta / PI * expo * k1 / upsilon;
    let kterm = alpha * delta / (PI * upsilon.powi(3)) * expo * (z * k1p - k1);
    let dx = beta * pdf + kterm * dev;
    Ok(NigGrads {
        pdf,
        dx,
        dalpha: pdf * (1.0 / alpha + delta * alpha / tau + upsilon * k1p / k1),
        dbeta: pdf * (-delta * beta / tau + dev),
        dmu: -dx,
        ddelta: pdf * (1.0 / delta + tau) + delta * kterm,
    })
}

/// Double-exponential jump density and its partials in (p, η₁, η₂).
/// The x ≥ 0 branch includes x = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KouGrads {
    pub pdf: f64,
    pub dp: f64,
    pub deta1: f64,
    pub deta2: f64,
}

pub fn kou_density_and_grads(x: f64, p: f64, eta1: f64, eta2: f64) -> Result<KouGrads> {
    if !(0.0..=1.0).contains(&p) || !(eta1 > 0.0) || !(eta2 > 0.0) {
        return Err(domain(
            "kou_density",
            format!("p = {p}, eta1 = {eta1}, eta2 = {eta2}"),
        ));
    }
    Ok(if x >= 0.0 {
        let e = (-eta1 * x).exp();
        KouGrads {
            pdf: p * eta1 * e,
            dp: eta1 * e,
            deta1: p * e * (1.0 - eta1 * x),
            deta2: 0.0,
        }
    } else {
        let e = (eta2 * x).exp();
        KouGrads {
            pdf: (1.0 - p) * eta2 * e,
            dp: -eta2 * e,
            deta1: 0.0,
            deta2: (1.0 - p) * e * (1.0 + eta2 * x),
        }
    })
}

/// χ² density with θ degrees of freedom, evaluated in log space.
pub fn chi2_pdf(x: f64, dof: f64) -> Result<f64> {
    if !(dof > 0.0) {
        return Err(domain("chi2_pdf", format!("dof = {dof}")));
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    let half = 0.5 * dof;
    Ok(((half - 1.0) * x.ln() - 0.5 * x - half * LN_2 - ln_gamma(half)?).exp())
}

/// ∂/∂θ log f_χ²(x; θ) = ½ ln x − ½ ln 2 − ½ ψ(θ/2).
pub fn chi2_log_pdf_ddof(x: f64, dof: f64) -> Result<f64> {
    Ok(0.5 * x.ln() - 0.5 * LN_2 - 0.5 * digamma(0.5 * dof)?)
}
