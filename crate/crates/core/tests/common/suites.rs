//! Library-versus-oracle comparison suites shared by the acceptance runner
//! and the per-module integration tests.

use std::f64::consts::PI;

use ndarray::Array2;
use paramint::dataset::Dataset;
use paramint::harness::{self, UnbiasednessCheck};
use paramint::network::{Activation, LossWeights, ModelParams};
use paramint::problems::{self, NoiseLaw, ProblemId, ProblemSpec};
use paramint::quadrature;
use paramint::specfun;
use paramint::training::{self, Mode, TrainConfig};

use super::{fd, lerp, rel_err, tanh_sinh, weyl};

/// Worst observed error of one comparison against its tolerance.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub count: usize,
    pub worst: f64,
    pub tol: f64,
    /// Side conditions (monotonicity, finiteness) that failed.
    pub violations: Vec<String>,
}

impl Outcome {
    pub fn new(name: impl Into<String>, tol: f64) -> Self {
        Self {
            name: name.into(),
            count: 0,
            worst: 0.0,
            tol,
            violations: Vec::new(),
        }
    }

    pub fn record(&mut self, err: f64) {
        self.count += 1;
        if !(err <= self.worst) {
            self.worst = err;
        }
    }

    pub fn violate(&mut self, what: String) {
        if self.violations.len() < 5 {
            self.violations.push(what);
        }
    }

    pub fn passed(&self) -> bool {
        self.worst <= self.tol && self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: {} cases, worst {:.3e} (tol {:.1e})",
            self.name, self.count, self.worst, self.tol
        );
        for v in &self.violations {
            s.push_str(&format!("; {v}"));
        }
        s
    }
}

pub const SUITE_POINTS: usize = 1000;

fn log_uniform(lo: f64, hi: f64, t: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * t).exp()
}

pub fn digamma_suite() -> Outcome {
    let mut out = Outcome::new("digamma abs", 1e-12);
    for i in 0..SUITE_POINTS {
        let x = log_uniform(1e-3, 1e3, weyl(i, 0));
        out.record((specfun::digamma(x).unwrap() - super::digamma(x)).abs());
    }
    out
}

pub fn inc_gamma_suite() -> Outcome {
    let mut out = Outcome::new("reg_lower_inc_gamma abs", 1e-12);
    for i in 0..SUITE_POINTS {
        let s = log_uniform(0.05, 10.0, weyl(i, 0));
        let x = lerp(0.0, 30.0, weyl(i, 1));
        out.record((specfun::reg_lower_inc_gamma(s, x).unwrap() - super::reg_lower_inc_gamma(s, x)).abs());
    }
    for s in [0.25, 0.5, 1.0, 2.5, 7.0] {
        let mut prev = 0.0;
        for j in 0..=400 {
            let x = j as f64 * 0.05;
            let p = specfun::reg_lower_inc_gamma(s, x).unwrap();
            if p < prev || !(0.0..=1.0).contains(&p) {
                out.violate(format!("P({s}, x) not monotone in [0,1] at x = {x}"));
            }
            prev = p;
        }
    }
    out
}

pub fn bessel_i_suite() -> Outcome {
    let mut out = Outcome::new("bessel_i rel", 1e-10);
    for i in 0..SUITE_POINTS {
        let l = ((weyl(i, 0) * 65.0) as usize).min(64);
        let x = lerp(-50.0, 50.0, weyl(i, 1));
        let got = specfun::bessel_i(l as u32, x).unwrap();
        out.record(rel_err(got, super::bessel_i(l, x), f64::MIN_POSITIVE));
    }
    out
}

pub fn bessel_k_suite() -> Vec<Outcome> {
    let mut k1 = Outcome::new("bessel_k1 rel", 1e-9);
    let mut k1p = Outcome::new("bessel_k1_prime rel", 1e-9);
    for i in 0..SUITE_POINTS {
        let x = log_uniform(1e-3, 50.0, weyl(i, 0));
        k1.record(rel_err(specfun::bessel_k1(x).unwrap(), super::bessel_k1(x), 0.0));
        k1p.record(rel_err(specfun::bessel_k1_prime(x).unwrap(), super::bessel_k1_prime(x), 0.0));
    }
    let mut prev = f64::INFINITY;
    for j in 0..=2000 {
        let x = log_uniform(1e-3, 50.0, j as f64 / 2000.0);
        let v = specfun::bessel_k1(x).unwrap();
        if !(v > 0.0 && v < prev) {
            k1.violate(format!("K1 not positive decreasing at x = {x}"));
        }
        prev = v;
    }
    vec![k1, k1p]
}

pub fn ellip_f_suite() -> Outcome {
    let mut out = Outcome::new("ellip_f rel", 1e-10);
    for i in 0..SUITE_POINTS {
        let b = lerp(1e-3, PI / 2.0, weyl(i, 0));
        let theta = lerp(0.0, 0.999, weyl(i, 1));
        out.record(rel_err(specfun::ellip_f(b, theta).unwrap(), super::ellip_f(b, theta), 0.0));
    }
    for theta in [0.0, 0.3, 0.9, 0.99] {
        let mut prev = 0.0;
        for j in 1..=200 {
            let b = PI / 2.0 * j as f64 / 200.0;
            let v = specfun::ellip_f(b, theta).unwrap();
            if v <= prev || v < b {
                out.violate(format!("F(b, {theta}) not increasing or below b at b = {b}"));
            }
            prev = v;
        }
    }
    for b in [0.1, 0.8, PI / 2.0] {
        let mut prev = 0.0;
        for j in 0..200 {
            let theta = 0.995 * j as f64 / 199.0;
            let v = specfun::ellip_f(b, theta).unwrap();
            if v < prev {
                out.violate(format!("F({b}, θ) decreasing at θ = {theta}"));
            }
            prev = v;
        }
    }
    out
}

pub fn gauss_chebyshev_suite() -> Outcome {
    let mut out = Outcome::new("gauss_chebyshev rel", 1e-12);
    for i in 0..SUITE_POINTS {
        let n = 1 + ((weyl(i, 0) * 64.0) as usize).min(63);
        let degree = ((weyl(i, 1) * (2 * n) as f64) as usize).min(2 * n - 1);
        let rule = specfun::gauss_chebyshev(n).unwrap();
        let got = rule.integrate(|x| x.powi(degree as i32));
        let want = if degree % 2 == 1 { 0.0 } else { super::chebyshev_even_moment(degree / 2) };
        out.record((got - want).abs() / want.abs().max(1.0));
        let nodes = rule.nodes();
        if nodes.len() != n
            || nodes.windows(2).any(|w| w[0] <= w[1])
            || nodes.iter().any(|x| !(x.abs() < 1.0))
        {
            out.violate(format!("n = {n}: nodes not strictly decreasing in (-1, 1)"));
        }
    }
    out
}

/// Every special-function comparison.
pub fn specfun_suites() -> Vec<Outcome> {
    let mut v = vec![digamma_suite(), inc_gamma_suite(), bessel_i_suite()];
    v.extend(bessel_k_suite());
    v.push(ellip_f_suite());
    v.push(gauss_chebyshev_suite());
    v
}

/// Step of the pathwise finite differences, relative to the box width.
pub const PATHWISE_STEP: f64 = 1e-4;

/// Pathwise gradients against Richardson differences of the label with the
/// raw draw held fixed. The error is |g − fd| / max(|fd|, 1e−3·max(1, |ŷ_k|)).
pub fn pathwise_suite(id: ProblemId, points: usize) -> Outcome {
    let spec = ProblemSpec::new(id);
    let d = spec.input_dim();
    let k = spec.output_dim();
    let mut out = Outcome::new(format!("{id} pathwise"), 1e-6);
    for j in 0..points {
        let inputs: Vec<f64> = spec
            .bounds()
            .iter()
            .enumerate()
            .map(|(i, iv)| {
                let m = 1e-3 * iv.width();
                lerp(iv.lo + m, iv.hi - m, weyl(j, i))
            })
            .collect();
        let t = weyl(j, d);
        let noise = match spec.noise_law() {
            NoiseLaw::Uniform => lerp(0.005, 0.995, t),
            NoiseLaw::StdNormal => lerp(-4.0, 4.0, t),
        };
        let sample = match spec.label_and_grad(&inputs, noise) {
            Ok(s) => s,
            Err(e) => {
                out.violate(format!("label_and_grad failed at {inputs:?}: {e}"));
                continue;
            }
        };
        for (i, iv) in spec.bounds().iter().enumerate() {
            let h = PATHWISE_STEP * iv.width();
            for l in 0..k {
                let want = fd(
                    |v| {
                        let mut x = inputs.clone();
                        x[i] = v;
                        spec.label_and_grad(&x, noise).map(|s| s.labels[l]).unwrap_or(f64::NAN)
                    },
                    inputs[i],
                    h,
                );
                let floor = 1e-3 * sample.labels[l].abs().max(1.0);
                out.record(rel_err(sample.grads[l * d + i], want, floor));
            }
        }
    }
    out
}

pub const UNBIASEDNESS_POINTS: usize = 5;
pub const UNBIASEDNESS_SAMPLES: usize = 1_000_000;

/// Label and gradient-label unbiasedness; returns the failing checks and
/// the number run.
pub fn unbiasedness_suite(id: ProblemId, samples: usize, seed: u64) -> (usize, Vec<UnbiasednessCheck>) {
    let spec = ProblemSpec::new(id);
    let checks = harness::label_unbiasedness(&spec, UNBIASEDNESS_POINTS, samples, seed).unwrap();
    let n = checks.len();
    (n, checks.into_iter().filter(|c| !c.passed()).collect())
}

/// 2-input net with two softplus hidden layers and 2 outputs.
pub fn small_net(seed: u64) -> ModelParams {
    let mut p = ModelParams::init(&[2, 6, 5, 2], Activation::Softplus, seed).unwrap();
    // nonzero biases so every code path carries weight
    for idx in 0..p.num_weights() {
        let v = p.get_flat(idx);
        p.set_flat(idx, v + 0.1 * (weyl(idx, 3) - 0.5));
    }
    p
}

pub fn small_batch(n: usize) -> Dataset {
    let mut inputs = Array2::zeros((n, 2));
    let mut labels = Array2::zeros((n, 2));
    let mut grads = Array2::zeros((n, 4));
    for j in 0..n {
        for c in 0..2 {
            inputs[[j, c]] = lerp(-1.5, 1.5, weyl(j, c));
            labels[[j, c]] = lerp(-1.0, 1.0, weyl(j, 2 + c));
        }
        for c in 0..4 {
            grads[[j, c]] = lerp(-2.0, 2.0, weyl(j, 4 + c));
        }
    }
    Dataset { inputs, labels, grads }
}

/// input_jacobian against plain central differences of forward with step
/// 1e−6·(1+|x|); error relative to max(|fd|, 1e−3).
pub fn jacobian_suite() -> Outcome {
    let mut out = Outcome::new("input_jacobian rel", 1e-7);
    for seed in 0..20u64 {
        let p = small_net(seed);
        for j in 0..10 {
            let x = [lerp(-2.0, 2.0, weyl(j + 10 * seed as usize, 0)), lerp(-2.0, 2.0, weyl(j, 1))];
            let jac = p.input_jacobian(&x).unwrap();
            for i in 0..2 {
                let h = 1e-6 * (1.0 + x[i].abs());
                for k in 0..2 {
                    let at = |v: f64| {
                        let mut y = x;
                        y[i] = v;
                        p.forward(&y).unwrap()[k]
                    };
                    let want = (at(x[i] + h) - at(x[i] - h)) / (2.0 * h);
                    out.record(rel_err(jac[[k, i]], want, 1e-3));
                }
            }
        }
    }
    out
}

/// loss_and_gradient against central differences of the loss in 50
/// quasi-randomly chosen weights, for ϑ = 1, the balanced weight and ϑ = 0.2.
pub fn loss_gradient_suite() -> Outcome {
    let mut out = Outcome::new("loss_and_gradient rel", 1e-4);
    let batch = small_batch(16);
    let p = small_net(11);
    for lw in [
        LossWeights::value_only(2),
        LossWeights::balanced(2),
        LossWeights::new(2.0, 2).unwrap(),
    ] {
        let (_, grads) = p.loss_and_gradient(&batch, lw).unwrap();
        let flat = flatten(&grads);
        for j in 0..50 {
            let idx = ((weyl(j, 5) * p.num_weights() as f64) as usize).min(p.num_weights() - 1);
            let w0 = p.get_flat(idx);
            let h = 1e-6 * (1.0 + w0.abs());
            let want = fd(
                |v| {
                    let mut q = p.clone();
                    q.set_flat(idx, v);
                    q.loss_and_gradient(&batch, lw).unwrap().0
                },
                w0,
                h,
            );
            out.record(rel_err(flat[idx], want, 1e-6));
        }
    }
    out
}

/// Weight gradients in the flat parameter order.
pub fn flatten(g: &paramint::network::ParamGrads) -> Vec<f64> {
    let mut v = Vec::new();
    for (w, b) in g.weights.iter().zip(&g.biases) {
        v.extend(w.iter());
        v.extend(b.iter());
    }
    v
}

/// 200 Adam steps of ANN mode against DML mode with ω = 0; returns the
/// largest per-step loss difference and the step counts.
pub fn equivalence_run() -> (f64, usize, usize) {
    let spec = ProblemSpec::new(ProblemId::Chi2Cdf2d);
    let mut rng = paramint::sampling::RngState::new(
        5,
        harness::train_stream(1024, 0, Mode::Ann),
    );
    let data = Dataset::generate(&spec, 1024, &mut rng).unwrap();
    let base = TrainConfig {
        epochs: 25,
        batch: 128,
        hidden: vec![32, 32],
        seed: 17,
        ..TrainConfig::default()
    };
    let ann = training::train(&spec, &data, &TrainConfig { mode: Mode::Ann, ..base.clone() }).unwrap();
    let dml = training::train(
        &spec,
        &data,
        &TrainConfig {
            mode: Mode::Dml,
            omega: Some(0.0),
            ..base
        },
    )
    .unwrap();
    let worst = ann
        .loss_trace
        .iter()
        .zip(&dml.loss_trace)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (worst, ann.loss_trace.len(), dml.loss_trace.len())
}

/// χ² truth against tanh–sinh quadrature of the density.
pub fn chi2_cross_check(points: usize) -> Outcome {
    let mut out = Outcome::new("chi2 truth vs quadrature abs", 1e-8);
    let spec = ProblemSpec::new(ProblemId::Chi2Cdf2d);
    let one = ProblemSpec::new(ProblemId::Chi2Cdf1d);
    for j in 0..points {
        let b = lerp(0.01, 10.0, weyl(j, 0));
        let dof = lerp(0.5, 5.0, weyl(j, 1));
        let want = tanh_sinh(|x| super::chi2_pdf(x, dof), 0.0, b);
        out.record((spec.ground_truth(&[b, dof]).unwrap()[0] - want).abs());
        let want1 = tanh_sinh(|x| super::chi2_pdf(x, 1.0), 0.0, b);
        out.record((one.ground_truth(&[b]).unwrap()[0] - want1).abs());
    }
    out
}

/// Kou closed form against quadrature of the integrand over [−30, 30].
pub fn kou_cross_check(points: usize) -> Outcome {
    let mut out = Outcome::new("kou closed form vs quadrature abs", 1e-6);
    let spec = ProblemSpec::new(ProblemId::Kou);
    for j in 0..points {
        let th = [
            lerp(0.3, 0.7, weyl(j, 0)),
            lerp(3.0, 8.0, weyl(j, 1)),
            lerp(1.5, 6.0, weyl(j, 2)),
        ];
        let g = |x: f64| ((2.0 * x).exp() - 2.0 * x.exp_m1()) * super::kou_pdf(x, th[0], th[1], th[2]);
        let want = tanh_sinh(g, -30.0, 0.0) + tanh_sinh(g, 0.0, 30.0);
        out.record((spec.ground_truth(&th).unwrap()[0] - want).abs());
    }
    out
}

/// The NIG truth against an independent quadrature, and composite
/// Gauss–Kronrod on the same integrand at least halving its error per
/// panel doubling until the error reaches 1e−13.
pub fn nig_cross_check(points: usize) -> Vec<Outcome> {
    let mut truth = Outcome::new("nig truth vs quadrature abs", 1e-10);
    let mut halving = Outcome::new("nig composite error ratio e(2n)/e(n)", 0.5);
    let spec = ProblemSpec::new(ProblemId::NigCdf5d);
    let a = problems::NIG_LOWER;
    for j in 0..points {
        let th: Vec<f64> = spec
            .bounds()
            .iter()
            .enumerate()
            .map(|(i, iv)| lerp(iv.lo, iv.hi, weyl(j, i)))
            .collect();
        let (b, al, be, mu, de) = (th[0], th[1], th[2], th[3], th[4]);
        let f = |x: f64| super::nig_pdf(x, al, be, mu, de);
        let want = tanh_sinh(f, a, b);
        let got = spec.ground_truth(&th).unwrap()[0];
        truth.record((got - want).abs());
        let mut prev = None;
        for panels in [1usize, 2, 4, 8, 16] {
            let e = (quadrature::composite(f, a, b, panels).value - want).abs();
            if let Some(p) = prev {
                if p > 1e-13 {
                    halving.record(e / p);
                }
            }
            prev = Some(e);
        }
    }
    vec![truth, halving]
}

/// Piecewise Chebyshev oracle at n and 2n nodes.
pub fn piecewise_stability(points: usize) -> Outcome {
    let mut out = Outcome::new("piecewise oracle n -> 2n abs", 1e-8);
    let spec = ProblemSpec::new(ProblemId::ChebPiecewise);
    let n = problems::PIECEWISE_ORACLE_NODES;
    for j in 0..points {
        let th: Vec<f64> = spec
            .bounds()
            .iter()
            .enumerate()
            .map(|(i, iv)| lerp(iv.lo, iv.hi, weyl(j, i)))
            .collect();
        let c1 = problems::piecewise_coefficients(&th, spec.degree(), n).unwrap();
        let c2 = problems::piecewise_coefficients(&th, spec.degree(), 2 * n).unwrap();
        for (x, y) in c1.iter().zip(&c2) {
            out.record((x - y).abs());
        }
    }
    out
}

pub const GOLDEN_FILES: [&str; 6] = ["dataset.csv", "model.txt", "table.csv", "means.csv", "cumulative.csv", "plot.svg"];

/// Runs `paramint` with `args` in `dir`; returns (exit code, stdout, stderr).
pub fn paramint(dir: &std::path::Path, args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_paramint"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn paramint");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Produces every golden artefact in `dir` through the command line.
pub fn golden_pipeline(dir: &std::path::Path) -> Result<(), String> {
    let steps: [&[&str]; 3] = [
        &["gen", "--problem", "cos_toy", "--size", "16", "--seed", "7", "--out", "dataset.csv"],
        &[
            "train", "--problem", "cos_toy", "--data", "dataset.csv", "--mode", "dml", "--seed", "3", "--epochs", "2",
            "--batch", "8", "--hidden", "4,3", "--out", "model.txt",
        ],
        &[
            "converge", "--problem", "cheb_exp", "--degree", "2", "--sizes", "16,32", "--trials", "2", "--seed", "5",
            "--epochs", "2", "--batch", "16", "--hidden", "4", "--test-size", "32", "--jobs", "2", "--out",
            "table.csv", "--means", "means.csv", "--cumulative", "cumulative.csv", "--plot", "plot.svg",
        ],
    ];
    for args in steps {
        let (code, _, err) = paramint(dir, args);
        if code != 0 {
            return Err(format!("{} exited with {code}: {err}", args[0]));
        }
    }
    Ok(())
}

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Runs the pipeline twice and compares each artefact across the runs and
/// against the checked-in copy. Setting PARAMINT_BLESS=1 rewrites the copies.
pub fn golden_check() -> Result<String, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    golden_pipeline(a.path())?;
    golden_pipeline(b.path())?;
    let bless = std::env::var("PARAMINT_BLESS").is_ok_and(|v| v == "1");
    let golden = golden_dir();
    let mut bytes = 0;
    for name in GOLDEN_FILES {
        let x = std::fs::read(a.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        if x != y {
            return Err(format!("{name} differs between two identical runs"));
        }
        if bless {
            std::fs::create_dir_all(&golden).map_err(|e| e.to_string())?;
            std::fs::write(golden.join(name), &x).map_err(|e| e.to_string())?;
        }
        let g = std::fs::read(golden.join(name)).map_err(|e| format!("golden {name}: {e}"))?;
        if g != x {
            return Err(format!("{name} differs from tests/golden/{name}"));
        }
        bytes += x.len();
    }
    Ok(format!("{} files, {bytes} bytes identical across runs and to golden copies", GOLDEN_FILES.len()))
}
