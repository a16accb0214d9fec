//! Test sets, MSE evaluation, the MSE-versus-J convergence grid and the
//! statistical checks on labels and trained models.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::problems::{ProblemId, ProblemSpec};
use crate::sampling::{RngState, StreamId, StreamKind};
use crate::training::{train, Mode, TrainConfig, TrainedModel};

pub const DEFAULT_TEST_SIZE: usize = 4096;
pub const DEFAULT_TRIALS: usize = 10;

/// 2¹⁰ … 2¹⁶
pub fn default_sizes() -> Vec<usize> {
    (10..=16).map(|e| 1usize << e).collect()
}

/// Test inputs (n×d) with reference values (n×K) in reporting convention.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub inputs: Array2<f64>,
    pub truths: Array2<f64>,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn test_stream(size: usize) -> StreamId {
    StreamId::new(StreamKind::TestData, size as u64, 0, 0)
}

pub fn train_stream(size: usize, trial: usize, mode: Mode) -> StreamId {
    StreamId::new(StreamKind::TrainData, size as u64, trial as u32, mode.code())
}

/// Inputs drawn uniformly from the problem box on the test-data stream;
/// truths from the ground-truth oracle.
pub fn make_testset(problem: &ProblemSpec, size: usize, seed: u64) -> Result<TestSet> {
    if size == 0 {
        return Err(Error::DatasetTooSmall { needed: 1, got: 0 });
    }
    let mut rng = RngState::new(seed, test_stream(size));
    let points: Vec<Vec<f64>> = (0..size).map(|_| problem.sample_inputs(&mut rng)).collect();
    let truths = points
        .par_iter()
        .map(|x| problem.ground_truth(x))
        .collect::<Result<Vec<_>>>()?;
    let d = problem.input_dim();
    let k = problem.output_dim();
    Ok(TestSet {
        inputs: Array2::from_shape_vec((size, d), points.concat()).unwrap(),
        truths: Array2::from_shape_vec((size, k), truths.concat()).unwrap(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    /// Mean over points and outputs of the squared error.
    pub mse: f64,
    /// Sum over the K outputs of the per-output MSE (= K·mse).
    pub cumulative: f64,
    /// Per test point, mean over outputs of the squared error.
    pub per_point: Vec<f64>,
}

/// Squared-error summary of `predictions` (n×K) against `truths`.
pub fn mse_of(predictions: &Array2<f64>, truths: &Array2<f64>) -> Result<MseReport> {
    if predictions.dim() != truths.dim() {
        return Err(Error::Dimension {
            context: "predictions vs truths",
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::DatasetTooSmall { needed: 1, got: 0 });
    }
    let k = truths.ncols() as f64;
    let per_point: Vec<f64> = predictions
        .rows()
        .into_iter()
        .zip(truths.rows())
        .map(|(p, t)| p.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / k)
        .collect();
    let mse = per_point.iter().sum::<f64>() / per_point.len() as f64;
    Ok(MseReport {
        mse,
        cumulative: mse * k,
        per_point,
    })
}

/// Raw-unit MSE of a trained model in reporting convention.
pub fn evaluate_mse(model: &TrainedModel, test: &TestSet) -> Result<MseReport> {
    if model.problem.input_dim() != test.inputs.ncols() || model.problem.output_dim() != test.truths.ncols() {
        return Err(Error::Dimension {
            context: "model vs test set",
            expected: model.problem.input_dim() + model.problem.output_dim(),
            got: test.inputs.ncols() + test.truths.ncols(),
        });
    }
    mse_of(&model.predict_reported(&test.inputs)?, &test.truths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub test_size: usize,
    pub modes: Vec<Mode>,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    /// Template; `mode` and `seed` are set per cell.
    pub train: TrainConfig,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            sizes: default_sizes(),
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            test_size: DEFAULT_TEST_SIZE,
            modes: Mode::ALL.to_vec(),
            jobs: 0,
            train: TrainConfig::default(),
        }
    }
}

/// Training seed of one grid cell.
pub fn cell_seed(base_seed: u64, size: usize, trial: usize, mode: Mode) -> u64 {
    RngState::new(
        base_seed,
        StreamId::new(StreamKind::Misc, size as u64, trial as u32, mode.code()),
    )
    .next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub problem: ProblemId,
    pub mode: Mode,
    pub size: usize,
    pub trial: usize,
    /// `Err` holds the abort message of a failed training run.
    pub outcome: std::result::Result<MseReport, String>,
}

impl ConvergenceRow {
    pub fn mse(&self) -> f64 {
        self.outcome.as_ref().map(|r| r.mse).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub problem: ProblemId,
    pub mode: Mode,
    pub size: usize,
    pub mean_mse: f64,
    pub mean_cumulative: f64,
    /// Trials that finished training.
    pub completed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub problem: ProblemId,
    pub output_dim: usize,
    /// Sorted by (mode, J, trial).
    pub rows: Vec<ConvergenceRow>,
}

/// Trains and evaluates one grid cell.
pub fn run_cell(
    problem: &ProblemSpec,
    test: &TestSet,
    config: &ConvergenceConfig,
    size: usize,
    trial: usize,
    mode: Mode,
) -> Result<MseReport> {
    let mut rng = RngState::new(config.base_seed, train_stream(size, trial, mode));
    let data = Dataset::generate(problem, size, &mut rng)?;
    let train_config = TrainConfig {
        mode,
        seed: cell_seed(config.base_seed, size, trial, mode),
        ..config.train.clone()
    };
    let model = train(problem, &data, &train_config)?;
    evaluate_mse(&model, test)
}

/// Runs every (J, trial, mode) cell on a worker pool against one shared
/// test set. Failed cells are kept as rows with their error.
pub fn run_convergence(problem: &ProblemSpec, config: &ConvergenceConfig) -> Result<ConvergenceTable> {
    if config.trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    if config.sizes.is_empty() || config.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("sizes must be nonempty and strictly ascending".into()));
    }
    let test = make_testset(problem, config.test_size, config.base_seed)?;
    let mut cells = Vec::new();
    for &mode in &config.modes {
        for &size in &config.sizes {
            for trial in 0..config.trials {
                cells.push((mode, size, trial));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut rows: Vec<ConvergenceRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(mode, size, trial)| ConvergenceRow {
                problem: problem.id(),
                mode,
                size,
                trial,
                outcome: run_cell(problem, &test, config, size, trial, mode).map_err(|e| e.to_string()),
            })
            .collect()
    });
    rows.sort_by_key(|r| (r.mode, r.size, r.trial));
    Ok(ConvergenceTable {
        problem: problem.id(),
        output_dim: problem.output_dim(),
        rows,
    })
}

impl ConvergenceTable {
    /// Per-(mode, J) means over completed trials.
    pub fn means(&self) -> Vec<MeanRow> {
        let mut groups: BTreeMap<(Mode, usize), Vec<&MseReport>> = BTreeMap::new();
        for r in &self.rows {
            let entry = groups.entry((r.mode, r.size)).or_default();
            if let Ok(rep) = &r.outcome {
                entry.push(rep);
            }
        }
        groups
            .into_iter()
            .map(|((mode, size), reps)| {
                let n = reps.len() as f64;
                MeanRow {
                    problem: self.problem,
                    mode,
                    size,
                    mean_mse: reps.iter().map(|r| r.mse).sum::<f64>() / n,
                    mean_cumulative: reps.iter().map(|r| r.cumulative).sum::<f64>() / n,
                    completed: reps.len(),
                }
            })
            .collect()
    }

    pub fn mean_mse(&self, mode: Mode, size: usize) -> Option<f64> {
        self.means()
            .into_iter()
            .find(|m| m.mode == mode && m.size == size)
            .map(|m| m.mean_mse)
    }

    /// Least-squares slope of log₂(mean MSE) against log₂ J.
    pub fn slope(&self, mode: Mode) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .means()
            .into_iter()
            .filter(|m| m.mode == mode && m.mean_mse > 0.0 && m.mean_mse.is_finite())
            .map(|m| ((m.size as f64).log2(), m.mean_mse.log2()))
            .collect();
        least_squares_slope(&pts)
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("problem,mode,J,trial,mse\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{:.16e}", r.problem, r.mode, r.size, r.trial, r.mse()).unwrap();
        }
        out
    }

    pub fn means_csv(&self) -> String {
        let mut out = String::from("problem,mode,J,mean_mse\n");
        for m in self.means() {
            writeln!(out, "{},{},{},{:.16e}", m.problem, m.mode, m.size, m.mean_mse).unwrap();
        }
        out
    }

    /// Summed-over-outputs MSE, for multi-output problems.
    pub fn cumulative_csv(&self) -> String {
        let mut out = String::from("problem,mode,J,mean_cumulative_mse\n");
        for m in self.means() {
            writeln!(out, "{},{},{},{:.16e}", m.problem, m.mode, m.size, m.mean_cumulative).unwrap();
        }
        out
    }

    /// Per-point squared errors averaged over completed trials.
    pub fn per_point_mean(&self, mode: Mode, size: usize) -> Option<Vec<f64>> {
        let reps: Vec<&MseReport> = self
            .rows
            .iter()
            .filter(|r| r.mode == mode && r.size == size)
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect();
        let first = reps.first()?;
        let mut acc = vec![0.0; first.per_point.len()];
        for r in &reps {
            for (a, e) in acc.iter_mut().zip(&r.per_point) {
                *a += e;
            }
        }
        let n = reps.len() as f64;
        Some(acc.into_iter().map(|a| a / n).collect())
    }
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `count` interior points of the box, staggered across coordinates at
/// fractions 1/6 … 5/6.
pub fn interior_points(problem: &ProblemSpec, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|p| {
            problem
                .bounds()
                .iter()
                .enumerate()
                .map(|(i, iv)| iv.lo + iv.width() * (1 + (p + 2 * i) % 5) as f64 / 6.0)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// ŷ_k
    Label(usize),
    /// ∂ŷ_k/∂θ̂_i
    Gradient(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasednessCheck {
    pub point: Vec<f64>,
    pub quantity: Quantity,
    pub mean: f64,
    pub std_error: f64,
    pub truth: f64,
    pub tolerance: f64,
}

impl UnbiasednessCheck {
    pub fn passed(&self) -> bool {
        (self.mean - self.truth).abs() <= self.tolerance
    }
}

/// Absolute floor of the gradient tolerance.
pub const GRADIENT_ABS_TOL: f64 = 1e-3;
/// Finite-difference step of the gradient truth, relative to the box width.
pub const GRADIENT_FD_STEP: f64 = 1e-4;

/// Monte Carlo mean of every label and gradient component at `point`
/// against the exact label mean: labels within 4 standard errors, gradients
/// within max(4·SE, 1e−3) of central differences of the label mean.
pub fn unbiasedness_at(
    problem: &ProblemSpec,
    point: &[f64],
    samples: usize,
    rng: &mut RngState,
) -> Result<Vec<UnbiasednessCheck>> {
    let d = problem.input_dim();
    let k = problem.output_dim();
    let width = k + k * d;
    let mut sum = vec![0.0; width];
    let mut sum_sq = vec![0.0; width];
    for _ in 0..samples {
        let s = problem.draw_label(point.to_vec(), rng)?;
        for (j, v) in s.labels.iter().chain(&s.grads).enumerate() {
            sum[j] += v;
            sum_sq[j] += v * v;
        }
    }
    let n = samples as f64;
    let stats = |j: usize| {
        let mean = sum[j] / n;
        let var = ((sum_sq[j] - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    };

    let expectation = problem.label_expectation(point)?;
    let mut checks = Vec::with_capacity(width);
    for (l, truth) in expectation.iter().enumerate() {
        let (mean, se) = stats(l);
        checks.push(UnbiasednessCheck {
            point: point.to_vec(),
            quantity: Quantity::Label(l),
            mean,
            std_error: se,
            truth: *truth,
            tolerance: 4.0 * se,
        });
    }
    for (i, iv) in problem.bounds().iter().enumerate() {
        let h = GRADIENT_FD_STEP * iv.width();
        let mut up = point.to_vec();
        let mut down = point.to_vec();
        up[i] += h;
        down[i] -= h;
        let e_up = problem.label_expectation(&up)?;
        let e_down = problem.label_expectation(&down)?;
        for l in 0..k {
            let (mean, se) = stats(k + l * d + i);
            checks.push(UnbiasednessCheck {
                point: point.to_vec(),
                quantity: Quantity::Gradient(l, i),
                mean,
                std_error: se,
                truth: (e_up[l] - e_down[l]) / (2.0 * h),
                tolerance: (4.0 * se).max(GRADIENT_ABS_TOL),
            });
        }
    }
    Ok(checks)
}

/// Label and gradient unbiasedness at [`interior_points`].
pub fn label_unbiasedness(
    problem: &ProblemSpec,
    points: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<UnbiasednessCheck>> {
    let mut out = Vec::new();
    for (p, x) in interior_points(problem, points).iter().enumerate() {
        let mut rng = RngState::new(
            seed,
            StreamId::new(StreamKind::Unbiasedness, samples as u64, p as u32, 0),
        );
        out.extend(unbiasedness_at(problem, x, samples, &mut rng)?);
    }
    Ok(out)
}

/// Paired comparison of per-point squared errors of DML against ANN.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReduction {
    pub size: usize,
    pub mean_dml: f64,
    pub mean_ann: f64,
    /// 95% paired-bootstrap interval of mean(dml − ann).
    pub diff_ci: (f64, f64),
}

impl VarianceReduction {
    pub fn ratio(&self) -> f64 {
        self.mean_dml / self.mean_ann
    }
}

pub const BOOTSTRAP_RESAMPLES: usize = 2000;

/// Compares trial-averaged per-point squared errors of the two modes at J.
pub fn variance_reduction(table: &ConvergenceTable, size: usize, seed: u64) -> Result<VarianceReduction> {
    let missing = || Error::Config(format!("no completed rows for J = {size}"));
    let dml = table.per_point_mean(Mode::Dml, size).ok_or_else(missing)?;
    let ann = table.per_point_mean(Mode::Ann, size).ok_or_else(missing)?;
    let diff: Vec<f64> = dml.iter().zip(&ann).map(|(a, b)| a - b).collect();
    let n = diff.len();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut rng = RngState::new(seed, StreamId::new(StreamKind::Bootstrap, size as u64, 0, 0));
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..n).map(|_| diff[rng.index(n)]).sum::<f64>() / n as f64)
        .collect();
    boot.sort_by(f64::total_cmp);
    let lo = boot[(0.025 * BOOTSTRAP_RESAMPLES as f64) as usize];
    let hi = boot[(0.975 * BOOTSTRAP_RESAMPLES as f64) as usize - 1];
    Ok(VarianceReduction {
        size,
        mean_dml: mean(&dml),
        mean_ann: mean(&ann),
        diff_ci: (lo, hi),
    })
}
