//! Adam training with a quadratically decaying learning rate and the
//! ANN/DML mode switch.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis, Zip};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fileio::{fmt_f64, parse_f64, write_atomic};
use crate::network::{floats, keyed, next_line, Activation, LossWeights, ModelParams, ParamGrads};
use crate::preprocessing::Scaler;
use crate::problems::{Interval, ProblemId, ProblemSpec};
use crate::sampling::{RngState, StreamId, StreamKind};

pub const MODEL_FORMAT_TAG: &str = "paramint-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Value labels only (ω = 0).
    Ann,
    /// Value and differential labels (ω = 1/q by default).
    Dml,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Ann, Mode::Dml];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Ann => "ann",
            Mode::Dml => "dml",
        }
    }

    /// Stream-id field for this mode.
    pub fn code(self) -> u8 {
        match self {
            Mode::Ann => 0,
            Mode::Dml => 1,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ann" => Ok(Mode::Ann),
            "dml" => Ok(Mode::Dml),
            _ => Err(Error::Config(format!("invalid mode '{s}' (valid modes: ann, dml)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub mode: Mode,
    /// Overrides ω = 1/q in DML mode.
    pub omega: Option<f64>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 128,
            batch: 1024,
            lr_start: 1e-2,
            lr_end: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            mode: Mode::Dml,
            omega: None,
            hidden: vec![64; 4],
            activation: Activation::Softplus,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch == 0 || self.batch > dataset_len {
            return Err(Error::Config(format!(
                "batch size {} must lie in 1..={dataset_len}",
                self.batch
            )));
        }
        if !(self.lr_end <= self.lr_start) || !(self.lr_end >= 0.0) {
            return Err(Error::Config(format!(
                "need 0 <= lr_end <= lr_start, got {} and {}",
                self.lr_end, self.lr_start
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn loss_weights(&self, q: usize) -> Result<LossWeights> {
        match self.mode {
            Mode::Ann => Ok(LossWeights::value_only(q)),
            Mode::Dml => match self.omega {
                Some(w) => LossWeights::new(w, q),
                None => Ok(LossWeights::balanced(q)),
            },
        }
    }

    /// T = epochs·⌈J/batch⌉
    pub fn total_steps(&self, dataset_len: usize) -> u64 {
        (self.epochs * dataset_len.div_ceil(self.batch)) as u64
    }
}

/// lr(t) = lr_end + (lr_start − lr_end)·(1 − t/T)²
pub fn lr_schedule(step: u64, total: u64, config: &TrainConfig) -> f64 {
    let frac = 1.0 - step.min(total) as f64 / total.max(1) as f64;
    config.lr_end + (config.lr_start - config.lr_end) * frac * frac
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: ParamGrads,
    v: ParamGrads,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zero_grads(),
            v: params.zero_grads(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

fn first_non_finite(grads: &ParamGrads) -> Option<(usize, usize)> {
    for (l, (w, b)) in grads.weights.iter().zip(&grads.biases).enumerate() {
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Some((l, i));
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite()) {
            return Some((l, w.len() + i));
        }
    }
    None
}

/// One bias-corrected Adam update. A non-finite gradient aborts before any
/// state is modified; `index` counts within the layer, weights first.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ParamGrads,
    state: &mut AdamState,
    lr: f64,
    config: &TrainConfig,
) -> Result<()> {
    if let Some((layer, index)) = first_non_finite(grads) {
        return Err(Error::NonFiniteGradient {
            step: state.step,
            layer,
            index,
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (config.beta1, config.beta2, config.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for l in 0..params.num_layers() {
        Zip::from(&mut params.weights[l])
            .and(&mut state.m.weights[l])
            .and(&mut state.v.weights[l])
            .and(&grads.weights[l])
            .for_each(|p, m, v, &g| update(p, m, v, g));
        Zip::from(&mut params.biases[l])
            .and(&mut state.m.biases[l])
            .and(&mut state.v.biases[l])
            .and(&grads.biases[l])
            .for_each(|p, m, v, &g| update(p, m, v, g));
    }
    Ok(())
}

/// A trained surrogate: network, scaler and the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub problem: ProblemSpec,
    pub params: ModelParams,
    pub scaler: Scaler,
    pub mode: Mode,
    pub loss_weights: LossWeights,
    pub seed: u64,
    /// Mini-batch loss before each update, in standardized units.
    pub loss_trace: Vec<f64>,
}

/// Fits the scaler, then runs `epochs` passes of Adam over seeded per-epoch
/// shuffles, keeping the final partial batch.
pub fn train(problem: &ProblemSpec, data: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    let d = problem.input_dim();
    let k = problem.output_dim();
    if data.input_dim() != d || data.output_dim() != k {
        return Err(Error::Dimension {
            context: "training dataset",
            expected: d + k,
            got: data.input_dim() + data.output_dim(),
        });
    }
    config.validate(data.len())?;
    let lw = config.loss_weights(d)?;
    let scaler = Scaler::fit(data)?;
    let std_data = scaler.transform_dataset(data)?;

    let mut widths = vec![d];
    widths.extend(&config.hidden);
    widths.push(k);
    let mut params = ModelParams::init(&widths, config.activation, config.seed)?;
    let mut adam = AdamState::new(&params);
    let mut shuffle = RngState::new(config.seed, StreamId::of(StreamKind::Shuffle));

    let n = data.len();
    let total = config.total_steps(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(total as usize);
    let mut step = 0u64;
    for _ in 0..config.epochs {
        for i in (1..n).rev() {
            order.swap(i, shuffle.index(i + 1));
        }
        for chunk in order.chunks(config.batch) {
            let batch = Dataset {
                inputs: std_data.inputs.select(Axis(0), chunk),
                labels: std_data.labels.select(Axis(0), chunk),
                grads: std_data.grads.select(Axis(0), chunk),
            };
            let (loss, grads) = match config.mode {
                Mode::Ann => params.value_loss_and_gradient(&batch)?,
                Mode::Dml => params.loss_and_gradient(&batch, lw)?,
            };
            trace.push(loss);
            adam_step(&mut params, &grads, &mut adam, lr_schedule(step, total, config), config)?;
            step += 1;
        }
    }
    Ok(TrainedModel {
        problem: problem.clone(),
        params,
        scaler,
        mode: config.mode,
        loss_weights: lw,
        seed: config.seed,
        loss_trace: trace,
    })
}

impl TrainedModel {
    /// Raw-unit label-space predictions for an n×d batch of inputs.
    pub fn predict(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        let x_mean = ndarray::Array1::from(self.scaler.x_mean.clone());
        let x_std = ndarray::Array1::from(self.scaler.x_std.clone());
        let std_inputs = (inputs - &x_mean) / &x_std;
        let mut out = self.params.forward_batch(&std_inputs)?;
        self.scaler.invert_output_batch(&mut out);
        Ok(out)
    }

    /// Predictions in reporting convention, comparable with
    /// [`ProblemSpec::ground_truth`].
    pub fn predict_reported(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = self.predict(inputs)?;
        for mut row in out.rows_mut() {
            let mut v = row.to_vec();
            self.problem.to_reported(&mut v);
            row.assign(&ndarray::ArrayView1::from(&v));
        }
        Ok(out)
    }

    /// Raw-unit K×d Jacobian of the label-space prediction at one point.
    pub fn jacobian(&self, x: &[f64]) -> Result<Array2<f64>> {
        let xs = self.scaler.transform_inputs(x);
        let y = self.params.forward(&xs)?;
        let jac = self.params.input_jacobian(&xs)?;
        let (_, raw) = self
            .scaler
            .invert_prediction(&y, jac.as_standard_layout().as_slice().unwrap())?;
        Ok(Array2::from_shape_vec(jac.raw_dim(), raw).unwrap())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let line = |v: &[f64]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
        writeln!(out, "{MODEL_FORMAT_TAG}").unwrap();
        writeln!(out, "problem {}", self.problem.id()).unwrap();
        writeln!(out, "degree {}", self.problem.degree()).unwrap();
        let bounds: Vec<f64> = self.problem.bounds().iter().flat_map(|iv| [iv.lo, iv.hi]).collect();
        writeln!(out, "bounds {}", line(&bounds)).unwrap();
        writeln!(out, "mode {}", self.mode).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "omega {}", fmt_f64(self.loss_weights.omega())).unwrap();
        writeln!(out, "q {}", self.loss_weights.q()).unwrap();
        writeln!(out, "theta {}", fmt_f64(self.loss_weights.theta())).unwrap();
        writeln!(out, "x_mean {}", line(&self.scaler.x_mean)).unwrap();
        writeln!(out, "x_std {}", line(&self.scaler.x_std)).unwrap();
        writeln!(out, "y_mean {}", line(&self.scaler.y_mean)).unwrap();
        writeln!(out, "y_std {}", line(&self.scaler.y_std)).unwrap();
        self.params.write_text(&mut out);
        writeln!(out, "end").unwrap();
        out
    }

    /// Parses [`TrainedModel::to_text`] output. The loss trace is not stored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let lines = &mut lines;
        let fmt_err = |line: usize, message: String| Error::Format { line, message };

        let (no, tag) = next_line(lines)?;
        if tag != MODEL_FORMAT_TAG {
            return Err(fmt_err(no, format!("expected '{MODEL_FORMAT_TAG}'")));
        }
        let (no, t) = next_line(lines)?;
        let id: ProblemId = keyed(no, t, "problem")?.parse().map_err(|e: Error| fmt_err(no, e.to_string()))?;
        let (no, t) = next_line(lines)?;
        let degree: usize = keyed(no, t, "degree")?
            .parse()
            .map_err(|_| fmt_err(no, "bad degree".into()))?;
        let (no, t) = next_line(lines)?;
        let b = floats(no, keyed(no, t, "bounds")?, 2 * id.input_dim())?;
        let bounds = b.chunks(2).map(|c| Interval::new(c[0], c[1])).collect();
        let problem = ProblemSpec::new(id)
            .with_degree(degree)
            .and_then(|p| p.with_bounds(bounds))
            .map_err(|e| fmt_err(no, e.to_string()))?;
        let (no, t) = next_line(lines)?;
        let mode: Mode = keyed(no, t, "mode")?.parse().map_err(|e: Error| fmt_err(no, e.to_string()))?;
        let (no, t) = next_line(lines)?;
        let seed: u64 = keyed(no, t, "seed")?
            .parse()
            .map_err(|_| fmt_err(no, "bad seed".into()))?;
        let (no, t) = next_line(lines)?;
        let omega = parse_f64(keyed(no, t, "omega")?, no)?;
        let (no, t) = next_line(lines)?;
        let q: usize = keyed(no, t, "q")?.parse().map_err(|_| fmt_err(no, "bad q".into()))?;
        let loss_weights = LossWeights::new(omega, q).map_err(|e| fmt_err(no, e.to_string()))?;
        let (no, t) = next_line(lines)?;
        let theta = parse_f64(keyed(no, t, "theta")?, no)?;
        if theta.to_bits() != loss_weights.theta().to_bits() {
            return Err(fmt_err(no, "theta inconsistent with omega and q".into()));
        }
        let (d, k) = (problem.input_dim(), problem.output_dim());
        let mut vec_line = |key: &str, len: usize| -> Result<Vec<f64>> {
            let (no, t) = next_line(lines)?;
            floats(no, keyed(no, t, key)?, len)
        };
        let scaler = Scaler {
            x_mean: vec_line("x_mean", d)?,
            x_std: vec_line("x_std", d)?,
            y_mean: vec_line("y_mean", k)?,
            y_std: vec_line("y_std", k)?,
        };
        let params = ModelParams::parse_text(lines)?;
        if params.input_dim() != d || params.output_dim() != k {
            return Err(fmt_err(0, "network shape does not match the problem".into()));
        }
        let (no, t) = next_line(lines)?;
        if t != "end" {
            return Err(fmt_err(no, "expected 'end'".into()));
        }
        Ok(Self {
            problem,
            params,
            scaler,
            mode,
            loss_weights,
            seed,
            loss_trace: Vec::new(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
