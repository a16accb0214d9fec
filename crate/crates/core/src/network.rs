//! Feed-forward network with an exact twin (input-Jacobian) pass.
//!
//! Batches are row-major: n×d inputs map to n×K outputs. Weight matrices are
//! stored out×in, so a layer computes `Z = A·Wᵀ + b`.
//!
//! The twin loss carries d forward-mode tangents through the network, stacked
//! into one (d·n)×h matrix per layer (block i holds ∂/∂x_i), and then
//! differentiates the whole composed graph in reverse. The recurrences are
//! hand-derived; they are pinned by finite-difference tests.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, Axis, Zip};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fileio::{fmt_f64, parse_f64};
use crate::sampling::{RngState, StreamId, StreamKind};

/// Hidden-layer activation; the output layer is always the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Softplus,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Softplus => "softplus",
            Activation::Identity => "identity",
        }
    }

    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            Activation::Identity => z,
        }
    }

    pub fn d1(self, z: f64) -> f64 {
        match self {
            Activation::Softplus => {
                let e = (-z.abs()).exp();
                if z >= 0.0 {
                    1.0 / (1.0 + e)
                } else {
                    e / (1.0 + e)
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn d2(self, z: f64) -> f64 {
        match self {
            Activation::Softplus => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            Activation::Identity => 0.0,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softplus" => Ok(Activation::Softplus),
            "identity" => Ok(Activation::Identity),
            _ => Err(Error::Config(format!("unknown activation '{s}'"))),
        }
    }
}

/// Activation values and first and second derivatives of a pre-activation
/// batch in one pass (one exponential per entry for softplus).
fn activate(act: Activation, z: &Array2<f64>, second: bool) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let mut a = Array2::zeros(z.raw_dim());
    let mut s1 = Array2::zeros(z.raw_dim());
    let mut s2 = if second { Array2::zeros(z.raw_dim()) } else { Array2::zeros((0, 0)) };
    match act {
        Activation::Softplus => {
            if second {
                Zip::from(&mut a).and(&mut s1).and(&mut s2).and(z).for_each(|a, s1, s2, &z| {
                    let e = (-z.abs()).exp();
                    let r = 1.0 / (1.0 + e);
                    *a = z.max(0.0) + e.ln_1p();
                    *s1 = if z >= 0.0 { r } else { e * r };
                    *s2 = e * r * r;
                });
            } else {
                Zip::from(&mut a).and(&mut s1).and(z).for_each(|a, s1, &z| {
                    let e = (-z.abs()).exp();
                    let r = 1.0 / (1.0 + e);
                    *a = z.max(0.0) + e.ln_1p();
                    *s1 = if z >= 0.0 { r } else { e * r };
                });
            }
        }
        Activation::Identity => {
            a.assign(z);
            s1.fill(1.0);
        }
    }
    (a, s1, s2)
}

/// Mixing weights of the value and differential losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    omega: f64,
    q: usize,
}

impl LossWeights {
    pub fn new(omega: f64, q: usize) -> Result<Self> {
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::Config(format!("omega must be finite and >= 0, got {omega}")));
        }
        Ok(Self { omega, q })
    }

    /// ω = 0: the pure value loss.
    pub fn value_only(q: usize) -> Self {
        Self { omega: 0.0, q }
    }

    /// ω = 1/q, giving both loss terms equal weight.
    pub fn balanced(q: usize) -> Self {
        Self {
            omega: 1.0 / q as f64,
            q,
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// ϑ = 1/(1 + ωq)
    pub fn theta(&self) -> f64 {
        1.0 / (1.0 + self.omega * self.q as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    widths: Vec<usize>,
    activation: Activation,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Gradient of a scalar with respect to every weight and bias; same shapes
/// as the corresponding [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::Config(format!("invalid layer widths {widths:?}")));
    }
    Ok(())
}

impl ModelParams {
    /// Weights uniform on ±√(3/fan_in) (variance 1/fan_in), biases zero.
    pub fn init(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_widths(widths)?;
        let mut rng = RngState::new(seed, StreamId::of(StreamKind::Init));
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (3.0 / fan_in as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                limit * (2.0 * rng.unit() - 1.0)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            weights,
            biases,
        })
    }

    /// Builds a network from explicit out×in weight matrices.
    pub fn from_layers(activation: Activation, layers: Vec<(Array2<f64>, Array1<f64>)>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::Config("no layers".into()))?;
        let mut widths = vec![first.0.ncols()];
        for (w, b) in &layers {
            if w.ncols() != *widths.last().unwrap() || b.len() != w.nrows() {
                return Err(Error::Config("layer shapes do not chain".into()));
            }
            widths.push(w.nrows());
        }
        check_widths(&widths)?;
        let (weights, biases) = layers.into_iter().unzip();
        Ok(Self {
            widths,
            activation,
            weights,
            biases,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// m = Σ (h·h′ + h′)
    pub fn num_weights(&self) -> usize {
        self.widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    /// Flat index order: layer by layer, weights row-major then biases.
    fn locate(&self, mut idx: usize) -> (usize, Option<(usize, usize)>, usize) {
        for (l, w) in self.weights.iter().enumerate() {
            if idx < w.len() {
                return (l, Some((idx / w.ncols(), idx % w.ncols())), 0);
            }
            idx -= w.len();
            if idx < w.nrows() {
                return (l, None, idx);
            }
            idx -= w.nrows();
        }
        panic!("flat weight index out of range");
    }

    pub fn get_flat(&self, idx: usize) -> f64 {
        match self.locate(idx) {
            (l, Some(rc), _) => self.weights[l][rc],
            (l, None, j) => self.biases[l][j],
        }
    }

    pub fn set_flat(&mut self, idx: usize, value: f64) {
        match self.locate(idx) {
            (l, Some(rc), _) => self.weights[l][rc] = value,
            (l, None, j) => self.biases[l][j] = value,
        }
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.input_dim(),
                got,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let batch = Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
        Ok(self.forward_batch(&batch)?.row(0).to_vec())
    }

    /// n×d inputs to n×K outputs.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let last = self.num_layers() - 1;
        let mut a = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t()) + b;
            if l < last {
                let act = self.activation;
                z.mapv_inplace(|v| act.value(v));
            }
            a = z;
        }
        Ok(a)
    }

    /// K×d Jacobian ∂y/∂x at `x` by a reverse sweep seeded with every output
    /// direction at once.
    pub fn input_jacobian(&self, x: &[f64]) -> Result<Array2<f64>> {
        self.check_input(x.len())?;
        let last = self.num_layers() - 1;
        let mut a = Array1::from(x.to_vec());
        let mut slopes = Vec::with_capacity(last);
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w.dot(&a) + b;
            if l < last {
                let act = self.activation;
                slopes.push(z.mapv(|v| act.d1(v)));
                a = z.mapv(|v| act.value(v));
            }
        }
        let mut g = self.weights[last].clone();
        for l in (0..last).rev() {
            g *= &slopes[l];
            g = g.dot(&self.weights[l]);
        }
        Ok(g)
    }

    /// Value-only loss ϑ·Σ(y−ŷ)²/(nK) with ϑ = 1 and its weight gradient.
    pub fn value_loss_and_gradient(&self, batch: &Dataset) -> Result<(f64, ParamGrads)> {
        self.check_batch(batch)?;
        let n = batch.len();
        let k = self.output_dim();
        let last = self.num_layers() - 1;
        let act = self.activation;
        let mut acts = vec![batch.inputs.clone()];
        let mut slopes = Vec::with_capacity(last);
        for l in 0..=last {
            let z = acts[l].dot(&self.weights[l].t()) + &self.biases[l];
            if l < last {
                let (a, s1, _) = activate(act, &z, false);
                slopes.push(s1);
                acts.push(a);
            } else {
                acts.push(z);
            }
        }
        let resid = &acts[last + 1] - &batch.labels;
        let scale = 1.0 / (n * k) as f64;
        let loss = resid.iter().map(|r| r * r).sum::<f64>() * scale;
        let mut zbar = resid * (2.0 * scale);
        let mut grads = self.zero_grads();
        for l in (0..=last).rev() {
            grads.weights[l] = zbar.t().dot(&acts[l]);
            grads.biases[l] = zbar.sum_axis(Axis(0));
            if l > 0 {
                let mut abar = zbar.dot(&self.weights[l]);
                abar *= &slopes[l - 1];
                zbar = abar;
            }
        }
        Ok((loss, grads))
    }

    /// Combined loss
    /// ϑ·Σ(y−ŷ)²/(nK) + (1−ϑ)·Σ‖J−g‖²_F/(nK)
    /// and its exact gradient through the twin pass.
    pub fn loss_and_gradient(&self, batch: &Dataset, lw: LossWeights) -> Result<(f64, ParamGrads)> {
        self.check_batch(batch)?;
        let n = batch.len();
        let d = self.input_dim();
        let k = self.output_dim();
        let last = self.num_layers() - 1;
        let act = self.activation;

        // forward with stacked tangents
        let mut acts = vec![batch.inputs.clone()];
        let mut tangents: Vec<Array2<f64>> = vec![Array2::zeros((0, 0))];
        let mut s1s = Vec::with_capacity(last);
        let mut s2s = Vec::with_capacity(last);
        let mut zdots = Vec::with_capacity(last);
        for l in 0..=last {
            let w = &self.weights[l];
            let z = acts[l].dot(&w.t()) + &self.biases[l];
            let zdot = if l == 0 {
                let mut zd = Array2::zeros((d * n, w.nrows()));
                for i in 0..d {
                    zd.slice_mut(s![i * n..(i + 1) * n, ..]).assign(&w.column(i));
                }
                zd
            } else {
                tangents[l].dot(&w.t())
            };
            if l < last {
                let (a, s1, s2) = activate(act, &z, true);
                let mut adot = zdot.clone();
                for i in 0..d {
                    let mut block = adot.slice_mut(s![i * n..(i + 1) * n, ..]);
                    block *= &s1;
                }
                acts.push(a);
                tangents.push(adot);
                s1s.push(s1);
                s2s.push(s2);
                zdots.push(zdot);
            } else {
                acts.push(z);
                zdots.push(zdot);
            }
        }

        let theta = lw.theta();
        let scale = 1.0 / (n * k) as f64;
        let resid = &acts[last + 1] - &batch.labels;
        let value_sq = resid.iter().map(|r| r * r).sum::<f64>();
        let mut jres = zdots.pop().unwrap();
        for i in 0..d {
            let mut block = jres.slice_mut(s![i * n..(i + 1) * n, ..]);
            let target = batch.grads.slice(s![.., i..;d]);
            block -= &target;
        }
        let diff_sq = jres.iter().map(|r| r * r).sum::<f64>();
        let loss = theta * value_sq * scale + (1.0 - theta) * diff_sq * scale;

        let mut zbar = resid * (2.0 * theta * scale);
        let mut zdbar = jres * (2.0 * (1.0 - theta) * scale);
        let mut grads = self.zero_grads();
        for l in (0..=last).rev() {
            let w = &self.weights[l];
            let mut wbar = zbar.t().dot(&acts[l]);
            if l > 0 {
                wbar += &zdbar.t().dot(&tangents[l]);
            } else {
                for i in 0..d {
                    let colsum = zdbar.slice(s![i * n..(i + 1) * n, ..]).sum_axis(Axis(0));
                    let mut col = wbar.column_mut(i);
                    col += &colsum;
                }
            }
            grads.weights[l] = wbar;
            grads.biases[l] = zbar.sum_axis(Axis(0));
            if l == 0 {
                break;
            }
            let s1 = &s1s[l - 1];
            let s2 = &s2s[l - 1];
            let zd = &zdots[l - 1];
            let abar = zbar.dot(w);
            let adbar = zdbar.dot(w);
            let mut next_zbar = abar * s1;
            let mut next_zdbar = adbar;
            for i in 0..d {
                let rows = s![i * n..(i + 1) * n, ..];
                let ad = next_zdbar.slice(rows);
                Zip::from(&mut next_zbar)
                    .and(&ad)
                    .and(s2)
                    .and(zd.slice(rows))
                    .for_each(|zb, &a, &c2, &t| *zb += a * c2 * t);
                let mut block = next_zdbar.slice_mut(rows);
                block *= s1;
            }
            zbar = next_zbar;
            zdbar = next_zdbar;
        }
        Ok((loss, grads))
    }

    fn check_batch(&self, batch: &Dataset) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::DatasetTooSmall { needed: 1, got: 0 });
        }
        self.check_input(batch.input_dim())?;
        if batch.output_dim() != self.output_dim() {
            return Err(Error::Dimension {
                context: "batch labels",
                expected: self.output_dim(),
                got: batch.output_dim(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Appends the `widths`, `activation` and per-layer `W`/`b` lines of the
    /// model file.
    pub fn write_text(&self, out: &mut String) {
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        writeln!(out, "widths {}", widths.join(" ")).unwrap();
        writeln!(out, "activation {}", self.activation.name()).unwrap();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            writeln!(out, "layer {l} {} {}", w.nrows(), w.ncols()).unwrap();
            for row in w.rows() {
                let vals: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
                writeln!(out, "W {}", vals.join(" ")).unwrap();
            }
            let vals: Vec<String> = b.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(out, "b {}", vals.join(" ")).unwrap();
        }
    }

    /// Inverse of [`ModelParams::write_text`]; `lines` yields
    /// (line number, text) and is advanced past the parameter block.
    pub fn parse_text<'a, I>(lines: &mut I) -> Result<Self>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let (no, text) = next_line(lines)?;
        let widths = keyed(no, text, "widths")?
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>().map_err(|_| Error::Format {
                    line: no,
                    message: format!("bad width '{t}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        check_widths(&widths).map_err(|e| Error::Format {
            line: no,
            message: e.to_string(),
        })?;
        let (no, text) = next_line(lines)?;
        let activation: Activation = keyed(no, text, "activation")?.parse().map_err(|e: Error| Error::Format {
            line: no,
            message: e.to_string(),
        })?;
        let mut layers = Vec::new();
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let (no, text) = next_line(lines)?;
            let expect = format!("{l} {fan_out} {fan_in}");
            if keyed(no, text, "layer")? != expect {
                return Err(Error::Format {
                    line: no,
                    message: format!("expected 'layer {expect}'"),
                });
            }
            let mut w = Array2::zeros((fan_out, fan_in));
            for r in 0..fan_out {
                let (no, text) = next_line(lines)?;
                let vals = floats(no, keyed(no, text, "W")?, fan_in)?;
                w.row_mut(r).assign(&Array1::from(vals));
            }
            let (no, text) = next_line(lines)?;
            let b = Array1::from(floats(no, keyed(no, text, "b")?, fan_out)?);
            layers.push((w, b));
        }
        Self::from_layers(activation, layers)
    }
}

pub(crate) fn next_line<'a, I>(lines: &mut I) -> Result<(usize, &'a str)>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    lines.next().ok_or(Error::Format {
        line: 0,
        message: "unexpected end of file".into(),
    })
}

/// Strips `key ` from the front of a line.
pub(crate) fn keyed<'a>(line: usize, text: &'a str, key: &str) -> Result<&'a str> {
    match text.split_once(' ') {
        Some((k, rest)) if k == key => Ok(rest.trim()),
        None if text.trim() == key => Ok(""),
        _ => Err(Error::Format {
            line,
            message: format!("expected '{key}', got '{text}'"),
        }),
    }
}

pub(crate) fn floats(line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let vals = text
        .split_whitespace()
        .map(|t| parse_f64(t, line))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != expected {
        return Err(Error::Format {
            line,
            message: format!("expected {expected} values, got {}", vals.len()),
        });
    }
    Ok(vals)
}
