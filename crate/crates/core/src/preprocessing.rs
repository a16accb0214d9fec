//! Affine standardization of inputs, labels and differentials.
//!
//! Differentials go through the chain rule of both affine maps,
//! g′_{k,i} = g_{k,i}·σ_{x,i}/σ_{y,k}, so standardized gradients remain the
//! exact derivatives of standardized labels.

use ndarray::{Array1, Array2, Axis};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::problems::LabeledSample;

pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_std: Vec<f64>,
}

fn column_stats(a: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows() as f64;
    let mean: Array1<f64> = a.sum_axis(Axis(0)) / n;
    let std = a
        .axis_iter(Axis(1))
        .zip(mean.iter())
        .map(|(col, m)| {
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            var.sqrt().max(STD_FLOOR)
        })
        .collect();
    (mean.to_vec(), std)
}

impl Scaler {
    /// Per-column mean and population standard deviation, floored at 1e−12.
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::DatasetTooSmall {
                needed: 2,
                got: data.len(),
            });
        }
        let (x_mean, x_std) = column_stats(&data.inputs);
        let (y_mean, y_std) = column_stats(&data.labels);
        Ok(Self {
            x_mean,
            x_std,
            y_mean,
            y_std,
        })
    }

    pub fn identity(d: usize, k: usize) -> Self {
        Self {
            x_mean: vec![0.0; d],
            x_std: vec![1.0; d],
            y_mean: vec![0.0; k],
            y_std: vec![1.0; k],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.x_mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.y_mean.len()
    }

    fn check(&self, context: &'static str, d: usize, k: usize) -> Result<()> {
        if d != self.input_dim() {
            return Err(Error::Dimension {
                context,
                expected: self.input_dim(),
                got: d,
            });
        }
        if k != self.output_dim() {
            return Err(Error::Dimension {
                context,
                expected: self.output_dim(),
                got: k,
            });
        }
        Ok(())
    }

    pub fn transform_inputs(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x_mean.iter().zip(&self.x_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, sample: &LabeledSample) -> Result<LabeledSample> {
        let (d, k) = (sample.inputs.len(), sample.labels.len());
        self.check("scaler transform", d, k)?;
        if sample.grads.len() != k * d {
            return Err(Error::Dimension {
                context: "scaler transform grads",
                expected: k * d,
                got: sample.grads.len(),
            });
        }
        let labels = sample
            .labels
            .iter()
            .zip(self.y_mean.iter().zip(&self.y_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut grads = sample.grads.clone();
        for (l, row) in grads.chunks_mut(d).enumerate() {
            for (g, sx) in row.iter_mut().zip(&self.x_std) {
                *g *= sx / self.y_std[l];
            }
        }
        Ok(LabeledSample {
            inputs: self.transform_inputs(&sample.inputs),
            labels,
            grads,
        })
    }

    /// Standardizes a whole dataset.
    pub fn transform_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let (d, k) = (data.input_dim(), data.output_dim());
        self.check("scaler transform", d, k)?;
        let x_mean = Array1::from(self.x_mean.clone());
        let x_std = Array1::from(self.x_std.clone());
        let y_mean = Array1::from(self.y_mean.clone());
        let y_std = Array1::from(self.y_std.clone());
        let inputs = (&data.inputs - &x_mean) / &x_std;
        let labels = (&data.labels - &y_mean) / &y_std;
        let factor = Array1::from_shape_fn(k * d, |c| self.x_std[c % d] / self.y_std[c / d]);
        let grads = &data.grads * &factor;
        Ok(Dataset { inputs, labels, grads })
    }

    /// Maps standardized network outputs and K×d Jacobian (row-major) back to
    /// raw units; exact inverse of [`Scaler::transform`].
    pub fn invert_prediction(&self, outputs: &[f64], jacobian: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (d, k) = (self.input_dim(), self.output_dim());
        self.check("scaler invert", d, outputs.len())?;
        if jacobian.len() != k * d {
            return Err(Error::Dimension {
                context: "scaler invert jacobian",
                expected: k * d,
                got: jacobian.len(),
            });
        }
        let y = self.invert_outputs(outputs);
        let mut jac = jacobian.to_vec();
        for (l, row) in jac.chunks_mut(d).enumerate() {
            for (g, sx) in row.iter_mut().zip(&self.x_std) {
                *g *= self.y_std[l] / sx;
            }
        }
        Ok((y, jac))
    }

    pub fn invert_outputs(&self, outputs: &[f64]) -> Vec<f64> {
        outputs
            .iter()
            .zip(self.y_mean.iter().zip(&self.y_std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    /// In-place inverse of the label map on an n×K batch of outputs.
    pub fn invert_output_batch(&self, outputs: &mut Array2<f64>) {
        for mut row in outputs.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.y_mean).zip(&self.y_std) {
                *v = *v * s + m;
            }
        }
    }
}
