//! Training datasets: J labelled samples stored column-major by role.

use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::fileio::{fmt_f64, parse_f64, write_atomic};
use crate::problems::{LabeledSample, ProblemSpec};
use crate::sampling::RngState;

/// `inputs` is J×d, `labels` J×K and `grads` J×(K·d) with column k·d + i
/// holding ∂ŷ_k/∂θ̂_i.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub labels: Array2<f64>,
    pub grads: Array2<f64>,
}

impl Dataset {
    /// Draws `size` samples from `rng`; sample j consumes the draws after
    /// sample j−1, so the result is a pure function of the stream.
    pub fn generate(problem: &ProblemSpec, size: usize, rng: &mut RngState) -> Result<Self> {
        let samples = (0..size)
            .map(|_| problem.draw_sample(rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(problem.input_dim(), problem.output_dim(), &samples)
    }

    pub fn from_samples(d: usize, k: usize, samples: &[LabeledSample]) -> Result<Self> {
        let j = samples.len();
        let mut inputs = Array2::zeros((j, d));
        let mut labels = Array2::zeros((j, k));
        let mut grads = Array2::zeros((j, k * d));
        for (row, s) in samples.iter().enumerate() {
            check_len("sample inputs", d, s.inputs.len())?;
            check_len("sample labels", k, s.labels.len())?;
            check_len("sample grads", k * d, s.grads.len())?;
            inputs.row_mut(row).assign(&ArrayView1::from(&s.inputs));
            labels.row_mut(row).assign(&ArrayView1::from(&s.labels));
            grads.row_mut(row).assign(&ArrayView1::from(&s.grads));
        }
        Ok(Self { inputs, labels, grads })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.labels.ncols()
    }

    pub fn sample(&self, j: usize) -> LabeledSample {
        LabeledSample {
            inputs: self.inputs.row(j).to_vec(),
            labels: self.labels.row(j).to_vec(),
            grads: self.grads.row(j).to_vec(),
        }
    }

    pub fn header(d: usize, k: usize) -> String {
        let mut cols: Vec<String> = (0..d).map(|i| format!("in_{i}")).collect();
        cols.extend((0..k).map(|l| format!("y_{l}")));
        for l in 0..k {
            cols.extend((0..d).map(|i| format!("g_{l}_{i}")));
        }
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let (d, k) = (self.input_dim(), self.output_dim());
        let mut out = Self::header(d, k);
        out.push('\n');
        for j in 0..self.len() {
            let row: Vec<String> = self
                .inputs
                .row(j)
                .iter()
                .chain(self.labels.row(j).iter())
                .chain(self.grads.row(j).iter())
                .map(|&v| fmt_f64(v))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the CSV layout written by [`Dataset::to_csv`]; d and K are read
    /// from the header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Format {
            line: 1,
            message: "empty dataset file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let d = cols.iter().filter(|c| c.starts_with("in_")).count();
        let k = cols.iter().filter(|c| c.starts_with("y_")).count();
        if d == 0 || k == 0 || header.trim() != Self::header(d, k) {
            return Err(Error::Format {
                line: 1,
                message: format!("unexpected header '{header}'"),
            });
        }
        let width = d + k + k * d;
        let mut samples = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|s| parse_f64(s, idx + 1))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != width {
                return Err(Error::Format {
                    line: idx + 1,
                    message: format!("expected {width} fields, got {}", vals.len()),
                });
            }
            samples.push(LabeledSample {
                inputs: vals[..d].to_vec(),
                labels: vals[d..d + k].to_vec(),
                grads: vals[d + k..].to_vec(),
            });
        }
        Self::from_samples(d, k, &samples)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { context, expected, got });
    }
    Ok(())
}
