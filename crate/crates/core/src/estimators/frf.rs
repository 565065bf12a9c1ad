use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::scalar::Real;

/// Provenance of an estimate: estimator name plus free-form notes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorTag {
    pub name: String,
    pub notes: Vec<String>,
}

impl EstimatorTag {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), notes: Vec::new() }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// A bin where the estimator could not produce a value; its entries are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDefect {
    pub bin: usize,
    pub reason: String,
}

impl BinDefect {
    pub fn new(bin: usize, reason: impl Into<String>) -> Self {
        Self { bin, reason: reason.into() }
    }
}

/// Per-bin FRF matrix (`n_y x n_u`) with optional variance and transient.
#[derive(Debug, Clone, PartialEq)]
pub struct FrfEstimate<T: Real> {
    pub g: Vec<DMatrix<Complex<T>>>,
    pub variance: Option<Vec<DMatrix<T>>>,
    pub transient: Option<Vec<DVector<Complex<T>>>>,
    /// rad/s
    pub bin_frequencies: Vec<T>,
    pub tag: EstimatorTag,
    pub defects: Vec<BinDefect>,
    /// Condition number of the matrix inverted at each bin, when one was.
    pub condition: Option<Vec<T>>,
}

impl<T: Real> FrfEstimate<T> {
    pub fn n_bins(&self) -> usize {
        self.g.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.g.first().map_or(0, |m| m.nrows())
    }

    pub fn n_inputs(&self) -> usize {
        self.g.first().map_or(0, |m| m.ncols())
    }

    pub fn is_defect(&self, bin: usize) -> bool {
        self.defects.iter().any(|d| d.bin == bin)
    }

    /// Values of entry `(i, j)` across bins.
    pub fn entry(&self, i: usize, j: usize) -> Vec<Complex<T>> {
        self.g.iter().map(|m| m[(i, j)]).collect()
    }

    pub fn entry_variance(&self, i: usize, j: usize) -> Option<Vec<T>> {
        self.variance.as_ref().map(|v| v.iter().map(|m| m[(i, j)]).collect())
    }

    /// 1x1 estimate holding entry `(i, j)`.
    pub fn select(&self, i: usize, j: usize) -> Self {
        Self {
            g: self.g.iter().map(|m| DMatrix::from_element(1, 1, m[(i, j)])).collect(),
            variance: self
                .variance
                .as_ref()
                .map(|v| v.iter().map(|m| DMatrix::from_element(1, 1, m[(i, j)])).collect()),
            transient: self.transient.as_ref().map(|t| t.iter().map(|v| DVector::from_element(1, v[i])).collect()),
            bin_frequencies: self.bin_frequencies.clone(),
            tag: self.tag.clone(),
            defects: self.defects.clone(),
            condition: self.condition.clone(),
        }
    }

    pub(crate) fn sort_defects(&mut self) {
        self.defects.sort_by(|a, b| a.bin.cmp(&b.bin).then_with(|| a.reason.cmp(&b.reason)));
        self.defects.dedup();
    }

    fn frequency_hz(&self, k: usize) -> f64 {
        self.bin_frequencies[k].as_f64() / std::f64::consts::TAU
    }

    /// CSV with `frequency_hz`, then `re`, `im`, `variance` per entry,
    /// `re`/`im` per transient output and `condition` when present.
    pub fn to_csv_string(&self) -> String {
        let (ny, nu) = (self.n_outputs(), self.n_inputs());
        let mut out = String::from("frequency_hz");
        for i in 0..ny {
            for j in 0..nu {
                write!(out, ",g{}{}_re,g{}{}_im,g{}{}_variance", i + 1, j + 1, i + 1, j + 1, i + 1, j + 1).unwrap();
            }
        }
        if self.transient.is_some() {
            for i in 0..ny {
                write!(out, ",t{}_re,t{}_im", i + 1, i + 1).unwrap();
            }
        }
        if self.condition.is_some() {
            out.push_str(",condition");
        }
        out.push('\n');
        for k in 0..self.n_bins() {
            write!(out, "{}", self.frequency_hz(k)).unwrap();
            for i in 0..ny {
                for j in 0..nu {
                    let z = self.g[k][(i, j)];
                    let var = self.variance.as_ref().map_or(f64::NAN, |v| v[k][(i, j)].as_f64());
                    write!(out, ",{},{},{}", z.re.as_f64(), z.im.as_f64(), var).unwrap();
                }
            }
            if let Some(t) = &self.transient {
                for i in 0..ny {
                    write!(out, ",{},{}", t[k][i].re.as_f64(), t[k][i].im.as_f64()).unwrap();
                }
            }
            if let Some(c) = &self.condition {
                write!(out, ",{}", c[k].as_f64()).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// JSON mirror of the CSV layout plus tag and defect log; NaN becomes null.
    pub fn to_json(&self) -> Value {
        let num = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
        let (ny, nu) = (self.n_outputs(), self.n_inputs());
        let mut entries = Vec::new();
        for i in 0..ny {
            for j in 0..nu {
                entries.push(json!({
                    "output": i + 1,
                    "input": j + 1,
                    "re": self.g.iter().map(|m| num(m[(i, j)].re.as_f64())).collect::<Vec<_>>(),
                    "im": self.g.iter().map(|m| num(m[(i, j)].im.as_f64())).collect::<Vec<_>>(),
                    "variance": self.variance.as_ref().map(|v| v.iter().map(|m| num(m[(i, j)].as_f64())).collect::<Vec<_>>()),
                }));
            }
        }
        let transient = self.transient.as_ref().map(|t| {
            (0..ny)
                .map(|i| {
                    json!({
                        "output": i + 1,
                        "re": t.iter().map(|v| num(v[i].re.as_f64())).collect::<Vec<_>>(),
                        "im": t.iter().map(|v| num(v[i].im.as_f64())).collect::<Vec<_>>(),
                    })
                })
                .collect::<Vec<_>>()
        });
        json!({
            "estimator_tag": self.tag,
            "n_outputs": ny,
            "n_inputs": nu,
            "frequency_hz": (0..self.n_bins()).map(|k| num(self.frequency_hz(k))).collect::<Vec<_>>(),
            "entries": entries,
            "transient": transient,
            "condition": self.condition.as_ref().map(|c| c.iter().map(|v| num(v.as_f64())).collect::<Vec<_>>()),
            "defects": self.defects,
        })
    }
}
