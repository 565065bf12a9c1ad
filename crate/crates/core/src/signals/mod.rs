//! Sampled signals, transforms, excitation design and segmentation.

mod dft;
mod multisine;
mod spectrum;
mod window;

use std::fmt::Write as _;
use std::path::Path;

pub use dft::{bin_frequencies, dft, dft_one_sided, idft, idft_complex, n_one_sided_bins};
pub use multisine::{generate_multisine, multisine_with_phases, MultisineSpec};
pub use spectrum::SpectrumSet;
pub use window::{apply_window, segment, WindowFunction, WindowKind};

use crate::error::{FrfError, Result};
use crate::scalar::Real;

/// Multichannel real signal sampled every `ts` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    data: Vec<Vec<T>>,
    ts: T,
    channel_names: Vec<String>,
}

impl<T: Real> TimeSeries<T> {
    /// Builds a series from per-channel sample vectors.
    pub fn new(data: Vec<Vec<T>>, ts: T, channel_names: Vec<String>) -> Result<Self> {
        if data.is_empty() || data[0].is_empty() {
            return Err(FrfError::Empty);
        }
        if !(ts > T::zero()) || !ts.is_finite() {
            return Err(FrfError::InvalidArgument(format!("sampling period must be > 0, got {ts}")));
        }
        let n = data[0].len();
        if data.iter().any(|c| c.len() != n) {
            return Err(FrfError::Dimension("channels differ in length".into()));
        }
        if channel_names.len() != data.len() {
            return Err(FrfError::Dimension(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                data.len()
            )));
        }
        for ch in &data {
            if let Some(index) = ch.iter().position(|v| !v.is_finite()) {
                return Err(FrfError::NonFinite { index });
            }
        }
        Ok(Self { data, ts, channel_names })
    }

    /// Builds a series with default channel names `prefix0`, `prefix1`, ...
    pub fn with_prefix(data: Vec<Vec<T>>, ts: T, prefix: &str) -> Result<Self> {
        let names = (0..data.len()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(data, ts, names)
    }

    pub fn zeros(n_channels: usize, len: usize, ts: T, prefix: &str) -> Result<Self> {
        Self::with_prefix(vec![vec![T::zero(); len]; n_channels], ts, prefix)
    }

    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn ts(&self) -> T {
        self.ts
    }

    pub fn channel(&self, i: usize) -> &[T] {
        &self.data[i]
    }

    pub fn channels(&self) -> &[Vec<T>] {
        &self.data
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    /// Sample `n` of every channel.
    pub fn sample(&self, n: usize) -> Vec<T> {
        self.data.iter().map(|c| c[n]).collect()
    }

    /// Keeps the listed channels, in the listed order.
    pub fn select(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&bad) = channels.iter().find(|&&c| c >= self.n_channels()) {
            return Err(FrfError::Dimension(format!("channel {bad} out of range")));
        }
        Ok(Self {
            data: channels.iter().map(|&c| self.data[c].clone()).collect(),
            ts: self.ts,
            channel_names: channels.iter().map(|&c| self.channel_names[c].clone()).collect(),
        })
    }

    /// Samples `start..start + len` of every channel.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.len() {
            return Err(FrfError::InvalidArgument(format!("slice {start}..{} outside 0..{}", start + len, self.len())));
        }
        Ok(Self {
            data: self.data.iter().map(|c| c[start..start + len].to_vec()).collect(),
            ts: self.ts,
            channel_names: self.channel_names.clone(),
        })
    }

    /// Appends the channels of `other` after the channels of `self`.
    pub fn stack(&self, other: &Self) -> Result<Self> {
        if other.len() != self.len() || other.ts != self.ts {
            return Err(FrfError::Dimension("stacked series must share length and ts".into()));
        }
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        let mut names = self.channel_names.clone();
        names.extend(other.channel_names.iter().cloned());
        Ok(Self { data, ts: self.ts, channel_names: names })
    }

    /// Renders the series as CSV: `time` column then one column per channel.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("time");
        for name in &self.channel_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        let ts = self.ts.as_f64();
        for n in 0..self.len() {
            write!(out, "{}", n as f64 * ts).unwrap();
            for ch in &self.data {
                write!(out, ",{}", ch[n].as_f64()).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| FrfError::io(path, e))
    }

    /// Parses the CSV layout written by [`TimeSeries::to_csv_string`].
    ///
    /// The sampling period is taken from the first two time stamps.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(FrfError::Empty)?;
        let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        if names.is_empty() {
            return Err(FrfError::Parse("CSV header has no channel columns".into()));
        }
        let mut time = Vec::new();
        let mut data = vec![Vec::new(); names.len()];
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() + 1 {
                return Err(FrfError::Parse(format!(
                    "row {} has {} fields, expected {}",
                    row + 1,
                    fields.len(),
                    names.len() + 1
                )));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| FrfError::Parse(format!("row {}: {e}", row + 1)));
            time.push(parse(fields[0])?);
            for (c, f) in fields[1..].iter().enumerate() {
                data[c].push(T::lit(parse(f)?));
            }
        }
        if time.len() < 2 {
            return Err(FrfError::Parse("need at least two rows to infer the sampling period".into()));
        }
        let ts = T::lit(time[1] - time[0]);
        Self::new(data, ts, names)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FrfError::io(path, e))?;
        Self::from_csv_str(&text)
    }
}
