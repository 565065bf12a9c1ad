use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{FrfError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    Hann,
}

/// Tapering window of a fixed length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowFunction {
    kind: WindowKind,
    length: usize,
}

impl WindowFunction {
    pub fn new(kind: WindowKind, length: usize) -> Result<Self> {
        if length < 2 {
            return Err(FrfError::InvalidArgument(format!("window length must be >= 2, got {length}")));
        }
        Ok(Self { kind, length })
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Window samples. Hann is the periodic form `0.5 (1 - cos(2 pi n / N))`.
    pub fn values<T: Real>(&self) -> Vec<T> {
        match self.kind {
            WindowKind::Rectangular => vec![T::one(); self.length],
            WindowKind::Hann => {
                let n = T::from_usize_lossy(self.length);
                let half = T::lit(0.5);
                (0..self.length).map(|i| half * (T::one() - (T::two_pi() * T::from_usize_lossy(i) / n).cos())).collect()
            }
        }
    }

    /// `sqrt(mean(w^2))`; dividing by it keeps white-noise power unchanged.
    pub fn rms<T: Real>(&self) -> T {
        let w = self.values::<T>();
        let sum: T = w.iter().fold(T::zero(), |acc, &v| acc + v * v);
        (sum / T::from_usize_lossy(self.length)).sqrt()
    }
}

/// Pointwise product of `x` with the window.
pub fn apply_window<T: Real>(x: &[T], w: &WindowFunction) -> Result<Vec<T>> {
    if x.len() != w.len() {
        return Err(FrfError::Dimension(format!("signal length {} does not match window length {}", x.len(), w.len())));
    }
    if w.kind == WindowKind::Rectangular {
        return Ok(x.to_vec());
    }
    Ok(x.iter().zip(w.values::<T>()).map(|(&a, b)| a * b).collect())
}

/// Splits `x` into full windows of `window_length` samples.
///
/// The stride is `round(window_length * (1 - overlap_fraction))` samples and a
/// trailing partial window is dropped.
pub fn segment<T: Real>(x: &TimeSeries<T>, window_length: usize, overlap_fraction: f64) -> Result<Vec<TimeSeries<T>>> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(FrfError::InvalidArgument(format!("overlap fraction must be in [0, 1), got {overlap_fraction}")));
    }
    if window_length == 0 {
        return Err(FrfError::InvalidArgument("window length must be >= 1".into()));
    }
    if window_length > x.len() {
        return Err(FrfError::WindowTooLong { window: window_length, len: x.len() });
    }
    let stride = ((window_length as f64 * (1.0 - overlap_fraction)).round() as usize).max(1);
    let count = (x.len() - window_length) / stride + 1;
    (0..count).map(|m| x.slice(m * stride, window_length)).collect()
}
