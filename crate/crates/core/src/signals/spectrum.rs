use num_complex::Complex;
use rayon::prelude::*;

use super::{bin_frequencies, dft_one_sided, segment, TimeSeries, WindowFunction, WindowKind};
use crate::error::{FrfError, Result};
use crate::scalar::Real;

/// One-sided DFTs of every window and channel, indexed `[window][channel][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSet<T> {
    data: Vec<Vec<Vec<Complex<T>>>>,
    bin_frequencies: Vec<T>,
    window_length: usize,
    window: WindowKind,
}

impl<T: Real> SpectrumSet<T> {
    /// Wraps precomputed spectra. Bins must match `window_length / 2 + 1`.
    pub fn from_raw(
        data: Vec<Vec<Vec<Complex<T>>>>,
        bin_frequencies: Vec<T>,
        window_length: usize,
        window: WindowKind,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(FrfError::InvalidArgument("spectrum set needs at least one window".into()));
        }
        let n_ch = data[0].len();
        if n_ch == 0 {
            return Err(FrfError::InvalidArgument("spectrum set needs at least one channel".into()));
        }
        let n_bins = bin_frequencies.len();
        if n_bins != window_length / 2 + 1 {
            return Err(FrfError::Dimension(format!("{n_bins} bins for window length {window_length}")));
        }
        if data.iter().any(|w| w.len() != n_ch || w.iter().any(|c| c.len() != n_bins)) {
            return Err(FrfError::Dimension("ragged spectrum set".into()));
        }
        if bin_frequencies.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(FrfError::InvalidArgument("bin frequencies must increase strictly".into()));
        }
        Ok(Self { data, bin_frequencies, window_length, window })
    }

    /// Windows the segments and transforms each channel.
    ///
    /// Non-rectangular windows are divided by their RMS so that white noise
    /// keeps its power per bin.
    pub fn from_segments(segments: &[TimeSeries<T>], kind: WindowKind) -> Result<Self> {
        let first = segments.first().ok_or(FrfError::Empty)?;
        let n = first.len();
        if segments.iter().any(|s| s.len() != n || s.n_channels() != first.n_channels()) {
            return Err(FrfError::Dimension("segments differ in shape".into()));
        }
        let taper: Option<Vec<T>> = match kind {
            WindowKind::Rectangular => None,
            _ => {
                let w = WindowFunction::new(kind, n)?;
                let norm = T::one() / w.rms::<T>();
                Some(w.values::<T>().into_iter().map(|v| v * norm).collect())
            }
        };
        let data = segments
            .par_iter()
            .map(|seg| {
                seg.channels()
                    .iter()
                    .map(|ch| match &taper {
                        None => dft_one_sided(ch),
                        Some(w) => {
                            let tapered: Vec<T> = ch.iter().zip(w).map(|(&a, &b)| a * b).collect();
                            dft_one_sided(&tapered)
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_raw(data, bin_frequencies(n, first.ts()), n, kind)
    }

    /// Segments `x` and transforms every window, see [`segment`].
    pub fn from_series(
        x: &TimeSeries<T>,
        window_length: usize,
        overlap_fraction: f64,
        kind: WindowKind,
    ) -> Result<Self> {
        Self::from_segments(&segment(x, window_length, overlap_fraction)?, kind)
    }

    pub fn n_windows(&self) -> usize {
        self.data.len()
    }

    pub fn n_channels(&self) -> usize {
        self.data[0].len()
    }

    pub fn n_bins(&self) -> usize {
        self.bin_frequencies.len()
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    pub fn bin_frequencies(&self) -> &[T] {
        &self.bin_frequencies
    }

    #[inline]
    pub fn get(&self, window: usize, channel: usize, bin: usize) -> Complex<T> {
        self.data[window][channel][bin]
    }

    /// Spectrum of one channel in one window.
    pub fn channel(&self, window: usize, channel: usize) -> &[Complex<T>] {
        &self.data[window][channel]
    }

    pub fn select_channels(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&bad) = channels.iter().find(|&&c| c >= self.n_channels()) {
            return Err(FrfError::Dimension(format!("channel {bad} out of range")));
        }
        let data = self.data.iter().map(|w| channels.iter().map(|&c| w[c].clone()).collect()).collect();
        Self::from_raw(data, self.bin_frequencies.clone(), self.window_length, self.window)
    }

    /// Concatenates the channels of several sets computed on the same windows.
    pub fn stack(parts: &[&Self]) -> Result<Self> {
        let first = parts.first().ok_or(FrfError::Empty)?;
        if parts.iter().any(|p| {
            p.n_windows() != first.n_windows()
                || p.window_length != first.window_length
                || p.bin_frequencies != first.bin_frequencies
        }) {
            return Err(FrfError::Dimension("stacked spectra must share windows and bins".into()));
        }
        let data =
            (0..first.n_windows()).map(|m| parts.iter().flat_map(|p| p.data[m].iter().cloned()).collect()).collect();
        Self::from_raw(data, first.bin_frequencies.clone(), first.window_length, first.window)
    }
}
