use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{FrfError, Result};
use crate::scalar::{cis, Real};

/// Random-phase multisine on a harmonic grid of `period_samples`.
///
/// Bin `k` contributes `amplitude * cos(2 pi k n / period + phase_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultisineSpec<T> {
    pub period_samples: usize,
    pub excited_bins: Vec<usize>,
    pub amplitude_per_bin: Vec<T>,
    pub phase_seed: u64,
    pub n_periods: usize,
}

impl<T: Real> MultisineSpec<T> {
    /// Equal amplitudes on `excited_bins`, scaled to a time-domain RMS of `rms`.
    pub fn flat(
        period_samples: usize,
        excited_bins: Vec<usize>,
        rms: T,
        phase_seed: u64,
        n_periods: usize,
    ) -> Result<Self> {
        if excited_bins.is_empty() {
            return Err(FrfError::InvalidArgument("no excited bins".into()));
        }
        let amp = rms * (T::lit(2.0) / T::from_usize_lossy(excited_bins.len())).sqrt();
        let spec = Self {
            period_samples,
            amplitude_per_bin: vec![amp; excited_bins.len()],
            excited_bins,
            phase_seed,
            n_periods,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Flat multisine exciting every bin `1..=period/2 - 1`.
    pub fn full_grid(period_samples: usize, rms: T, phase_seed: u64, n_periods: usize) -> Result<Self> {
        if period_samples < 4 {
            return Err(FrfError::InvalidArgument("period must be >= 4 samples".into()));
        }
        Self::flat(period_samples, (1..period_samples / 2).collect(), rms, phase_seed, n_periods)
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_samples < 4 {
            return Err(FrfError::InvalidArgument("period must be >= 4 samples".into()));
        }
        if self.n_periods == 0 {
            return Err(FrfError::InvalidArgument("n_periods must be >= 1".into()));
        }
        if self.excited_bins.len() != self.amplitude_per_bin.len() {
            return Err(FrfError::Dimension("one amplitude per excited bin required".into()));
        }
        let max = self.period_samples / 2 - 1;
        let mut seen = vec![false; max + 1];
        for &bin in &self.excited_bins {
            if bin == 0 || bin > max {
                return Err(FrfError::BinOutOfRange { bin, max });
            }
            if std::mem::replace(&mut seen[bin], true) {
                return Err(FrfError::InvalidArgument(format!("bin {bin} listed twice")));
            }
        }
        if let Some(a) = self.amplitude_per_bin.iter().find(|a| !(**a > T::zero()) || !a.is_finite()) {
            return Err(FrfError::InvalidArgument(format!("amplitudes must be > 0, got {a}")));
        }
        Ok(())
    }

    /// Phases drawn uniformly on `[0, 2 pi)` from `phase_seed`, one per excited bin.
    pub fn phases(&self) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.phase_seed);
        let two_pi = std::f64::consts::TAU;
        self.excited_bins.iter().map(|_| T::lit(rng.random::<f64>() * two_pi)).collect()
    }
}

/// Generates the multisine described by `spec`, sampled every `ts` seconds.
pub fn generate_multisine<T: Real>(spec: &MultisineSpec<T>, ts: T) -> Result<TimeSeries<T>> {
    spec.validate()?;
    multisine_with_phases(
        spec.period_samples,
        &spec.excited_bins,
        &spec.amplitude_per_bin,
        &spec.phases(),
        spec.n_periods,
        ts,
    )
}

/// Multisine with explicit phases; one period is synthesised by inverse FFT
/// and repeated `n_periods` times.
pub fn multisine_with_phases<T: Real>(
    period_samples: usize,
    bins: &[usize],
    amplitudes: &[T],
    phases: &[T],
    n_periods: usize,
    ts: T,
) -> Result<TimeSeries<T>> {
    if bins.len() != amplitudes.len() || bins.len() != phases.len() {
        return Err(FrfError::Dimension("bins, amplitudes and phases differ in length".into()));
    }
    if period_samples < 4 || n_periods == 0 {
        return Err(FrfError::InvalidArgument("need period >= 4 and n_periods >= 1".into()));
    }
    let max = period_samples / 2 - 1;
    let mut spectrum = vec![Complex::new(T::zero(), T::zero()); period_samples];
    let half = T::lit(0.5);
    for ((&k, &a), &ph) in bins.iter().zip(amplitudes).zip(phases) {
        if k == 0 || k > max {
            return Err(FrfError::BinOutOfRange { bin: k, max });
        }
        let c = cis(ph).scale(a * half);
        spectrum[k] = c;
        spectrum[period_samples - k] = c.conj();
    }
    FftPlanner::new().plan_fft_inverse(period_samples).process(&mut spectrum);
    let one_period: Vec<T> = spectrum.iter().map(|z| z.re).collect();
    let mut data = Vec::with_capacity(period_samples * n_periods);
    for _ in 0..n_periods {
        data.extend_from_slice(&one_period);
    }
    TimeSeries::new(vec![data], ts, vec!["d".into()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::dft;

    #[test]
    fn two_period_geometry_sample_count() {
        let spec = MultisineSpec::<f64>::full_grid(5000, 1.0, 11, 2).unwrap();
        let x = generate_multisine(&spec, 1e-3).unwrap();
        assert_eq!(x.len(), 10000);
        assert_eq!(x.ts(), 1e-3);
    }

    #[test]
    fn single_bin_phase_zero_is_cosine() {
        let x = multisine_with_phases(64, &[5], &[1.0f64], &[0.0], 1, 1.0).unwrap();
        for (n, v) in x.channel(0).iter().enumerate() {
            let expect = (2.0 * std::f64::consts::PI * 5.0 * n as f64 / 64.0).cos();
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn full_grid_spectrum_support() {
        let spec = MultisineSpec::<f64>::full_grid(5000, 1.0, 5, 1).unwrap();
        let x = generate_multisine(&spec, 1e-3).unwrap();
        let s = dft(x.channel(0)).unwrap();
        assert!(s[0].norm() < 1e-12);
        assert!(s[2500].norm() < 1e-12);
        for k in 1..2500 {
            assert!(s[k].norm() > 1e-3);
        }
    }

    #[test]
    fn sparse_grid_zero_off_grid() {
        let bins = vec![3, 7, 20];
        let spec = MultisineSpec::<f64>::flat(128, bins.clone(), 2.0, 9, 1).unwrap();
        let x = generate_multisine(&spec, 0.01).unwrap();
        let rms = (x.channel(0).iter().map(|v| v * v).sum::<f64>() / 128.0).sqrt();
        assert!((rms - 2.0).abs() < 1e-12);
        let s = dft(x.channel(0)).unwrap();
        for k in 0..=64 {
            let excited = bins.contains(&k);
            assert_eq!(s[k].norm() > 1e-9, excited, "bin {k}");
        }
    }

    #[test]
    fn periodic_and_deterministic() {
        let spec = MultisineSpec::<f64>::full_grid(100, 1.0, 42, 3).unwrap();
        let a = generate_multisine(&spec, 0.1).unwrap();
        let b = generate_multisine(&spec, 0.1).unwrap();
        assert_eq!(a, b);
        let x = a.channel(0);
        for n in 0..200 {
            assert_eq!(x[n].to_bits(), x[n + 100].to_bits());
        }
        let other = MultisineSpec { phase_seed: 43, ..spec };
        assert_ne!(generate_multisine(&other, 0.1).unwrap(), a);
    }

    #[test]
    fn phases_uniform_range() {
        let spec = MultisineSpec::<f64>::full_grid(4000, 1.0, 1, 1).unwrap();
        let ph = spec.phases();
        assert!(ph.iter().all(|&p| (0.0..std::f64::consts::TAU).contains(&p)));
        let mean = ph.iter().sum::<f64>() / ph.len() as f64;
        assert!((mean - std::f64::consts::PI).abs() < 0.15);
    }

    #[test]
    fn rejects_invalid_bins() {
        assert!(matches!(
            MultisineSpec::<f64>::flat(100, vec![50], 1.0, 0, 1),
            Err(FrfError::BinOutOfRange { bin: 50, max: 49 })
        ));
        assert!(MultisineSpec::<f64>::flat(100, vec![0], 1.0, 0, 1).is_err());
        let mut spec = MultisineSpec::<f64>::flat(100, vec![3], 1.0, 0, 1).unwrap();
        spec.amplitude_per_bin[0] = -1.0;
        assert!(generate_multisine(&spec, 1.0).is_err());
    }
}
