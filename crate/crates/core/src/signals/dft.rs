use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{FrfError, Result};
use crate::scalar::{cabs, Real};

fn check_finite<T: Real>(x: &[T]) -> Result<()> {
    if x.is_empty() {
        return Err(FrfError::Empty);
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(FrfError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Unitary DFT, `X(k) = N^{-1/2} sum_n x(n) e^{-j 2 pi n k / N}`, over all `N` bins.
pub fn dft<T: Real>(x: &[T]) -> Result<Vec<Complex<T>>> {
    check_finite(x)?;
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let scale = T::one() / T::from_usize_lossy(x.len()).sqrt();
    for z in &mut buf {
        *z = z.scale(scale);
    }
    Ok(buf)
}

/// Number of one-sided bins kept for a real signal of length `n`.
pub fn n_one_sided_bins(n: usize) -> usize {
    n / 2 + 1
}

/// Bins `0..=N/2` of [`dft`].
pub fn dft_one_sided<T: Real>(x: &[T]) -> Result<Vec<Complex<T>>> {
    let mut full = dft(x)?;
    full.truncate(n_one_sided_bins(x.len()));
    Ok(full)
}

/// Inverse of [`dft`] for arbitrary complex spectra.
pub fn idft_complex<T: Real>(spectrum: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = spectrum.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    let scale = T::one() / T::from_usize_lossy(spectrum.len()).sqrt();
    for z in &mut buf {
        *z = z.scale(scale);
    }
    buf
}

/// Inverse of [`dft`] returning a real sequence.
///
/// The spectrum must satisfy `X(N-k) = conj(X(k))` up to `sqrt(eps) * max|X|`.
pub fn idft<T: Real>(spectrum: &[Complex<T>]) -> Result<Vec<T>> {
    let n = spectrum.len();
    if n == 0 {
        return Err(FrfError::Empty);
    }
    let peak = spectrum.iter().map(|&z| cabs(z)).fold(T::zero(), |a, b| a.max(b));
    let tol = T::eps().sqrt() * peak.max(T::lit(1e-30));
    for k in 0..n {
        let mirror = (n - k) % n;
        if cabs(spectrum[k] - spectrum[mirror].conj()) > tol {
            return Err(FrfError::NotConjugateSymmetric { bin: k });
        }
    }
    Ok(idft_complex(spectrum).into_iter().map(|z| z.re).collect())
}

/// Angular frequency in rad/s of each one-sided bin for window length `n`.
pub fn bin_frequencies<T: Real>(n: usize, ts: T) -> Vec<T> {
    let step = T::two_pi() / (T::from_usize_lossy(n) * ts);
    (0..n_one_sided_bins(n)).map(|k| T::from_usize_lossy(k) * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Direct O(N^2) evaluation of the unitary DFT sum.
    fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let s: Complex<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let ph = -2.0 * std::f64::consts::PI * (i * k % n) as f64 / n as f64;
                        Complex::new(v * ph.cos(), v * ph.sin())
                    })
                    .sum();
                s / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn zeros_and_constant() {
        assert!(dft(&[0.0f64; 8]).unwrap().iter().all(|z| z.norm() == 0.0));
        let x = dft(&[1.0f64; 4]).unwrap();
        assert!((x[0] - Complex::new(2.0, 0.0)).norm() < 1e-15);
        assert!(x[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(dft(&[1.0, f64::INFINITY]), Err(FrfError::NonFinite { index: 1 })));
        assert!(matches!(dft::<f64>(&[]), Err(FrfError::Empty)));
    }

    #[test]
    fn matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..97).map(|_| rng.sample(StandardNormal)).collect();
        let fast = dft(&x).unwrap();
        for (a, b) in fast.iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_gaussian_1024() {
        let mut rng = ChaCha8Rng::seed_from_u64(1024);
        let x: Vec<f64> = (0..1024).map(|_| rng.sample(StandardNormal)).collect();
        let time_energy: f64 = x.iter().map(|v| v * v).sum();
        let freq_energy: f64 = dft(&x).unwrap().iter().map(|z| z.norm_sqr()).sum();
        assert!(((time_energy - freq_energy) / time_energy).abs() < 1e-12);
    }

    #[test]
    fn impulse_round_trip() {
        let mut x = vec![0.0f64; 16];
        x[0] = 1.0;
        let back = idft(&dft(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_bin_gives_sinusoid() {
        let n = 100;
        let mut spec = vec![Complex::new(0.0f64, 0.0); n];
        spec[3] = Complex::new(1.0, 0.0);
        spec[n - 3] = Complex::new(1.0, 0.0);
        let x = idft(&spec).unwrap();
        for (i, v) in x.iter().enumerate() {
            let expect = 2.0 / (n as f64).sqrt() * (2.0 * std::f64::consts::PI * 3.0 * i as f64 / n as f64).cos();
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn idft_rejects_asymmetric() {
        let mut spec = vec![Complex::new(0.0f64, 0.0); 8];
        spec[1] = Complex::new(1.0, 0.0);
        assert!(matches!(idft(&spec), Err(FrfError::NotConjugateSymmetric { .. })));
    }

    #[test]
    fn random_symmetric_spectrum_round_trip() {
        let n = 256;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut spec = vec![Complex::new(0.0f64, 0.0); n];
        spec[0] = Complex::new(rng.sample(StandardNormal), 0.0);
        spec[n / 2] = Complex::new(rng.sample(StandardNormal), 0.0);
        for k in 1..n / 2 {
            let z = Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            spec[k] = z;
            spec[n - k] = z.conj();
        }
        let x = idft(&spec).unwrap();
        let back = dft(&x).unwrap();
        let err: f64 = back.iter().zip(&spec).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-12);
    }

    #[test]
    fn frequencies_of_bins() {
        let w = bin_frequencies(10, 0.5f64);
        assert_eq!(w.len(), 6);
        assert!((w[1] - 2.0 * std::f64::consts::PI / 5.0).abs() < 1e-15);
    }

    #[test]
    fn single_precision_parseval() {
        let x: Vec<f32> = (0..64).map(|i| ((i * 7 % 11) as f32) - 5.0).collect();
        let e_t: f32 = x.iter().map(|v| v * v).sum();
        let e_f: f32 = dft(&x).unwrap().iter().map(|z| z.norm_sqr()).sum();
        assert!(((e_t - e_f) / e_t).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn parseval_and_round_trip(x in prop::collection::vec(-1e3f64..1e3, 1..300)) {
            let spec = dft(&x).unwrap();
            let e_t: f64 = x.iter().map(|v| v * v).sum();
            let e_f: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((e_t - e_f).abs() <= 1e-12 * e_t.max(1e-300) + 1e-300);
            let back = idft(&spec).unwrap();
            let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }
}
