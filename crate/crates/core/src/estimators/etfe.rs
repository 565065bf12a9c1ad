use nalgebra::DMatrix;
use num_complex::Complex;

use super::{check_pair, BinDefect, EstimatorTag, FrfEstimate};
use crate::error::{FrfError, Result};
use crate::scalar::{cabs, cnan, Real};
use crate::signals::SpectrumSet;

/// Relative magnitude below which a divisor counts as zero: `|U| < 1e-12 max_k |U|`.
pub const DEFAULT_DIVISION_FLOOR: f64 = 1e-12;

fn check_siso<T: Real>(u: &SpectrumSet<T>, y: &SpectrumSet<T>) -> Result<()> {
    check_pair(u, y)?;
    if u.n_channels() != 1 || y.n_channels() != 1 {
        return Err(FrfError::Dimension("ETFE needs one input and one output channel".into()));
    }
    Ok(())
}

fn peak<T: Real>(x: &[Complex<T>]) -> T {
    x.iter().map(|&z| cabs(z)).fold(T::zero(), |a, b| a.max(b))
}

fn scalar_estimate<T: Real>(
    values: Vec<Complex<T>>,
    u: &SpectrumSet<T>,
    defects: Vec<BinDefect>,
    tag: EstimatorTag,
) -> FrfEstimate<T> {
    FrfEstimate {
        g: values.into_iter().map(|z| DMatrix::from_element(1, 1, z)).collect(),
        variance: None,
        transient: None,
        bin_frequencies: u.bin_frequencies().to_vec(),
        tag,
        defects,
        condition: None,
    }
}

/// Averaged empirical transfer function estimate `(1/M) sum_m Y_m / U_m`.
pub fn etfe<T: Real>(u: &SpectrumSet<T>, y: &SpectrumSet<T>) -> Result<FrfEstimate<T>> {
    etfe_with_floor(u, y, T::lit(DEFAULT_DIVISION_FLOOR))
}

/// [`etfe`] with an explicit relative division floor.
///
/// Windows whose `|U_m(k)|` falls below `floor * max_k |U_m(k)|` are left out
/// of the average at bin `k`; a bin with no usable window is a defect.
pub fn etfe_with_floor<T: Real>(u: &SpectrumSet<T>, y: &SpectrumSet<T>, floor: T) -> Result<FrfEstimate<T>> {
    check_siso(u, y)?;
    let thresholds: Vec<T> = (0..u.n_windows()).map(|m| floor * peak(u.channel(m, 0))).collect();
    let mut defects = Vec::new();
    let mut skipped = 0usize;
    let values = (0..u.n_bins())
        .map(|k| {
            let mut sum = Complex::new(T::zero(), T::zero());
            let mut used = 0usize;
            for (m, &thr) in thresholds.iter().enumerate() {
                let uk = u.get(m, 0, k);
                if cabs(uk) > thr && cabs(uk) > T::zero() {
                    sum += y.get(m, 0, k) / uk;
                    used += 1;
                }
            }
            skipped += u.n_windows() - used;
            if used == 0 {
                defects.push(BinDefect::new(k, "input below division floor in every window"));
                cnan()
            } else {
                sum.unscale(T::from_usize_lossy(used))
            }
        })
        .collect();
    let mut tag = EstimatorTag::new("etfe");
    if skipped > 0 {
        tag = tag.note(format!("{skipped} window-bin divisions skipped below the floor"));
    }
    Ok(scalar_estimate(values, u, defects, tag))
}

/// `Y_avg / U_avg` with both spectra averaged over windows first.
///
/// Kept to demonstrate why averaging before division fails for random-phase
/// windows: `U_avg` shrinks towards zero as the window count grows.
pub fn average_then_divide<T: Real>(u: &SpectrumSet<T>, y: &SpectrumSet<T>) -> Result<FrfEstimate<T>> {
    check_siso(u, y)?;
    let m = T::from_usize_lossy(u.n_windows());
    let avg = |s: &SpectrumSet<T>| -> Vec<Complex<T>> {
        (0..s.n_bins())
            .map(|k| (0..s.n_windows()).fold(Complex::new(T::zero(), T::zero()), |a, w| a + s.get(w, 0, k)).unscale(m))
            .collect()
    };
    let (ua, ya) = (avg(u), avg(y));
    let thr = T::lit(DEFAULT_DIVISION_FLOOR) * peak(&ua);
    let mut defects = Vec::new();
    let values = ua
        .iter()
        .zip(&ya)
        .enumerate()
        .map(|(k, (&uk, &yk))| {
            if cabs(uk) > thr && cabs(uk) > T::zero() {
                yk / uk
            } else {
                defects.push(BinDefect::new(k, "averaged input below division floor"));
                cnan()
            }
        })
        .collect();
    let tag = EstimatorTag::new("average_then_divide")
        .note("averages U and Y before dividing; unreliable for random-phase windows");
    Ok(scalar_estimate(values, u, defects, tag))
}
