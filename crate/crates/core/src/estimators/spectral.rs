use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use super::{check_pair, BinDefect, EstimatorTag, FrfEstimate, DEFAULT_DIVISION_FLOOR};
use crate::error::Result;
use crate::scalar::{cnan, Real};
use crate::signals::{SpectrumSet, WindowKind};

/// Window-averaged cross and auto power spectra, one matrix per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectra<T: Real> {
    pub phi_yu: Vec<DMatrix<Complex<T>>>,
    pub phi_uu: Vec<DMatrix<Complex<T>>>,
    pub phi_yy: Vec<DMatrix<Complex<T>>>,
    pub m_windows: usize,
    pub bin_frequencies: Vec<T>,
    pub window: WindowKind,
}

fn column<T: Real>(s: &SpectrumSet<T>, m: usize, k: usize) -> DVector<Complex<T>> {
    DVector::from_iterator(s.n_channels(), (0..s.n_channels()).map(|c| s.get(m, c, k)))
}

/// `Phi_yu = (1/M) sum_m Y_m U_m^H`, likewise `Phi_uu` and `Phi_yy`.
///
/// Windowing is whatever the spectrum sets were built with.
pub fn power_spectra<T: Real>(u: &SpectrumSet<T>, y: &SpectrumSet<T>) -> Result<PowerSpectra<T>> {
    check_pair(u, y)?;
    let (nu, ny) = (u.n_channels(), y.n_channels());
    let m_windows = u.n_windows();
    let inv_m = T::one() / T::from_usize_lossy(m_windows);
    let zero = Complex::new(T::zero(), T::zero());
    let mut phi_yu = Vec::with_capacity(u.n_bins());
    let mut phi_uu = Vec::with_capacity(u.n_bins());
    let mut phi_yy = Vec::with_capacity(u.n_bins());
    for k in 0..u.n_bins() {
        let mut yu = DMatrix::from_element(ny, nu, zero);
        let mut uu = DMatrix::from_element(nu, nu, zero);
        let mut yy = DMatrix::from_element(ny, ny, zero);
        for m in 0..m_windows {
            let uc = column(u, m, k);
            let yc = column(y, m, k);
            let uh = uc.adjoint();
            yu += &yc * &uh;
            uu += &uc * &uh;
            yy += &yc * yc.adjoint();
        }
        phi_yu.push(yu.map(|z| z.scale(inv_m)));
        phi_uu.push(uu.map(|z| z.scale(inv_m)));
        phi_yy.push(yy.map(|z| z.scale(inv_m)));
    }
    Ok(PowerSpectra {
        phi_yu,
        phi_uu,
        phi_yy,
        m_windows,
        bin_frequencies: u.bin_frequencies().to_vec(),
        window: u.window(),
    })
}

/// Largest-to-smallest singular value ratio of a small matrix.
pub(crate) fn condition_number<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    let min = sv.iter().fold(T::max_value().unwrap_or(max), |a, &b| a.min(b));
    if min > T::zero() {
        max / min
    } else {
        T::max_value().unwrap_or(max)
    }
}

/// Inverse of the input auto spectrum at a bin, or `None` when it carries no
/// usable excitation.
fn invert_phi_uu<T: Real>(phi: &DMatrix<Complex<T>>, power_floor: T) -> Option<DMatrix<Complex<T>>> {
    let trace = (0..phi.nrows()).fold(T::zero(), |a, i| a + phi[(i, i)].re);
    if !(trace > power_floor) {
        return None;
    }
    if phi.nrows() > 1 && condition_number(phi) > T::one() / T::lit(DEFAULT_DIVISION_FLOOR) {
        return None;
    }
    phi.clone().try_inverse()
}

fn power_floor<T: Real>(ps: &PowerSpectra<T>) -> T {
    let floor = T::lit(DEFAULT_DIVISION_FLOOR);
    let max_trace = ps
        .phi_uu
        .iter()
        .map(|p| (0..p.nrows()).fold(T::zero(), |a, i| a + p[(i, i)].re))
        .fold(T::zero(), |a, b| a.max(b));
    floor * floor * max_trace
}

/// Noise covariance `M/(M - n_u) (Phi_yy - Phi_yu Phi_uu^{-1} Phi_yu^H)` per bin.
///
/// `None` when `M <= n_u`; individual bins are `None` where `Phi_uu` is singular.
pub fn noise_covariance<T: Real>(ps: &PowerSpectra<T>) -> Option<Vec<Option<DMatrix<Complex<T>>>>> {
    let nu = ps.phi_uu.first()?.nrows();
    if ps.m_windows <= nu {
        return None;
    }
    let floor = power_floor(ps);
    let factor = T::from_usize_lossy(ps.m_windows) / T::from_usize_lossy(ps.m_windows - nu);
    Some(
        ps.phi_uu
            .iter()
            .zip(&ps.phi_yu)
            .zip(&ps.phi_yy)
            .map(|((uu, yu), yy)| {
                let inv = invert_phi_uu(uu, floor)?;
                let resid = yy - yu * inv * yu.adjoint();
                Some(resid.map(|z| z.scale(factor)))
            })
            .collect(),
    )
}

/// Spectral analysis estimate `G = Phi_yu Phi_uu^{-1}`.
///
/// When `M > n_u` each entry carries the variance
/// `[Phi_uu^{-1}]_jj [sigma_v^2]_ii / M` built from [`noise_covariance`].
pub fn spectral_analysis<T: Real>(ps: &PowerSpectra<T>) -> Result<FrfEstimate<T>> {
    let ny = ps.phi_yu.first().map_or(0, |m| m.nrows());
    let nu = ps.phi_uu.first().map_or(0, |m| m.nrows());
    let floor = power_floor(ps);
    let noise = noise_covariance(ps);
    let inv_m = T::one() / T::from_usize_lossy(ps.m_windows);
    let nan = T::lit(f64::NAN);
    let mut defects = Vec::new();
    let mut g = Vec::with_capacity(ps.phi_uu.len());
    let mut variance = noise.as_ref().map(|_| Vec::with_capacity(ps.phi_uu.len()));
    for (k, (uu, yu)) in ps.phi_uu.iter().zip(&ps.phi_yu).enumerate() {
        match invert_phi_uu(uu, floor) {
            Some(inv) => {
                g.push(yu * &inv);
                if let (Some(var), Some(noise)) = (variance.as_mut(), noise.as_ref()) {
                    let cv = noise[k].as_ref().expect("noise defined where Phi_uu is invertible");
                    var.push(DMatrix::from_fn(ny, nu, |i, j| (inv[(j, j)].re * cv[(i, i)].re * inv_m).max(T::zero())));
                }
            }
            None => {
                defects.push(BinDefect::new(k, "input auto spectrum singular"));
                g.push(DMatrix::from_element(ny, nu, cnan()));
                if let Some(var) = variance.as_mut() {
                    var.push(DMatrix::from_element(ny, nu, nan));
                }
            }
        }
    }
    let mut tag = EstimatorTag::new("spectral_analysis").note(format!("window={:?}, M={}", ps.window, ps.m_windows));
    if variance.is_none() {
        tag = tag.note("variance absent: M <= n_u");
    }
    Ok(FrfEstimate {
        g,
        variance,
        transient: None,
        bin_frequencies: ps.bin_frequencies.clone(),
        tag,
        defects,
        condition: None,
    })
}
