//! Closed-loop identification: direct and indirect SISO estimates and MIMO
//! full plant versus equivalent plant extraction.
//!
//! Loop convention: `u = d - K (y + v)`, so `d -> u` is the input sensitivity
//! `S = (I + K G)^{-1}` and `d -> y` is the process sensitivity `G S`.

mod dataset;
mod mimo;

pub use dataset::{ClosedLoopDataset, OpenLoopEstimator};
pub use mimo::{
    equivalent_plant, full_plant, run_mimo_experiments, true_frm, ExperimentSeeds, FrmPair, MimoPlan,
    DEFAULT_CONDITION_THRESHOLD,
};

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{FrfError, Result};
use crate::estimators::{
    power_spectra, spectral_analysis, BinDefect, EstimatorTag, FrfEstimate, DEFAULT_DIVISION_FLOOR,
};
use crate::scalar::{cabs, cnan, Real};
use crate::signals::{SpectrumSet, WindowKind};

/// Limit of the direct estimate for infinitely many windows:
/// `(G0 Phi_dd - conj(K) Phi_vv) / (Phi_dd + |K|^2 Phi_vv)`.
///
/// Tends to `G0` without noise and to `-1/K` without excitation.
pub fn direct_asymptote<T: Real>(g0: Complex<T>, k: Complex<T>, phi_dd: T, phi_vv: T) -> Complex<T> {
    (g0.scale(phi_dd) - k.conj().scale(phi_vv)) / (phi_dd + k.norm_sqr() * phi_vv)
}

/// Spectral analysis on the in-loop signals `(u, y)`.
///
/// Biased in closed loop whenever there is output noise, see
/// [`direct_asymptote`].
pub fn direct_estimate<T: Real>(
    ds: &ClosedLoopDataset<T>,
    window_length: usize,
    window: WindowKind,
) -> Result<FrfEstimate<T>> {
    let u = SpectrumSet::from_series(ds.u(), window_length, 0.0, window)?;
    let y = SpectrumSet::from_series(ds.y(), window_length, 0.0, window)?;
    let mut est = spectral_analysis(&power_spectra(&u, &y)?)?;
    est.tag = EstimatorTag::new("direct_sa")
        .note("spectral analysis on in-loop (u, y)")
        .note("biased in closed loop: tends to (G0 Phi_dd - conj(K) Phi_vv)/(Phi_dd + |K|^2 Phi_vv)");
    est.tag.notes.extend(notes_of(window, window_length));
    Ok(est)
}

fn notes_of(window: WindowKind, len: usize) -> [String; 1] {
    [format!("window={window:?}, length={len}")]
}

/// Column of `G S` and of `S` for the excited input, estimated jointly from
/// `d_j -> [y; u]` so that both share one input spectrum.
pub(crate) fn simo_columns<T: Real>(
    ds: &ClosedLoopDataset<T>,
    est: &OpenLoopEstimator,
) -> Result<(FrfEstimate<T>, FrfEstimate<T>)> {
    let d = ds.d().select(&[ds.excited_input_index()])?;
    let out = ds.y().stack(ds.u())?;
    let joint = est.estimate(&d, &out)?;
    let ny = ds.y().n_channels();
    let nu = ds.u().n_channels();
    Ok((rows(&joint, 0..ny), rows(&joint, ny..ny + nu)))
}

fn rows<T: Real>(e: &FrfEstimate<T>, r: std::ops::Range<usize>) -> FrfEstimate<T> {
    let idx: Vec<usize> = r.collect();
    FrfEstimate {
        g: e.g.iter().map(|m| m.select_rows(&idx)).collect(),
        variance: e.variance.as_ref().map(|v| v.iter().map(|m| m.select_rows(&idx)).collect()),
        transient: e.transient.as_ref().map(|t| t.iter().map(|v| v.select_rows(&idx)).collect()),
        bin_frequencies: e.bin_frequencies.clone(),
        tag: e.tag.clone(),
        defects: e.defects.clone(),
        condition: e.condition.clone(),
    }
}

fn require_siso<T: Real>(ds: &ClosedLoopDataset<T>) -> Result<()> {
    if ds.u().n_channels() != 1 || ds.y().n_channels() != 1 {
        return Err(FrfError::Dimension("SISO loop required; use run_mimo_experiments for MIMO".into()));
    }
    Ok(())
}

/// Indirect estimate `G = GS / S` from the excitation `d`.
///
/// Bins where `|S|` falls below `DEFAULT_DIVISION_FLOOR * max |S|` are
/// defects. The variance is a first-order propagation that ignores the
/// correlation between `GS` and `S`.
pub fn indirect_estimate<T: Real>(ds: &ClosedLoopDataset<T>, est: &OpenLoopEstimator) -> Result<FrfEstimate<T>> {
    require_siso(ds)?;
    let (gs, s) = simo_columns(ds, est)?;
    let s_max = s.g.iter().map(|m| cabs(m[(0, 0)])).filter(|v| v.is_finite()).fold(T::zero(), |a, b| a.max(b));
    let floor = T::lit(DEFAULT_DIVISION_FLOOR) * s_max;
    let mut defects: Vec<BinDefect> = gs.defects.iter().chain(&s.defects).cloned().collect();
    let nan = T::lit(f64::NAN);
    let mut g = Vec::with_capacity(s.n_bins());
    let mut variance = Vec::with_capacity(s.n_bins());
    for k in 0..s.n_bins() {
        let (num, den) = (gs.g[k][(0, 0)], s.g[k][(0, 0)]);
        if !(cabs(den) > floor) {
            if !s.is_defect(k) {
                defects.push(BinDefect::new(k, "|S| below floor"));
            }
            g.push(DMatrix::from_element(1, 1, cnan()));
            variance.push(DMatrix::from_element(1, 1, nan));
            continue;
        }
        let ratio = num / den;
        g.push(DMatrix::from_element(1, 1, ratio));
        variance.push(DMatrix::from_element(1, 1, propagate_ratio(&gs, &s, k, ratio, den)));
    }
    let mut out = FrfEstimate {
        g,
        variance: gs.variance.as_ref().map(|_| variance),
        transient: None,
        bin_frequencies: s.bin_frequencies.clone(),
        tag: EstimatorTag::new(format!("indirect_{}", est.name()))
            .note("G = GS / S from d -> [y; u], shared input spectrum")
            .note("variance: first-order propagation, approximate"),
        defects,
        condition: None,
    };
    out.tag.notes.extend(est.notes());
    out.sort_defects();
    Ok(out)
}

/// `var(GS)/|S|^2 + |G|^2 var(S)/|S|^2` at bin `k`, NaN without variances.
fn propagate_ratio<T: Real>(
    gs: &FrfEstimate<T>,
    s: &FrfEstimate<T>,
    k: usize,
    ratio: Complex<T>,
    den: Complex<T>,
) -> T {
    match (&gs.variance, &s.variance) {
        (Some(vg), Some(vs)) => (vg[k][(0, 0)] + ratio.norm_sqr() * vs[k][(0, 0)]) / den.norm_sqr(),
        _ => T::lit(f64::NAN),
    }
}

/// `G = (1/K) (1/S - 1)` from a sensitivity estimate and the exact controller
/// response `k` at each bin.
///
/// Any error in `K` goes straight into the estimate.
pub fn controller_inversion_estimate<T: Real>(s_hat: &FrfEstimate<T>, k: &[Complex<T>]) -> Result<FrfEstimate<T>> {
    if s_hat.n_outputs() != 1 || s_hat.n_inputs() != 1 {
        return Err(FrfError::Dimension("controller inversion is SISO".into()));
    }
    if k.len() != s_hat.n_bins() {
        return Err(FrfError::Dimension(format!("{} controller values for {} bins", k.len(), s_hat.n_bins())));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let nan = T::lit(f64::NAN);
    let mut defects = s_hat.defects.clone();
    let mut g = Vec::with_capacity(k.len());
    let mut variance = Vec::with_capacity(k.len());
    for (b, &kb) in k.iter().enumerate() {
        let s = s_hat.g[b][(0, 0)];
        let bad = if kb == zero || !kb.re.is_finite() || !kb.im.is_finite() {
            Some("K = 0")
        } else if s == zero {
            Some("S = 0")
        } else {
            None
        };
        if let Some(reason) = bad {
            defects.push(BinDefect::new(b, reason));
            g.push(DMatrix::from_element(1, 1, cnan()));
            variance.push(DMatrix::from_element(1, 1, nan));
            continue;
        }
        g.push(DMatrix::from_element(1, 1, (one / s - one) / kb));
        let vs = s_hat.variance.as_ref().map_or(nan, |v| v[b][(0, 0)]);
        variance.push(DMatrix::from_element(1, 1, vs / (kb.norm_sqr() * s.norm_sqr() * s.norm_sqr())));
    }
    let mut out = FrfEstimate {
        g,
        variance: s_hat.variance.as_ref().map(|_| variance),
        transient: None,
        bin_frequencies: s_hat.bin_frequencies.clone(),
        tag: EstimatorTag::new("controller_inversion")
            .note("G = (1/K)(1/S - 1); valid only if the controller response is exact")
            .note("variance: first-order propagation, approximate"),
        defects,
        condition: None,
    };
    out.sort_defects();
    Ok(out)
}
