//! Local polynomial method.
//!
//! Around every bin `k` the output spectrum over `2 n_w + 1` neighbouring bins
//! is modelled as
//!
//! ```text
//! Y(k+r) = (G(k) + sum_s g_s r^s) U(k+r) + T(k) + sum_s t_s r^s + V(k+r)
//! ```
//!
//! with polynomial order `R`. Stacking the bins gives `Y_n = Theta K_n + V_n`,
//! where column `r` of `K_n` is `[K1(r) (x) U(k+r); K1(r)]` and
//! `K1(r) = [1, r, ..., r^R]`. The least-squares `Theta` yields the FRF and
//! the transient at the centre bin as the zeroth-order coefficients.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_pair, BinDefect, EstimatorTag, FrfEstimate};
use crate::error::{FrfError, Result};
use crate::scalar::{cnan, Real};
use crate::signals::SpectrumSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpmConfig {
    /// Polynomial order `R` of both the FRF and the transient model.
    pub poly_order: usize,
    /// Half width `n_w`; each local fit uses `2 n_w + 1` bins.
    pub half_width: usize,
    /// Residual degrees of freedom required beyond the parameter count.
    pub dof_margin: usize,
}

impl LpmConfig {
    /// Complex parameters per output row: `(R + 1)(n_u + 1)`.
    pub fn n_params(&self, n_inputs: usize) -> usize {
        (self.poly_order + 1) * (n_inputs + 1)
    }

    pub fn width(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Smallest half width satisfying `2 n_w + 1 >= (R+1)(n_u+1) + margin`.
    pub fn min_half_width(poly_order: usize, n_inputs: usize, dof_margin: usize) -> usize {
        let need = (poly_order + 1) * (n_inputs + 1) + dof_margin;
        (need.saturating_sub(1)).div_ceil(2).max(1)
    }

    /// Order `R`, margin `R + 1` and the smallest admissible half width.
    pub fn with_order(poly_order: usize, n_inputs: usize) -> Self {
        let dof_margin = poly_order + 1;
        Self { poly_order, half_width: Self::min_half_width(poly_order, n_inputs, dof_margin), dof_margin }
    }

    /// Quadratic local models, see [`LpmConfig::with_order`].
    pub fn default_for(n_inputs: usize) -> Self {
        Self::with_order(2, n_inputs)
    }

    pub fn validate(&self, n_inputs: usize) -> Result<()> {
        if self.half_width == 0 || self.dof_margin == 0 {
            return Err(FrfError::InvalidArgument("half_width and dof_margin must be >= 1".into()));
        }
        let required = self.n_params(n_inputs) + self.dof_margin;
        if self.width() < required {
            return Err(FrfError::LpmUnsolvable { required, available: self.width() });
        }
        Ok(())
    }
}

/// Local coefficients at one bin: `theta_g[s]` is `g_s` (`n_y x n_u`, with
/// `theta_g[0] = G(k)`) and `theta_t[s]` is `t_s` (`theta_t[0] = T(k)`).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModelTheta<T: Real> {
    pub theta_g: Vec<DMatrix<Complex<T>>>,
    pub theta_t: Vec<DVector<Complex<T>>>,
}

/// Bins used by the local fit around `k`.
///
/// Centred where possible and shifted to stay inside `0..n_bins` at the edges.
pub fn lpm_edge_policy(k: usize, n_bins: usize, cfg: &LpmConfig) -> Result<Range<usize>> {
    let width = cfg.width();
    if n_bins < width {
        return Err(FrfError::TooFewBins { n_bins, width });
    }
    if k >= n_bins {
        return Err(FrfError::InvalidArgument(format!("bin {k} outside 0..{n_bins}")));
    }
    let start = k.saturating_sub(cfg.half_width).min(n_bins - width);
    Ok(start..start + width)
}

struct LocalFit<T: Real> {
    theta: LocalModelTheta<T>,
    g_variance: DMatrix<T>,
}

fn fit_bin<T: Real>(
    u: &SpectrumSet<T>,
    y: &SpectrumSet<T>,
    cfg: &LpmConfig,
    k: usize,
) -> std::result::Result<LocalFit<T>, &'static str> {
    let (nu, ny) = (u.n_channels(), y.n_channels());
    let order = cfg.poly_order;
    let q = cfg.n_params(nu);
    let range = lpm_edge_policy(k, u.n_bins(), cfg).map_err(|_| "window does not fit")?;
    let width = range.len();
    // Offsets are scaled by n_w to keep the regressor well conditioned.
    let scale = T::from_usize_lossy(cfg.half_width);
    let zero = Complex::new(T::zero(), T::zero());
    let mut a = DMatrix::from_element(width, q, zero);
    let mut b = DMatrix::from_element(width, ny, zero);
    for (row, idx) in range.enumerate() {
        let rho = (T::from_usize_lossy(idx) - T::from_usize_lossy(k)) / scale;
        let mut power = T::one();
        for s in 0..=order {
            for j in 0..nu {
                a[(row, s * nu + j)] = u.get(0, j, idx).scale(power);
            }
            a[(row, (order + 1) * nu + s)] = Complex::new(power, T::zero());
            power *= rho;
        }
        for i in 0..ny {
            b[(row, i)] = y.get(0, i, idx);
        }
    }
    // A P = Q R; the diagonal of R is nonnegative and exposes rank loss.
    let qr = a.col_piv_qr();
    let r = qr.r();
    let d_max = (0..q).fold(T::zero(), |m, i| m.max(r[(i, i)].re));
    let d_min = (0..q).fold(d_max, |m, i| m.min(r[(i, i)].re));
    let tol = T::eps() * T::lit(1e4);
    if !(d_max > T::zero()) || d_min <= tol * d_max {
        return Err("rank-deficient local regressor");
    }
    qr.q_tr_mul(&mut b);
    let mut x = b.rows(0, q).into_owned();
    if !r.solve_upper_triangular_mut(&mut x) {
        return Err("least-squares solve failed");
    }
    qr.p().inv_permute_rows(&mut x);
    // The residual norm is that of the trailing rows of Q^H b.
    let dof = T::from_usize_lossy(width - q);
    let sigma2: Vec<T> = (0..ny)
        .map(|i| b.view((q, i), (width - q, 1)).iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()) / dof)
        .collect();
    // diag((A^H A)^{-1})_j = |R^{-H} e_{pi(j)}|^2 for the first nu columns.
    let mut e = DMatrix::from_fn(q, nu, |p, j| if p == j { Complex::new(T::one(), T::zero()) } else { zero });
    qr.p().permute_rows(&mut e);
    if !r.ad_solve_upper_triangular_mut(&mut e) {
        return Err("least-squares solve failed");
    }
    let cov_diag: Vec<T> = (0..nu).map(|j| e.column(j).iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())).collect();

    let mut theta_g = Vec::with_capacity(order + 1);
    let mut theta_t = Vec::with_capacity(order + 1);
    let mut unscale = T::one();
    for s in 0..=order {
        theta_g.push(DMatrix::from_fn(ny, nu, |i, j| x[(s * nu + j, i)].unscale(unscale)));
        theta_t.push(DVector::from_fn(ny, |i, _| x[((order + 1) * nu + s, i)].unscale(unscale)));
        unscale *= scale;
    }
    Ok(LocalFit {
        theta: LocalModelTheta { theta_g, theta_t },
        g_variance: DMatrix::from_fn(ny, nu, |i, j| sigma2[i] * cov_diag[j]),
    })
}

fn check_inputs<T: Real>(u: &SpectrumSet<T>, y: &SpectrumSet<T>, cfg: &LpmConfig) -> Result<()> {
    check_pair(u, y)?;
    if u.n_windows() != 1 {
        return Err(FrfError::InvalidArgument(format!("LPM works on a single window, got {}", u.n_windows())));
    }
    cfg.validate(u.n_channels())?;
    if u.n_bins() < cfg.width() {
        return Err(FrfError::TooFewBins { n_bins: u.n_bins(), width: cfg.width() });
    }
    Ok(())
}

/// Local coefficient blocks for every bin; `None` where the fit was rank deficient.
pub fn lpm_local_models<T: Real>(
    u: &SpectrumSet<T>,
    y: &SpectrumSet<T>,
    cfg: &LpmConfig,
) -> Result<Vec<Option<LocalModelTheta<T>>>> {
    check_inputs(u, y, cfg)?;
    Ok((0..u.n_bins()).into_par_iter().map(|k| fit_bin(u, y, cfg, k).ok().map(|f| f.theta)).collect())
}

/// FRF and transient estimate from one window of input and output spectra.
///
/// Each entry's variance is the residual noise variance of its output row,
/// `|Y_n - Theta K_n|^2 / (2 n_w + 1 - q)`, times the matching diagonal
/// element of `(K_n K_n^H)^{-1}`.
pub fn lpm_fit<T: Real>(u: &SpectrumSet<T>, y: &SpectrumSet<T>, cfg: &LpmConfig) -> Result<FrfEstimate<T>> {
    check_inputs(u, y, cfg)?;
    let (nu, ny) = (u.n_channels(), y.n_channels());
    let fits: Vec<_> = (0..u.n_bins()).into_par_iter().map(|k| fit_bin(u, y, cfg, k)).collect();
    let nan = T::lit(f64::NAN);
    let mut g = Vec::with_capacity(fits.len());
    let mut variance = Vec::with_capacity(fits.len());
    let mut transient = Vec::with_capacity(fits.len());
    let mut defects = Vec::new();
    for (k, fit) in fits.into_iter().enumerate() {
        match fit {
            Ok(f) => {
                g.push(f.theta.theta_g[0].clone());
                transient.push(f.theta.theta_t[0].clone());
                variance.push(f.g_variance);
            }
            Err(reason) => {
                defects.push(BinDefect::new(k, reason));
                g.push(DMatrix::from_element(ny, nu, cnan()));
                transient.push(DVector::from_element(ny, cnan()));
                variance.push(DMatrix::from_element(ny, nu, nan));
            }
        }
    }
    Ok(FrfEstimate {
        g,
        variance: Some(variance),
        transient: Some(transient),
        bin_frequencies: u.bin_frequencies().to_vec(),
        tag: EstimatorTag::new("lpm")
            .note(format!("R={}, n_w={}, dof_margin={}", cfg.poly_order, cfg.half_width, cfg.dof_margin)),
        defects,
        condition: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::WindowKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn default_config() {
        let c = LpmConfig::default_for(1);
        assert_eq!((c.poly_order, c.dof_margin, c.half_width), (2, 3, 4));
        c.validate(1).unwrap();
        let c2 = LpmConfig::default_for(2);
        assert_eq!(c2.half_width, 6);
        assert!(matches!(
            LpmConfig { poly_order: 2, half_width: 3, dof_margin: 3 }.validate(1),
            Err(FrfError::LpmUnsolvable { required: 9, available: 7 })
        ));
    }

    #[test]
    fn edge_policy() {
        let cfg = LpmConfig::default_for(1);
        assert_eq!(lpm_edge_policy(50, 100, &cfg).unwrap(), 46..55);
        assert_eq!(lpm_edge_policy(0, 100, &cfg).unwrap(), 0..9);
        assert_eq!(lpm_edge_policy(99, 100, &cfg).unwrap(), 91..100);
        assert_eq!(lpm_edge_policy(2, 100, &cfg).unwrap(), 0..9);
        assert!(matches!(lpm_edge_policy(0, 8, &cfg), Err(FrfError::TooFewBins { .. })));
    }

    fn random_input(n_bins: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_bins).map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
    }

    fn set(channels: Vec<Vec<Complex<f64>>>) -> SpectrumSet<f64> {
        let n_bins = channels[0].len();
        let freqs = (0..n_bins).map(|k| k as f64).collect();
        SpectrumSet::from_raw(vec![channels], freqs, 2 * (n_bins - 1), WindowKind::Rectangular).unwrap()
    }

    #[test]
    fn rejects_multi_window_and_unsolvable() {
        let u = SpectrumSet::from_raw(
            vec![vec![random_input(20, 1)], vec![random_input(20, 2)]],
            (0..20).map(|k| k as f64).collect(),
            38,
            WindowKind::Rectangular,
        )
        .unwrap();
        assert!(lpm_fit(&u, &u, &LpmConfig::default_for(1)).is_err());
        let one = set(vec![random_input(20, 1)]);
        let bad = LpmConfig { poly_order: 2, half_width: 2, dof_margin: 1 };
        assert!(matches!(lpm_fit(&one, &one, &bad), Err(FrfError::LpmUnsolvable { .. })));
    }

    #[test]
    fn zero_input_bins_rank_deficient() {
        let u = set(vec![vec![Complex::new(0.0, 0.0); 30]]);
        let y = set(vec![random_input(30, 3)]);
        let est = lpm_fit(&u, &y, &LpmConfig::default_for(1)).unwrap();
        assert_eq!(est.defects.len(), 30);
        assert!(est.g[10][(0, 0)].re.is_nan());
    }

    #[test]
    fn noise_only_variance_matches_level() {
        // Y = 2 U + V with unit complex noise: residual variance should be ~1.
        let n_bins = 4000;
        let u = random_input(n_bins, 4);
        let v = random_input(n_bins, 5);
        let s = 0.3;
        let y: Vec<_> = u.iter().zip(&v).map(|(a, b)| a * 2.0 + b * (s / 2f64.sqrt())).collect();
        let est = lpm_fit(&set(vec![u.clone()]), &set(vec![y]), &LpmConfig::default_for(1)).unwrap();
        let var = est.variance.as_ref().unwrap();
        // Empirical spread of G around 2 versus the predicted variance.
        let (mut emp, mut pred) = (0.0, 0.0);
        for k in 10..n_bins - 10 {
            emp += (est.g[k][(0, 0)] - Complex::new(2.0, 0.0)).norm_sqr();
            pred += var[k][(0, 0)];
        }
        let ratio = emp / pred;
        assert!((ratio - 1.0).abs() < 0.15, "{ratio}");
    }

    /// Coefficients of `sum_t c_t ((k - k0)/S)^t` re-expanded around bin `k`
    /// in powers of the offset `r`: `sum_{t>=s} c_t C(t, s) x^{t-s} / S^s`.
    fn recentred(c: &[Complex<f64>], k: usize, k0: f64, scale: f64) -> Vec<Complex<f64>> {
        let x = (k as f64 - k0) / scale;
        let binom = |n: usize, r: usize| (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        (0..c.len())
            .map(|s| {
                (s..c.len()).map(|t| c[t] * binom(t, s) * x.powi((t - s) as i32)).sum::<Complex<f64>>()
                    / scale.powi(s as i32)
            })
            .collect()
    }

    fn exact_polynomial_case(order: usize, seed: u64, n_outputs: usize) -> f64 {
        let n_bins = 120;
        let (k0, scale) = (60.0, 25.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = || Complex::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        let g: Vec<Vec<Complex<f64>>> = (0..n_outputs).map(|_| (0..=order).map(|_| c()).collect()).collect();
        let t: Vec<Vec<Complex<f64>>> = (0..n_outputs).map(|_| (0..=order).map(|_| c()).collect()).collect();
        let u = random_input(n_bins, seed + 1);
        let eval = |coef: &[Complex<f64>], k: usize| recentred(coef, k, k0, scale)[0];
        let y: Vec<Vec<Complex<f64>>> =
            (0..n_outputs).map(|i| (0..n_bins).map(|k| eval(&g[i], k) * u[k] + eval(&t[i], k)).collect()).collect();
        let cfg = LpmConfig::with_order(order, 1);
        let models = lpm_local_models(&set(vec![u]), &set(y), &cfg).unwrap();
        let mut worst = 0f64;
        for k in cfg.half_width..n_bins - cfg.half_width {
            let m = models[k].as_ref().unwrap();
            for i in 0..n_outputs {
                let (eg, et) = (recentred(&g[i], k, k0, scale), recentred(&t[i], k, k0, scale));
                for s in 0..=order {
                    worst = worst.max((m.theta_g[s][(i, 0)] - eg[s]).norm() / eg[s].norm());
                    worst = worst.max((m.theta_t[s][i] - et[s]).norm() / et[s].norm());
                }
            }
        }
        worst
    }

    #[test]
    fn exact_polynomial_recovery() {
        for order in 1..=3 {
            let worst = exact_polynomial_case(order, 10 + order as u64, 2);
            assert!(worst < 1e-10, "R={order}: {worst:e}");
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn exact_polynomial_recovery_any_seed(order in 1usize..=3, seed in 0u64..10_000) {
            let worst = exact_polynomial_case(order, seed, 1);
            proptest::prop_assert!(worst < 1e-10, "R={} seed={}: {:e}", order, seed, worst);
        }
    }

    #[test]
    fn variances_are_nonnegative() {
        let u = random_input(200, 8);
        let y: Vec<_> = random_input(200, 9).iter().zip(&u).map(|(v, a)| a * 0.5 + v * 0.1).collect();
        let est = lpm_fit(&set(vec![u]), &set(vec![y]), &LpmConfig::default_for(1)).unwrap();
        assert!(est.variance.unwrap().iter().all(|m| m.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn f32_fit_runs() {
        let u: Vec<Complex<f32>> = random_input(40, 3).iter().map(|z| Complex::new(z.re as f32, z.im as f32)).collect();
        let y: Vec<Complex<f32>> = u.iter().map(|z| z * 3.0).collect();
        let mk = |c: Vec<Complex<f32>>| {
            SpectrumSet::from_raw(vec![vec![c]], (0..40).map(|k| k as f32).collect(), 78, WindowKind::Rectangular)
                .unwrap()
        };
        let est = lpm_fit(&mk(u), &mk(y), &LpmConfig::default_for(1)).unwrap();
        assert!((est.g[20][(0, 0)] - Complex::new(3.0, 0.0)).norm() < 1e-3);
    }
}
