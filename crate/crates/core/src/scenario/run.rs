use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use num_complex::Complex;

use super::config::{ControllerSpec, EstimatorMethod, ScenarioConfig, ScenarioKind, Target};
use crate::closedloop::{
    direct_asymptote, direct_estimate, equivalent_plant, full_plant, indirect_estimate, run_mimo_experiments, true_frm,
    ClosedLoopDataset, ExperimentSeeds, MimoPlan, OpenLoopEstimator, DEFAULT_CONDITION_THRESHOLD,
};
use crate::error::{FrfError, Result};
use crate::estimators::{BinDefect, EstimatorTag, FrfEstimate};
use crate::signals::{bin_frequencies, generate_multisine, MultisineSpec, TimeSeries, WindowKind};
use crate::sim::{
    discretize_zoh, equivalent_plant_oracle, frequency_response, input_sensitivity, simulate_closed_loop,
    two_mass_plant, ControllerConfig, DiscreteTf, StateSpaceModel, TimeDomain,
};

/// Error statistics over excited bins inside the summary band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandStats {
    /// `20 log10` of the largest absolute entry error.
    pub max_error_db: f64,
    /// `20 log10` of the mean absolute entry error.
    pub mean_error_db: f64,
    pub n_bins: usize,
    pub n_defects: usize,
    pub defect_fraction: f64,
}

/// One exported estimate with its oracle on the same bins.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    /// File stem of the export.
    pub name: String,
    pub estimate: FrfEstimate<f64>,
    pub oracle: FrfEstimate<f64>,
    /// Whether each bin of this grid carries excitation.
    pub excited: Vec<bool>,
    /// `|estimate - oracle|` per entry, NaN at defects.
    pub error: Vec<DMatrix<f64>>,
    pub stats: BandStats,
}

impl EstimateReport {
    fn new(
        name: &str,
        estimate: FrfEstimate<f64>,
        oracle: FrfEstimate<f64>,
        excited: Vec<bool>,
        band: [f64; 2],
    ) -> Self {
        let error: Vec<DMatrix<f64>> = estimate
            .g
            .iter()
            .zip(&oracle.g)
            .enumerate()
            .map(|(b, (e, o))| {
                if estimate.is_defect(b) {
                    DMatrix::from_element(e.nrows(), e.ncols(), f64::NAN)
                } else {
                    e.zip_map(o, |a, c| (a - c).norm())
                }
            })
            .collect();
        let mut r = Self { name: name.into(), estimate, oracle, excited, error, stats: empty_stats() };
        r.stats = r.band_stats(band[0], band[1]);
        r
    }

    pub fn frequency_hz(&self, b: usize) -> f64 {
        self.estimate.bin_frequencies[b] / std::f64::consts::TAU
    }

    fn band_bins(&self, lo_hz: f64, hi_hz: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.error.len()).filter(move |&b| {
            let f = self.frequency_hz(b);
            self.excited[b] && f >= lo_hz && f <= hi_hz
        })
    }

    /// Largest absolute entry error over excited, non-defect bins in
    /// `[lo_hz, hi_hz]`; NaN when there are none.
    pub fn max_error_in(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        self.band_bins(lo_hz, hi_hz)
            .filter(|&b| !self.estimate.is_defect(b))
            .flat_map(|b| self.error[b].iter().copied())
            .fold(f64::NAN, f64::max)
    }

    pub fn band_stats(&self, lo_hz: f64, hi_hz: f64) -> BandStats {
        let bins: Vec<usize> = self.band_bins(lo_hz, hi_hz).collect();
        let n_defects = bins.iter().filter(|&&b| self.estimate.is_defect(b)).count();
        let errs: Vec<f64> = bins
            .iter()
            .filter(|&&b| !self.estimate.is_defect(b))
            .flat_map(|&b| self.error[b].iter().copied())
            .collect();
        let max = errs.iter().copied().fold(f64::NAN, f64::max);
        let mean = if errs.is_empty() { f64::NAN } else { errs.iter().sum::<f64>() / errs.len() as f64 };
        BandStats {
            max_error_db: 20.0 * max.log10(),
            mean_error_db: 20.0 * mean.log10(),
            n_bins: bins.len(),
            n_defects,
            defect_fraction: if bins.is_empty() { 0.0 } else { n_defects as f64 / bins.len() as f64 },
        }
    }
}

fn empty_stats() -> BandStats {
    BandStats { max_error_db: f64::NAN, mean_error_db: f64::NAN, n_bins: 0, n_defects: 0, defect_fraction: 0.0 }
}

/// Everything a scenario produced.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub estimates: Vec<EstimateReport>,
    /// Analytic curves exported next to the estimates, by file stem.
    pub references: Vec<(String, FrfEstimate<f64>)>,
    pub metrics: BTreeMap<String, f64>,
    pub defect_threshold_exceeded: bool,
    /// Wall-clock metadata, kept out of the numerical outputs.
    pub started_unix_s: f64,
    pub elapsed_s: f64,
}

impl ScenarioReport {
    pub fn estimate(&self, name: &str) -> Option<&EstimateReport> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn reference(&self, name: &str) -> Option<&FrfEstimate<f64>> {
        self.references.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    /// Every defect as `(estimate, defect)`.
    pub fn defect_log(&self) -> Vec<(String, BinDefect)> {
        self.estimates
            .iter()
            .flat_map(|e| e.estimate.defects.iter().map(move |d| (e.name.clone(), d.clone())))
            .collect()
    }
}

fn load_plant(cfg: &ScenarioConfig) -> Result<StateSpaceModel<f64>> {
    let model = match cfg.plant_path() {
        None => two_mass_plant(),
        Some(path) => StateSpaceModel::from_json(&serde_json::from_str(
            &std::fs::read_to_string(&path).map_err(|e| FrfError::io(&path, e))?,
        )?)?,
    };
    match model.time_domain() {
        TimeDomain::Continuous => discretize_zoh(&model, cfg.ts()),
        TimeDomain::Discrete { ts } if (ts - cfg.ts()).abs() <= 1e-12 * ts => Ok(model),
        TimeDomain::Discrete { ts } => {
            Err(FrfError::Config(format!("plant: model ts = {ts} does not match 1/fs = {}", cfg.ts())))
        }
    }
}

fn controller(cfg: &ScenarioConfig, n_loops: usize) -> Result<ControllerConfig<f64>> {
    match &cfg.controller {
        ControllerSpec::DefaultLead => ControllerConfig::default_lead(n_loops, cfg.ts()),
        ControllerSpec::OpenLoop => ControllerConfig::new(vec![DiscreteTf::gain(0.0); n_loops], cfg.ts()),
        ControllerSpec::Loops(l) if l.len() == n_loops => ControllerConfig::new(l.clone(), cfg.ts()),
        ControllerSpec::Loops(l) => {
            Err(FrfError::Config(format!("controller.loops: {} loops for {n_loops} plant inputs", l.len())))
        }
    }
}

fn multisine(cfg: &ScenarioConfig, phase_seed: u64) -> Result<MultisineSpec<f64>> {
    MultisineSpec::flat(cfg.period_samples()?, cfg.excited_bins()?, cfg.multisine.rms, phase_seed, cfg.n_periods_total)
}

fn excitation(cfg: &ScenarioConfig, n_inputs: usize, j: usize) -> Result<TimeSeries<f64>> {
    let dj = generate_multisine(&multisine(cfg, cfg.seeds.phase)?, cfg.ts())?;
    let n = dj.len();
    let channels = (0..n_inputs).map(|i| if i == j { dj.channel(0).to_vec() } else { vec![0.0; n] }).collect();
    TimeSeries::with_prefix(channels, cfg.ts(), "d")
}

fn estimator(cfg: &ScenarioConfig, method: EstimatorMethod) -> OpenLoopEstimator {
    let window_length = cfg.sa_window_samples;
    match method {
        EstimatorMethod::SaRect => {
            OpenLoopEstimator::SpectralAnalysis { window_length, window: WindowKind::Rectangular }
        }
        EstimatorMethod::SaHann => OpenLoopEstimator::SpectralAnalysis { window_length, window: WindowKind::Hann },
        EstimatorMethod::Lpm => OpenLoopEstimator::Lpm(cfg.lpm),
    }
}

/// Bins of a `window`-sample grid that coincide with excited harmonics.
fn excited_mask(cfg: &ScenarioConfig, n_bins: usize, window: usize) -> Result<Vec<bool>> {
    let p = cfg.period_samples()?;
    let bins = cfg.excited_bins()?;
    Ok((0..n_bins).map(|b| (b * p) % window == 0 && bins.binary_search(&(b * p / window)).is_ok()).collect())
}

fn oracle_from(
    name: &str,
    freqs: &[f64],
    ny: usize,
    nu: usize,
    f: impl Fn(f64) -> Option<DMatrix<Complex<f64>>>,
) -> FrfEstimate<f64> {
    let nan = Complex::new(f64::NAN, f64::NAN);
    let mut defects = Vec::new();
    let g = freqs
        .iter()
        .enumerate()
        .map(|(b, &w)| {
            f(w).unwrap_or_else(|| {
                defects.push(BinDefect::new(b, "oracle undefined"));
                DMatrix::from_element(ny, nu, nan)
            })
        })
        .collect();
    FrfEstimate {
        g,
        variance: Some(vec![DMatrix::zeros(ny, nu); freqs.len()]),
        transient: None,
        bin_frequencies: freqs.to_vec(),
        tag: EstimatorTag::new(name).note("analytic, zero variance"),
        defects,
        condition: None,
    }
}

/// Runs the scenario described by `cfg`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let plant = load_plant(cfg)?;
    let mut report = ScenarioReport {
        config: cfg.clone(),
        estimates: Vec::new(),
        references: Vec::new(),
        metrics: BTreeMap::new(),
        defect_threshold_exceeded: false,
        started_unix_s: started,
        elapsed_s: 0.0,
    };
    match cfg.scenario {
        ScenarioKind::TransientStudy | ScenarioKind::Custom => column_study(cfg, &plant, &mut report)?,
        ScenarioKind::ClosedLoopSisoBias => siso_bias(cfg, &plant, &mut report)?,
        ScenarioKind::MimoFullVsEquivalent => mimo(cfg, &plant, &mut report)?,
    }
    report.defect_threshold_exceeded =
        report.estimates.iter().any(|e| e.stats.defect_fraction > cfg.max_defect_fraction);
    report.elapsed_s = clock.elapsed().as_secs_f64();
    Ok(report)
}

fn check_input(cfg: &ScenarioConfig, plant: &StateSpaceModel<f64>) -> Result<usize> {
    let j = cfg.excited_input;
    if j >= plant.n_inputs() {
        return Err(FrfError::Config(format!("excited_input: {j} but the plant has {} inputs", plant.n_inputs())));
    }
    Ok(j)
}

/// Column `j` of `S` (or `G`) from one closed-loop run with `d_j` excited.
fn column_study(cfg: &ScenarioConfig, plant: &StateSpaceModel<f64>, report: &mut ScenarioReport) -> Result<()> {
    let j = check_input(cfg, plant)?;
    let (nu, ny) = (plant.n_inputs(), plant.n_outputs());
    let k = controller(cfg, nu)?;
    let d = excitation(cfg, nu, j)?;
    let rec = simulate_closed_loop(plant, &k, &d, &vec![cfg.noise_std; ny], cfg.seeds.noise)?;
    let p = cfg.period_samples()?;
    let ds =
        ClosedLoopDataset::from_record(&rec, j, k.clone())?.slice(cfg.discard_periods() * p, cfg.n_periods_used * p)?;
    let (x, out, rows, label) = match cfg.target {
        Target::Sensitivity => (ds.d().select(&[j])?, ds.u().clone(), nu, "oracle_s"),
        Target::Plant => (ds.u().select(&[j])?, ds.y().clone(), ny, "oracle_g"),
    };
    let truth = |w: f64| -> Option<DMatrix<Complex<f64>>> {
        let g = frequency_response(plant, w)?;
        let m = match cfg.target {
            Target::Sensitivity => input_sensitivity(&g, &k.frequency_response(w))?.0,
            Target::Plant => g,
        };
        Some(m.columns(j, 1).into_owned())
    };
    for &method in &cfg.methods {
        let est = estimator(cfg, method).estimate(&x, &out)?;
        let window = match method {
            EstimatorMethod::Lpm => ds.len(),
            _ => cfg.sa_window_samples,
        };
        let oracle = oracle_from(label, &est.bin_frequencies, rows, 1, truth);
        let excited = excited_mask(cfg, est.n_bins(), window)?;
        report.estimates.push(EstimateReport::new(
            &format!("frf_{}", method.name()),
            est,
            oracle,
            excited,
            cfg.summary_band_hz,
        ));
    }
    let fine = bin_frequencies(ds.len(), cfg.ts());
    report.references.push(("oracle".into(), oracle_from(label, &fine[..ds.len() / 2 + 1], rows, 1, truth)));
    let max_of = |name: &str| report.estimate(name).map(|e| e.stats.max_error_db);
    if let (Some(l), Some(s)) = (max_of("frf_lpm"), max_of("frf_sa_rect")) {
        report.metrics.insert("lpm_minus_sa_rect_max_error_db".into(), l - s);
    }
    Ok(())
}

/// Direct and indirect estimates of a SISO loop against the analytic bias.
fn siso_bias(cfg: &ScenarioConfig, plant: &StateSpaceModel<f64>, report: &mut ScenarioReport) -> Result<()> {
    let j = check_input(cfg, plant)?;
    let m = if plant.n_inputs() == 1 && plant.n_outputs() == 1 {
        plant.clone()
    } else {
        plant.subsystem(&[j], &[j.min(plant.n_outputs() - 1)])?
    };
    let k = controller(cfg, 1)?;
    let mut one = cfg.clone();
    one.excited_input = 0;
    let d = excitation(&one, 1, 0)?;
    let rec = simulate_closed_loop(&m, &k, &d, &[cfg.noise_std], cfg.seeds.noise)?;
    let p = cfg.period_samples()?;
    let ds =
        ClosedLoopDataset::from_record(&rec, 0, k.clone())?.slice(cfg.discard_periods() * p, cfg.n_periods_used * p)?;
    let w = cfg.sa_window_samples;
    let direct = direct_estimate(&ds, w, WindowKind::Rectangular)?;
    let ind_est = estimator(cfg, cfg.methods[0]);
    let indirect = indirect_estimate(&ds, &ind_est)?;
    let g0 = |f: f64| frequency_response(&m, f);

    // Phi_dd of a harmonic with amplitude A on a rectangular window of w
    // samples is A^2 w / 4 under the unitary DFT; Phi_vv is the noise variance.
    let spec = multisine(cfg, cfg.seeds.phase)?;
    let excited = excited_mask(cfg, direct.n_bins(), w)?;
    let amp = spec.amplitude_per_bin[0];
    let phi_vv = cfg.noise_std * cfg.noise_std;
    let asym_freqs = direct.bin_frequencies.clone();
    let asymptote = oracle_from("direct_asymptote", &asym_freqs, 1, 1, |f| {
        let b = asym_freqs.iter().position(|&x| x == f)?;
        let phi_dd = if excited[b] { amp * amp * w as f64 / 4.0 } else { 0.0 };
        let v = direct_asymptote(g0(f)?[(0, 0)], k.frequency_response(f)[(0, 0)], phi_dd, phi_vv);
        (v.re.is_finite() && v.im.is_finite()).then(|| DMatrix::from_element(1, 1, v))
    });

    let band = cfg.summary_band_hz;
    let in_band = |b: usize| {
        let f = direct.bin_frequencies[b] / std::f64::consts::TAU;
        excited[b] && f >= band[0] && f <= band[1] && !direct.is_defect(b)
    };
    let (mut tested, mut within, mut biased, mut closer) = (0usize, 0usize, 0usize, 0usize);
    if let Some(var) = &direct.variance {
        let ind_excited = excited_mask(
            cfg,
            indirect.n_bins(),
            if matches!(ind_est, OpenLoopEstimator::Lpm(_)) { ds.len() } else { w },
        )?;
        for b in (0..direct.n_bins()).filter(|&b| in_band(b)) {
            let se = var[b][(0, 0)].sqrt();
            let a = asymptote.g[b][(0, 0)];
            tested += 1;
            if (direct.g[b][(0, 0)] - a).norm() <= 3.0 * se {
                within += 1;
            }
            let truth = match g0(direct.bin_frequencies[b]) {
                Some(g) => g[(0, 0)],
                None => continue,
            };
            if (a - truth).norm() > 3.0 * se {
                // Same physical frequency on the indirect grid.
                let f = direct.bin_frequencies[b];
                if let Some(bi) = indirect.bin_frequencies.iter().position(|&x| (x - f).abs() <= 1e-9 * f) {
                    if ind_excited[bi] && !indirect.is_defect(bi) {
                        biased += 1;
                        if (indirect.g[bi][(0, 0)] - truth).norm() < (direct.g[b][(0, 0)] - truth).norm() {
                            closer += 1;
                        }
                    }
                }
            }
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
    report.metrics.insert("direct_within_3se_fraction".into(), frac(within, tested));
    report.metrics.insert("direct_tested_bins".into(), tested as f64);
    report.metrics.insert("bias_exceeds_3se_bins".into(), biased as f64);
    report.metrics.insert("indirect_closer_fraction".into(), frac(closer, biased));

    for (name, est, window) in [
        ("frf_direct", direct, w),
        ("frf_indirect", indirect, if matches!(ind_est, OpenLoopEstimator::Lpm(_)) { ds.len() } else { w }),
    ] {
        let oracle = oracle_from("oracle_g", &est.bin_frequencies, 1, 1, g0);
        let excited = excited_mask(cfg, est.n_bins(), window)?;
        report.estimates.push(EstimateReport::new(name, est, oracle, excited, band));
    }
    report.references.push(("oracle".into(), oracle_from("oracle_g", &asym_freqs, 1, 1, g0)));
    report.references.push(("bias_oracle".into(), asymptote));
    Ok(())
}

/// Two-experiment FRM, full plant and equivalent plant.
fn mimo(cfg: &ScenarioConfig, plant: &StateSpaceModel<f64>, report: &mut ScenarioReport) -> Result<()> {
    let (nu, ny) = (plant.n_inputs(), plant.n_outputs());
    if nu != ny {
        return Err(FrfError::Config(format!("plant: full/equivalent plant needs a square plant, got {ny}x{nu}")));
    }
    let k = controller(cfg, nu)?;
    let plan = MimoPlan {
        multisine: multisine(cfg, cfg.seeds.phase)?,
        noise_std: vec![cfg.noise_std; ny],
        seeds: (0..nu as u64)
            .map(|j| ExperimentSeeds {
                phase_seed: cfg.seeds.phase.wrapping_add(j),
                noise_seed: cfg.seeds.noise.wrapping_add(j),
            })
            .collect(),
        discard_periods: cfg.discard_periods(),
        estimator: estimator(cfg, cfg.methods[0]),
    };
    let frm = run_mimo_experiments(plant, &k, &plan)?;
    let full = full_plant(&frm, DEFAULT_CONDITION_THRESHOLD)?;
    let equiv = equivalent_plant(&frm)?;
    let freqs = frm.s.bin_frequencies.clone();
    let window = match plan.estimator {
        OpenLoopEstimator::Lpm(_) => cfg.n_periods_used * cfg.period_samples()?,
        OpenLoopEstimator::SpectralAnalysis { window_length, .. } => window_length,
    };
    let excited = excited_mask(cfg, freqs.len(), window)?;
    let truth = true_frm(plant, &k, &freqs)?;
    let g_true = oracle_from("oracle_g", &freqs, ny, nu, |w| frequency_response(plant, w));
    let equiv_true = oracle_from("oracle_equiv", &freqs, ny, nu, |w| {
        let g = frequency_response(plant, w)?;
        let kw = k.frequency_response(w);
        let (s, gs) = input_sensitivity(&g, &kw)?;
        let mut e = gs.zip_map(&s, |a, b| a / b);
        for i in 0..nu {
            e[(i, i)] = equivalent_plant_oracle(&g, &kw, i)?;
        }
        Some(e)
    });

    let band = cfg.summary_band_hz;
    let (mut worst_abs, mut worst_rel) = (0f64, 0f64);
    for b in 0..freqs.len() {
        let f = freqs[b] / std::f64::consts::TAU;
        if !excited[b] || f < band[0] || f > band[1] || full.is_defect(b) || equiv.is_defect(b) {
            continue;
        }
        let g = &g_true.g[b];
        let kw = k.frequency_response(freqs[b]);
        let interaction = g[(0, 0)] - equivalent_plant_oracle(g, &kw, 0).unwrap_or(Complex::new(f64::NAN, 0.0));
        let gap = full.g[b][(0, 0)] - equiv.g[b][(0, 0)];
        let err = (gap - interaction).norm();
        worst_abs = worst_abs.max(err);
        worst_rel = worst_rel.max(err / g[(0, 0)].norm());
    }
    report.metrics.insert("interaction_identity_max_abs_error".into(), worst_abs);
    report.metrics.insert("interaction_identity_max_rel_error".into(), worst_rel);
    let max_cond = full
        .condition
        .as_ref()
        .map_or(f64::NAN, |c| (0..c.len()).filter(|&b| excited[b]).map(|b| c[b]).fold(f64::NAN, f64::max));
    report.metrics.insert("max_condition_s".into(), max_cond);

    for (name, est, oracle) in [
        ("gs", frm.gs, truth.gs),
        ("s", frm.s, truth.s),
        ("g_full", full, g_true.clone()),
        ("g_equiv", equiv, equiv_true.clone()),
    ] {
        report.estimates.push(EstimateReport::new(name, est, oracle, excited.clone(), band));
    }
    report.references.push(("oracle".into(), g_true));
    report.references.push(("oracle_equiv".into(), equiv_true));
    Ok(())
}
