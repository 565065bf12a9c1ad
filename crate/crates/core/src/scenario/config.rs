use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{FrfError, Result};
use crate::estimators::LpmConfig;
use crate::sim::DiscreteTf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Zero initial conditions, few periods: SA versus LPM on `d -> u`.
    TransientStudy,
    /// Direct versus indirect estimate of a SISO loop with output noise.
    ClosedLoopSisoBias,
    /// Two experiments, full plant versus equivalent plant.
    MimoFullVsEquivalent,
    /// The transient-study pipeline without scenario-specific defaults.
    Custom,
}

/// `"builtin"` (the two-mass plant) or `{"json": "model.json"}`; relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSource {
    Builtin,
    Json(PathBuf),
}

/// `"default_lead"`, `"open_loop"` or `{"loops": [{"num": [..], "den": [..]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerSpec {
    DefaultLead,
    OpenLoop,
    Loops(Vec<DiscreteTf<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    SaRect,
    SaHann,
    Lpm,
}

impl EstimatorMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::SaRect => "sa_rect",
            Self::SaHann => "sa_hann",
            Self::Lpm => "lpm",
        }
    }
}

/// Quantity estimated by the transient and custom pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `d_j -> u`, column `j` of `S`.
    Sensitivity,
    /// `u_j -> y`, column `j` of `G`; unbiased only in open loop.
    Plant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultisineConfig {
    pub period_s: f64,
    pub rms: f64,
    /// Excited band in Hz; every grid bin strictly inside `(0, fs/2)` when absent.
    pub band_hz: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub phase: u64,
    pub noise: u64,
}

impl SeedConfig {
    /// Phase seed `n` and noise seed `n + 2^32`.
    pub fn from_override(n: u64) -> Self {
        Self { phase: n, noise: n.wrapping_add(1 << 32) }
    }
}

/// Fully materialised scenario parameters; this is what summary files echo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub plant: PlantSource,
    pub fs: f64,
    pub multisine: MultisineConfig,
    pub n_periods_total: usize,
    pub n_periods_used: usize,
    /// Standard deviation of the white measurement noise on every output.
    pub noise_std: f64,
    pub controller: ControllerSpec,
    pub excited_input: usize,
    pub target: Target,
    /// The first entry drives the indirect and MIMO estimates.
    pub methods: Vec<EstimatorMethod>,
    pub lpm: LpmConfig,
    pub sa_window_samples: usize,
    pub seeds: SeedConfig,
    pub summary_band_hz: [f64; 2],
    /// Fraction of excited in-band bins that may be defects per estimate.
    pub max_defect_fraction: f64,
    pub output_dir: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMultisine {
    period_s: Option<f64>,
    rms: Option<f64>,
    band_hz: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: ScenarioKind,
    plant: Option<PlantSource>,
    fs: Option<f64>,
    multisine: Option<RawMultisine>,
    n_periods_total: Option<usize>,
    n_periods_used: Option<usize>,
    noise_std: Option<f64>,
    controller: Option<ControllerSpec>,
    excited_input: Option<usize>,
    target: Option<Target>,
    methods: Option<Vec<EstimatorMethod>>,
    lpm: Option<LpmConfig>,
    sa_window_samples: Option<usize>,
    seeds: Option<SeedConfig>,
    summary_band_hz: Option<[f64; 2]>,
    max_defect_fraction: Option<f64>,
    output_dir: Option<PathBuf>,
}

struct Defaults {
    period_s: f64,
    n_periods_total: usize,
    n_periods_used: usize,
    noise_std: f64,
    target: Target,
    methods: Vec<EstimatorMethod>,
    lpm: LpmConfig,
}

fn defaults(kind: ScenarioKind) -> Defaults {
    use EstimatorMethod::*;
    match kind {
        ScenarioKind::TransientStudy => Defaults {
            period_s: 5.0,
            n_periods_total: 2,
            n_periods_used: 2,
            noise_std: 1e-3,
            target: Target::Sensitivity,
            methods: vec![SaRect, SaHann, Lpm],
            // Narrowest quadratic window; wider ones lose to interpolation
            // error near the slow closed-loop poles on a 0.1 Hz grid.
            lpm: LpmConfig { poly_order: 2, half_width: 3, dof_margin: 1 },
        },
        ScenarioKind::ClosedLoopSisoBias => Defaults {
            period_s: 1.0,
            n_periods_total: 210,
            n_periods_used: 200,
            noise_std: 0.5,
            target: Target::Plant,
            methods: vec![SaRect],
            lpm: LpmConfig::default_for(1),
        },
        ScenarioKind::MimoFullVsEquivalent => Defaults {
            period_s: 5.0,
            n_periods_total: 8,
            n_periods_used: 2,
            noise_std: 0.0,
            target: Target::Plant,
            methods: vec![SaRect],
            lpm: LpmConfig::default_for(1),
        },
        ScenarioKind::Custom => Defaults {
            period_s: 5.0,
            n_periods_total: 2,
            n_periods_used: 2,
            noise_std: 0.0,
            target: Target::Sensitivity,
            methods: vec![SaRect, SaHann, Lpm],
            lpm: LpmConfig::default_for(1),
        },
    }
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> FrfError {
    FrfError::Config(format!("{path}: {msg}"))
}

impl ScenarioConfig {
    /// Defaults for `kind` with nothing overridden.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let text = format!("{{\"scenario\": {}}}", serde_json::to_string(&kind).expect("enum serialises"));
        parse_config_str(&text, Path::new(".")).expect("defaults are valid")
    }

    fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<Self> {
        let d = defaults(raw.scenario);
        let fs = raw.fs.unwrap_or(1000.0);
        let ms = raw.multisine.unwrap_or(RawMultisine { period_s: None, rms: None, band_hz: None });
        let cfg = Self {
            scenario: raw.scenario,
            plant: raw.plant.unwrap_or(PlantSource::Builtin),
            fs,
            multisine: MultisineConfig {
                period_s: ms.period_s.unwrap_or(d.period_s),
                rms: ms.rms.unwrap_or(1.0),
                band_hz: ms.band_hz,
            },
            n_periods_total: raw.n_periods_total.unwrap_or(d.n_periods_total),
            n_periods_used: raw.n_periods_used.unwrap_or(d.n_periods_used),
            noise_std: raw.noise_std.unwrap_or(d.noise_std),
            controller: raw.controller.unwrap_or(ControllerSpec::DefaultLead),
            excited_input: raw.excited_input.unwrap_or(0),
            target: raw.target.unwrap_or(d.target),
            methods: raw.methods.unwrap_or(d.methods),
            lpm: raw.lpm.unwrap_or(d.lpm),
            sa_window_samples: 0,
            seeds: raw.seeds.unwrap_or(SeedConfig { phase: 1, noise: 2 }),
            summary_band_hz: raw.summary_band_hz.unwrap_or([0.4, 0.8 * fs / 2.0]),
            max_defect_fraction: raw.max_defect_fraction.unwrap_or(0.1),
            output_dir: raw.output_dir,
            base_dir: base_dir.to_path_buf(),
        };
        let mut cfg = cfg;
        if !(cfg.fs.is_finite() && cfg.fs > 0.0) {
            return Err(invalid("fs", "must be a positive number"));
        }
        cfg.sa_window_samples = match raw.sa_window_samples {
            Some(w) => w,
            None => cfg.period_samples()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Samples per multisine period, `period_s * fs`, which must be integral.
    pub fn period_samples(&self) -> Result<usize> {
        let p = self.multisine.period_s * self.fs;
        if !(p.is_finite() && p >= 4.0) {
            return Err(invalid("multisine.period_s", "period must cover at least 4 samples"));
        }
        let rounded = p.round();
        if (p - rounded).abs() > 1e-9 * rounded {
            return Err(invalid("multisine.period_s", format!("period_s * fs = {p} is not an integer")));
        }
        Ok(rounded as usize)
    }

    pub fn ts(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn discard_periods(&self) -> usize {
        self.n_periods_total - self.n_periods_used
    }

    /// Checks every invariant and reports the offending field.
    pub fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(invalid("fs", "must be a positive number"));
        }
        let p = self.period_samples()?;
        let nyq = self.fs / 2.0;
        if !(self.multisine.rms.is_finite() && self.multisine.rms > 0.0) {
            return Err(invalid("multisine.rms", "must be positive"));
        }
        if let Some([lo, hi]) = self.multisine.band_hz {
            if !(lo > 0.0 && lo < hi && hi < nyq) {
                return Err(invalid("multisine.band_hz", format!("need 0 < lo < hi < fs/2 = {nyq}")));
            }
            if self.excited_bins()?.is_empty() {
                return Err(invalid("multisine.band_hz", "band contains no grid frequency"));
            }
        }
        if self.n_periods_used == 0 {
            return Err(invalid("n_periods_used", "must be >= 1"));
        }
        if self.n_periods_used > self.n_periods_total {
            return Err(invalid(
                "n_periods_used",
                format!("{} exceeds n_periods_total = {}", self.n_periods_used, self.n_periods_total),
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(invalid("noise_std", "must be finite and >= 0"));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "at least one estimator required"));
        }
        self.lpm.validate(1).map_err(|e| invalid("lpm", e))?;
        let used = self.n_periods_used * p;
        if self.sa_window_samples < 2 || self.sa_window_samples > used {
            return Err(invalid("sa_window_samples", format!("must lie in 2..={used}")));
        }
        let [lo, hi] = self.summary_band_hz;
        if !(lo >= 0.0 && lo < hi && hi <= nyq) {
            return Err(invalid("summary_band_hz", format!("need 0 <= lo < hi <= fs/2 = {nyq}")));
        }
        if !(0.0..=1.0).contains(&self.max_defect_fraction) {
            return Err(invalid("max_defect_fraction", "must lie in [0, 1]"));
        }
        if let ControllerSpec::Loops(l) = &self.controller {
            if l.is_empty() {
                return Err(invalid("controller.loops", "must not be empty"));
            }
        }
        Ok(())
    }

    /// Excited harmonics of the period grid.
    pub fn excited_bins(&self) -> Result<Vec<usize>> {
        let p = self.period_samples()?;
        let all = 1..p / 2;
        Ok(match self.multisine.band_hz {
            None => all.collect(),
            Some([lo, hi]) => {
                let df = self.fs / p as f64;
                all.filter(|&k| {
                    let f = k as f64 * df;
                    f >= lo && f <= hi
                })
                .collect()
            }
        })
    }

    /// Plant path resolved against the config directory.
    pub fn plant_path(&self) -> Option<PathBuf> {
        match &self.plant {
            PlantSource::Builtin => None,
            PlantSource::Json(p) if p.is_absolute() => Some(p.clone()),
            PlantSource::Json(p) => Some(self.base_dir.join(p)),
        }
    }
}

/// Parses and validates a JSON config; unknown keys are rejected.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| FrfError::Config(format!("config: {e}")))?;
    ScenarioConfig::from_raw(raw, base_dir)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| FrfError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}
