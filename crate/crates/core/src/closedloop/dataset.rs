use crate::error::{FrfError, Result};
use crate::estimators::{lpm_fit, power_spectra, spectral_analysis, FrfEstimate, LpmConfig};
use crate::scalar::Real;
use crate::signals::{SpectrumSet, TimeSeries, WindowKind};
use crate::sim::{ControllerConfig, SimulationRecord};

/// Excitation, plant input and measured output of one closed-loop experiment.
#[derive(Debug, Clone)]
pub struct ClosedLoopDataset<T: Real> {
    d: TimeSeries<T>,
    u: TimeSeries<T>,
    y: TimeSeries<T>,
    excited_input_index: usize,
    controller: ControllerConfig<T>,
}

impl<T: Real> ClosedLoopDataset<T> {
    pub fn new(
        d: TimeSeries<T>,
        u: TimeSeries<T>,
        y: TimeSeries<T>,
        excited_input_index: usize,
        controller: ControllerConfig<T>,
    ) -> Result<Self> {
        if d.len() != u.len() || d.len() != y.len() {
            return Err(FrfError::Dimension("d, u and y must have equal length".into()));
        }
        if d.ts() != u.ts() || d.ts() != y.ts() {
            return Err(FrfError::Dimension("d, u and y must share ts".into()));
        }
        if d.n_channels() != u.n_channels() || controller.n_loops() != u.n_channels() {
            return Err(FrfError::Dimension("one excitation channel and controller loop per plant input".into()));
        }
        if excited_input_index >= d.n_channels() {
            return Err(FrfError::InvalidArgument(format!(
                "excited_input_index {excited_input_index} with {} inputs",
                d.n_channels()
            )));
        }
        Ok(Self { d, u, y, excited_input_index, controller })
    }

    pub fn from_record(
        rec: &SimulationRecord<T>,
        excited_input_index: usize,
        controller: ControllerConfig<T>,
    ) -> Result<Self> {
        Self::new(rec.d.clone(), rec.u.clone(), rec.y.clone(), excited_input_index, controller)
    }

    pub fn d(&self) -> &TimeSeries<T> {
        &self.d
    }

    pub fn u(&self) -> &TimeSeries<T> {
        &self.u
    }

    pub fn y(&self) -> &TimeSeries<T> {
        &self.y
    }

    pub fn excited_input_index(&self) -> usize {
        self.excited_input_index
    }

    pub fn controller(&self) -> &ControllerConfig<T> {
        &self.controller
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Samples `start..start + len` of all three signals.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        Ok(Self {
            d: self.d.slice(start, len)?,
            u: self.u.slice(start, len)?,
            y: self.y.slice(start, len)?,
            excited_input_index: self.excited_input_index,
            controller: self.controller.clone(),
        })
    }
}

/// Open-loop estimator applied to an input/output pair of time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpenLoopEstimator {
    /// Non-overlapping windows of `window_length` samples.
    SpectralAnalysis { window_length: usize, window: WindowKind },
    /// One rectangular window spanning the whole record.
    Lpm(LpmConfig),
}

impl OpenLoopEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SpectralAnalysis { window: WindowKind::Rectangular, .. } => "sa_rect",
            Self::SpectralAnalysis { window: WindowKind::Hann, .. } => "sa_hann",
            Self::Lpm(_) => "lpm",
        }
    }

    pub(crate) fn notes(&self) -> Vec<String> {
        match self {
            Self::SpectralAnalysis { window_length, window } => {
                vec![format!("window={window:?}, length={window_length}")]
            }
            Self::Lpm(c) => vec![format!("R={}, n_w={}, dof_margin={}", c.poly_order, c.half_width, c.dof_margin)],
        }
    }

    /// Estimate of the map `x -> y`.
    pub fn estimate<T: Real>(&self, x: &TimeSeries<T>, y: &TimeSeries<T>) -> Result<FrfEstimate<T>> {
        match *self {
            Self::SpectralAnalysis { window_length, window } => {
                let xs = SpectrumSet::from_series(x, window_length, 0.0, window)?;
                let ys = SpectrumSet::from_series(y, window_length, 0.0, window)?;
                let mut est = spectral_analysis(&power_spectra(&xs, &ys)?)?;
                est.tag.name = self.name().into();
                Ok(est)
            }
            Self::Lpm(cfg) => {
                let xs = SpectrumSet::from_series(x, x.len(), 0.0, WindowKind::Rectangular)?;
                let ys = SpectrumSet::from_series(y, y.len(), 0.0, WindowKind::Rectangular)?;
                lpm_fit(&xs, &ys, &cfg)
            }
        }
    }
}
