//! Open-loop FRF estimators.

mod etfe;
mod frf;
mod lpm;
mod spectral;

pub use etfe::{average_then_divide, etfe, etfe_with_floor, DEFAULT_DIVISION_FLOOR};
pub use frf::{BinDefect, EstimatorTag, FrfEstimate};
pub use lpm::{lpm_edge_policy, lpm_fit, lpm_local_models, LocalModelTheta, LpmConfig};
pub(crate) use spectral::condition_number;
pub use spectral::{noise_covariance, power_spectra, spectral_analysis, PowerSpectra};

use crate::error::{FrfError, Result};
use crate::scalar::Real;
use crate::signals::SpectrumSet;

/// Input and output spectra must come from the same windows.
pub(crate) fn check_pair<T: Real>(u: &SpectrumSet<T>, y: &SpectrumSet<T>) -> Result<()> {
    if u.n_windows() != y.n_windows()
        || u.window_length() != y.window_length()
        || u.bin_frequencies() != y.bin_frequencies()
    {
        return Err(FrfError::Dimension("input and output spectra differ in windows or bins".into()));
    }
    Ok(())
}
