//! Ground-truth plant models, time simulation and analytic oracles.

mod controller;
mod model;
mod oracle;
mod simulate;

pub use controller::{ControllerConfig, DiscreteTf};
pub use model::{discretize_zoh, two_mass_plant, StateSpaceModel, TimeDomain};
pub use oracle::{
    closed_loop_model, equivalent_plant_oracle, frequency_response, input_sensitivity, transient_oracle, true_frf,
};
pub use simulate::{lsim, simulate_closed_loop, simulate_closed_loop_from, SimulationRecord};
