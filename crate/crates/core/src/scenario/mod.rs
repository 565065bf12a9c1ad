//! Seeded end-to-end studies: configuration, execution and export.
//!
//! Every scenario is a pure function of its [`ScenarioConfig`]; all
//! randomness comes from the configured seeds.

mod config;
mod export;
mod run;

pub use config::{
    parse_config, parse_config_str, ControllerSpec, EstimatorMethod, MultisineConfig, PlantSource, ScenarioConfig,
    ScenarioKind, SeedConfig, Target,
};
pub use export::{export_report, summary_json};
pub use run::{run_scenario, BandStats, EstimateReport, ScenarioReport};
