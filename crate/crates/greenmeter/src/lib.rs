//! Resource accounting for training runs: trapezoidal integration of
//! sampled component power into kWh (with a PUE multiplier), CO2 pounds,
//! and dollar cost.

pub mod error;
pub mod report;
pub mod sample;

pub use error::GreenError;
pub use report::{
    co2, cost, integrate_power, report, EnergyBreakdown, ResourceConfig, ResourceReport,
    DEFAULT_CO2_LBS_PER_KWH, DEFAULT_PUE,
};
pub use sample::{component_kind, read_samples_csv, PowerSample, SampleSink};
