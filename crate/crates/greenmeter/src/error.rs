use thiserror::Error;

#[derive(Debug, Error)]
pub enum GreenError {
    #[error("component {0} has a single sample; need at least 2 to integrate")]
    SingleSample(String),
    #[error("component {component} has negative watts {watts} at t={timestamp}")]
    NegativeWatts {
        component: String,
        watts: f64,
        timestamp: f64,
    },
    #[error("component {component} has non-finite watts at t={timestamp}")]
    NonFiniteWatts { component: String, timestamp: f64 },
    #[error("component {component} timestamps decrease at t={timestamp}")]
    NonMonotonic { component: String, timestamp: f64 },
    #[error("invalid component {0:?}; expected cpu, dram, or gpu:<index>")]
    InvalidComponent(String),
    #[error("negative energy {0} kWh")]
    NegativeEnergy(f64),
    #[error("negative {name}: {value}")]
    NegativeInput { name: &'static str, value: f64 },
    #[error("config field {0} must be strictly positive and finite")]
    InvalidConfig(&'static str),
    #[error("no samples given")]
    NoSamples,
    #[error("sample csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
