//! Power samples and their sources.

use std::io::Read;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::GreenError;

/// One power reading. `component` is `cpu`, `dram`, or `gpu:<index>`.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct PowerSample {
    pub timestamp: f64,
    pub component: String,
    pub watts: f64,
}

impl PowerSample {
    pub fn new(timestamp: f64, component: &str, watts: f64) -> Self {
        PowerSample {
            timestamp,
            component: component.to_string(),
            watts,
        }
    }
}

pub(crate) fn validate_component(name: &str) -> Result<(), GreenError> {
    let ok = match name {
        "cpu" | "dram" => true,
        _ => match name.strip_prefix("gpu:") {
            Some(idx) => !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()),
            None => false,
        },
    };
    if ok {
        Ok(())
    } else {
        Err(GreenError::InvalidComponent(name.to_string()))
    }
}

/// `cpu`, `dram`, or `gpu` (index stripped) — the grouping used when
/// reporting which hardware kinds contributed samples.
pub fn component_kind(name: &str) -> &str {
    if name.starts_with("gpu:") {
        "gpu"
    } else {
        name
    }
}

/// Reads `timestamp,component,watts` CSV (header required).
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<PowerSample>, GreenError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<PowerSample>() {
        let s = row?;
        validate_component(&s.component)?;
        out.push(s);
    }
    Ok(out)
}

/// Append-only sink a sampler thread can feed while training runs
/// elsewhere; reports read a frozen snapshot.
#[derive(Clone, Default)]
pub struct SampleSink {
    inner: Arc<Mutex<Vec<PowerSample>>>,
}

impl SampleSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, sample: PowerSample) {
        self.inner.lock().unwrap().push(sample);
    }

    pub fn snapshot(&self) -> Vec<PowerSample> {
        self.inner.lock().unwrap().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let csv = "timestamp,component,watts\n0,cpu,50\n0,gpu:0,300\n3600.5,cpu,52.5\n";
        let samples = read_samples_csv(csv.as_bytes()).unwrap();
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[1], PowerSample::new(0.0, "gpu:0", 300.0));
        assert_eq!(samples[2].timestamp, 3600.5);
    }

    #[test]
    fn bad_component_is_rejected() {
        let csv = "timestamp,component,watts\n0,tpu,50\n";
        match read_samples_csv(csv.as_bytes()) {
            Err(GreenError::InvalidComponent(c)) => assert_eq!(c, "tpu"),
            other => panic!("expected invalid component, got {other:?}"),
        }
        assert!(validate_component("gpu:").is_err());
        assert!(validate_component("gpu:x").is_err());
        assert!(validate_component("gpu:12").is_ok());
    }

    #[test]
    fn malformed_csv_is_an_error() {
        let csv = "timestamp,component,watts\nnot-a-number,cpu,50\n";
        assert!(matches!(
            read_samples_csv(csv.as_bytes()),
            Err(GreenError::Csv(_))
        ));
    }

    #[test]
    fn sink_snapshot_sees_appends_in_order() {
        let sink = SampleSink::new();
        let writer = sink.clone();
        let handle = std::thread::spawn(move || {
            for i in 0..100 {
                writer.record(PowerSample::new(i as f64, "cpu", 50.0));
            }
        });
        handle.join().unwrap();
        let snap = sink.snapshot();
        assert_eq!(snap.len(), 100);
        assert!(snap.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn kind_strips_gpu_index() {
        assert_eq!(component_kind("gpu:3"), "gpu");
        assert_eq!(component_kind("cpu"), "cpu");
        assert_eq!(component_kind("dram"), "dram");
    }
}
