//! Energy integration and the cost/CO2 arithmetic behind the resource table.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::GreenError;
use crate::sample::{component_kind, validate_component, PowerSample};

pub const DEFAULT_PUE: f64 = 1.58;
pub const DEFAULT_CO2_LBS_PER_KWH: f64 = 0.954;
const JOULES_PER_KWH: f64 = 3.6e6;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResourceConfig {
    pub pue: f64,
    pub co2_lbs_per_kwh: f64,
    pub usd_per_hour: f64,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        ResourceConfig {
            pue: DEFAULT_PUE,
            co2_lbs_per_kwh: DEFAULT_CO2_LBS_PER_KWH,
            usd_per_hour: 0.0,
        }
    }
}

impl ResourceConfig {
    pub fn validate(&self) -> Result<(), GreenError> {
        for (name, v) in [
            ("pue", self.pue),
            ("co2_lbs_per_kwh", self.co2_lbs_per_kwh),
            ("usd_per_hour", self.usd_per_hour),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GreenError::InvalidConfig(name));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyBreakdown {
    /// Raw per-component kWh, before the PUE multiplier.
    pub components: BTreeMap<String, f64>,
    /// PUE × sum of components.
    pub total_kwh: f64,
    /// Hardware kinds (cpu/dram/gpu) with no samples at all.
    pub missing_kinds: Vec<String>,
}

/// Trapezoidal integration of each component's watt samples over seconds,
/// summed and scaled by PUE. Every contributing component needs at least
/// two samples; watts must be finite and non-negative; timestamps must not
/// decrease within a component.
pub fn integrate_power(samples: &[PowerSample], pue: f64) -> Result<EnergyBreakdown, GreenError> {
    if !(pue > 0.0 && pue.is_finite()) {
        return Err(GreenError::InvalidConfig("pue"));
    }
    let mut by_component: BTreeMap<&str, Vec<&PowerSample>> = BTreeMap::new();
    for s in samples {
        validate_component(&s.component)?;
        if !s.watts.is_finite() {
            return Err(GreenError::NonFiniteWatts {
                component: s.component.clone(),
                timestamp: s.timestamp,
            });
        }
        if s.watts < 0.0 {
            return Err(GreenError::NegativeWatts {
                component: s.component.clone(),
                watts: s.watts,
                timestamp: s.timestamp,
            });
        }
        by_component.entry(&s.component).or_default().push(s);
    }
    let mut components = BTreeMap::new();
    let mut raw_total = 0.0;
    for (name, series) in &by_component {
        if series.len() < 2 {
            return Err(GreenError::SingleSample(name.to_string()));
        }
        let mut joules = 0.0;
        for pair in series.windows(2) {
            let dt = pair[1].timestamp - pair[0].timestamp;
            if dt < 0.0 {
                return Err(GreenError::NonMonotonic {
                    component: name.to_string(),
                    timestamp: pair[1].timestamp,
                });
            }
            joules += dt * (pair[0].watts + pair[1].watts) / 2.0;
        }
        let kwh = joules / JOULES_PER_KWH;
        raw_total += kwh;
        components.insert(name.to_string(), kwh);
    }
    let missing_kinds = ["cpu", "dram", "gpu"]
        .iter()
        .filter(|kind| {
            !by_component
                .keys()
                .any(|name| component_kind(name) == **kind)
        })
        .map(|k| k.to_string())
        .collect();
    Ok(EnergyBreakdown {
        components,
        total_kwh: pue * raw_total,
        missing_kinds,
    })
}

pub fn co2(energy_kwh: f64, lbs_per_kwh: f64) -> Result<f64, GreenError> {
    if energy_kwh < 0.0 {
        return Err(GreenError::NegativeEnergy(energy_kwh));
    }
    Ok(lbs_per_kwh * energy_kwh)
}

/// Dollar cost of wall time. Callers pass non-negative inputs.
pub fn cost(wall_hours: f64, usd_per_hour: f64) -> f64 {
    wall_hours * usd_per_hour
}

#[derive(Clone, Debug, Serialize)]
pub struct ResourceReport {
    pub wall_hours: f64,
    pub energy_kwh: f64,
    pub co2_lbs: f64,
    pub cost_usd: f64,
    pub breakdown: BTreeMap<String, f64>,
    pub missing_kinds: Vec<String>,
    pub config: ResourceConfig,
}

pub fn report(
    samples: &[PowerSample],
    wall_hours: f64,
    config: &ResourceConfig,
) -> Result<ResourceReport, GreenError> {
    config.validate()?;
    if wall_hours < 0.0 {
        return Err(GreenError::NegativeInput {
            name: "wall_hours",
            value: wall_hours,
        });
    }
    if samples.is_empty() {
        return Err(GreenError::NoSamples);
    }
    let energy = integrate_power(samples, config.pue)?;
    Ok(ResourceReport {
        wall_hours,
        energy_kwh: energy.total_kwh,
        co2_lbs: co2(energy.total_kwh, config.co2_lbs_per_kwh)?,
        cost_usd: cost(wall_hours, config.usd_per_hour),
        breakdown: energy.components,
        missing_kinds: energy.missing_kinds,
        config: *config,
    })
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl ResourceReport {
    /// One table row: HW | Hours | Cost (whole dollars) | Power (kWh) | CO2
    /// (lbs), plus a notice for hardware kinds with no samples.
    pub fn render_row(&self, hw: &str) -> String {
        let mut out = String::from("HW\tHours\tCost\tPower\tCO2\n");
        out.push_str(&format!(
            "{}\t{}\t{:.0}\t{:.2}\t{:.2}\n",
            hw,
            self.wall_hours,
            self.cost_usd.round(),
            round2(self.energy_kwh),
            round2(self.co2_lbs),
        ));
        if !self.missing_kinds.is_empty() {
            out.push_str(&format!(
                "note: no samples for {}; omitted from Power\n",
                self.missing_kinds.join(", ")
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(component: &str, watts: f64, hours: f64, points: usize) -> Vec<PowerSample> {
        (0..points)
            .map(|i| {
                let t = hours * 3600.0 * i as f64 / (points - 1) as f64;
                PowerSample::new(t, component, watts)
            })
            .collect()
    }

    #[test]
    fn combined_components_with_pue() {
        // cpu 50W + dram 5W + gpu 300W over 10 h at PUE 1.58
        // = 1.58 * 355 * 10 / 1000 kWh.
        let mut samples = constant("cpu", 50.0, 10.0, 5);
        samples.extend(constant("dram", 5.0, 10.0, 3));
        samples.extend(constant("gpu:0", 300.0, 10.0, 11));
        let e = integrate_power(&samples, 1.58).unwrap();
        assert!((e.total_kwh - 5.609).abs() < 1e-9, "{}", e.total_kwh);
        assert!((e.components["cpu"] - 0.5).abs() < 1e-12);
        assert!((e.components["gpu:0"] - 3.0).abs() < 1e-12);
        assert!(e.missing_kinds.is_empty());
    }

    #[test]
    fn constant_power_equals_watts_times_duration() {
        for &(w, h) in &[(75.0, 3.5), (120.0, 56.0), (0.25, 1.0)] {
            let samples = constant("cpu", w, h, 7);
            let e = integrate_power(&samples, 1.0).unwrap();
            assert!(
                (e.total_kwh - w * h / 1000.0).abs() < 1e-9,
                "{w}W x {h}h -> {}",
                e.total_kwh
            );
        }
    }

    #[test]
    fn zero_watts_gives_zero_energy() {
        let e = integrate_power(&constant("gpu:0", 0.0, 4.0, 4), 1.58).unwrap();
        assert_eq!(e.total_kwh, 0.0);
    }

    #[test]
    fn pue_one_is_identity() {
        let samples = constant("cpu", 100.0, 2.0, 3);
        let raw = integrate_power(&samples, 1.0).unwrap().total_kwh;
        let scaled = integrate_power(&samples, 1.58).unwrap().total_kwh;
        assert!((raw - 0.2).abs() < 1e-12);
        assert!((scaled - 1.58 * raw).abs() < 1e-12);
    }

    #[test]
    fn single_sample_names_the_component() {
        let mut samples = constant("cpu", 50.0, 1.0, 4);
        samples.push(PowerSample::new(0.0, "gpu:1", 200.0));
        match integrate_power(&samples, 1.0) {
            Err(GreenError::SingleSample(c)) => assert_eq!(c, "gpu:1"),
            other => panic!("expected single-sample error, got {other:?}"),
        }
    }

    #[test]
    fn negative_watts_rejected() {
        let samples = vec![
            PowerSample::new(0.0, "cpu", 50.0),
            PowerSample::new(1.0, "cpu", -2.0),
        ];
        assert!(matches!(
            integrate_power(&samples, 1.0),
            Err(GreenError::NegativeWatts { .. })
        ));
    }

    #[test]
    fn decreasing_timestamps_rejected() {
        let samples = vec![
            PowerSample::new(5.0, "cpu", 50.0),
            PowerSample::new(1.0, "cpu", 50.0),
        ];
        assert!(matches!(
            integrate_power(&samples, 1.0),
            Err(GreenError::NonMonotonic { .. })
        ));
    }

    #[test]
    fn co2_table_rows_within_a_cent() {
        // Published power/CO2 column pairs, factor 0.954.
        for &(kwh, lbs) in &[(14.82, 14.14), (273.62, 261.04), (260.63, 248.64)] {
            let got = co2(kwh, DEFAULT_CO2_LBS_PER_KWH).unwrap();
            assert!((got - lbs).abs() <= 0.01 + 1e-12, "{kwh} -> {got} vs {lbs}");
        }
        assert_eq!(round2(co2(14.82, 0.954).unwrap()), 14.14);
        assert_eq!(round2(co2(0.094, 0.954).unwrap()), 0.09);
        assert_eq!(co2(0.0, 0.954).unwrap(), 0.0);
    }

    #[test]
    fn negative_energy_rejected() {
        assert!(matches!(
            co2(-1.0, 0.954),
            Err(GreenError::NegativeEnergy(_))
        ));
    }

    #[test]
    fn cost_rows() {
        assert!((cost(85.0, 24.48) - 2080.8).abs() < 1e-9);
        assert_eq!(cost(85.0, 24.48).round(), 2081.0);
        assert!((cost(80.0, 24.48) - 1958.4).abs() < 1e-9);
        assert_eq!(cost(80.0, 24.48).round(), 1958.0);
        assert_eq!(cost(0.0, 24.48), 0.0);
    }

    #[test]
    fn cvt_row_reconstruction() {
        // cpu 120W + dram 5.5W + gpu 42W for 56 h, PUE 1.58, 3.07 USD/h:
        // power 14.8204 -> 14.82 kWh, CO2 14.1387 -> 14.14 lbs, cost 171.92
        // -> 172 USD.
        let mut samples = constant("cpu", 120.0, 56.0, 9);
        samples.extend(constant("dram", 5.5, 56.0, 9));
        samples.extend(constant("gpu:0", 42.0, 56.0, 9));
        let cfg = ResourceConfig {
            usd_per_hour: 3.07,
            ..ResourceConfig::default()
        };
        let r = report(&samples, 56.0, &cfg).unwrap();
        assert!((r.energy_kwh - 14.8204).abs() < 1e-9);
        assert_eq!(round2(r.energy_kwh), 14.82);
        assert_eq!(round2(r.co2_lbs), 14.14);
        assert_eq!(r.cost_usd.round(), 172.0);
        let row = r.render_row("1 GPU, 1 CPU");
        assert!(row.contains("56\t172\t14.82\t14.14"), "{row}");
        assert!(!row.contains("note:"), "{row}");
    }

    #[test]
    fn missing_gpu_is_listed_not_imputed() {
        let mut samples = constant("cpu", 100.0, 2.0, 4);
        samples.extend(constant("dram", 10.0, 2.0, 4));
        let cfg = ResourceConfig {
            usd_per_hour: 1.0,
            ..ResourceConfig::default()
        };
        let r = report(&samples, 2.0, &cfg).unwrap();
        assert_eq!(r.missing_kinds, vec!["gpu".to_string()]);
        assert!(!r.breakdown.contains_key("gpu:0"));
        let row = r.render_row("CPU only");
        assert!(row.contains("note: no samples for gpu"), "{row}");
    }

    #[test]
    fn report_validates_config_and_inputs() {
        let samples = constant("cpu", 50.0, 1.0, 3);
        let bad = ResourceConfig {
            pue: 0.0,
            ..ResourceConfig::default()
        };
        assert!(matches!(
            report(&samples, 1.0, &bad),
            Err(GreenError::InvalidConfig("pue"))
        ));
        let cfg = ResourceConfig {
            usd_per_hour: 1.0,
            ..ResourceConfig::default()
        };
        assert!(matches!(
            report(&samples, -1.0, &cfg),
            Err(GreenError::NegativeInput { .. })
        ));
        assert!(matches!(report(&[], 1.0, &cfg), Err(GreenError::NoSamples)));
    }

    #[test]
    fn json_report_is_full_precision() {
        let samples = constant("cpu", 50.0, 10.0, 3);
        let cfg = ResourceConfig {
            usd_per_hour: 2.0,
            ..ResourceConfig::default()
        };
        let r = report(&samples, 10.0, &cfg).unwrap();
        let json = r.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["energy_kwh"].as_f64().unwrap(), r.energy_kwh);
        assert_eq!(v["breakdown"]["cpu"].as_f64().unwrap(), r.breakdown["cpu"]);
    }
}
