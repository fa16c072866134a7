use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sensor {
    pub probe: String,
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

/// Uniform bipolar quantizer with `2^bits` codes spanning `[-full_scale, full_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantizer {
    pub bits: u32,
    pub full_scale: f64,
}

impl Quantizer {
    pub fn step(&self) -> f64 {
        self.full_scale / (1u64 << (self.bits - 1)) as f64
    }

    pub fn apply(&self, v: f64) -> f64 {
        let half = (1i64 << (self.bits - 1)) as f64;
        let code = (v / self.step()).round().clamp(-half, half - 1.0);
        code * self.step()
    }
}

/// Sensors in controller input order; empty means every probe, unscaled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    #[serde(default)]
    pub sensors: Vec<Sensor>,
    #[serde(default)]
    pub quantizer: Option<Quantizer>,
}

/// Maps probe values to controller inputs.
pub fn sample_map(probe_names: &[String], values: &[f64], spec: &SensorSpec) -> Result<Vec<f64>> {
    let q = |v: f64| spec.quantizer.map_or(v, |qz| qz.apply(v));
    if spec.sensors.is_empty() {
        return Ok(values.iter().map(|&v| q(v)).collect());
    }
    spec.sensors
        .iter()
        .map(|s| {
            let i = probe_names
                .iter()
                .position(|p| *p == s.probe)
                .ok_or_else(|| Error::Scenario(format!("sensor references unknown probe '{}'", s.probe)))?;
            Ok(q(s.gain * values[i] + s.offset))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["v".into(), "i".into()]
    }

    #[test]
    fn identity_and_gain() {
        let spec = SensorSpec::default();
        assert_eq!(
            sample_map(&names(), &[3.0, 100.0], &spec).unwrap(),
            vec![3.0, 100.0]
        );
        let spec = SensorSpec {
            sensors: vec![Sensor {
                probe: "i".into(),
                gain: 0.01,
                offset: 0.0,
            }],
            quantizer: None,
        };
        assert_eq!(sample_map(&names(), &[3.0, 100.0], &spec).unwrap(), vec![1.0]);
    }

    #[test]
    fn unknown_probe() {
        let spec = SensorSpec {
            sensors: vec![Sensor {
                probe: "x".into(),
                gain: 1.0,
                offset: 0.0,
            }],
            quantizer: None,
        };
        assert!(sample_map(&names(), &[0.0, 0.0], &spec).is_err());
    }

    #[test]
    fn twelve_bit_quantizer() {
        let qz = Quantizer {
            bits: 12,
            full_scale: 1000.0,
        };
        let step = 1000.0 / 2048.0;
        let got = qz.apply(399.9);
        assert_eq!(got, (399.9f64 / step).round() * step);
        assert!((got - 399.9).abs() <= step / 2.0);
        assert_eq!(qz.apply(5000.0), 2047.0 * step);
    }
}
