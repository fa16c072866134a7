use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Time function driving an independent source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceWaveform {
    Dc {
        value: f64,
    },
    /// `amplitude * sin(2*pi*frequency*t + phase) + offset`, phase in radians.
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Piecewise-linear table of `[t, value]` points; held constant outside.
    Pwl {
        points: Vec<[f64; 2]>,
    },
}

impl SourceWaveform {
    pub fn value(&self, t: f64) -> f64 {
        let mut out = [0.0];
        self.derivatives(t, &mut out);
        out[0]
    }

    /// Writes the value and the first `out.len() - 1` time derivatives at `t`.
    ///
    /// PWL tables are right-continuous: at a breakpoint the outgoing segment's
    /// slope is used.
    pub fn derivatives(&self, t: f64, out: &mut [f64]) {
        match self {
            SourceWaveform::Dc { value } => {
                out.fill(0.0);
                if let Some(v) = out.first_mut() {
                    *v = *value;
                }
            }
            SourceWaveform::Sine {
                amplitude,
                frequency,
                phase,
                offset,
            } => {
                let w = 2.0 * PI * frequency;
                let theta = w * t + phase;
                let (s, c) = theta.sin_cos();
                let mut scale = *amplitude;
                for (i, slot) in out.iter_mut().enumerate() {
                    let base = match i % 4 {
                        0 => s,
                        1 => c,
                        2 => -s,
                        _ => -c,
                    };
                    *slot = scale * base;
                    scale *= w;
                }
                if let Some(v) = out.first_mut() {
                    *v += offset;
                }
            }
            SourceWaveform::Pwl { points } => {
                out.fill(0.0);
                if points.is_empty() || out.is_empty() {
                    return;
                }
                let first = points[0];
                let last = points[points.len() - 1];
                if t < first[0] {
                    out[0] = first[1];
                    return;
                }
                if t >= last[0] {
                    out[0] = last[1];
                    return;
                }
                // Last segment whose start is <= t.
                let j = points.partition_point(|p| p[0] <= t) - 1;
                let (p0, p1) = (points[j], points[j + 1]);
                let slope = (p1[1] - p0[1]) / (p1[0] - p0[0]);
                out[0] = p0[1] + slope * (t - p0[0]);
                if out.len() > 1 {
                    out[1] = slope;
                }
            }
        }
    }

    /// Times in `(t0, t1)` where the waveform is not smooth.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        match self {
            SourceWaveform::Pwl { points } => points
                .iter()
                .map(|p| p[0])
                .filter(|&t| t > t0 && t < t1)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match self {
            SourceWaveform::Dc { value } if !value.is_finite() => Err("non-finite dc value".into()),
            SourceWaveform::Sine {
                amplitude,
                frequency,
                phase,
                offset,
            } => {
                if ![amplitude, frequency, phase, offset]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return Err("non-finite sine parameter".into());
                }
                if *frequency < 0.0 {
                    return Err("negative sine frequency".into());
                }
                Ok(())
            }
            SourceWaveform::Pwl { points } => {
                if points.is_empty() {
                    return Err("empty pwl table".into());
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err("pwl times must be strictly increasing".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_derivatives_cycle() {
        let s = SourceWaveform::Sine {
            amplitude: 2.0,
            frequency: 1.0 / (2.0 * PI),
            phase: 0.0,
            offset: 1.0,
        };
        let mut d = [0.0; 5];
        s.derivatives(0.3, &mut d);
        let (sn, cs) = 0.3f64.sin_cos();
        let want = [2.0 * sn + 1.0, 2.0 * cs, -2.0 * sn, -2.0 * cs, 2.0 * sn];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn pwl_holds_and_interpolates() {
        let p = SourceWaveform::Pwl {
            points: vec![[1.0, 0.0], [2.0, 4.0], [3.0, 4.0]],
        };
        assert_eq!(p.value(0.0), 0.0);
        assert_eq!(p.value(1.5), 2.0);
        assert_eq!(p.value(9.0), 4.0);
        let mut d = [0.0; 3];
        p.derivatives(1.0, &mut d);
        assert_eq!(d, [0.0, 4.0, 0.0]);
        assert_eq!(p.breakpoints(0.0, 2.5), vec![1.0, 2.0]);
    }
}
