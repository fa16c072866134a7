use serde::Serialize;

use super::Waveform;
use crate::circuit::SwitchConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatterIndex {
    /// `(sign alternations, peak |value|)` per interval.
    pub per_interval: Vec<(usize, f64)>,
    pub alternations: usize,
    pub max_amplitude: f64,
}

/// Counts sign changes (zeros skipped) and the peak magnitude of `signal`
/// over the samples inside each interval.
pub fn chattering_index(w: &Waveform, signal: &str, intervals: &[(f64, f64)]) -> Result<ChatterIndex> {
    let v = w.signal(signal)?;
    let mut per_interval = Vec::with_capacity(intervals.len());
    for &(a, b) in intervals {
        let lo = w.t.partition_point(|&t| t < a);
        let hi = w.t.partition_point(|&t| t <= b);
        let mut last_sign = 0.0;
        let mut count = 0;
        let mut peak = 0.0f64;
        for &x in &v[lo..hi] {
            peak = peak.max(x.abs());
            if x != 0.0 {
                let s = x.signum();
                if last_sign != 0.0 && s != last_sign {
                    count += 1;
                }
                last_sign = s;
            }
        }
        per_interval.push((count, peak));
    }
    Ok(ChatterIndex {
        alternations: per_interval.iter().map(|p| p.0).sum(),
        max_amplitude: per_interval.iter().map(|p| p.1).fold(0.0, f64::max),
        per_interval,
    })
}

/// Spans where every diode is blocked, from a time-ordered mode history.
pub fn blocked_spans(history: &[(f64, SwitchConfig)], t_end: f64) -> Vec<(f64, f64)> {
    let mut spans = Vec::new();
    let mut start: Option<f64> = None;
    for &(t, cfg) in history {
        let blocked = cfg.diode_bits() == 0;
        match (blocked, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                if t > s {
                    spans.push((s, t));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if t_end > s {
            spans.push((s, t_end));
        }
    }
    spans
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcmColumn {
    pub id: String,
    pub errors: Vec<f64>,
    pub mean_abs: f64,
    /// `mean_abs / mean_abs(reference run)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcmTable {
    pub probe: String,
    pub times: Vec<f64>,
    pub reference: String,
    pub columns: Vec<DcmColumn>,
}

/// Absolute differences against the oracle at the sample times, per run.
pub fn dcm_error_table(
    runs: &[(&str, &Waveform)],
    oracle: &Waveform,
    probe: &str,
    times: &[f64],
    reference: &str,
) -> Result<DcmTable> {
    if times.is_empty() {
        return Err(Error::Analysis("no sample times for the error table".into()));
    }
    let oc = oracle.index(probe)?;
    let truth: Vec<f64> = times
        .iter()
        .map(|&t| oracle.value_at(oc, t))
        .collect::<Result<_>>()?;
    let mut columns = Vec::with_capacity(runs.len());
    for (id, w) in runs {
        let c = w.index(probe)?;
        let errors: Vec<f64> = times
            .iter()
            .zip(&truth)
            .map(|(&t, &o)| Ok((w.value_at(c, t)? - o).abs()))
            .collect::<Result<_>>()?;
        let mean_abs = errors.iter().sum::<f64>() / errors.len() as f64;
        columns.push(DcmColumn {
            id: id.to_string(),
            errors,
            mean_abs,
            ratio: f64::NAN,
        });
    }
    let base = columns
        .iter()
        .find(|c| c.id == reference)
        .map(|c| c.mean_abs)
        .ok_or_else(|| Error::Analysis(format!("reference run '{reference}' not in table")))?;
    for c in &mut columns {
        c.ratio = c.mean_abs / base;
    }
    Ok(DcmTable {
        probe: probe.to_string(),
        times: times.to_vec(),
        reference: reference.to_string(),
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> Waveform {
        let mut w = Waveform::new(vec!["i".into()]);
        for (j, v) in values.iter().enumerate() {
            w.push(j as f64, &[*v]);
        }
        w
    }

    #[test]
    fn counting() {
        let zero = series(&[0.0; 10]);
        let c = chattering_index(&zero, "i", &[(0.0, 9.0)]).unwrap();
        assert_eq!((c.alternations, c.max_amplitude), (0, 0.0));
        let alt: Vec<f64> = (0..10).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c = chattering_index(&series(&alt), "i", &[(0.0, 9.0)]).unwrap();
        assert_eq!((c.alternations, c.max_amplitude), (9, 1.0));
    }

    #[test]
    fn spans_from_history() {
        let on = SwitchConfig::new(0, 2).with_diode(0, true);
        let off = SwitchConfig::new(0, 2);
        let h = [(0.0, on), (1.0, off), (2.0, on), (3.0, off)];
        assert_eq!(blocked_spans(&h, 5.0), vec![(1.0, 2.0), (3.0, 5.0)]);
    }

    #[test]
    fn table_of_identical_runs_is_zero() {
        let w = series(&[1.0, 2.0, 3.0]);
        let t = dcm_error_table(&[("es", &w), ("fe", &w)], &w, "i", &[0.5, 1.5], "es").unwrap();
        assert!(t.columns.iter().all(|c| c.mean_abs == 0.0));
    }
}
