use super::Waveform;
use crate::{Error, Result};

fn check_window(w: &Waveform, window: (f64, f64)) -> Result<()> {
    let (t1, t2) = window;
    let (a, b) = w.span().ok_or_else(|| Error::Analysis("empty waveform".into()))?;
    if !(t1 < t2) {
        return Err(Error::Analysis(format!("empty window [{t1:e}, {t2:e}]")));
    }
    if t1 < a || t2 > b {
        return Err(Error::Analysis(format!(
            "window [{t1:e}, {t2:e}] not covered by record [{a:e}, {b:e}]"
        )));
    }
    Ok(())
}

/// Samples inside the window, with interpolated values at both window edges.
fn clipped(w: &Waveform, col: usize, window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (t1, t2) = window;
    let mut out = vec![(t1, w.value_at(col, t1)?)];
    let lo = w.t.partition_point(|&t| t <= t1);
    let hi = w.t.partition_point(|&t| t < t2);
    out.extend((lo..hi).map(|i| (w.t[i], w.columns[col][i])));
    out.push((t2, w.value_at(col, t2)?));
    Ok(out)
}

/// Root mean square over the window by trapezoidal integration.
pub fn rms(w: &Waveform, signal: &str, window: (f64, f64)) -> Result<f64> {
    check_window(w, window)?;
    let pts = clipped(w, w.index(signal)?, window)?;
    let mut acc = 0.0;
    for p in pts.windows(2) {
        acc += 0.5 * (p[0].1 * p[0].1 + p[1].1 * p[1].1) * (p[1].0 - p[0].0);
    }
    Ok((acc / (window.1 - window.0)).sqrt())
}

/// Time-weighted mean over the window by trapezoidal integration.
pub fn mean(w: &Waveform, signal: &str, window: (f64, f64)) -> Result<f64> {
    check_window(w, window)?;
    let pts = clipped(w, w.index(signal)?, window)?;
    let acc: f64 = pts
        .windows(2)
        .map(|p| 0.5 * (p[0].1 + p[1].1) * (p[1].0 - p[0].0))
        .sum();
    Ok(acc / (window.1 - window.0))
}

/// Median spacing of the samples inside the window.
pub fn median_spacing(w: &Waveform, window: (f64, f64)) -> Option<f64> {
    let lo = w.t.partition_point(|&t| t < window.0);
    let hi = w.t.partition_point(|&t| t <= window.1);
    let mut d: Vec<f64> = w.t[lo..hi].windows(2).map(|p| p[1] - p[0]).collect();
    if d.is_empty() {
        return None;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    Some(*m)
}

/// Linear interpolation of column `col` onto increasing `grid` points inside the record.
pub fn resample(w: &Waveform, col: usize, grid: &[f64]) -> Vec<f64> {
    let (t, v) = (&w.t, &w.columns[col]);
    let mut j = 1;
    grid.iter()
        .map(|&g| {
            while j < t.len() - 1 && t[j] < g {
                j += 1;
            }
            let (t0, t1) = (t[j - 1], t[j]);
            if g <= t0 {
                v[j - 1]
            } else if g >= t1 {
                v[j]
            } else {
                v[j - 1] + (v[j] - v[j - 1]) * (g - t0) / (t1 - t0)
            }
        })
        .collect()
}

/// Uniform grid over the window with `n` intervals.
pub(crate) fn uniform_grid(window: (f64, f64), n: usize, include_end: bool) -> Vec<f64> {
    let len = window.1 - window.0;
    let count = if include_end { n + 1 } else { n };
    (0..count)
        .map(|j| {
            if include_end && j == n {
                window.1
            } else {
                window.0 + len * j as f64 / n as f64
            }
        })
        .collect()
}

/// `rms(test - reference) / rms(reference)` on a shared uniform grid whose
/// step is the smaller of the two median sample spacings.
pub fn relative_error(
    test: &Waveform,
    reference: &Waveform,
    signal: &str,
    window: (f64, f64),
) -> Result<f64> {
    check_window(test, window)?;
    check_window(reference, window)?;
    let (ct, cr) = (test.index(signal)?, reference.index(signal)?);
    let step = [median_spacing(test, window), median_spacing(reference, window)]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    let len = window.1 - window.0;
    let n = if step.is_finite() && step > 0.0 {
        ((len / step).ceil() as usize).max(1)
    } else {
        1
    };
    let grid = uniform_grid(window, n, true);
    let a = resample(test, ct, &grid);
    let b = resample(reference, cr, &grid);
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(&b) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    if den == 0.0 {
        return Err(Error::Analysis(format!(
            "reference '{signal}' has zero RMS in window"
        )));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(points: usize, periods: usize, amp: f64) -> Waveform {
        let mut w = Waveform::new(vec!["s".into()]);
        let n = points * periods;
        for j in 0..=n {
            let t = j as f64 / points as f64;
            w.push(t, &[amp * (2.0 * PI * t).sin()]);
        }
        w
    }

    #[test]
    fn sine_and_dc_rms() {
        let w = sine(1000, 2, 10.0);
        let r = rms(&w, "s", (0.0, 2.0)).unwrap();
        assert!((r / (10.0 / 2f64.sqrt()) - 1.0).abs() < 1e-3);
        let mut dc = Waveform::new(vec!["s".into()]);
        for j in 0..10 {
            dc.push(j as f64 * 0.1, &[5.0]);
        }
        assert!((rms(&dc, "s", (0.0, 0.9)).unwrap() - 5.0).abs() < 1e-14);
        assert!(rms(&dc, "s", (0.5, 0.5)).is_err());
    }

    #[test]
    fn mean_of_ramp_and_sine() {
        // Trapezoid rule is exact on a ramp: mean of t over [0.2, 0.8] is 0.5.
        let mut w = Waveform::new(vec!["s".into()]);
        for j in 0..=10 {
            w.push(j as f64 * 0.1, &[j as f64 * 0.1]);
        }
        assert!((mean(&w, "s", (0.2, 0.8)).unwrap() - 0.5).abs() < 1e-14);
        let s = sine(1000, 2, 3.0);
        assert!(mean(&s, "s", (0.0, 2.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn relative_error_basics() {
        let w = sine(200, 3, 1.0);
        assert_eq!(relative_error(&w, &w, "s", (0.0, 3.0)).unwrap(), 0.0);
        let mut scaled = w.clone();
        scaled.columns[0].iter_mut().for_each(|v| *v *= 1.01);
        let e = relative_error(&scaled, &w, "s", (0.0, 3.0)).unwrap();
        assert!((e - 0.01).abs() < 1e-12);
        let mut zero = w.clone();
        zero.columns[0].iter_mut().for_each(|v| *v = 0.0);
        assert!(relative_error(&w, &zero, "s", (0.0, 3.0)).is_err());
        assert!(relative_error(&w, &w, "s", (2.0, 4.0)).is_err());
    }
}
