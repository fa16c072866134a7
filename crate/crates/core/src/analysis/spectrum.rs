use std::f64::consts::PI;
use std::io::Write;

use rustfft::{num_complex::Complex, FftPlanner};

use super::metrics::{median_spacing, resample, uniform_grid};
use super::Waveform;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taper {
    Hann,
    Rectangular,
}

/// One-sided spectrum of a uniformly resampled, tapered signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freq: Vec<f64>,
    /// Amplitude-calibrated magnitude: a sine of amplitude A centred on a bin reads A.
    pub magnitude: Vec<f64>,
    /// One-sided share of `sum |X_k|^2 / N`; sums to `windowed_energy`.
    pub power: Vec<f64>,
    /// `sum (w_j x_j)^2` of the tapered samples.
    pub windowed_energy: f64,
    pub bin_width: f64,
}

impl Spectrum {
    pub fn peak_frequency(&self) -> f64 {
        let (k, _) = self
            .magnitude
            .iter()
            .enumerate()
            .skip(1)
            .fold(
                (0, f64::MIN),
                |best, (k, &m)| if m > best.1 { (k, m) } else { best },
            );
        self.freq[k]
    }

    /// Mean magnitude over bins with frequency in `[lo, hi)`.
    pub fn band_mean(&self, lo: f64, hi: f64) -> f64 {
        let (sum, n) = self
            .freq
            .iter()
            .zip(&self.magnitude)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .fold((0.0, 0usize), |(s, n), (_, m)| (s + m, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// `freq_hz,magnitude` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "freq_hz,magnitude")?;
        for (f, m) in self.freq.iter().zip(&self.magnitude) {
            writeln!(w, "{f:.16e},{m:.16e}")?;
        }
        Ok(())
    }
}

pub fn fft_spectrum(w: &Waveform, signal: &str, window: (f64, f64), bins: usize) -> Result<Spectrum> {
    fft_spectrum_with(w, signal, window, bins, Taper::Hann)
}

pub fn fft_spectrum_with(
    w: &Waveform,
    signal: &str,
    window: (f64, f64),
    bins: usize,
    taper: Taper,
) -> Result<Spectrum> {
    if bins < 2 || !bins.is_power_of_two() {
        return Err(Error::Analysis(format!(
            "bins = {bins} must be a power of two >= 2"
        )));
    }
    let col = w.index(signal)?;
    let (a, b) = w.span().ok_or_else(|| Error::Analysis("empty waveform".into()))?;
    let len = window.1 - window.0;
    if !(len > 0.0) || window.0 < a || window.1 > b {
        return Err(Error::Analysis(format!(
            "window [{:e}, {:e}] not covered by record",
            window.0, window.1
        )));
    }
    let spacing = median_spacing(w, window).unwrap_or(f64::INFINITY);
    if len < bins as f64 * spacing * (1.0 - 1e-9) {
        return Err(Error::Analysis(format!(
            "window too short: {len:e} s < {bins} bins x {spacing:e} s sample spacing"
        )));
    }
    let grid = uniform_grid(window, bins, false);
    let x = resample(w, col, &grid);
    let n = bins as f64;
    let taper_at = |j: usize| match taper {
        Taper::Hann => 0.5 * (1.0 - (2.0 * PI * j as f64 / n).cos()),
        Taper::Rectangular => 1.0,
    };
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .enumerate()
        .map(|(j, v)| Complex::new(v * taper_at(j), 0.0))
        .collect();
    let windowed_energy = buf.iter().map(|c| c.re * c.re).sum();
    let coherent_gain: f64 = (0..bins).map(taper_at).sum();
    FftPlanner::new().plan_fft_forward(bins).process(&mut buf);

    let half = bins / 2;
    let mut freq = Vec::with_capacity(half + 1);
    let mut magnitude = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for (k, c) in buf.iter().take(half + 1).enumerate() {
        let edge = k == 0 || k == half;
        let fold = if edge { 1.0 } else { 2.0 };
        freq.push(k as f64 / len);
        magnitude.push(fold * c.norm() / coherent_gain);
        power.push(fold * c.norm_sqr() / n);
    }
    Ok(Spectrum {
        freq,
        magnitude,
        power,
        windowed_energy,
        bin_width: 1.0 / len,
    })
}
