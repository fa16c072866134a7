use super::PassiveMonitor;
use crate::solver::DerivativeStack;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingReport {
    /// Absolute event time.
    pub t: f64,
    /// Event time relative to the start of the step.
    pub offset: f64,
    pub iterations: u32,
    /// `|y(t) - threshold|`.
    pub residual: f64,
}

const MAX_ITER: u32 = 50;
const TIME_TOL: f64 = 1e-15;
/// Interior samples used to find the first directed sign change in a step.
const SAMPLES: usize = 8;

/// Taylor polynomial of output `idx` evaluated `dt` after the stack time.
pub fn output_poly_eval(stack: &DerivativeStack, idx: usize, dt: f64) -> Result<f64> {
    let q = stack.y.first().map_or(0, |y| y.len());
    if idx >= q {
        return Err(Error::Dimension(format!(
            "output index {idx} out of range (q = {q})"
        )));
    }
    Ok(poly(stack, idx, dt))
}

fn poly(stack: &DerivativeStack, idx: usize, dt: f64) -> f64 {
    let p = stack.order();
    let mut acc = stack.y[p][idx];
    for i in (0..p).rev() {
        acc = acc * dt / (i + 1) as f64 + stack.y[i][idx];
    }
    acc
}

/// Earliest crossing of the monitor threshold in its armed direction within
/// `[0, dt_step]`, or `None`.
///
/// A monitor that starts on the crossed side and keeps moving away reports
/// a crossing at the start of the step.
pub fn locate_crossing(
    stack: &DerivativeStack,
    monitor: &PassiveMonitor,
    dt_step: f64,
) -> Result<Option<CrossingReport>> {
    let idx = monitor.output;
    output_poly_eval(stack, idx, 0.0)?;
    let phi = |tau: f64| monitor.signed(poly(stack, idx, tau));
    let tol = monitor.residual_tol();
    let report = |offset: f64, iterations: u32, residual: f64| CrossingReport {
        t: stack.t + offset,
        offset,
        iterations,
        residual,
    };

    let f0 = phi(0.0);
    if f0 >= 0.0 && phi(dt_step / SAMPLES as f64) > f0 {
        return Ok(Some(report(0.0, 0, f0)));
    }
    let (mut lo, mut flo) = (0.0, f0);
    for j in 1..=SAMPLES {
        let hi = if j == SAMPLES {
            dt_step
        } else {
            dt_step * j as f64 / SAMPLES as f64
        };
        let fhi = phi(hi);
        if flo < 0.0 && fhi >= 0.0 {
            return refine(&phi, lo, flo, hi, fhi, tol, monitor.diode)
                .map(|(t, it, r)| Some(report(t, it, r)));
        }
        lo = hi;
        flo = fhi;
    }
    Ok(None)
}

/// Secant iteration on a bracket `flo < 0 <= fhi`, falling back to bisection
/// whenever an iterate leaves the bracket.
fn refine(
    phi: &impl Fn(f64) -> f64,
    lo: f64,
    flo: f64,
    hi: f64,
    fhi: f64,
    tol: f64,
    diode: usize,
) -> Result<(f64, u32, f64)> {
    if fhi == 0.0 {
        return Ok((hi, 0, 0.0));
    }
    let (mut l, mut h) = (lo, hi);
    let (mut a, mut fa, mut b, mut fb) = (lo, flo, hi, fhi);
    for it in 1..=MAX_ITER {
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > l && c < h) {
            c = 0.5 * (l + h);
        }
        let fc = phi(c);
        if fc.abs() <= tol {
            return Ok((c, it, fc.abs()));
        }
        if fc < 0.0 {
            l = c;
        } else {
            h = c;
        }
        (a, fa, b, fb) = (b, fb, c, fc);
        if h - l <= TIME_TOL {
            break;
        }
    }
    let fh = phi(h);
    if fh.abs() <= tol {
        return Ok((h, MAX_ITER, fh.abs()));
    }
    Err(Error::Crossing {
        diode,
        residual: fh.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::SwitchConfig;
    use crate::detect::{Direction, Watch};
    use nalgebra::DVector;

    fn stack(y: &[f64]) -> DerivativeStack {
        DerivativeStack {
            t: 10.0,
            config: SwitchConfig::new(0, 0),
            x: vec![DVector::zeros(0); y.len()],
            u: vec![DVector::zeros(0); y.len()],
            y: y.iter().map(|v| DVector::from_element(1, *v)).collect(),
        }
    }

    fn monitor(threshold: f64, direction: Direction) -> PassiveMonitor {
        PassiveMonitor {
            diode: 0,
            watch: Watch::CurrentZero,
            output: 0,
            threshold,
            direction,
        }
    }

    #[test]
    fn poly_eval() {
        let s = stack(&[1.0, -2.0, 0.0, 0.0]);
        assert_eq!(output_poly_eval(&s, 0, 0.25).unwrap(), 0.5);
        assert_eq!(output_poly_eval(&s, 0, 0.0).unwrap(), 1.0);
        assert!(output_poly_eval(&s, 1, 0.0).is_err());
    }

    #[test]
    fn linear_falling_crossing() {
        let s = stack(&[1.0, -2.0]);
        let r = locate_crossing(&s, &monitor(0.0, Direction::Falling), 1.0)
            .unwrap()
            .unwrap();
        assert!((r.offset - 0.5).abs() <= 1e-12 * 0.5);
        assert!(r.iterations <= 2);
        assert_eq!(r.t, 10.5);
    }

    #[test]
    fn linear_crossing_off_sample_grid() {
        let s = stack(&[1.0, -3.0]);
        let r = locate_crossing(&s, &monitor(0.0, Direction::Falling), 1.0)
            .unwrap()
            .unwrap();
        assert!((r.offset - 1.0 / 3.0).abs() <= 1e-12 / 3.0, "{r:?}");
        assert!(r.iterations <= 2);
    }

    #[test]
    fn no_crossing_when_moving_away() {
        let s = stack(&[1.0, 1.0]);
        assert!(locate_crossing(&s, &monitor(0.0, Direction::Falling), 1.0)
            .unwrap()
            .is_none());
        // Crossing in the wrong direction is ignored.
        let s = stack(&[-1.0, 2.0]);
        assert!(locate_crossing(&s, &monitor(0.0, Direction::Falling), 1.0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn rising_voltage_threshold_on_quadratic() {
        // y = t^2 crosses 0.7 at sqrt(0.7).
        let s = stack(&[0.0, 0.0, 2.0]);
        let r = locate_crossing(&s, &monitor(0.7, Direction::Rising), 1.0)
            .unwrap()
            .unwrap();
        assert!((r.offset - 0.7f64.sqrt()).abs() < 1e-9);
        assert!(r.residual <= 1e-9);
    }

    #[test]
    fn dip_inside_step_is_found() {
        // y = 1 - 4t + 4t^2 = (1 - 2t)^2 - small: dips below zero around t = 0.5.
        let s = stack(&[0.99, -4.0, 8.0]);
        let r = locate_crossing(&s, &monitor(0.0, Direction::Falling), 1.0)
            .unwrap()
            .unwrap();
        assert!(r.offset < 0.5 && r.offset > 0.4);
    }

    #[test]
    fn already_crossed_and_diverging_fires_immediately() {
        let s = stack(&[-1e-8, -1.0]);
        let r = locate_crossing(&s, &monitor(0.0, Direction::Falling), 1.0)
            .unwrap()
            .unwrap();
        assert_eq!(r.offset, 0.0);
    }
}
