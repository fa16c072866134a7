use nalgebra::DVector;

use super::stack::taylor_advance_into;
use super::{adapt_step, estimate_lte, DerivativeStack, StepControl};
use crate::circuit::{InputSource, LtiModel};
use crate::detect::{locate_crossing, CrossingReport, PassiveMonitor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Terminal {
    ReachedBarrier,
    /// Earliest located crossing; ties within the time tolerance are all listed.
    PassiveEvent {
        t: f64,
        fired: Vec<(usize, CrossingReport)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationOutcome {
    pub terminal: Terminal,
    pub x_end: DVector<f64>,
    pub t_end: f64,
    pub ctrl: StepControl,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub calls: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub crossings: u64,
}

const TIE_TOL: f64 = 1e-15;

/// Receives the accepted trajectory.
pub trait Recorder {
    fn record(&mut self, t: f64, x: &DVector<f64>);

    /// Spacing of extra rows evaluated on the Taylor polynomial inside each
    /// accepted step, on the grid `j * spacing`.
    fn dense_step(&self) -> Option<f64> {
        None
    }
}

impl<F: FnMut(f64, &DVector<f64>)> Recorder for F {
    fn record(&mut self, t: f64, x: &DVector<f64>) {
        self(t, x)
    }
}

fn dense_rows(
    rec: &mut dyn Recorder,
    stack: &DerivativeStack,
    t: f64,
    t_next: f64,
    scratch: &mut DVector<f64>,
) {
    let Some(h) = rec.dense_step() else { return };
    let mut j = (t / h).floor() as i64 + 1;
    loop {
        let tj = j as f64 * h;
        if tj >= t_next {
            break;
        }
        if tj > t {
            taylor_advance_into(stack, tj - t, scratch);
            rec.record(tj, scratch);
        }
        j += 1;
    }
}

/// Integrates `model` from `(t0, x0)` up to `t_barrier` or the first monitored crossing.
///
/// `record` receives `(t, x)` after every accepted step, at the event time
/// when a crossing truncates the step, and on its dense grid in between.
/// When no event fires the final row is at `t == t_barrier` exactly.
#[allow(clippy::too_many_arguments)]
pub fn integrate_to_barrier(
    model: &LtiModel,
    inputs: &dyn InputSource,
    x0: &DVector<f64>,
    t0: f64,
    t_barrier: f64,
    monitors: &[PassiveMonitor],
    ctrl: StepControl,
    stats: &mut IntegrationStats,
    record: &mut dyn Recorder,
) -> Result<IntegrationOutcome> {
    if !(t0 < t_barrier) {
        return Err(Error::Dimension(format!(
            "empty integration interval [{t0:e}, {t_barrier:e}]"
        )));
    }
    stats.calls += 1;
    let mut ctrl = ctrl;
    let mut t = t0;
    let mut x = x0.clone();
    let mut x_new = x0.clone();
    let mut stack = DerivativeStack::for_model(model);
    let mut scratch = x0.clone();

    while t < t_barrier {
        stack.refill(model, &x, t, inputs, ctrl.order)?;
        loop {
            let remaining = t_barrier - t;
            let truncated = ctrl.dt >= remaining;
            let dt = if truncated { remaining } else { ctrl.dt };
            let err = estimate_lte(&stack, dt);
            taylor_advance_into(&stack, dt, &mut x_new);
            let norm = x.amax().max(x_new.amax());
            let trial = StepControl { dt, ..ctrl };
            let decision = adapt_step(&trial, err, norm)?;
            if !decision.accepted {
                stats.rejected += 1;
                ctrl = decision.next;
                continue;
            }

            let mut first: Option<(f64, Vec<(usize, CrossingReport)>)> = None;
            let mut search_failed = false;
            for mon in monitors {
                let found = match locate_crossing(&stack, mon, dt) {
                    Ok(f) => f,
                    Err(Error::Crossing { .. }) => {
                        search_failed = true;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                if let Some(r) = found {
                    match &mut first {
                        Some((best, list)) if (r.offset - *best).abs() <= TIE_TOL => {
                            *best = best.min(r.offset);
                            list.push((mon.diode, r));
                        }
                        Some((best, _)) if r.offset > *best => {}
                        _ => first = Some((r.offset, vec![(mon.diode, r)])),
                    }
                }
            }
            if search_failed {
                // Pathological polynomial over this step: retry shorter.
                stats.rejected += 1;
                ctrl.dt = dt * 0.25;
                if ctrl.dt < ctrl.dt_min {
                    return Err(Error::Stiffness {
                        dt: ctrl.dt,
                        dt_min: ctrl.dt_min,
                    });
                }
                continue;
            }

            stats.accepted += 1;
            let mut next = decision.next;
            if truncated {
                // A barrier-shortened step says nothing about the achievable step size or order.
                next.dt = next.dt.max(ctrl.dt).min(ctrl.dt_max);
                next.order = ctrl.order;
            }

            if let Some((offset, fired)) = first {
                stats.crossings += 1;
                let t_evt = if offset == dt && truncated {
                    t_barrier
                } else {
                    t + offset
                };
                dense_rows(record, &stack, t, t_evt, &mut scratch);
                taylor_advance_into(&stack, offset, &mut x_new);
                record.record(t_evt, &x_new);
                return Ok(IntegrationOutcome {
                    terminal: Terminal::PassiveEvent { t: t_evt, fired },
                    x_end: x_new,
                    t_end: t_evt,
                    ctrl: next,
                });
            }

            let t_next = if truncated { t_barrier } else { t + dt };
            dense_rows(record, &stack, t, t_next, &mut scratch);
            t = t_next;
            std::mem::swap(&mut x, &mut x_new);
            ctrl = next;
            record.record(t, &x);
            break;
        }
    }
    Ok(IntegrationOutcome {
        terminal: Terminal::ReachedBarrier,
        x_end: x,
        t_end: t,
        ctrl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{parse_netlist, stamp_and_reduce, Netlist};
    use crate::detect::{Direction, Watch};
    use crate::solver::SolverSettings;

    fn rc() -> Netlist {
        parse_netlist(
            r#"{"nodes": ["gnd", "n1"], "elements": [
                {"kind": "resistor", "name": "R", "nodes": ["n1", "gnd"], "resistance": 1},
                {"kind": "capacitor", "name": "C", "nodes": ["n1", "gnd"], "capacitance": 1, "initial_voltage": 1}],
                "probes": [{"name": "v", "kind": "node_voltage", "target": "n1"}]}"#,
        )
        .unwrap()
    }

    fn ctrl() -> StepControl {
        SolverSettings {
            dt_init: 1e-3,
            ..SolverSettings::default()
        }
        .control(1.0)
        .unwrap()
    }

    #[test]
    fn rc_decay_lands_on_barrier() {
        let net = rc();
        let model = stamp_and_reduce(&net, &net.empty_config()).unwrap();
        let mut stats = IntegrationStats::default();
        let mut last = 0.0;
        let out = integrate_to_barrier(
            &model,
            &net,
            &net.initial_state(),
            0.0,
            1.0,
            &[],
            ctrl(),
            &mut stats,
            &mut |t: f64, _: &DVector<f64>| last = t,
        )
        .unwrap();
        assert_eq!(out.terminal, Terminal::ReachedBarrier);
        assert_eq!(out.t_end, 1.0);
        assert_eq!(last, 1.0);
        assert!((out.x_end[0] - (-1.0f64).exp()).abs() < 1e-7);
        assert_eq!(stats.calls, 1);
    }

    #[test]
    fn linear_monitor_fires_at_half() {
        // v' = -2 from a 2 A current sink into 1 F: v = 1 - 2t.
        let net = parse_netlist(
            r#"{"nodes": ["gnd", "n1"], "elements": [
                {"kind": "current_source", "name": "I", "nodes": ["n1", "gnd"], "waveform": {"type": "dc", "value": 2}},
                {"kind": "capacitor", "name": "C", "nodes": ["n1", "gnd"], "capacitance": 1, "initial_voltage": 1}],
                "probes": [{"name": "v", "kind": "node_voltage", "target": "n1"}]}"#,
        )
        .unwrap();
        let model = stamp_and_reduce(&net, &net.empty_config()).unwrap();
        let mon = PassiveMonitor {
            diode: 7,
            watch: Watch::CurrentZero,
            output: 0,
            threshold: 0.0,
            direction: Direction::Falling,
        };
        let mut stats = IntegrationStats::default();
        let out = integrate_to_barrier(
            &model,
            &net,
            &net.initial_state(),
            0.0,
            1.0,
            &[mon],
            ctrl(),
            &mut stats,
            &mut |_: f64, _: &DVector<f64>| {},
        )
        .unwrap();
        match out.terminal {
            Terminal::PassiveEvent { t, fired } => {
                assert!((t - 0.5).abs() < 1e-12);
                assert_eq!(fired[0].0, 7);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oscillator_period_closes() {
        let w = 2.0 * std::f64::consts::PI * 40e3;
        let l = 1e-3;
        let c = 1.0 / (w * w * l);
        let net = parse_netlist(&format!(
            r#"{{"nodes": ["gnd", "a"], "elements": [
                {{"kind": "inductor", "name": "L", "nodes": ["a", "gnd"], "inductance": {l}, "initial_current": 1}},
                {{"kind": "capacitor", "name": "C", "nodes": ["a", "gnd"], "capacitance": {c}}}]}}"#
        ))
        .unwrap();
        let model = stamp_and_reduce(&net, &net.empty_config()).unwrap();
        let x0 = net.initial_state();
        let mut stats = IntegrationStats::default();
        let ctrl = SolverSettings {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            ..SolverSettings::default()
        }
        .control(25e-6)
        .unwrap();
        let out = integrate_to_barrier(
            &model,
            &net,
            &x0,
            0.0,
            1.0 / 40e3,
            &[],
            ctrl,
            &mut stats,
            &mut |_: f64, _: &DVector<f64>| {},
        )
        .unwrap();
        let scale = (l / c).sqrt();
        let rel = ((out.x_end[0] - x0[0]).powi(2) + ((out.x_end[1] - x0[1]) / scale).powi(2)).sqrt();
        assert!(rel < 1e-6, "relative closure error {rel:e}");
    }
}
