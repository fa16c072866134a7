use std::io::Cursor;

use eschil::analysis::{mean, relative_error, rms, Waveform};
use eschil::baseline::{fe_step, Propagator};
use eschil::circuit::{parse_netlist, stamp_and_reduce, LtiModel};
use eschil::controller::wire::Frame;
use eschil::controller::{gate_states_at, pwm_edges, Carrier, GatePwm, PwmConfig, Quantizer};
use eschil::detect::{locate_crossing, Direction, PassiveMonitor, Watch};
use eschil::events::{CycleTiming, EventKind, Scheduler};
use eschil::solver::{adapt_step, compute_derivatives, taylor_advance, SolverSettings};
use nalgebra::{dvector, DVector};
use proptest::prelude::*;

fn rc(tau: f64) -> LtiModel {
    let net = parse_netlist(&format!(
        r#"{{"nodes": ["gnd", "n"], "elements": [
            {{"kind": "resistor", "name": "R", "nodes": ["n", "gnd"], "resistance": {tau}}},
            {{"kind": "capacitor", "name": "C", "nodes": ["n", "gnd"], "capacitance": 1, "initial_voltage": 1}}],
            "probes": [{{"name": "v", "kind": "node_voltage", "target": "n"}}]}}"#
    ))
    .unwrap();
    stamp_and_reduce(&net, &net.empty_config()).unwrap()
}

fn one_gate(carrier: Carrier, duty: f64, phase: f64, period: f64) -> PwmConfig {
    PwmConfig {
        gates: vec![GatePwm {
            carrier,
            period,
            duty,
            phase,
            inverted: false,
        }],
        pairs: vec![],
    }
}

proptest! {
    #[test]
    fn taylor_error_scales_with_order(p in 1usize..=4, tau in 0.1f64..10.0, z in 0.05f64..0.3) {
        let model = rc(tau);
        let dt = z * tau;
        let stack = compute_derivatives(&model, &dvector![1.0], &[], p).unwrap();
        let err = |h: f64| (taylor_advance(&stack, h)[0] - (-h / tau).exp()).abs();
        let ratio = err(dt) / err(dt / 2.0);
        let expected = 2f64.powi(p as i32 + 1);
        prop_assert!(ratio > expected / 2.0 && ratio < expected * 2.0, "ratio {ratio}");
    }

    #[test]
    fn step_adaptation_is_bounded(dt in 1e-9f64..1e-6, err in 0.0f64..1e-3, norm in 0.0f64..1e3, order in 1usize..=8) {
        let mut ctrl = SolverSettings::default().control(25e-6).unwrap();
        ctrl.dt = dt;
        ctrl.order = order;
        let tol = ctrl.abs_tol + ctrl.rel_tol * norm;
        let d = adapt_step(&ctrl, err, norm).unwrap();
        prop_assert_eq!(d.accepted, err <= tol);
        if d.accepted {
            prop_assert!(d.next.dt <= (2.0 * dt).min(ctrl.dt_max) * (1.0 + 1e-12));
        } else {
            prop_assert!(d.next.dt >= 0.25 * dt * (1.0 - 1e-12) && d.next.dt < dt);
        }
        prop_assert!((1..=ctrl.p_max).contains(&d.next.order));
    }

    #[test]
    fn crossing_is_earliest_and_within_tolerance(
        v0 in -5.0f64..-0.1,
        slope in 0.5f64..50.0,
        curve in -20.0f64..20.0,
        th in -0.05f64..0.05,
    ) {
        // y(t) = v0 + slope t + curve t^2 / 2 over a unit step.
        let model = rc(1.0);
        let mut stack = compute_derivatives(&model, &dvector![1.0], &[], 3).unwrap();
        stack.y[0][0] = v0;
        stack.y[1][0] = slope;
        stack.y[2][0] = curve;
        stack.y[3][0] = 0.0;
        let monitor = PassiveMonitor { diode: 0, watch: Watch::VoltageThreshold, output: 0, threshold: th, direction: Direction::Rising };
        let y = |t: f64| v0 + slope * t + 0.5 * curve * t * t;
        let found = locate_crossing(&stack, &monitor, 1.0).unwrap();
        let first = (0..=100_000).map(|j| j as f64 * 1e-5).find(|&t| y(t) >= th);
        match (found, first) {
            (Some(r), Some(t)) => {
                prop_assert!(r.residual <= monitor.residual_tol());
                prop_assert!((y(r.offset) - th).abs() <= monitor.residual_tol() * 1.0001);
                prop_assert!(r.offset <= t + 1e-5);
            }
            (None, Some(t)) => {
                // Only a brief excursion between coarse samples may be missed.
                prop_assert!((0..=8).all(|j| y(j as f64 / 8.0) < th), "missed crossing at {t}");
            }
            (Some(r), None) => prop_assert!(false, "spurious crossing at {}", r.offset),
            (None, None) => {}
        }
    }

    #[test]
    fn frozen_edges_match_overruns(durations in prop::collection::vec(0.0f64..5.0, 1..20)) {
        let t_c = 25e-6;
        let mut sched = Scheduler::new(CycleTiming::new(t_c, 5e-6).unwrap());
        let cmd = one_gate(Carrier::Sawtooth, 0.5, 0.0, t_c);
        let mut expected = 0u64;
        for (k, d) in durations.iter().enumerate() {
            let k = k as u64;
            sched.run_cycle(k, vec![], &cmd).unwrap();
            sched.control_done(k);
            sched.sim_done(k, d * t_c, vec![], vec![]).unwrap();
            if (k as usize) + 1 < durations.len() {
                expected += ((d - 1e-9).ceil().max(1.0) as u64) - 1;
            }
        }
        sched.run_cycle(durations.len() as u64, vec![], &cmd).unwrap();
        let last = durations[durations.len() - 1];
        expected += ((last - 1e-9).ceil().max(1.0) as u64) - 1;
        prop_assert_eq!(sched.timing.frozen_cycles, expected);
        let log = sched.event_log();
        prop_assert!(log.windows(2).all(|w| w[0].t_sim <= w[1].t_sim && w[0].seq + 1 == w[1].seq));
        for k in 0..durations.len() as u64 {
            let count = |f: fn(&EventKind) -> bool| log.iter().filter(|e| e.cycle == k && f(&e.kind)).count();
            prop_assert_eq!(count(|e| matches!(e, EventKind::ControlA)), 1);
            prop_assert_eq!(count(|e| matches!(e, EventKind::ControlB)), 1);
        }
    }

    #[test]
    fn pwm_edges_reproduce_gate_states(
        duty in 0.0f64..=1.0,
        phase in 0.0f64..1.0,
        triangle in any::<bool>(),
        k in 0u64..50,
    ) {
        let carrier = if triangle { Carrier::Triangle } else { Carrier::Sawtooth };
        let cfg = one_gate(carrier, duty, phase, 25e-6);
        let (t0, t1) = (k as f64 * 25e-6, (k + 1) as f64 * 25e-6);
        let prev = gate_states_at(&cfg, t0 - 1e-9);
        let sched = pwm_edges(&cfg, t0, t1, &prev);
        let mut state = prev[0];
        let mut on_time = 0.0;
        let mut last = t0;
        for e in &sched.edges {
            prop_assert!(e.t >= t0 && e.t < t1);
            prop_assert_ne!(e.on, state);
            if state {
                on_time += e.t - last;
            }
            state = e.on;
            last = e.t;
        }
        if state {
            on_time += t1 - last;
        }
        let samples = 2000;
        let sampled = (0..samples)
            .filter(|j| gate_states_at(&cfg, t0 + (*j as f64 + 0.5) * 25e-6 / samples as f64)[0])
            .count() as f64
            / samples as f64;
        prop_assert!((on_time / 25e-6 - sampled).abs() <= 2.0 / samples as f64);
        // A window of one full carrier period holds exactly `duty` of on-time.
        prop_assert!((on_time / 25e-6 - duty).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_matches_fe_to_second_order(tau in 0.5f64..5.0, h in 1e-4f64..1e-2) {
        let model = rc(tau);
        let trap = Propagator::trapezoidal(&model, h).unwrap();
        let x = dvector![1.0];
        let mut out = x.clone();
        trap.apply(&x, &DVector::zeros(0), &mut out);
        let fe = fe_step(&model, &x, &DVector::zeros(0), h);
        let z = h / tau;
        // Both agree with exp(-z) through the linear term.
        prop_assert!((out[0] - fe[0]).abs() <= z * z);
        prop_assert!((out[0] - (1.0 - z / 2.0) / (1.0 + z / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn waveform_csv_round_trips(rows in prop::collection::vec((any::<f64>(), any::<f64>()), 1..30)) {
        let mut w = Waveform::new(vec!["a".into(), "b".into()]);
        let mut t = 0.0;
        for (a, b) in rows {
            t += 1e-6;
            let a = if a.is_finite() { a } else { 0.0 };
            let b = if b.is_finite() { b } else { 0.0 };
            w.push(t, &[a, b]);
        }
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = Waveform::read_csv(Cursor::new(&buf)).unwrap();
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        prop_assert_eq!(buf, again);
        prop_assert_eq!(back.signal("a").unwrap(), w.signal("a").unwrap());
        prop_assert_eq!(back.signal("b").unwrap(), w.signal("b").unwrap());
    }

    #[test]
    fn frames_round_trip(kind in 1u16..3, cycle in any::<u64>(), payload in prop::collection::vec(-1e6f64..1e6, 0..40)) {
        let f = Frame::new(kind, cycle, payload);
        let bytes = f.encode();
        let back = Frame::read_from(&mut Cursor::new(bytes)).unwrap().unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn quantizer_is_idempotent_and_bounded(bits in 2u32..16, full_scale in 1.0f64..1e3, v in -2e3f64..2e3) {
        let q = Quantizer { bits, full_scale };
        let a = q.apply(v);
        prop_assert_eq!(q.apply(a), a);
        prop_assert!(a >= -full_scale && a < full_scale);
        if v.abs() < full_scale - q.step() {
            prop_assert!((a - v).abs() <= 0.5 * q.step() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn metrics_scale_linearly(k in 0.1f64..100.0, offset in -10.0f64..10.0) {
        let mut a = Waveform::new(vec!["s".into()]);
        let mut b = Waveform::new(vec!["s".into()]);
        for j in 0..=200 {
            let t = j as f64 * 1e-3;
            let v = (40.0 * t).sin() + 0.3;
            a.push(t, &[v]);
            b.push(t, &[k * v + offset]);
        }
        let win = (0.01, 0.19);
        let (ma, mb) = (mean(&a, "s", win).unwrap(), mean(&b, "s", win).unwrap());
        prop_assert!((mb - (k * ma + offset)).abs() < 1e-9 * (1.0 + mb.abs()));
        let mut c = Waveform::new(vec!["s".into()]);
        for j in 0..=200 {
            let t = j as f64 * 1e-3;
            c.push(t, &[k * ((40.0 * t).sin() + 0.3)]);
        }
        prop_assert!((rms(&c, "s", win).unwrap() - k * rms(&a, "s", win).unwrap()).abs() < 1e-9 * k);
        prop_assert!(relative_error(&c, &c, "s", win).unwrap() == 0.0);
    }
}
