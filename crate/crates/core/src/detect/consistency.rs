use std::collections::HashSet;

use nalgebra::DVector;

use crate::circuit::{ModeCache, SwitchConfig};
use crate::{Error, Result};

/// Hysteresis as a fraction of each threshold's scale `max(1, |threshold|)`.
pub const HYSTERESIS_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyOutcome {
    pub config: SwitchConfig,
    /// Diodes toggled, in order.
    pub toggled: Vec<usize>,
}

/// Drives the diode bits to a configuration in which no diode violates its
/// threshold at state `x` and input `u`.
///
/// The most-violating diode is toggled one at a time; revisiting a
/// configuration is reported as [`Error::Inconsistent`].
pub fn post_event_consistency(
    cache: &ModeCache,
    cfg: SwitchConfig,
    x: &DVector<f64>,
    u: &DVector<f64>,
    t: f64,
) -> Result<ConsistencyOutcome> {
    let thresholds = cache.netlist().diode_thresholds();
    let mut cfg = cfg;
    let mut trail = vec![cfg];
    let mut seen = HashSet::from([cfg]);
    let mut toggled = Vec::new();
    let limit = 1usize << thresholds.len().min(20);
    for _ in 0..limit {
        let model = cache.get(&cfg)?;
        let mut worst: Option<(usize, f64)> = None;
        for (d, &(v_th, i_th)) in thresholds.iter().enumerate() {
            let rows = model.diode_outputs[d];
            let excess = if cfg.diode(d) {
                let scale = i_th.abs().max(1.0);
                (i_th - model.output(rows.current, x, u)) / scale - HYSTERESIS_SCALE
            } else {
                let scale = v_th.abs().max(1.0);
                (model.output(rows.voltage, x, u) - v_th) / scale - HYSTERESIS_SCALE
            };
            if excess > 0.0 && worst.is_none_or(|(_, e)| excess > e) {
                worst = Some((d, excess));
            }
        }
        let Some((d, _)) = worst else {
            return Ok(ConsistencyOutcome { config: cfg, toggled });
        };
        cfg.toggle_diode(d);
        toggled.push(d);
        if !seen.insert(cfg) {
            let start = trail.iter().position(|c| *c == cfg).unwrap_or(0);
            return Err(Error::Inconsistent {
                t,
                cycle: trail[start..].iter().map(ToString::to_string).collect(),
            });
        }
        trail.push(cfg);
    }
    Err(Error::Inconsistent {
        t,
        cycle: trail.iter().map(ToString::to_string).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_netlist;
    use std::sync::Arc;

    fn cache(text: &str) -> ModeCache {
        ModeCache::new(Arc::new(parse_netlist(text).unwrap()))
    }

    #[test]
    fn blocked_below_threshold_is_fixed_point() {
        let c = cache(
            r#"{"nodes": ["gnd", "a"], "elements": [
            {"kind": "voltage_source", "name": "V", "nodes": ["a", "gnd"], "waveform": {"type": "dc", "value": 0.5}},
            {"kind": "diode", "name": "D", "nodes": ["a", "gnd"]}]}"#,
        );
        let cfg = c.netlist().empty_config();
        let u = c.netlist().inputs_at(0.0);
        let out = post_event_consistency(&c, cfg, &DVector::zeros(0), &u, 0.0).unwrap();
        assert_eq!(out.config, cfg);
        assert!(out.toggled.is_empty());
    }

    #[test]
    fn forced_turn_on_then_accept() {
        // An inductor current that must find a path through D2 once D1 blocks.
        let c = cache(
            r#"{"nodes": ["gnd", "a"], "elements": [
            {"kind": "inductor", "name": "L", "nodes": ["gnd", "a"], "inductance": 1e-3, "initial_current": 1},
            {"kind": "diode", "name": "D1", "nodes": ["gnd", "a"]},
            {"kind": "diode", "name": "D2", "nodes": ["a", "gnd"]}]}"#,
        );
        let cfg = c.netlist().empty_config();
        let x = c.netlist().initial_state();
        let out = post_event_consistency(&c, cfg, &x, &DVector::zeros(0), 0.0).unwrap();
        assert_eq!(out.toggled, vec![1]);
        assert!(out.config.diode(1) && !out.config.diode(0));
    }

    #[test]
    fn contradictory_thresholds_cycle() {
        // 1 A can neither keep the diode on (needs 2 A) nor stay blocked.
        let c = cache(
            r#"{"nodes": ["gnd", "a"], "elements": [
            {"kind": "current_source", "name": "I", "nodes": ["gnd", "a"], "waveform": {"type": "dc", "value": 1}},
            {"kind": "diode", "name": "D", "nodes": ["a", "gnd"], "i_th": 2, "v_th": 0.5}]}"#,
        );
        let u = c.netlist().inputs_at(0.0);
        let err =
            post_event_consistency(&c, c.netlist().empty_config(), &DVector::zeros(0), &u, 1.5).unwrap_err();
        match err {
            Error::Inconsistent { t, cycle } => {
                assert_eq!(t, 1.5);
                assert_eq!(cycle.len(), 2);
            }
            other => panic!("{other}"),
        }
    }
}
