use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carrier {
    /// Gate on for the first `duty` fraction of each period.
    Sawtooth,
    /// Gate on for a `duty`-wide pulse centred in each period.
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatePwm {
    pub carrier: Carrier,
    pub period: f64,
    pub duty: f64,
    /// Carrier delay as a fraction of the period, in `[0, 1)`.
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub inverted: bool,
}

/// `secondary` is driven as the complement of `primary`, with both turn-on
/// edges delayed by `dead_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplementaryPair {
    pub primary: usize,
    pub secondary: usize,
    #[serde(default)]
    pub dead_time: f64,
}

/// One control cycle's command: a PWM setting per gate, in netlist gate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PwmConfig {
    pub gates: Vec<GatePwm>,
    #[serde(default)]
    pub pairs: Vec<ComplementaryPair>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AseEdge {
    pub t: f64,
    pub gate: usize,
    pub on: bool,
}

/// Gate edges of one control window, sorted by time then gate.
#[derive(Debug, Clone, PartialEq)]
pub struct AseSchedule {
    pub t0: f64,
    pub t1: f64,
    pub edges: Vec<AseEdge>,
}

impl AseSchedule {
    /// Edges grouped by identical time.
    pub fn groups(&self) -> Vec<(f64, Vec<AseEdge>)> {
        let mut out: Vec<(f64, Vec<AseEdge>)> = Vec::new();
        for e in &self.edges {
            match out.last_mut() {
                Some((t, list)) if *t == e.t => list.push(*e),
                _ => out.push((e.t, vec![*e])),
            }
        }
        out
    }
}

impl PwmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(format!("invalid PWM command: {m}")));
        for (i, g) in self.gates.iter().enumerate() {
            if !(g.period > 0.0 && g.period.is_finite()) {
                return bad(format!("gate {i} period {}", g.period));
            }
            if !(0.0..=1.0).contains(&g.duty) {
                return bad(format!("gate {i} duty {}", g.duty));
            }
            if !(0.0..1.0).contains(&g.phase) {
                return bad(format!("gate {i} phase {}", g.phase));
            }
        }
        let mut used = vec![false; self.gates.len()];
        for p in &self.pairs {
            for g in [p.primary, p.secondary] {
                if g >= self.gates.len() || std::mem::replace(&mut used[g], true) {
                    return bad(format!("gate {g} in pair is out of range or paired twice"));
                }
            }
            let period = self.gates[p.primary].period;
            if !(p.dead_time >= 0.0 && p.dead_time < period / 2.0) {
                return bad(format!("dead time {} vs period {period}", p.dead_time));
            }
        }
        Ok(())
    }

    fn pair_of(&self, gate: usize) -> Option<(&ComplementaryPair, bool)> {
        self.pairs.iter().find_map(|p| {
            if p.primary == gate {
                Some((p, true))
            } else if p.secondary == gate {
                Some((p, false))
            } else {
                None
            }
        })
    }

    /// On-intervals `[a, b)` of `gate` covering at least `[lo, hi]`.
    fn intervals(&self, gate: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        match self.pair_of(gate) {
            None => comparator(&self.gates[gate], lo, hi),
            Some((pair, is_primary)) => {
                let g = &self.gates[pair.primary];
                let dt = pair.dead_time;
                let base = comparator(g, lo - g.period - dt, hi + g.period);
                let raw = if is_primary { base } else { complement(&base) };
                raw.into_iter()
                    .filter_map(|(a, b)| (a + dt < b).then_some((a + dt, b)))
                    .collect()
            }
        }
    }
}

/// Comparator on-intervals of one carrier, merged, covering `[lo, hi]`.
fn comparator(g: &GatePwm, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let p = g.period;
    let n0 = (lo / p - g.phase).floor() as i64 - 1;
    let n1 = (hi / p - g.phase).ceil() as i64 + 1;
    let mut on: Vec<(f64, f64)> = Vec::new();
    if g.duty > 0.0 {
        for n in n0..=n1 {
            let base = n as f64 + g.phase;
            let (a, b) = match g.carrier {
                Carrier::Sawtooth => (base * p, (base + g.duty) * p),
                Carrier::Triangle => ((base + 0.5 - 0.5 * g.duty) * p, (base + 0.5 + 0.5 * g.duty) * p),
            };
            match on.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => on.push((a, b)),
            }
        }
    }
    let start = (n0 as f64 + g.phase) * p;
    let end = (n1 as f64 + 1.0 + g.phase) * p;
    if g.inverted {
        let mut inv = Vec::new();
        let mut cursor = start;
        for &(a, b) in &on {
            if a > cursor {
                inv.push((cursor, a));
            }
            cursor = cursor.max(b);
        }
        if cursor < end {
            inv.push((cursor, end));
        }
        inv
    } else {
        on
    }
}

/// Gaps between consecutive intervals.
fn complement(on: &[(f64, f64)]) -> Vec<(f64, f64)> {
    on.windows(2)
        .map(|w| (w[0].1, w[1].0))
        .filter(|(a, b)| a < b)
        .collect()
}

fn snap(t: f64, target: f64) -> f64 {
    if (t - target).abs() <= 4.0 * f64::EPSILON * target.abs() {
        target
    } else {
        t
    }
}

/// Expands a command into its gate edges within `[t0, t1)`.
///
/// `prev` holds the gate states just before `t0`; a gate whose state at `t0`
/// differs gets an edge at `t0`.
pub fn pwm_edges(cfg: &PwmConfig, t0: f64, t1: f64, prev: &[bool]) -> AseSchedule {
    let mut edges = Vec::new();
    for gate in 0..cfg.gates.len() {
        let at_start = gate_on(cfg, gate, t0);
        if at_start != prev.get(gate).copied().unwrap_or(false) {
            edges.push(AseEdge {
                t: t0,
                gate,
                on: at_start,
            });
        }
        for (a, b) in cfg.intervals(gate, t0, t1) {
            let (a, b) = (snap(snap(a, t0), t1), snap(snap(b, t0), t1));
            if t0 < a && a < t1 {
                edges.push(AseEdge { t: a, gate, on: true });
            }
            if t0 < b && b < t1 {
                edges.push(AseEdge {
                    t: b,
                    gate,
                    on: false,
                });
            }
        }
    }
    edges.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.gate.cmp(&y.gate)));
    AseSchedule { t0, t1, edges }
}

fn gate_on(cfg: &PwmConfig, gate: usize, t: f64) -> bool {
    cfg.intervals(gate, t, t)
        .iter()
        .any(|&(a, b)| snap(a, t) <= t && t < snap(b, t))
}

/// Gate states at time `t`.
pub fn gate_states_at(cfg: &PwmConfig, t: f64) -> Vec<bool> {
    (0..cfg.gates.len()).map(|g| gate_on(cfg, g, t)).collect()
}
