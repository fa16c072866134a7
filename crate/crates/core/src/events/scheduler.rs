use std::time::Duration;

use super::{Event, EventKind};
use crate::controller::PwmConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleTiming {
    pub t_c: f64,
    /// Delay from the clock edge to sample acquisition.
    pub t_d: f64,
    pub frozen_cycles: u64,
}

impl CycleTiming {
    pub fn new(t_c: f64, t_d: f64) -> Result<Self> {
        if !(t_c > 0.0 && (0.0..t_c).contains(&t_d)) {
            return Err(Error::Scenario(format!(
                "invalid timing T_c = {t_c:e}, t_d = {t_d:e}"
            )));
        }
        Ok(Self {
            t_c,
            t_d,
            frozen_cycles: 0,
        })
    }
}

/// Wall-clock duration attributed to each solver window.
#[derive(Debug, Clone, PartialEq)]
pub enum DurationSource {
    /// Every window completes instantly.
    Ideal,
    /// The measured wall time of the solver.
    Measured,
    /// Durations in seconds by cycle, repeating the last value.
    Scripted(Vec<f64>),
}

impl DurationSource {
    pub fn duration(&self, cycle: u64, measured: Duration) -> f64 {
        match self {
            DurationSource::Ideal => 0.0,
            DurationSource::Measured => measured.as_secs_f64(),
            DurationSource::Scripted(v) => v.get(cycle as usize).or(v.last()).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallRecord {
    pub cycle: u64,
    /// Clock edge at which the cycle's sync pair occurred.
    pub sync_edge: u64,
    pub sim_wall_s: f64,
    pub frozen_before: u64,
}

/// Clock/sync bookkeeping of the rendezvous protocol.
///
/// Wall time is counted in controller clock edges `e * T_c`. The window
/// started at edge `E_k` completes `d_k` seconds later; the next sync pair
/// waits for the first edge at or after completion, and the edges skipped on
/// the way are frozen.
#[derive(Debug)]
pub struct Scheduler {
    pub timing: CycleTiming,
    log: Vec<Event>,
    pending: Vec<(f64, u64, EventKind)>,
    next_cycle: u64,
    last_sync_edge: Option<u64>,
    done: Option<(u64, f64)>,
    wall: Vec<WallRecord>,
}

/// Slack when comparing a completion time with a clock edge, in periods.
const EDGE_SLACK: f64 = 1e-9;

impl Scheduler {
    pub fn new(timing: CycleTiming) -> Self {
        Self {
            timing,
            log: Vec::new(),
            pending: Vec::new(),
            next_cycle: 0,
            last_sync_edge: None,
            done: None,
            wall: Vec::new(),
        }
    }

    /// Clock edge, sync pair and control events opening cycle `k`.
    ///
    /// `command` is the command latched for window `k`: the startup command
    /// for `k = 0`, otherwise the one computed in cycle `k - 1`.
    pub fn run_cycle(&mut self, k: u64, samples: Vec<f64>, command: &PwmConfig) -> Result<u64> {
        if k != self.next_cycle {
            return Err(Error::Protocol(format!(
                "cycle {k} started, expected {}",
                self.next_cycle
            )));
        }
        let edge = match (self.last_sync_edge, self.done) {
            (None, _) => 0,
            (Some(prev), Some((c, done_wall))) if c + 1 == k => {
                let rel = done_wall / self.timing.t_c - prev as f64;
                let jump = ((rel - EDGE_SLACK).ceil().max(1.0)) as u64;
                prev + jump
            }
            _ => {
                return Err(Error::Protocol(format!(
                    "cycle {k} started before SimDone of cycle {}",
                    k - 1
                )))
            }
        };
        let t = k as f64 * self.timing.t_c;
        let first_frozen = self.last_sync_edge.map_or(edge, |p| p + 1);
        let frozen_before = edge - first_frozen;
        for e in first_frozen..edge {
            self.pending.push((
                t,
                k,
                EventKind::Clock {
                    edge: e,
                    frozen: true,
                },
            ));
        }
        self.timing.frozen_cycles += frozen_before;
        self.pending
            .push((t, k, EventKind::Clock { edge, frozen: false }));
        self.pending.push((t, k, EventKind::SyncA { samples }));
        self.pending.push((
            t,
            k,
            EventKind::SyncB {
                from_cycle: k.checked_sub(1),
                command: command.clone(),
            },
        ));
        self.pending.push((t + self.timing.t_d, k, EventKind::ControlA));
        self.last_sync_edge = Some(edge);
        self.wall.push(WallRecord {
            cycle: k,
            sync_edge: edge,
            sim_wall_s: 0.0,
            frozen_before,
        });
        self.next_cycle = k + 1;
        Ok(edge)
    }

    pub fn control_done(&mut self, k: u64) {
        let t = k as f64 * self.timing.t_c + self.timing.t_d;
        self.pending.push((t, k, EventKind::ControlB));
    }

    /// Records completion of window `k` after `wall_s` seconds and flushes
    /// the cycle's events, including those produced by the solver.
    pub fn sim_done(
        &mut self,
        k: u64,
        wall_s: f64,
        probes: Vec<f64>,
        window_events: Vec<(f64, EventKind)>,
    ) -> Result<()> {
        if k + 1 != self.next_cycle || self.done.is_some_and(|(c, _)| c >= k) {
            return Err(Error::Protocol(format!(
                "SimDone for cycle {k} while cycle {} is open",
                self.next_cycle.saturating_sub(1)
            )));
        }
        let edge = self.last_sync_edge.unwrap_or(0);
        self.done = Some((k, edge as f64 * self.timing.t_c + wall_s));
        if let Some(w) = self.wall.last_mut() {
            w.sim_wall_s = wall_s;
        }
        self.pending
            .extend(window_events.into_iter().map(|(t, kind)| (t, k, kind)));
        self.pending
            .push(((k + 1) as f64 * self.timing.t_c, k, EventKind::SimDone { probes }));
        self.pending.sort_by(|a, b| a.0.total_cmp(&b.0));
        let first = self.log.len() as u64;
        for (seq, (t_sim, cycle, kind)) in (first..).zip(self.pending.drain(..)) {
            self.log.push(Event {
                seq,
                t_sim,
                cycle,
                kind,
            });
        }
        Ok(())
    }

    /// All emitted events, ordered by `(t_sim, seq)`.
    pub fn event_log(&self) -> &[Event] {
        &self.log
    }

    pub fn wall_log(&self) -> &[WallRecord] {
        &self.wall
    }

    pub fn into_parts(self) -> (Vec<Event>, Vec<WallRecord>, CycleTiming) {
        (self.log, self.wall, self.timing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::PwmConfig;

    fn cmd() -> PwmConfig {
        PwmConfig {
            gates: vec![],
            pairs: vec![],
        }
    }

    fn drive(durations: &[f64]) -> Scheduler {
        let mut s = Scheduler::new(CycleTiming::new(25e-6, 0.0).unwrap());
        for (k, d) in durations.iter().enumerate() {
            let k = k as u64;
            s.run_cycle(k, vec![], &cmd()).unwrap();
            s.control_done(k);
            s.sim_done(k, *d, vec![], vec![]).unwrap();
        }
        s
    }

    #[test]
    fn fast_solver_syncs_every_edge() {
        let s = drive(&[10e-6, 10e-6, 25e-6]);
        assert_eq!(s.timing.frozen_cycles, 0);
        let edges: Vec<u64> = s.wall_log().iter().map(|w| w.sync_edge).collect();
        assert_eq!(edges, vec![0, 1, 2]);
    }

    #[test]
    fn overrun_freezes_until_next_edge() {
        let mut s = drive(&[60e-6]);
        let edge = s.run_cycle(1, vec![], &cmd()).unwrap();
        assert_eq!(edge, 3);
        assert_eq!(s.timing.frozen_cycles, 2);
    }

    #[test]
    fn idle_cycles_emit_one_of_each() {
        let s = drive(&[0.0, 0.0]);
        let count = |label: &str| s.event_log().iter().filter(|e| e.kind.label() == label).count();
        for label in ["Clock", "SyncA", "SyncB", "ControlA", "ControlB", "SimDone"] {
            assert_eq!(count(label), 2, "{label}");
        }
        assert!(s
            .event_log()
            .windows(2)
            .all(|w| w[0].t_sim <= w[1].t_sim && w[0].seq < w[1].seq));
    }

    #[test]
    fn protocol_violations() {
        let mut s = Scheduler::new(CycleTiming::new(25e-6, 0.0).unwrap());
        s.run_cycle(0, vec![], &cmd()).unwrap();
        assert!(s.run_cycle(1, vec![], &cmd()).is_err());
        assert!(s.sim_done(3, 0.0, vec![], vec![]).is_err());
        s.sim_done(0, 0.0, vec![], vec![]).unwrap();
        assert!(s.sim_done(0, 0.0, vec![], vec![]).is_err());
    }
}
