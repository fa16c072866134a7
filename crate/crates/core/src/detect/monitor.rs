use crate::circuit::{LtiModel, SwitchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Watch {
    /// Conducting diode, watching its current fall to the threshold.
    CurrentZero,
    /// Blocked diode, watching its forward voltage rise to the threshold.
    VoltageThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Falling,
    Rising,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassiveMonitor {
    pub diode: usize,
    pub watch: Watch,
    pub output: usize,
    pub threshold: f64,
    pub direction: Direction,
}

impl PassiveMonitor {
    pub fn for_diode(model: &LtiModel, diode: usize, conducting: bool, v_th: f64, i_th: f64) -> Self {
        let rows = model.diode_outputs[diode];
        if conducting {
            Self {
                diode,
                watch: Watch::CurrentZero,
                output: rows.current,
                threshold: i_th,
                direction: Direction::Falling,
            }
        } else {
            Self {
                diode,
                watch: Watch::VoltageThreshold,
                output: rows.voltage,
                threshold: v_th,
                direction: Direction::Rising,
            }
        }
    }

    /// Distance past the threshold in the armed direction: negative before the
    /// crossing, non-negative once crossed.
    pub fn signed(&self, y: f64) -> f64 {
        match self.direction {
            Direction::Rising => y - self.threshold,
            Direction::Falling => self.threshold - y,
        }
    }

    pub fn scale(&self) -> f64 {
        self.threshold.abs().max(1.0)
    }

    pub fn residual_tol(&self) -> f64 {
        1e-9 * self.scale()
    }
}

/// One monitor per diode, matching its conduction bit in `model.config`.
pub fn arm_monitors(model: &LtiModel, thresholds: &[(f64, f64)]) -> Vec<PassiveMonitor> {
    thresholds
        .iter()
        .enumerate()
        .map(|(d, &(v_th, i_th))| PassiveMonitor::for_diode(model, d, model.config.diode(d), v_th, i_th))
        .collect()
}

/// Toggles the conduction bit of the diode whose monitor fired.
pub fn diode_transition(cfg: &SwitchConfig, fired: usize) -> SwitchConfig {
    let mut next = *cfg;
    next.toggle_diode(fired);
    next
}
