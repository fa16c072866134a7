use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Step size, order and tolerance state of the Taylor integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    pub order: usize,
    pub p_max: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub lte_estimate: f64,
    /// Consecutive accepted steps taken at `dt_max`.
    pub max_hits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    pub accepted: bool,
    pub next: StepControl,
}

/// User-facing solver settings; unset fields take the engine defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub order: usize,
    pub p_max: usize,
    pub dt_min: f64,
    /// Defaults to a quarter of the control period.
    pub dt_max: Option<f64>,
    pub dt_init: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-6,
            order: 4,
            p_max: 8,
            dt_min: 1e-12,
            dt_max: None,
            dt_init: 1e-8,
        }
    }
}

impl SolverSettings {
    pub fn control(&self, t_c: f64) -> Result<StepControl> {
        let dt_max = self.dt_max.unwrap_or(t_c / 4.0);
        let ok = self.abs_tol >= 0.0
            && self.rel_tol >= 0.0
            && self.abs_tol + self.rel_tol > 0.0
            && (1..=self.p_max).contains(&self.order)
            && self.dt_min > 0.0
            && self.dt_min <= dt_max;
        if !ok {
            return Err(Error::Scenario(format!("invalid solver settings {self:?}")));
        }
        Ok(StepControl {
            dt: self.dt_init.clamp(self.dt_min, dt_max),
            order: self.order,
            p_max: self.p_max,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            dt_min: self.dt_min,
            dt_max,
            lte_estimate: 0.0,
            max_hits: 0,
        })
    }
}

const SAFETY: f64 = 0.9;
const MAX_GROWTH: f64 = 2.0;
const MAX_SHRINK: f64 = 0.25;

/// Accepts or rejects a step of size `ctrl.dt` with error estimate `err` and
/// proposes the next step size and order.
pub fn adapt_step(ctrl: &StepControl, err: f64, norm_x: f64) -> Result<StepDecision> {
    let tol = ctrl.abs_tol + ctrl.rel_tol * norm_x;
    let mut next = *ctrl;
    next.lte_estimate = err;
    let p = ctrl.order as f64;
    let factor = if err == 0.0 {
        f64::INFINITY
    } else {
        SAFETY * (tol / err).powf(1.0 / (p + 1.0))
    };
    // NaN errors (overflowing derivatives) count as rejections.
    if err <= tol {
        next.dt = (ctrl.dt * factor.min(MAX_GROWTH)).clamp(ctrl.dt_min, ctrl.dt_max);
        if ctrl.dt >= ctrl.dt_max {
            next.max_hits += 1;
        } else {
            next.max_hits = 0;
        }
        if next.max_hits >= 2 && ctrl.order < ctrl.p_max {
            next.order += 1;
            next.max_hits = 0;
        } else if err < 1e2 * f64::EPSILON * norm_x && ctrl.order > 1 {
            next.order -= 1;
        }
        Ok(StepDecision { accepted: true, next })
    } else {
        let factor = if factor.is_nan() {
            MAX_SHRINK
        } else {
            factor.max(MAX_SHRINK)
        };
        next.dt = ctrl.dt * factor;
        next.max_hits = 0;
        if next.dt < ctrl.dt_min && ctrl.order < ctrl.p_max {
            // Retry at a higher order before giving up.
            next.dt = ctrl.dt;
            next.order += 1;
        } else if next.dt < ctrl.dt_min {
            return Err(Error::Stiffness {
                dt: next.dt,
                dt_min: ctrl.dt_min,
            });
        }
        Ok(StepDecision {
            accepted: false,
            next,
        })
    }
}
