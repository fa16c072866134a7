use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::circuit::{LtiModel, SwitchConfig};
use crate::{Error, Result};

/// Forward Euler: `x + h (A x + B u)`.
pub fn fe_step(model: &LtiModel, x: &DVector<f64>, u: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut out = x.clone();
    fe_step_into(model, x, u, h, &mut out);
    out
}

pub(crate) fn fe_step_into(
    model: &LtiModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    h: f64,
    out: &mut DVector<f64>,
) {
    out.copy_from(x);
    out.gemv(h, &model.a, x, 1.0);
    out.gemv(h, &model.b, u, 1.0);
}

/// Backward Euler: `(I - h A)^{-1} (x + h B u_next)`.
pub fn be_step(model: &LtiModel, x: &DVector<f64>, u_next: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let p = Propagator::backward_euler(model, h)?;
    let mut out = x.clone();
    p.apply(x, u_next, &mut out);
    Ok(out)
}

/// One-step linear map `x' = P x + Q w` of a fixed-step method.
///
/// For Backward Euler `w = u_next`; for the trapezoidal rule `w = u + u_next`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

fn solve(lhs: DMatrix<f64>, rhs: DMatrix<f64>, config: &SwitchConfig, h: f64) -> Result<DMatrix<f64>> {
    lhs.lu().solve(&rhs).ok_or_else(|| Error::Singular {
        config: config.to_string(),
        detail: format!("implicit step matrix singular at h = {h:e} s"),
    })
}

impl Propagator {
    pub fn backward_euler(model: &LtiModel, h: f64) -> Result<Self> {
        let n = model.n_states();
        let lhs = DMatrix::identity(n, n) - &model.a * h;
        let mut rhs = DMatrix::zeros(n, n + model.n_inputs());
        rhs.view_mut((0, 0), (n, n)).fill_with_identity();
        rhs.view_mut((0, n), (n, model.n_inputs()))
            .copy_from(&(&model.b * h));
        Ok(Self::split(solve(lhs, rhs, &model.config, h)?, n))
    }

    pub fn trapezoidal(model: &LtiModel, h: f64) -> Result<Self> {
        let n = model.n_states();
        let half = 0.5 * h;
        let lhs = DMatrix::identity(n, n) - &model.a * half;
        let mut rhs = DMatrix::zeros(n, n + model.n_inputs());
        rhs.view_mut((0, 0), (n, n))
            .copy_from(&(DMatrix::identity(n, n) + &model.a * half));
        rhs.view_mut((0, n), (n, model.n_inputs()))
            .copy_from(&(&model.b * half));
        Ok(Self::split(solve(lhs, rhs, &model.config, h)?, n))
    }

    fn split(m: DMatrix<f64>, n: usize) -> Self {
        let m_cols = m.ncols();
        Self {
            p: m.columns(0, n).into_owned(),
            q: m.columns(n, m_cols - n).into_owned(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>, w: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, &self.p, x, 0.0);
        out.gemv(1.0, &self.q, w, 1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Rule {
    BackwardEuler,
    Trapezoidal,
}

/// Factorized step maps keyed by configuration and step length.
#[derive(Debug, Default)]
pub struct PropagatorCache {
    map: HashMap<(SwitchConfig, u64, Rule), Arc<Propagator>>,
}

impl PropagatorCache {
    pub fn backward_euler(&mut self, model: &LtiModel, h: f64) -> Result<Arc<Propagator>> {
        self.get(model, h, Rule::BackwardEuler)
    }

    pub fn trapezoidal(&mut self, model: &LtiModel, h: f64) -> Result<Arc<Propagator>> {
        self.get(model, h, Rule::Trapezoidal)
    }

    fn get(&mut self, model: &LtiModel, h: f64, rule: Rule) -> Result<Arc<Propagator>> {
        let key = (model.config, h.to_bits(), rule);
        if let Some(p) = self.map.get(&key) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(match rule {
            Rule::BackwardEuler => Propagator::backward_euler(model, h)?,
            Rule::Trapezoidal => Propagator::trapezoidal(model, h)?,
        });
        self.map.insert(key, Arc::clone(&p));
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
