use nalgebra::DVector;

use crate::circuit::{InputSource, LtiModel, SwitchConfig};
use crate::{Error, Result};

/// Taylor coefficients of state, input and output at time `t`.
///
/// `x[i]`, `u[i]` and `y[i]` hold the i-th time derivatives, `i = 0..=p`.
#[derive(Debug, Clone)]
pub struct DerivativeStack {
    pub t: f64,
    pub config: SwitchConfig,
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
}

impl DerivativeStack {
    pub fn order(&self) -> usize {
        self.x.len() - 1
    }

    /// Empty stack sized for `model`, reused across steps by [`Self::refill`].
    pub fn for_model(model: &LtiModel) -> Self {
        Self {
            t: 0.0,
            config: model.config,
            x: Vec::new(),
            u: Vec::new(),
            y: Vec::new(),
        }
    }

    fn resize(&mut self, model: &LtiModel, p: usize) {
        let (n, m, q) = (model.n_states(), model.n_inputs(), model.n_outputs());
        let fits = |v: &Vec<DVector<f64>>, len: usize| v.first().is_none_or(|e| e.len() == len);
        if !(fits(&self.x, n) && fits(&self.u, m) && fits(&self.y, q)) {
            self.x.clear();
            self.u.clear();
            self.y.clear();
        }
        self.x.resize(p + 1, DVector::zeros(n));
        self.u.resize(p + 1, DVector::zeros(m));
        self.y.resize(p + 1, DVector::zeros(q));
    }

    /// Recomputes the stack in place at `(t, x0)` with inputs from `inputs`.
    pub fn refill(
        &mut self,
        model: &LtiModel,
        x0: &DVector<f64>,
        t: f64,
        inputs: &dyn InputSource,
        p: usize,
    ) -> Result<()> {
        check_dims(model, x0, inputs.n_inputs(), p)?;
        self.resize(model, p);
        self.t = t;
        self.config = model.config;
        inputs.input_derivatives(t, &mut self.u);
        self.x[0].copy_from(x0);
        self.recur(model);
        Ok(())
    }

    fn recur(&mut self, model: &LtiModel) {
        let p = self.order();
        for i in 0..p {
            let (lo, hi) = self.x.split_at_mut(i + 1);
            let next = &mut hi[0];
            next.gemv(1.0, &model.a, &lo[i], 0.0);
            next.gemv(1.0, &model.b, &self.u[i], 1.0);
        }
        for i in 0..=p {
            self.y[i].gemv(1.0, &model.c, &self.x[i], 0.0);
            self.y[i].gemv(1.0, &model.d, &self.u[i], 1.0);
        }
    }
}

fn check_dims(model: &LtiModel, x: &DVector<f64>, m: usize, p: usize) -> Result<()> {
    if p < 1 {
        return Err(Error::Dimension("Taylor order must be at least 1".into()));
    }
    if x.len() != model.n_states() || m != model.n_inputs() {
        return Err(Error::Dimension(format!(
            "model expects {} states / {} inputs, got {} / {}",
            model.n_states(),
            model.n_inputs(),
            x.len(),
            m
        )));
    }
    Ok(())
}

/// Builds the derivative recursion from explicit input derivatives.
///
/// `u_derivs` must hold at least `p + 1` vectors.
pub fn compute_derivatives(
    model: &LtiModel,
    x: &DVector<f64>,
    u_derivs: &[DVector<f64>],
    p: usize,
) -> Result<DerivativeStack> {
    let m = u_derivs.first().map_or(model.n_inputs(), |u| u.len());
    check_dims(model, x, m, p)?;
    if u_derivs.len() < p + 1 && model.n_inputs() > 0 {
        return Err(Error::Dimension(format!(
            "need {} input derivatives, got {}",
            p + 1,
            u_derivs.len()
        )));
    }
    let mut s = DerivativeStack::for_model(model);
    s.resize(model, p);
    for (i, u) in s.u.iter_mut().enumerate() {
        if let Some(src) = u_derivs.get(i) {
            u.copy_from(src);
        }
    }
    s.x[0].copy_from(x);
    s.recur(model);
    Ok(s)
}

/// `sum_i x[i] dt^i / i!`, evaluated by Horner's rule.
pub fn taylor_advance(stack: &DerivativeStack, dt: f64) -> DVector<f64> {
    let mut out = stack.x[stack.order()].clone();
    taylor_advance_into(stack, dt, &mut out);
    out
}

pub(crate) fn taylor_advance_into(stack: &DerivativeStack, dt: f64, out: &mut DVector<f64>) {
    let p = stack.order();
    out.copy_from(&stack.x[p]);
    for i in (0..p).rev() {
        *out *= dt / (i + 1) as f64;
        *out += &stack.x[i];
    }
}

/// Magnitude of the highest retained term, `|x[p]|_inf dt^p / p!`.
pub fn estimate_lte(stack: &DerivativeStack, dt: f64) -> f64 {
    let p = stack.order();
    let mut scale = 1.0;
    for i in 1..=p {
        scale *= dt / i as f64;
    }
    stack.x[p].amax() * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector, DMatrix};

    pub(crate) fn model(a: DMatrix<f64>, b: DMatrix<f64>) -> LtiModel {
        let n = a.nrows();
        let m = b.ncols();
        LtiModel {
            c: DMatrix::identity(n, n),
            d: DMatrix::zeros(n, m),
            a,
            b,
            state_labels: vec![String::new(); n],
            input_labels: vec![String::new(); m],
            output_labels: vec![String::new(); n],
            config: SwitchConfig::new(0, 0),
            n_probes: n,
            diode_outputs: vec![],
        }
    }

    #[test]
    fn decay_recursion() {
        let m = model(dmatrix![-1.0], DMatrix::zeros(1, 0));
        let s = compute_derivatives(&m, &dvector![1.0], &[], 3).unwrap();
        let got: Vec<f64> = s.x.iter().map(|v| v[0]).collect();
        assert_eq!(got, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn oscillator_recursion() {
        let m = model(dmatrix![0.0, 1.0; -1.0, 0.0], DMatrix::zeros(2, 0));
        let s = compute_derivatives(&m, &dvector![0.0, 1.0], &[], 2).unwrap();
        assert_eq!(
            s.x,
            vec![dvector![0.0, 1.0], dvector![1.0, 0.0], dvector![0.0, -1.0]]
        );
    }

    #[test]
    fn driven_rl_recursion() {
        let m = model(dmatrix![-4.0], dmatrix![2.0]);
        let u = [dvector![1.0], dvector![0.0], dvector![0.0]];
        let s = compute_derivatives(&m, &dvector![0.0], &u, 2).unwrap();
        let got: Vec<f64> = s.x.iter().map(|v| v[0]).collect();
        assert_eq!(got, vec![0.0, 2.0, -8.0]);
    }

    #[test]
    fn advance_and_lte_on_decay() {
        let m = model(dmatrix![-1.0], DMatrix::zeros(1, 0));
        let s = compute_derivatives(&m, &dvector![1.0], &[], 4).unwrap();
        let x = taylor_advance(&s, 0.1)[0];
        assert!((x - 0.9048375).abs() < 1e-10);
        let true_err = (x - (-0.1f64).exp()).abs();
        assert!((true_err - 8.2e-8).abs() < 0.05e-8);
        let lte = estimate_lte(&s, 0.1);
        assert!((lte - 1e-4 / 24.0).abs() < 1e-18);
        assert!(lte / true_err < 100.0 && true_err / lte < 100.0);
        assert!((estimate_lte(&s, 0.05) * 16.0 / lte - 1.0).abs() < 1e-14);
        assert_eq!(taylor_advance(&s, 1e-300)[0], 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let m = model(dmatrix![-1.0], DMatrix::zeros(1, 0));
        assert!(compute_derivatives(&m, &dvector![1.0, 2.0], &[], 2).is_err());
        assert!(compute_derivatives(&m, &dvector![1.0], &[], 0).is_err());
    }
}
