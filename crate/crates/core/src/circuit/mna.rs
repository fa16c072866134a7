use nalgebra::{DMatrix, DVector, RowDVector};

use super::{ElementKind, Netlist, ProbeKind, SwitchConfig};
use crate::{Error, Result};

/// Output rows of one diode in an [`LtiModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiodeOutputs {
    /// Anode-to-cathode current.
    pub current: usize,
    /// Anode-to-cathode voltage.
    pub voltage: usize,
}

/// `x' = A x + B u`, `y = C x + D u` for one switch configuration.
///
/// Outputs are the netlist probes in declaration order followed by a
/// (current, voltage) pair per diode.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
    pub config: SwitchConfig,
    pub n_probes: usize,
    pub diode_outputs: Vec<DiodeOutputs>,
}

impl LtiModel {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut dx = &self.a * x;
        dx.gemv(1.0, &self.b, u, 1.0);
        dx
    }

    pub fn outputs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut y = &self.c * x;
        y.gemv(1.0, &self.d, u, 1.0);
        y
    }

    /// Single output row evaluated at `(x, u)`.
    pub fn output(&self, row: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.c.row(row).dot(&x.transpose()) + self.d.row(row).dot(&u.transpose())
    }

    pub fn probe_outputs(&self, x: &DVector<f64>, u: &DVector<f64>) -> Vec<f64> {
        (0..self.n_probes).map(|r| self.output(r, x, u)).collect()
    }
}

/// Pivot magnitude ratio below which the nodal matrix is treated as singular.
const PIVOT_RATIO_LIMIT: f64 = 1e-15;

/// Assembles the nodal equations for `cfg` and eliminates the algebraic unknowns.
///
/// Capacitors enter as voltage sources equal to their state and inductors as
/// current sources equal to theirs, so one dense LU solve expresses every
/// node voltage and branch current as a linear map of `[x; u]`.
pub fn stamp_and_reduce(net: &Netlist, cfg: &SwitchConfig) -> Result<LtiModel> {
    if cfg.n_gates() != net.n_gates() || cfg.n_diodes() != net.n_diodes() {
        return Err(Error::Dimension(format!(
            "config has {} gates / {} diodes, netlist has {} / {}",
            cfg.n_gates(),
            cfg.n_diodes(),
            net.n_gates(),
            net.n_diodes()
        )));
    }
    let n = net.n_states();
    let m = net.input_labels.len();
    let w = n + m;
    let ground = net.ground;
    let row_of = |node: usize| -> Option<usize> {
        use std::cmp::Ordering::*;
        match node.cmp(&ground) {
            Less => Some(node),
            Equal => None,
            Greater => Some(node - 1),
        }
    };
    let n_nodes = net.nodes.len() - 1;

    // Voltage-type branches get an extra current unknown each.
    let mut branch_of = vec![None; net.elements.len()];
    let mut n_branches = 0;
    for (i, e) in net.elements.iter().enumerate() {
        if matches!(
            e.kind,
            ElementKind::Capacitor { .. } | ElementKind::VoltageSource { .. }
        ) {
            branch_of[i] = Some(n_nodes + n_branches);
            n_branches += 1;
        }
    }
    let size = n_nodes + n_branches;
    let mut g = DMatrix::<f64>::zeros(size, size);
    let mut s = DMatrix::<f64>::zeros(size, w);

    let conductance = |g: &mut DMatrix<f64>, a: usize, b: usize, val: f64| {
        let (ra, rb) = (row_of(a), row_of(b));
        if let Some(i) = ra {
            g[(i, i)] += val;
        }
        if let Some(j) = rb {
            g[(j, j)] += val;
        }
        if let (Some(i), Some(j)) = (ra, rb) {
            g[(i, j)] -= val;
            g[(j, i)] -= val;
        }
    };
    // Current `scale * [x;u][col]` flowing out of `a` through the element into `b`.
    let current = |s: &mut DMatrix<f64>, a: usize, b: usize, col: usize, scale: f64| {
        if let Some(i) = row_of(a) {
            s[(i, col)] -= scale;
        }
        if let Some(j) = row_of(b) {
            s[(j, col)] += scale;
        }
    };

    for (idx, e) in net.elements.iter().enumerate() {
        match &e.kind {
            ElementKind::Resistor { a, b, resistance } => conductance(&mut g, *a, *b, 1.0 / resistance),
            ElementKind::Switch {
                a,
                b,
                gate,
                r_on,
                r_off,
            } => {
                let r = if cfg.gate(*gate) { r_on } else { r_off };
                conductance(&mut g, *a, *b, 1.0 / r);
            }
            ElementKind::Diode {
                anode,
                cathode,
                index,
                r_on,
                r_off,
                forward_drop,
                ..
            } => {
                let on = cfg.diode(*index);
                let r = if on { r_on } else { r_off };
                conductance(&mut g, *anode, *cathode, 1.0 / r);
                if on && *forward_drop != 0.0 {
                    let unit = n + net.unit_input.expect("unit input exists with forward drops");
                    // The drop reduces the anode-to-cathode current by drop / r_on.
                    current(&mut s, *cathode, *anode, unit, forward_drop / r_on);
                }
            }
            ElementKind::Inductor { a, b, state, .. } => current(&mut s, *a, *b, *state, 1.0),
            ElementKind::MutualPair { coils, state, .. } => {
                for (k, (a, b)) in coils.iter().enumerate() {
                    current(&mut s, *a, *b, state + k, 1.0);
                }
            }
            ElementKind::CurrentSource { a, b, input, .. } => current(&mut s, *a, *b, n + input, 1.0),
            ElementKind::Capacitor { a, b, state, .. } => voltage_branch(
                &mut g,
                &mut s,
                row_of(*a),
                row_of(*b),
                branch_of[idx].unwrap(),
                *state,
            ),
            ElementKind::VoltageSource { a, b, input, .. } => voltage_branch(
                &mut g,
                &mut s,
                row_of(*a),
                row_of(*b),
                branch_of[idx].unwrap(),
                n + input,
            ),
        }
    }

    let z = if size == 0 {
        DMatrix::zeros(0, w)
    } else {
        let lu = g.lu();
        let u = lu.u();
        let diag = u.diagonal().map(f64::abs);
        let (lo, hi) = (diag.min(), diag.max());
        if !(lo > 0.0 && lo >= PIVOT_RATIO_LIMIT * hi) {
            return Err(Error::Singular {
                config: cfg.to_string(),
                detail: format!("pivot magnitudes span [{lo:e}, {hi:e}]"),
            });
        }
        lu.solve(&s).ok_or_else(|| Error::Singular {
            config: cfg.to_string(),
            detail: "LU solve failed".into(),
        })?
    };

    let volt = |node: usize| -> RowDVector<f64> {
        match row_of(node) {
            Some(r) => z.row(r).into_owned(),
            None => RowDVector::zeros(w),
        }
    };
    let unit_row = |col: usize| {
        let mut r = RowDVector::zeros(w);
        r[col] = 1.0;
        r
    };

    let mut f = DMatrix::<f64>::zeros(n, w);
    for (idx, e) in net.elements.iter().enumerate() {
        match &e.kind {
            ElementKind::Inductor {
                a,
                b,
                inductance,
                state,
                ..
            } => f.set_row(*state, &((volt(*a) - volt(*b)) / *inductance)),
            ElementKind::MutualPair {
                coils,
                l1,
                l2,
                m,
                state,
                ..
            } => {
                let v1 = volt(coils[0].0) - volt(coils[0].1);
                let v2 = volt(coils[1].0) - volt(coils[1].1);
                let det = l1 * l2 - m * m;
                f.set_row(*state, &((&v1 * *l2 - &v2 * *m) / det));
                f.set_row(state + 1, &((&v2 * *l1 - &v1 * *m) / det));
            }
            ElementKind::Capacitor {
                capacitance, state, ..
            } => f.set_row(*state, &(z.row(branch_of[idx].unwrap()) / *capacitance)),
            _ => {}
        }
    }

    let branch_current = |elem: usize, coil: Option<usize>| -> RowDVector<f64> {
        let e = &net.elements[elem];
        match &e.kind {
            ElementKind::Resistor { a, b, resistance } => (volt(*a) - volt(*b)) / *resistance,
            ElementKind::Switch {
                a,
                b,
                gate,
                r_on,
                r_off,
            } => {
                let r = if cfg.gate(*gate) { r_on } else { r_off };
                (volt(*a) - volt(*b)) / *r
            }
            ElementKind::Diode {
                anode,
                cathode,
                index,
                r_on,
                r_off,
                forward_drop,
                ..
            } => {
                let on = cfg.diode(*index);
                let r = if on { r_on } else { r_off };
                let mut i = (volt(*anode) - volt(*cathode)) / *r;
                if on && *forward_drop != 0.0 {
                    i[n + net.unit_input.unwrap()] -= forward_drop / r_on;
                }
                i
            }
            ElementKind::Inductor { state, .. } => unit_row(*state),
            ElementKind::MutualPair { state, .. } => unit_row(state + coil.unwrap_or(0)),
            ElementKind::CurrentSource { input, .. } => unit_row(n + input),
            ElementKind::Capacitor { .. } | ElementKind::VoltageSource { .. } => {
                z.row(branch_of[elem].unwrap()).into_owned()
            }
        }
    };

    let n_probes = net.n_probes();
    let q = n_probes + 2 * net.n_diodes();
    let mut h = DMatrix::<f64>::zeros(q, w);
    let mut output_labels = Vec::with_capacity(q);
    for (r, p) in net.probes.iter().enumerate() {
        let row = match &p.kind {
            ProbeKind::BranchCurrent { element, coil } => branch_current(*element, *coil),
            ProbeKind::NodeVoltage { node, reference } => volt(*node) - volt(*reference),
        };
        h.set_row(r, &row);
        output_labels.push(p.name.clone());
    }
    let mut diode_outputs = vec![
        DiodeOutputs {
            current: 0,
            voltage: 0
        };
        net.n_diodes()
    ];
    for (idx, e) in net.elements.iter().enumerate() {
        if let ElementKind::Diode {
            anode,
            cathode,
            index,
            ..
        } = &e.kind
        {
            let rc = n_probes + 2 * index;
            h.set_row(rc, &branch_current(idx, None));
            h.set_row(rc + 1, &(volt(*anode) - volt(*cathode)));
            diode_outputs[*index] = DiodeOutputs {
                current: rc,
                voltage: rc + 1,
            };
        }
    }
    for name in &net.diode_names {
        output_labels.push(format!("i({name})"));
        output_labels.push(format!("v({name})"));
    }

    Ok(LtiModel {
        a: f.columns(0, n).into_owned(),
        b: f.columns(n, m).into_owned(),
        c: h.columns(0, n).into_owned(),
        d: h.columns(n, m).into_owned(),
        state_labels: net.state_labels.clone(),
        input_labels: net.input_labels.clone(),
        output_labels,
        config: *cfg,
        n_probes,
        diode_outputs,
    })
}

fn voltage_branch(
    g: &mut DMatrix<f64>,
    s: &mut DMatrix<f64>,
    ra: Option<usize>,
    rb: Option<usize>,
    row: usize,
    col: usize,
) {
    if let Some(i) = ra {
        g[(row, i)] += 1.0;
        g[(i, row)] += 1.0;
    }
    if let Some(j) = rb {
        g[(row, j)] -= 1.0;
        g[(j, row)] -= 1.0;
    }
    s[(row, col)] = 1.0;
}
