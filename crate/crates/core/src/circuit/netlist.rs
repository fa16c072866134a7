use std::collections::{BTreeSet, HashMap};

use nalgebra::DVector;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use super::{source::SourceWaveform, SwitchConfig};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("element '{name}': unknown element kind '{kind}'")]
    UnknownKind { name: String, kind: String },
    #[error("duplicate name '{0}'")]
    Duplicate(String),
    #[error("'{owner}' references undeclared node '{node}'")]
    UnknownNode { owner: String, node: String },
    #[error("node '{0}' has no path to ground")]
    FloatingNode(String),
    #[error("element '{element}': {field} must be positive and finite")]
    NonPositive { element: String, field: &'static str },
    #[error("mutual pair '{element}': coupling coefficient {k} must be below 1")]
    Coupling { element: String, k: f64 },
    #[error("probe '{probe}': {detail}")]
    Probe { probe: String, detail: String },
    #[error("element '{element}': {detail}")]
    Source { element: String, detail: String },
}

/// Resistances used for gated switches and diodes in their two states.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchModel {
    #[serde(default = "SwitchModel::default_r_on")]
    pub r_on: f64,
    #[serde(default = "SwitchModel::default_r_off")]
    pub r_off: f64,
}

impl SwitchModel {
    fn default_r_on() -> f64 {
        1e-3
    }
    fn default_r_off() -> f64 {
        1e6
    }
}

impl Default for SwitchModel {
    fn default() -> Self {
        Self {
            r_on: Self::default_r_on(),
            r_off: Self::default_r_off(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Resistor {
        a: NodeId,
        b: NodeId,
        resistance: f64,
    },
    Inductor {
        a: NodeId,
        b: NodeId,
        inductance: f64,
        initial_current: f64,
        state: usize,
    },
    Capacitor {
        a: NodeId,
        b: NodeId,
        capacitance: f64,
        initial_voltage: f64,
        state: usize,
    },
    /// Voltage `v(a) - v(b)`.
    VoltageSource {
        a: NodeId,
        b: NodeId,
        waveform: SourceWaveform,
        input: usize,
    },
    /// Current flowing from `a` through the source into `b`.
    CurrentSource {
        a: NodeId,
        b: NodeId,
        waveform: SourceWaveform,
        input: usize,
    },
    MutualPair {
        coils: [(NodeId, NodeId); 2],
        l1: f64,
        l2: f64,
        m: f64,
        initial_currents: [f64; 2],
        state: usize,
    },
    Switch {
        a: NodeId,
        b: NodeId,
        gate: usize,
        r_on: f64,
        r_off: f64,
    },
    Diode {
        anode: NodeId,
        cathode: NodeId,
        index: usize,
        r_on: f64,
        r_off: f64,
        v_th: f64,
        i_th: f64,
        forward_drop: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub kind: ElementKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeKind {
    /// Current through an element; `coil` selects the winding of a mutual pair.
    BranchCurrent {
        element: usize,
        coil: Option<usize>,
    },
    NodeVoltage {
        node: NodeId,
        reference: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub kind: ProbeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub nodes: Vec<String>,
    pub ground: NodeId,
    pub elements: Vec<Element>,
    pub probes: Vec<Probe>,
    pub switch_model: SwitchModel,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub gate_names: Vec<String>,
    pub diode_names: Vec<String>,
    /// Index of the constant unit input used by diode forward drops, if any.
    pub unit_input: Option<usize>,
}

/// Supplies the input vector `u` and its time derivatives.
pub trait InputSource {
    fn n_inputs(&self) -> usize;
    /// Fills `out[i]` with the i-th derivative of `u` at `t`.
    fn input_derivatives(&self, t: f64, out: &mut [DVector<f64>]);
    /// Times in `(t0, t1)` where some input is not smooth.
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64>;
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetlist {
    nodes: Vec<String>,
    elements: Vec<Value>,
    #[serde(default)]
    probes: Vec<RawProbe>,
    #[serde(default)]
    switch_model: Option<SwitchModel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    name: String,
    kind: String,
    target: String,
    #[serde(default)]
    reference: Option<String>,
}

struct RawHeader {
    kind: String,
    name: String,
}

macro_rules! raw_struct {
    ($name:ident { $($field:ident : $ty:ty $(= $default:expr)?),* $(,)? }) => {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        #[allow(dead_code)]
        struct $name {
            kind: String,
            name: String,
            nodes: Vec<String>,
            $( #[serde(default)] $field: $ty, )*
        }
    };
}

raw_struct!(RawResistor { resistance: Option<f64> });
raw_struct!(RawInductor { inductance: Option<f64>, initial_current: f64 });
raw_struct!(RawCapacitor { capacitance: Option<f64>, initial_voltage: f64 });
raw_struct!(RawSource { waveform: Option<SourceWaveform> });
raw_struct!(RawMutual { l1: Option<f64>, l2: Option<f64>, m: Option<f64>, initial_currents: [f64; 2] });
raw_struct!(RawSwitch { r_on: Option<f64>, r_off: Option<f64> });
raw_struct!(RawDiode {
    r_on: Option<f64>,
    r_off: Option<f64>,
    v_th: Option<f64>,
    i_th: Option<f64>,
    forward_drop: Option<f64>,
});

fn schema<T: serde::de::DeserializeOwned>(v: &Value, what: &str) -> Result<T, NetlistError> {
    T::deserialize(v).map_err(|e| NetlistError::Schema(format!("{what}: {e}")))
}

fn positive(element: &str, field: &'static str, v: Option<f64>) -> Result<f64, NetlistError> {
    match v {
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        Some(_) => Err(NetlistError::NonPositive {
            element: element.to_string(),
            field,
        }),
        None => Err(NetlistError::Schema(format!(
            "element '{element}': missing field '{field}'"
        ))),
    }
}

fn finite(element: &str, field: &'static str, v: f64) -> Result<f64, NetlistError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NetlistError::Schema(format!(
            "element '{element}': {field} must be finite"
        )))
    }
}

/// Parses and validates a netlist JSON document.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let value: Value = serde_json::from_str(text).map_err(|e| NetlistError::Schema(e.to_string()))?;
    Netlist::from_value(&value)
}

impl Netlist {
    pub fn from_value(value: &Value) -> Result<Self, NetlistError> {
        let raw: RawNetlist = schema(value, "netlist")?;
        let switch_model = raw.switch_model.unwrap_or_default();
        positive("switch_model", "r_on", Some(switch_model.r_on))?;
        positive("switch_model", "r_off", Some(switch_model.r_off))?;

        let mut node_ids = HashMap::new();
        for (i, n) in raw.nodes.iter().enumerate() {
            if node_ids.insert(n.clone(), i).is_some() {
                return Err(NetlistError::Duplicate(n.clone()));
            }
        }
        let ground = *node_ids
            .get("gnd")
            .ok_or_else(|| NetlistError::Schema("node list must contain \"gnd\"".into()))?;

        let mut names = BTreeSet::new();
        let mut elements = Vec::with_capacity(raw.elements.len());
        let mut state_labels = Vec::new();
        let mut input_labels = Vec::new();
        let mut gate_names = Vec::new();
        let mut diode_names = Vec::new();
        let mut needs_unit = false;

        for v in &raw.elements {
            let field = |key: &str| {
                v.get(key)
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| NetlistError::Schema(format!("element without string \"{key}\"")))
            };
            let header = RawHeader {
                kind: field("kind")?,
                name: field("name")?,
            };
            let name = header.name;
            if !names.insert(name.clone()) {
                return Err(NetlistError::Duplicate(name));
            }
            let nodes_of = |list: &[String], want: usize| -> Result<Vec<NodeId>, NetlistError> {
                if list.len() != want {
                    return Err(NetlistError::Schema(format!(
                        "element '{name}' needs {want} nodes, got {}",
                        list.len()
                    )));
                }
                list.iter()
                    .map(|n| {
                        node_ids.get(n).copied().ok_or_else(|| NetlistError::UnknownNode {
                            owner: name.clone(),
                            node: n.clone(),
                        })
                    })
                    .collect()
            };
            let kind = match header.kind.as_str() {
                "resistor" => {
                    let r: RawResistor = schema(v, &name)?;
                    let n = nodes_of(&r.nodes, 2)?;
                    ElementKind::Resistor {
                        a: n[0],
                        b: n[1],
                        resistance: positive(&name, "resistance", r.resistance)?,
                    }
                }
                "inductor" => {
                    let r: RawInductor = schema(v, &name)?;
                    let n = nodes_of(&r.nodes, 2)?;
                    state_labels.push(format!("i({name})"));
                    ElementKind::Inductor {
                        a: n[0],
                        b: n[1],
                        inductance: positive(&name, "inductance", r.inductance)?,
                        initial_current: finite(&name, "initial_current", r.initial_current)?,
                        state: state_labels.len() - 1,
                    }
                }
                "capacitor" => {
                    let r: RawCapacitor = schema(v, &name)?;
                    let n = nodes_of(&r.nodes, 2)?;
                    state_labels.push(format!("v({name})"));
                    ElementKind::Capacitor {
                        a: n[0],
                        b: n[1],
                        capacitance: positive(&name, "capacitance", r.capacitance)?,
                        initial_voltage: finite(&name, "initial_voltage", r.initial_voltage)?,
                        state: state_labels.len() - 1,
                    }
                }
                kind @ ("voltage_source" | "current_source") => {
                    let r: RawSource = schema(v, &name)?;
                    let n = nodes_of(&r.nodes, 2)?;
                    let waveform = r.waveform.ok_or_else(|| {
                        NetlistError::Schema(format!("element '{name}': missing field 'waveform'"))
                    })?;
                    waveform.validate().map_err(|detail| NetlistError::Source {
                        element: name.clone(),
                        detail,
                    })?;
                    input_labels.push(name.clone());
                    let input = input_labels.len() - 1;
                    if kind == "voltage_source" {
                        ElementKind::VoltageSource {
                            a: n[0],
                            b: n[1],
                            waveform,
                            input,
                        }
                    } else {
                        ElementKind::CurrentSource {
                            a: n[0],
                            b: n[1],
                            waveform,
                            input,
                        }
                    }
                }
                "mutual_pair" => {
                    let r: RawMutual = schema(v, &name)?;
                    let n = nodes_of(&r.nodes, 4)?;
                    let l1 = positive(&name, "l1", r.l1)?;
                    let l2 = positive(&name, "l2", r.l2)?;
                    let m = r.m.ok_or_else(|| {
                        NetlistError::Schema(format!("element '{name}': missing field 'm'"))
                    })?;
                    let m = finite(&name, "m", m)?;
                    let k = m.abs() / (l1 * l2).sqrt();
                    if k >= 1.0 {
                        return Err(NetlistError::Coupling { element: name, k });
                    }
                    state_labels.push(format!("i({name}.1)"));
                    state_labels.push(format!("i({name}.2)"));
                    ElementKind::MutualPair {
                        coils: [(n[0], n[1]), (n[2], n[3])],
                        l1,
                        l2,
                        m,
                        initial_currents: [
                            finite(&name, "initial_currents", r.initial_currents[0])?,
                            finite(&name, "initial_currents", r.initial_currents[1])?,
                        ],
                        state: state_labels.len() - 2,
                    }
                }
                "switch" => {
                    let r: RawSwitch = schema(v, &name)?;
                    let n = nodes_of(&r.nodes, 2)?;
                    gate_names.push(name.clone());
                    ElementKind::Switch {
                        a: n[0],
                        b: n[1],
                        gate: gate_names.len() - 1,
                        r_on: positive(&name, "r_on", Some(r.r_on.unwrap_or(switch_model.r_on)))?,
                        r_off: positive(&name, "r_off", Some(r.r_off.unwrap_or(switch_model.r_off)))?,
                    }
                }
                "diode" => {
                    let r: RawDiode = schema(v, &name)?;
                    let n = nodes_of(&r.nodes, 2)?;
                    diode_names.push(name.clone());
                    let forward_drop = finite(&name, "forward_drop", r.forward_drop.unwrap_or(0.0))?;
                    needs_unit |= forward_drop != 0.0;
                    ElementKind::Diode {
                        anode: n[0],
                        cathode: n[1],
                        index: diode_names.len() - 1,
                        r_on: positive(&name, "r_on", Some(r.r_on.unwrap_or(switch_model.r_on)))?,
                        r_off: positive(&name, "r_off", Some(r.r_off.unwrap_or(switch_model.r_off)))?,
                        v_th: finite(&name, "v_th", r.v_th.unwrap_or(0.7))?,
                        i_th: finite(&name, "i_th", r.i_th.unwrap_or(0.0))?,
                        forward_drop,
                    }
                }
                other => {
                    return Err(NetlistError::UnknownKind {
                        name,
                        kind: other.to_string(),
                    })
                }
            };
            elements.push(Element { name, kind });
        }

        if gate_names.len() > SwitchConfig::MAX_SWITCHES || diode_names.len() > SwitchConfig::MAX_SWITCHES {
            return Err(NetlistError::Schema(format!(
                "at most {} switches and {} diodes are supported",
                SwitchConfig::MAX_SWITCHES,
                SwitchConfig::MAX_SWITCHES
            )));
        }

        let unit_input = needs_unit.then(|| {
            input_labels.push("1".to_string());
            input_labels.len() - 1
        });

        let element_ids: HashMap<&str, usize> = elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.as_str(), i))
            .collect();
        let mut probe_names = BTreeSet::new();
        let mut probes = Vec::with_capacity(raw.probes.len());
        for p in &raw.probes {
            if !probe_names.insert(p.name.clone()) {
                return Err(NetlistError::Duplicate(p.name.clone()));
            }
            let bad = |detail: String| NetlistError::Probe {
                probe: p.name.clone(),
                detail,
            };
            let kind = match p.kind.as_str() {
                "branch_current" => {
                    let (base, coil) = match element_ids.get(p.target.as_str()) {
                        Some(&i) => (i, None),
                        None => match p.target.rsplit_once('.') {
                            Some((base, idx @ ("1" | "2"))) => (
                                *element_ids
                                    .get(base)
                                    .ok_or_else(|| bad(format!("unknown element '{}'", p.target)))?,
                                Some(if idx == "1" { 0 } else { 1 }),
                            ),
                            _ => return Err(bad(format!("unknown element '{}'", p.target))),
                        },
                    };
                    let is_mutual = matches!(elements[base].kind, ElementKind::MutualPair { .. });
                    if is_mutual != coil.is_some() {
                        return Err(bad(
                            "mutual pairs are probed per coil as '<name>.1' or '<name>.2'".into(),
                        ));
                    }
                    ProbeKind::BranchCurrent { element: base, coil }
                }
                "node_voltage" => {
                    let lookup = |n: &str| {
                        node_ids.get(n).copied().ok_or_else(|| NetlistError::UnknownNode {
                            owner: p.name.clone(),
                            node: n.to_string(),
                        })
                    };
                    ProbeKind::NodeVoltage {
                        node: lookup(&p.target)?,
                        reference: match &p.reference {
                            Some(r) => lookup(r)?,
                            None => ground,
                        },
                    }
                }
                other => return Err(bad(format!("unknown probe kind '{other}'"))),
            };
            probes.push(Probe {
                name: p.name.clone(),
                kind,
            });
        }

        let net = Netlist {
            nodes: raw.nodes,
            ground,
            elements,
            probes,
            switch_model,
            state_labels,
            input_labels,
            gate_names,
            diode_names,
            unit_input,
        };
        net.check_connected()?;
        Ok(net)
    }

    fn check_connected(&self) -> Result<(), NetlistError> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for e in &self.elements {
            for (a, b) in e.terminals() {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
        let g = find(&mut parent, self.ground);
        for i in 0..n {
            if find(&mut parent, i) != g {
                return Err(NetlistError::FloatingNode(self.nodes[i].clone()));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn n_gates(&self) -> usize {
        self.gate_names.len()
    }

    pub fn n_diodes(&self) -> usize {
        self.diode_names.len()
    }

    pub fn n_probes(&self) -> usize {
        self.probes.len()
    }

    pub fn probe_names(&self) -> Vec<String> {
        self.probes.iter().map(|p| p.name.clone()).collect()
    }

    pub fn probe_index(&self, name: &str) -> Option<usize> {
        self.probes.iter().position(|p| p.name == name)
    }

    pub fn gate_index(&self, name: &str) -> Option<usize> {
        self.gate_names.iter().position(|g| g == name)
    }

    pub fn diode_index(&self, name: &str) -> Option<usize> {
        self.diode_names.iter().position(|d| d == name)
    }

    /// All gates off, all diodes blocked.
    pub fn empty_config(&self) -> SwitchConfig {
        SwitchConfig::new(self.n_gates(), self.n_diodes())
    }

    pub fn initial_state(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_states());
        for e in &self.elements {
            match &e.kind {
                ElementKind::Inductor {
                    initial_current,
                    state,
                    ..
                } => x[*state] = *initial_current,
                ElementKind::Capacitor {
                    initial_voltage,
                    state,
                    ..
                } => x[*state] = *initial_voltage,
                ElementKind::MutualPair {
                    initial_currents,
                    state,
                    ..
                } => {
                    x[*state] = initial_currents[0];
                    x[*state + 1] = initial_currents[1];
                }
                _ => {}
            }
        }
        x
    }

    /// Diode parameters `(v_th, i_th)` by diode index.
    pub fn diode_thresholds(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.7, 0.0); self.n_diodes()];
        for e in &self.elements {
            if let ElementKind::Diode {
                index, v_th, i_th, ..
            } = e.kind
            {
                out[index] = (v_th, i_th);
            }
        }
        out
    }

    pub fn inputs_at(&self, t: f64) -> DVector<f64> {
        let mut out = [DVector::zeros(self.n_inputs())];
        self.input_derivatives(t, &mut out);
        let [u] = out;
        u
    }
}

impl Element {
    /// Node pairs this element connects.
    pub fn terminals(&self) -> Vec<(NodeId, NodeId)> {
        match &self.kind {
            ElementKind::Resistor { a, b, .. }
            | ElementKind::Inductor { a, b, .. }
            | ElementKind::Capacitor { a, b, .. }
            | ElementKind::VoltageSource { a, b, .. }
            | ElementKind::CurrentSource { a, b, .. }
            | ElementKind::Switch { a, b, .. } => vec![(*a, *b)],
            ElementKind::Diode { anode, cathode, .. } => vec![(*anode, *cathode)],
            ElementKind::MutualPair { coils, .. } => coils.to_vec(),
        }
    }
}

impl InputSource for Netlist {
    fn n_inputs(&self) -> usize {
        self.input_labels.len()
    }

    fn input_derivatives(&self, t: f64, out: &mut [DVector<f64>]) {
        let order = out.len();
        let mut scratch = [0.0; 16];
        let mut heap = Vec::new();
        let buf: &mut [f64] = if order <= scratch.len() {
            &mut scratch[..order]
        } else {
            heap.resize(order, 0.0);
            &mut heap
        };
        for e in &self.elements {
            if let ElementKind::VoltageSource { waveform, input, .. }
            | ElementKind::CurrentSource { waveform, input, .. } = &e.kind
            {
                waveform.derivatives(t, buf);
                for (i, v) in buf.iter().enumerate() {
                    out[i][*input] = *v;
                }
            }
        }
        if let Some(u) = self.unit_input {
            out[0][u] = 1.0;
            for o in out.iter_mut().skip(1) {
                o[u] = 0.0;
            }
        }
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut all: Vec<f64> =
            self.elements
                .iter()
                .flat_map(|e| match &e.kind {
                    ElementKind::VoltageSource { waveform, .. }
                    | ElementKind::CurrentSource { waveform, .. } => waveform.breakpoints(t0, t1),
                    _ => Vec::new(),
                })
                .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rc() -> &'static str {
        r#"{
            "nodes": ["gnd", "n1"],
            "elements": [
                {"kind": "resistor", "name": "R1", "nodes": ["n1", "gnd"], "resistance": 1.0},
                {"kind": "capacitor", "name": "C1", "nodes": ["n1", "gnd"], "capacitance": 1.0, "initial_voltage": 1.0}
            ],
            "probes": [{"name": "v_c", "kind": "node_voltage", "target": "n1"}]
        }"#
    }

    #[test]
    fn minimal_rc_has_one_state() {
        let n = parse_netlist(rc()).unwrap();
        assert_eq!(n.n_states(), 1);
        assert_eq!(n.initial_state()[0], 1.0);
    }

    #[test]
    fn receiver_tank_has_two_states() {
        let n = parse_netlist(
            r#"{
            "nodes": ["gnd", "a", "b"],
            "elements": [
                {"kind": "inductor", "name": "Lsi", "nodes": ["a", "b"], "inductance": 255e-6},
                {"kind": "capacitor", "name": "Csi", "nodes": ["b", "gnd"], "capacitance": 62.34e-9},
                {"kind": "resistor", "name": "Rsi", "nodes": ["gnd", "a"], "resistance": 0.15}
            ]
        }"#,
        )
        .unwrap();
        assert_eq!(n.n_states(), 2);
    }

    #[test]
    fn floating_node_is_rejected() {
        let err = parse_netlist(
            r#"{"nodes": ["gnd", "n1", "n2"],
                "elements": [{"kind": "resistor", "name": "R", "nodes": ["n1", "n2"], "resistance": 1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, NetlistError::FloatingNode(_)), "{err}");
    }

    #[test]
    fn validation_errors() {
        let cases = [
            (
                r#"{"nodes": ["gnd"], "elements": [{"kind": "memristor", "name": "X", "nodes": []}]}"#,
                "unknown element kind",
            ),
            (
                r#"{"nodes": ["gnd", "a"], "elements": [
                {"kind": "resistor", "name": "R", "nodes": ["a", "gnd"], "resistance": 1},
                {"kind": "resistor", "name": "R", "nodes": ["a", "gnd"], "resistance": 1}]}"#,
                "duplicate",
            ),
            (
                r#"{"nodes": ["gnd", "a"], "elements": [
                {"kind": "resistor", "name": "R", "nodes": ["a", "gnd"], "resistance": -1}]}"#,
                "positive",
            ),
            (
                r#"{"nodes": ["gnd", "a", "b"], "elements": [
                {"kind": "mutual_pair", "name": "M", "nodes": ["a", "gnd", "b", "gnd"], "l1": 1, "l2": 1, "m": 1}]}"#,
                "coupling",
            ),
            (r#"{"nodes": ["a"], "elements": []}"#, "gnd"),
            (
                r#"{"nodes": ["gnd", "a"], "elements": [
                {"kind": "resistor", "name": "R", "nodes": ["a", "gnd"], "resistance": 1, "colour": 3}]}"#,
                "schema",
            ),
        ];
        for (text, needle) in cases {
            let msg = parse_netlist(text).unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg:?} should mention {needle:?}");
        }
    }

    #[test]
    fn mutual_probes_need_coil_suffix() {
        let base = |target: &str| {
            format!(
                r#"{{"nodes": ["gnd", "a", "b"], "elements": [
                {{"kind": "mutual_pair", "name": "M", "nodes": ["a", "gnd", "b", "gnd"], "l1": 1, "l2": 1, "m": 0.5}},
                {{"kind": "resistor", "name": "R1", "nodes": ["a", "gnd"], "resistance": 1}},
                {{"kind": "resistor", "name": "R2", "nodes": ["b", "gnd"], "resistance": 1}}],
                "probes": [{{"name": "i", "kind": "branch_current", "target": "{target}"}}]}}"#
            )
        };
        assert!(parse_netlist(&base("M.2")).is_ok());
        assert!(parse_netlist(&base("M")).is_err());
        assert!(parse_netlist(&base("R1.1")).is_err());
    }
}
