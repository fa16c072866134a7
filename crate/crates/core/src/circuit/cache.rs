use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use super::{stamp_and_reduce, LtiModel, Netlist, SwitchConfig};
use crate::Result;

/// Memoized [`stamp_and_reduce`] keyed by switch configuration.
///
/// Shareable across threads; a configuration is reduced at most once.
#[derive(Debug)]
pub struct ModeCache {
    netlist: Arc<Netlist>,
    models: RwLock<HashMap<SwitchConfig, Arc<LtiModel>>>,
    reductions: AtomicUsize,
    hits: AtomicUsize,
}

impl ModeCache {
    pub fn new(netlist: Arc<Netlist>) -> Self {
        Self {
            netlist,
            models: RwLock::new(HashMap::new()),
            reductions: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
        }
    }

    pub fn netlist(&self) -> &Arc<Netlist> {
        &self.netlist
    }

    pub fn get(&self, cfg: &SwitchConfig) -> Result<Arc<LtiModel>> {
        if let Some(m) = self.models.read().unwrap().get(cfg) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Arc::clone(m));
        }
        let mut models = self.models.write().unwrap();
        if let Some(m) = models.get(cfg) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Arc::clone(m));
        }
        let model = Arc::new(stamp_and_reduce(&self.netlist, cfg)?);
        self.reductions.fetch_add(1, Ordering::Relaxed);
        models.insert(*cfg, Arc::clone(&model));
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.models.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reductions(&self) -> usize {
        self.reductions.load(Ordering::Relaxed)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_netlist;

    fn bridge() -> Arc<Netlist> {
        Arc::new(
            parse_netlist(
                r#"{"nodes": ["gnd", "p", "a", "b"], "elements": [
                {"kind": "voltage_source", "name": "V", "nodes": ["p", "gnd"], "waveform": {"type": "dc", "value": 10}},
                {"kind": "switch", "name": "S1", "nodes": ["p", "a"]},
                {"kind": "switch", "name": "S2", "nodes": ["a", "gnd"]},
                {"kind": "switch", "name": "S3", "nodes": ["p", "b"]},
                {"kind": "switch", "name": "S4", "nodes": ["b", "gnd"]},
                {"kind": "inductor", "name": "L", "nodes": ["a", "b"], "inductance": 1e-3},
                {"kind": "diode", "name": "D", "nodes": ["a", "b"]}]}"#,
            )
            .unwrap(),
        )
    }

    #[test]
    fn memoizes_per_config() {
        let cache = ModeCache::new(bridge());
        let c0 = cache
            .netlist()
            .empty_config()
            .with_gate(0, true)
            .with_gate(3, true);
        let a = cache.get(&c0).unwrap();
        let b = cache.get(&c0).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.reductions(), 1);
        let c1 = c0.with_gate(0, false).with_gate(1, true);
        let c2 = c1.with_gate(3, false).with_gate(2, true);
        cache.get(&c1).unwrap();
        cache.get(&c2).unwrap();
        cache.get(&c1).unwrap();
        assert_eq!(cache.len(), 3);
        assert_eq!(cache.hits(), 2);
    }

    #[test]
    fn diode_bit_changes_model() {
        let cache = ModeCache::new(bridge());
        let off = cache.netlist().empty_config();
        let on = off.with_diode(0, true);
        assert_ne!(cache.get(&off).unwrap().a, cache.get(&on).unwrap().a);
    }
}
