use std::fmt;

/// On/off bit per gated switch and conducting/blocked bit per diode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SwitchConfig {
    gates: u64,
    diodes: u64,
    n_gates: u8,
    n_diodes: u8,
}

impl SwitchConfig {
    pub const MAX_SWITCHES: usize = 64;

    /// All gates off, all diodes blocked.
    pub fn new(n_gates: usize, n_diodes: usize) -> Self {
        assert!(n_gates <= Self::MAX_SWITCHES && n_diodes <= Self::MAX_SWITCHES);
        Self {
            gates: 0,
            diodes: 0,
            n_gates: n_gates as u8,
            n_diodes: n_diodes as u8,
        }
    }

    pub fn n_gates(&self) -> usize {
        self.n_gates as usize
    }

    pub fn n_diodes(&self) -> usize {
        self.n_diodes as usize
    }

    pub fn gate(&self, i: usize) -> bool {
        debug_assert!(i < self.n_gates());
        self.gates >> i & 1 == 1
    }

    pub fn diode(&self, i: usize) -> bool {
        debug_assert!(i < self.n_diodes());
        self.diodes >> i & 1 == 1
    }

    pub fn set_gate(&mut self, i: usize, on: bool) {
        assert!(i < self.n_gates(), "gate {i} out of range");
        self.gates = (self.gates & !(1 << i)) | ((on as u64) << i);
    }

    pub fn set_diode(&mut self, i: usize, conducting: bool) {
        assert!(i < self.n_diodes(), "diode {i} out of range");
        self.diodes = (self.diodes & !(1 << i)) | ((conducting as u64) << i);
    }

    pub fn with_diode(mut self, i: usize, conducting: bool) -> Self {
        self.set_diode(i, conducting);
        self
    }

    pub fn with_gate(mut self, i: usize, on: bool) -> Self {
        self.set_gate(i, on);
        self
    }

    pub fn toggle_diode(&mut self, i: usize) {
        let c = self.diode(i);
        self.set_diode(i, !c);
    }

    pub fn gate_bits(&self) -> u64 {
        self.gates
    }

    pub fn diode_bits(&self) -> u64 {
        self.diodes
    }

    pub fn conducting_count(&self) -> u32 {
        self.diodes.count_ones()
    }
}

impl fmt::Display for SwitchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G:")?;
        for i in 0..self.n_gates() {
            write!(f, "{}", self.gate(i) as u8)?;
        }
        write!(f, " D:")?;
        for i in 0..self.n_diodes() {
            write!(f, "{}", self.diode(i) as u8)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_are_independent() {
        let mut c = SwitchConfig::new(2, 4);
        c.set_diode(0, true);
        c.set_diode(3, true);
        c.toggle_diode(0);
        assert!(!c.diode(0) && !c.diode(1) && !c.diode(2) && c.diode(3));
        c.set_gate(1, true);
        assert_eq!(c.to_string(), "G:01 D:0001");
        assert_ne!(c, SwitchConfig::new(2, 4).with_gate(1, true));
    }
}
