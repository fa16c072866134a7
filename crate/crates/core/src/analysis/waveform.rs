use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::{Error, Result};

/// Multi-signal trajectory on one shared, strictly increasing time base.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Waveform {
    pub names: Vec<String>,
    pub t: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub meta: BTreeMap<String, String>,
}

impl Waveform {
    pub fn new(names: Vec<String>) -> Self {
        let columns = vec![Vec::new(); names.len()];
        Self {
            names,
            t: Vec::new(),
            columns,
            meta: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Appends a row; rows at or before the last time are dropped.
    pub fn push(&mut self, t: f64, values: &[f64]) -> bool {
        debug_assert_eq!(values.len(), self.columns.len());
        if self.t.last().is_some_and(|&last| t <= last) {
            return false;
        }
        self.t.push(t);
        for (c, v) in self.columns.iter_mut().zip(values) {
            c.push(*v);
        }
        true
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Analysis(format!("no signal named '{name}'")))
    }

    pub fn signal(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.index(name)?])
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.t.first()?, *self.t.last()?))
    }

    /// Linear interpolation of column `col` at `t`, which must lie within the record.
    pub fn value_at(&self, col: usize, t: f64) -> Result<f64> {
        let (a, b) = self
            .span()
            .ok_or_else(|| Error::Analysis("empty waveform".into()))?;
        if t < a || t > b {
            return Err(Error::Analysis(format!(
                "t = {t:e} outside record [{a:e}, {b:e}]"
            )));
        }
        let j = self.t.partition_point(|&x| x <= t);
        if j == self.t.len() {
            return Ok(self.columns[col][j - 1]);
        }
        let (t0, t1) = (self.t[j - 1], self.t[j]);
        let (v0, v1) = (self.columns[col][j - 1], self.columns[col][j]);
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    /// Header `t,<names>` then one row per sample, 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        write!(w, "t")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (i, t) in self.t.iter().enumerate() {
            write!(w, "{t:.16e}")?;
            for c in &self.columns {
                write!(w, ",{:.16e}", c[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Analysis("empty waveform CSV".into()))??;
        let mut cols = header.split(',');
        if cols.next().map(str::trim) != Some("t") {
            return Err(Error::Analysis(
                "waveform CSV must start with a 't' column".into(),
            ));
        }
        let mut w = Waveform::new(cols.map(|s| s.trim().to_string()).collect());
        let mut row = Vec::with_capacity(w.names.len());
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            row.clear();
            let mut fields = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Analysis(format!("bad number on CSV line {}", n + 2)))
            };
            let t = parse(fields.next())?;
            for _ in 0..w.names.len() {
                row.push(parse(fields.next())?);
            }
            if !w.push(t, &row) {
                return Err(Error::Analysis(format!(
                    "non-increasing time on CSV line {}",
                    n + 2
                )));
            }
        }
        Ok(w)
    }
}
