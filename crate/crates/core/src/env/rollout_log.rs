//! Line-delimited JSON log of environment steps, one record per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: usize,
    pub step: usize,
    pub action: Vec<f64>,
    /// Cube position after the step.
    pub achieved: [f64; 3],
    /// Goal that was active during the step.
    pub goal: [f64; 3],
    pub reward: f64,
    pub success: bool,
}

pub fn write_records<W: Write>(mut w: W, records: &[StepRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Input(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parses a log; blank lines are skipped, malformed lines are reported with
/// their 1-based line number.
pub fn read_records<R: BufRead>(r: R) -> Result<Vec<StepRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StepRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Input(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
