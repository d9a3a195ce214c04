//! First/second-law verdicts over run diagnostics.

use std::fmt;
use std::io::Read;

use crate::dynamics::{DiagnosticsRecord, DIAGNOSTICS_HEADER};

#[derive(Debug, thiserror::Error)]
#[error("diagnostics line {line}: {msg}")]
pub struct ThermoParseError {
    pub line: u64,
    pub msg: String,
}

/// Read a diagnostics CSV as written by the `run` subcommand. Columns not
/// in the file are zero.
pub fn parse_diagnostics_csv(input: impl Read) -> Result<Vec<DiagnosticsRecord>, ThermoParseError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| ThermoParseError { line: 1, msg: e.to_string() })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != DIAGNOSTICS_HEADER {
        return Err(ThermoParseError {
            line: 1,
            msg: format!("expected header `{DIAGNOSTICS_HEADER}`, found `{header}`"),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ThermoParseError {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, ThermoParseError> {
            let s = rec.get(i).unwrap_or("");
            s.trim().parse::<f64>().map_err(|_| ThermoParseError {
                line,
                msg: format!("column {} `{s}` is not a number", i + 1),
            })
        };
        let step = rec.get(0).unwrap_or("").trim().parse::<usize>().map_err(|_| ThermoParseError {
            line,
            msg: format!("step `{}` is not an integer", rec.get(0).unwrap_or("")),
        })?;
        out.push(DiagnosticsRecord {
            step,
            time: num(1)?,
            hamiltonian: num(2)?,
            entropy: num(3)?,
            free_energy: num(4)?,
            entropy_rate: num(5)?,
            hermiticity_defect: 0.0,
            min_eigenvalue: 0.0,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoCriteria {
    /// Allowed `|H(t) − H(0)|`.
    pub energy_band: f64,
    /// Allowed entropy increase between consecutive records.
    pub entropy_tol: f64,
}

impl Default for ThermoCriteria {
    fn default() -> Self {
        Self {
            energy_band: 1e-10,
            entropy_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermoVerdict {
    pub records: usize,
    pub max_energy_drift: f64,
    pub worst_energy_step: usize,
    /// Largest `S_{i} − S_{i−1}`; negative when entropy decreases everywhere.
    pub max_entropy_increment: f64,
    pub worst_entropy_step: usize,
    pub first_law: bool,
    pub second_law: bool,
    pub criteria: ThermoCriteria,
}

impl ThermoVerdict {
    pub fn pass(&self) -> bool {
        self.first_law && self.second_law
    }
}

pub fn thermo_report(records: &[DiagnosticsRecord], criteria: ThermoCriteria) -> ThermoVerdict {
    let h0 = records.first().map_or(0.0, |r| r.hamiltonian);
    let (mut max_dh, mut worst_dh) = (0.0, records.first().map_or(0, |r| r.step));
    for r in records {
        let d = (r.hamiltonian - h0).abs();
        if d > max_dh || d.is_nan() {
            max_dh = d;
            worst_dh = r.step;
        }
    }
    let (mut max_ds, mut worst_ds) = (f64::NEG_INFINITY, 0);
    for pair in records.windows(2) {
        let d = pair[1].entropy - pair[0].entropy;
        if d > max_ds || d.is_nan() {
            max_ds = d;
            worst_ds = pair[1].step;
        }
    }
    if records.len() < 2 {
        max_ds = 0.0;
    }
    ThermoVerdict {
        records: records.len(),
        max_energy_drift: max_dh,
        worst_energy_step: worst_dh,
        max_entropy_increment: max_ds,
        worst_entropy_step: worst_ds,
        first_law: max_dh <= criteria.energy_band,
        second_law: max_ds <= criteria.entropy_tol,
        criteria,
    }
}

impl fmt::Display for ThermoVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pf = |b: bool| if b { "PASS" } else { "FAIL" };
        writeln!(f, "[thermo] {} records", self.records)?;
        writeln!(
            f,
            "{:<44} {:>12.4e} {:>16} worst_step={:<6} {}",
            "energy drift max|H-H0|",
            self.max_energy_drift,
            format!("<= {:.1e}", self.criteria.energy_band),
            self.worst_energy_step,
            pf(self.first_law)
        )?;
        writeln!(
            f,
            "{:<44} {:>12.4e} {:>16} worst_step={:<6} {}",
            "entropy increment max dS",
            self.max_entropy_increment,
            format!("<= {:.1e}", self.criteria.entropy_tol),
            self.worst_entropy_step,
            pf(self.second_law)
        )
    }
}
