//! CSV and JSON writers for chains, reports, adaptation traces and the
//! experiment summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::adaptive::AdaptRecord;
use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Write states with header `x1..xd`. Values use the shortest decimal that
/// parses back to the same `f64`.
pub fn emit_chain_csv(states: &[Vec<f64>], path: &Path) -> Result<()> {
    let d = states.first().map_or(0, Vec::len);
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    let header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let mut line = String::new();
    for row in states {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Read a file written by [`emit_chain_csv`] (or any headered numeric CSV).
pub fn read_chain_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let width = reader.headers()?.len();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidData(format!("row {}: cannot parse `{field}`", i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: row.len(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_report(report: &DiagnosticsReport, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_adaptation_csv(trace: &[AdaptRecord], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "batch_index,log_sigma,batch_acceptance").map_err(io)?;
    for r in trace {
        writeln!(out, "{},{},{}", r.batch_index, r.log_sigma, r.batch_acceptance).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub seed: u64,
    pub report: Option<DiagnosticsReport>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `label,seed,acceptance,mess,msjd,ess_1..ess_d,iact_1..iact_d`; failed
/// runs keep their row with empty value cells.
pub fn write_summary_csv(rows: &[SummaryRow], dim: usize, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    let mut header = vec!["label".to_string(), "seed".into(), "acceptance".into(), "mess".into(), "msjd".into()];
    header.extend((1..=dim).map(|j| format!("ess_{j}")));
    header.extend((1..=dim).map(|j| format!("iact_{j}")));
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        let mut cells = vec![row.label.clone(), row.seed.to_string()];
        match &row.report {
            Some(r) => {
                cells.push(r.acceptance_rate.to_string());
                cells.push(cell(r.mess));
                cells.push(r.msjd.to_string());
                cells.extend(r.ess.iter().map(|v| cell(*v)));
                cells.extend(r.iact.iter().map(|v| cell(*v)));
            }
            None => cells.extend(std::iter::repeat_n(String::new(), 3 + 2 * dim)),
        }
        writeln!(out, "{}", cells.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}
