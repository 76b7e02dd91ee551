use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{PsrReport, SelectionSummary, Summary};
use crate::error::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_summary_json(path: &Path, summary: &SelectionSummary) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, summary)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn cells(s: Option<&Summary>) -> [String; 4] {
    match s {
        Some(s) => [s.median, s.mean, s.hpdi_lo, s.hpdi_hi].map(|v| v.to_string()),
        None => Default::default(),
    }
}

/// One row per selected pathway: PPI, then posterior median, mean and HPDI of
/// τ_j and of IE_j (both conditional on joint inclusion).
pub fn write_summary_csv(path: &Path, summary: &SelectionSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mediator", "ppi_joint", "tau_pm", "tau_mean", "tau_hpdi_lo", "tau_hpdi_hi", "ie_pm", "ie_mean", "ie_hpdi_lo",
        "ie_hpdi_hi",
    ])?;
    for &j in &summary.selected {
        let mut row = vec![summary.mediators[j].clone(), summary.ppi_joint[j].to_string()];
        row.extend(cells(summary.effects.tau_per_mediator[j].as_ref()));
        row.extend(cells(summary.effects.ie_per_mediator[j].as_ref()));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plot data: per-mediator PPIs with the κ line repeated on each row.
pub fn write_ppi_csv(path: &Path, summary: &SelectionSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mediator", "ppi_gamma", "ppi_joint", "kappa"])?;
    for (j, name) in summary.mediators.iter().enumerate() {
        w.write_record([
            name.clone(),
            summary.ppi_gamma[j].to_string(),
            summary.ppi_joint[j].to_string(),
            summary.kappa.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_psr_csv(path: &Path, report: &PsrReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["parameter", "psr", "below_threshold"])?;
    for e in &report.entries {
        let (v, ok) = match e.psr {
            Some(v) => (v.to_string(), (v < report.threshold).to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([e.name.as_str(), &v, &ok])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
