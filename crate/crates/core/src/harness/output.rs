//! CSV and manifest writers. Column order is the field order of each row type.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::scheme::{SchemeId, SchemeOutcome};

/// One row of `results.csv`: a scheme evaluated on one S-CSI realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub scheme: SchemeId,
    /// Sweep axis name, `none` for single runs.
    pub axis: String,
    pub value: Option<f64>,
    pub seed_index: u64,
    /// Average sum rate on the test batch, bit/s/Hz.
    pub rate: f64,
    pub std_error: f64,
    pub objective: f64,
    pub psi: f64,
    pub phi: f64,
    /// BS antenna positions in meters, `;`-separated.
    pub positions: String,
    pub converged: bool,
    pub config_hash: String,
}

impl ResultRecord {
    pub fn new(out: &SchemeOutcome, axis: &str, value: Option<f64>, seed_index: u64, config_hash: &str) -> Self {
        Self {
            scheme: out.scheme,
            axis: axis.to_string(),
            value,
            seed_index,
            rate: out.rate.mean,
            std_error: out.rate.std_error,
            objective: out.objective,
            psi: out.config.psi,
            phi: out.config.phi,
            positions: out.config.positions.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(";"),
            converged: out.converged,
            config_hash: config_hash.to_string(),
        }
    }
}

/// One row of `summary.csv`: mean over S-CSI realizations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scheme: SchemeId,
    pub axis: String,
    pub value: Option<f64>,
    pub seeds: usize,
    pub mean_rate: f64,
    pub std_error: f64,
}

/// Groups consecutive records with equal (scheme, axis, value).
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let key = &records[start];
        let end = start
            + records[start..]
                .iter()
                .take_while(|r| r.scheme == key.scheme && r.axis == key.axis && r.value == key.value)
                .count();
        let rates: Vec<f64> = records[start..end].iter().map(|r| r.rate).collect();
        let n = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let var = if rates.len() > 1 { rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        rows.push(SummaryRow {
            scheme: key.scheme,
            axis: key.axis.clone(),
            value: key.value,
            seeds: rates.len(),
            mean_rate: mean,
            std_error: (var / n).sqrt(),
        });
        start = end;
    }
    rows
}

/// One row of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    /// `de` (best fitness per generation) or `ssca` (surrogate per iteration).
    pub kind: String,
    pub scheme: SchemeId,
    pub seed_index: u64,
    pub iteration: usize,
    pub value: f64,
}

pub fn trace_rows(out: &SchemeOutcome, seed_index: u64) -> Vec<TraceRow> {
    let de = out.traces.de.iter().enumerate().map(|(g, v)| TraceRow {
        kind: "de".into(),
        scheme: out.scheme,
        seed_index,
        iteration: g,
        value: *v,
    });
    let ssca = out.traces.ssca.iter().map(|p| TraceRow {
        kind: "ssca".into(),
        scheme: out.scheme,
        seed_index,
        iteration: p.iteration,
        value: p.surrogate,
    });
    de.chain(ssca).collect()
}

pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub git_hash: Option<String>,
    pub config_hash: String,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, git_hash: Option<String>, files: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            git_hash,
            config_hash: cfg.hash(),
            files: files.iter().map(|f| f.to_string()).collect(),
            config: cfg.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(scheme: SchemeId, value: f64, seed: u64, rate: f64) -> ResultRecord {
        ResultRecord {
            scheme,
            axis: "power".into(),
            value: Some(value),
            seed_index: seed,
            rate,
            std_error: 0.1,
            objective: 1.0,
            psi: 0.0,
            phi: -0.25,
            positions: "0;0.025".into(),
            converged: true,
            config_hash: "ab".into(),
        }
    }

    #[test]
    fn csv_layout_is_fixed() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[rec(SchemeId::RirsOnly, 30.0, 2, 1.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "scheme,axis,value,seed_index,rate,std_error,objective,psi,phi,positions,converged,config_hash\n\
             rirs_only,power,30.0,2,1.5,0.1,1.0,0.0,-0.25,0;0.025,true,ab\n"
        );
    }

    #[test]
    fn summary_groups_consecutive_keys() {
        let rows = summarize(&[
            rec(SchemeId::Proposed, 20.0, 0, 1.0),
            rec(SchemeId::Proposed, 20.0, 1, 3.0),
            rec(SchemeId::Proposed, 30.0, 0, 5.0),
        ]);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].seeds, rows[0].mean_rate), (2, 2.0));
        assert!((rows[0].std_error - 1.0).abs() < 1e-12);
        assert_eq!((rows[1].seeds, rows[1].std_error), (1, 0.0));
    }
}
