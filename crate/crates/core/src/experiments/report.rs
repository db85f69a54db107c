//! Experiment outputs: one CSV row per cell, a JSON report with the full
//! per-cell detail, and optional ECDF dumps. Runtimes go to a separate file so
//! the other artifacts are reproducible byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::counterexample::CounterexampleReport;
use super::coverage::CoverageCell;
use super::ga::GaResult;
use super::ks::EcdfRow;
use super::rates::{MdepResult, RateResult};
use crate::error::{Error, Result};
use crate::io::write_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub cell: usize,
    pub kind: String,
    pub n: usize,
    pub p: usize,
    #[serde(rename = "M")]
    pub block_len: Option<usize>,
    pub theta: Option<f64>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub replications: usize,
    /// Coverage, KS statistic or fitted slope.
    pub value: f64,
    pub se: Option<f64>,
    /// Nominal level or theoretical slope.
    pub reference: Option<f64>,
    pub p_value: Option<f64>,
    pub stream_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CellDetail {
    Coverage(CoverageCell),
    Ga(GaResult),
    Rate(RateResult),
    Mdep(MdepResult),
    Counterexample(CounterexampleReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub base_seed: u64,
    pub rows: Vec<CellRow>,
    pub details: Vec<CellDetail>,
    #[serde(skip)]
    pub ecdf: Vec<(usize, Vec<EcdfRow>)>,
    /// Wall time per cell in milliseconds.
    #[serde(skip)]
    pub runtimes_ms: Vec<f64>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn write_cells_csv(rows: &[CellRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "cell", "kind", "n", "p", "M", "theta", "q", "alpha", "replications", "value", "se", "reference", "p_value",
        "stream_id",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.cell.to_string(),
            r.kind.clone(),
            r.n.to_string(),
            r.p.to_string(),
            r.block_len.map(|m| m.to_string()).unwrap_or_default(),
            opt(r.theta),
            opt(r.q),
            opt(r.alpha),
            r.replications.to_string(),
            format!("{:?}", r.value),
            opt(r.se),
            opt(r.reference),
            opt(r.p_value),
            r.stream_id.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `u,ecdf_sample,ecdf_gauss`.
pub fn write_ecdf_csv(rows: &[EcdfRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["u", "ecdf_sample", "ecdf_gauss"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([format!("{:?}", r.u), format!("{:?}", r.ecdf_sample), format!("{:?}", r.ecdf_gauss)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

impl ExperimentReport {
    /// Writes `cells.csv`, `report.json` and `ecdf_cell<k>.csv` into `dir` and
    /// returns their paths. These depend only on the config and seed.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = vec![dir.join("cells.csv"), dir.join("report.json")];
        write_cells_csv(&self.rows, &out[0])?;
        write_json(self, &out[1])?;
        for (cell, rows) in &self.ecdf {
            let path = dir.join(format!("ecdf_cell{cell}.csv"));
            write_ecdf_csv(rows, &path)?;
            out.push(path);
        }
        Ok(out)
    }

    /// Writes `timing.json` with per-cell runtimes.
    pub fn write_timing(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("timing.json");
        write_json(&serde_json::json!({ "runtimes_ms": self.runtimes_ms }), &path)?;
        Ok(path)
    }
}
