//! CSV and report writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bernlab_core::dynamics::Diagnostics;
use bernlab_core::verify::relative_margin;
use serde::Serialize;

use crate::error::{io_err, Result};

/// Columns of the timeseries CSV, in order.
pub const TIMESERIES_COLUMNS: [&str; 10] =
    ["t", "max_chi2t_grad_u2", "bound_u", "margin_u", "max_chi2t_grad_v2", "bound_v", "margin_v", "min_u", "min_v", "metric_min_eig"];

/// Columns of refinement-study CSVs.
pub const STUDY_COLUMNS: [&str; 4] = ["study", "n", "h", "value"];

/// Tag carried by every report file.
pub const REPORT_SCHEMA: &str = "bernlab.report/1";

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn open(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Streams one row per recorded step.
pub struct TimeseriesWriter {
    inner: csv::Writer<BufWriter<File>>,
    bound_u: f64,
    bound_v: f64,
    rows: usize,
    failure: Option<csv::Error>,
}

impl TimeseriesWriter {
    pub fn create(path: &Path, bound_u: f64, bound_v: f64) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(open(path)?);
        inner.write_record(TIMESERIES_COLUMNS)?;
        Ok(Self { inner, bound_u, bound_v, rows: 0, failure: None })
    }

    /// Records `d`; a write error is kept and returned by [`finish`](Self::finish).
    pub fn push(&mut self, d: &Diagnostics) {
        if self.failure.is_some() {
            return;
        }
        let row = [
            d.t,
            d.max_chi2t_grad_u2,
            self.bound_u,
            relative_margin(d.max_chi2t_grad_u2, self.bound_u),
            d.max_chi2t_grad_v2,
            self.bound_v,
            relative_margin(d.max_chi2t_grad_v2, self.bound_v),
            d.min_u,
            d.min_v,
            d.metric_min_eig,
        ];
        match self.inner.write_record(row.iter().map(|x| x.to_string())) {
            Ok(()) => self.rows += 1,
            Err(e) => self.failure = Some(e),
        }
    }

    pub fn finish(mut self) -> Result<usize> {
        if let Some(e) = self.failure.take() {
            return Err(e.into());
        }
        self.inner.flush().map_err(csv::Error::from)?;
        Ok(self.rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub study: String,
    pub n: usize,
    pub h: f64,
    pub value: f64,
}

pub fn write_study_csv(path: &Path, rows: &[StudyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(open(path)?);
    w.write_record(STUDY_COLUMNS)?;
    for r in rows {
        w.write_record([r.study.clone(), r.n.to_string(), r.h.to_string(), r.value.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = open(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// Artifact paths of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifacts {
    pub report: PathBuf,
    pub scenario: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeseries: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, name: &str) -> Self {
        Self {
            report: dir.join(format!("{name}.report.json")),
            scenario: dir.join(format!("{name}.scenario.toml")),
            timeseries: None,
            study: None,
        }
    }
}
