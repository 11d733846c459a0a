//! JSON-lines and CSV output.

use crate::run::{mean_std, CellResult, RunRecord};
use sfc_core::SfcKind;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One JSON object per line.
pub fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for (i, row) in rows.iter().enumerate() {
        let line = serde_json::to_string(row).map_err(|source| ExportError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, ExportError> {
    let r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| ExportError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn summary_header() -> Vec<String> {
    let mut h: Vec<String> = ["agent", "dc_count", "request_count", "episodes", "acc_ratio_mean", "acc_ratio_std"]
        .map(String::from)
        .to_vec();
    h.extend(SfcKind::ALL.iter().map(|k| format!("acc_{}", k.name())));
    h.extend(SfcKind::ALL.iter().map(|k| format!("e2e_ms_{}", k.name())));
    h.extend(["throughput_gbps_mean", "throughput_gbps_std", "dropped_mean", "error"].map(String::from));
    h
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One CSV row: per-kind acceptance is averaged over the episodes that
/// generated the kind; per-kind E2E is pooled over all accepted requests.
pub fn summary_row(cell: &CellResult) -> Vec<String> {
    let mut row = vec![cell.agent.to_string(), cell.dc_count.to_string(), cell.request_count.to_string()];
    let runs = match &cell.outcome {
        Ok(runs) => runs,
        Err(e) => {
            row.push("0".into());
            row.resize(summary_header().len() - 1, String::new());
            row.push(e.clone());
            return row;
        }
    };
    let acc: Vec<f64> = runs.iter().map(|r| r.acc_ratio).collect();
    let (acc_mean, acc_std) = mean_std(&acc);
    row.extend([runs.len().to_string(), acc_mean.to_string(), acc_std.to_string()]);
    for k in SfcKind::ALL {
        let xs: Vec<f64> = runs.iter().filter_map(|r| r.per_type_acc[k]).collect();
        row.push(fmt_opt((!xs.is_empty()).then(|| mean_std(&xs).0)));
    }
    for k in SfcKind::ALL {
        let n: u32 = runs.iter().map(|r| r.accepted[k]).sum();
        let total: f64 = runs
            .iter()
            .filter_map(|r| r.mean_e2e_ms[k].map(|m| m * r.accepted[k] as f64))
            .sum();
        row.push(fmt_opt((n > 0).then(|| total / n as f64)));
    }
    let tp: Vec<f64> = runs.iter().map(|r| r.throughput_gbps).collect();
    let (tp_mean, tp_std) = mean_std(&tp);
    let dropped: Vec<f64> = runs.iter().map(|r| r.dropped.0.iter().sum::<u32>() as f64).collect();
    row.extend([tp_mean.to_string(), tp_std.to_string(), mean_std(&dropped).0.to_string(), String::new()]);
    row
}

pub fn write_summary(path: &Path, cells: &[CellResult]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(File::create(path).map_err(io_err(path))?);
    w.write_record(summary_header())?;
    for cell in cells {
        w.write_record(summary_row(cell))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `<stem>.jsonl` per successful cell and `summary.csv` into `dir`.
pub fn export_metrics(cells: &[CellResult], dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for cell in cells {
        if let Ok(runs) = &cell.outcome {
            let path = dir.join(format!("{}.jsonl", cell.file_stem()));
            write_jsonl::<RunRecord>(&path, runs)?;
            written.push(path);
        }
    }
    let summary = dir.join("summary.csv");
    write_summary(&summary, cells)?;
    written.push(summary);
    Ok(written)
}
