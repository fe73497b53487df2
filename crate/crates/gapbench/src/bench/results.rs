//! Results persistence and summary tables.
//!
//! The CSV schema is normative and bit-stable:
//! `dataset,pattern,rate,imputer,seed,status,mae,mse,mre,fit_time_s,infer_time_s,n_params`
//! with six-decimal metric formatting. Failed cells leave the metric fields
//! empty. JSONL mirrors the same fields, one object per line, plus any
//! downstream scores.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::downstream::DownstreamScore;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;

use super::config::OutputFormat;

/// Cell outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

impl CellStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, CellStatus::Ok)
    }
}

/// One cell of the benchmark matrix.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub dataset: String,
    pub pattern: String,
    pub rate: f64,
    pub imputer: String,
    pub seed: u64,
    pub status: CellStatus,
    /// Present iff the status is ok.
    pub metrics: Option<MetricReport>,
    pub fit_time_s: f64,
    pub infer_time_s: f64,
    pub n_params: usize,
    /// (task name, score) pairs; serialized in JSONL output only.
    pub downstream: Vec<(String, DownstreamScore)>,
}

pub const CSV_HEADER: &str =
    "dataset,pattern,rate,imputer,seed,status,mae,mse,mre,fit_time_s,infer_time_s,n_params";

fn format_rate(rate: f64) -> String {
    // shortest round-trip representation keeps the config's spelling stable
    format!("{rate}")
}

fn csv_row(record: &ExperimentRecord) -> Vec<String> {
    let (mae, mse, mre) = match (&record.status, &record.metrics) {
        (CellStatus::Ok, Some(m)) => (
            format!("{:.6}", m.mae),
            format!("{:.6}", m.mse),
            format!("{:.6}", m.mre),
        ),
        _ => (String::new(), String::new(), String::new()),
    };
    let status = match &record.status {
        CellStatus::Ok => "ok".to_string(),
        CellStatus::Failed(reason) => format!("failed({reason})"),
    };
    vec![
        record.dataset.clone(),
        record.pattern.clone(),
        format_rate(record.rate),
        record.imputer.clone(),
        record.seed.to_string(),
        status,
        mae,
        mse,
        mre,
        format!("{:.6}", record.fit_time_s),
        format!("{:.6}", record.infer_time_s),
        record.n_params.to_string(),
    ]
}

/// Serialize records as CSV bytes (header plus one row per record).
pub fn to_csv_bytes(records: &[ExperimentRecord]) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer
        .write_record(CSV_HEADER.split(','))
        .map_err(csv_error)?;
    for record in records {
        writer.write_record(csv_row(record)).map_err(csv_error)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv buffer error: {e}")))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv write error: {e}"))
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    dataset: String,
    pattern: String,
    rate: f64,
    imputer: String,
    seed: u64,
    status: String,
    mae: Option<f64>,
    mse: Option<f64>,
    mre: Option<f64>,
    fit_time_s: f64,
    infer_time_s: f64,
    n_params: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    downstream: Option<serde_json::Value>,
}

fn to_json_record(record: &ExperimentRecord) -> JsonRecord {
    let status = match &record.status {
        CellStatus::Ok => "ok".to_string(),
        CellStatus::Failed(reason) => format!("failed({reason})"),
    };
    let downstream = if record.downstream.is_empty() {
        None
    } else {
        let mut map = serde_json::Map::new();
        for (name, score) in &record.downstream {
            let value = match score {
                DownstreamScore::Regression(r) => serde_json::json!({
                    "mae": r.mae, "mse": r.mse, "mre": r.mre,
                }),
                DownstreamScore::Classification { roc_auc, pr_auc } => serde_json::json!({
                    "roc_auc": roc_auc, "pr_auc": pr_auc,
                }),
            };
            map.insert(name.clone(), value);
        }
        Some(serde_json::Value::Object(map))
    };
    JsonRecord {
        dataset: record.dataset.clone(),
        pattern: record.pattern.clone(),
        rate: record.rate,
        imputer: record.imputer.clone(),
        seed: record.seed,
        status,
        mae: record.metrics.map(|m| m.mae),
        mse: record.metrics.map(|m| m.mse),
        mre: record.metrics.map(|m| m.mre),
        fit_time_s: record.fit_time_s,
        infer_time_s: record.infer_time_s,
        n_params: record.n_params,
        downstream,
    }
}

/// Write records to disk in the requested format.
pub fn write_results(
    records: &[ExperimentRecord],
    path: &Path,
    format: OutputFormat,
) -> Result<()> {
    let bytes = match format {
        OutputFormat::Csv => to_csv_bytes(records)?,
        OutputFormat::Jsonl => {
            let mut buf = Vec::new();
            for record in records {
                serde_json::to_writer(&mut buf, &to_json_record(record))
                    .map_err(|e| Error::Config(format!("jsonl write error: {e}")))?;
                buf.push(b'\n');
            }
            buf
        }
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() && !parent.exists() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parse a results CSV back into records (downstream scores are not part of
/// the CSV schema and come back empty).
pub fn read_results_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let field = |i: usize| row.get(i).unwrap_or("").to_string();
        let parse_f64 = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::Csv {
                    path: path.display().to_string(),
                    message: format!("bad numeric field {:?}", field(i)),
                })
        };
        let status_raw = field(5);
        let status = if status_raw == "ok" {
            CellStatus::Ok
        } else {
            let reason = status_raw
                .strip_prefix("failed(")
                .and_then(|s| s.strip_suffix(')'))
                .unwrap_or(&status_raw);
            CellStatus::Failed(reason.to_string())
        };
        let metrics = if status.is_ok() {
            Some(MetricReport {
                mae: parse_f64(6)?,
                mse: parse_f64(7)?,
                mre: parse_f64(8)?,
                n_evaluated: 0,
            })
        } else {
            None
        };
        out.push(ExperimentRecord {
            dataset: field(0),
            pattern: field(1),
            rate: parse_f64(2)?,
            imputer: field(3),
            seed: field(4).parse().map_err(|_| Error::Csv {
                path: path.display().to_string(),
                message: format!("bad seed {:?}", field(4)),
            })?,
            status,
            metrics,
            fit_time_s: parse_f64(9)?,
            infer_time_s: parse_f64(10)?,
            n_params: field(11).parse().unwrap_or(0),
            downstream: Vec::new(),
        });
    }
    Ok(out)
}

/// Mean and population standard deviation of MAE over seeds, per
/// (dataset, pattern, rate, imputer), with the best imputer per setting
/// flagged. Errors when no record is ok.
pub fn summarize(records: &[ExperimentRecord]) -> Result<String> {
    type SettingKey = (String, String, String);
    let mut groups: BTreeMap<(SettingKey, String), Vec<f64>> = BTreeMap::new();
    for record in records {
        if let (CellStatus::Ok, Some(m)) = (&record.status, &record.metrics) {
            let setting = (
                record.dataset.clone(),
                record.pattern.clone(),
                format_rate(record.rate),
            );
            groups
                .entry((setting, record.imputer.clone()))
                .or_default()
                .push(m.mae);
        }
    }
    if groups.is_empty() {
        return Err(Error::UndefinedMetric(
            "no successful record to summarize".into(),
        ));
    }

    // best (lowest mean MAE) per setting
    let mut best: BTreeMap<SettingKey, (String, f64)> = BTreeMap::new();
    let mut rows: Vec<(SettingKey, String, usize, f64, f64)> = Vec::new();
    for ((setting, imputer), maes) in &groups {
        let n = maes.len();
        let mean = maes.iter().sum::<f64>() / n as f64;
        let var = maes.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n as f64;
        rows.push((setting.clone(), imputer.clone(), n, mean, var.sqrt()));
        let entry = best
            .entry(setting.clone())
            .or_insert_with(|| (imputer.clone(), mean));
        if mean < entry.1 {
            *entry = (imputer.clone(), mean);
        }
    }

    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<12} {:>6} {:<16} {:>5} {:>10} {:>10} {:>5}\n",
        "dataset", "pattern", "rate", "imputer", "seeds", "mae_mean", "mae_std", "best"
    ));
    for (setting, imputer, n, mean, std) in &rows {
        let flag = if best[setting].0 == *imputer { "*" } else { "" };
        out.push_str(&format!(
            "{:<16} {:<12} {:>6} {:<16} {:>5} {:>10.3} {:>10.3} {:>5}\n",
            setting.0, setting.1, setting.2, imputer, n, mean, std, flag
        ));
    }
    Ok(out)
}
