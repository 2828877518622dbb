//! CSV dataset ingestion and report/file writing.
//!
//! Dataset schema: required columns `t` and `y` (0/1); optional
//! `score__<name>` (one per model), `omega_hat`, `tau_hat`, `x_<k>`
//! feature columns, and the synthetic-pool extras `y0`, `y1`,
//! `omega_true`, `tau_true`. Header row mandatory, comma separated,
//! UTF-8, `.` decimal separator. Unknown columns are rejected.
//!
//! All writers go through a temp file and an atomic rename so failed
//! runs never leave partial output behind.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rct_auroc::data::{NuisanceScope, RctDataset, ScoreSet};
use rct_auroc::harness::ExperimentReport;
use rct_auroc::NuisanceEstimates;

use crate::CliError;

/// Everything a dataset CSV can carry.
#[derive(Debug)]
pub struct LoadedDataset {
    pub dataset: RctDataset,
    /// One score set per `score__<name>` column, in header order.
    pub scores: Vec<ScoreSet>,
    /// Present when both `omega_hat` and `tau_hat` columns exist.
    pub nuisance: Option<NuisanceEstimates>,
    /// Synthetic-pool extras, when present.
    pub y0: Option<Vec<u8>>,
    pub y1: Option<Vec<u8>>,
    pub omega_true: Option<Vec<f64>>,
    pub tau_true: Option<Vec<f64>>,
}

enum ColumnKind {
    Treatment,
    Outcome,
    Feature(usize),
    Score(String),
    OmegaHat,
    TauHat,
    Y0,
    Y1,
    OmegaTrue,
    TauTrue,
}

fn classify(header: &str) -> Result<ColumnKind, CliError> {
    match header {
        "t" => Ok(ColumnKind::Treatment),
        "y" => Ok(ColumnKind::Outcome),
        "omega_hat" => Ok(ColumnKind::OmegaHat),
        "tau_hat" => Ok(ColumnKind::TauHat),
        "y0" => Ok(ColumnKind::Y0),
        "y1" => Ok(ColumnKind::Y1),
        "omega_true" => Ok(ColumnKind::OmegaTrue),
        "tau_true" => Ok(ColumnKind::TauTrue),
        other => {
            if let Some(name) = other.strip_prefix("score__") {
                if name.is_empty() {
                    return Err(CliError::data("empty model name in score__ column"));
                }
                return Ok(ColumnKind::Score(name.to_string()));
            }
            if let Some(k) = other.strip_prefix("x_") {
                let idx: usize = k.parse().map_err(|_| {
                    CliError::data(format!("feature column `{other}` has a non-numeric index"))
                })?;
                return Ok(ColumnKind::Feature(idx));
            }
            Err(CliError::data(format!("unknown column `{other}`")))
        }
    }
}

/// How the randomization probability is chosen at load time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PiSource {
    Fixed(f64),
    /// Use the empirical treated fraction of the file.
    Empirical,
}

impl std::str::FromStr for PiSource {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        if s == "empirical" {
            return Ok(PiSource::Empirical);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| CliError::usage(format!("--pi expects a number or `empirical`, got `{s}`")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::usage(format!("--pi {v} outside [0,1]")));
        }
        Ok(PiSource::Fixed(v))
    }
}

fn parse_binary(field: &str, line: usize, what: &str) -> Result<u8, CliError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::data(format!("line {line}: non-numeric {what} `{field}`")))?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(CliError::data(format!("line {line}: non-binary {what}")))
    }
}

fn parse_real(field: &str, line: usize, column: &str) -> Result<f64, CliError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::data(format!("line {line}: non-numeric value in `{column}`")))?;
    if !v.is_finite() {
        return Err(CliError::data(format!("line {line}: non-finite value in `{column}`")));
    }
    Ok(v)
}

/// Load a dataset CSV. Line numbers in errors are 1-based and count the
/// header as line 1.
pub fn load_csv(path: &Path, pi: PiSource) -> Result<LoadedDataset, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("cannot read header: {e}")))?
        .clone();
    let kinds: Vec<ColumnKind> =
        headers.iter().map(classify).collect::<Result<_, CliError>>()?;
    let has = |pred: &dyn Fn(&ColumnKind) -> bool| kinds.iter().any(pred);
    if !has(&|k| matches!(k, ColumnKind::Treatment)) {
        return Err(CliError::data("missing required column `t`"));
    }
    if !has(&|k| matches!(k, ColumnKind::Outcome)) {
        return Err(CliError::data("missing required column `y`"));
    }

    let mut feature_cols: Vec<(usize, usize)> = kinds
        .iter()
        .enumerate()
        .filter_map(|(c, k)| match k {
            ColumnKind::Feature(idx) => Some((*idx, c)),
            _ => None,
        })
        .collect();
    feature_cols.sort_unstable();
    let score_cols: Vec<(String, usize)> = kinds
        .iter()
        .enumerate()
        .filter_map(|(c, k)| match k {
            ColumnKind::Score(name) => Some((name.clone(), c)),
            _ => None,
        })
        .collect();
    let col_of = |pred: &dyn Fn(&ColumnKind) -> bool| kinds.iter().position(pred);
    let t_col = col_of(&|k| matches!(k, ColumnKind::Treatment)).unwrap();
    let y_col = col_of(&|k| matches!(k, ColumnKind::Outcome)).unwrap();
    let omega_hat_col = col_of(&|k| matches!(k, ColumnKind::OmegaHat));
    let tau_hat_col = col_of(&|k| matches!(k, ColumnKind::TauHat));
    let y0_col = col_of(&|k| matches!(k, ColumnKind::Y0));
    let y1_col = col_of(&|k| matches!(k, ColumnKind::Y1));
    let omega_true_col = col_of(&|k| matches!(k, ColumnKind::OmegaTrue));
    let tau_true_col = col_of(&|k| matches!(k, ColumnKind::TauTrue));

    let mut treatment = Vec::new();
    let mut outcome = Vec::new();
    let mut features_flat: Vec<f64> = Vec::new();
    let mut score_values: Vec<Vec<f64>> = vec![Vec::new(); score_cols.len()];
    let mut omega_hat = Vec::new();
    let mut tau_hat = Vec::new();
    let mut y0 = Vec::new();
    let mut y1 = Vec::new();
    let mut omega_true = Vec::new();
    let mut tau_true = Vec::new();

    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2;
        let record =
            record.map_err(|e| CliError::data(format!("line {line}: malformed row: {e}")))?;
        if record.len() != headers.len() {
            return Err(CliError::data(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        treatment.push(parse_binary(&record[t_col], line, "treatment")?);
        outcome.push(parse_binary(&record[y_col], line, "outcome")?);
        for &(_, c) in &feature_cols {
            features_flat.push(parse_real(&record[c], line, &headers[c])?);
        }
        for (s, (_, c)) in score_values.iter_mut().zip(&score_cols) {
            s.push(parse_real(&record[*c], line, &headers[*c])?);
        }
        if let Some(c) = omega_hat_col {
            omega_hat.push(parse_real(&record[c], line, "omega_hat")?);
        }
        if let Some(c) = tau_hat_col {
            tau_hat.push(parse_real(&record[c], line, "tau_hat")?);
        }
        if let Some(c) = y0_col {
            y0.push(parse_binary(&record[c], line, "y0")?);
        }
        if let Some(c) = y1_col {
            y1.push(parse_binary(&record[c], line, "y1")?);
        }
        if let Some(c) = omega_true_col {
            omega_true.push(parse_real(&record[c], line, "omega_true")?);
        }
        if let Some(c) = tau_true_col {
            tau_true.push(parse_real(&record[c], line, "tau_true")?);
        }
    }

    let n = outcome.len();
    let p = feature_cols.len();
    let features = Array2::from_shape_vec((n, p), features_flat)
        .map_err(|e| CliError::data(format!("feature matrix shape error: {e}")))?;
    let pi_value = match pi {
        PiSource::Fixed(v) => v,
        PiSource::Empirical => {
            if n == 0 {
                return Err(CliError::data("cannot infer pi from an empty file"));
            }
            treatment.iter().map(|&t| t as f64).sum::<f64>() / n as f64
        }
    };
    let dataset = RctDataset::new(features, outcome, treatment, pi_value)
        .map_err(CliError::from_eval)?;

    let scores = score_cols
        .iter()
        .zip(score_values)
        .map(|((name, _), values)| ScoreSet::new(name.clone(), values).map_err(CliError::from_eval))
        .collect::<Result<Vec<_>, CliError>>()?;

    let nuisance = match (omega_hat_col, tau_hat_col) {
        (Some(_), Some(_)) => Some(
            NuisanceEstimates::from_vectors(omega_hat, tau_hat, NuisanceScope::FullSample)
                .map_err(CliError::from_eval)?,
        ),
        (None, None) => None,
        _ => {
            return Err(CliError::data(
                "omega_hat and tau_hat columns must be provided together",
            ))
        }
    };

    Ok(LoadedDataset {
        dataset,
        scores,
        nuisance,
        y0: y0_col.map(|_| y0),
        y1: y1_col.map(|_| y1),
        omega_true: omega_true_col.map(|_| omega_true),
        tau_true: tau_true_col.map(|_| tau_true),
    })
}

/// Write `content` to `path` atomically (temp file in the same
/// directory, then rename).
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::data(format!("cannot create temp file in {}: {e}", dir.display())))?;
    tmp.write_all(content)
        .map_err(|e| CliError::data(format!("write failed: {e}")))?;
    tmp.persist(path)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Write either to a file (atomically) or to stdout.
pub fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, content.as_bytes()),
        None => {
            let stdout = std::io::stdout();
            let mut h = stdout.lock();
            h.write_all(content.as_bytes())
                .and_then(|_| {
                    if content.ends_with('\n') {
                        Ok(())
                    } else {
                        h.write_all(b"\n")
                    }
                })
                .map_err(|e| CliError::data(format!("stdout write failed: {e}")))
        }
    }
}

/// Output format for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(CliError::usage(format!("unknown format `{other}` (json|csv)"))),
        }
    }
}

/// Serialize a report: JSON is one object {metric, provenance, rows};
/// CSV is long format `setting,method,stat,value` with exactly the
/// mean/ci_lo/ci_hi stats per (setting, method). Numbers print in
/// shortest round-trip form, so parsing the file recovers them exactly.
pub fn render_report(report: &ExperimentReport, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => serde_json::to_string_pretty(report)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| CliError::data(format!("JSON serialization failed: {e}"))),
        Format::Csv => {
            let mut out = String::from("setting,method,stat,value\n");
            for row in &report.rows {
                for m in &row.methods {
                    for (stat, value) in
                        [("mean", m.mean), ("ci_lo", m.ci_lo), ("ci_hi", m.ci_hi)]
                    {
                        out.push_str(&format!(
                            "{},{},{},{}\n",
                            csv_quote(&row.setting),
                            csv_quote(&m.method),
                            stat,
                            value
                        ));
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Parse a long-format CSV report back into (setting, method, stat,
/// value) tuples.
pub fn parse_report_csv(content: &str) -> Result<Vec<(String, String, String, f64)>, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(content.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("report line {}: {e}", i + 2)))?;
        let value: f64 = record[3]
            .parse()
            .map_err(|_| CliError::data(format!("report line {}: bad value", i + 2)))?;
        rows.push((record[0].to_string(), record[1].to_string(), record[2].to_string(), value));
    }
    Ok(rows)
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Columns to include when writing a dataset CSV.
pub struct DatasetWriter<'a> {
    pub dataset: &'a RctDataset,
    pub scores: &'a [ScoreSet],
    pub y0: Option<&'a [u8]>,
    pub y1: Option<&'a [u8]>,
    pub omega_true: Option<&'a [f64]>,
    pub tau_true: Option<&'a [f64]>,
    pub omega_hat: Option<&'a [f64]>,
    pub tau_hat: Option<&'a [f64]>,
}

impl<'a> DatasetWriter<'a> {
    pub fn new(dataset: &'a RctDataset, scores: &'a [ScoreSet]) -> Self {
        Self {
            dataset,
            scores,
            y0: None,
            y1: None,
            omega_true: None,
            tau_true: None,
            omega_hat: None,
            tau_hat: None,
        }
    }

    pub fn render(&self) -> String {
        let ds = self.dataset;
        let p = ds.features.ncols();
        let mut header = vec!["t".to_string(), "y".to_string()];
        header.extend((0..p).map(|k| format!("x_{k}")));
        for s in self.scores {
            header.push(format!("score__{}", s.model_name));
        }
        for (name, col) in [
            ("y0", self.y0.is_some()),
            ("y1", self.y1.is_some()),
        ] {
            if col {
                header.push(name.to_string());
            }
        }
        for (name, col) in [
            ("omega_true", self.omega_true.is_some()),
            ("tau_true", self.tau_true.is_some()),
            ("omega_hat", self.omega_hat.is_some()),
            ("tau_hat", self.tau_hat.is_some()),
        ] {
            if col {
                header.push(name.to_string());
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        for i in 0..ds.len() {
            let mut fields: Vec<String> =
                vec![ds.treatment[i].to_string(), ds.outcome[i].to_string()];
            for k in 0..p {
                fields.push(ds.features[(i, k)].to_string());
            }
            for s in self.scores {
                fields.push(s.scores[i].to_string());
            }
            if let Some(v) = self.y0 {
                fields.push(v[i].to_string());
            }
            if let Some(v) = self.y1 {
                fields.push(v[i].to_string());
            }
            if let Some(v) = self.omega_true {
                fields.push(v[i].to_string());
            }
            if let Some(v) = self.tau_true {
                fields.push(v[i].to_string());
            }
            if let Some(v) = self.omega_hat {
                fields.push(v[i].to_string());
            }
            if let Some(v) = self.tau_hat {
                fields.push(v[i].to_string());
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Map of diagnostics, key-sorted, used by the estimate command output.
pub type Diagnostics = BTreeMap<String, f64>;

/// Buffered writer helper for large CSVs written straight to disk
/// (atomic like the rest).
pub fn write_large_csv(path: &Path, content: String) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::data(format!("cannot create temp file: {e}")))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        w.write_all(content.as_bytes())
            .map_err(|e| CliError::data(format!("write failed: {e}")))?;
        w.flush().map_err(|e| CliError::data(format!("flush failed: {e}")))?;
    }
    tmp.persist(path)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
