//! Dataset ingestion (CSV, NDJSON) and deterministic writers.
//!
//! CSV: header `timestamp,value[,value_2,…][,label]`, strictly increasing
//! numeric timestamps, one series per file (id = file stem).
//! NDJSON: one object per line, `{"id": …, "values": [[…], …] | […], "labels": […]}`
//! with `values` dims-major.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{validate_series, Series, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Ndjson,
}

impl Format {
    /// Infers the format from the file extension (`.csv`, `.ndjson`, `.jsonl`).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(Format::Csv),
            Some("ndjson") | Some("jsonl") | Some("json") => Ok(Format::Ndjson),
            _ => Err(Error::Parse {
                record: 0,
                message: format!("cannot infer dataset format of {}", path.display()),
            }),
        }
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn ingest(path: &Path, format: Format) -> Result<Vec<Series<f64>>> {
    let text = fs::read_to_string(path)?;
    match format {
        Format::Csv => {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "series".into());
            Ok(vec![parse_csv(&id, &text)?])
        }
        Format::Ndjson => parse_ndjson(&text),
    }
}

/// Ingests a file whose format follows from its extension.
pub fn ingest_auto(path: &Path) -> Result<Vec<Series<f64>>> {
    ingest(path, Format::from_path(path)?)
}

pub fn parse_csv(id: &str, text: &str) -> Result<Series<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            record: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<String> = headers.iter().map(str::to_ascii_lowercase).collect();
    if names.first().map(String::as_str) != Some("timestamp") {
        return Err(Error::Parse {
            record: 1,
            message: "first column must be `timestamp`".into(),
        });
    }
    let has_label = names.last().map(String::as_str) == Some("label");
    let n_values = names.len() - 1 - usize::from(has_label);
    if n_values == 0 {
        return Err(Error::Parse {
            record: 1,
            message: "no value columns".into(),
        });
    }
    let mut values = vec![Vec::new(); n_values];
    let mut labels = Vec::new();
    let mut last_ts: Option<f64> = None;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            record: line,
            message: e.to_string(),
        })?;
        if rec.len() != names.len() {
            return Err(Error::Parse {
                record: line,
                message: format!("expected {} fields, got {}", names.len(), rec.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                record: line,
                message: format!("invalid {what} `{s}`"),
            })
        };
        let ts = num(&rec[0], "timestamp")?;
        if last_ts.is_some_and(|p| ts <= p) {
            return Err(Error::NonMonotonicTimestamps { record: line });
        }
        last_ts = Some(ts);
        for d in 0..n_values {
            let v = num(&rec[d + 1], "value")?;
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    dim: d,
                    index: values[d].len(),
                });
            }
            values[d].push(v);
        }
        if has_label {
            labels.push(match &rec[names.len() - 1] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        record: line,
                        message: format!("label must be 0 or 1, got `{other}`"),
                    })
                }
            });
        }
    }
    validate_series(Series {
        id: id.to_string(),
        values,
        labels: has_label.then_some(labels),
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawValues {
    Multi(Vec<Vec<f64>>),
    Uni(Vec<f64>),
}

#[derive(Deserialize)]
struct RawSeries {
    id: String,
    values: RawValues,
    #[serde(default)]
    labels: Option<Vec<u8>>,
}

pub fn parse_ndjson(text: &str) -> Result<Vec<Series<f64>>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSeries = serde_json::from_str(line).map_err(|e| Error::Parse {
            record: i + 1,
            message: e.to_string(),
        })?;
        let values = match raw.values {
            RawValues::Multi(v) => v,
            RawValues::Uni(v) => vec![v],
        };
        out.push(validate_series(Series {
            id: raw.id,
            values,
            labels: raw.labels,
        })?);
    }
    Ok(out)
}

pub fn series_to_csv(series: &Series<f64>) -> String {
    let mut s = String::from("timestamp,value");
    for d in 1..series.dims() {
        let _ = write!(s, ",value_{}", d + 1);
    }
    if series.is_labeled() {
        s.push_str(",label");
    }
    s.push('\n');
    for t in 0..series.len() {
        let _ = write!(s, "{t}");
        for row in &series.values {
            let _ = write!(s, ",{}", row[t]);
        }
        if let Some(l) = &series.labels {
            let _ = write!(s, ",{}", l[t]);
        }
        s.push('\n');
    }
    s
}

pub fn series_to_ndjson(series: &[Series<f64>]) -> Result<String> {
    let mut s = String::new();
    for x in series {
        s.push_str(&serde_json::to_string(x).map_err(|e| Error::Io(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_series(path: &Path, series: &[Series<f64>]) -> Result<()> {
    match Format::from_path(path)? {
        Format::Ndjson => write_atomic(path, series_to_ndjson(series)?.as_bytes()),
        Format::Csv => match series {
            [one] => write_atomic(path, series_to_csv(one).as_bytes()),
            _ => Err(Error::Io(format!(
                "CSV holds exactly one series, got {}",
                series.len()
            ))),
        },
    }
}

/// `start,score` rows.
pub fn scores_to_csv(scores: &[(usize, f64)]) -> String {
    let mut s = String::from("start,score\n");
    for (start, score) in scores {
        let _ = writeln!(s, "{start},{score}");
    }
    s
}

/// `timestamp,label` rows.
pub fn labels_to_csv(labels: &[u8]) -> String {
    let mut s = String::from("timestamp,label\n");
    for (t, l) in labels.iter().enumerate() {
        let _ = writeln!(s, "{t},{l}");
    }
    s
}

/// Reads a `timestamp,label` file, or the label column of a dataset CSV.
pub fn parse_label_csv(text: &str) -> Result<Vec<u8>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            record: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("label"))
        .ok_or_else(|| Error::Parse {
            record: 1,
            message: "no `label` column".into(),
        })?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            record: i + 2,
            message: e.to_string(),
        })?;
        out.push(match rec.get(col) {
            Some("0") => 0,
            Some("1") => 1,
            other => {
                return Err(Error::Parse {
                    record: i + 2,
                    message: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        });
    }
    Ok(out)
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<(usize, f64)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            record: i + 2,
            message: e.to_string(),
        })?;
        let bad = |m: &str| Error::Parse {
            record: i + 2,
            message: m.to_string(),
        };
        let start = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("invalid start"))?;
        let score = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("invalid score"))?;
        out.push((start, score));
    }
    Ok(out)
}

/// Checks a window spec against every series of a dataset.
pub fn check_window_fits(series: &[Series<f64>], spec: &WindowSpec) -> Result<()> {
    for s in series {
        if s.len() < spec.full_len() {
            return Err(Error::SeriesShorterThanWindow {
                len: s.len(),
                window: spec.full_len(),
            });
        }
    }
    Ok(())
}
