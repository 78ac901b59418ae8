use super::{ExperimentReport, HarnessConfig, HarnessError};
use crate::readout::LabeledDataset;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

/// One row of a state CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRow {
    pub session: u32,
    pub replicate: u32,
    pub day: u32,
    pub stimulus_index: u32,
    pub label: u32,
    pub w_ms: f64,
    pub values: Vec<f64>,
}

const META_COLUMNS: [&str; 6] = ["session", "replicate", "day", "stimulus_index", "label", "w_ms"];

pub fn rows_of(ds: &LabeledDataset, w_ms: f64) -> Vec<StateRow> {
    ds.x.iter()
        .zip(&ds.labels)
        .zip(&ds.tags)
        .map(|((x, &label), t)| StateRow {
            session: t.session,
            replicate: t.replicate,
            day: t.day,
            stimulus_index: t.stimulus_index,
            label,
            w_ms,
            values: x.clone(),
        })
        .collect()
}

pub fn write_states_csv(path: impl AsRef<Path>, rows: &[StateRow]) -> Result<(), HarnessError> {
    if let Some(dir) = path.as_ref().parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let dim = rows.first().map_or(0, |r| r.values.len());
    let mut header: Vec<String> = META_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|c| format!("c{c:04}")));
    w.write_record(&header)?;
    for r in rows {
        if r.values.len() != dim {
            return Err(HarnessError::Protocol(format!("state rows differ in length: {} vs {dim}", r.values.len())));
        }
        let mut rec = vec![
            r.session.to_string(),
            r.replicate.to_string(),
            r.day.to_string(),
            r.stimulus_index.to_string(),
            r.label.to_string(),
            r.w_ms.to_string(),
        ];
        rec.extend(r.values.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_states_csv(path: impl AsRef<Path>) -> Result<Vec<StateRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let header = r.headers()?.clone();
    if header.len() < META_COLUMNS.len() || header.iter().zip(META_COLUMNS).any(|(a, b)| a != b) {
        return Err(HarnessError::Protocol("not a state CSV: unexpected header".into()));
    }
    let bad = |e: String| HarnessError::Protocol(format!("state CSV: {e}"));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let int = |i: usize| rec[i].parse::<u32>().map_err(|e| bad(format!("{}: {e}", META_COLUMNS[i])));
        let values = rec
            .iter()
            .skip(META_COLUMNS.len())
            .map(|v| v.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_, _>>()?;
        rows.push(StateRow {
            session: int(0)?,
            replicate: int(1)?,
            day: int(2)?,
            stimulus_index: int(3)?,
            label: int(4)?,
            w_ms: rec[5].parse().map_err(|e| bad(format!("w_ms: {e}")))?,
            values,
        });
    }
    Ok(rows)
}

pub fn write_report(path: impl AsRef<Path>, report: &ExperimentReport) -> Result<(), HarnessError> {
    if let Some(dir) = path.as_ref().parent() {
        fs::create_dir_all(dir)?;
    }
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), report)?;
    Ok(())
}

/// Echo the effective configuration next to the results.
pub fn write_run_config(dir: impl AsRef<Path>, cfg: &HarnessConfig) -> Result<(), HarnessError> {
    fs::create_dir_all(&dir)?;
    fs::write(dir.as_ref().join("config.toml"), cfg.to_toml())?;
    Ok(())
}

/// Report JSON without wall-clock fields, for comparing reruns.
pub fn strip_timing(report: &ExperimentReport) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    if let Some(o) = v.as_object_mut() {
        o.remove("timing");
    }
    v
}
