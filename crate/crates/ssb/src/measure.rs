use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use colcrunch_core::codec::CodecId;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::queries::QueryId;
use crate::{BenchError, Result};

/// One measured query execution. CSV columns follow field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub iteration: usize,
    pub scenario: String,
    pub codec: String,
    pub query_id: String,
    pub wall_seconds: f64,
    /// `wall_seconds - data_access_seconds`.
    pub plan_seconds: f64,
    /// Time the worker spent blocked in buffer fetches.
    pub data_access_seconds: f64,
    pub io_read_seconds: f64,
    pub io_decompress_seconds: f64,
    pub bytes_read: u64,
    pub pages_loaded: u64,
    pub result_checksum: String,
}

pub const MEASUREMENT_HEADER: [&str; 12] = [
    "iteration",
    "scenario",
    "codec",
    "query_id",
    "wall_seconds",
    "plan_seconds",
    "data_access_seconds",
    "io_read_seconds",
    "io_decompress_seconds",
    "bytes_read",
    "pages_loaded",
    "result_checksum",
];

/// Mean and 95% confidence half-width of each timing column for one
/// (scenario, codec, query) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub codec: String,
    pub query_id: String,
    pub n: usize,
    pub wall_seconds_mean: f64,
    pub wall_seconds_ci95: f64,
    pub plan_seconds_mean: f64,
    pub plan_seconds_ci95: f64,
    pub data_access_seconds_mean: f64,
    pub data_access_seconds_ci95: f64,
    pub io_read_seconds_mean: f64,
    pub io_read_seconds_ci95: f64,
    pub io_decompress_seconds_mean: f64,
    pub io_decompress_seconds_ci95: f64,
    pub bytes_read_mean: f64,
    pub pages_loaded_mean: f64,
}

/// Sample mean and t-based 95% half-width; the half-width is 0 below two samples.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
    (mean, t * var.sqrt() / (n as f64).sqrt())
}

fn codec_rank(name: &str) -> usize {
    name.parse::<CodecId>().map_or(usize::MAX, |c| c.wire_byte() as usize)
}

fn query_rank(name: &str) -> usize {
    name.parse::<QueryId>().map_or(usize::MAX, |q| q as usize)
}

/// Groups records by (scenario, codec, query) in codec and query order.
pub fn summarize(records: &[MeasurementRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, usize, String, usize, String), Vec<&MeasurementRecord>> = BTreeMap::new();
    for r in records {
        let key =
            (r.scenario.clone(), codec_rank(&r.codec), r.codec.clone(), query_rank(&r.query_id), r.query_id.clone());
        cells.entry(key).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((scenario, _, codec, _, query_id), rs)| {
            let stat = |f: fn(&MeasurementRecord) -> f64| mean_ci95(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (wall_seconds_mean, wall_seconds_ci95) = stat(|r| r.wall_seconds);
            let (plan_seconds_mean, plan_seconds_ci95) = stat(|r| r.plan_seconds);
            let (data_access_seconds_mean, data_access_seconds_ci95) = stat(|r| r.data_access_seconds);
            let (io_read_seconds_mean, io_read_seconds_ci95) = stat(|r| r.io_read_seconds);
            let (io_decompress_seconds_mean, io_decompress_seconds_ci95) = stat(|r| r.io_decompress_seconds);
            SummaryRow {
                scenario,
                codec,
                query_id,
                n: rs.len(),
                wall_seconds_mean,
                wall_seconds_ci95,
                plan_seconds_mean,
                plan_seconds_ci95,
                data_access_seconds_mean,
                data_access_seconds_ci95,
                io_read_seconds_mean,
                io_read_seconds_ci95,
                io_decompress_seconds_mean,
                io_decompress_seconds_ci95,
                bytes_read_mean: stat(|r| r.bytes_read as f64).0,
                pages_loaded_mean: stat(|r| r.pages_loaded as f64).0,
            }
        })
        .collect()
}

/// Writes rows with a header line, even when there are no rows.
pub fn write_csv<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| BenchError::io(path, e.into_error()))?.flush().map_err(|e| BenchError::io(path, e))
}

/// Reads rows, rejecting a header that differs from `header`.
pub fn read_csv<T: DeserializeOwned>(header: &[&str], path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(BenchError::Config(format!("{}: unexpected header {found:?}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

pub fn write_measurements(records: &[MeasurementRecord], path: &Path) -> Result<()> {
    write_csv(records, &MEASUREMENT_HEADER, path)
}

pub fn read_measurements(path: &Path) -> Result<Vec<MeasurementRecord>> {
    read_csv(&MEASUREMENT_HEADER, path)
}

pub const SUMMARY_HEADER: [&str; 16] = [
    "scenario",
    "codec",
    "query_id",
    "n",
    "wall_seconds_mean",
    "wall_seconds_ci95",
    "plan_seconds_mean",
    "plan_seconds_ci95",
    "data_access_seconds_mean",
    "data_access_seconds_ci95",
    "io_read_seconds_mean",
    "io_read_seconds_ci95",
    "io_decompress_seconds_mean",
    "io_decompress_seconds_ci95",
    "bytes_read_mean",
    "pages_loaded_mean",
];

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_csv(rows, &SUMMARY_HEADER, path)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    read_csv(&SUMMARY_HEADER, path)
}
