//! Quality metrics (Winkler score, average coverage deviation, width) and
//! value metrics (monetary score with its day-ahead/real-time split) over a
//! test partition.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PowerSample};
use crate::dispatch::{monetary_score, VppConfig};
use crate::qr::PredictionInterval;
use crate::{Error, Result};

/// Interval score: width plus `2 / beta` times the distance by which the
/// realization escapes the interval. Equals the width iff covered.
pub fn winkler(interval: &PredictionInterval, realization: f64, beta: f64) -> f64 {
    let width = interval.width();
    if realization < interval.lower {
        width + 2.0 / beta * (interval.lower - realization)
    } else if realization > interval.upper {
        width + 2.0 / beta * (realization - interval.upper)
    } else {
        width
    }
}

/// Average coverage deviation in percentage points:
/// `(empirical coverage - ncp) * 100`. Negative means under-coverage.
pub fn acd(intervals: &[PredictionInterval], realizations: &[f64], ncp: f64) -> Result<f64> {
    if intervals.len() != realizations.len() {
        return Err(Error::InvalidArgument(format!(
            "{} intervals vs {} realizations",
            intervals.len(),
            realizations.len()
        )));
    }
    if intervals.is_empty() {
        return Err(Error::InvalidArgument("coverage needs at least one sample".into()));
    }
    let covered = intervals
        .iter()
        .zip(realizations)
        .filter(|(iv, y)| iv.contains(**y))
        .count();
    Ok((covered as f64 / intervals.len() as f64 - ncp) * 100.0)
}

/// Per-sample evaluation record, retained for downstream plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub timestamp: u64,
    pub lower: f64,
    pub upper: f64,
    pub power: f64,
    pub load: f64,
    pub winkler: f64,
    pub width: f64,
    pub covered: bool,
    pub monetary: f64,
    pub monetary_da: f64,
    pub monetary_rt: f64,
}

/// Aggregate quality and value metrics plus the per-sample records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub winkler_avg: f64,
    pub width_avg: f64,
    pub acd: f64,
    pub monetary_avg: f64,
    pub monetary_da_avg: f64,
    pub monetary_rt_avg: f64,
    pub samples: Vec<SampleRecord>,
}

impl EvaluationReport {
    /// Write per-sample records as CSV.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::new();
        out.push_str(
            "timestamp,lower,upper,power,load,winkler,width,covered,monetary,monetary_da,monetary_rt\n",
        );
        for r in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.timestamp,
                r.lower,
                r.upper,
                r.power,
                r.load,
                r.winkler,
                r.width,
                r.covered,
                r.monetary,
                r.monetary_da,
                r.monetary_rt
            )
            .expect("string write");
        }
        std::fs::write(path.as_ref(), out)?;
        Ok(())
    }

    /// Read back a per-sample CSV written by [`EvaluationReport::write_csv`].
    pub fn read_samples_csv<P: AsRef<Path>>(path: P) -> Result<Vec<SampleRecord>> {
        let mut reader = csv::Reader::from_path(path.as_ref())?;
        let mut records = Vec::new();
        for (i, row) in reader.deserialize::<SampleRecord>().enumerate() {
            records.push(row.map_err(|e| Error::ParseRow { row: i + 1, message: e.to_string() })?);
        }
        Ok(records)
    }

    /// Recompute the aggregates from per-sample records.
    pub fn from_samples(samples: Vec<SampleRecord>, ncp: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("report needs at least one sample".into()));
        }
        let n = samples.len() as f64;
        let covered = samples.iter().filter(|r| r.covered).count() as f64;
        Ok(Self {
            winkler_avg: samples.iter().map(|r| r.winkler).sum::<f64>() / n,
            width_avg: samples.iter().map(|r| r.width).sum::<f64>() / n,
            acd: (covered / n - ncp) * 100.0,
            monetary_avg: samples.iter().map(|r| r.monetary).sum::<f64>() / n,
            monetary_da_avg: samples.iter().map(|r| r.monetary_da).sum::<f64>() / n,
            monetary_rt_avg: samples.iter().map(|r| r.monetary_rt).sum::<f64>() / n,
            samples,
        })
    }
}

/// Evaluate a forecaster over every sample of a dataset: quality metrics per
/// interval, then the monetary score via the dispatch solvers. Dispatch
/// failures are tagged with the offending sample's timestamp.
pub fn evaluate<F>(mut forecast: F, data: &Dataset, vpp: &VppConfig, ncp: f64) -> Result<EvaluationReport>
where
    F: FnMut(usize, &PowerSample) -> Result<PredictionInterval>,
{
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty dataset".into()));
    }
    if !(ncp > 0.0 && ncp < 1.0) {
        return Err(Error::InvalidArgument(format!("ncp must be in (0, 1), got {ncp}")));
    }
    let beta = 1.0 - ncp;
    let mut samples = Vec::with_capacity(data.len());
    for (i, s) in data.samples.iter().enumerate() {
        let interval = forecast(i, s)?;
        let ms = monetary_score(vpp, &interval, s.load, s.power)
            .map_err(|e| e.at_sample(s.timestamp))?;
        samples.push(SampleRecord {
            timestamp: s.timestamp,
            lower: interval.lower,
            upper: interval.upper,
            power: s.power,
            load: s.load,
            winkler: winkler(&interval, s.power, beta),
            width: interval.width(),
            covered: interval.contains(s.power),
            monetary: ms.score,
            monetary_da: ms.day_ahead,
            monetary_rt: ms.real_time,
        });
    }
    EvaluationReport::from_samples(samples, ncp)
}
