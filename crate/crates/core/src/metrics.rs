//! Per-file code metrics and their equal-frequency discretization.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub path: String,
    pub metric: String,
    pub value: f64,
}

/// One interval of a metric's observed range; `lo` is exclusive except in bucket 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBucket {
    pub metric: String,
    pub bucket_index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl MetricBucket {
    /// Node key used in the network, e.g. `LOC#2`.
    pub fn key(&self) -> String {
        format!("{}#{}", self.metric, self.bucket_index)
    }
}

/// Reads a long-format CSV with header exactly `path,metric,value`.
pub fn load_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(file, path)
}

pub(crate) fn parse_metrics<R: std::io::Read>(
    input: R,
    origin: &Path,
) -> Result<Vec<MetricRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers
        .iter()
        .map(str::trim)
        .ne(["path", "metric", "value"])
    {
        return Err(Error::parse(
            origin,
            1,
            format!(
                "expected header path,metric,value, found {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        ));
    }
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let line = row + 2;
        let rec = result?;
        if rec.len() != 3 {
            return Err(Error::parse(
                origin,
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let (file, metric, raw) = (rec[0].trim(), rec[1].trim(), rec[2].trim());
        if file.is_empty() || metric.is_empty() {
            return Err(Error::parse(origin, line, "empty path or metric"));
        }
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::parse(origin, line, format!("non-numeric value {raw:?}")))?;
        if !value.is_finite() {
            return Err(Error::parse(
                origin,
                line,
                format!("non-finite value {raw:?}"),
            ));
        }
        if !seen.insert((file.to_string(), metric.to_string())) {
            return Err(Error::parse(
                origin,
                line,
                format!("duplicate ({file}, {metric})"),
            ));
        }
        records.push(MetricRecord {
            path: file.to_string(),
            metric: metric.to_string(),
            value,
        });
    }
    Ok(records)
}

/// Equal-frequency buckets per metric; returns each file's bucket list ordered by metric name.
///
/// Cut points sit at the order statistics of rank `ceil(j·n/b)`; a value equal
/// to a cut point falls in the lower bucket. Repeated cut points collapse, so a
/// constant metric yields a single bucket.
pub fn discretize(
    records: &[MetricRecord],
    buckets_per_metric: usize,
) -> BTreeMap<String, Vec<MetricBucket>> {
    assert!(
        buckets_per_metric >= 1,
        "buckets_per_metric must be positive"
    );
    let mut by_metric: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for r in records {
        by_metric
            .entry(&r.metric)
            .or_default()
            .push((&r.path, r.value));
    }

    let mut out: BTreeMap<String, Vec<MetricBucket>> = BTreeMap::new();
    for (metric, values) in by_metric {
        let cuts = cut_points(values.iter().map(|&(_, v)| v), buckets_per_metric);
        let min = values.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
        let max = values
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        for (file, value) in values {
            let index = cuts.partition_point(|&c| c < value);
            let lo = if index == 0 { min } else { cuts[index - 1] };
            let hi = cuts.get(index).copied().unwrap_or(max);
            out.entry(file.to_string()).or_default().push(MetricBucket {
                metric: metric.to_string(),
                bucket_index: index,
                lo,
                hi,
            });
        }
    }
    out
}

fn cut_points(values: impl Iterator<Item = f64>, buckets: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let Some(&max) = sorted.last() else {
        return Vec::new();
    };
    let mut cuts: Vec<f64> = (1..buckets)
        .map(|j| sorted[(j * n).div_ceil(buckets).max(1) - 1])
        .filter(|&c| c < max)
        .collect();
    cuts.dedup();
    cuts
}
