//! Metric records and their CSV serialization.
//!
//! Records are written RFC-4180 with a fixed, versioned column set; floats
//! carry 17 significant digits so that summaries are recomputable from
//! records.csv bit-exactly. Missing metrics are explicit nulls (empty
//! fields).

use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const RECORDS_SCHEMA: &str = "records-v1";
pub const SUMMARY_SCHEMA: &str = "summary-v1";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("malformed value in column '{column}': {value}")]
    BadValue { column: String, value: String },
}

/// One result row: `(scenario, estimator, n, d, seed)` plus whichever
/// metrics the scenario produces.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub scenario: String,
    pub estimator: String,
    pub n: usize,
    pub d: usize,
    /// Derived per-cell stream seed; identifies the trial.
    pub seed: u64,
    pub test_mse: Option<f64>,
    pub ideal_mse: Option<f64>,
    pub survival: Option<f64>,
    pub contamination: Option<f64>,
    /// Base frequency for per-frequency (filter profile) records.
    pub k_star: Option<usize>,
    pub support_size: Option<usize>,
    pub wall_time_ms: Option<f64>,
    pub error: Option<String>,
}

impl MetricsRecord {
    pub fn new(scenario: &str, estimator: String, n: usize, d: usize, seed: u64) -> Self {
        Self {
            scenario: scenario.to_string(),
            estimator,
            n,
            d,
            seed,
            test_mse: None,
            ideal_mse: None,
            survival: None,
            contamination: None,
            k_star: None,
            support_size: None,
            wall_time_ms: None,
            error: None,
        }
    }
}

pub const RECORD_COLUMNS: [&str; 13] = [
    "scenario",
    "estimator",
    "n",
    "d",
    "seed",
    "test_mse",
    "ideal_mse",
    "survival",
    "contamination",
    "k_star",
    "support_size",
    "wall_time_ms",
    "error",
];

/// 17 significant digits, the shortest width that round-trips every f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes comment header lines (`# key = value` TOML) followed by the CSV.
pub fn write_records(path: &Path, header_toml: &str, records: &[MetricsRecord]) -> Result<(), CsvError> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# schema = \"{RECORDS_SCHEMA}\"")?;
    for line in header_toml.lines() {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.scenario.as_str(),
            r.estimator.as_str(),
            &r.n.to_string(),
            &r.d.to_string(),
            &r.seed.to_string(),
            &opt_float(r.test_mse),
            &opt_float(r.ideal_mse),
            &opt_float(r.survival),
            &opt_float(r.contamination),
            &opt_usize(r.k_star),
            &opt_usize(r.support_size),
            &opt_float(r.wall_time_ms),
            r.error.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_opt_f64(s: &str, column: &str) -> Result<Option<f64>, CsvError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| CsvError::BadValue {
        column: column.to_string(),
        value: s.to_string(),
    })
}

fn parse_opt_usize(s: &str, column: &str) -> Result<Option<usize>, CsvError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<usize>().map(Some).map_err(|_| CsvError::BadValue {
        column: column.to_string(),
        value: s.to_string(),
    })
}

/// Reads records back, skipping `#` comment lines.
pub fn read_records(path: &Path) -> Result<Vec<MetricsRecord>, CsvError> {
    let text = std::fs::read_to_string(path)?;
    read_records_str(&text)
}

pub fn read_records_str(text: &str) -> Result<Vec<MetricsRecord>, CsvError> {
    let data: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut reader = csv::Reader::from_reader(data.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, CsvError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsvError::MissingColumn(name.to_string()))
    };
    let idx: Vec<usize> = RECORD_COLUMNS
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let get = |i: usize| row.get(idx[i]).unwrap_or("");
        out.push(MetricsRecord {
            scenario: get(0).to_string(),
            estimator: get(1).to_string(),
            n: get(2).parse().map_err(|_| CsvError::BadValue {
                column: "n".into(),
                value: get(2).into(),
            })?,
            d: get(3).parse().map_err(|_| CsvError::BadValue {
                column: "d".into(),
                value: get(3).into(),
            })?,
            seed: get(4).parse().map_err(|_| CsvError::BadValue {
                column: "seed".into(),
                value: get(4).into(),
            })?,
            test_mse: parse_opt_f64(get(5), "test_mse")?,
            ideal_mse: parse_opt_f64(get(6), "ideal_mse")?,
            survival: parse_opt_f64(get(7), "survival")?,
            contamination: parse_opt_f64(get(8), "contamination")?,
            k_star: parse_opt_usize(get(9), "k_star")?,
            support_size: parse_opt_usize(get(10), "support_size")?,
            wall_time_ms: parse_opt_f64(get(11), "wall_time_ms")?,
            error: match get(12) {
                "" => None,
                s => Some(s.to_string()),
            },
        });
    }
    Ok(out)
}

/// Per-`(estimator, n, d)` aggregate of `test_mse` across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub estimator: String,
    pub n: usize,
    pub d: usize,
    pub trials_total: usize,
    pub trials_ok: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// 7.5th percentile of test_mse (lower edge of the 85% band).
    pub p7_5: Option<f64>,
    /// 92.5th percentile of test_mse (upper edge of the 85% band).
    pub p92_5: Option<f64>,
}

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "scenario",
    "estimator",
    "n",
    "d",
    "trials_total",
    "trials_ok",
    "mean",
    "median",
    "p7_5",
    "p92_5",
];

/// Linear-interpolated empirical quantile of a sorted slice (the common
/// "type 7" definition): `h = (m-1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Aggregates records into per-`(estimator, n, d)` summary rows, in the
/// deterministic order of first appearance.
pub fn summarize(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, usize, usize)> = Vec::new();
    for r in records {
        let key = (r.estimator.clone(), r.n, r.d);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.sort();
    keys.iter()
        .map(|(estimator, n, d)| {
            let group: Vec<&MetricsRecord> = records
                .iter()
                .filter(|r| &r.estimator == estimator && r.n == *n && r.d == *d)
                .collect();
            let mut values: Vec<f64> = group.iter().filter_map(|r| r.test_mse).collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
            let scenario = group.first().map(|r| r.scenario.clone()).unwrap_or_default();
            let stats = if values.is_empty() {
                (None, None, None, None)
            } else {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                (
                    Some(mean),
                    Some(quantile_sorted(&values, 0.5)),
                    Some(quantile_sorted(&values, 0.075)),
                    Some(quantile_sorted(&values, 0.925)),
                )
            };
            SummaryRow {
                scenario,
                estimator: estimator.clone(),
                n: *n,
                d: *d,
                trials_total: group.len(),
                trials_ok: values.len(),
                mean: stats.0,
                median: stats.1,
                p7_5: stats.2,
                p92_5: stats.3,
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, header_toml: &str, rows: &[SummaryRow]) -> Result<(), CsvError> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# schema = \"{SUMMARY_SCHEMA}\"")?;
    for line in header_toml.lines() {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scenario.as_str(),
            r.estimator.as_str(),
            &r.n.to_string(),
            &r.d.to_string(),
            &r.trials_total.to_string(),
            &r.trials_ok.to_string(),
            &opt_float(r.mean),
            &opt_float(r.median),
            &opt_float(r.p7_5),
            &opt_float(r.p92_5),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_significant_digits() {
        let s = format_float(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
    }

    #[test]
    fn records_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let mut r = MetricsRecord::new("demo", "min-l2".into(), 4, 8, 99);
        r.test_mse = Some(0.125);
        r.support_size = Some(4);
        let mut r2 = MetricsRecord::new("demo", "omp".into(), 4, 8, 100);
        r2.error = Some("boom, with comma".into());
        write_records(&path, "n = 4\n", &[r.clone(), r2.clone()]).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back, vec![r, r2]);
    }

    #[test]
    fn summary_is_recomputable_and_deterministic() {
        let mut records = Vec::new();
        for seed in 0..7u64 {
            let mut r = MetricsRecord::new("demo", "min-l2".into(), 4, 8, seed);
            r.test_mse = Some(seed as f64);
            records.push(r);
        }
        let s1 = summarize(&records);
        let s2 = summarize(&records);
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 1);
        assert_eq!(s1[0].median, Some(3.0));
        assert_eq!(s1[0].mean, Some(3.0));
        assert_eq!(s1[0].trials_ok, 7);
    }
}
