//! Comparison table over regret reports, aggregated across seeds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use samuel_core::Interval;

use crate::config::AlgorithmName;
use crate::io::{self, fmt_float, FormatError};
use crate::runner::ReportFile;

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("no reports to compare")]
    Empty,
    #[error("{path}: scenario hash {found} differs from {expected} (first report)")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub algorithm: AlgorithmName,
    pub interval: Interval,
    pub seeds: usize,
    pub regret_mean: f64,
    pub regret_std: f64,
    pub bound_mean: f64,
    pub ratio_mean: f64,
    pub ratio_std: f64,
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn load_reports(paths: &[PathBuf]) -> Result<Vec<ReportFile>, CompareError> {
    if paths.is_empty() {
        return Err(CompareError::Empty);
    }
    let reports: Vec<ReportFile> = paths
        .iter()
        .map(|p| io::read_json(p))
        .collect::<Result<_, _>>()?;
    let expected = &reports[0].scenario_hash;
    for (p, r) in paths.iter().zip(&reports).skip(1) {
        if &r.scenario_hash != expected {
            return Err(CompareError::HashMismatch {
                path: p.clone(),
                expected: expected.clone(),
                found: r.scenario_hash.clone(),
            });
        }
    }
    Ok(reports)
}

/// One row per (algorithm, interval), sorted by interval then mean regret.
pub fn compare(reports: &[ReportFile]) -> Result<Vec<ComparisonRow>, CompareError> {
    if reports.is_empty() {
        return Err(CompareError::Empty);
    }
    let mut groups: BTreeMap<(AlgorithmName, Interval), Vec<(f64, f64)>> = BTreeMap::new();
    for file in reports {
        for r in &file.reports {
            groups
                .entry((file.algorithm, r.interval))
                .or_default()
                .push((r.regret, r.full_matrix_bound));
        }
    }
    let mut rows: Vec<ComparisonRow> = groups
        .into_iter()
        .map(|((algorithm, interval), vals)| {
            let regrets: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let bounds: Vec<f64> = vals.iter().map(|v| v.1).collect();
            let ratios: Vec<f64> = vals.iter().map(|v| v.0 / v.1).collect();
            let (regret_mean, regret_std) = mean_std(&regrets);
            let (ratio_mean, ratio_std) = mean_std(&ratios);
            ComparisonRow {
                algorithm,
                interval,
                seeds: vals.len(),
                regret_mean,
                regret_std,
                bound_mean: mean_std(&bounds).0,
                ratio_mean,
                ratio_std,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.interval
            .cmp(&b.interval)
            .then(a.regret_mean.total_cmp(&b.regret_mean))
            .then(a.algorithm.cmp(&b.algorithm))
    });
    Ok(rows)
}

pub fn to_csv(rows: &[ComparisonRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "interval_start",
        "interval_end",
        "seeds",
        "regret_mean",
        "regret_std",
        "bound",
        "ratio_mean",
        "ratio_std",
    ])
    .expect("in-memory CSV");
    for r in rows {
        w.write_record([
            r.algorithm.as_str().to_string(),
            r.interval.start.to_string(),
            r.interval.end.to_string(),
            r.seeds.to_string(),
            fmt_float(r.regret_mean),
            fmt_float(r.regret_std),
            fmt_float(r.bound_mean),
            fmt_float(r.ratio_mean),
            fmt_float(r.ratio_std),
        ])
        .expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("CSV is UTF-8")
}

pub fn compare_files(paths: &[PathBuf], out: &Path) -> Result<Vec<ComparisonRow>, CompareError> {
    let rows = compare(&load_reports(paths)?)?;
    io::write_atomic(out, &to_csv(&rows))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sample_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(compare(&[]), Err(CompareError::Empty)));
        assert!(matches!(load_reports(&[]), Err(CompareError::Empty)));
    }
}
