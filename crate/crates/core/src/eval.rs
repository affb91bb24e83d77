//! Positioning error statistics and method comparison reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Location, PositionEstimate, TerminationFlag};
use crate::positioner::diameter;

pub fn radial_errors(estimates: &[PositionEstimate], truth: &[Location]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: truth.len(),
        });
    }
    Ok(estimates.iter().zip(truth).map(|(e, t)| e.location.distance(t)).collect())
}

/// Step points `(value, fraction ≤ value)` at each distinct sorted value.
pub fn ecdf(errors: &[f64]) -> Result<Vec<(f64, f64)>> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    Ok(out)
}

/// Fraction of errors `<= x`.
pub fn ecdf_at(steps: &[(f64, f64)], x: f64) -> f64 {
    match steps.partition_point(|(v, _)| *v <= x) {
        0 => 0.0,
        i => steps[i - 1].1,
    }
}

/// Smallest radius containing at least `pct` percent of the errors: the
/// `⌈pct·n/100⌉`-th smallest error.
pub fn circular_error(errors: &[f64], pct: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::invalid(format!("percentile {pct} outside (0, 100]")));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((pct * n as f64 / 100.0) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfStats {
    pub converging: f64,
    pub looping: f64,
    pub max: f64,
}

pub fn tf_stats(estimates: &[PositionEstimate]) -> Result<TfStats> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = estimates.len() as f64;
    let count = |tf| estimates.iter().filter(|e| e.tf == tf).count() as f64 / n;
    Ok(TfStats {
        converging: count(TerminationFlag::Converging),
        looping: count(TerminationFlag::Looping),
        max: count(TerminationFlag::Max),
    })
}

/// Diameter of every detected loop, including loops that were finally
/// resolved by the max-state rule.
pub fn loop_diameters(estimates: &[PositionEstimate]) -> Vec<f64> {
    estimates
        .iter()
        .filter_map(|e| e.loop_points.as_deref())
        .map(diameter)
        .collect()
}

/// Per query, the error of the searched location (or final estimate) closest
/// to the ground truth.
pub fn opt_errors(estimates: &[PositionEstimate], truth: &[Location]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: truth.len(),
        });
    }
    Ok(estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            e.path
                .iter()
                .chain(std::iter::once(&e.location))
                .map(|l| l.distance(t))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Truth locations whose error exceeds `threshold`, with that error.
pub fn large_errors(estimates: &[PositionEstimate], truth: &[Location], threshold: f64) -> Result<Vec<(Location, f64)>> {
    let errs = radial_errors(estimates, truth)?;
    Ok(truth.iter().zip(errs).filter(|(_, e)| *e > threshold).map(|(t, e)| (*t, e)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub ce50: f64,
    pub ce75: f64,
    pub ce90: f64,
    pub max: f64,
}

impl ReportRow {
    pub fn from_errors(method: impl Into<String>, errors: &[f64]) -> Result<Self> {
        Ok(ReportRow {
            method: method.into(),
            ce50: circular_error(errors, 50.0)?,
            ce75: circular_error(errors, 75.0)?,
            ce90: circular_error(errors, 90.0)?,
            max: circular_error(errors, 100.0)?,
        })
    }

    pub fn columns(&self) -> [f64; 4] {
        [self.ce50, self.ce75, self.ce90, self.max]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub ecdfs: BTreeMap<String, Vec<(f64, f64)>>,
}

pub const OPT_ROW: &str = "opt";

impl Report {
    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,ce50,ce75,ce90,max\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{},{}", r.method, r.ce50, r.ce75, r.ce90, r.max).unwrap();
        }
        s
    }

    pub fn ecdf_csv(&self, method: &str) -> Option<String> {
        let steps = self.ecdfs.get(method)?;
        let mut s = String::from("error,fraction\n");
        for (v, f) in steps {
            writeln!(s, "{v},{f}").unwrap();
        }
        Some(s)
    }
}

/// One row per method (in name order), plus an `opt` row built from the paths
/// of `opt_source` when given.
pub fn compare_report(
    runs: &BTreeMap<String, Vec<PositionEstimate>>,
    truth: &[Location],
    opt_source: Option<&str>,
) -> Result<Report> {
    let mut rows = Vec::new();
    let mut ecdfs = BTreeMap::new();
    for (method, estimates) in runs {
        let errs = radial_errors(estimates, truth)?;
        rows.push(ReportRow::from_errors(method.as_str(), &errs)?);
        ecdfs.insert(method.clone(), ecdf(&errs)?);
    }
    if let Some(src) = opt_source {
        let estimates = runs
            .get(src)
            .ok_or_else(|| Error::invalid(format!("no run named {src}")))?;
        let errs = opt_errors(estimates, truth)?;
        rows.push(ReportRow::from_errors(OPT_ROW, &errs)?);
        ecdfs.insert(OPT_ROW.to_string(), ecdf(&errs)?);
    }
    Ok(Report { rows, ecdfs })
}
