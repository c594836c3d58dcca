use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::sweep::{PairDetail, ResultRecord};
use crate::aggregation::Aggregate;
use crate::error::{HurstError, Result};
use crate::estimators::Method;

/// Tolerance for matching grid values read back from CSV.
const GRID_TOLERANCE: f64 = 1e-9;

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub h_true: f64,
    pub sigma_eps: f64,
    pub method: Method,
    pub aggregate: Aggregate,
    pub mean: f64,
    pub sd: f64,
    pub bias: f64,
    pub mse: f64,
    /// Fraction of candidate pairs that were invalid.
    pub exclusion_rate: f64,
    /// Replicates with an estimate.
    pub n: usize,
}

/// Mean, sample sd (divisor `n - 1`), bias and MSE per (H, σ, method, aggregate).
///
/// Cells with fewer than two estimates are omitted with a warning.
pub fn evaluate_metrics(records: &[ResultRecord]) -> Vec<MetricRow> {
    let mut cells: BTreeMap<(u64, u64, Method, Aggregate), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        // Order-preserving keys for nonnegative floats.
        let key = (
            r.h_true.to_bits(),
            r.sigma_eps.to_bits(),
            r.method,
            r.aggregate,
        );
        cells.entry(key).or_default().push(r);
    }
    let mut out = Vec::with_capacity(cells.len());
    for ((_, _, method, aggregate), rs) in cells {
        let (h, sigma) = (rs[0].h_true, rs[0].sigma_eps);
        let est: Vec<f64> = rs.iter().filter_map(|r| r.h_hat).collect();
        if est.len() < 2 {
            log::warn!(
                "cell H={h} sigma={sigma} {method}/{aggregate} has {} estimate(s); omitted",
                est.len()
            );
            continue;
        }
        let n = est.len() as f64;
        let mean = est.iter().sum::<f64>() / n;
        let var = est.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let mse = est.iter().map(|v| (v - h) * (v - h)).sum::<f64>() / n;
        let valid: usize = rs.iter().map(|r| r.valid_pairs).sum();
        let excluded: usize = rs.iter().map(|r| r.excluded_pairs).sum();
        let total = valid + excluded;
        out.push(MetricRow {
            h_true: h,
            sigma_eps: sigma,
            method,
            aggregate,
            mean,
            sd: var.sqrt(),
            bias: mean - h,
            mse,
            exclusion_rate: if total == 0 {
                0.0
            } else {
                excluded as f64 / total as f64
            },
            n: est.len(),
        });
    }
    out
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// How often each pair landed inside the ±2σ band of the aggregated predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReliabilityMap {
    pub h_true: f64,
    pub band_center: f64,
    pub band_half_width: f64,
    pub replicates: usize,
    pub counts: BTreeMap<(usize, usize), usize>,
}

#[derive(Serialize)]
struct PairCountRow {
    j1: usize,
    j2: usize,
    count: usize,
}

impl PairReliabilityMap {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (&(j1, j2), &count) in &self.counts {
            w.serialize(PairCountRow { j1, j2, count })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts, per level pair, the pair estimates of `method` that fall inside
/// `mean ± 2 sd` of the `aggregate` predictions for `h_true`.
pub fn pair_reliability(
    records: &[ResultRecord],
    details: &[PairDetail],
    h_true: f64,
    method: Method,
    aggregate: Aggregate,
) -> Result<PairReliabilityMap> {
    let near = |h: f64| (h - h_true).abs() <= GRID_TOLERANCE;
    let preds: Vec<f64> = records
        .iter()
        .filter(|r| near(r.h_true) && r.method == method && r.aggregate == aggregate)
        .filter_map(|r| r.h_hat)
        .collect();
    if preds.len() < 2 {
        return Err(HurstError::NoData(format!(
            "{} {method}/{aggregate} prediction(s) for H = {h_true}",
            preds.len()
        )));
    }
    let n = preds.len() as f64;
    let center = preds.iter().sum::<f64>() / n;
    let sd = (preds
        .iter()
        .map(|v| (v - center) * (v - center))
        .sum::<f64>()
        / (n - 1.0))
        .sqrt();
    if !(sd > 0.0) {
        return Err(HurstError::domain(
            "degenerate band: predictions have zero spread",
        ));
    }
    let half = 2.0 * sd;
    let mut counts = BTreeMap::new();
    let mut replicates = 0;
    for d in details
        .iter()
        .filter(|d| near(d.h_true) && d.method == method)
    {
        replicates += 1;
        for p in &d.pairs {
            let hit = p.h_hat().is_some_and(|h| (h - center).abs() <= half);
            *counts.entry((p.j1, p.j2)).or_insert(0) += usize::from(hit);
        }
    }
    if replicates == 0 {
        return Err(HurstError::NoData(format!(
            "no pair detail for H = {h_true} and {method}"
        )));
    }
    Ok(PairReliabilityMap {
        h_true,
        band_center: center,
        band_half_width: half,
        replicates,
        counts,
    })
}
