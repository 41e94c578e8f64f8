//! Block occupancy and the Poisson approximation of small cycle counts.

use super::{CellStats, ExperimentConfig, ExperimentReport, Series, SeriesKind, Verdict};
use crate::cycles::{sample_block_occupancy, sample_cycle_structure, sample_poisson_counts, CycleCounts};
use crate::error::{Error, Result};
use crate::stats::{chi_square_two_sample, mean, variance, Summary};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Constant `C` in the window condition `m >= (C/rho) log(1/rho)`.
pub const OCCUPANCY_C: f64 = 8.0;
const Q2_CONSTANT: f64 = 5.0;
const CONSISTENCY_P: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct OccupancyRow {
    pub replica: u64,
    pub q0: u64,
    pub q1: u64,
    pub q2plus: u64,
    pub total: u64,
}

fn check_window(config: &ExperimentConfig) -> Result<()> {
    let need = OCCUPANCY_C / config.rho * (1.0 / config.rho).ln();
    if (config.m as f64) < need {
        return Err(Error::Config(format!(
            "block window starts at m = {} but m >= (C/rho) log(1/rho) = {need:.1} is required (C = {OCCUPANCY_C})",
            config.m
        )));
    }
    Ok(())
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    (mean(values), (variance(values) / values.len() as f64).sqrt())
}

pub(crate) fn occupancy_verdicts(config: &ExperimentConfig, rows: &[OccupancyRow]) -> Vec<Verdict> {
    let (rho, width) = (config.rho, config.n_blocks as f64);
    let col = |f: fn(&OccupancyRow) -> u64| rows.iter().map(|r| f(r) as f64).collect::<Vec<_>>();
    let (q1, se1) = mean_and_se(&col(|r| r.q1));
    let target = width * rho * (1.0 - rho);
    let tol = 3.0 * se1 + rho.powi(3) * width;
    let mut out = vec![Verdict::check(
        "q1-mean",
        (q1 - target).abs() <= tol,
        format!("mean |Q1| = {q1:.3}, target {target:.3} +- {tol:.3}"),
    )];
    let (q2, _) = mean_and_se(&col(|r| r.q2plus));
    let cap = Q2_CONSTANT * rho * rho * width;
    out.push(Verdict::check("q2-mean", q2 <= cap, format!("mean |Q>=2| = {q2:.3}, bound {cap:.3}")));
    let (total, se) = mean_and_se(&col(|r| r.total));
    let target = rho * width;
    out.push(Verdict::check(
        "total-mean",
        (total - target).abs() <= 3.0 * se,
        format!("mean N = {total:.3}, target {target:.3} +- {:.3}", 3.0 * se),
    ));
    out
}

/// Occupancy of the blocks `[m, m + n_blocks)` under the Poisson model.
pub fn run_occupancy(config: &ExperimentConfig) -> Result<ExperimentReport> {
    check_window(config)?;
    let (m, n) = (config.m, config.m + config.n_blocks);
    let rows = super::par_replicas(config.replicas, |r| {
        let mut rng = config.stream("occupancy", 0, r);
        let occ = sample_block_occupancy(config.rho, m, n, &mut rng)?;
        Ok(OccupancyRow {
            replica: r,
            q0: occ.q0.len() as u64,
            q1: occ.q1.len() as u64,
            q2plus: occ.q2plus.len() as u64,
            total: occ.total,
        })
    })?;
    let mut report = ExperimentReport::new(config, &rows).with_columns(&["replica", "q0", "q1", "q2plus", "total"]);
    for (label, f) in
        [("|Q1|", (|r: &OccupancyRow| r.q1) as fn(&OccupancyRow) -> u64), ("|Q>=2|", |r| r.q2plus), ("N", |r| r.total)]
    {
        let v: Vec<f64> = rows.iter().map(|r| f(r) as f64).collect();
        report.cells.push(CellStats { label: label.into(), n: None, note: None, stats: Some(Summary::of(&v)) });
    }
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for r in &rows {
        *hist.entry(r.q1).or_default() += 1;
    }
    report.series.push(Series {
        name: "|Q1| over replicas".into(),
        kind: SeriesKind::Histogram,
        x_label: "|Q1|".into(),
        y_label: "count".into(),
        points: hist.into_iter().map(|(k, c)| [k as f64, c as f64]).collect(),
        markers: vec![(config.n_blocks as f64 * config.rho * (1.0 - config.rho), "target".into())],
    });
    report.verdicts = occupancy_verdicts(config, &rows);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CountRow {
    pub value: u64,
    pub permutation: u64,
    pub poisson: u64,
}

pub(crate) fn consistency_verdicts(_config: &ExperimentConfig, rows: &[CountRow]) -> Vec<Verdict> {
    let a: Vec<u64> = rows.iter().map(|r| r.permutation).collect();
    let b: Vec<u64> = rows.iter().map(|r| r.poisson).collect();
    let (stat, df, p) = chi_square_two_sample(&a, &b);
    vec![Verdict::check(
        "chi-square",
        p > CONSISTENCY_P,
        format!("two-sample chi-square {stat:.3} on {df} df, p = {p:.4}"),
    )]
}

/// Law of `sum_{l <= N/W} C_l` for a permutation against the Poisson
/// surrogate `sum_{l <= N/W} Z_l`.
pub fn run_poisson_consistency(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let n = config.n_values[0];
    let cut = n / config.w;
    if cut == 0 {
        return Err(Error::Config(format!("N / W = {n} / {} is zero", config.w)));
    }
    let draws = super::par_replicas(config.replicas, |r| {
        let mut rng = config.stream("poisson-consistency", 0, r);
        let perm = sample_cycle_structure(n, &mut rng)?;
        let z = sample_poisson_counts(cut, &mut rng)?;
        let low = perm.counts().range(..=cut).map(|(_, &c)| c).sum::<u64>();
        Ok((low, z.total_cycles()))
    })?;
    let max = draws.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0);
    let mut rows: Vec<CountRow> = (0..=max).map(|v| CountRow { value: v, permutation: 0, poisson: 0 }).collect();
    for &(a, b) in &draws {
        rows[a as usize].permutation += 1;
        rows[b as usize].poisson += 1;
    }
    let mut report = ExperimentReport::new(config, &rows).with_columns(&["value", "permutation", "poisson"]);
    report.metric("cutoff", cut as f64);
    for (label, pick) in [("permutation", 0usize), ("poisson", 1)] {
        let v: Vec<f64> = draws.iter().map(|&(a, b)| if pick == 0 { a } else { b } as f64).collect();
        report.cells.push(CellStats {
            label: format!("{label} count of cycles of length <= {cut}"),
            n: Some(n),
            note: None,
            stats: Some(Summary::of(&v)),
        });
        report.series.push(Series {
            name: label.into(),
            kind: SeriesKind::Histogram,
            x_label: format!("cycles of length <= {cut}"),
            y_label: "count".into(),
            points: rows
                .iter()
                .map(|r| [r.value as f64, if pick == 0 { r.permutation } else { r.poisson } as f64])
                .collect(),
            markers: vec![],
        });
    }
    report.verdicts = consistency_verdicts(config, &rows);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;

    #[test]
    fn window_condition_is_checked() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Occupancy);
        c.m = 100;
        assert!(matches!(run_occupancy(&c), Err(Error::Config(_))));
    }

    #[test]
    fn small_rho_has_few_multiple_blocks() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Occupancy);
        c.rho = 0.01;
        c.m = 4000;
        c.n_blocks = 500;
        c.replicas = 200;
        let rep = run_occupancy(&c).unwrap();
        let q2 = rep.cells[1].stats.as_ref().unwrap().mean;
        assert!(q2 < 0.1, "{q2}");
    }
}
