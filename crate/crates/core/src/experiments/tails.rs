//! Upper-tail experiments for block-conditioned fields.

use super::{ExperimentConfig, ExperimentReport, Series, SeriesKind, Status, Verdict};
use crate::arith::{arithmetic_distance, classify};
use crate::cycles::{Block, BlockSampler};
use crate::error::{invalid, Result};
use crate::field::{log_dist_term, ExtReal};
use crate::ratefn::{bahadur_rao_tail, chunked_estimate, lambda, legendre, solve_xcrit, tilted_tail_estimate};
use crate::rng::{self, Stream};
use crate::stats::{correlation_from_moments, quantile_sorted};
use crate::torus::{frac, scaled_frac, TorusPoint, GOLDEN};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

const BR_BAND: (f64, f64) = (2.0 / 3.0, 1.5);
const BLOCK_BAND: (f64, f64) = (0.5, 2.0);
const MIN_BLOCK_START: f64 = 1e4;
/// Default major-arc width for classifying the evaluation point.
const TAIL_KAPPA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TailRow {
    pub method: String,
    pub probability: f64,
    pub std_error: f64,
    pub samples: u64,
    pub hits: u64,
}

const CONDITIONAL: &str = "conditional-block";
const TILTED: &str = "tilted-iid";
const BAHADUR_RAO: &str = "bahadur-rao";

/// `log|1 - e(l t)|` as a float (`-inf` at singular points).
fn log_term(t: TorusPoint, l: u64) -> Result<f64> {
    Ok(match log_dist_term(t.scale(l)?) {
        ExtReal::NegInf => f64::NEG_INFINITY,
        ExtReal::Finite(x) => x,
    })
}

/// One block under the tilted law `P(l) ∝ phi(beta, l t)/l`.
struct TiltedBlock {
    cdf: Vec<f64>,
    values: Vec<f64>,
    /// `log Phi_k`, the log of the block's conditional Laplace transform.
    log_phi: f64,
}

impl TiltedBlock {
    fn new(block: Block, t: TorusPoint, beta: f64) -> Result<Self> {
        let mut cdf = Vec::with_capacity(block.len() as usize);
        let mut values = Vec::with_capacity(block.len() as usize);
        let mut acc = 0.0;
        for l in block.start..block.end {
            let v = log_term(t, l)?;
            acc += (beta * v).exp() / l as f64;
            cdf.push(acc);
            values.push(v);
        }
        if !(acc > 0.0) {
            return Err(invalid("tilted block has zero mass"));
        }
        Ok(Self { cdf, values, log_phi: (acc / block.mass()).ln() })
    }

    fn draw(&self, rng: &mut Stream) -> f64 {
        let total = *self.cdf.last().expect("nonempty block");
        let u = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.values[i]
    }
}

fn tail_level(config: &ExperimentConfig) -> f64 {
    config.y.unwrap_or_else(|| solve_xcrit().x_crit)
}

fn tail_blocks(config: &ExperimentConfig) -> Result<Vec<Block>> {
    (config.m..config.m + config.q)
        .map(|k| {
            let b = Block::new(k, config.rho)?;
            if b.is_empty() {
                Err(invalid(format!("block {k} at scale {} is empty", config.rho)))
            } else {
                Ok(b)
            }
        })
        .collect()
}

pub(crate) fn conditional_verdicts(config: &ExperimentConfig, rows: &[TailRow]) -> Result<Vec<Verdict>> {
    let p = |m: &str| rows.iter().find(|r| r.method == m).map(|r| r.probability).unwrap_or(f64::NAN);
    let (a, b, c) = (p(CONDITIONAL), p(TILTED), p(BAHADUR_RAO));
    let kappa = config.kappa.unwrap_or(TAIL_KAPPA);
    let arc = classify(config.t, config.xi0, kappa)?;
    if arc.is_major() {
        let detail = format!(
            "t = {} lies on a major arc (||{} t|| <= {kappa}); assertion skipped",
            config.t,
            arc.witness.unwrap_or(0)
        );
        return Ok(vec![
            Verdict::with("bahadur-rao-agreement", Status::Warning, detail.clone()),
            Verdict::with("block-vs-iid", Status::Warning, detail),
        ]);
    }
    let mut out = Vec::new();
    if b > 0.0 && c > 0.0 {
        let r = b / c;
        out.push(Verdict::check(
            "bahadur-rao-agreement",
            r >= BR_BAND.0 && r <= BR_BAND.1,
            format!("tilted / Bahadur-Rao = {r:.4}, required in [2/3, 3/2]"),
        ));
    } else {
        out.push(Verdict::with("bahadur-rao-agreement", Status::Skipped, "tail probability is zero"));
    }
    let start = (config.rho * config.m as f64).exp();
    if start < MIN_BLOCK_START {
        out.push(Verdict::with(
            "block-vs-iid",
            Status::Skipped,
            format!("e^(rho m) = {start:.0} is below {MIN_BLOCK_START:e}"),
        ));
    } else if b > 0.0 {
        let r = a / b;
        out.push(Verdict::check(
            "block-vs-iid",
            r >= BLOCK_BAND.0 && r <= BLOCK_BAND.1,
            format!("conditional-block / tilted = {r:.4}, required in [1/2, 2]"),
        ));
    } else {
        out.push(Verdict::with("block-vs-iid", Status::Skipped, "tail probability is zero"));
    }
    Ok(out)
}

/// `P(Y >= y q)` three ways: importance sampling of the block-conditioned
/// field `Y = sum_k log|1 - e(l_k t)|`, tilted sampling of the i.i.d. sum,
/// and the Bahadur–Rao formula.
pub fn run_conditional_tail(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let y = tail_level(config);
    let q = config.q;
    let blocks = tail_blocks(config)?;
    let mut report_metrics = vec![("y", y), ("q", q as f64), ("block_start", blocks[0].start as f64)];
    let rows = if y >= LN_2 {
        [CONDITIONAL, TILTED, BAHADUR_RAO]
            .iter()
            .map(|m| TailRow { method: m.to_string(), probability: 0.0, std_error: 0.0, samples: 0, hits: 0 })
            .collect()
    } else {
        let (_, beta) = legendre(y)?;
        let tilted: Vec<TiltedBlock> =
            blocks.par_iter().map(|&b| TiltedBlock::new(b, config.t, beta)).collect::<Result<_>>()?;
        let log_phi: f64 = tilted.iter().map(|b| b.log_phi).sum();
        report_metrics.extend([("beta", beta), ("log_phi_sum", log_phi), ("q_lambda", q as f64 * lambda(beta)?)]);
        let threshold = y * q as f64;
        let cond = chunked_estimate(config.samples, config.seed, "conditional-tail", |rng| {
            let s: f64 = tilted.iter().map(|b| b.draw(rng)).sum();
            (s >= threshold).then(|| (log_phi - beta * s).exp())
        });
        let iid = tilted_tail_estimate(y, q, config.samples, config.seed)?;
        let br = bahadur_rao_tail(y, q)?;
        vec![
            TailRow {
                method: CONDITIONAL.into(),
                probability: cond.probability,
                std_error: cond.std_error,
                samples: cond.samples,
                hits: cond.hits,
            },
            TailRow {
                method: TILTED.into(),
                probability: iid.probability,
                std_error: iid.std_error,
                samples: iid.samples,
                hits: iid.hits,
            },
            TailRow { method: BAHADUR_RAO.into(), probability: br, std_error: 0.0, samples: 0, hits: 0 },
        ]
    };
    let mut report =
        ExperimentReport::new(config, &rows).with_columns(&["method", "probability", "std_error", "samples", "hits"]);
    for (k, v) in report_metrics {
        report.metric(k, v);
    }
    report.verdicts = conditional_verdicts(config, &rows)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct PairRow {
    pub bucket: String,
    pub s: f64,
    pub t: f64,
    pub distance: f64,
    pub replicas: u64,
    pub threshold: f64,
    pub hits_s: u64,
    pub hits_t: u64,
    pub joint: u64,
    pub sum_s: f64,
    pub sum_t: f64,
    pub sum_ss: f64,
    pub sum_tt: f64,
    pub sum_st: f64,
}

impl PairRow {
    fn ratio(&self) -> f64 {
        let n = self.replicas as f64;
        self.joint as f64 * n / (self.hits_s as f64 * self.hits_t as f64)
    }

    fn correlation(&self) -> f64 {
        correlation_from_moments(
            self.replicas as f64,
            [self.sum_s, self.sum_t],
            [self.sum_ss, self.sum_tt, self.sum_st],
        )
    }
}

const NEAR: &str = "near-zero";
const TOP: &str = "top";
/// Bucket edges for `d_{xi0}(s, t)`.
const BUCKETS: [(&str, f64); 4] = [(NEAR, 0.0), ("low", 1e-4), ("mid", 1e-3), (TOP, 2.5e-3)];
const PAIRS_PER_BUCKET: [usize; 4] = [0, 4, 4, 8];
const TOP_CORRELATION: f64 = 0.1;
const PAIR_CHUNK: u64 = 1 << 14;

fn bucket_of(d: f64) -> usize {
    BUCKETS.iter().rposition(|&(_, lo)| d >= lo).unwrap_or(0)
}

/// Deterministic evaluation pairs: constructed near-coincident pairs plus
/// generic pairs from two Kronecker sequences, binned by distance.
fn two_point_pairs(xi0: u64) -> Result<Vec<(usize, f64, f64, f64)>> {
    let mut pairs = Vec::new();
    let g = GOLDEN;
    for (s, t) in [(g, g), (g, 1.0 - g), (g, frac(2.0 * g)), (g, g + 1e-7)] {
        let d = arithmetic_distance(s, t, xi0);
        pairs.push((bucket_of(d), s, t, d));
    }
    let mut need = PAIRS_PER_BUCKET;
    let (a, b) = (2f64.sqrt(), 3f64.sqrt());
    for i in 1..100_000u64 {
        if need.iter().all(|&n| n == 0) {
            break;
        }
        let s = scaled_frac(a, i as f64);
        let t = frac(scaled_frac(b, i as f64) + 1.0 / PI);
        let d = arithmetic_distance(s, t, xi0);
        let k = bucket_of(d);
        if need[k] > 0 {
            need[k] -= 1;
            pairs.push((k, s, t, d));
        }
    }
    if need.iter().any(|&n| n > 0) {
        return Err(invalid(format!("could not fill the distance buckets at xi0 = {xi0}")));
    }
    Ok(pairs)
}

/// Level with `P(sum of q i.i.d. log|1 - e(U)|  >= level) = 1/100`.
fn iid_quantile(config: &ExperimentConfig) -> f64 {
    let mut rng = config.stream("two-point-threshold", 0, 0);
    let mut sums: Vec<f64> = (0..config.samples)
        .map(|_| (0..config.q).map(|_| (2.0 * (PI * rng.random::<f64>()).sin()).ln()).sum())
        .collect();
    sums.sort_by(f64::total_cmp);
    quantile_sorted(&sums, 0.99)
}

pub(crate) fn two_point_verdicts(_config: &ExperimentConfig, rows: &[PairRow]) -> Vec<Verdict> {
    let top: Vec<&PairRow> = rows.iter().filter(|r| r.bucket == TOP).collect();
    let joint: u64 = top.iter().map(|r| r.joint).sum();
    let expected: f64 = top.iter().map(|r| r.hits_s as f64 * r.hits_t as f64 / r.replicas as f64).sum();
    let ratio = joint as f64 / expected;
    let mut out = vec![Verdict::check(
        "top-bucket-ratio",
        !top.is_empty() && ratio >= 0.5 && ratio <= 2.0,
        format!("pooled joint / product = {ratio:.4} over {} pairs ({joint} joint exceedances)", top.len()),
    )];
    let worst = top.iter().map(|r| r.correlation().abs()).fold(0.0, f64::max);
    out.push(Verdict::check(
        "top-bucket-correlation",
        !top.is_empty() && worst < TOP_CORRELATION,
        format!("largest |correlation| in the top bucket = {worst:.4}"),
    ));
    let near: Vec<String> =
        rows.iter().filter(|r| r.bucket == NEAR).map(|r| format!("d={:.1e}: {:.2}", r.distance, r.ratio())).collect();
    out.push(Verdict::with("near-zero-inflation", Status::Info, format!("joint / product: {}", near.join(", "))));
    if let Some(r) = rows.iter().find(|r| r.s == r.t) {
        out.push(Verdict::check(
            "identical-pair",
            r.joint == r.hits_s && r.hits_s == r.hits_t,
            format!("s = t gives joint {} and single {}", r.joint, r.hits_s),
        ));
    }
    let p: Vec<f64> = top.iter().map(|r| r.hits_s as f64 / r.replicas as f64).collect();
    let mean_p = p.iter().sum::<f64>() / p.len().max(1) as f64;
    out.push(Verdict::with("single-point-level", Status::Info, format!("mean single-point exceedance {mean_p:.4}")));
    out
}

/// Joint exceedances of the block-conditioned field at pairs `(s, t)`
/// binned by arithmetic distance.
pub fn run_two_point(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let blocks = tail_blocks(config)?;
    let samplers: Vec<BlockSampler> = blocks.iter().map(|&b| BlockSampler::new(b)).collect::<Result<_>>()?;
    let threshold = iid_quantile(config);
    let pairs = two_point_pairs(config.xi0)?;
    let n_chunks = config.replicas.div_ceil(PAIR_CHUNK);
    let rows: Vec<PairRow> = pairs
        .iter()
        .enumerate()
        .map(|(pi, &(bucket, s, t, d))| {
            let parts: Vec<[f64; 8]> = (0..n_chunks)
                .into_par_iter()
                .map(|ci| {
                    let mut rng = rng::stream(config.seed, &[rng::label("two-point"), pi as u64, ci]);
                    let count = PAIR_CHUNK.min(config.replicas - ci * PAIR_CHUNK);
                    let mut acc = [0.0; 8];
                    for _ in 0..count {
                        let (mut ys, mut yt) = (0.0, 0.0);
                        for sampler in &samplers {
                            let l = sampler.sample(&mut rng) as f64;
                            ys += log_float(scaled_frac(s, l));
                            yt += log_float(scaled_frac(t, l));
                        }
                        let (hs, ht) = (ys >= threshold, yt >= threshold);
                        acc[0] += hs as u8 as f64;
                        acc[1] += ht as u8 as f64;
                        acc[2] += (hs && ht) as u8 as f64;
                        acc[3] += ys;
                        acc[4] += yt;
                        acc[5] += ys * ys;
                        acc[6] += yt * yt;
                        acc[7] += ys * yt;
                    }
                    acc
                })
                .collect();
            let mut tot = [0.0; 8];
            for p in &parts {
                for (a, b) in tot.iter_mut().zip(p) {
                    *a += b;
                }
            }
            PairRow {
                bucket: BUCKETS[bucket].0.into(),
                s,
                t,
                distance: d,
                replicas: config.replicas,
                threshold,
                hits_s: tot[0] as u64,
                hits_t: tot[1] as u64,
                joint: tot[2] as u64,
                sum_s: tot[3],
                sum_t: tot[4],
                sum_ss: tot[5],
                sum_tt: tot[6],
                sum_st: tot[7],
            }
        })
        .collect();
    let mut report = ExperimentReport::new(config, &rows).with_columns(&[
        "bucket",
        "s",
        "t",
        "distance",
        "replicas",
        "threshold",
        "hits_s",
        "hits_t",
        "joint",
        "sum_s",
        "sum_t",
        "sum_ss",
        "sum_tt",
        "sum_st",
    ]);
    report.metric("threshold", threshold);
    report.series.push(Series {
        name: "joint / product exceedance".into(),
        kind: SeriesKind::Line,
        x_label: "log10 arithmetic distance".into(),
        y_label: "joint / product".into(),
        points: {
            let mut pts: Vec<[f64; 2]> = rows
                .iter()
                .filter(|r| r.distance > 0.0 && r.hits_s > 0 && r.hits_t > 0)
                .map(|r| [r.distance.log10(), r.ratio()])
                .collect();
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
            pts
        },
        markers: vec![],
    });
    report.verdicts = two_point_verdicts(config, &rows);
    Ok(report)
}

#[inline]
fn log_float(u: f64) -> f64 {
    match log_dist_term(TorusPoint::Float(u)) {
        ExtReal::NegInf => f64::NEG_INFINITY,
        ExtReal::Finite(x) => x,
    }
}
