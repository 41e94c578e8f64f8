//! Mesh scans of the permutation field and of the Poisson surrogate.

use super::{
    ext_float, finite_summary, fraction, par_replicas, CellStats, ExperimentConfig, ExperimentReport, Series,
    SeriesKind, Status, Verdict,
};
use crate::arith::classify;
use crate::cycles::{sample_cycle_structure, sample_poisson_counts, CycleCounts};
use crate::error::{Error, Result};
use crate::field::{eval_point, expected_value, scan_max, ExtReal, FieldKind, FieldSpec, Mesh};
use crate::ratefn::solve_xcrit;
use crate::stats::{ks_standard_normal, median, variance, Summary};
use crate::torus::{Rational, TorusPoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, LN_2, PI};

/// Largest permutation size accepted by the scan experiments.
pub const MAX_SCAN_SIZE: u64 = 100_000_000;

const SCAN_TAG: &str = "field-scan";
const UPPER_SLACK: f64 = 0.05;
const LLN_BRACKET: (f64, f64) = (0.45, 0.693);
const IMAG_BRACKET: (f64, f64) = (0.85 * FRAC_PI_2, 1.05 * FRAC_PI_2);
const BRACKET_SIZE: u64 = 1_000_000;
const BRACKET_FRACTION: f64 = 0.9;
const TREND_SLACK: f64 = 0.02;
const CLT_VARIANCE: (f64, f64) = (0.85, 1.15);
const CLT_KS: f64 = 0.05;
const ARC_FRACTION: f64 = 0.9;
const ARC_MINOR_BRACKET: (f64, f64) = (0.3, 0.75);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ScanRow {
    pub n: u64,
    pub replica: u64,
    pub cycles: u64,
    #[serde(with = "ext_float")]
    pub max: f64,
    pub argmax: u64,
    pub t_argmax: f64,
    /// `max / log N`; absent for `N = 1`.
    pub ratio: Option<f64>,
    /// Imaginary field at the mesh point nearest `1 - 1/(2N)`.
    pub witness: Option<f64>,
}

const SCAN_COLUMNS: [&str; 8] = ["n", "replica", "cycles", "max", "argmax", "t_argmax", "ratio", "witness"];

fn check_size(n: u64) -> Result<()> {
    if n > MAX_SCAN_SIZE {
        return Err(Error::Capacity {
            param: "permutation size",
            detail: format!("scan experiments accept N <= {MAX_SCAN_SIZE}, got {n}"),
        });
    }
    Ok(())
}

fn scan_rows(config: &ExperimentConfig, kind: FieldKind) -> Result<Vec<ScanRow>> {
    let (tn, td) = config.theta_parts();
    let mut rows = Vec::new();
    for &n in &config.n_values {
        check_size(n)?;
        let q = n.checked_mul(config.mesh_factor).ok_or_else(|| Error::Capacity {
            param: "mesh size",
            detail: format!("{} * {n} overflows", config.mesh_factor),
        })?;
        let mesh = Mesh::new(q, tn, td)?;
        let witness_j = mesh.nearest_index(1.0 - 0.5 / n as f64);
        let cell = par_replicas(config.replicas, |r| {
            // Real and imaginary scans draw the same permutations.
            let mut rng = config.stream(SCAN_TAG, n, r);
            let perm = sample_cycle_structure(n, &mut rng)?;
            let spec = FieldSpec::new(&perm, kind);
            let res = scan_max(&spec, &mesh, false)?;
            let witness = match kind {
                FieldKind::Imaginary => Some(eval_point(&spec, TorusPoint::Exact(mesh.point(witness_j)))?.to_f64()),
                FieldKind::Real => None,
            };
            let max = res.max.to_f64();
            Ok(ScanRow {
                n,
                replica: r,
                cycles: perm.total_cycles(),
                max,
                argmax: res.argmax,
                t_argmax: mesh.point_f64(res.argmax),
                ratio: (n > 1).then(|| max / (n as f64).ln()),
                witness,
            })
        })?;
        rows.extend(cell);
    }
    Ok(rows)
}

fn ratios_by_n(rows: &[ScanRow]) -> BTreeMap<u64, Vec<f64>> {
    let mut out: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(x) = r.ratio {
            out.entry(r.n).or_default().push(x);
        }
    }
    out
}

fn scan_cells(config: &ExperimentConfig, rows: &[ScanRow]) -> Vec<CellStats> {
    let ratios = ratios_by_n(rows);
    config
        .n_values
        .iter()
        .map(|&n| match ratios.get(&n) {
            Some(v) => {
                let (stats, dropped) = finite_summary(v);
                CellStats {
                    label: format!("max/log N at N={n}"),
                    n: Some(n),
                    note: (dropped > 0).then(|| format!("{dropped} non-finite ratios excluded")),
                    stats,
                }
            }
            None => CellStats {
                label: format!("max/log N at N={n}"),
                n: Some(n),
                note: Some("excluded: log N = 0".into()),
                stats: None,
            },
        })
        .collect()
}

fn median_series(rows: &[ScanRow], name: &str) -> Series {
    let points = ratios_by_n(rows).iter().map(|(&n, v)| [(n as f64).log10(), median(v)]).collect();
    Series {
        name: name.into(),
        kind: SeriesKind::Line,
        x_label: "log10 N".into(),
        y_label: "median max / log N".into(),
        points,
        markers: vec![],
    }
}

fn in_open(x: f64, (lo, hi): (f64, f64)) -> bool {
    x > lo && x < hi
}

pub(crate) fn lln_verdicts(_config: &ExperimentConfig, rows: &[ScanRow]) -> Vec<Verdict> {
    let ratios = ratios_by_n(rows);
    let bound = LN_2 + UPPER_SLACK;
    let all: Vec<f64> = ratios.values().flatten().copied().collect();
    let over = all.iter().filter(|&&x| !(x < bound)).count();
    let mut out = vec![Verdict::check(
        "upper-bound",
        over == 0,
        format!("{over} of {} replicas have max/log N >= log 2 + {UPPER_SLACK}", all.len()),
    )];
    let high: Vec<String> = ratios
        .iter()
        .map(|(&n, v)| (n, median(v)))
        .filter(|&(_, m)| !(m < bound))
        .map(|(n, m)| format!("N={n}: {m:.4}"))
        .collect();
    out.push(Verdict::check(
        "median-upper-bound",
        high.is_empty(),
        if high.is_empty() {
            format!("every per-N median below log 2 + {UPPER_SLACK}")
        } else {
            format!("medians at or above the bound: {}", high.join(", "))
        },
    ));

    let fname = format!("bracket-fraction-n{BRACKET_SIZE}");
    let mname = format!("bracket-median-n{BRACKET_SIZE}");
    match ratios.get(&BRACKET_SIZE) {
        Some(v) => {
            let inside = v.iter().filter(|&&x| in_open(x, LLN_BRACKET)).count();
            let frac = fraction(inside, v.len());
            out.push(Verdict::check(
                &fname,
                frac >= BRACKET_FRACTION,
                format!("{inside} of {} ratios in {LLN_BRACKET:?} (fraction {frac:.3})", v.len()),
            ));
            let med = median(v);
            out.push(Verdict::check(&mname, in_open(med, LLN_BRACKET), format!("median {med:.4}")));
        }
        None => {
            for name in [&fname, &mname] {
                out.push(Verdict::with(name, Status::Skipped, format!("N = {BRACKET_SIZE} not in n_values")));
            }
        }
    }

    let medians: Vec<(u64, f64)> = ratios.iter().filter(|(&n, _)| n >= 1_000).map(|(&n, v)| (n, median(v))).collect();
    let listing = medians.iter().map(|(n, m)| format!("N={n}: {m:.4}")).collect::<Vec<_>>().join(", ");
    out.push(match (medians.first(), medians.last()) {
        (Some(first), Some(last)) if medians.len() >= 2 => Verdict::check(
            "median-trend",
            last.1 >= first.1 - TREND_SLACK,
            format!("medians {listing}; last >= first - {TREND_SLACK} required"),
        ),
        _ => Verdict::with("median-trend", Status::Skipped, "needs two sizes N >= 1000"),
    });
    out
}

pub(crate) fn imag_verdicts(_config: &ExperimentConfig, rows: &[ScanRow]) -> Vec<Verdict> {
    let over = rows.iter().filter(|r| r.max > FRAC_PI_2 * r.cycles as f64 + 1e-9).count();
    let mut out = vec![Verdict::check(
        "upper-bound",
        over == 0,
        format!("{over} of {} replicas exceed (pi/2) * #cycles", rows.len()),
    )];
    let short =
        rows.iter().filter(|r| r.witness.is_none_or(|w| w < FRAC_PI_2 * (r.cycles as f64 - 1.0) - 1e-9)).count();
    out.push(Verdict::check(
        "witness-identity",
        short == 0,
        format!("{short} of {} witnesses fall below (pi/2)(#cycles - 1)", rows.len()),
    ));

    let ratios = ratios_by_n(rows);
    if let Some(&n) = ratios.keys().next_back() {
        let cell: Vec<&ScanRow> = rows.iter().filter(|r| r.n == n).collect();
        let target = FRAC_PI_2 * ((n as f64).ln() - 2.0);
        let hit = cell.iter().filter(|r| r.witness.is_some_and(|w| w >= target)).count();
        out.push(Verdict::with(
            "witness-log-bound",
            Status::Info,
            format!(
                "at N={n}, {hit} of {} witnesses reach (pi/2)(log N - 2) (fraction {:.3})",
                cell.len(),
                fraction(hit, cell.len())
            ),
        ));
    }
    let name = format!("bracket-median-n{BRACKET_SIZE}");
    out.push(match ratios.get(&BRACKET_SIZE) {
        Some(v) => {
            let med = median(v);
            Verdict::check(
                &name,
                in_open(med, IMAG_BRACKET),
                format!("median {med:.4}, bracket ({:.4}, {:.4})", IMAG_BRACKET.0, IMAG_BRACKET.1),
            )
        }
        None => Verdict::with(&name, Status::Skipped, format!("N = {BRACKET_SIZE} not in n_values")),
    });
    out
}

fn scan_report(config: &ExperimentConfig, kind: FieldKind) -> Result<ExperimentReport> {
    let rows = scan_rows(config, kind)?;
    let mut report = ExperimentReport::new(config, &rows).with_columns(&SCAN_COLUMNS);
    report.cells = scan_cells(config, &rows);
    let ratios = ratios_by_n(&rows);
    if let Some((&n, v)) = ratios.iter().next_back() {
        // Observed band at the largest size, recorded rather than assumed.
        let s = Summary::of(v);
        report.metric("largest_n", n as f64);
        report.metric("observed_q05", s.q05);
        report.metric("observed_median", s.median);
        report.metric("observed_q95", s.q95);
    }
    let (verdicts, title) = match kind {
        FieldKind::Real => {
            report.metric("x_crit", solve_xcrit().x_crit);
            (lln_verdicts(config, &rows), "real field")
        }
        FieldKind::Imaginary => (imag_verdicts(config, &rows), "imaginary field"),
    };
    report.verdicts = verdicts;
    report.series.push(median_series(&rows, title));
    Ok(report)
}

/// Maximum of the real field over `T_{mesh_factor N, theta}` for each `N`.
pub fn run_lln_scan(config: &ExperimentConfig) -> Result<ExperimentReport> {
    scan_report(config, FieldKind::Real)
}

/// Same permutations as [`run_lln_scan`], imaginary field.
pub fn run_imag_scan(config: &ExperimentConfig) -> Result<ExperimentReport> {
    scan_report(config, FieldKind::Imaginary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CltRow {
    pub n: u64,
    pub replica: u64,
    #[serde(with = "ext_float")]
    pub value: f64,
    #[serde(with = "ext_float")]
    pub normalized: f64,
}

/// A rational `t`, or a float within `1e-12` of a fraction with
/// denominator at most 1000.
fn looks_rational(t: TorusPoint) -> bool {
    t.is_exact() || classify(t, 1000, 1e-12).map(|c| c.is_major()).unwrap_or(false)
}

pub(crate) fn clt_verdicts(config: &ExperimentConfig, rows: &[CltRow]) -> Vec<Verdict> {
    let mut out = Vec::new();
    if looks_rational(config.t) {
        out.push(Verdict::with(
            "finite-type",
            Status::Warning,
            format!("t = {} is rational; the CLT hypothesis fails and assertions are skipped", config.t),
        ));
        return out;
    }
    for &n in &config.n_values {
        let cell: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.normalized).collect();
        let finite: Vec<f64> = cell.iter().copied().filter(|x| x.is_finite()).collect();
        if n < 3 || finite.len() < 2 {
            out.push(Verdict::with(&format!("variance-n{n}"), Status::Skipped, "degenerate cell"));
            continue;
        }
        let var = variance(&finite);
        out.push(Verdict::check(
            &format!("variance-n{n}"),
            var >= CLT_VARIANCE.0 && var <= CLT_VARIANCE.1,
            format!("sample variance {var:.4}, required in {CLT_VARIANCE:?}"),
        ));
        let ks = ks_standard_normal(&finite);
        out.push(Verdict::check(
            &format!("ks-n{n}"),
            ks < CLT_KS && finite.len() == cell.len(),
            format!("KS distance {ks:.4} over {} finite values, required < {CLT_KS}", finite.len()),
        ));
        if let Some(centered) = centered_ks(config, n, &finite) {
            out.push(Verdict::with(
                &format!("ks-centered-n{n}"),
                Status::Info,
                format!("KS distance {:.4} after subtracting the exact finite-N mean {:.4}", centered.1, centered.0),
            ));
        }
    }
    out
}

/// Normalized exact mean `E X_N(t) / scale` and the KS distance of the
/// recentered sample.
fn centered_ks(config: &ExperimentConfig, n: u64, normalized: &[f64]) -> Option<(f64, f64)> {
    let scale = (PI * PI / 12.0 * (n as f64).ln()).sqrt();
    let mean = expected_value(config.t, n, config.kind).ok()?.finite()? / scale;
    let shifted: Vec<f64> = normalized.iter().map(|x| x - mean).collect();
    Some((mean, ks_standard_normal(&shifted)))
}

/// Replicas of `X_N(t) / sqrt((pi^2/12) log N)` (or the imaginary part).
pub fn run_clt_check(config: &ExperimentConfig, t: TorusPoint) -> Result<ExperimentReport> {
    let mut config = config.clone();
    config.t = t;
    let mut rows = Vec::new();
    for &n in &config.n_values {
        check_size(n)?;
        let scale = (PI * PI / 12.0 * (n as f64).ln()).sqrt();
        let cell = par_replicas(config.replicas, |r| {
            let mut rng = config.stream("clt", n, r);
            let perm = sample_cycle_structure(n, &mut rng)?;
            let value = eval_point(&FieldSpec::new(&perm, config.kind), t)?.to_f64();
            Ok(CltRow { n, replica: r, value, normalized: value / scale })
        })?;
        rows.extend(cell);
    }
    let mut report = ExperimentReport::new(&config, &rows).with_columns(&["n", "replica", "value", "normalized"]);
    for &n in &config.n_values {
        let cell: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.normalized).collect();
        let (stats, dropped) = finite_summary(&cell);
        report.cells.push(CellStats {
            label: format!("normalized field at N={n}"),
            n: Some(n),
            note: (dropped > 0).then(|| format!("degenerate: {dropped} replicas are -inf")),
            stats,
        });
        let finite: Vec<f64> = cell.into_iter().filter(|x| x.is_finite()).collect();
        if finite.len() >= 2 {
            report.metric(&format!("variance_n{n}"), variance(&finite));
            report.metric(&format!("ks_n{n}"), ks_standard_normal(&finite));
            if let Some((mean, ks)) = centered_ks(&config, n, &finite) {
                report.metric(&format!("normalized_mean_n{n}"), mean);
                report.metric(&format!("ks_centered_n{n}"), ks);
            }
        }
        report.series.push(Series {
            name: format!("normalized field, N={n}"),
            kind: SeriesKind::Histogram,
            x_label: "X_N(t) / sqrt((pi^2/12) log N)".into(),
            y_label: "count".into(),
            points: histogram(&finite, -4.0, 4.0, 40),
            markers: vec![],
        });
    }
    report.verdicts = clt_verdicts(&config, &rows);
    Ok(report)
}

pub(crate) fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<[f64; 2]> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in values {
        if x >= lo && x < hi {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    counts.iter().enumerate().map(|(i, &c)| [lo + (i as f64 + 0.5) * width, c as f64]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ArcRow {
    pub n: u64,
    pub replica: u64,
    pub cycles: u64,
    #[serde(with = "ext_float")]
    pub major_sup: f64,
    #[serde(with = "ext_float")]
    pub minor_sup: f64,
    #[serde(with = "ext_float")]
    pub at_zero: f64,
}

fn arc_kappa(config: &ExperimentConfig, n: u64) -> f64 {
    config.kappa.unwrap_or_else(|| (n as f64).powf(-config.alpha))
}

pub(crate) fn arc_verdicts(config: &ExperimentConfig, rows: &[ArcRow]) -> Vec<Verdict> {
    let mut out = Vec::new();
    for &n in &config.n_values {
        let cell: Vec<&ArcRow> = rows.iter().filter(|r| r.n == n).collect();
        let kappa = arc_kappa(config, n);
        let major_ok = cell.iter().filter(|r| r.major_sup <= 0.0).count();
        let frac = fraction(major_ok, cell.len());
        out.push(Verdict::check(
            &format!("major-nonpositive-n{n}"),
            frac >= ARC_FRACTION,
            format!(
                "major-arc sup <= 0 in {major_ok} of {} replicas (fraction {frac:.3}); xi0 = {}, kappa = {kappa:.5}",
                cell.len(),
                config.xi0
            ),
        ));
        let minor_ok = cell.iter().filter(|r| r.minor_sup > 0.0).count();
        let frac = fraction(minor_ok, cell.len());
        out.push(Verdict::check(
            &format!("minor-positive-n{n}"),
            frac >= ARC_FRACTION,
            format!("minor-arc sup > 0 in {minor_ok} of {} replicas (fraction {frac:.3})", cell.len()),
        ));
        if n > 1 {
            let ratios: Vec<f64> = cell.iter().map(|r| r.minor_sup / (n as f64).ln()).collect();
            let med = median(&ratios);
            out.push(Verdict::check(
                &format!("minor-median-n{n}"),
                in_open(med, ARC_MINOR_BRACKET),
                format!("median minor sup / log N = {med:.4}, bracket {ARC_MINOR_BRACKET:?}"),
            ));
        }
    }
    let bad = rows.iter().filter(|r| r.cycles > 0 && r.at_zero != f64::NEG_INFINITY).count();
    out.push(Verdict::check("zero-singular", bad == 0, format!("{bad} non-empty fields with Y(0) != -inf")));
    out
}

/// Poisson field `Y_N` over `T_{mesh_factor N, theta}`, split into major arcs
/// `Maj(xi0, kappa)` and the minor complement.
pub fn run_arc_profile(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let (tn, td) = config.theta_parts();
    let mut rows = Vec::new();
    let mut mask_sizes = Vec::new();
    for &n in &config.n_values {
        check_size(n)?;
        let kappa = arc_kappa(config, n);
        if !(kappa > 0.0 && kappa < 0.5) {
            return Err(Error::Config(format!("kappa = {kappa} outside (0, 1/2)")));
        }
        let mesh = Mesh::new(n * config.mesh_factor, tn, td)?;
        let major: Vec<bool> = (0..mesh.q)
            .map(|j| classify(TorusPoint::Exact(mesh.point(j)), config.xi0, kappa).map(|c| c.is_major()))
            .collect::<Result<_>>()?;
        mask_sizes.push((n, major.iter().filter(|&&b| b).count(), mesh.q));
        let cell = par_replicas(config.replicas, |r| {
            let mut rng = config.stream("arc-profile", n, r);
            let z = sample_poisson_counts(n, &mut rng)?;
            let spec = FieldSpec::real(&z);
            let trace = scan_max(&spec, &mesh, true)?.trace.expect("trace requested");
            let (mut major_sup, mut minor_sup) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (v, &is_major) in trace.iter().zip(&major) {
                let v = v.to_f64();
                let slot = if is_major { &mut major_sup } else { &mut minor_sup };
                if v > *slot {
                    *slot = v;
                }
            }
            let at_zero = eval_point(&spec, TorusPoint::Exact(Rational::zero()))?;
            Ok(ArcRow {
                n,
                replica: r,
                cycles: z.total_cycles(),
                major_sup,
                minor_sup,
                at_zero: match at_zero {
                    ExtReal::NegInf => f64::NEG_INFINITY,
                    ExtReal::Finite(x) => x,
                },
            })
        })?;
        rows.extend(cell);
    }
    let mut report = ExperimentReport::new(config, &rows).with_columns(&[
        "n",
        "replica",
        "cycles",
        "major_sup",
        "minor_sup",
        "at_zero",
    ]);
    for (n, count, q) in mask_sizes {
        report.metric(&format!("major_fraction_n{n}"), count as f64 / q as f64);
        report.metric(&format!("kappa_n{n}"), arc_kappa(config, n));
        for (label, pick) in [("major", true), ("minor", false)] {
            let sups: Vec<f64> =
                rows.iter().filter(|r| r.n == n).map(|r| if pick { r.major_sup } else { r.minor_sup }).collect();
            let (stats, dropped) = finite_summary(&sups);
            report.cells.push(CellStats {
                label: format!("{label}-arc sup at N={n}"),
                n: Some(n),
                note: (dropped > 0).then(|| format!("{dropped} replicas are -inf")),
                stats,
            });
            let finite: Vec<f64> = sups.into_iter().filter(|x| x.is_finite()).collect();
            let (lo, hi) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            if lo < hi {
                report.series.push(Series {
                    name: format!("{label}-arc sup, N={n}"),
                    kind: SeriesKind::Histogram,
                    x_label: "sup Y_N".into(),
                    y_label: "count".into(),
                    points: histogram(&finite, lo.floor(), hi.ceil(), 30),
                    markers: vec![(0.0, "0".into())],
                });
            }
        }
    }
    report.verdicts = arc_verdicts(config, &rows);
    Ok(report)
}
