//! Seeded Monte Carlo experiments and their reports.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]: random
//! draws come from streams keyed by `(seed, experiment, cell, replica)` and
//! all reductions run in a fixed order, so reports are byte-identical across
//! reruns and thread counts. Verdicts are derived from the raw rows shipped in
//! the report, and [`ExperimentReport::recheck`] recomputes them.

mod occupancy;
mod scans;
mod tails;

use crate::error::{Error, Result};
use crate::field::FieldKind;
use crate::rng::{self, Stream};
use crate::stats::Summary;
use crate::torus::{TorusPoint, GOLDEN};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use occupancy::{run_occupancy, run_poisson_consistency, OCCUPANCY_C};
pub use scans::{run_arc_profile, run_clt_check, run_imag_scan, run_lln_scan, MAX_SCAN_SIZE};
pub use tails::{run_conditional_tail, run_two_point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Lln,
    Imag,
    Clt,
    ConditionalTail,
    TwoPoint,
    ArcProfile,
    Occupancy,
    PoissonConsistency,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Lln,
        ExperimentKind::Imag,
        ExperimentKind::Clt,
        ExperimentKind::ConditionalTail,
        ExperimentKind::TwoPoint,
        ExperimentKind::ArcProfile,
        ExperimentKind::Occupancy,
        ExperimentKind::PoissonConsistency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Lln => "lln",
            ExperimentKind::Imag => "imag",
            ExperimentKind::Clt => "clt",
            ExperimentKind::ConditionalTail => "conditional-tail",
            ExperimentKind::TwoPoint => "two-point",
            ExperimentKind::ArcProfile => "arc-profile",
            ExperimentKind::Occupancy => "occupancy",
            ExperimentKind::PoissonConsistency => "poisson-consistency",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Parameters of an experiment run. Fields irrelevant to a given experiment
/// are carried along (and echoed) but ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: ExperimentKind,
    /// Permutation sizes, ascending.
    pub n_values: Vec<u64>,
    pub replicas: u64,
    pub seed: u64,
    /// Mesh `T_{q, theta}` uses `q = mesh_factor * N`.
    pub mesh_factor: u64,
    /// Mesh rotation; must be an exact rational.
    pub theta: TorusPoint,
    pub xi0: u64,
    /// Major-arc width `kappa`; `None` means `N^{-alpha}`.
    pub kappa: Option<f64>,
    pub alpha: f64,
    /// Block scale.
    pub rho: f64,
    /// First block index.
    pub m: u64,
    /// Number of blocks in the occupancy window `[m, m + n_blocks)`.
    pub n_blocks: u64,
    /// Number of blocks summed in the tail experiments.
    pub q: u64,
    /// Evaluation point (CLT, conditional tail).
    pub t: TorusPoint,
    pub kind: FieldKind,
    /// Importance samples per estimate.
    pub samples: u64,
    /// Tail level `y`; `None` means `x*`.
    pub y: Option<f64>,
    /// Cutoff `W` of the low-frequency sum `l <= N/W`.
    pub w: u64,
    /// Parallelism hint; never serialized, so it cannot affect the output.
    #[serde(skip_serializing, default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Built-in defaults for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            name: kind,
            n_values: vec![1_000, 10_000, 100_000, 1_000_000],
            replicas: 20,
            seed: 0,
            mesh_factor: 2,
            theta: TorusPoint::rational(1, 7).expect("valid"),
            xi0: 5,
            kappa: None,
            alpha: 0.3,
            rho: 0.05,
            m: 185,
            n_blocks: 2_000,
            q: 32,
            t: TorusPoint::float(GOLDEN),
            kind: FieldKind::Real,
            samples: 1_000_000,
            y: None,
            w: 100,
            threads: None,
        };
        match kind {
            ExperimentKind::Lln | ExperimentKind::Imag => base,
            ExperimentKind::Clt => ExperimentConfig { n_values: vec![1_000_000], replicas: 2_000, ..base },
            ExperimentKind::ConditionalTail => {
                ExperimentConfig { n_values: vec![], replicas: 1, kappa: Some(0.01), ..base }
            }
            ExperimentKind::TwoPoint => {
                ExperimentConfig { n_values: vec![], replicas: 100_000, q: 8, xi0: 10, samples: 100_000, ..base }
            }
            ExperimentKind::ArcProfile => ExperimentConfig { n_values: vec![100_000], replicas: 200, ..base },
            ExperimentKind::Occupancy => {
                ExperimentConfig { n_values: vec![], replicas: 10_000, rho: 0.1, m: 200, n_blocks: 2_000, ..base }
            }
            ExperimentKind::PoissonConsistency => {
                ExperimentConfig { n_values: vec![10_000], replicas: 100_000, ..base }
            }
        }
    }

    /// Defaults for `kind` overlaid with the keys of a JSON object.
    /// Unknown keys and a conflicting `name` are rejected.
    pub fn from_json(kind: ExperimentKind, text: &str) -> Result<Self> {
        let overrides: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        let Value::Object(overrides) = overrides else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let mut merged = match serde_json::to_value(Self::defaults(kind)).expect("config serializes") {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        merged.extend(overrides);
        let config: Self = serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(e.to_string()))?;
        if config.name != kind {
            return Err(Error::Config(format!("config names experiment {} but {kind} was requested", config.name)));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.replicas == 0 {
            return fail("replicas must be at least 1".into());
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return fail("n_values must be strictly ascending".into());
        }
        if self.n_values.contains(&0) {
            return fail("n_values must be positive".into());
        }
        if self.mesh_factor == 0 {
            return fail("mesh_factor must be positive".into());
        }
        if !self.theta.is_exact() {
            return fail(format!("theta must be an exact rational such as 1/7, got {}", self.theta));
        }
        if self.xi0 == 0 {
            return fail("xi0 must be at least 1".into());
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k < 0.5) {
                return fail(format!("kappa must lie in (0, 1/2), got {k}"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.rho > 0.0 && self.rho < 0.5) {
            return fail(format!("rho must lie in (0, 1/2), got {}", self.rho));
        }
        if self.q == 0 || self.n_blocks == 0 || self.samples == 0 {
            return fail("q, n_blocks and samples must be positive".into());
        }
        if self.w < 2 {
            return fail("w must be at least 2".into());
        }
        if let Some(y) = self.y {
            if !y.is_finite() {
                return fail("y must be finite".into());
            }
        }
        let needs_sizes = matches!(
            self.name,
            ExperimentKind::Lln
                | ExperimentKind::Imag
                | ExperimentKind::Clt
                | ExperimentKind::ArcProfile
                | ExperimentKind::PoissonConsistency
        );
        if needs_sizes && self.n_values.is_empty() {
            return fail(format!("{} needs at least one entry in n_values", self.name));
        }
        Ok(())
    }

    /// `(theta_num, theta_den)` of the mesh rotation.
    pub(crate) fn theta_parts(&self) -> (i64, u64) {
        match self.theta {
            TorusPoint::Exact(r) => (r.num() as i64, r.den() as u64),
            TorusPoint::Float(_) => unreachable!("validated config"),
        }
    }

    pub(crate) fn stream(&self, tag: &str, cell: u64, replica: u64) -> Stream {
        rng::stream(self.seed, &[rng::label(tag), cell, replica])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// A precondition of the assertion does not hold; it was not evaluated.
    Warning,
    Skipped,
    /// Reported quantity without a pass/fail threshold.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    pub fn check(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Verdict { name: name.into(), status, detail: detail.into() }
    }

    pub fn with(name: &str, status: Status, detail: impl Into<String>) -> Self {
        Verdict { name: name.into(), status, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub software: String,
    pub version: String,
}

impl Provenance {
    fn of(config: &ExperimentConfig) -> Self {
        Provenance {
            seed: config.seed,
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// Statistics of one cell (e.g. one permutation size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub label: String,
    pub n: Option<u64>,
    /// Reason the cell has no statistics, or a flag on degenerate values.
    pub note: Option<String>,
    pub stats: Option<Summary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Line,
    Histogram,
}

/// Data for one plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub kind: SeriesKind,
    pub x_label: String,
    pub y_label: String,
    /// `(x, y)`; for histograms `x` is the bin centre and `y` the count.
    pub points: Vec<[f64; 2]>,
    /// Vertical reference lines `(x, label)`.
    #[serde(default)]
    pub markers: Vec<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub cells: Vec<CellStats>,
    /// Column order of `rows`.
    pub columns: Vec<String>,
    /// Raw rows as JSON objects; non-finite floats are the strings
    /// `"-inf"`, `"inf"` and `"nan"`.
    pub rows: Vec<Value>,
    pub metrics: BTreeMap<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub series: Vec<Series>,
}

/// Top-level keys every serialized report carries.
pub const REPORT_KEYS: [&str; 9] =
    ["experiment", "config", "provenance", "cells", "columns", "rows", "metrics", "verdicts", "series"];

impl ExperimentReport {
    /// No verdict failed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.status != Status::Fail)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn file_stem(&self) -> String {
        format!("{}-{}", self.experiment, self.config.seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| Error::Parse("report must be a JSON object".into()))?;
        for key in REPORT_KEYS {
            if !obj.contains_key(key) {
                return Err(Error::Parse(format!("report lacks key {key:?}")));
            }
        }
        serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Raw rows as CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = self
                .columns
                .iter()
                .map(|c| match row.get(c) {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Write `<name>-<seed>.json` and `.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let io = |e: std::io::Error| Error::Config(format!("cannot write report to {}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let stem = self.file_stem();
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&json, self.to_json()).map_err(io)?;
        std::fs::write(&csv, self.to_csv()).map_err(io)?;
        Ok(vec![json, csv])
    }

    /// Recompute the verdicts from the shipped config and rows.
    pub fn recheck(&self) -> Result<Vec<Verdict>> {
        let c = &self.config;
        Ok(match self.experiment {
            ExperimentKind::Lln => scans::lln_verdicts(c, &parse_rows(&self.rows)?),
            ExperimentKind::Imag => scans::imag_verdicts(c, &parse_rows(&self.rows)?),
            ExperimentKind::Clt => scans::clt_verdicts(c, &parse_rows(&self.rows)?),
            ExperimentKind::ArcProfile => scans::arc_verdicts(c, &parse_rows(&self.rows)?),
            ExperimentKind::ConditionalTail => tails::conditional_verdicts(c, &parse_rows(&self.rows)?)?,
            ExperimentKind::TwoPoint => tails::two_point_verdicts(c, &parse_rows(&self.rows)?),
            ExperimentKind::Occupancy => occupancy::occupancy_verdicts(c, &parse_rows(&self.rows)?),
            ExperimentKind::PoissonConsistency => occupancy::consistency_verdicts(c, &parse_rows(&self.rows)?),
        })
    }

    fn new<R: Serialize>(config: &ExperimentConfig, rows: &[R]) -> Self {
        let rows: Vec<Value> = rows.iter().map(|r| serde_json::to_value(r).expect("row serializes")).collect();
        ExperimentReport {
            experiment: config.name,
            config: config.clone(),
            provenance: Provenance::of(config),
            cells: vec![],
            columns: vec![],
            rows,
            metrics: BTreeMap::new(),
            verdicts: vec![],
            series: vec![],
        }
    }

    fn with_columns(mut self, columns: &[&str]) -> Self {
        self.columns = columns.iter().map(|c| c.to_string()).collect();
        self
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.into(), float_value(value));
    }
}

/// Dispatch on `config.name`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    match config.name {
        ExperimentKind::Lln => run_lln_scan(config),
        ExperimentKind::Imag => run_imag_scan(config),
        ExperimentKind::Clt => run_clt_check(config, config.t),
        ExperimentKind::ConditionalTail => run_conditional_tail(config),
        ExperimentKind::TwoPoint => run_two_point(config),
        ExperimentKind::ArcProfile => run_arc_profile(config),
        ExperimentKind::Occupancy => run_occupancy(config),
        ExperimentKind::PoissonConsistency => run_poisson_consistency(config),
    }
}

fn parse_rows<R: DeserializeOwned>(rows: &[Value]) -> Result<Vec<R>> {
    rows.iter()
        .map(|r| serde_json::from_value(r.clone()).map_err(|e| Error::Parse(format!("bad report row: {e}"))))
        .collect()
}

/// JSON number, or a string for non-finite values.
pub fn float_value(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(non_finite_name(x).into()))
}

fn non_finite_name(x: f64) -> &'static str {
    if x.is_nan() {
        "nan"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

/// Serde adapter for floats that may be infinite.
pub(crate) mod ext_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(super::non_finite_name(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(x),
            Raw::Text(s) => match s.as_str() {
                "-inf" => Ok(f64::NEG_INFINITY),
                "inf" => Ok(f64::INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a float: {other:?}"))),
            },
        }
    }
}

/// Run `f` for every replica index in parallel, keeping index order.
pub(crate) fn par_replicas<T, F>(replicas: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..replicas).into_par_iter().map(f).collect()
}

/// Summary of the finite entries and the number of non-finite ones.
pub(crate) fn finite_summary(values: &[f64]) -> (Option<Summary>, usize) {
    let finite: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let dropped = values.len() - finite.len();
    ((!finite.is_empty()).then(|| Summary::of(&finite)), dropped)
}

pub(crate) fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        f64::NAN
    } else {
        hits as f64 / total as f64
    }
}
