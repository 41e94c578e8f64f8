//! Command-line front end for the `permfield` library.
//!
//! [`run`] parses arguments, sets up the thread pool and dispatches; it
//! returns the process exit code: 0 on success, 1 when a built-in assertion
//! fails (reports are still written), 2 on usage or configuration errors.

pub mod plot;

use clap::{Args, Parser, Subcommand};
use permfield::arith::classify;
use permfield::cycles::{sample_cycle_structure, CycleCounts};
use permfield::experiments::{self, ExperimentConfig, ExperimentKind, ExperimentReport, Series, SeriesKind, Status};
use permfield::field::{eval_point, scan_max, trace_csv, FieldKind, FieldSpec, Mesh};
use permfield::kronecker::phi_hat;
use permfield::ratefn::{lambda_derivs, rate_table, solve_xcrit};
use permfield::rng::stream;
use permfield::{Complex64, CycleStructure, Error, Result, TorusPoint};
use serde::Serialize;
use serde_json::{json, Value};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub use plot::emit_plot;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "PERMFIELD_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "permfield",
    version,
    about = "Random permutation fields: sampling, scans, rate function, experiments"
)]
struct Cli {
    /// Worker threads (default: PERMFIELD_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ReportArg {
    /// Write a JSON report of the resolved inputs and results.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical constants x* and beta*.
    Constants {
        #[command(flatten)]
        out: ReportArg,
    },
    /// Table of the Legendre transform lambda*(x) and its maximizer.
    RatefnTable {
        #[arg(long, default_value_t = 0.05)]
        x_min: f64,
        #[arg(long, default_value_t = 0.69)]
        x_max: f64,
        #[arg(long, default_value_t = 65)]
        steps: usize,
        /// Write an SVG plot of lambda*(x).
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Sample the cycle type of a uniform permutation (CSV on stdout).
    Sample {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Evaluate the field of a cycle type at one point.
    Eval {
        #[arg(long)]
        cycles: PathBuf,
        /// Rational `a/b` (exact) or decimal.
        #[arg(long, allow_hyphen_values = true)]
        t: String,
        #[arg(long)]
        imag: bool,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Maximize the field of a sampled permutation over a rotated mesh.
    Scan {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 2)]
        mesh_factor: u64,
        #[arg(long, default_value = "1/7")]
        theta: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        imag: bool,
        /// Write the field on every mesh point as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write an SVG plot of the trace.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Major/minor arc tools.
    Arcs {
        #[command(subcommand)]
        command: ArcsCommand,
    },
    /// Fourier coefficients of |1 - e(t)|^z.
    Fourier {
        #[command(subcommand)]
        command: FourierCommand,
    },
    /// Run a seeded experiment and write `<name>-<seed>.{json,csv,svg}`.
    Experiment {
        /// One of lln, imag, clt, conditional-tail, two-point, arc-profile,
        /// occupancy, poisson-consistency.
        name: String,
        /// JSON object overriding the experiment's defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        no_plot: bool,
    },
}

#[derive(Debug, Subcommand)]
enum ArcsCommand {
    /// Classify the torus points listed in a CSV (first column).
    Classify {
        #[arg(long)]
        xi0: u64,
        #[arg(long)]
        kappa: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        out: ReportArg,
    },
}

#[derive(Debug, Subcommand)]
enum FourierCommand {
    /// CSV `xi,re,im,abs` for `z = beta + i tau`, `0 <= xi <= xi_max`.
    Dump {
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        #[arg(long)]
        xi_max: u64,
        #[command(flatten)]
        out: ReportArg,
    },
}

/// JSON report written by the non-experiment subcommands.
#[derive(Debug, Serialize)]
struct CommandReport {
    command: &'static str,
    config: Value,
    provenance: Value,
    results: Value,
}

/// Outcome of a subcommand: text for stdout and whether assertions held.
struct Outcome {
    stdout: String,
    passed: bool,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, passed: true }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn emit_report(path: &Option<PathBuf>, command: &'static str, config: Value, results: Value) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let report = CommandReport {
        command,
        config,
        provenance: json!({ "software": "permfield", "version": env!("CARGO_PKG_VERSION") }),
        results,
    };
    write_file(path, &(serde_json::to_string_pretty(&report).expect("serializes") + "\n"))
}

fn num(x: f64) -> Value {
    experiments::float_value(x)
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) if !s.trim().is_empty() => {
                Some(s.trim().parse().map_err(|_| usage(format!("{THREADS_ENV}={s:?} is not a thread count")))?)
            }
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(usage("thread count must be positive"));
    }
    Ok(n)
}

/// Run the CLI on `argv` (including the program name) and return the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve_threads(cli.threads).and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(|e| usage(format!("cannot build thread pool: {e}")))?;
        pool.install(|| dispatch(cli.command, threads))
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            if outcome.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: Command, threads: Option<usize>) -> Result<Outcome> {
    match command {
        Command::Constants { out } => constants(&out.report),
        Command::RatefnTable { x_min, x_max, steps, plot, out } => ratefn_table(x_min, x_max, steps, plot, &out.report),
        Command::Sample { n, seed, out, report } => sample(n, seed, out, &report.report),
        Command::Eval { cycles, t, imag, out } => eval(&cycles, &t, imag, &out.report),
        Command::Scan { n, mesh_factor, theta, seed, imag, trace, plot, out } => {
            scan(ScanArgs { n, mesh_factor, theta, seed, imag, trace, plot }, &out.report)
        }
        Command::Arcs { command: ArcsCommand::Classify { xi0, kappa, input, out } } => {
            arcs_classify(xi0, kappa, &input, &out.report)
        }
        Command::Fourier { command: FourierCommand::Dump { beta, tau, xi_max, out } } => {
            fourier_dump(beta, tau, xi_max, &out.report)
        }
        Command::Experiment { name, config, seed, out_dir, no_plot } => {
            experiment(&name, config, seed, &out_dir, no_plot, threads)
        }
    }
}

fn constants(report: &Option<PathBuf>) -> Result<Outcome> {
    let sol = solve_xcrit();
    let ok = (sol.rate_at - 1.0).abs() <= 1e-10;
    let stdout = format!(
        "x* = {:.10}\nbeta* = {:.10}\nlambda*(x*) = {:.15}\nlambda(beta*) = {:.10}\nlambda''(beta*) = {:.10}\n",
        sol.x_crit, sol.beta_crit, sol.rate_at, sol.lambda_at, sol.lambda2_at
    );
    emit_report(
        report,
        "constants",
        json!({}),
        json!({
            "x_crit": num(sol.x_crit),
            "beta_crit": num(sol.beta_crit),
            "lambda_star_at_x_crit": num(sol.rate_at),
            "lambda_at_beta_crit": num(sol.lambda_at),
            "lambda2_at_beta_crit": num(sol.lambda2_at),
            "residual": num(sol.residual),
        }),
    )?;
    Ok(Outcome { stdout, passed: ok })
}

fn ratefn_table(
    x_min: f64,
    x_max: f64,
    steps: usize,
    plot: Option<PathBuf>,
    report: &Option<PathBuf>,
) -> Result<Outcome> {
    let rows = rate_table(x_min, x_max, steps)?;
    let mut stdout = String::from("x,lambda_star,beta_star,lambda2\n");
    let mut json_rows = Vec::new();
    for &(x, rate, beta) in &rows {
        let (_, d2) = lambda_derivs(beta)?;
        stdout.push_str(&format!("{x},{rate},{beta},{d2}\n"));
        json_rows.push(json!({ "x": num(x), "lambda_star": num(rate), "beta_star": num(beta), "lambda2": num(d2) }));
    }
    if let Some(path) = plot {
        let series = Series {
            name: "lambda*(x)".into(),
            kind: SeriesKind::Line,
            x_label: "x".into(),
            y_label: "lambda*(x)".into(),
            points: rows.iter().map(|&(x, r, _)| [x, r]).collect(),
            markers: vec![(std::f64::consts::LN_2, "log 2: lambda* diverges".into())],
        };
        write_file(&path, &emit_plot(&[series], SeriesKind::Line)?)?;
    }
    emit_report(
        report,
        "ratefn-table",
        json!({ "x_min": x_min, "x_max": x_max, "steps": steps }),
        json!({ "rows": json_rows }),
    )?;
    Ok(Outcome::ok(stdout))
}

fn sample(n: u64, seed: u64, out: Option<PathBuf>, report: &Option<PathBuf>) -> Result<Outcome> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let mut rng = stream(seed, &[permfield::rng::label("sample"), n]);
    let perm = sample_cycle_structure(n, &mut rng)?;
    let csv = perm.to_csv();
    emit_report(
        report,
        "sample",
        json!({ "n": n, "seed": seed }),
        json!({ "cycles": perm.total_cycles(), "distinct_lengths": perm.distinct_lengths(), "csv": csv }),
    )?;
    match out {
        Some(path) => {
            write_file(&path, &csv)?;
            Ok(Outcome::ok(String::new()))
        }
        None => Ok(Outcome::ok(csv)),
    }
}

fn parse_point(s: &str, what: &str) -> Result<TorusPoint> {
    s.parse().map_err(|e: Error| usage(format!("--{what}: {e}")))
}

fn eval(cycles: &Path, t: &str, imag: bool, report: &Option<PathBuf>) -> Result<Outcome> {
    let perm = CycleStructure::from_csv(&read_file(cycles)?)?;
    let t = parse_point(t, "t")?;
    let kind = if imag { FieldKind::Imaginary } else { FieldKind::Real };
    let value = eval_point(&FieldSpec::new(&perm, kind), t)?;
    emit_report(
        report,
        "eval",
        json!({ "cycles": cycles.display().to_string(), "t": t.to_string(), "kind": kind }),
        json!({ "value": num(value.to_f64()) }),
    )?;
    Ok(Outcome::ok(format!("{value}\n")))
}

struct ScanArgs {
    n: u64,
    mesh_factor: u64,
    theta: String,
    seed: u64,
    imag: bool,
    trace: Option<PathBuf>,
    plot: Option<PathBuf>,
}

fn scan(a: ScanArgs, report: &Option<PathBuf>) -> Result<Outcome> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if a.mesh_factor == 0 {
        return Err(usage("--mesh-factor must be at least 1"));
    }
    let theta = match parse_point(&a.theta, "theta")? {
        TorusPoint::Exact(r) => r,
        TorusPoint::Float(_) => return Err(usage("--theta must be a rational a/b")),
    };
    let q = a.n.checked_mul(a.mesh_factor).ok_or_else(|| usage("mesh size overflows"))?;
    let mesh = Mesh::new(q, theta.num() as i64, theta.den() as u64)?;
    let mut rng = stream(a.seed, &[permfield::rng::label("sample"), a.n]);
    let perm = sample_cycle_structure(a.n, &mut rng)?;
    let kind = if a.imag { FieldKind::Imaginary } else { FieldKind::Real };
    let keep = a.trace.is_some() || a.plot.is_some();
    let res = scan_max(&FieldSpec::new(&perm, kind), &mesh, keep)?;
    let t = mesh.point(res.argmax);
    if let Some(trace) = &res.trace {
        if let Some(path) = &a.trace {
            write_file(path, &trace_csv(&mesh, trace))?;
        }
        if let Some(path) = &a.plot {
            let series = Series {
                name: format!("{kind:?} field, N={}", a.n).to_lowercase(),
                kind: SeriesKind::Line,
                x_label: "t".into(),
                y_label: "field".into(),
                points: trace.iter().enumerate().map(|(j, v)| [mesh.point_f64(j as u64), v.to_f64()]).collect(),
                markers: vec![],
            };
            write_file(path, &emit_plot(&[series], SeriesKind::Line)?)?;
        }
    }
    let ratio = if a.n > 1 { res.max.to_f64() / (a.n as f64).ln() } else { f64::NAN };
    emit_report(
        report,
        "scan",
        json!({ "n": a.n, "mesh_factor": a.mesh_factor, "theta": theta.to_string(), "seed": a.seed, "kind": kind }),
        json!({
            "max": num(res.max.to_f64()),
            "argmax": res.argmax,
            "t": t.to_string(),
            "t_float": num(t.to_f64()),
            "ratio": num(ratio),
            "cycles": perm.total_cycles(),
        }),
    )?;
    Ok(Outcome::ok(format!(
        "max = {}\nargmax = {}\nt = {t}\nt_float = {}\nmax/log N = {ratio}\ncycles = {}\n",
        res.max,
        res.argmax,
        t.to_f64(),
        perm.total_cycles()
    )))
}

fn arcs_classify(xi0: u64, kappa: f64, input: &Path, report: &Option<PathBuf>) -> Result<Outcome> {
    let text = read_file(input)?;
    let mut stdout = String::from("t,kind,witness\n");
    let mut rows = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        if field == "t" {
            continue;
        }
        let t = parse_point(field, "in")?;
        let c = classify(t, xi0, kappa)?;
        let kind = if c.is_major() { "major" } else { "minor" };
        let witness = c.witness.map(|w| w.to_string()).unwrap_or_default();
        stdout.push_str(&format!("{t},{kind},{witness}\n"));
        rows.push(json!({ "t": t.to_string(), "kind": kind, "witness": c.witness }));
    }
    emit_report(
        report,
        "arcs-classify",
        json!({ "xi0": xi0, "kappa": kappa, "in": input.display().to_string() }),
        json!({ "rows": rows }),
    )?;
    Ok(Outcome::ok(stdout))
}

fn fourier_dump(beta: f64, tau: f64, xi_max: u64, report: &Option<PathBuf>) -> Result<Outcome> {
    let z = Complex64::new(beta, tau);
    let mut stdout = String::from("xi,re,im,abs\n");
    let mut rows = Vec::new();
    for xi in 0..=xi_max as i64 {
        let row = phi_hat(z, xi)?;
        stdout.push_str(&format!("{xi},{},{},{}\n", row.re, row.im, row.abs()));
        rows.push(json!({ "xi": xi, "re": num(row.re), "im": num(row.im), "abs": num(row.abs()), "quad_error": num(row.quad_error) }));
    }
    emit_report(
        report,
        "fourier-dump",
        json!({ "beta": beta, "tau": tau, "xi_max": xi_max }),
        json!({ "rows": rows }),
    )?;
    Ok(Outcome::ok(stdout))
}

/// The plot of a report: all series sharing the first series' kind.
pub fn report_plot(report: &ExperimentReport) -> Result<Option<String>> {
    let Some(first) = report.series.first() else { return Ok(None) };
    let same: Vec<Series> = report.series.iter().filter(|s| s.kind == first.kind).cloned().collect();
    emit_plot(&same, first.kind).map(Some)
}

fn experiment(
    name: &str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out_dir: &Path,
    no_plot: bool,
    threads: Option<usize>,
) -> Result<Outcome> {
    let kind: ExperimentKind = name.parse()?;
    let mut cfg = match &config {
        Some(path) => ExperimentConfig::from_json(kind, &read_file(path)?)?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.threads = threads;
    let report = experiments::run(&cfg)?;
    let mut paths = report.write(out_dir)?;
    if !no_plot {
        if let Some(svg) = report_plot(&report)? {
            let path = out_dir.join(format!("{}.svg", report.file_stem()));
            write_file(&path, &svg)?;
            paths.push(path);
        }
    }
    let mut stdout = String::new();
    for v in &report.verdicts {
        let tag = match v.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Warning => "WARN",
            Status::Skipped => "SKIP",
            Status::Info => "INFO",
        };
        stdout.push_str(&format!("{tag} {}: {}\n", v.name, v.detail));
    }
    for p in paths {
        stdout.push_str(&format!("wrote {}\n", p.display()));
    }
    Ok(Outcome { stdout, passed: report.passed() })
}
