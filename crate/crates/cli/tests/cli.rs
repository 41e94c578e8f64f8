use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_permfield"));
    c.env_remove("PERMFIELD_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn validator(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(manifest(&format!("schemas/{name}"))).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "schema errors: {errors:?}");
}

#[test]
fn constants_prints_critical_pair() {
    let o = run(&["constants"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let get = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split('=').nth(1).unwrap().trim().parse().unwrap()
    };
    assert!((get("x* ") - 0.6524).abs() < 5e-4);
    assert!((get("beta* ") - 11.746).abs() < 5e-3);
    assert!((get("lambda*(x*)") - 1.0).abs() < 1e-10);
}

#[test]
fn figure_partition_is_singular_at_one_third() {
    let fig = manifest("data/fig1a.csv");
    let o = run(&["eval", "--cycles", fig.to_str().unwrap(), "--t", "1/3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "-inf");
    let o = run(&["eval", "--cycles", fig.to_str().unwrap(), "--t", "1/3", "--imag"]);
    assert!(stdout(&o).trim().parse::<f64>().unwrap().is_finite());
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["scan", "--n", "0"],
        vec!["scan", "--n", "10", "--theta", "0.3"],
        vec!["sample", "--n", "5", "--bogus"],
        vec!["experiment", "nonsense"],
        vec!["--threads", "0", "constants"],
        vec!["fourier", "dump", "--beta", "0.2", "--xi-max", "3"],
        vec!["eval", "--cycles", "/nonexistent.csv", "--t", "1/2"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn sample_is_seed_determined() {
    let a = stdout(&run(&["sample", "--n", "1000000", "--seed", "5"]));
    let b = stdout(&run(&["--threads", "3", "sample", "--n", "1000000", "--seed", "5"]));
    let c = stdout(&run(&["sample", "--n", "1000000", "--seed", "6"]));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with("n,1000000\n"));
}

#[test]
fn fourier_dump_csv() {
    let o = run(&["fourier", "dump", "--beta", "2", "--xi-max", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("xi,re,im,abs"));
    let re: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(re.len(), 5);
    assert!((re[0] - 2.0).abs() < 1e-10);
    assert!((re[1] + 1.0).abs() < 1e-10);
    assert!(re[2..].iter().all(|x| x.abs() < 1e-10));
}

#[test]
fn arcs_classify_appends_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("points.csv");
    std::fs::write(&input, "t\n1/3\n0.6180339887498949\n0.5001\n").unwrap();
    let o = run(&["arcs", "classify", "--xi0", "3", "--kappa", "0.001", "--in", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,kind,witness");
    assert_eq!(lines[1], "1/3,major,3");
    assert!(lines[2].ends_with(",minor,"));
    assert!(lines[3].ends_with(",major,2"));
}

#[test]
fn scan_trace_dips_near_small_rationals() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let plot = dir.path().join("trace.svg");
    let o = run(&[
        "scan",
        "--n",
        "10000",
        "--seed",
        "3",
        "--trace",
        trace.to_str().unwrap(),
        "--plot",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert_eq!(lines.next(), Some("j,t_float,value"));
    let values: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let v = if f[2] == "-inf" { f64::NEG_INFINITY } else { f[2].parse().unwrap() };
            (f[1].parse().unwrap(), v)
        })
        .collect();
    assert_eq!(values.len(), 20_000);
    let mut finite: Vec<f64> = values.iter().map(|p| p.1).filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let median = finite[finite.len() / 2];
    for r in [0.5, 1.0 / 3.0] {
        let dip = values.iter().filter(|p| (p.0 - r).abs() < 2e-3).map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert!(dip < median - 2.0, "near {r}: {dip} vs median {median}");
    }
    let svg = std::fs::read_to_string(&plot).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn subcommand_reports_match_schema() {
    let schema = validator("command-report.schema.json");
    let dir = tempfile::tempdir().unwrap();
    let fig = manifest("data/fig1a.csv");
    let points = dir.path().join("points.csv");
    std::fs::write(&points, "t\n1/3\n0.25\n").unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["constants".into()],
        vec!["ratefn-table".into(), "--steps".into(), "5".into()],
        vec!["sample".into(), "--n".into(), "50".into()],
        vec!["eval".into(), "--cycles".into(), fig.display().to_string(), "--t".into(), "1/3".into()],
        vec!["scan".into(), "--n".into(), "100".into()],
        vec![
            "arcs".into(),
            "classify".into(),
            "--xi0".into(),
            "2".into(),
            "--kappa".into(),
            "0.01".into(),
            "--in".into(),
            points.display().to_string(),
        ],
        vec![
            "fourier".into(),
            "dump".into(),
            "--beta".into(),
            "1.5".into(),
            "--tau".into(),
            "-2".into(),
            "--xi-max".into(),
            "3".into(),
        ],
    ];
    for (i, args) in cases.iter().enumerate() {
        let path = dir.path().join(format!("report-{i}.json"));
        let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
        let p = path.display().to_string();
        full.extend(["--report", p.as_str()]);
        let o = run(&full);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_valid(&schema, &doc);
    }
}

#[test]
fn experiment_reports_match_schema_and_rerun_identically() {
    let schema = validator("experiment-report.schema.json");
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        ("lln", r#"{"n_values": [100, 1000], "replicas": 4}"#),
        ("imag", r#"{"n_values": [100, 1000], "replicas": 4}"#),
        ("clt", r#"{"n_values": [10000], "replicas": 100}"#),
        ("conditional-tail", r#"{"samples": 10000}"#),
        ("two-point", r#"{"replicas": 2000, "samples": 2000}"#),
        ("arc-profile", r#"{"n_values": [1000], "replicas": 5}"#),
        ("occupancy", r#"{"n_blocks": 100, "replicas": 100}"#),
        ("poisson-consistency", r#"{"n_values": [1000], "replicas": 1000}"#),
    ];
    for (name, config) in configs {
        let cfg = dir.path().join(format!("{name}.json"));
        std::fs::write(&cfg, config).unwrap();
        let mut outputs = Vec::new();
        for threads in ["1", "4"] {
            let out = dir.path().join(format!("{name}-t{threads}"));
            let o = run(&[
                "--threads",
                threads,
                "experiment",
                name,
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "9",
                "--out-dir",
                out.to_str().unwrap(),
            ]);
            assert!(matches!(o.status.code(), Some(0) | Some(1)), "{name}: {}", String::from_utf8_lossy(&o.stderr));
            let stem = format!("{name}-9");
            let json = std::fs::read_to_string(out.join(format!("{stem}.json"))).unwrap();
            let csv = std::fs::read_to_string(out.join(format!("{stem}.csv"))).unwrap();
            let svg = std::fs::read(out.join(format!("{stem}.svg"))).ok();
            let doc: Value = serde_json::from_str(&json).unwrap();
            assert_valid(&schema, &doc);
            let failed = doc["verdicts"].as_array().unwrap().iter().any(|v| v["status"] == "fail");
            assert_eq!(o.status.code(), Some(if failed { 1 } else { 0 }), "{name}");
            outputs.push((json, csv, svg));
        }
        assert_eq!(outputs[0], outputs[1], "{name}");
    }
}

#[test]
fn experiment_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"replicas": 3, "unknown_key": 1}"#).unwrap();
    let o = run(&["experiment", "lln", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown_key"));
}
