use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use riviv::cli::{cmd_confset, cmd_sensitivity, cmd_test, execute, Cli, ConfsetArgs, TestArgs};
use riviv::data::write_dataset;
use riviv_core::numerics::RngStream;
use riviv_core::simulation::{generate_baseline, ScenarioConfig};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riviv"))
}

fn synthetic(dir: &Path, name: &str, pi: f64, k: usize, beta: f64, seed: u64) -> PathBuf {
    let cfg = ScenarioConfig {
        pi,
        k,
        beta_true: beta,
        ..ScenarioConfig::default()
    };
    let data = generate_baseline(&cfg, &mut RngStream::new(seed, 0));
    let path = dir.join(name);
    write_dataset(&data, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn zlist(k: usize) -> String {
    (1..=k).map(|j| format!("z{j}")).collect::<Vec<_>>().join(",")
}

fn parse(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("riviv").chain(args.iter().copied())).unwrap()
}

fn test_args(cli: &Cli) -> &TestArgs {
    match &cli.command {
        riviv::cli::Command::Test(a) => a,
        _ => unreachable!(),
    }
}

fn confset_args(cli: &Cli) -> &ConfsetArgs {
    match &cli.command {
        riviv::cli::Command::Confset(a) => a,
        _ => unreachable!(),
    }
}

fn data_flags(csv: &Path, k: usize) -> Vec<String> {
    vec![
        "--csv".into(),
        csv.display().to_string(),
        "--y".into(),
        "y".into(),
        "--x".into(),
        "x".into(),
        "--z".into(),
        zlist(k),
        "--w".into(),
        "w1".into(),
    ]
}

fn run_cli(sub: &str, csv: &Path, k: usize, extra: &[&str]) -> riviv::cli::Outcome {
    let mut args: Vec<String> = vec![sub.into()];
    args.extend(data_flags(csv, k));
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let cli = parse(&refs);
    match &cli.command {
        riviv::cli::Command::Test(a) => cmd_test(a).unwrap(),
        riviv::cli::Command::Confset(a) => cmd_confset(a).unwrap(),
        riviv::cli::Command::Sensitivity(a) => cmd_sensitivity(a).unwrap(),
        riviv::cli::Command::Power(_) => unreachable!(),
    }
}

#[test]
fn null_is_accepted_in_most_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut accepted = 0;
    for seed in 0..100 {
        let csv = synthetic(dir.path(), "d.csv", 1.0, 3, 0.0, seed);
        let o = run_cli("test", &csv, 3, &["--sims", "5000", "--seed", &seed.to_string()]);
        let p = o.report.outputs["p_value"].as_f64().unwrap();
        assert_eq!(o.report.outputs["reject"].as_bool().unwrap(), p <= 0.05);
        accepted += usize::from(p > 0.05);
    }
    assert!((88..=100).contains(&accepted), "{accepted} of 100 accepted");
}

#[test]
fn distant_null_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic(dir.path(), "d.csv", 1.0, 3, 0.0, 1);
    for test in ["rar", "rk", "rw", "rclr"] {
        let o = run_cli("test", &csv, 3, &["--beta0", "3", "--test", test, "--sims", "5000"]);
        assert!(o.report.outputs["reject"].as_bool().unwrap(), "{test}");
        // W measures instrument strength and does not grow with the distance to β₀
        if test != "rw" {
            let s = o.report.outputs["statistic"].as_f64().unwrap();
            assert!(s > 10.0 * o.report.outputs["critical_value"].as_f64().unwrap(), "{test}");
        }
    }
}

#[test]
fn single_instrument_reports_coincide() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic(dir.path(), "d.csv", 0.3, 1, 0.0, 2);
    for b0 in ["-0.5", "0", "0.4"] {
        let a = run_cli("test", &csv, 1, &["--test", "rar", "--beta0", b0]).report.outputs;
        let c = run_cli("test", &csv, 1, &["--test", "rclr", "--beta0", b0]).report.outputs;
        let (sa, sc) = (a["statistic"].as_f64().unwrap(), c["statistic"].as_f64().unwrap());
        assert!((sa - sc).abs() <= 1e-10 * sa.max(1.0));
        for key in ["critical_value", "p_value", "reject"] {
            assert_eq!(a[key], c[key], "{key}");
        }
    }
}

#[test]
fn strong_data_gives_a_bounded_interval() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic(dir.path(), "d.csv", 1.0, 3, 0.5, 3);
    for test in ["rar", "rclr"] {
        let o = run_cli("confset", &csv, 3, &["--test", test, "--sims", "10000"]);
        let out = &o.report.outputs;
        assert_eq!(out["bounded"], Value::Bool(true));
        assert_eq!(out["intervals"].as_array().unwrap().len(), 1);
        let iv = &out["intervals"][0];
        let (lo, hi) = (iv["lower"].as_f64().unwrap(), iv["upper"].as_f64().unwrap());
        assert!(lo < 0.5 && 0.5 < hi, "{}", out["set"]);
        assert!(o.text.contains(&format!("[{lo:.4}, {hi:.4}]")), "{}", o.text);
    }
}

#[test]
fn weak_data_prints_unbounded_sets() {
    let dir = tempfile::tempdir().unwrap();
    let unbounded = (0..10)
        .filter(|&seed| {
            let csv = synthetic(dir.path(), "w.csv", 0.01, 3, 0.0, seed);
            let o = run_cli("confset", &csv, 3, &["--test", "rar"]);
            let unb = !o.report.outputs["bounded"].as_bool().unwrap();
            if unb && !o.report.outputs["empty"].as_bool().unwrap() {
                assert!(o.text.contains("inf"), "{}", o.text);
                let json = o.report.to_json();
                assert!(json.contains("\"inf\"") || json.contains("\"-inf\""));
            }
            unb
        })
        .count();
    assert!(unbounded >= 5, "{unbounded}");
}

#[test]
fn lower_confidence_gives_nested_sets() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic(dir.path(), "d.csv", 0.2, 3, 0.0, 4);
    for test in ["rar", "rclr"] {
        let wide = run_cli("confset", &csv, 3, &["--test", test, "--grid=-10:10:201", "--points"]);
        let narrow = run_cli("confset", &csv, 3, &["--test", test, "--grid=-10:10:201", "--points", "--alpha", "0.32"]);
        let (a, b) = (&wide.report.outputs["points"], &narrow.report.outputs["points"]);
        for (p, q) in a.as_array().unwrap().iter().zip(b.as_array().unwrap()) {
            assert!(!p["reject"].as_bool().unwrap() || q["reject"].as_bool().unwrap());
        }
    }
}

#[test]
fn sensitivity_table_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic(dir.path(), "d.csv", 1.0, 3, 0.0, 5);
    let o = run_cli("sensitivity", &csv, 3, &["--magnitudes", "0,100,1000,10000", "--fractions", "0,0.01"]);
    let rows = o.report.outputs["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let get = |f: f64, m: f64, col: &str| {
        rows.iter()
            .find(|r| r["fraction"].as_f64() == Some(f) && r["magnitude"].as_f64() == Some(m))
            .unwrap()[col]
            .as_f64()
            .unwrap()
    };
    for m in [0.0, 100.0, 1e4] {
        assert_eq!(get(0.0, m, "ls"), 0.0);
        assert_eq!(get(0.0, m, "mallows"), 0.0);
    }
    assert!(get(0.01, 0.0, "ls") < 1e-8);
    assert!((get(0.01, 1e4, "ls") / get(0.01, 100.0, "ls") - 100.0).abs() < 1.0);
    let (a, b) = (get(0.01, 100.0, "mallows"), get(0.01, 1e4, "mallows"));
    assert!((a - b).abs() < 0.05 * a, "{a} {b}");
}

#[test]
fn reports_rerun_from_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic(dir.path(), "d.csv", 0.5, 3, 0.0, 6);
    let first = run_cli("test", &csv, 3, &["--sims", "3000", "--seed", "17"]);
    let echoed: TestArgs = serde_json::from_value(first.report.inputs.clone()).unwrap();
    let again = cmd_test(&echoed).unwrap();
    assert_eq!(again.report.outputs, first.report.outputs);
    assert_eq!(first.report.seed, 17);

    let cs = run_cli("confset", &csv, 3, &["--sims", "3000"]);
    let echoed: ConfsetArgs = serde_json::from_value(cs.report.inputs.clone()).unwrap();
    assert_eq!(cmd_confset(&echoed).unwrap().report.outputs, cs.report.outputs);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic(dir.path(), "d.csv", 0.3, 3, 0.0, 7);
    let mut outs = Vec::new();
    for t in ["1", "3"] {
        let mut args = vec!["--threads".to_string(), t.into(), "confset".into()];
        args.extend(data_flags(&csv, 3));
        args.extend(["--sims".into(), "4000".into()]);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = execute(&parse(&refs)).unwrap();
        assert_eq!(o.report.timing.threads, t.parse::<usize>().unwrap());
        outs.push(o.report.outputs);
    }
    assert_eq!(outs[0], outs[1]);
    let cli = parse(&["confset", "--csv", "a.csv", "--y", "y", "--x", "x", "--z", "z1"]);
    assert_eq!(confset_args(&cli).inference.sims, riviv_core::ivtests::DEFAULT_SIMS);
    let cli = parse(&["test", "--csv", "a.csv", "--y", "y", "--x", "x", "--z", "z1", "--beta0", "-2"]);
    assert_eq!(test_args(&cli).beta0, -2.0);
}

const GOLDEN: &str = "tests/golden/power_small.csv";

fn power_small(dir: &Path, threads: &str) -> (std::process::Output, PathBuf) {
    let curve = dir.join(format!("p{threads}.csv"));
    let out = bin()
        .args(["--threads", threads, "power", "--preset", "t3", "--n", "120", "--reps", "25", "--sims", "500"])
        .args(["--seed", "11", "--grid=-0.5:0.5:3", "--tests", "CLR,RCLR,AR,RAR,K,RW", "--curve"])
        .arg(&curve)
        .output()
        .unwrap();
    (out, curve)
}

#[test]
fn power_csv_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let (out, curve) = power_small(dir.path(), "2");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = std::fs::read_to_string(&curve).unwrap();
    if std::env::var_os("RIVIV_BLESS").is_some() {
        std::fs::write(GOLDEN, &got).unwrap();
    }
    assert_eq!(got, std::fs::read_to_string(GOLDEN).unwrap());
    let (_, again) = power_small(dir.path(), "1");
    assert_eq!(std::fs::read_to_string(again).unwrap(), got);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("RCLR") && stdout.contains("-0.5000"));
}

#[test]
fn single_replication_power_is_still_valid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("one.csv");
    let report = dir.path().join("one.json");
    let st = bin()
        .args(["power", "--reps", "1", "--sims", "200", "--grid=0:1:3", "--curve"])
        .arg(&curve)
        .arg("--out")
        .arg(&report)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(&curve).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["beta", "test", "rejection_rate", "mc_se"]);
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        assert!(matches!(&r[2], "0" | "1"));
        rows += 1;
    }
    assert_eq!(rows, 6);
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["command"], "power");
    assert_eq!(rep["inputs"]["study"]["scenario"]["reps"], 1);
}

#[test]
fn exit_codes_and_located_errors() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic(dir.path(), "d.csv", 1.0, 3, 0.0, 8);
    let out_json = dir.path().join("r.json");

    let missing = bin()
        .args(["test", "--y", "y", "--x", "x", "--z", "z1,nope", "--csv"])
        .arg(&csv)
        .arg("--out")
        .arg(&out_json)
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("'nope'"));
    assert!(!out_json.exists());

    let mut text = std::fs::read_to_string(&csv).unwrap();
    let third = text.lines().nth(3).unwrap().to_string();
    let broken: Vec<&str> = third.split(',').collect();
    text = text.replacen(&third, &format!("{},oops,{}", broken[0], broken[2..].join(",")), 1);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, text).unwrap();
    let o = bin()
        .args(["confset", "--y", "y", "--x", "x", "--z", "z1", "--csv"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("'x'") && err.contains("oops"), "{err}");

    // exact fit: zero robust scale is a numerical failure
    let exact = dir.path().join("exact.csv");
    let mut s = String::from("y,x,z1\n");
    for i in 0..40 {
        let z = (i as f64 * 0.7).sin();
        s += &format!("{},{},{z}\n", 1.0 + 2.0 * z, (i as f64).cos() + z);
    }
    std::fs::write(&exact, s).unwrap();
    let o = bin()
        .args(["test", "--y", "y", "--x", "x", "--z", "z1", "--csv"])
        .arg(&exact)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    // collinear instruments name the column
    let col = dir.path().join("col.csv");
    let mut s = String::from("y,x,a,b\n");
    for i in 0..40 {
        let a = (i as f64 * 0.3).cos();
        s += &format!("{},{},{a},{}\n", (i as f64).sin(), (i as f64 * 1.7).cos(), 2.0 * a);
    }
    std::fs::write(&col, s).unwrap();
    let o = bin()
        .args(["test", "--estimator", "ls", "--y", "y", "--x", "x", "--z", "a,b", "--csv"])
        .arg(&col)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'b'"));

    assert_eq!(bin().arg("nonsense").status().unwrap().code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn invalid_study_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "preset = \"t3\"\n[scenario]\nrho = 1.5\n").unwrap();
    let curve = dir.path().join("c.csv");
    let o = bin().arg("power").arg("--config").arg(&cfg).arg("--curve").arg(&curve).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho"));
    assert!(!curve.exists());

    std::fs::write(&cfg, "preset = \"t3\"\n\n[scenario]\nreps = \"many\"\n").unwrap();
    let o = bin().arg("power").arg("--config").arg(&cfg).arg("--curve").arg(&curve).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
    assert!(!curve.exists());
}

#[test]
fn empty_set_warns() {
    let dir = tempfile::tempdir().unwrap();
    // strong instruments plus a grid that excludes the truth and the tails
    let csv = synthetic(dir.path(), "d.csv", 1.0, 3, 0.0, 9);
    let o = bin()
        .args(["confset", "--test", "rar", "--estimator", "ls", "--y", "y", "--x", "x", "--z", "z1,z2,z3", "--w", "w1"])
        .args(["--grid", "5:6:11", "--csv"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(o.status.success());
    // the tail probes still reject, so the set is empty
    assert!(String::from_utf8_lossy(&o.stdout).contains("empty"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}
