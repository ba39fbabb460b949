use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const MACHINE: &str = r#"{"element_bytes": 8, "W": 8, "t_c": 1e-10, "beta_mem": 2.5e-9,
  "cache_levels": [{"size_bytes": 16384, "beta": 2.5e-10}, {"size_bytes": 2097152, "beta": 5e-10}]}"#;

fn perfweld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfweld")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture { dir: TempDir::new().unwrap() };
        f.write("machine.json", MACHINE);
        f.write("oracle.json", &oracle(0.02));
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let path = self.path(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn synth(&self, name: &str) -> PathBuf {
        let out = self.path(name);
        let o = perfweld(&["synth", "--oracle", p(&self.path("oracle.json")), "--out", p(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    }
}

fn oracle(sigma: f64) -> String {
    format!(
        r#"{{"model": "stencil", "machine": {MACHINE}, "features": ["I", "J", "K"],
  "grid": {{"I": {{"start": 16, "stop": 64, "step": 8}}, "J": [16, 24, 32, 48], "K": [16, 32]}},
  "perturbation": {{"constant": 0.2, "linear": {{"I": 0.1}}, "quadratic": []}},
  "sigma": {sigma}, "seed": 7}}"#
    )
}

#[test]
fn bench_writes_one_row_per_point() {
    let f = Fixture::new();
    let plan = f.write("plan.json", r#"{"grid": {"i": [8, 16], "j": [8], "k": [4, 8]}, "repetitions": 1, "warmup": 0}"#);
    let out = f.path("bench.csv");
    let o = perfweld(&["bench", "stencil", "--plan", p(&plan), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let skipped = stderr(&o).lines().filter(|l| l.starts_with("skipped")).count();
    assert_eq!(text.lines().count() - 1 + skipped, 4);
    assert!(text.starts_with("I,J,K,time_seconds"));
}

#[test]
fn bench_rejects_bad_plan_and_unwritable_output() {
    let f = Fixture::new();
    let bad = f.write("bad.json", r#"{"grid": {"i": [8]"#);
    let o = perfweld(&["bench", "stencil", "--plan", p(&bad), "--out", p(&f.path("x.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));

    let plan = f.write("plan.json", r#"{"grid": {"i": [8], "j": [8], "k": [4]}, "repetitions": 1}"#);
    let missing = f.path("no/such/dir/out.csv");
    let o = perfweld(&["bench", "stencil", "--plan", p(&plan), "--out", p(&missing)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn train_and_predict_round_trip() {
    let f = Fixture::new();
    let data = f.synth("data.csv");
    let model = f.path("model.json");
    let o = perfweld(&[
        "train", "--model", "hybrid-stencil", "--data", p(&data), "--spec", p(&f.path("machine.json")),
        "--fraction", "0.5", "--n-trees", "10", "--out", p(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("test MAPE"));

    let text = fs::read_to_string(&data).unwrap();
    let lines: Vec<&str> = text.lines().take(11).collect();
    let input = f.write("ten.csv", &(lines.join("\n") + "\n"));
    let (a, b) = (f.path("a.csv"), f.path("b.csv"));
    for out in [&a, &b] {
        let o = perfweld(&["predict", "--model", p(&model), "--data", p(&input), "--out", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let pa = fs::read_to_string(&a).unwrap();
    assert_eq!(pa, fs::read_to_string(&b).unwrap());
    assert_eq!(pa.lines().count(), 11);
    assert!(pa.lines().next().unwrap().ends_with(",predicted_seconds"));
    for line in pa.lines().skip(1) {
        let y: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(y.is_finite() && y > 0.0);
    }
}

#[test]
fn train_reports_user_errors() {
    let f = Fixture::new();
    let data = f.synth("data.csv");
    let spec = f.path("machine.json");
    let out = f.path("m.json");

    let o = perfweld(&["train", "--model", "hybrid-fmm", "--data", p(&data), "--spec", p(&spec), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
    assert!(!out.exists());

    let o = perfweld(&["train", "--model", "cart", "--data", p(&data), "--fraction", "1.5", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--fraction"), "{}", stderr(&o));

    let o = perfweld(&["train", "--model", "hybrid-stencil", "--data", p(&data), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1), "hybrid without machine spec");

    let o = perfweld(&["train", "--model", "nonsense", "--data", p(&data), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn predict_with_missing_model_fails() {
    let f = Fixture::new();
    let data = f.synth("data.csv");
    let o = perfweld(&["predict", "--model", p(&f.path("absent.json")), "--data", p(&data), "--out", p(&f.path("o.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn curve_covers_every_cell_and_repeats() {
    let f = Fixture::new();
    let data = f.synth("data.csv");
    let (a, b) = (f.path("a.csv"), f.path("b.csv"));
    for out in [&a, &b] {
        let o = perfweld(&[
            "curve", "--data", p(&data), "--models", "cart,extra", "--fractions", "0.1,0.2,0.3,0.5",
            "--seeds", "5", "--n-trees", "5", "--out", p(out), "--gnuplot", p(&f.path("g.dat")),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 41);
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(f.path("g.dat").exists());
}

#[test]
fn synth_noise_controls() {
    let f = Fixture::new();
    let clean = f.write("clean.json", &oracle(0.0));
    let (a, b) = (f.path("a.csv"), f.path("b.csv"));
    for out in [&a, &b] {
        let o = perfweld(&["synth", "--oracle", p(&clean), "--out", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 1 + 7 * 4 * 2);

    let neg = f.write("neg.json", &oracle(-0.1));
    let o = perfweld(&["synth", "--oracle", p(&neg), "--out", p(&f.path("n.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sigma"), "{}", stderr(&o));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let f = Fixture::new();
    let data = f.synth("data.csv");
    let out = f.path("m.json");
    let cfg = f.write("cfg.json", r#"{"model": "cart", "fraction": 0.5, "max_depth": 2}"#);
    let o = perfweld(&["--config", p(&cfg), "train", "--data", p(&data), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("model cart"));

    let o = perfweld(&["--config", p(&cfg), "train", "--model", "extra", "--n-trees", "3", "--data", p(&data), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("model extra"));

    let bad = f.write("bad.json", "[1, 2]");
    let o = perfweld(&["--config", p(&bad), "train", "--data", p(&data), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repro_lists_and_rejects_unknown() {
    let o = perfweld(&["repro", "--list"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["stencil-gridsize", "stencil-blocking", "stencil-threads", "fmm"] {
        assert!(text.contains(name));
    }
    let o = perfweld(&["repro", "no-such-recipe"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn help_exits_zero() {
    assert!(perfweld(&["--help"]).status.success());
    assert_eq!(perfweld(&[]).status.code(), Some(1));
}
