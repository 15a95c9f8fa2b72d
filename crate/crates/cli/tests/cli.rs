use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diana_cli::output::read_records;

const BIN: &str = env!("CARGO_BIN_EXE_diana");

const MINIMAL: &str = r#"
[problem]
kind = "quadratic"
workers = 1
dim = 4
seed = 2

[run]
iterations = 10
seeds = [0]
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn diana(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("DIANA_OUT_DIR")
        .output()
        .unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    diana(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn minimal_run_writes_eleven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", MINIMAL);
    let out = dir.path().join("out");
    let o = run("run", &cfg, &out, &["--strict"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_records(std::fs::File::open(out.join("records.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 11);
    assert_eq!(
        rows.iter().map(|r| r.k).collect::<Vec<_>>(),
        (0..=10).collect::<Vec<_>>()
    );
    assert!(rows.iter().all(|r| r.lyapunov.is_some() && !r.diverged));

    let s = json(&out.join("summary.json"));
    assert_eq!(s["status"], "validated");
    assert_eq!(s["resolved"]["iterations"], 10);
    assert_eq!(s["config"]["problem"]["kind"], "quadratic");
    assert!(s["version"]
        .as_str()
        .unwrap()
        .starts_with(env!("CARGO_PKG_VERSION")));
    assert_eq!(
        s["provenance"]["gamma"].as_str().unwrap().split(':').next(),
        Some("auto")
    );
    let curve = s["reference_curve"]["points"].as_array().unwrap();
    assert_eq!(curve.len(), 11);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL
        .replace("seeds = [0]", "seeds = [0, 1, 2]\nmessage_log = true")
        .replace("workers = 1", "workers = 3\nsigma2 = 0.5");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    assert!(run("run", &cfg, &a, &[]).status.success());
    assert!(run("run", &cfg, &b, &["--threads", "1"]).status.success());
    assert!(run("run", &cfg, &c, &["--seed-offset", "5"])
        .status
        .success());
    for file in ["records.csv", "summary.json", "messages/seed-1.jsonl"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    assert_ne!(
        std::fs::read(a.join("records.csv")).unwrap(),
        std::fs::read(c.join("records.csv")).unwrap()
    );
    assert!(c.join("messages/seed-6.jsonl").exists());
}

#[test]
fn strict_mode_rejects_large_stepsize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("{MINIMAL}\n[method]\ngamma = 100.0\n"),
    );
    let out = dir.path().join("out");
    let o = run("run", &cfg, &out, &["--strict"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stepsize cap"), "{}", stderr(&o));
    assert!(!out.join("records.csv").exists());

    // Permissive mode runs and stamps the output; this stepsize diverges.
    let o = run("run", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["status"], "unvalidated");
    assert_eq!(s["diverged_seeds"], serde_json::json!([0]));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        (
            MINIMAL.replace("iterations = 10", "iterations = 10\nitr = 3"),
            "itr",
        ),
        (MINIMAL.replace("seeds = [0]", "seeds = []"), "run.seeds"),
        (
            format!("{MINIMAL}\n[method]\nblock_size = 0\n"),
            "method.block_size",
        ),
        (format!("{MINIMAL}\n[method]\nbeta = 1.5\n"), "method.beta"),
        (
            MINIMAL.replace("kind = \"quadratic\"", "kind = \"cubic\""),
            "cubic",
        ),
    ];
    for (text, needle) in cases {
        let cfg = write_config(dir.path(), "bad.toml", &text);
        let o = run("run", &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{needle}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{needle}: {}", stderr(&o));
    }
    let o = run("run", &dir.path().join("missing.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", MINIMAL);
    let env_out = dir.path().join("env");
    let o = Command::new(BIN)
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("DIANA_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env_out.join("records.csv").exists());
}

const SWEEP: &str = r#"
[problem]
kind = "quadratic"
workers = 4
dim = 16
condition_number = 5.0
seed = 3

[run]
iterations = 600
seeds = [0, 1]
record_every = 1

[sweep]
p = [1, 2, "inf"]
block_size = [4, 16]
target = 1e-6
"#;

#[test]
fn sweep_over_norms_and_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SWEEP);
    let out = dir.path().join("out");
    let o = run("sweep", &cfg, &out, &["--strict"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    let h = r.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    assert_eq!(rows.len(), 6);
    let blocks: std::collections::BTreeSet<&str> =
        rows.iter().map(|r| &r[col("block_size")]).collect();
    assert_eq!(blocks.into_iter().collect::<Vec<_>>(), vec!["16", "4"]);
    assert!(rows.iter().all(|r| &r[col("status")] == "ok"));

    // Shared seeds: iterations to 1e-6 do not increase with p.
    for block in ["4", "16"] {
        let iters: Vec<usize> = rows
            .iter()
            .filter(|r| &r[col("block_size")] == block)
            .map(|r| r[col("iterations_to_target")].parse().unwrap())
            .collect();
        assert_eq!(iters.len(), 3);
        assert!(
            iters[0] >= iters[1] && iters[1] >= iters[2] && iters[2] > 0,
            "block {block}: {iters:?}"
        );
    }
    for i in 0..6 {
        assert!(out.join(format!("cell-{i}/records.csv")).exists());
    }
}

#[test]
fn single_cell_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{MINIMAL}\n[sweep]\np = [2]\n");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let (a, b) = (dir.path().join("run"), dir.path().join("sweep"));
    assert!(run("run", &cfg, &a, &[]).status.success());
    let o = run("sweep", &cfg, &b, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(a.join("records.csv")).unwrap(),
        std::fs::read(b.join("cell-0/records.csv")).unwrap()
    );
}

#[test]
fn sweep_marks_failed_cells_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{MINIMAL}\n[sweep]\nblock_size = [2, 0]\n");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let out = dir.path().join("out");
    let o = run("sweep", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains(",ok,"), "{}", lines[1]);
    assert!(
        lines[2].contains(",failed,") && lines[2].contains("method.block_size"),
        "{}",
        lines[2]
    );
    assert!(out.join("cell-0/summary.json").exists());
}

#[test]
fn theory_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[problem]
kind = "quadratic"
workers = 4
dim = 20
seed = 1

[run]
iterations = 100

[theory]
k = [0, 1, 10, 100]
nodes = { d = 6400, m = 64 }
"#;
    let cfg = write_config(dir.path(), "t.toml", text);
    let out = dir.path().join("out");
    let o = run("theory", &cfg, &out, &["--strict"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("n*=18"), "{stdout}");
    assert!(stdout.contains("checks     validated"), "{stdout}");
    assert!(!stdout.contains("FAIL"));

    // Without noise the bound is (1 − γμ)^k V⁰.
    let r = json(&out.join("theory.json"));
    let gamma = r["schedule"]["gamma"].as_f64().unwrap();
    let mu = r["constants"]["mu"].as_f64().unwrap();
    let v0 = r["curve"]["start"].as_f64().unwrap();
    assert!(v0 > 0.0);
    for p in r["curve"]["points"].as_array().unwrap() {
        let k = p[0].as_f64().unwrap();
        let want = (1.0 - gamma * mu).powf(k) * v0;
        assert!((p[1].as_f64().unwrap() - want).abs() <= 1e-12 * v0, "k={k}");
    }
    assert_eq!(r["optimal_nodes"]["n_star"], 18.0);
}

#[test]
fn theory_strict_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.toml",
        &format!("{MINIMAL}\n[method]\ngamma = 5.0\nalpha = 0.9\n"),
    );
    let o = diana(&["theory", "--config", cfg.to_str().unwrap(), "--strict"]);
    assert_eq!(o.status.code(), Some(2));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("[FAIL] stepsize cap"), "{stdout}");
    let o = diana(&["theory", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("unvalidated"));
}

#[test]
fn shipped_configs_resolve_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        let loaded = diana_cli::config::load(&path).unwrap();
        let exp = diana_cli::config::resolve(&loaded, 0)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(
            exp.validation.validated,
            "{}: {:?}",
            path.display(),
            exp.validation.failures()
        );
        seen += 1;
    }
    assert!(seen >= 5);
}
