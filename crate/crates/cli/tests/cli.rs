use std::path::{Path, PathBuf};
use std::process::Command;

use martlab::experiment::ExperimentConfig;
use martlab::report::ExperimentReport;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_martlab"));
    c.env_remove("MARTLAB_SEED");
    c
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
seed = 11
[model]
kind = "linear"
coeffs = [1.0, 0.5, 0.25]
innovation = { law = "rademacher" }
[experiment]
kind = "simulate"
n_grid = { dyadic = [2, 7] }
replicates = 3000
"#;

fn run_ok(args: &[&str], envs: &[(&str, &str)]) -> (String, String) {
    let mut c = bin();
    c.args(args);
    for (k, v) in envs {
        c.env(k, v);
    }
    let out = c.output().unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(out.status.success(), "{stderr}");
    (String::from_utf8(out.stdout).unwrap(), stderr)
}

#[test]
fn every_example_config_parses() {
    let mut kinds = Vec::new();
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        kinds.push(cfg.experiment.name());
    }
    for k in martlab::experiment::ExperimentKind::NAMES {
        assert!(kinds.contains(&k), "no example config for {k}");
    }
}

#[test]
fn outputs_and_worker_invariance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut bodies = Vec::new();
    for w in ["1", "3"] {
        let out = tmp.path().join(format!("w{w}"));
        let (stdout, stderr) =
            run_ok(&["simulate", "--config", cfg.to_str().unwrap(), "--workers", w, "--out", out.to_str().unwrap()], &[]);
        assert!(stderr.contains("verdict PASS"), "{stderr}");
        for f in ["report.json", "rows.csv", "manifest.txt"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        let rep = ExperimentReport::from_json(&stdout).unwrap();
        assert_eq!(rep.runtime.workers, w.parse::<usize>().unwrap());
        let file = ExperimentReport::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(file, rep);
        let rows = ExperimentReport::read_rows_csv(std::fs::File::open(out.join("rows.csv")).unwrap()).unwrap();
        assert_eq!(rows, rep.body.rows);
        bodies.push(rep.body_json().unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let m1 = std::fs::read_to_string(tmp.path().join("w1/manifest.txt")).unwrap();
    let m3 = std::fs::read_to_string(tmp.path().join("w3/manifest.txt")).unwrap();
    let hash = |m: &str| m.lines().find(|l| l.starts_with("config_sha256")).unwrap().to_string();
    assert_eq!(hash(&m1), hash(&m3));
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    let base = ["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let seed_of = |stdout: &str| ExperimentReport::from_json(stdout).unwrap().body.seed;
    assert_eq!(seed_of(&run_ok(&base, &[]).0), 11);
    assert_eq!(seed_of(&run_ok(&base, &[("MARTLAB_SEED", "22")]).0), 22);
    let mut with_flag = base.to_vec();
    with_flag.extend(["--seed", "33"]);
    assert_eq!(seed_of(&run_ok(&with_flag, &[("MARTLAB_SEED", "22")]).0), 33);
}

#[test]
fn csv_format_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    let (stdout, _) = run_ok(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv"], &[]);
    assert!(stdout.starts_with("n,label,param,estimate,stderr"));

    let wrong = bin().args(["mdp", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap();
    assert!(!wrong.status.success());
    assert!(String::from_utf8_lossy(&wrong.stderr).contains("not mdp"));

    let bad = write_config(tmp.path(), "seed = 1\nbogus = 2\n");
    let res = bin().args(["simulate", "--config", bad.to_str().unwrap()]).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("bogus"));
}

#[test]
fn conditions_subcommand_writes_verdict_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    run_ok(&["conditions", "--config", configs_dir().join("conditions.toml").to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    let table = std::fs::read_to_string(out.join("conditions.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5 + 2);
    assert!(table.lines().skip(1).all(|l| l.ends_with("CONVERGENT")), "{table}");
}
