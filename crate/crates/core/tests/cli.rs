use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dquad::dqgen::parse_rule;
use dquad::orthopoly::{gauss_rule_1d, WeightFamily};

fn dquad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dquad"))
        .current_dir(dir)
        .env_remove("DQUAD_RULE_CACHE")
        .args(args)
        .output()
        .expect("run dquad")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_rule_d1_matches_gauss() {
    let dir = tempfile::tempdir().unwrap();
    let out = dquad(dir.path(), &["gen-rule", "--dim", "1", "--order", "5", "--nodes", "3", "--out", "g3.rule"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rule = parse_rule(&dir.path().join("g3.rule")).unwrap();
    let gauss = gauss_rule_1d(WeightFamily::StandardNormal, 3).unwrap();
    for q in 0..3 {
        assert!((rule.node(q)[0] - gauss.nodes[q]).abs() < 1e-6);
        assert!((rule.weights()[q] - gauss.weights[q]).abs() < 1e-6);
    }
}

#[test]
fn gen_rule_d5_r6_n100_succeeds_into_cache() {
    let dir = tempfile::tempdir().unwrap();
    let out = dquad(
        dir.path(),
        &["gen-rule", "--family", "normal", "--dim", "5", "--order", "6", "--nodes", "100", "--eps", "1e-8"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("rules/normal-d5-r6-n100.rule").is_file());
    let verify = dquad(dir.path(), &["verify-rule", "--rule", "normal-d5-r6-n100"]);
    assert_eq!(verify.status.code(), Some(0));
    assert!(stdout(&verify).lines().any(|l| l == "OK"));
}

#[test]
fn infeasible_rule_exits_3_with_best_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = dquad(dir.path(), &["gen-rule", "--dim", "3", "--order", "2", "--nodes", "1", "--restarts", "3"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("best residual"), "{}", stderr(&out));
    assert!(!dir.path().join("rules").exists());
}

#[test]
fn verify_rule_reports_tensor_residual_and_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dquad(dir.path(), &["gen-rule", "--dim", "3", "--tensor", "4", "--out", "t.rule"]);
    assert_eq!(gen.status.code(), Some(0), "{}", stderr(&gen));
    let ok = dquad(dir.path(), &["verify-rule", "--rule", "t.rule", "--report-moments"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = stdout(&ok);
    let recomputed: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("residual stored "))
        .and_then(|l| l.split_whitespace().nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!(recomputed < 1e-12, "{recomputed}");
    assert_eq!(text.lines().filter(|l| l.starts_with("moment ")).count(), 120);

    let body = fs::read_to_string(dir.path().join("t.rule")).unwrap();
    let (head, last) = body.trim_end().rsplit_once(' ').unwrap();
    fs::write(dir.path().join("bad.rule"), format!("{head} -{last}\n")).unwrap();
    let bad = dquad(dir.path(), &["verify-rule", "--rule", "bad"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stdout(&bad).contains("FAIL positive-weights"), "{}", stdout(&bad));
}

#[test]
fn fit_is_reproducible_and_dq_rule_resolves_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let sim = dquad(p, &["simulate", "--dim", "5", "--individuals", "200", "--seed", "9", "--out", "d.csv", "--truth", "truth.json"]);
    assert_eq!(sim.status.code(), Some(0), "{}", stderr(&sim));
    let truth: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth.as_array().unwrap().len(), 1 + 5 + 15);

    let fit_args = ["fit", "--data", "d.csv", "--method", "halton", "--draws", "50", "--seed", "4", "--covariance", "diagonal"];
    let a = dquad(p, &[&fit_args[..], &["--out", "a.json"]].concat());
    let b = dquad(p, &[&fit_args[..], &["--out", "b.json"]].concat());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(fs::read(p.join("a.json")).unwrap(), fs::read(p.join("b.json")).unwrap());
    assert!(stderr(&a).contains("wall time"));

    let cache = p.join("cache");
    let gen = dquad(p, &["--rule-cache", cache.to_str().unwrap(), "gen-rule", "--dim", "5", "--order", "6", "--nodes", "200"]);
    assert_eq!(gen.status.code(), Some(0), "{}", stderr(&gen));
    let rule_path = format!("{}/normal-d5-r6-n200", cache.display());
    let dq = dquad(p, &["fit", "--data", "d.csv", "--method", "dq", "--rule", &rule_path, "--report-time"]);
    assert_eq!(dq.status.code(), Some(0), "{}", stderr(&dq));
    let report: serde_json::Value = serde_json::from_str(&stdout(&dq)).unwrap();
    assert_eq!(report["converged"], true);
    assert_eq!(report["rule"], "normal-d5-r6-n200");
    assert!(report["wall_time_seconds"].as_f64().unwrap() > 0.0);
    assert_eq!(report["parameters"].as_array().unwrap().len(), 21);
}

#[test]
fn missing_rule_gives_cache_key_hint() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dquad"))
        .current_dir(dir.path())
        .env("DQUAD_RULE_CACHE", dir.path().join("envcache"))
        .args(["fit", "--data", "missing.csv", "--method", "dq", "--rule", "normal-d5-r6-n200"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("normal-d5-r6-n200"), "{err}");
    assert!(err.contains("envcache"), "{err}");
    assert!(err.contains("hint:"), "{err}");
}

#[test]
fn min_nodes_finds_gauss_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dquad(dir.path(), &["min-nodes", "--dim", "1", "--order", "5", "--hi", "6"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("minimum nodes: 3\n"));
}

const ONE_CELL: &str = r#"
seed = 3
resamples = 2
individuals = 80
dims = [3]
covariances = ["diagonal"]

[[methods]]
kind = "mlhs"
draws = [20]
"#;

#[test]
fn study_one_cell_resumes_to_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("study.toml"), ONE_CELL).unwrap();
    let run = || dquad(p, &["study", "--config", "study.toml", "--out-dir", "out"]);
    let first = run();
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let tsv = fs::read_to_string(p.join("out/report.tsv")).unwrap();
    let rows: Vec<&str> = tsv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("3\tdiagonal\tmlhs\t-\t20\t2\t"));
    let json = fs::read(p.join("out/report.json")).unwrap();

    let fits: Vec<_> = fs::read_dir(p.join("out/fits")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(fits.len(), 2);
    fs::remove_file(&fits[0]).unwrap();
    fs::remove_file(p.join("out/report.tsv")).unwrap();
    let second = run();
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(fs::read_to_string(p.join("out/report.tsv")).unwrap(), tsv);
    assert_eq!(fs::read(p.join("out/report.json")).unwrap(), json);
}

#[test]
fn study_with_ungenerable_rule_marks_cell_failed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let config = ONE_CELL.replacen("seed = 3", "seed = 3\ndq_restarts = 2", 1)
        + "\n[[methods]]\nkind = \"dq\"\norders = [2]\ndraws = [1]\n";
    fs::write(p.join("study.toml"), config).unwrap();
    let out = dquad(p, &["study", "--config", "study.toml", "--out-dir", "out"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let tsv = fs::read_to_string(p.join("out/report.tsv")).unwrap();
    let dq_row = tsv.lines().find(|l| l.contains("\tdq\t")).unwrap();
    assert!(dq_row.starts_with("3\tdiagonal\tdq\t2\t1\t2\t0\t2\tNA"), "{dq_row}");
}

#[test]
fn help_lists_every_flag_and_unknown_flags_fail() {
    let dir = tempfile::tempdir().unwrap();
    let expected: &[(&str, &[&str])] = &[
        ("gen-rule", &["--family", "--dim", "--order", "--nodes", "--eps", "--seed", "--restarts", "--out", "--tensor"]),
        ("min-nodes", &["--dim", "--order", "--lo", "--hi", "--store"]),
        ("verify-rule", &["--rule", "--report-moments"]),
        ("simulate", &["--dim", "--covariance", "--individuals", "--tasks", "--alternatives", "--seed", "--out"]),
        ("fit", &["--data", "--method", "--draws", "--rule", "--seed", "--start", "--out", "--report-time"]),
        ("study", &["--config", "--out-dir", "--rule-cache"]),
    ];
    for (cmd, flags) in expected {
        let help = stdout(&dquad(dir.path(), &[cmd, "--help"]));
        for f in *flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
    let bad = dquad(dir.path(), &["verify-rule", "--rule", "x", "--frobnicate"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("--frobnicate"));
}
