use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn finsec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finsec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(sub: &str, config: &Path, out: &Path) -> Output {
    finsec(&[
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn counterexample_config_reports_the_dichotomy() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in("run", &bundled("laurent_counterexample.json"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = read_json(&tmp.path().join("summary.json"));
    let pipelines = summary["pipelines"].as_array().unwrap();
    let sym = &pipelines[0];
    assert_eq!(sym["pipeline"], "symmetric");
    assert_eq!(sym["status"], "failed");
    assert_eq!(sym["failures"].as_array().unwrap().len(), 10);
    let nonsym = &pipelines[1];
    assert_eq!(nonsym["status"], "ok");
    let at8 = nonsym["max_abs_error"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p[0] == 8)
        .unwrap()[1]
        .as_f64()
        .unwrap();
    assert!(at8 < 1e-8, "max error at n = 8: {at8}");
}

#[test]
fn jaffard_config_reproduces_the_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in("run", &bundled("jaffard_rate.json"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = read_json(&tmp.path().join("summary.json"));
    let rate = summary["pipelines"][0]["fitted_exponent"].as_f64().unwrap();
    assert!((-2.8..=-2.2).contains(&rate), "fitted exponent {rate}");
    let csv = fs::read_to_string(tmp.path().join("study.csv")).unwrap();
    assert!(csv.starts_with("pipeline,n,r,error,max_abs_error,phi,ratio,excluded\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn identical_configs_give_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = bundled("jaffard_rate.json");
    assert_eq!(run_in("run", &cfg, a.path()).status.code(), Some(0));
    let o = finsec(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.path().to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("study.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn manifest_echoes_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bundled("channel_delay.json");
    assert_eq!(run_in("run", &cfg, tmp.path()).status.code(), Some(0));
    let manifest = read_json(&tmp.path().join("manifest.json"));
    assert_eq!(manifest["config"], read_json(&cfg));
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["library_version"], env!("CARGO_PKG_VERSION"));
    for a in manifest["artifacts"].as_array().unwrap() {
        assert!(tmp.path().join(a.as_str().unwrap()).exists());
    }
}

#[test]
fn regenerating_from_the_manifest_reproduces_the_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(
        run_in("run", &bundled("channel_delay.json"), a.path())
            .status
            .code(),
        Some(0)
    );
    let manifest = read_json(&a.path().join("manifest.json"));
    let cfg = write_config(b.path(), &manifest["config"].to_string());
    let out = b.path().join("out");
    assert_eq!(
        run_in(manifest["command"].as_str().unwrap(), &cfg, &out)
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        fs::read(a.path().join("study.csv")).unwrap(),
        fs::read(out.join("study.csv")).unwrap()
    );
}

#[test]
fn unexpected_singular_section_exits_numerical_naming_n() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
  "model": { "name": "laurent_geometric", "c": "0.5" },
  "rhs": { "name": "unit" },
  "pipeline": { "kind": "symmetric" },
  "ns": [3, 4]
}"#,
    );
    let o = run_in("run", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("failed at n = 3"), "{}", stderr(&o));
    assert!(tmp.path().join("out/summary.json").exists());
}

#[test]
fn empty_ns_is_a_validation_error_on_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
  "model": { "name": "identity" },
  "rhs": { "name": "unit" },
  "pipeline": { "kind": "symmetric" },
  "ns": []
}"#,
    );
    let o = run_in("run", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("config.json:5:3: ns must not be empty"),
        "{err}"
    );
}

#[test]
fn unknown_fields_are_rejected_with_their_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
  "model": { "name": "identity" },
  "rhs": { "name": "unit" },
  "pipeline": { "kind": "symmetric", "expect_faliure": true },
  "ns": [1]
}"#,
    );
    let o = run_in("run", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("config.json:4:") && err.contains("expect_faliure"),
        "{err}"
    );
}

#[test]
fn list_entries_are_located_by_index() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
  "model": { "name": "identity" },
  "rhs": { "name": "unit" },
  "pipelines": [
    { "kind": "nonsymmetric", "rows": { "factor": 2 } },
    { "kind": "nonsymmetric",
      "rows": { "factor": 2, "margin": 3 } }
  ],
  "ns": [1]
}"#,
    );
    let o = run_in("run", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("config.json:7:30:"), "{err}");
}

#[test]
fn parameters_of_other_models_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
  "model": { "name": "laurent_geometric",
             "c": "0.5", "s": 3 },
  "rhs": { "name": "unit" },
  "pipeline": { "kind": "symmetric" },
  "ns": [1]
}"#,
    );
    let o = run_in("run", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("config.json:3:26: model.s does not apply"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn missing_config_is_a_validation_error() {
    let o = finsec(&["run", "--config", "/nonexistent/finsec.json"]);
    assert_eq!(o.status.code(), Some(2));
}

fn norms_csv(model: &str, algebras: &str, ns: &str) -> Vec<(String, usize, f64)> {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(r#"{{ "model": {model}, "algebras": {algebras}, "ns": {ns} }}"#),
    );
    let o = run_in("norms", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("norms.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,n,value,achieved_at"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].to_string(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect()
}

const ALL_KINDS: &str = r#"[{ "kind": "jaffard", "s": 2 }, { "kind": "av", "v": { "s": 1 } },
                            { "kind": "av1", "v": { "s": 1 } }, { "kind": "cv", "v": { "s": 1 } }]"#;

#[test]
fn identity_norms_are_one() {
    let rows = norms_csv(r#"{ "name": "identity" }"#, ALL_KINDS, "[0, 1, 3, 6]");
    assert_eq!(rows.len(), 16);
    for (kind, n, value) in rows {
        assert_eq!(value, 1.0, "{kind} at n = {n}");
    }
}

#[test]
fn tridiagonal_schur_and_cv_norms_are_six() {
    let model = r#"{ "name": "laurent", "symbol": { "-1": 1, "0": 2, "1": 1 } }"#;
    let rows = norms_csv(model, ALL_KINDS, "[2, 3, 5, 9]");
    for (kind, n, value) in rows {
        if kind == "av1" || kind == "cv" {
            // 1 * v(-1) + 2 * v(0) + 1 * v(1) with v(k) = 1 + |k|
            assert_eq!(value, 6.0, "{kind} at n = {n}");
        }
    }
}

#[test]
fn cv_norm_grows_with_the_geometric_ratio() {
    let cv = r#"[{ "kind": "cv", "v": { "s": 1 } }]"#;
    let small = norms_csv(
        r#"{ "name": "laurent_geometric", "c": "0.5" }"#,
        cv,
        "[4, 8]",
    );
    let large = norms_csv(
        r#"{ "name": "laurent_geometric", "c": "0.9" }"#,
        cv,
        "[4, 8]",
    );
    for (s, l) in small.iter().zip(&large) {
        assert!(l.2 > s.2);
        // sum_{m=1}^{2n} c^(m-1) (1 + m)
        let oracle = |c: f64, n: usize| {
            (1..=2 * n)
                .map(|m| c.powi(m as i32 - 1) * (1 + m) as f64)
                .sum::<f64>()
        };
        assert!((s.2 - oracle(0.5, s.1)).abs() <= 1e-12 * s.2);
        assert!((l.2 - oracle(0.9, l.1)).abs() <= 1e-12 * l.2);
    }
}

fn weights_report(weights: &str) -> Vec<Value> {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!(r#"{{ "weights": {weights} }}"#));
    let o = run_in("weights-check", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    read_json(&tmp.path().join("weights.json"))
        .as_array()
        .unwrap()
        .clone()
}

#[test]
fn polynomial_weight_passes_every_probe() {
    let r = &weights_report(r#"[{ "label": "p2", "v": { "s": 2 } }]"#)[0];
    assert_eq!(r["all_pass"], true);
    for bd in r["beurling_domar"].as_array().unwrap() {
        assert_eq!(bd["cauchy"], true);
        // partial sum of ln((1 + |k x|)^2) / k^2 to k = 10^6, summed here
        let x = bd["x"].as_f64().unwrap();
        let oracle: f64 = (1..=1_000_000u64)
            .map(|k| 2.0 * (1.0 + k as f64 * x).ln() / (k as f64 * k as f64))
            .sum();
        let last = bd["checkpoints"].as_array().unwrap().last().unwrap()[1]
            .as_f64()
            .unwrap();
        assert!(
            (last - oracle).abs() <= 1e-10 * oracle,
            "{last} vs {oracle}"
        );
    }
}

#[test]
fn exponential_weight_fails_grs() {
    let r = &weights_report(r#"[{ "label": "e", "v": { "a": 1, "b": 1 } }]"#)[0];
    assert_eq!(r["grs"]["holds"], false);
    assert_eq!(r["submultiplicative"]["holds"], true);
    assert_eq!(r["all_pass"], false);
}

#[test]
fn constant_weight_is_flagged_divergent() {
    let r = &weights_report(r#"[{ "label": "one", "v": {} }]"#)[0];
    assert_eq!(r["subconvolutive"]["divergent"], true);
    assert_eq!(r["grs"]["holds"], true);
}

#[test]
fn bundled_norms_and_weights_configs_run() {
    let tmp = tempfile::tempdir().unwrap();
    for (sub, cfg) in [
        ("norms", "norms_tridiagonal.json"),
        ("weights-check", "weights.json"),
    ] {
        let o = run_in(sub, &bundled(cfg), &tmp.path().join(sub));
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", stderr(&o));
        assert!(tmp.path().join(sub).join("manifest.json").exists());
    }
}
