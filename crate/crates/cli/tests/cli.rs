use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bk_core::montecarlo::{run_rate_experiment, ExperimentConfig, RunOptions};
use bk_core::registry::ModelRegistry;
use bk_core::theory::LimitCdf;

fn bkq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bkq"))
        .args(args)
        .env_remove("BK_WORKERS")
        .output()
        .expect("bkq runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

const IID_CONFIG: &str = r#"{
  "model": {"kind": "iid", "distribution": {"family": "exponential", "rate": 1.0}},
  "T": 4096,
  "replications": 300,
  "master_seed": 11,
  "ks_tolerance": 0.15
}"#;

#[test]
fn constants_table() {
    let out = bkq(&["constants"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "alpha,b_alpha,kappa_alpha,gamma,H,lil_const_iid,lil_const_lrd,alpha_domain_ok"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let half = rows.iter().find(|r| r[0] == "0.5").unwrap();
    assert!((half[2].parse::<f64>().unwrap() - 3.73956).abs() < 1e-5);
    assert_eq!(half[7], "true");
    let six = rows.iter().find(|r| r[0] == "0.6").unwrap();
    assert_eq!(six[7], "false");
}

#[test]
fn constants_rejects_bad_grid() {
    let out = bkq(&["constants", "--alphas", "0.5,1.2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn simulate_constant_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model": {"kind": "coupled-wiener", "mu": 1.0, "sigma": 0.0}, "T": 8, "replications": 1, "master_seed": 0}"#,
    );
    let out_dir = dir.path().join("sim");
    let out = bkq(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(out_dir.join("path.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,S,N,Q");
    assert_eq!(lines[6], "5,5,6,1");
    assert!(out_dir.join("config.resolved.json").exists());
}

#[test]
fn verify_limit_outputs_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", IID_CONFIG);
    let out_dir = dir.path().join("run");
    let out = bkq(&[
        "verify-limit",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("KS ="));
    for f in [
        "result.json",
        "samples.csv",
        "cdf_compare.csv",
        "config.resolved.json",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(!out_dir.join("checkpoint.json").exists());

    let samples = fs::read_to_string(out_dir.join("samples.csv")).unwrap();
    assert_eq!(
        samples.lines().next().unwrap(),
        "replication_index,seed,raw_q,normalized_q"
    );
    assert_eq!(samples.lines().count(), 301);

    let law = LimitCdf::iid(1.0, 1.0).unwrap();
    let cmp = fs::read_to_string(out_dir.join("cdf_compare.csv")).unwrap();
    let mut lines = cmp.lines();
    assert_eq!(lines.next().unwrap(), "y,ecdf,theory_cdf");
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[2], law.cdf(f[0]));
    }

    let strict_dir = dir.path().join("strict");
    let strict = write_config(
        dir.path(),
        "strict.json",
        &IID_CONFIG.replace("0.15", "0.0"),
    );
    let out = bkq(&[
        "verify-limit",
        "--config",
        &strict,
        "--out",
        strict_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("KS ="));
}

#[test]
fn resolved_config_reproduces_samples_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", IID_CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = bkq(&[
        "verify-limit",
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert!(out.status.success());
    let resolved = a.join("config.resolved.json");
    let out = Command::new(env!("CARGO_BIN_EXE_bkq"))
        .args([
            "verify-limit",
            "--config",
            resolved.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
        ])
        .env("BK_WORKERS", "8")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(a.join("samples.csv")).unwrap(),
        fs::read(b.join("samples.csv")).unwrap()
    );
    let ra: ExperimentConfig = serde_json::from_slice(&fs::read(&resolved).unwrap()).unwrap();
    let rb: ExperimentConfig =
        serde_json::from_slice(&fs::read(b.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!(ra.digest().unwrap(), rb.digest().unwrap());
    assert_eq!(rb.workers, Some(8));
}

#[test]
fn stop_and_resume_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", IID_CONFIG);
    let full = dir.path().join("full");
    let part = dir.path().join("part");
    assert!(bkq(&[
        "verify-limit",
        "--config",
        &cfg,
        "--out",
        full.to_str().unwrap()
    ])
    .status
    .success());
    let out = bkq(&[
        "verify-limit",
        "--config",
        &cfg,
        "--out",
        part.to_str().unwrap(),
        "--stop-after",
        "120",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(part.join("checkpoint.json").exists());
    assert!(!part.join("samples.csv").exists());
    let out = bkq(&[
        "verify-limit",
        "--config",
        &cfg,
        "--out",
        part.to_str().unwrap(),
        "--workers",
        "3",
    ]);
    assert!(out.status.success());
    assert_eq!(
        fs::read(full.join("samples.csv")).unwrap(),
        fs::read(part.join("samples.csv")).unwrap()
    );
}

#[test]
fn overrides_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", IID_CONFIG);
    let o = dir.path().join("o");
    let out = bkq(&[
        "verify-limit",
        "--config",
        &cfg,
        "--out",
        o.to_str().unwrap(),
        "--T",
        "1024",
        "--replications",
        "50",
        "--seed",
        "5",
    ]);
    assert_ne!(out.status.code(), Some(1));
    let r: ExperimentConfig =
        serde_json::from_slice(&fs::read(o.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!((r.t, r.replications, r.master_seed), (1024, 50, 5));

    let out = bkq(&[
        "verify-limit",
        "--config",
        &cfg,
        "--out",
        o.to_str().unwrap(),
        "--alpha",
        "0.3",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let bad = write_config(
        dir.path(),
        "bad.json",
        &IID_CONFIG.replace("\"T\"", "\"horizon\": 3, \"T\""),
    );
    let out = bkq(&[
        "verify-limit",
        "--config",
        &bad,
        "--out",
        o.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let bad_model = write_config(
        dir.path(),
        "bad_model.json",
        &IID_CONFIG.replace("\"rate\"", "\"lambda\""),
    );
    let out = bkq(&[
        "verify-limit",
        "--config",
        &bad_model,
        "--out",
        o.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn representation_matches_library_table() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{"model": {"kind": "coupled-wiener", "mu": 1.0, "sigma": 1.0}, "T": 16384,
                   "replications": 12, "master_seed": 3, "checkpoints": [4096, 16384, 1024]}"#;
    let cfg = write_config(dir.path(), "c.json", json);
    let o = dir.path().join("rep");
    let out = bkq(&[
        "verify-representation",
        "--config",
        &cfg,
        "--out",
        o.to_str().unwrap(),
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    let lib = run_rate_experiment(
        &ExperimentConfig::from_json(json).unwrap(),
        &ModelRegistry::default(),
        &RunOptions::default(),
    )
    .unwrap();
    let text = fs::read_to_string(o.join("rates.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "metric,T,rate_exponent,median,q25,q75"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), lib.rows.len());
    for (line, row) in rows.iter().zip(&lib.rows) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], row.metric);
        assert_eq!(f[1].parse::<u64>().unwrap(), row.t);
        assert_eq!(f[3].parse::<f64>().unwrap(), row.median);
    }
    let expected = if lib.decreasing.values().all(|&b| b) {
        0
    } else {
        2
    };
    assert_eq!(out.status.code(), Some(expected));
}

#[test]
fn envelope_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let out = bkq(&["report", empty.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "path,experiment,model_kind,T,replications,statistic,tolerance,passed\n"
    );

    let results = dir.path().join("results");
    let cfg = write_config(dir.path(), "c.json", IID_CONFIG);
    let env_dir = results.join("env");
    let out = bkq(&[
        "envelope",
        "--config",
        &cfg,
        "--out",
        env_dir.to_str().unwrap(),
        "--replications",
        "40",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let exc = fs::read_to_string(env_dir.join("exceedance.csv")).unwrap();
    assert_eq!(exc.lines().next().unwrap(), "lambda,fraction");
    assert_eq!(exc.lines().count(), 4);
    assert_eq!(
        fs::read_to_string(env_dir.join("envelope_samples.csv"))
            .unwrap()
            .lines()
            .count(),
        41
    );
    let lim_dir = results.join("lim");
    assert!(bkq(&[
        "verify-limit",
        "--config",
        &cfg,
        "--out",
        lim_dir.to_str().unwrap()
    ])
    .status
    .success());

    let table = dir.path().join("report.csv");
    let out = bkq(&[
        "report",
        results.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("env/result.json,envelope,iid,4096,40,"));
    assert!(rows[1].starts_with("lim/result.json,limit,iid,4096,300,"));
    assert!(rows[1].ends_with(",0.15,true"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bkq(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(bkq(&["verify-limit"]).status.code(), Some(1));
    assert_eq!(bkq(&["--help"]).status.code(), Some(0));
}
