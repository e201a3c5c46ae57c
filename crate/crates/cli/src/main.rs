//! `bkq`: run the limit, representation and envelope experiments from JSON
//! configs and write CSV/JSON results.
//!
//! Exit codes: 0 when a run passes its check, 2 when it completes but fails
//! its tolerance, 1 on any usage or runtime error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bk_core::montecarlo::{
    fmt_f64, run_envelope_experiment, run_limit_experiment, run_rate_experiment, samples_csv,
    simulate_path, write_atomic, write_csv, write_json, ExperimentConfig, RunOptions,
};
use bk_core::registry::ModelRegistry;
use bk_core::theory::{
    b_alpha, check_alpha_domain, gamma_exponent, kappa_alpha, lil_constant_iid, lil_constant_lrd,
    TheoryParams,
};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

const RESOLVED_CONFIG: &str = "config.resolved.json";
const CHECKPOINT_FILE: &str = "checkpoint.json";
const CONSTANTS_HEADER: [&str; 8] = [
    "alpha",
    "b_alpha",
    "kappa_alpha",
    "gamma",
    "H",
    "lil_const_iid",
    "lil_const_lrd",
    "alpha_domain_ok",
];
const REPORT_HEADER: [&str; 8] = [
    "path",
    "experiment",
    "model_kind",
    "T",
    "replications",
    "statistic",
    "tolerance",
    "passed",
];

#[derive(Debug, Parser)]
#[command(
    name = "bkq",
    version,
    about = "Partial-sum/renewal fluctuation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate b_α, κ_α, γ, H and the LIL constants over an α grid.
    Constants {
        /// Comma-separated α values in (0, 1).
        #[arg(long, value_delimiter = ',', default_values_t = default_alpha_grid())]
        alphas: Vec<f64>,
        /// Write `constants.csv` into this directory instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump S(t), N(μt) and Q(t) at t = 0..=T for one replication.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Replication index whose derived seed drives the path.
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
    /// Compare normalised Q(T) with its limit law.
    VerifyLimit(RunArgs),
    /// Median representation errors over dyadic times (coupled models).
    VerifyRepresentation(RunArgs),
    /// Exceedance of sup|Q| over multiples of the LIL envelope.
    Envelope(RunArgs),
    /// Summarise every result.json found under a directory.
    Report {
        dir: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "T")]
    t: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sets `alpha` on models that take one.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, env = "BK_WORKERS")]
    workers: Option<usize>,
    /// Checkpoint file; defaults to `checkpoint.json` in the output directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Stop after this many replications, keeping the checkpoint.
    #[arg(long)]
    stop_after: Option<usize>,
}

fn default_alpha_grid() -> Vec<f64> {
    (1..=19)
        .map(|k| k as f64 * 0.05)
        .map(|a| (a * 100.0).round() / 100.0)
        .collect()
}

/// Outcome of a completed run.
enum Verdict {
    Pass,
    ToleranceFail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::ToleranceFail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<Verdict> {
    let registry = ModelRegistry::default();
    match command {
        Command::Constants { alphas, out } => cmd_constants(&alphas, out.as_deref()),
        Command::Simulate { run, replication } => cmd_simulate(&run, replication, &registry),
        Command::VerifyLimit(run) => cmd_verify_limit(&run, &registry),
        Command::VerifyRepresentation(run) => cmd_verify_representation(&run, &registry),
        Command::Envelope(run) => cmd_envelope(&run, &registry),
        Command::Report { dir, out } => cmd_report(&dir, out.as_deref()),
    }
}

fn constants_rows(alphas: &[f64]) -> Result<Vec<Vec<String>>> {
    let iid = lil_constant_iid(1.0, 1.0)?;
    alphas
        .iter()
        .map(|&alpha| {
            if !(alpha > 0.0 && alpha < 1.0) {
                bail!("alpha {alpha} is not in (0, 1)");
            }
            let params = TheoryParams::from_scale(alpha, 1.0, 1.0)?;
            Ok(vec![
                fmt_f64(alpha),
                fmt_f64(b_alpha(alpha)?),
                fmt_f64(kappa_alpha(alpha)?),
                fmt_f64(gamma_exponent(alpha)?),
                fmt_f64(1.0 - alpha / 2.0),
                fmt_f64(iid),
                fmt_f64(lil_constant_lrd(&params)),
                check_alpha_domain(alpha).to_string(),
            ])
        })
        .collect()
}

fn cmd_constants(alphas: &[f64], out: Option<&Path>) -> Result<Verdict> {
    if alphas.is_empty() {
        bail!("empty alpha grid");
    }
    let rows = constants_rows(alphas)?;
    match out {
        Some(dir) => write_csv(&dir.join("constants.csv"), &CONSTANTS_HEADER, rows)?,
        None => {
            println!("{}", CONSTANTS_HEADER.join(","));
            for row in rows {
                println!("{}", row.join(","));
            }
        }
    }
    Ok(Verdict::Pass)
}

/// Loads the config, applies overrides, resolves it and writes the
/// resolved form next to the results.
fn prepare(run: &RunArgs, registry: &ModelRegistry) -> Result<(ExperimentConfig, RunOptions)> {
    let mut config = ExperimentConfig::load(&run.config)
        .with_context(|| format!("reading {}", run.config.display()))?;
    if let Some(t) = run.t {
        config.t = t;
    }
    if let Some(r) = run.replications {
        config.replications = r;
    }
    if let Some(s) = run.seed {
        config.master_seed = s;
    }
    if let Some(w) = run.workers {
        config.workers = Some(w);
    }
    if let Some(alpha) = run.alpha {
        if !matches!(config.model.kind.as_str(), "lrd" | "coupled-fbm") {
            bail!(
                "--alpha does not apply to model kind `{}`",
                config.model.kind
            );
        }
        config.model.params.insert("alpha".into(), alpha.into());
    }
    let config = config.resolve(registry)?;
    fs::create_dir_all(&run.out).with_context(|| format!("creating {}", run.out.display()))?;
    write_json(&run.out.join(RESOLVED_CONFIG), &config)?;
    let options = RunOptions {
        workers: config.workers,
        checkpoint: Some(
            run.checkpoint
                .clone()
                .unwrap_or_else(|| run.out.join(CHECKPOINT_FILE)),
        ),
        checkpoint_every: config.checkpoint_every,
        stop_after: run.stop_after,
    };
    Ok((config, options))
}

/// Removes the checkpoint once a run has finished.
fn finish(options: &RunOptions) -> Result<()> {
    if let Some(p) = &options.checkpoint {
        if p.exists() {
            fs::remove_file(p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    Ok(())
}

fn cmd_simulate(run: &RunArgs, replication: u64, registry: &ModelRegistry) -> Result<Verdict> {
    let (config, _) = prepare(run, registry)?;
    let rows = simulate_path(&config, registry, replication)?;
    write_csv(
        &run.out.join("path.csv"),
        &["t", "S", "N", "Q"],
        rows.iter()
            .map(|p| vec![p.t.to_string(), fmt_f64(p.s), p.n.to_string(), fmt_f64(p.q)]),
    )?;
    Ok(Verdict::Pass)
}

fn cmd_verify_limit(run: &RunArgs, registry: &ModelRegistry) -> Result<Verdict> {
    let (config, options) = prepare(run, registry)?;
    let result = run_limit_experiment(&config, registry, &options)?;
    write_atomic(&run.out.join("samples.csv"), &samples_csv(&result.records)?)?;
    write_csv(
        &run.out.join("cdf_compare.csv"),
        &["y", "ecdf", "theory_cdf"],
        result
            .cdf_compare()?
            .into_iter()
            .map(|(y, e, f)| vec![fmt_f64(y), fmt_f64(e), fmt_f64(f)]),
    )?;
    write_json(&run.out.join("result.json"), &result)?;
    finish(&options)?;
    eprintln!(
        "KS = {:.6} (tolerance {}, {} replications): {}",
        result.ks_vs_theory,
        result.ks_tolerance,
        result.replications,
        if result.passed { "pass" } else { "FAIL" }
    );
    Ok(if result.passed {
        Verdict::Pass
    } else {
        Verdict::ToleranceFail
    })
}

fn cmd_verify_representation(run: &RunArgs, registry: &ModelRegistry) -> Result<Verdict> {
    let (config, options) = prepare(run, registry)?;
    let result = run_rate_experiment(&config, registry, &options)?;
    write_csv(
        &run.out.join("rates.csv"),
        &["metric", "T", "rate_exponent", "median", "q25", "q75"],
        result.rows.iter().map(|r| {
            vec![
                r.metric.clone(),
                r.t.to_string(),
                fmt_f64(r.rate_exponent),
                fmt_f64(r.median),
                fmt_f64(r.q25),
                fmt_f64(r.q75),
            ]
        }),
    )?;
    write_json(&run.out.join("result.json"), &result)?;
    finish(&options)?;
    for (metric, ok) in &result.decreasing {
        eprintln!(
            "{metric}: median ratio {}",
            if *ok { "decreasing" } else { "NOT decreasing" }
        );
    }
    Ok(if result.decreasing.values().all(|&ok| ok) {
        Verdict::Pass
    } else {
        Verdict::ToleranceFail
    })
}

fn cmd_envelope(run: &RunArgs, registry: &ModelRegistry) -> Result<Verdict> {
    let (config, options) = prepare(run, registry)?;
    let result = run_envelope_experiment(&config, registry, &options)?;
    write_csv(
        &run.out.join("exceedance.csv"),
        &["lambda", "fraction"],
        result
            .exceedance
            .iter()
            .map(|e| vec![fmt_f64(e.lambda), fmt_f64(e.fraction)]),
    )?;
    write_csv(
        &run.out.join("envelope_samples.csv"),
        &["replication_index", "seed", "sup_abs_q", "ratio_statistic"],
        result.records.iter().map(|r| {
            vec![
                r.replication_index.to_string(),
                r.seed.to_string(),
                fmt_f64(r.sup_abs_q),
                r.ratio_statistic.map(fmt_f64).unwrap_or_default(),
            ]
        }),
    )?;
    write_json(&run.out.join("result.json"), &result)?;
    finish(&options)?;
    eprintln!("envelope {} at T = {}", fmt_f64(result.envelope), result.t);
    for e in &result.exceedance {
        eprintln!(
            "  lambda {}: exceedance {}",
            fmt_f64(e.lambda),
            fmt_f64(e.fraction)
        );
    }
    Ok(if result.monotone_in_lambda {
        Verdict::Pass
    } else {
        eprintln!("exceedance is not monotone in lambda");
        Verdict::ToleranceFail
    })
}

fn find_results(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            find_results(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == "result.json") {
            found.push(path);
        }
    }
    Ok(())
}

fn text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => n.as_f64().map(fmt_f64).unwrap_or_else(|| n.to_string()),
        other => other.to_string(),
    }
}

/// One summary row per result file. The statistic is the KS distance for
/// limit runs, the largest-λ exceedance for envelope runs and empty for rate
/// runs.
fn report_row(root: &Path, path: &Path) -> Result<Vec<String>> {
    let v: Value = serde_json::from_slice(&fs::read(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    let experiment = text(&v["experiment"]);
    let (statistic, tolerance, passed) = match experiment.as_str() {
        "limit" => (
            text(&v["ks_vs_theory"]),
            text(&v["ks_tolerance"]),
            text(&v["passed"]),
        ),
        "rate" => {
            let all = v["decreasing"]
                .as_object()
                .map(|m| m.values().all(|b| b.as_bool() == Some(true)));
            (
                String::new(),
                String::new(),
                all.map(|b| b.to_string()).unwrap_or_default(),
            )
        }
        "envelope" => {
            let last = v["exceedance"]
                .as_array()
                .and_then(|a| a.last())
                .map(|e| text(&e["fraction"]));
            (
                last.unwrap_or_default(),
                String::new(),
                text(&v["monotone_in_lambda"]),
            )
        }
        _ => (String::new(), String::new(), String::new()),
    };
    let rel = path.strip_prefix(root).unwrap_or(path);
    Ok(vec![
        rel.display().to_string(),
        experiment,
        text(&v["model_kind"]),
        text(&v["T"]),
        text(&v["replications"]),
        statistic,
        tolerance,
        passed,
    ])
}

fn cmd_report(dir: &Path, out: Option<&Path>) -> Result<Verdict> {
    let mut files = Vec::new();
    find_results(dir, &mut files)?;
    let rows = files
        .iter()
        .map(|p| report_row(dir, p))
        .collect::<Result<Vec<_>>>()?;
    match out {
        Some(path) => write_csv(path, &REPORT_HEADER, rows)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            w.write_record(REPORT_HEADER)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush()?;
        }
    }
    Ok(Verdict::Pass)
}
