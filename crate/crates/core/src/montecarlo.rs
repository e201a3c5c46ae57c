//! Replicated experiments: seeds, configuration, a resumable parallel runner,
//! and the limit, rate and envelope experiments with their output files.
//!
//! Every replication depends only on `(config, derive_seed(master, index))`,
//! so results do not depend on the worker count or on where a run was
//! interrupted.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::processes::{
    coupled_horizon, default_horizon, q_process, ratio_statistic, representation_error_fbm,
    representation_error_wiener, CoupledPath, SumPath,
};
use crate::registry::{ModelRegistry, ModelSpec};
use crate::sequences::{LongRun, ModelMoments, SequenceModel};
use crate::stats::{EmpiricalSample, Summary};
use crate::theory::{gamma_exponent, lil_envelope_iid, lil_envelope_lrd, LimitCdf};

/// Checkpoint file format tag and version.
pub const CHECKPOINT_FORMAT: &str = "bkq-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// How many times a replication doubles its horizon before giving up.
const MAX_HORIZON_DOUBLINGS: u32 = 8;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Per-replication seed: the SplitMix64 output function applied to
/// `master + (index + 1) · 0x9E3779B97F4A7C15` (wrapping). Injective in
/// `index` for a fixed master seed.
pub fn derive_seed(master_seed: u64, replication_index: u64) -> u64 {
    let mut z =
        master_seed.wrapping_add(replication_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `T^{-1/4} |Q(T/μ)|`.
    IidQuarter,
    /// `T^{-(1-α/2)²} Q(T)`.
    LrdExponent,
}

fn default_delta() -> f64 {
    0.05
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0, 1.25, 1.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(rename = "T")]
    pub t: u64,
    pub replications: usize,
    pub master_seed: u64,
    /// Defaults from the model: weakly dependent models use `iid-quarter`,
    /// long-range ones `lrd-exponent`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    /// Times for rate experiments.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<u64>,
    /// KS tolerance for limit experiments; 0.05 weak, 0.10 long range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_tolerance: Option<f64>,
    /// Slack exponent in long-range rate checks.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Envelope multipliers.
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Worker threads. Does not affect results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Replications per checkpoint write. Does not affect results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec, t: u64, replications: usize, master_seed: u64) -> Self {
        Self {
            model,
            t,
            replications,
            master_seed,
            normalization: None,
            checkpoints: Vec::new(),
            ks_tolerance: None,
            delta: default_delta(),
            lambdas: default_lambdas(),
            workers: None,
            checkpoint_every: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Fills every default that affects results, so the resolved config
    /// reproduces a run on its own.
    pub fn resolve(&self, registry: &ModelRegistry) -> Result<Self> {
        if self.t == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::invalid("checkpoint_every", "must be at least 1"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid("delta", "must be positive"));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::invalid("lambdas", "need positive multipliers"));
        }
        let mut out = self.clone();
        registry.resolve(
            &mut out.model,
            self.t
                .max(self.checkpoints.iter().copied().max().unwrap_or(0)),
        )?;
        let model = registry.build(&out.model)?;
        let natural = match model.moments().long_run {
            LongRun::Weak { .. } => Normalization::IidQuarter,
            LongRun::LongRange { .. } => Normalization::LrdExponent,
        };
        match self.normalization {
            Some(n) if n != natural => {
                return Err(Error::invalid(
                    "normalization",
                    format!("{n:?} does not match model kind `{}`", model.kind()),
                ))
            }
            _ => out.normalization = Some(natural),
        }
        if out.ks_tolerance.is_none() {
            out.ks_tolerance = Some(match natural {
                Normalization::IidQuarter => 0.05,
                Normalization::LrdExponent => 0.10,
            });
        }
        let mut cps = out.checkpoints.clone();
        cps.sort_unstable();
        cps.dedup();
        if cps.first() == Some(&0) {
            return Err(Error::invalid("checkpoints", "times must be positive"));
        }
        out.checkpoints = cps;
        Ok(out)
    }

    /// SHA-256 of the JSON form with the execution-only fields removed.
    pub fn digest(&self) -> Result<String> {
        let mut c = self.clone();
        c.workers = None;
        c.checkpoint_every = None;
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&c)?)))
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Execution settings that never change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    /// Resume from and persist to this file.
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: Option<usize>,
    /// Stop once this many replications are done, leaving the checkpoint.
    pub stop_after: Option<usize>,
}

impl RunOptions {
    fn for_config(&self, config: &ExperimentConfig) -> RunOptions {
        RunOptions {
            workers: self.workers.or(config.workers),
            checkpoint_every: self.checkpoint_every.or(config.checkpoint_every),
            ..self.clone()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile<R> {
    format: String,
    version: u32,
    experiment: String,
    config_digest: String,
    records: Vec<R>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

trait Indexed {
    fn index(&self) -> usize;
}

fn load_checkpoint<R: DeserializeOwned + Indexed>(
    path: &Path,
    experiment: &str,
    digest: &str,
) -> Result<BTreeMap<usize, R>> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let file: CheckpointFile<R> = serde_json::from_slice(&fs::read(path)?)?;
    if file.format != CHECKPOINT_FORMAT
        || file.version != CHECKPOINT_VERSION
        || file.experiment != experiment
        || file.config_digest != digest
    {
        return Err(Error::CheckpointMismatch {
            path: path.to_path_buf(),
        });
    }
    Ok(file.records.into_iter().map(|r| (r.index(), r)).collect())
}

fn save_checkpoint<R: Serialize + Clone>(
    path: &Path,
    experiment: &str,
    digest: &str,
    records: &BTreeMap<usize, R>,
) -> Result<()> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        experiment: experiment.to_string(),
        config_digest: digest.to_string(),
        records: records.values().cloned().collect::<Vec<_>>(),
    };
    write_atomic(path, &serde_json::to_vec(&file)?)
}

/// Runs `work(index, seed)` for every replication not already in the
/// checkpoint, in chunks, on a pool of `workers` threads.
fn run_replications<R, F>(
    experiment: &str,
    config: &ExperimentConfig,
    options: &RunOptions,
    work: F,
) -> Result<Vec<R>>
where
    R: Serialize + DeserializeOwned + Clone + Send + Indexed,
    F: Fn(usize, u64) -> Result<R> + Sync,
{
    let digest = config.digest()?;
    let total = config.replications;
    let workers = options.workers.unwrap_or(1).max(1);
    let mut done: BTreeMap<usize, R> = match &options.checkpoint {
        Some(p) => load_checkpoint(p, experiment, &digest)?,
        None => BTreeMap::new(),
    };
    done.retain(|&i, _| i < total);
    let pending: Vec<usize> = (0..total).filter(|i| !done.contains_key(i)).collect();
    let chunk = options.checkpoint_every.unwrap_or(4 * workers).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    for batch in pending.chunks(chunk) {
        if let Some(limit) = options.stop_after {
            if done.len() >= limit {
                break;
            }
        }
        let batch = match options.stop_after {
            Some(limit) => &batch[..batch.len().min(limit - done.len())],
            None => batch,
        };
        let results: Vec<Result<R>> = pool.install(|| {
            batch
                .par_iter()
                .map(|&i| {
                    work(i, derive_seed(config.master_seed, i as u64)).map_err(|e| {
                        Error::Replication {
                            index: i,
                            source: Box::new(e),
                        }
                    })
                })
                .collect()
        });
        let mut first_err = None;
        for r in results {
            match r {
                Ok(rec) => {
                    done.insert(rec.index(), rec);
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        if let Some(p) = &options.checkpoint {
            save_checkpoint(p, experiment, &digest, &done)?;
        }
        if let Some(e) = first_err {
            return Err(e);
        }
    }
    if done.len() < total {
        return Err(Error::Interrupted {
            completed: done.len(),
            total,
        });
    }
    Ok(done.into_values().collect())
}

/// Generates `n` summands and hands them to `attempt`, doubling `n` while
/// the attempt reports an exhausted horizon.
fn with_growing_horizon<T>(
    model: &dyn SequenceModel,
    mut n: usize,
    seed: u64,
    mut attempt: impl FnMut(CoupledOrPlain) -> Result<T>,
) -> Result<T> {
    let mu = model.moments().mu;
    for _ in 0..=MAX_HORIZON_DOUBLINGS {
        let r = model.generate(n, seed)?;
        let sum = SumPath::new(r.y, mu)?;
        let input = match r.driver {
            Some(driver) => CoupledOrPlain::Coupled(Box::new(CoupledPath {
                driver,
                sum,
                scale: coupled_scale(&model.moments()),
                params: match model.moments().long_run {
                    LongRun::LongRange { params, .. } => params,
                    LongRun::Weak { .. } => None,
                },
                beta_proxy: 0.0,
            })),
            None => CoupledOrPlain::Plain(sum),
        };
        match attempt(input) {
            Err(Error::HorizonExhausted { .. }) => n *= 2,
            other => return other,
        }
    }
    Err(Error::HorizonExhausted {
        level: f64::NAN,
        horizon: n,
    })
}

enum CoupledOrPlain {
    Plain(SumPath),
    Coupled(Box<CoupledPath>),
}

impl CoupledOrPlain {
    fn sum(&self) -> &SumPath {
        match self {
            CoupledOrPlain::Plain(s) => s,
            CoupledOrPlain::Coupled(c) => &c.sum,
        }
    }
}

fn coupled_scale(m: &ModelMoments) -> f64 {
    match m.long_run {
        LongRun::Weak { sigma } => sigma,
        LongRun::LongRange { c, .. } => c,
    }
}

/// The theoretical law a limit experiment is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum TheoryLaw {
    Limit(LimitCdf),
    /// Zero scale: the limit is the point mass at zero.
    PointMassAtZero,
}

impl TheoryLaw {
    pub fn for_model(moments: &ModelMoments) -> Result<Self> {
        Ok(match moments.long_run {
            LongRun::Weak { sigma: 0.0 } => TheoryLaw::PointMassAtZero,
            LongRun::Weak { sigma } => TheoryLaw::Limit(LimitCdf::iid(moments.mu, sigma)?),
            LongRun::LongRange {
                params: Some(p), ..
            } => TheoryLaw::Limit(LimitCdf::lrd(p)?),
            LongRun::LongRange { params: None, .. } => TheoryLaw::PointMassAtZero,
        })
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            TheoryLaw::Limit(l) => l.cdf(y),
            TheoryLaw::PointMassAtZero => {
                if y >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Where `Q` is read and how it is scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitTarget {
    /// Time at which `Q` is evaluated: `T/μ` or `T`.
    pub q_time: f64,
    /// Largest renewal level needed, `μ q_time`.
    pub level: f64,
    /// `T^{-1/4}` or `T^{-(1-α/2)²}`.
    pub scale: f64,
    pub absolute: bool,
}

impl LimitTarget {
    pub fn new(config: &ExperimentConfig, moments: &ModelMoments) -> Result<Self> {
        let t = config.t as f64;
        let mu = moments.mu;
        Ok(match config.normalization {
            Some(Normalization::IidQuarter) => LimitTarget {
                q_time: t / mu,
                level: t,
                scale: t.powf(-0.25),
                absolute: true,
            },
            Some(Normalization::LrdExponent) => {
                let alpha = match moments.long_run {
                    LongRun::LongRange { alpha, .. } => alpha,
                    LongRun::Weak { .. } => {
                        return Err(Error::invalid("normalization", "model is not long range"))
                    }
                };
                let h = 1.0 - alpha / 2.0;
                LimitTarget {
                    q_time: t,
                    level: mu * t,
                    scale: t.powf(-h * h),
                    absolute: false,
                }
            }
            None => return Err(Error::invalid("normalization", "config is not resolved")),
        })
    }

    pub fn normalize(&self, raw_q: f64) -> f64 {
        let v = raw_q * self.scale;
        if self.absolute {
            v.abs()
        } else {
            v
        }
    }
}

/// One replication of a limit experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRecord {
    pub replication_index: usize,
    pub seed: u64,
    pub raw_q: f64,
    pub normalized_q: f64,
}

impl Indexed for LimitRecord {
    fn index(&self) -> usize {
        self.replication_index
    }
}

/// Recomputes `Q` for one replication from its seed.
pub fn simulate_limit_replication(
    model: &dyn SequenceModel,
    target: &LimitTarget,
    index: usize,
    seed: u64,
) -> Result<LimitRecord> {
    let mu = model.moments().mu;
    let n = default_horizon(target.level, mu).max(target.q_time.ceil() as usize + 1);
    let raw_q = with_growing_horizon(model, n, seed, |p| p.sum().q(target.q_time))?;
    Ok(LimitRecord {
        replication_index: index,
        seed,
        raw_q,
        normalized_q: target.normalize(raw_q),
    })
}

/// One row of a raw path dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: u64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: f64,
}

/// `S(t)`, `N(μt)` and `Q(t)` at the integer times `0..=T` of one
/// replication, generated from `derive_seed(master_seed, replication)`.
pub fn simulate_path(
    config: &ExperimentConfig,
    registry: &ModelRegistry,
    replication: u64,
) -> Result<Vec<PathPoint>> {
    let config = config.resolve(registry)?;
    let model = build_model(&config, registry)?;
    let mu = model.moments().mu;
    let t = config.t;
    let seed = derive_seed(config.master_seed, replication);
    let n = default_horizon(mu * t as f64, mu).max(t as usize + 1);
    with_growing_horizon(model.as_ref(), n, seed, |p| {
        let sum = p.sum();
        (0..=t)
            .map(|k| {
                let tf = k as f64;
                let n = sum.renewal(mu * tf)?;
                Ok(PathPoint {
                    t: k,
                    s: sum.s(tf)?,
                    n,
                    q: sum.q(tf)?,
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitResult {
    pub experiment: String,
    pub config_digest: String,
    pub model_kind: String,
    pub moments: ModelMoments,
    #[serde(rename = "T")]
    pub t: u64,
    pub replications: usize,
    pub normalization: Normalization,
    pub theory: TheoryLaw,
    pub ks_vs_theory: f64,
    pub ks_tolerance: f64,
    pub passed: bool,
    pub summary: Summary,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub records: Vec<LimitRecord>,
}

impl LimitResult {
    pub fn normalized(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.normalized_q).collect()
    }
}

impl LimitResult {
    /// `(y, ecdf, theory_cdf)` at every distinct normalised sample value.
    pub fn cdf_compare(&self) -> Result<Vec<(f64, f64, f64)>> {
        let sample = EmpiricalSample::from_vec(self.normalized())?;
        let mut ys: Vec<f64> = sample.sorted().to_vec();
        ys.dedup();
        Ok(ys
            .into_iter()
            .map(|y| (y, sample.ecdf(y), self.theory.cdf(y)))
            .collect())
    }
}

fn build_model(
    config: &ExperimentConfig,
    registry: &ModelRegistry,
) -> Result<Arc<dyn SequenceModel>> {
    registry.build(&config.model)
}

/// Distribution of normalised `Q(T)` against the limit law.
pub fn run_limit_experiment(
    config: &ExperimentConfig,
    registry: &ModelRegistry,
    options: &RunOptions,
) -> Result<LimitResult> {
    let start = Instant::now();
    let config = config.resolve(registry)?;
    let options = options.for_config(&config);
    let model = build_model(&config, registry)?;
    let moments = model.moments();
    let theory = TheoryLaw::for_model(&moments)?;
    let target = LimitTarget::new(&config, &moments)?;
    let records = run_replications("limit", &config, &options, |i, seed| {
        simulate_limit_replication(model.as_ref(), &target, i, seed)
    })?;
    let sample = EmpiricalSample::from_vec(records.iter().map(|r| r.normalized_q).collect())?;
    let ks = sample.ks_distance(|y| theory.cdf(y));
    let tol = config.ks_tolerance.expect("resolved");
    Ok(LimitResult {
        experiment: "limit".into(),
        config_digest: config.digest()?,
        model_kind: config.model.kind.clone(),
        moments,
        t: config.t,
        replications: config.replications,
        normalization: config.normalization.expect("resolved"),
        theory,
        ks_vs_theory: ks,
        ks_tolerance: tol,
        passed: ks <= tol,
        summary: Summary::of(&sample),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        records,
    })
}

/// Representation errors of one coupled replication at each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub replication_index: usize,
    pub seed: u64,
    /// `errors[metric][k]` at `checkpoints[k]`, already divided by the rate.
    pub ratios: BTreeMap<String, Vec<f64>>,
}

impl Indexed for RateRecord {
    fn index(&self) -> usize {
        self.replication_index
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub metric: String,
    #[serde(rename = "T")]
    pub t: u64,
    /// Exponent `r` of the rate `T^r` the errors are divided by.
    pub rate_exponent: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub experiment: String,
    pub config_digest: String,
    pub model_kind: String,
    pub replications: usize,
    pub rows: Vec<RateRow>,
    /// Per metric: median ratio strictly lower at the largest `T` than at
    /// the smallest.
    pub decreasing: BTreeMap<String, bool>,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub records: Vec<RateRecord>,
}

/// Metric names and rate exponents for a coupled model.
pub fn rate_metrics(moments: &ModelMoments, delta: f64) -> Result<Vec<(&'static str, f64)>> {
    Ok(match moments.long_run {
        LongRun::Weak { .. } => vec![("err_wiener", 0.25)],
        LongRun::LongRange { alpha, .. } => {
            let g = gamma_exponent(alpha)?;
            let h = 1.0 - alpha / 2.0;
            vec![
                ("err_q", g / 2.0 + delta),
                ("err_renewal", h * h + delta),
                ("err_prop", g / 2.0 + delta),
            ]
        }
    })
}

fn rate_replication(
    model: &dyn SequenceModel,
    checkpoints: &[u64],
    metrics: &[(&'static str, f64)],
    index: usize,
    seed: u64,
) -> Result<RateRecord> {
    let mu = model.moments().mu;
    let t_max = *checkpoints.last().expect("checked nonempty");
    let values = with_growing_horizon(model, coupled_horizon(t_max as f64, mu), seed, |p| {
        let cp = match p {
            CoupledOrPlain::Coupled(cp) => cp,
            CoupledOrPlain::Plain(_) => {
                return Err(Error::invalid(
                    "model",
                    "rate experiments need a coupled model",
                ));
            }
        };
        let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for &t in checkpoints {
            let tf = t as f64;
            if cp.driver.hurst().value() == 0.5 {
                let e = representation_error_wiener(&cp, t)?;
                out.entry(metrics[0].0.into())
                    .or_default()
                    .push(e / tf.powf(metrics[0].1));
            } else {
                let e = representation_error_fbm(&cp, t)?;
                for (&(name, r), v) in metrics.iter().zip([e.err_q, e.err_renewal, e.err_prop]) {
                    out.entry(name.into()).or_default().push(v / tf.powf(r));
                }
            }
        }
        Ok(out)
    })?;
    Ok(RateRecord {
        replication_index: index,
        seed,
        ratios: values,
    })
}

/// Median normalised representation errors over dyadic times.
pub fn run_rate_experiment(
    config: &ExperimentConfig,
    registry: &ModelRegistry,
    options: &RunOptions,
) -> Result<RateResult> {
    let start = Instant::now();
    let config = config.resolve(registry)?;
    let options = options.for_config(&config);
    if config.checkpoints.is_empty() {
        return Err(Error::invalid(
            "checkpoints",
            "rate experiments need at least one time",
        ));
    }
    let model = build_model(&config, registry)?;
    if !config.model.kind.starts_with("coupled-") {
        return Err(Error::invalid(
            "model",
            "rate experiments need a coupled model",
        ));
    }
    let metrics = rate_metrics(&model.moments(), config.delta)?;
    let records = run_replications("rate", &config, &options, |i, seed| {
        rate_replication(model.as_ref(), &config.checkpoints, &metrics, i, seed)
    })?;
    let mut rows = Vec::new();
    let mut decreasing = BTreeMap::new();
    for &(name, r) in &metrics {
        let mut medians = Vec::new();
        for (k, &t) in config.checkpoints.iter().enumerate() {
            let vals: Vec<f64> = records.iter().map(|rec| rec.ratios[name][k]).collect();
            let s = Summary::of(&EmpiricalSample::from_vec(vals)?);
            medians.push(s.median);
            rows.push(RateRow {
                metric: name.into(),
                t,
                rate_exponent: r,
                median: s.median,
                q25: s.q25,
                q75: s.q75,
            });
        }
        decreasing.insert(
            name.to_string(),
            medians.len() >= 2 && medians[medians.len() - 1] < medians[0],
        );
    }
    Ok(RateResult {
        experiment: "rate".into(),
        config_digest: config.digest()?,
        model_kind: config.model.kind.clone(),
        replications: config.replications,
        rows,
        decreasing,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRecord {
    pub replication_index: usize,
    pub seed: u64,
    pub sup_abs_q: f64,
    /// `None` when the renewal fluctuation is degenerate.
    pub ratio_statistic: Option<f64>,
}

impl Indexed for EnvelopeRecord {
    fn index(&self) -> usize {
        self.replication_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub lambda: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub experiment: String,
    pub config_digest: String,
    pub model_kind: String,
    #[serde(rename = "T")]
    pub t: u64,
    pub replications: usize,
    pub envelope: f64,
    pub exceedance: Vec<Exceedance>,
    pub monotone_in_lambda: bool,
    /// Quartiles of the ratio statistic over paths, when defined.
    pub ratio_summary: Option<Summary>,
    /// `σ/√μ`, the almost sure limit of the ratio statistic (weak models).
    pub ratio_target: Option<f64>,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub records: Vec<EnvelopeRecord>,
}

/// The envelope at `T` that a path's `sup |Q|` is compared against.
pub fn envelope_for(config: &ExperimentConfig, moments: &ModelMoments) -> Result<f64> {
    let t = config.t as f64;
    match moments.long_run {
        LongRun::Weak { sigma } => lil_envelope_iid(t, moments.mu, sigma),
        LongRun::LongRange {
            params: Some(p), ..
        } => lil_envelope_lrd(t, &p),
        LongRun::LongRange { params: None, .. } => {
            Err(Error::invalid("c", "envelope needs a nonzero scale"))
        }
    }
}

/// Fraction of paths whose `sup |Q|` exceeds `λ` times the envelope.
pub fn run_envelope_experiment(
    config: &ExperimentConfig,
    registry: &ModelRegistry,
    options: &RunOptions,
) -> Result<EnvelopeResult> {
    let start = Instant::now();
    let config = config.resolve(registry)?;
    let options = options.for_config(&config);
    let model = build_model(&config, registry)?;
    let moments = model.moments();
    let envelope = envelope_for(&config, &moments)?;
    let target = LimitTarget::new(&config, &moments)?;
    let records = run_replications("envelope", &config, &options, |i, seed| {
        let n = default_horizon(target.level, moments.mu).max(target.q_time.ceil() as usize + 1);
        let series = with_growing_horizon(model.as_ref(), n, seed, |p| {
            q_process(p.sum(), &[target.q_time])
        })?;
        let ratio = match ratio_statistic(&series, target.level) {
            Ok(v) => Some(v),
            Err(Error::DegenerateRenewal { .. }) | Err(Error::InvalidParameter { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(EnvelopeRecord {
            replication_index: i,
            seed,
            sup_abs_q: series.sup_abs_q,
            ratio_statistic: ratio,
        })
    })?;
    let mut lambdas = config.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    let exceedance: Vec<Exceedance> = lambdas
        .iter()
        .map(|&lambda| Exceedance {
            lambda,
            fraction: records
                .iter()
                .filter(|r| r.sup_abs_q > lambda * envelope)
                .count() as f64
                / records.len() as f64,
        })
        .collect();
    let monotone_in_lambda = exceedance
        .windows(2)
        .all(|w| w[0].fraction >= w[1].fraction);
    let ratios: Vec<f64> = records.iter().filter_map(|r| r.ratio_statistic).collect();
    let ratio_summary = if ratios.is_empty() {
        None
    } else {
        Some(Summary::of(&EmpiricalSample::from_vec(ratios)?))
    };
    let ratio_target = match moments.long_run {
        LongRun::Weak { sigma } => Some(sigma / moments.mu.sqrt()),
        LongRun::LongRange { .. } => None,
    };
    Ok(EnvelopeResult {
        experiment: "envelope".into(),
        config_digest: config.digest()?,
        model_kind: config.model.kind.clone(),
        t: config.t,
        replications: config.replications,
        envelope,
        exceedance,
        monotone_in_lambda,
        ratio_summary,
        ratio_target,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        records,
    })
}

/// Formats a float for CSV output: shortest round-trip decimal.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// `samples.csv`: `replication_index,seed,raw_q,normalized_q`.
pub fn samples_csv(records: &[LimitRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["replication_index", "seed", "raw_q", "normalized_q"])
        .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.replication_index.to_string(),
            r.seed.to_string(),
            fmt_f64(r.raw_q),
            fmt_f64(r.normalized_q),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes a CSV with the given header and rows atomically.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Writes pretty JSON atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
