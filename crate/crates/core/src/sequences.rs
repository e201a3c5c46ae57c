//! Generators for the summand sequences `Y_1, Y_2, …` and their moments.
//!
//! Weakly dependent models (i.i.d., MA(q), AR(1)) carry a closed-form
//! long-run standard deviation. The long-range dependent model is a
//! Gaussian moving average `η_j = Σ_k ψ_k ξ_{j−k}` with `ψ_0 = 1`,
//! `ψ_k = k^{-(1+α)/2}`, truncated at lag `K`, standardised and passed
//! through a Hermite-rank-one function `G`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal, Uniform};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::FbmPath;
use crate::quadrature::GaussHermite;
use crate::theory::TheoryParams;

/// Cap on `n + K` for the moving-average generator.
pub const MAX_ETA_LENGTH: usize = 1 << 27;

/// Below this many multiply-adds the moving average is convolved directly.
pub const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 20;

/// Default truncation floor for the moving average.
pub const DEFAULT_MIN_TRUNCATION: usize = 1 << 16;

/// `|J1|` below this fails the Hermite-rank-one requirement.
pub const HERMITE_RANK_TOLERANCE: f64 = 1e-8;

const GAUSS_HERMITE_NODES: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub alpha: f64,
    pub truncation: usize,
}

impl WeightSpec {
    pub fn new(alpha: f64, truncation: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("{alpha} is not in (0, 1)")));
        }
        if truncation == 0 {
            return Err(Error::invalid("truncation", "K must be at least 1"));
        }
        Ok(Self { alpha, truncation })
    }

    /// `Σ_{k>K} ψ_k² ≈ K^{-α}/α`, the variance dropped by truncating.
    pub fn tail_variance(&self) -> f64 {
        (self.truncation as f64).powf(-self.alpha) / self.alpha
    }
}

/// `ψ_0 = 1`, `ψ_k = k^{-(1+α)/2}` for `1 <= k <= K`.
pub fn weights(spec: &WeightSpec) -> Vec<f64> {
    let p = -(1.0 + spec.alpha) / 2.0;
    std::iter::once(1.0)
        .chain((1..=spec.truncation).map(|k| (k as f64).powf(p)))
        .collect()
}

/// `sqrt(Σ ψ_k²)`.
pub fn sigma_eta(weights: &[f64]) -> f64 {
    weights.iter().map(|w| w * w).sum::<f64>().sqrt()
}

struct FftCache {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel: Vec<Complex<f64>>,
}

/// Moving-average generator with a cached weight spectrum per FFT size.
pub struct EtaGenerator {
    spec: WeightSpec,
    weights: Vec<f64>,
    sigma: f64,
    cache: Mutex<HashMap<usize, Arc<FftCache>>>,
}

impl fmt::Debug for EtaGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EtaGenerator")
            .field("spec", &self.spec)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl EtaGenerator {
    pub fn new(spec: WeightSpec) -> Self {
        let weights = weights(&spec);
        let sigma = sigma_eta(&weights);
        Self {
            spec,
            weights,
            sigma,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn fft_for(&self, size: usize) -> Arc<FftCache> {
        let mut cache = self.cache.lock().expect("fft cache poisoned");
        cache
            .entry(size)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                let forward = planner.plan_fft_forward(size);
                let inverse = planner.plan_fft_inverse(size);
                let mut kernel = vec![Complex::new(0.0, 0.0); size];
                for (slot, &w) in kernel.iter_mut().zip(&self.weights) {
                    slot.re = w;
                }
                forward.process(&mut kernel);
                Arc::new(FftCache {
                    forward,
                    inverse,
                    kernel,
                })
            })
            .clone()
    }

    /// The `n + K` standard normals `ξ_{−K}, …, ξ_{n−1}` in index order.
    pub fn noise(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let len = n + self.spec.truncation;
        if len > MAX_ETA_LENGTH {
            return Err(Error::SizeLimit {
                requested: len,
                limit: MAX_ETA_LENGTH,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..len).map(|_| StandardNormal.sample(&mut rng)).collect())
    }

    /// `η_0, …, η_{n−1}`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one value"));
        }
        let xi = self.noise(n, seed)?;
        Ok(self.convolve(&xi, n))
    }

    /// `η_j = Σ_k ψ_k xi[j + K − k]`; direct for small products, FFT otherwise.
    pub fn convolve(&self, xi: &[f64], n: usize) -> Vec<f64> {
        let k = self.spec.truncation;
        debug_assert_eq!(xi.len(), n + k);
        if n.saturating_mul(k + 1) <= DIRECT_CONVOLUTION_LIMIT {
            return convolve_direct(&self.weights, xi, n);
        }
        // Circular convolution of length >= n + K never wraps into the
        // outputs j + K, j < n.
        let size = (n + k).next_power_of_two();
        let fft = self.fft_for(size);
        let mut buf: Vec<Complex<f64>> = xi
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(size)
            .collect();
        fft.forward.process(&mut buf);
        for (b, w) in buf.iter_mut().zip(&fft.kernel) {
            *b *= w;
        }
        fft.inverse.process(&mut buf);
        let scale = 1.0 / size as f64;
        buf[k..k + n].iter().map(|c| c.re * scale).collect()
    }
}

fn convolve_direct(weights: &[f64], xi: &[f64], n: usize) -> Vec<f64> {
    let k = weights.len() - 1;
    (0..n)
        .map(|j| {
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * xi[j + k - i])
                .sum()
        })
        .collect()
}

/// Moving average `η_0..η_{n−1}` for the given weights; deterministic in the seed.
pub fn generate_eta(spec: &WeightSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    EtaGenerator::new(*spec).generate(n, seed)
}

/// A user supplied `G`, integrated by Gauss–Hermite quadrature.
#[derive(Clone)]
pub struct TabulatedG {
    pub label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl TabulatedG {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for TabulatedG {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TabulatedG({})", self.label)
    }
}

/// The subordinating function `G`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GSpec {
    /// `G(x) = mu0 + x`.
    Shift { mu0: f64 },
    /// `G(x) = exp(λ x)`.
    #[serde(rename = "exp")]
    ExpG { lambda: f64 },
    #[serde(skip)]
    Tabulated(TabulatedG),
}

impl Default for GSpec {
    fn default() -> Self {
        GSpec::Shift { mu0: 1.0 }
    }
}

impl GSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            GSpec::Shift { mu0 } => mu0 + x,
            GSpec::ExpG { lambda } => (lambda * x).exp(),
            GSpec::Tabulated(t) => (t.f)(x),
        }
    }

    /// The same function wrapped as [`GSpec::Tabulated`], forcing the
    /// quadrature route.
    pub fn as_tabulated(&self) -> GSpec {
        let me = self.clone();
        GSpec::Tabulated(TabulatedG::new(format!("{me:?}"), move |x| me.eval(x)))
    }

    /// `Var G(Z)` for a standard normal `Z`.
    pub fn variance(&self) -> Result<f64> {
        Ok(match self {
            GSpec::Shift { .. } => 1.0,
            GSpec::ExpG { lambda } => {
                let l2 = lambda * lambda;
                (2.0 * l2).exp() - l2.exp()
            }
            GSpec::Tabulated(t) => {
                let gh = GaussHermite::new(GAUSS_HERMITE_NODES)?;
                let m = gh.expect_normal(|z| (t.f)(z));
                gh.expect_normal(|z| (t.f)(z).powi(2)) - m * m
            }
        })
    }
}

/// `Y_j = G(η̃_j)`.
pub fn subordinate(eta_tilde: &[f64], g: &GSpec) -> Vec<f64> {
    eta_tilde.iter().map(|&x| g.eval(x)).collect()
}

/// `(J1, μ) = (E[G(Z) Z], E[G(Z)])`.
pub fn j1_mu_of(g: &GSpec) -> Result<(f64, f64)> {
    let (j1, mu) = match g {
        GSpec::Shift { mu0 } => (1.0, *mu0),
        GSpec::ExpG { lambda } => {
            let m = (0.5 * lambda * lambda).exp();
            (lambda * m, m)
        }
        GSpec::Tabulated(t) => {
            let gh = GaussHermite::new(GAUSS_HERMITE_NODES)?;
            (
                gh.expect_normal(|z| (t.f)(z) * z),
                gh.expect_normal(|z| (t.f)(z)),
            )
        }
    };
    if !(j1.abs() >= HERMITE_RANK_TOLERANCE) {
        return Err(Error::HermiteRank { j1 });
    }
    if !(mu > 0.0) {
        return Err(Error::NonpositiveMean { mu });
    }
    Ok((j1, mu))
}

/// How the partial sums fluctuate at large scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum LongRun {
    /// Brownian scaling with long-run standard deviation `sigma`.
    Weak { sigma: f64 },
    /// Fractional Brownian scaling `c W_{1−α/2}`. `params` is absent only
    /// in the degenerate coupled case `c = 0`.
    LongRange {
        alpha: f64,
        c: f64,
        params: Option<TheoryParams>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMoments {
    pub mu: f64,
    pub sigma_marginal: f64,
    pub long_run: LongRun,
}

/// Output of one model draw: `Y_1..Y_n`, plus the Gaussian driver for
/// coupled models.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub y: Vec<f64>,
    pub driver: Option<FbmPath>,
}

/// A named generator of summand sequences.
pub trait SequenceModel: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;
    fn moments(&self) -> ModelMoments;
    /// `Y_1..Y_n`, deterministic in `seed`.
    fn generate(&self, n: usize, seed: u64) -> Result<Realization>;
}

/// Draws `Y_1..Y_n` from a weakly dependent model.
pub fn generate_weak<M: SequenceModel + ?Sized>(
    model: &M,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one value"));
    }
    if !matches!(model.moments().long_run, LongRun::Weak { .. }) {
        return Err(Error::invalid(
            "model",
            format!("`{}` is not weakly dependent", model.kind()),
        ));
    }
    Ok(model.generate(n, seed)?.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IidDistribution {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    ShiftedUniform { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct IidModel {
    distribution: IidDistribution,
    mu: f64,
    sd: f64,
}

impl IidModel {
    pub fn new(distribution: IidDistribution) -> Result<Self> {
        let (mu, sd) = match distribution {
            IidDistribution::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::invalid("rate", format!("{rate} must be positive")));
                }
                (1.0 / rate, 1.0 / rate)
            }
            IidDistribution::Gamma { shape, rate } => {
                if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
                    return Err(Error::invalid("gamma", "shape and rate must be positive"));
                }
                (shape / rate, shape.sqrt() / rate)
            }
            IidDistribution::ShiftedUniform { a, b } => {
                if !(a < b && a.is_finite() && b.is_finite()) {
                    return Err(Error::invalid(
                        "uniform",
                        format!("need a < b, got ({a}, {b})"),
                    ));
                }
                (0.5 * (a + b), (b - a) / 12f64.sqrt())
            }
        };
        if !(mu > 0.0) {
            return Err(Error::NonpositiveMean { mu });
        }
        Ok(Self {
            distribution,
            mu,
            sd,
        })
    }
}

impl SequenceModel for IidModel {
    fn kind(&self) -> &'static str {
        "iid"
    }

    fn moments(&self) -> ModelMoments {
        ModelMoments {
            mu: self.mu,
            sigma_marginal: self.sd,
            long_run: LongRun::Weak { sigma: self.sd },
        }
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Realization> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = match self.distribution {
            IidDistribution::Exponential { rate } => {
                let d = Exp::new(rate).map_err(|e| Error::invalid("rate", e.to_string()))?;
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            IidDistribution::Gamma { shape, rate } => {
                let d = Gamma::new(shape, 1.0 / rate)
                    .map_err(|e| Error::invalid("gamma", e.to_string()))?;
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            IidDistribution::ShiftedUniform { a, b } => {
                let d = Uniform::new(a, b).map_err(|e| Error::invalid("uniform", e.to_string()))?;
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
        };
        Ok(Realization { y, driver: None })
    }
}

/// `Y_j = m + s Σ_{i=0}^q θ_i ε_{j−i}`.
#[derive(Debug, Clone)]
pub struct MaModel {
    innovation_sd: f64,
    coefficients: Vec<f64>,
    shift: f64,
}

impl MaModel {
    pub fn new(innovation_sd: f64, coefficients: Vec<f64>, shift: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("coefficients", "need theta_0"));
        }
        if !(innovation_sd > 0.0) {
            return Err(Error::invalid(
                "innovation_sd",
                format!("{innovation_sd} must be positive"),
            ));
        }
        if !(shift > 0.0) {
            return Err(Error::NonpositiveMean { mu: shift });
        }
        let m = Self {
            innovation_sd,
            coefficients,
            shift,
        };
        if !(m.long_run_sd() > 0.0) {
            return Err(Error::invalid(
                "coefficients",
                "sum of coefficients must be nonzero",
            ));
        }
        Ok(m)
    }

    pub fn long_run_sd(&self) -> f64 {
        self.innovation_sd * self.coefficients.iter().sum::<f64>().abs()
    }
}

impl SequenceModel for MaModel {
    fn kind(&self) -> &'static str {
        "ma"
    }

    fn moments(&self) -> ModelMoments {
        ModelMoments {
            mu: self.shift,
            sigma_marginal: self.innovation_sd * sigma_eta(&self.coefficients),
            long_run: LongRun::Weak {
                sigma: self.long_run_sd(),
            },
        }
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Realization> {
        let q = self.coefficients.len() - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<f64> = (0..n + q)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let y = (0..n)
            .map(|j| {
                let lin: f64 = self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, th)| th * eps[j + q - i])
                    .sum();
                self.shift + self.innovation_sd * lin
            })
            .collect();
        Ok(Realization { y, driver: None })
    }
}

/// `Y_j = m + X_j`, `X_j = ρ X_{j−1} + s ε_j`, started in stationarity.
#[derive(Debug, Clone, Copy)]
pub struct Ar1Model {
    rho: f64,
    innovation_sd: f64,
    shift: f64,
}

impl Ar1Model {
    pub fn new(rho: f64, innovation_sd: f64, shift: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::invalid("rho", format!("{rho} is not in (-1, 1)")));
        }
        if !(innovation_sd > 0.0) {
            return Err(Error::invalid(
                "innovation_sd",
                format!("{innovation_sd} must be positive"),
            ));
        }
        if !(shift > 0.0) {
            return Err(Error::NonpositiveMean { mu: shift });
        }
        Ok(Self {
            rho,
            innovation_sd,
            shift,
        })
    }
}

impl SequenceModel for Ar1Model {
    fn kind(&self) -> &'static str {
        "ar1"
    }

    fn moments(&self) -> ModelMoments {
        ModelMoments {
            mu: self.shift,
            sigma_marginal: self.innovation_sd / (1.0 - self.rho * self.rho).sqrt(),
            long_run: LongRun::Weak {
                sigma: self.innovation_sd / (1.0 - self.rho),
            },
        }
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Realization> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z0: f64 = StandardNormal.sample(&mut rng);
        let mut x = z0 * self.innovation_sd / (1.0 - self.rho * self.rho).sqrt();
        let y = (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = self.rho * x + self.innovation_sd * e;
                self.shift + x
            })
            .collect();
        Ok(Realization { y, driver: None })
    }
}

/// `Y_j = G(η_j / σ)` with the truncated long-memory moving average.
#[derive(Debug)]
pub struct LrdModel {
    g: GSpec,
    eta: EtaGenerator,
    j1: f64,
    mu: f64,
    sigma_marginal: f64,
    params: TheoryParams,
}

impl LrdModel {
    pub fn new(weights: WeightSpec, g: GSpec) -> Result<Self> {
        let (j1, mu) = j1_mu_of(&g)?;
        let eta = EtaGenerator::new(weights);
        let params = TheoryParams::new(weights.alpha, mu, eta.sigma(), j1)?;
        let sigma_marginal = g.variance()?.sqrt();
        Ok(Self {
            g,
            eta,
            j1,
            mu,
            sigma_marginal,
            params,
        })
    }

    pub fn params(&self) -> &TheoryParams {
        &self.params
    }

    pub fn weight_spec(&self) -> &WeightSpec {
        self.eta.spec()
    }

    pub fn j1(&self) -> f64 {
        self.j1
    }

    /// Variance of `η` lost to truncation.
    pub fn tail_variance(&self) -> f64 {
        self.eta.spec().tail_variance()
    }
}

impl SequenceModel for LrdModel {
    fn kind(&self) -> &'static str {
        "lrd"
    }

    fn moments(&self) -> ModelMoments {
        ModelMoments {
            mu: self.mu,
            sigma_marginal: self.sigma_marginal,
            long_run: LongRun::LongRange {
                alpha: self.params.alpha,
                c: self.params.c,
                params: Some(self.params),
            },
        }
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Realization> {
        let eta = self.eta.generate(n, seed)?;
        let inv = 1.0 / self.eta.sigma();
        let y = eta.into_iter().map(|e| self.g.eval(e * inv)).collect();
        Ok(Realization { y, driver: None })
    }
}
