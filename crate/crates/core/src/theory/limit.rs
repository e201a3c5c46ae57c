//! Limiting distributions of the normalised `Q` process and exact samplers
//! that act as oracles for them.
//!
//! Both limit laws are normal variance mixtures,
//!
//! ```text
//! weak dependence:  T^{-1/4} |Q(T/μ)|   →  (σ^{3/2}/μ^{3/4}) |X|^{1/2} |Z|
//! long range:       T^{-H²}  Q(T)        →  |c|^{1+H} μ^{-H} |X|^{H} Z
//! ```
//!
//! with `X, Z` independent standard normals and `H = 1 - α/2`. The CDFs are
//! one-dimensional integrals over `x` of `φ(x) Φ(b |x|^{-p})`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_kronrod, norm_cdf, norm_pdf, AdaptiveSettings};
use crate::theory::TheoryParams;

/// Quadrature settings for the mixture integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfQuadrature {
    /// The outer integral runs over `|x| <= outer_limit`.
    pub outer_limit: f64,
    /// Below this `|x|` the substitution `x = v²` is applied.
    pub split: f64,
    pub initial_panels: usize,
    pub abs_tol: f64,
}

impl Default for CdfQuadrature {
    fn default() -> Self {
        Self {
            outer_limit: 8.0,
            split: 1e-3,
            initial_panels: 4,
            abs_tol: 1e-12,
        }
    }
}

impl CdfQuadrature {
    /// Same rule with twice the initial panels and a tighter tolerance.
    pub fn refined(&self) -> Self {
        Self {
            initial_panels: self.initial_panels * 2,
            abs_tol: self.abs_tol * 0.1,
            ..*self
        }
    }
}

/// `∫_0^∞ φ(x) Φ(b x^{-p}) dx` for `p > 0`.
fn half_line_mixture(b: f64, p: f64, q: &CdfQuadrature) -> Result<f64> {
    if b == 0.0 {
        return Ok(0.25);
    }
    let settings = AdaptiveSettings {
        abs_tol: q.abs_tol,
        rel_tol: 0.0,
        initial_panels: q.initial_panels,
        max_panels: 4000,
    };
    let inner = gauss_kronrod(
        |v: f64| 2.0 * v * norm_pdf(v * v) * norm_cdf(b * v.powf(-2.0 * p)),
        0.0,
        q.split.sqrt(),
        &settings,
    )?;
    let outer = gauss_kronrod(
        |x: f64| norm_pdf(x) * norm_cdf(b * x.powf(-p)),
        q.split,
        q.outer_limit,
        &settings,
    )?;
    // Beyond the cut-off Φ(b x^{-p}) is flat to within the Gaussian tail.
    let tail = norm_cdf(b * q.outer_limit.powf(-p)) * norm_cdf(-q.outer_limit);
    Ok(inner.value + outer.value + tail)
}

fn check_mu_sigma(mu: f64, sigma: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::NonpositiveMean { mu });
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("{sigma} must be positive")));
    }
    Ok(())
}

fn iid_cdf(y: f64, mu: f64, sigma: f64, q: &CdfQuadrature) -> Result<f64> {
    if y <= 0.0 {
        // The limit is nonnegative; at 0 the mixture gives 2·½ − 1 = 0.
        return Ok(0.0);
    }
    let a = y * mu.powf(0.75) / sigma.powf(1.5);
    let v = 4.0 * half_line_mixture(a, 0.5, q)? - 1.0;
    Ok(v.clamp(0.0, 1.0))
}

fn lrd_cdf(y: f64, params: &TheoryParams, q: &CdfQuadrature) -> Result<f64> {
    let h = params.hurst;
    let b = y * params.mu.powf(h) / params.c.abs().powf(1.0 + h);
    let v = 2.0 * half_line_mixture(b, h, q)?;
    Ok(v.clamp(0.0, 1.0))
}

/// `2 ∫ Φ(y μ^{3/4} σ^{-3/2} |x|^{-1/2}) φ(x) dx − 1` for `y >= 0`; zero for
/// negative `y` since the limit is that of `|Q|`.
pub fn limit_cdf_iid(y: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_mu_sigma(mu, sigma)?;
    iid_cdf(y, mu, sigma, &CdfQuadrature::default())
}

/// `∫ φ(x) Φ(y σ^{2-α/2} μ^{1-α/2} / (|x|^{1-α/2} (J1 κ_α)^{2-α/2})) dx`.
/// Only the magnitude of `J1 κ_α` enters.
pub fn limit_cdf_lrd(y: f64, params: &TheoryParams) -> Result<f64> {
    params.require_alpha_domain()?;
    lrd_cdf(y, params, &CdfQuadrature::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LimitKind {
    /// Limit of `T^{-1/4} |Q(T/μ)|`.
    IidKiefer { mu: f64, sigma: f64 },
    /// Limit of `T^{-(1-α/2)²} Q(T)`.
    LrdKiefer { params: TheoryParams },
}

/// A limit CDF with validated parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCdf {
    pub kind: LimitKind,
    pub quadrature: CdfQuadrature,
}

impl LimitCdf {
    pub fn iid(mu: f64, sigma: f64) -> Result<Self> {
        check_mu_sigma(mu, sigma)?;
        Ok(Self {
            kind: LimitKind::IidKiefer { mu, sigma },
            quadrature: CdfQuadrature::default(),
        })
    }

    pub fn lrd(params: TheoryParams) -> Result<Self> {
        params.require_alpha_domain()?;
        Ok(Self {
            kind: LimitKind::LrdKiefer { params },
            quadrature: CdfQuadrature::default(),
        })
    }

    pub fn with_quadrature(mut self, quadrature: CdfQuadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn try_cdf(&self, y: f64) -> Result<f64> {
        match &self.kind {
            LimitKind::IidKiefer { mu, sigma } => iid_cdf(y, *mu, *sigma, &self.quadrature),
            LimitKind::LrdKiefer { params } => lrd_cdf(y, params, &self.quadrature),
        }
    }

    /// # Panics
    /// If the adaptive quadrature exhausts its panel budget, which the
    /// default settings do not reach for finite `y`.
    pub fn cdf(&self, y: f64) -> f64 {
        self.try_cdf(y).expect("limit CDF quadrature")
    }
}

/// Samples of `(σ^{3/2}/μ^{3/4}) |X|^{1/2} |Z|`, whose law is the weakly
/// dependent limit.
pub fn iid_limit_sampler(mu: f64, sigma: f64, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    check_mu_sigma(mu, sigma)?;
    let scale = sigma.powf(1.5) / mu.powf(0.75);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_samples)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * x.abs().sqrt() * z.abs()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrelimitSample {
    pub values: Vec<f64>,
    /// Draws where `u = 1 - c1 X T^{-α/2}` was not positive; there the
    /// fBm value at `u` is taken as zero.
    pub clamped: usize,
}

/// One draw of `W̃(1) − W̃(u)` with `u = 1 − c1 x T^{-α/2}`, given
/// `W̃(1) = x` and an independent normal `z`.
///
/// `W̃(u) | W̃(1) = x` is normal with mean `r σ₂ x` and variance
/// `σ₂² (1 − r²)`, `σ₂ = u^H`, `r σ₂ = (1 + u^{2H} − |1−u|^{2H})/2`. The
/// differences are formed without cancellation near `u = 1`.
fn conditional_increment(x: f64, z: f64, shift: f64, h: f64) -> Option<f64> {
    let one_minus_u = shift * x;
    if one_minus_u >= 1.0 {
        return None;
    }
    let ln_u = (-one_minus_u).ln_1p();
    let one_minus_p = -(2.0 * h * ln_u).exp_m1(); // 1 − u^{2H}
    let one_minus_uh = -(h * ln_u).exp_m1(); // 1 − u^H
    let d = one_minus_u.abs().powf(2.0 * h); // |1 − u|^{2H}
    let p = 1.0 - one_minus_p;
    let uh = 1.0 - one_minus_uh;
    let one_minus_cov = 0.5 * (one_minus_p + d);
    let var = 0.25 * (d - one_minus_uh * one_minus_uh) * (2.0 * uh + 1.0 + p - d);
    Some(x * one_minus_cov + var.max(0.0).sqrt() * z)
}

/// Exact samples of `c (W̃(1) − W̃(1 − c1 W̃(1) T^{-α/2}))` scaled by
/// `T^{α/2 − α²/4}`, i.e. on the scale of `Q(T) T^{-(1-α/2)²}`.
pub fn prelimit_lrd_sampler(
    t: f64,
    params: &TheoryParams,
    n_samples: usize,
    seed: u64,
) -> Result<PrelimitSample> {
    if !(t > 1.0) {
        return Err(Error::invalid("T", format!("{t} must exceed 1")));
    }
    let a = params.alpha;
    let h = params.hurst;
    let shift = params.c1() * t.powf(-a / 2.0);
    let scale = params.c * t.powf(a / 2.0 - a * a / 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clamped = 0;
    let values = (0..n_samples)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            let d = conditional_increment(x, z, shift, h).unwrap_or_else(|| {
                clamped += 1;
                x
            });
            scale * d
        })
        .collect();
    Ok(PrelimitSample { values, clamped })
}
