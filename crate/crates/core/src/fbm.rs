//! Fractional Gaussian noise and fractional Brownian motion on the unit grid.
//!
//! Two generators sit behind [`FgnGenerator`]: circulant embedding
//! (Davies–Harte, the default) and an exact sequential Toeplitz factorisation
//! used as a small-n oracle. Both are looked up by name in a
//! [`GeneratorRegistry`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for negative circulant eigenvalues.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-10;

/// Largest length accepted by the sequential generator.
pub const CHOLESKY_MAX_LENGTH: usize = 4096;

/// Hurst index in `[1/2, 1)`; `1/2` is the Wiener case.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&h) {
            return Err(Error::invalid("hurst", format!("{h} is not in [1/2, 1)")));
        }
        Ok(Self(h))
    }

    /// The Wiener case `H = 1/2`.
    pub fn wiener() -> Self {
        Self(0.5)
    }

    /// `H = 1 - alpha/2`, the index attached to covariance decay `n^-alpha`.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("{alpha} is not in (0, 1)")));
        }
        Self::new(1.0 - alpha / 2.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

impl fmt::Display for HurstParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H={}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgnSpec {
    pub hurst: HurstParam,
    pub length: usize,
    pub seed: u64,
}

impl FgnSpec {
    pub fn new(hurst: HurstParam, length: usize, seed: u64) -> Result<Self> {
        if length == 0 {
            return Err(Error::invalid("length", "fGn length must be at least 1"));
        }
        Ok(Self {
            hurst,
            length,
            seed,
        })
    }
}

/// Values of `W_H` at integer times `0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    values: Vec<f64>,
    hurst: HurstParam,
}

/// Result of evaluating a path at a real time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathValue {
    pub value: f64,
    /// Set when `t` lies beyond the last grid point and the value was clamped.
    pub out_of_range: bool,
}

impl FbmPath {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    /// Last grid time `T`.
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// Linear interpolation between grid points. Negative times map to zero;
    /// times past `T` return `values[T]` with the out-of-range flag.
    pub fn at_real_time(&self, t: f64) -> PathValue {
        if t.is_nan() || t <= 0.0 {
            return PathValue {
                value: 0.0,
                out_of_range: false,
            };
        }
        let last = self.horizon();
        if t >= last as f64 {
            return PathValue {
                value: self.values[last],
                out_of_range: t > last as f64,
            };
        }
        let i = t.floor() as usize;
        let frac = t - i as f64;
        let value = if frac == 0.0 {
            self.values[i]
        } else {
            self.values[i] + frac * (self.values[i + 1] - self.values[i])
        };
        PathValue {
            value,
            out_of_range: false,
        }
    }
}

/// `E W_H(s) W_H(t)`.
pub fn fbm_covariance(s: f64, t: f64, hurst: HurstParam) -> f64 {
    let two_h = 2.0 * hurst.value();
    0.5 * (s.powf(two_h) + t.powf(two_h) - (s - t).abs().powf(two_h))
}

/// Autocovariance of unit-spaced increments at `lag`.
pub fn fgn_autocovariance(lag: usize, hurst: HurstParam) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let two_h = 2.0 * hurst.value();
    let k = lag as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).powf(two_h))
}

/// Cumulative sum with a leading zero.
pub fn fgn_to_fbm(increments: &[f64], hurst: HurstParam) -> FbmPath {
    let mut values = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    values.push(acc);
    for &x in increments {
        acc += x;
        values.push(acc);
    }
    FbmPath { values, hurst }
}

/// Circulant embedding of the fGn covariance of length `n`, ready to sample.
pub struct CirculantEmbedding {
    n: usize,
    hurst: HurstParam,
    /// `sqrt(lambda_k / m)` for the `m = 2n` circulant eigenvalues.
    scaled_roots: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantEmbedding")
            .field("n", &self.n)
            .field("hurst", &self.hurst)
            .finish()
    }
}

impl CirculantEmbedding {
    pub fn new(n: usize, hurst: HurstParam) -> Result<Self> {
        let eig = circulant_eigenvalues(n, hurst)?;
        let m = eig.len();
        let scaled_roots = eig
            .iter()
            .map(|&l| (l.max(0.0) / m as f64).sqrt())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        Ok(Self {
            n,
            hurst,
            scaled_roots,
            fft,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    /// One exact fGn sample of length `n`.
    ///
    /// Normals are consumed in a fixed order: the real parts at `k = 0` and
    /// `k = n`, then `(re, im)` pairs for `k = 1..n`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.n;
        let m = 2 * n;
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        let z0: f64 = StandardNormal.sample(rng);
        let zn: f64 = StandardNormal.sample(rng);
        buf[0] = Complex::new(self.scaled_roots[0] * z0, 0.0);
        buf[n] = Complex::new(self.scaled_roots[n] * zn, 0.0);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for k in 1..n {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let r = self.scaled_roots[k] * inv_sqrt2;
            buf[k] = Complex::new(r * re, r * im);
            buf[m - k] = buf[k].conj();
        }
        self.fft.process(&mut buf);
        buf.truncate(n);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Eigenvalues of the `2n` circulant that embeds the fGn covariance.
///
/// Fails if any eigenvalue is below `-EIGENVALUE_TOLERANCE * max`; small
/// negative round-off is returned as is.
pub fn circulant_eigenvalues(n: usize, hurst: HurstParam) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("length", "fGn length must be at least 1"));
    }
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(fgn_autocovariance(lag, hurst), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    let eig: Vec<f64> = row.into_iter().map(|c| c.re).collect();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    if let Some(&bad) = eig.iter().find(|&&l| l < -EIGENVALUE_TOLERANCE * max) {
        return Err(Error::Embedding {
            value: bad,
            tolerance: EIGENVALUE_TOLERANCE,
        });
    }
    Ok(eig)
}

/// Circulant-embedding fGn; deterministic given the seed.
pub fn generate_fgn(spec: &FgnSpec) -> Result<Vec<f64>> {
    let emb = CirculantEmbedding::new(spec.length, spec.hurst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(emb.sample(&mut rng))
}

/// Exact fGn by sequential factorisation of the Toeplitz covariance
/// (Durbin–Levinson), `O(n²)`. The innovation form it produces is the
/// Cholesky factor `L` in `Σ = L Lᵀ` applied to i.i.d. normals.
pub fn generate_fgn_cholesky(spec: &FgnSpec) -> Result<Vec<f64>> {
    let n = spec.length;
    if n > CHOLESKY_MAX_LENGTH {
        return Err(Error::SizeLimit {
            requested: n,
            limit: CHOLESKY_MAX_LENGTH,
        });
    }
    let gamma: Vec<f64> = (0..=n).map(|k| fgn_autocovariance(k, spec.hurst)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(n);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    let mut var = gamma[0];
    for t in 0..n {
        if t > 0 {
            // Extend the order-(t-1) predictor to order t.
            let num = gamma[t] - (0..t - 1).map(|j| phi[j] * gamma[t - 1 - j]).sum::<f64>();
            let k = num / var;
            prev.clear();
            prev.extend_from_slice(&phi);
            for j in 0..t - 1 {
                phi[j] = prev[j] - k * prev[t - 2 - j];
            }
            phi.push(k);
            var *= 1.0 - k * k;
        }
        let mean: f64 = (0..t).map(|j| phi[j] * out[t - 1 - j]).sum();
        let z: f64 = StandardNormal.sample(&mut rng);
        out.push(mean + var.max(0.0).sqrt() * z);
    }
    Ok(out)
}

/// A named fGn sampling strategy.
pub trait FgnGenerator: Send + Sync {
    fn name(&self) -> &'static str;
    fn generate(&self, spec: &FgnSpec) -> Result<Vec<f64>>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DaviesHarte;

impl FgnGenerator for DaviesHarte {
    fn name(&self) -> &'static str {
        "davies-harte"
    }
    fn generate(&self, spec: &FgnSpec) -> Result<Vec<f64>> {
        generate_fgn(spec)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Cholesky;

impl FgnGenerator for Cholesky {
    fn name(&self) -> &'static str {
        "cholesky"
    }
    fn generate(&self, spec: &FgnSpec) -> Result<Vec<f64>> {
        generate_fgn_cholesky(spec)
    }
}

/// Name → generator lookup.
#[derive(Clone)]
pub struct GeneratorRegistry {
    inner: BTreeMap<&'static str, Arc<dyn FgnGenerator>>,
}

impl GeneratorRegistry {
    pub fn empty() -> Self {
        Self {
            inner: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, generator: Arc<dyn FgnGenerator>) {
        self.inner.insert(generator.name(), generator);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn FgnGenerator>> {
        self.inner
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName {
                what: "fGn generator",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.inner.keys().copied()
    }
}

impl Default for GeneratorRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(DaviesHarte));
        r.register(Arc::new(Cholesky));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(x: f64) -> HurstParam {
        HurstParam::new(x).unwrap()
    }

    #[test]
    fn covariance_examples() {
        assert!((fbm_covariance(2.0, 2.0, h(0.75)) - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((fbm_covariance(1.0, 1.0, h(0.6)) - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(1.0, 3.0, h(0.5)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn autocovariance_examples() {
        assert_eq!(fgn_autocovariance(0, h(0.8)), 1.0);
        assert!((fgn_autocovariance(1, h(0.75)) - 0.5 * (2f64.powf(1.5) - 2.0)).abs() < 1e-15);
        assert!((fgn_autocovariance(1, h(0.75)) - 0.414_214).abs() < 1e-6);
        assert_eq!(fgn_autocovariance(5, h(0.5)), 0.0);
    }

    #[test]
    fn hurst_domain() {
        assert!(HurstParam::new(0.5).is_ok());
        assert!(HurstParam::new(0.49).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!((HurstParam::from_alpha(0.4).unwrap().value() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn cumulative_sum() {
        assert_eq!(fgn_to_fbm(&[], h(0.7)).values(), &[0.0]);
        assert_eq!(fgn_to_fbm(&[1.0, -1.0], h(0.7)).values(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn real_time_evaluation() {
        let p = fgn_to_fbm(&[1.0, -1.0], h(0.7));
        assert_eq!(p.at_real_time(0.5).value, 0.5);
        assert_eq!(p.at_real_time(-3.0).value, 0.0);
        assert_eq!(p.at_real_time(1.0).value, 1.0);
        let beyond = p.at_real_time(7.5);
        assert!(beyond.out_of_range);
        assert_eq!(beyond.value, 0.0);
        assert!(!p.at_real_time(2.0).out_of_range);
    }

    #[test]
    fn length_one_is_standard_normal_draw() {
        let spec = FgnSpec::new(h(0.8), 1, 11).unwrap();
        assert_eq!(generate_fgn(&spec).unwrap().len(), 1);
        let chol = generate_fgn_cholesky(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z: f64 = StandardNormal.sample(&mut rng);
        assert_eq!(chol, vec![z]);
    }

    #[test]
    fn cholesky_size_guard_and_determinism() {
        let big = FgnSpec::new(h(0.7), CHOLESKY_MAX_LENGTH + 1, 0).unwrap();
        assert!(matches!(
            generate_fgn_cholesky(&big),
            Err(Error::SizeLimit { .. })
        ));
        let spec = FgnSpec::new(h(0.7), 64, 3).unwrap();
        assert_eq!(
            generate_fgn_cholesky(&spec).unwrap(),
            generate_fgn_cholesky(&spec).unwrap()
        );
        assert_eq!(generate_fgn(&spec).unwrap(), generate_fgn(&spec).unwrap());
    }

    #[test]
    fn wiener_spectral_noise_is_white() {
        let n = 1 << 14;
        let x = generate_fgn(&FgnSpec::new(h(0.5), n, 5).unwrap()).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let lag1 = x
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        assert!((lag1 / var).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn spectral_lag_one_autocovariance() {
        // Average over a few long paths; the standard error is estimated from
        // the per-path spread.
        let n = 1 << 16;
        let hp = h(0.75);
        let est: Vec<f64> = (0..8)
            .map(|seed| {
                let x = generate_fgn(&FgnSpec::new(hp, n, 100 + seed).unwrap()).unwrap();
                x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64
            })
            .collect();
        let m = est.iter().sum::<f64>() / est.len() as f64;
        let sd = (est.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt();
        let se = sd / (est.len() as f64).sqrt();
        let target = fgn_autocovariance(1, hp);
        assert!(
            (m - target).abs() < 3.0 * se.max(1e-3),
            "mean {m} vs {target}, se {se}"
        );
    }

    #[test]
    fn embedding_eigenvalues_nonnegative() {
        for &hv in &[0.55, 0.7, 0.8, 0.95, 0.99] {
            for &n in &[1usize, 2, 3, 17, 1000, 1 << 16] {
                let eig = circulant_eigenvalues(n, h(hv)).unwrap();
                let max = eig.iter().cloned().fold(f64::MIN, f64::max);
                assert!(eig.iter().all(|&l| l >= -EIGENVALUE_TOLERANCE * max));
            }
        }
    }

    #[test]
    fn registry_lookup() {
        let r = GeneratorRegistry::default();
        assert_eq!(
            r.names().collect::<Vec<_>>(),
            vec!["cholesky", "davies-harte"]
        );
        assert_eq!(r.get("davies-harte").unwrap().name(), "davies-harte");
        assert!(matches!(r.get("wavelet"), Err(Error::UnknownName { .. })));
    }

    proptest! {
        #[test]
        fn covariance_symmetric_and_diagonal(s in 0.0f64..50.0, t in 0.0f64..50.0, hv in 0.5f64..0.99) {
            let hp = h(hv);
            prop_assert!((fbm_covariance(s, t, hp) - fbm_covariance(t, s, hp)).abs() < 1e-9);
            prop_assert!((fbm_covariance(t, t, hp) - t.powf(2.0 * hv)).abs() <= 1e-12 * (1.0 + t.powf(2.0 * hv)));
        }

        #[test]
        fn lrd_partial_sums_increase(hv in 0.51f64..0.99, m in 1usize..200) {
            let hp = h(hv);
            let sum = |m: usize| fgn_autocovariance(0, hp) + 2.0 * (1..=m).map(|k| fgn_autocovariance(k, hp)).sum::<f64>();
            prop_assert!(sum(m) > sum(m - 1));
        }

        #[test]
        fn prefix_sums_match_loop(xs in proptest::collection::vec(-10.0f64..10.0, 0..64)) {
            let p = fgn_to_fbm(&xs, h(0.6));
            let mut acc = 0.0;
            prop_assert_eq!(p.values()[0], 0.0);
            for (i, x) in xs.iter().enumerate() {
                acc += x;
                prop_assert_eq!(p.values()[i + 1], acc);
            }
        }
    }
}
