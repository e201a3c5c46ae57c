//! Partial sums `S`, first passages `N`, the fluctuation process
//! `Q(t) = S(t) + μ N(μt) − 2μt`, and coupled modes where the summands are
//! increments of a simulated Gaussian driver.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{fgn_to_fbm, CirculantEmbedding, FbmPath, HurstParam};
use crate::sequences::{LongRun, ModelMoments, Realization, SequenceModel};
use crate::theory::{check_alpha_domain, TheoryParams};

/// Summands `Y_1..Y_n` with `S(0..=n)` and the running maximum of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumPath {
    y: Vec<f64>,
    mu: f64,
    cumulative: Vec<f64>,
    running_max: Vec<f64>,
}

/// `S(0) = 0`, `S(k) = Y_1 + … + Y_k`.
pub fn partial_sums(y: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(y.len() + 1);
    let mut acc = 0.0;
    s.push(acc);
    for &v in y {
        acc += v;
        s.push(acc);
    }
    s
}

impl SumPath {
    pub fn new(y: Vec<f64>, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::NonpositiveMean { mu });
        }
        let cumulative = partial_sums(&y);
        let mut running_max = Vec::with_capacity(cumulative.len());
        running_max.push(f64::NEG_INFINITY);
        let mut m = f64::NEG_INFINITY;
        for &s in &cumulative[1..] {
            m = m.max(s);
            running_max.push(m);
        }
        Ok(Self {
            y,
            mu,
            cumulative,
            running_max,
        })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Number of simulated summands.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `S(t) = S(⌊t⌋)`; zero for `t < 1`.
    pub fn s(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid("t", format!("{t} is negative")));
        }
        let k = t.floor();
        if k > self.len() as f64 {
            return Err(Error::HorizonExhausted {
                level: t,
                horizon: self.len(),
            });
        }
        Ok(self.cumulative[k as usize])
    }

    /// `N(t) = min{n >= 1 : S(n) > t}`.
    pub fn renewal(&self, t: f64) -> Result<usize> {
        let idx = self.running_max[1..].partition_point(|&m| m <= t);
        if idx == self.len() {
            return Err(Error::HorizonExhausted {
                level: t,
                horizon: self.len(),
            });
        }
        Ok(idx + 1)
    }

    /// `Q(t) = S(t) + μ N(μt) − 2μt`.
    pub fn q(&self, t: f64) -> Result<f64> {
        let mu = self.mu;
        Ok(self.s(t)? + mu * self.renewal(mu * t)? as f64 - 2.0 * mu * t)
    }
}

/// First passage of `sum` above `t`.
pub fn renewal(sum: &SumPath, t: f64) -> Result<usize> {
    sum.renewal(t)
}

/// First passages for a nondecreasing sequence of levels in one pass.
struct RenewalSweep<'a> {
    sum: &'a SumPath,
    n: usize,
}

impl<'a> RenewalSweep<'a> {
    fn new(sum: &'a SumPath) -> Self {
        Self { sum, n: 1 }
    }

    fn next(&mut self, t: f64) -> Result<usize> {
        let s = &self.sum.cumulative;
        while self.n < s.len() && s[self.n] <= t {
            self.n += 1;
        }
        if self.n == s.len() {
            return Err(Error::HorizonExhausted {
                level: t,
                horizon: self.sum.len(),
            });
        }
        Ok(self.n)
    }
}

/// `Q` at the checkpoints plus sup statistics over all integer times up to
/// the last checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QCheckpointSeries {
    pub mu: f64,
    pub checkpoints: Vec<f64>,
    pub q: Vec<f64>,
    /// `sup |Q(s)|` over integer `s <= T` and the checkpoints.
    pub sup_abs_q: f64,
    /// `sup |μ N(μs) − μs|` over integer `s <= T`.
    pub sup_abs_renewal: f64,
}

/// Evaluates `Q` at strictly increasing nonnegative `checkpoints`.
pub fn q_process(sum: &SumPath, checkpoints: &[f64]) -> Result<QCheckpointSeries> {
    if checkpoints.is_empty() {
        return Err(Error::invalid("checkpoints", "need at least one time"));
    }
    if checkpoints[0] < 0.0 || checkpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "checkpoints",
            "times must be nonnegative and strictly increasing",
        ));
    }
    let mu = sum.mu;
    let last = *checkpoints.last().expect("nonempty");
    let q = checkpoints
        .iter()
        .map(|&t| sum.q(t))
        .collect::<Result<Vec<_>>>()?;
    let horizon = last.floor() as usize;
    let mut sweep = RenewalSweep::new(sum);
    let mut sup_q = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut sup_r = 0.0f64;
    for s in 0..=horizon {
        let level = mu * s as f64;
        let n = sweep.next(level)? as f64;
        let renewal_dev = mu * n - level;
        sup_r = sup_r.max(renewal_dev.abs());
        let qs = sum.cumulative[s] + renewal_dev - level;
        sup_q = sup_q.max(qs.abs());
    }
    Ok(QCheckpointSeries {
        mu,
        checkpoints: checkpoints.to_vec(),
        q,
        sup_abs_q: sup_q,
        sup_abs_renewal: sup_r,
    })
}

/// `sup|Q| / ((log T)^{1/2} (sup|μN − t|)^{1/2})`.
///
/// For `Y ≡ μ` the renewal deviation `μN(μs) − μs` is exactly `μ` at every
/// integer `s`, so a sup at or below `μ` is treated as degenerate.
pub fn ratio_statistic(series: &QCheckpointSeries, t: f64) -> Result<f64> {
    if !(t >= 16.0) {
        return Err(Error::invalid("T", format!("{t} is below 16")));
    }
    let r = series.sup_abs_renewal;
    if !(r > series.mu * (1.0 + 1e-12)) {
        return Err(Error::DegenerateRenewal {
            sup: r,
            mu: series.mu,
        });
    }
    Ok(series.sup_abs_q / (t.ln().sqrt() * r.sqrt()))
}

/// Default number of summands for first passages up to `level`:
/// `⌈2 level/μ⌉ + 64 ⌈√level⌉`.
pub fn default_horizon(level: f64, mu: f64) -> usize {
    (2.0 * level / mu).ceil() as usize + 64 * level.max(0.0).sqrt().ceil() as usize
}

/// Summands needed to evaluate `Q` up to time `t` in a coupled mode: the
/// renewal horizon at level `μt`, and at least `2t`.
pub fn coupled_horizon(t: f64, mu: f64) -> usize {
    default_horizon(mu * t, mu)
        .max((2.0 * t).ceil() as usize)
        .max(1)
}

/// A sum path built from the increments of a Gaussian driver:
/// `Y_j = μ + scale (W(j) − W(j−1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub driver: FbmPath,
    pub sum: SumPath,
    pub scale: f64,
    /// Present for long-range coupled paths with nonzero scale.
    pub params: Option<TheoryParams>,
    /// Exponent of the coupling error; zero since the coupling is exact.
    pub beta_proxy: f64,
}

impl CoupledPath {
    pub fn mu(&self) -> f64 {
        self.sum.mu
    }

    pub fn hurst(&self) -> HurstParam {
        self.driver.hurst()
    }

    fn from_driver(
        driver: FbmPath,
        mu: f64,
        scale: f64,
        params: Option<TheoryParams>,
    ) -> Result<Self> {
        let y = increments(&driver, mu, scale);
        Ok(Self {
            sum: SumPath::new(y, mu)?,
            driver,
            scale,
            params,
            beta_proxy: 0.0,
        })
    }
}

fn increments(driver: &FbmPath, mu: f64, scale: f64) -> Vec<f64> {
    driver
        .values()
        .windows(2)
        .map(|w| mu + scale * (w[1] - w[0]))
        .collect()
}

/// `sup_{integer t <= n} |S(t) − μt − scale W(t)|`.
pub fn coupling_error(cp: &CoupledPath) -> f64 {
    let mu = cp.mu();
    cp.sum
        .cumulative()
        .iter()
        .zip(cp.driver.values())
        .enumerate()
        .map(|(t, (s, w))| (s - mu * t as f64 - cp.scale * w).abs())
        .fold(0.0, f64::max)
}

/// `Y_i = μ + σ (W(i) − W(i−1))` for a standard Wiener driver.
#[derive(Debug, Clone, Copy)]
pub struct CoupledWienerModel {
    mu: f64,
    sigma: f64,
}

impl CoupledWienerModel {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::NonpositiveMean { mu });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(
                "sigma",
                format!("{sigma} must be nonnegative"),
            ));
        }
        Ok(Self { mu, sigma })
    }

    pub fn path(&self, n: usize, seed: u64) -> Result<CoupledPath> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one value"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let driver = fgn_to_fbm(&dw, HurstParam::wiener());
        CoupledPath::from_driver(driver, self.mu, self.sigma, None)
    }
}

impl SequenceModel for CoupledWienerModel {
    fn kind(&self) -> &'static str {
        "coupled-wiener"
    }

    fn moments(&self) -> ModelMoments {
        ModelMoments {
            mu: self.mu,
            sigma_marginal: self.sigma,
            long_run: LongRun::Weak { sigma: self.sigma },
        }
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Realization> {
        let cp = self.path(n, seed)?;
        Ok(Realization {
            y: cp.sum.y,
            driver: Some(cp.driver),
        })
    }
}

/// `Y_j = μ + c (W_H(j) − W_H(j−1))`, `H = 1 − α/2`.
#[derive(Debug)]
pub struct CoupledFbmModel {
    alpha: f64,
    mu: f64,
    c: f64,
    params: Option<TheoryParams>,
    embeddings: Mutex<HashMap<usize, Arc<CirculantEmbedding>>>,
}

impl CoupledFbmModel {
    /// Any real scale `c`; `c = 0` gives the degenerate sequence `Y ≡ μ`.
    pub fn new(alpha: f64, mu: f64, c: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("{alpha} is not in (0, 1)")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::NonpositiveMean { mu });
        }
        if !c.is_finite() {
            return Err(Error::invalid("c", "scale must be finite"));
        }
        let params = if c == 0.0 {
            None
        } else {
            Some(TheoryParams::from_scale(alpha, mu, c)?)
        };
        Ok(Self {
            alpha,
            mu,
            c,
            params,
            embeddings: Mutex::new(HashMap::new()),
        })
    }

    pub fn from_params(params: &TheoryParams) -> Result<Self> {
        let mut m = Self::new(params.alpha, params.mu, params.c)?;
        m.params = Some(*params);
        Ok(m)
    }

    fn embedding(&self, len: usize) -> Result<Arc<CirculantEmbedding>> {
        let mut cache = self.embeddings.lock().expect("embedding cache poisoned");
        if let Some(e) = cache.get(&len) {
            return Ok(e.clone());
        }
        let e = Arc::new(CirculantEmbedding::new(
            len,
            HurstParam::from_alpha(self.alpha)?,
        )?);
        cache.insert(len, e.clone());
        Ok(e)
    }

    /// The driver is sampled at the next power of two and cut to `n`, which
    /// keeps the FFT sizes fast.
    pub fn path(&self, n: usize, seed: u64) -> Result<CoupledPath> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one value"));
        }
        let emb = self.embedding(n.next_power_of_two())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fgn = emb.sample(&mut rng);
        fgn.truncate(n);
        let driver = fgn_to_fbm(&fgn, emb.hurst());
        CoupledPath::from_driver(driver, self.mu, self.c, self.params)
    }
}

impl SequenceModel for CoupledFbmModel {
    fn kind(&self) -> &'static str {
        "coupled-fbm"
    }

    fn moments(&self) -> ModelMoments {
        ModelMoments {
            mu: self.mu,
            sigma_marginal: self.c.abs(),
            long_run: LongRun::LongRange {
                alpha: self.alpha,
                c: self.c,
                params: self.params,
            },
        }
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Realization> {
        let cp = self.path(n, seed)?;
        Ok(Realization {
            y: cp.sum.y,
            driver: Some(cp.driver),
        })
    }
}

/// Wiener-coupled path with a driver long enough for `Q(T)` and for the
/// random time `T − (σ/μ) W(T)`.
pub fn coupled_wiener(t: u64, mu: f64, sigma: f64, seed: u64) -> Result<CoupledPath> {
    if t == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    CoupledWienerModel::new(mu, sigma)?.path(coupled_horizon(t as f64, mu), seed)
}

/// fBm-coupled path with `c = J1 κ_α / σ` from `params`.
pub fn coupled_fbm(t: u64, params: &TheoryParams, seed: u64) -> Result<CoupledPath> {
    if t == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    CoupledFbmModel::from_params(params)?.path(coupled_horizon(t as f64, params.mu), seed)
}

/// fBm-coupled path with an explicit scale, which may be zero.
pub fn coupled_fbm_scaled(t: u64, alpha: f64, mu: f64, c: f64, seed: u64) -> Result<CoupledPath> {
    if t == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    CoupledFbmModel::new(alpha, mu, c)?.path(coupled_horizon(t as f64, mu), seed)
}

fn driver_at(cp: &CoupledPath, t: f64) -> Result<f64> {
    let v = cp.driver.at_real_time(t);
    if v.out_of_range {
        return Err(Error::HorizonExhausted {
            level: t,
            horizon: cp.driver.horizon(),
        });
    }
    Ok(v.value)
}

/// `|Q(T) − σ (W(T) − W(T − (σ/μ) W(T)))|`.
pub fn representation_error_wiener(cp: &CoupledPath, t: u64) -> Result<f64> {
    let tf = t as f64;
    let (mu, sigma) = (cp.mu(), cp.scale);
    let w_t = driver_at(cp, tf)?;
    let w_back = driver_at(cp, tf - sigma / mu * w_t)?;
    Ok((cp.sum.q(tf)? - sigma * (w_t - w_back)).abs())
}

/// Pathwise deviations from the three long-range representations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmRepresentationErrors {
    /// `sup_{integer t <= T} |μN(μt) − μt + c W_H(t)|`.
    pub err_renewal: f64,
    /// `|Q(T) − c (W_H(T) − W_H(T − (c/μ) W_H(T)))|`.
    pub err_q: f64,
    /// `|μT − μN(μT) − c W_H(T − (c/μ) W_H(T))|`.
    pub err_prop: f64,
}

/// Raw errors at time `T`; callers divide by the rate they are checking.
pub fn representation_error_fbm(cp: &CoupledPath, t: u64) -> Result<FbmRepresentationErrors> {
    let alpha = 2.0 * (1.0 - cp.hurst().value());
    if !check_alpha_domain(alpha) {
        return Err(Error::AlphaDomain { alpha });
    }
    let (mu, c) = (cp.mu(), cp.scale);
    let tf = t as f64;
    let mut sweep = RenewalSweep::new(&cp.sum);
    let mut err_renewal = 0.0f64;
    for s in 0..=t as usize {
        let level = mu * s as f64;
        let n = sweep.next(level)? as f64;
        let w = driver_at(cp, s as f64)?;
        err_renewal = err_renewal.max((mu * n - level + c * w).abs());
    }
    let w_t = driver_at(cp, tf)?;
    let w_back = driver_at(cp, tf - c / mu * w_t)?;
    let n_t = cp.sum.renewal(mu * tf)? as f64;
    Ok(FbmRepresentationErrors {
        err_renewal,
        err_q: (cp.sum.q(tf)? - c * (w_t - w_back)).abs(),
        err_prop: (mu * tf - mu * n_t - c * w_back).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{IidDistribution, IidModel};
    use proptest::prelude::*;

    fn ones(n: usize) -> SumPath {
        SumPath::new(vec![1.0; n], 1.0).unwrap()
    }

    fn naive_renewal(y: &[f64], t: f64) -> Option<usize> {
        let mut s = 0.0;
        for (i, v) in y.iter().enumerate() {
            s += v;
            if s > t {
                return Some(i + 1);
            }
        }
        None
    }

    #[test]
    fn partial_sum_examples() {
        let p = SumPath::new(vec![1.0; 3], 1.0).unwrap();
        assert_eq!(p.s(2.7).unwrap(), 2.0);
        assert_eq!(p.s(0.0).unwrap(), 0.0);
        assert!(p.s(4.0).is_err());
    }

    #[test]
    fn renewal_examples() {
        let p = ones(10);
        assert_eq!(p.renewal(2.5).unwrap(), 3);
        assert_eq!(p.renewal(2.0).unwrap(), 3);
        assert_eq!(p.renewal(-1.0).unwrap(), 1);
        assert!(matches!(
            p.renewal(10.0),
            Err(Error::HorizonExhausted { .. })
        ));
    }

    #[test]
    fn q_examples() {
        let p = ones(20);
        assert_eq!(p.q(5.0).unwrap(), 1.0);
        assert_eq!(p.q(2.5).unwrap(), 0.0);
        let series = q_process(&p, &[2.5, 5.0]).unwrap();
        assert_eq!(series.q, vec![0.0, 1.0]);
        assert_eq!(series.sup_abs_q, 1.0);
        assert_eq!(series.sup_abs_renewal, 1.0);
        assert!(q_process(&p, &[5.0, 5.0]).is_err());
        assert!(matches!(
            ratio_statistic(&series, 16.0),
            Err(Error::DegenerateRenewal { .. })
        ));
    }

    #[test]
    fn q_identity_and_oracle() {
        let m = IidModel::new(IidDistribution::Exponential { rate: 2.0 }).unwrap();
        let mu = 0.5;
        let y = m.generate(4000, 3).unwrap().y;
        let p = SumPath::new(y.clone(), mu).unwrap();
        let checkpoints: Vec<f64> = (1..=30).map(|k| k as f64 * 50.0).collect();
        let series = q_process(&p, &checkpoints).unwrap();
        for (&t, &q) in checkpoints.iter().zip(&series.q) {
            let s_t: f64 = y[..t as usize].iter().sum();
            let n = naive_renewal(&y, mu * t).unwrap();
            let s_n: f64 = y[..n].iter().sum();
            let direct = s_t + mu * n as f64 - 2.0 * mu * t;
            assert!((q - direct).abs() < 1e-9);
            let three = (s_t - mu * t) - (s_n - mu * n as f64) + (s_n - mu * t);
            assert!((q - three).abs() < 1e-9);
            assert!(series.sup_abs_q >= q.abs());
        }
        // Sup over every integer time by brute force.
        let mut sup = 0.0f64;
        let mut sup_r = 0.0f64;
        for s in 0..=1500usize {
            sup = sup.max(p.q(s as f64).unwrap().abs());
            sup_r =
                sup_r.max((mu * p.renewal(mu * s as f64).unwrap() as f64 - mu * s as f64).abs());
        }
        assert_eq!(series.sup_abs_q, sup);
        assert_eq!(series.sup_abs_renewal, sup_r);
    }

    #[test]
    fn homogeneity_and_ratio_scaling() {
        let m = IidModel::new(IidDistribution::Exponential { rate: 1.0 }).unwrap();
        let y = m.generate(3000, 8).unwrap().y;
        let lambda = 2.0;
        let p1 = SumPath::new(y.clone(), 1.0).unwrap();
        let p2 = SumPath::new(y.iter().map(|v| v * lambda).collect(), lambda).unwrap();
        let ts: Vec<f64> = (1..=10).map(|k| 100.0 * k as f64).collect();
        let a = q_process(&p1, &ts).unwrap();
        let b = q_process(&p2, &ts).unwrap();
        for (x, z) in a.q.iter().zip(&b.q) {
            assert_eq!(lambda * x, *z);
        }
        assert_eq!(lambda * a.sup_abs_renewal, b.sup_abs_renewal);
        let ra = ratio_statistic(&a, 1000.0).unwrap();
        let rb = ratio_statistic(&b, 1000.0).unwrap();
        assert!((rb - lambda.sqrt() * ra).abs() < 1e-12 * rb);
    }

    #[test]
    fn wiener_coupling_is_exact() {
        let cp = coupled_wiener(1000, 1.5, 0.8, 4).unwrap();
        assert!(cp.driver.horizon() >= 2000);
        assert!(coupling_error(&cp) <= 1e-9 * 1000.0);
        let degenerate = coupled_wiener(64, 1.0, 0.0, 1).unwrap();
        assert!(degenerate.sum.y().iter().all(|&v| v == 1.0));
        assert_eq!(degenerate.sum.q(64.0).unwrap(), 1.0);
        assert_eq!(representation_error_wiener(&degenerate, 64).unwrap(), 1.0);
    }

    #[test]
    fn wiener_mean() {
        let (t, r) = (400u64, 400);
        let mean: f64 = (0..r)
            .map(|s| {
                coupled_wiener(t, 1.0, 1.0, s)
                    .unwrap()
                    .sum
                    .s(t as f64)
                    .unwrap()
            })
            .sum::<f64>()
            / r as f64;
        assert!((mean - t as f64).abs() < 3.0 * (t as f64).sqrt() / (r as f64).sqrt());
    }

    #[test]
    fn fbm_coupling() {
        let p = TheoryParams::from_scale(0.4, 1.0, 1.3).unwrap();
        let cp = coupled_fbm(500, &p, 2).unwrap();
        assert!(coupling_error(&cp) <= 1e-9 * 500.0);
        assert!((cp.hurst().value() - 0.8).abs() < 1e-15);
        let flat = coupled_fbm_scaled(200, 0.4, 2.0, 0.0, 3).unwrap();
        assert!(flat.sum.y().iter().all(|&v| v == 2.0));
        let e = representation_error_fbm(&flat, 200).unwrap();
        assert_eq!((e.err_renewal, e.err_q, e.err_prop), (2.0, 2.0, 2.0));
        let outside = coupled_fbm_scaled(50, 0.7, 1.0, 1.0, 3).unwrap();
        assert!(matches!(
            representation_error_fbm(&outside, 50),
            Err(Error::AlphaDomain { .. })
        ));
    }

    #[test]
    fn fbm_sum_variance() {
        // Var(S(T) − μT) = c² T^{2H}.
        let (alpha, c, t, r) = (0.4, 0.7, 256u64, 1500u64);
        let model = CoupledFbmModel::new(alpha, 1.0, c).unwrap();
        let vals: Vec<f64> = (0..r)
            .map(|s| {
                let cp = model.path(t as usize, s).unwrap();
                cp.sum.s(t as f64).unwrap() - t as f64
            })
            .collect();
        let var = vals.iter().map(|v| v * v).sum::<f64>() / r as f64;
        let target = c * c * (t as f64).powf(2.0 * 0.8);
        // Relative standard error of a Gaussian variance estimate is √(2/R).
        assert!(
            (var / target - 1.0).abs() < 3.0 * (2.0 / r as f64).sqrt(),
            "{var} vs {target}"
        );
    }

    #[test]
    fn horizons() {
        assert_eq!(default_horizon(100.0, 1.0), 200 + 640);
        assert!(coupled_horizon(1000.0, 0.5) >= 2000);
    }

    proptest! {
        #[test]
        fn renewal_matches_scan(y in proptest::collection::vec(-0.5f64..2.0, 1..60), t in -1.0f64..20.0) {
            let p = SumPath::new(y.clone(), 1.0).unwrap();
            match naive_renewal(&y, t) {
                Some(n) => {
                    let got = p.renewal(t).unwrap();
                    prop_assert_eq!(got, n);
                    prop_assert!(p.cumulative()[got] > t);
                    if got > 1 {
                        prop_assert!(p.cumulative()[1..got].iter().all(|&s| s <= t));
                    }
                }
                None => prop_assert!(p.renewal(t).is_err()),
            }
        }

        #[test]
        fn renewal_nondecreasing(y in proptest::collection::vec(0.01f64..2.0, 50..80), a in 0.0f64..10.0, d in 0.0f64..10.0) {
            let p = SumPath::new(y, 1.0).unwrap();
            if let (Ok(n1), Ok(n2)) = (p.renewal(a), p.renewal(a + d)) {
                prop_assert!(n1 >= 1 && n2 >= n1);
            }
        }

        #[test]
        fn partial_sums_match_loop(y in proptest::collection::vec(-3.0f64..3.0, 0..50)) {
            let s = partial_sums(&y);
            let mut acc = 0.0;
            prop_assert_eq!(s[0], 0.0);
            for (k, v) in y.iter().enumerate() {
                acc += v;
                prop_assert_eq!(s[k + 1], acc);
            }
        }
    }
}
