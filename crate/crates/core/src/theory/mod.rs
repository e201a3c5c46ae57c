//! Closed-form and quadrature-computed constants of the limit theory.
//!
//! Long-range dependent sums are described by the covariance decay exponent
//! `alpha` in `(0, 1)`. The approximating fractional Brownian motion has
//! Hurst index `H = 1 - alpha/2` and scale `c = J1 kappa_alpha / sigma`.

mod envelope;
mod limit;
mod strassen;

pub use envelope::{
    lil_constant_iid, lil_constant_lrd, lil_envelope_iid, lil_envelope_lrd, ortega_envelope,
    MIN_ENVELOPE_TIME,
};
pub use limit::{
    iid_limit_sampler, limit_cdf_iid, limit_cdf_lrd, prelimit_lrd_sampler, CdfQuadrature, LimitCdf,
    LimitKind, PrelimitSample,
};
pub use strassen::{lower_bound_profile, riemann_liouville_th, StrassenBall, KH_TRUNCATION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::HurstParam;
use crate::quadrature::{gauss_kronrod, AdaptiveSettings, Estimate};

/// Upper end of the alpha range where the representation and limit
/// results for `Q` hold.
pub const ALPHA_DOMAIN_MAX: f64 = 2.0 - std::f64::consts::SQRT_2;

/// Relative agreement required between the two routes to `b_alpha`.
pub const B_ALPHA_CROSS_CHECK: f64 = 1e-8;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("alpha", format!("{alpha} is not in (0, 1)")))
    }
}

/// `b_alpha = ∫_0^∞ x^{-(1+α)/2} (1+x)^{-(1+α)/2} dx` by quadrature.
///
/// The interval is split at 1. On `[0, 1]` the substitution `x = v^m`,
/// `m = 2/(1-α)` absorbs the `x^{-(1+α)/2}` singularity; on `[1, ∞)` the
/// map `x = v^{-1/α}` turns the algebraic tail into a smooth integrand on
/// `(0, 1]`.
pub fn b_alpha_quadrature(alpha: f64) -> Result<Estimate> {
    check_alpha(alpha)?;
    let p = 0.5 * (1.0 + alpha);
    let m = 2.0 / (1.0 - alpha);
    let m_tail = 1.0 / alpha;
    let s = AdaptiveSettings {
        abs_tol: 1e-15,
        rel_tol: 1e-14,
        initial_panels: 8,
        max_panels: 4000,
    };
    let head = gauss_kronrod(|v: f64| m * (1.0 + v.powf(m)).powf(-p), 0.0, 1.0, &s)?;
    let tail = gauss_kronrod(
        |v: f64| m_tail * (1.0 + v.powf(m_tail)).powf(-p),
        0.0,
        1.0,
        &s,
    )?;
    Ok(head + tail)
}

/// `b_alpha` through the Beta-function identity `B((1-α)/2, α)`.
pub fn b_alpha_beta_identity(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let a = 0.5 * (1.0 - alpha);
    let ln_b = libm::lgamma(a) + libm::lgamma(alpha) - libm::lgamma(a + alpha);
    Ok(ln_b.exp())
}

/// `b_alpha` by quadrature, cross-checked against the Beta identity.
pub fn b_alpha(alpha: f64) -> Result<f64> {
    let quad = b_alpha_quadrature(alpha)?.value;
    let closed = b_alpha_beta_identity(alpha)?;
    let rel = (quad - closed).abs() / closed;
    if rel > B_ALPHA_CROSS_CHECK {
        return Err(Error::Quadrature(format!(
            "b_alpha({alpha}): quadrature {quad} vs Beta identity {closed} (rel {rel:e})"
        )));
    }
    Ok(quad)
}

/// `kappa_alpha = sqrt(2 b_alpha / ((1-α)(2-α)))`.
pub fn kappa_alpha(alpha: f64) -> Result<f64> {
    let b = b_alpha(alpha)?;
    Ok((2.0 * b / ((1.0 - alpha) * (2.0 - alpha))).sqrt())
}

/// Strong-approximation exponent: `2 - 2α` below one half, 1 from there on.
pub fn gamma_exponent(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(if alpha < 0.5 { 2.0 - 2.0 * alpha } else { 1.0 })
}

/// True iff `0 < α < 2 - √2`.
pub fn check_alpha_domain(alpha: f64) -> bool {
    alpha > 0.0 && alpha < ALPHA_DOMAIN_MAX
}

/// Every constant the long-range dependent limit theory needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub alpha: f64,
    pub hurst: f64,
    pub mu: f64,
    pub sigma: f64,
    pub j1: f64,
    pub kappa_alpha: f64,
    /// `j1 * kappa_alpha / sigma`.
    pub c: f64,
    pub gamma: f64,
}

impl TheoryParams {
    pub fn new(alpha: f64, mu: f64, sigma: f64, j1: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(mu > 0.0) {
            return Err(Error::NonpositiveMean { mu });
        }
        if !(sigma > 0.0) {
            return Err(Error::invalid("sigma", format!("{sigma} must be positive")));
        }
        if j1 == 0.0 || !j1.is_finite() {
            return Err(Error::HermiteRank { j1 });
        }
        let kappa = kappa_alpha(alpha)?;
        Ok(Self {
            alpha,
            hurst: 1.0 - alpha / 2.0,
            mu,
            sigma,
            j1,
            kappa_alpha: kappa,
            c: j1 * kappa / sigma,
            gamma: gamma_exponent(alpha)?,
        })
    }

    /// Parameters with a prescribed scale `c`, taking `J1 = 1` and
    /// `sigma = kappa_alpha / c`.
    pub fn from_scale(alpha: f64, mu: f64, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::invalid("c", format!("{c} must be positive")));
        }
        let kappa = kappa_alpha(alpha)?;
        let mut p = Self::new(alpha, mu, kappa / c, 1.0)?;
        p.c = c;
        Ok(p)
    }

    pub fn hurst_param(&self) -> HurstParam {
        HurstParam::new(self.hurst).expect("alpha in (0,1) gives H in (1/2,1)")
    }

    /// `c / mu`.
    pub fn c1(&self) -> f64 {
        self.c / self.mu
    }

    /// Normalising exponent `(1 - α/2)²` of `Q(T)`.
    pub fn q_exponent(&self) -> f64 {
        self.hurst * self.hurst
    }

    pub fn require_alpha_domain(&self) -> Result<()> {
        if check_alpha_domain(self.alpha) {
            Ok(())
        } else {
            Err(Error::AlphaDomain { alpha: self.alpha })
        }
    }
}
