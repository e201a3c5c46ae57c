//! Law-of-the-iterated-logarithm envelopes.

use crate::error::{Error, Result};
use crate::theory::TheoryParams;

/// Smallest `T` accepted by the envelopes: `e^e`, where `log log T = 1`.
pub const MIN_ENVELOPE_TIME: f64 = 15.154_262_241_479_262;

fn check_time(t: f64) -> Result<()> {
    if t >= MIN_ENVELOPE_TIME && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("T", format!("{t} is below e^e")))
    }
}

/// `2^{1/4} σ^{3/2} / μ^{3/4}`.
pub fn lil_constant_iid(mu: f64, sigma: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::NonpositiveMean { mu });
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("{sigma} must be positive")));
    }
    Ok(2f64.powf(0.25) * sigma.powf(1.5) / mu.powf(0.75))
}

/// Envelope for `sup_{t<=T} |Q(t/μ)|` in the weakly dependent case.
pub fn lil_envelope_iid(t: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_time(t)?;
    let k = lil_constant_iid(mu, sigma)?;
    Ok(k * (t * t.ln().ln()).powf(0.25) * t.ln().sqrt())
}

/// `2^{1-α/4} (J1 κ_α)^{2-α/2} / (σ^{2-α/2} μ^{1-α/2})`, i.e.
/// `2^{1-α/4} |c|^{2-α/2} / μ^{1-α/2}`.
pub fn lil_constant_lrd(params: &TheoryParams) -> f64 {
    let a = params.alpha;
    2f64.powf(1.0 - a / 4.0) * params.c.abs().powf(2.0 - a / 2.0) / params.mu.powf(1.0 - a / 2.0)
}

/// Envelope for `|Q(T)|` in the long-range dependent case.
pub fn lil_envelope_lrd(t: f64, params: &TheoryParams) -> Result<f64> {
    params.require_alpha_domain()?;
    check_time(t)?;
    let a = params.alpha;
    let lt = t.ln();
    Ok(lil_constant_lrd(params)
        * t.powf(params.q_exponent())
        * lt.ln().powf(0.5 - a / 4.0)
        * lt.sqrt())
}

/// Increment normaliser `a_T^H (2 (log(T/a_T) + log log T))^{1/2}`.
pub fn ortega_envelope(t: f64, a_t: f64, hurst: f64) -> Result<f64> {
    check_time(t)?;
    if !(a_t > 0.0 && a_t <= t) {
        return Err(Error::invalid("a_T", format!("{a_t} is not in (0, T]")));
    }
    if !(0.5..1.0).contains(&hurst) {
        return Err(Error::invalid(
            "hurst",
            format!("{hurst} is not in [1/2, 1)"),
        ));
    }
    Ok(a_t.powf(hurst) * (2.0 * ((t / a_t).ln() + t.ln().ln())).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_constant_and_envelope() {
        assert!((lil_constant_iid(1.0, 1.0).unwrap() - 1.189_207).abs() < 1e-6);
        let e = MIN_ENVELOPE_TIME;
        // log log e^e = 1, log e^e = e
        let direct = 2f64.powf(0.25) * e.powf(0.25) * std::f64::consts::E.sqrt();
        assert!((lil_envelope_iid(e, 1.0, 1.0).unwrap() - direct).abs() < 1e-12);
        assert!(lil_envelope_iid(15.0, 1.0, 1.0).is_err());
        let mut prev = 0.0;
        for k in 4..40 {
            let v = lil_envelope_iid(2f64.powi(k), 1.0, 1.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn lrd_constant_values() {
        let p = TheoryParams::from_scale(0.5, 1.0, 1.0).unwrap();
        assert!((lil_constant_lrd(&p) - 2f64.powf(0.875)).abs() < 1e-14);
        assert!((lil_constant_lrd(&p) - 1.834_008).abs() < 1e-6);
        let tiny = TheoryParams::from_scale(1e-9, 1.0, 1.0).unwrap();
        assert!((lil_constant_lrd(&tiny) - 2.0).abs() < 1e-8);
        let p4 = TheoryParams::from_scale(0.4, 1.0, 1.0).unwrap();
        assert!((p4.q_exponent() - 0.64).abs() < 1e-15);
        let out = TheoryParams::from_scale(0.6, 1.0, 1.0).unwrap();
        assert!(matches!(
            lil_envelope_lrd(100.0, &out),
            Err(Error::AlphaDomain { .. })
        ));
        let mut prev = 0.0;
        for k in 4..40 {
            let v = lil_envelope_lrd(2f64.powi(k), &p4).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn ortega_cases() {
        let t = 1e6;
        let h = 0.8;
        let full = ortega_envelope(t, t, h).unwrap();
        assert!((full - t.powf(h) * (2.0 * t.ln().ln()).sqrt()).abs() < 1e-9 * full);
        assert!(ortega_envelope(t, 0.5, 0.6).unwrap() > ortega_envelope(t, 0.5, 0.9).unwrap());
        let a = 1000.0;
        let ratio = ortega_envelope(t, 2.0 * a, h).unwrap() / ortega_envelope(t, a, h).unwrap();
        let llt = t.ln().ln();
        let expected = 2f64.powf(h) * (((t / (2.0 * a)).ln() + llt) / ((t / a).ln() + llt)).sqrt();
        assert!((ratio - expected).abs() < 1e-13);
        assert!(ortega_envelope(t, 0.0, h).is_err());
        assert!(ortega_envelope(t, 2.0 * t, h).is_err());
        let mut prev = 0.0;
        for k in 4..40 {
            let v = ortega_envelope(2f64.powi(k), 10.0, h).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }
}
