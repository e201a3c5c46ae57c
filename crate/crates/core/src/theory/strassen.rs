//! The Riemann–Liouville type operator `T_H`, its normalising constant
//! `k_H`, and the extremal profile `f` (with its cut-off `f_δ`) used for the
//! lower bound of the long-range dependent limsup.
//!
//! With `h = H - 1/2`:
//!
//! ```text
//! k_H² = ∫_0^∞ ((1+x)^h − x^h)² dx + ∫_0^1 (1−s)^{2h} ds
//! T_H g(t) = k_H^{-1} [ ∫_0^t (t−u)^h g(u) du + ∫_0^∞ ((t+x)^h − x^h) g(−x) dx ]
//! ```

use crate::error::{Error, Result};
use crate::quadrature::{
    exp_sinh, gauss_kronrod, tanh_sinh, AdaptiveSettings, DoubleExpSettings, Estimate,
};

/// Upper limit of the truncated `k_H` integral; the rest is an asymptotic
/// tail expansion.
pub const KH_TRUNCATION: f64 = 1e6;

const SECOND_TERM_CHECK: f64 = 1e-10;

fn de_finite() -> DoubleExpSettings {
    DoubleExpSettings {
        tol: 1e-13,
        max_level: 14,
        t_max: 4.0,
    }
}

fn de_half_line() -> DoubleExpSettings {
    DoubleExpSettings {
        tol: 1e-13,
        max_level: 14,
        t_max: 6.0,
    }
}

/// `(t + x)^h − x^h` without cancellation for large `x`.
fn kernel(t: f64, x: f64, h: f64) -> f64 {
    if x <= 0.0 {
        return t.powf(h) - if h == 0.0 { 1.0 } else { 0.0 };
    }
    x.powf(h) * (h * (t / x).ln_1p()).exp_m1()
}

/// `k_H` and the pieces it is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrassenBall {
    pub hurst: f64,
    pub k_h: f64,
    /// `∫_0^X ((1+x)^h − x^h)² dx` plus the tail expansion beyond `X`.
    pub first_integral: Estimate,
    /// Quadrature value of `∫_0^1 (1−s)^{2H−1} ds`.
    pub second_integral: f64,
    /// Size of the first neglected term of the tail expansion.
    pub tail_error: f64,
}

impl StrassenBall {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&hurst) {
            return Err(Error::invalid(
                "hurst",
                format!("{hurst} is not in [1/2, 1)"),
            ));
        }
        let h = hurst - 0.5;
        let (truncated, tail, tail_error) = first_integral_truncated(h)?;
        let second = tanh_sinh(|s: f64| (1.0 - s).powf(2.0 * h), 0.0, 1.0, &de_finite())?.value;
        let closed = 1.0 / (2.0 * hurst);
        if (second - closed).abs() > SECOND_TERM_CHECK {
            return Err(Error::Quadrature(format!(
                "second k_H term {second} disagrees with 1/(2H) = {closed}"
            )));
        }
        let first_integral = Estimate {
            value: truncated.value + tail,
            error: truncated.error + tail_error,
        };
        Ok(Self {
            hurst,
            k_h: (first_integral.value + second).sqrt(),
            first_integral,
            second_integral: second,
            tail_error,
        })
    }

    fn h(&self) -> f64 {
        self.hurst - 0.5
    }

    /// The first `k_H` integral over the whole half line by exp–sinh, with
    /// no truncation. Independent of [`StrassenBall::first_integral`].
    pub fn first_integral_untruncated(&self) -> Result<Estimate> {
        let h = self.h();
        exp_sinh(|x| kernel(1.0, x, h).powi(2), 0.0, &de_half_line())
    }

    /// The function `g` of the lower-bound construction:
    /// `((1−s)^h − (−s)^h)/k_H` for `s <= 0`, `(1−s)^h/k_H` on `(0, 1]`.
    pub fn proof_g(&self, s: f64) -> f64 {
        let h = self.h();
        if s <= 0.0 {
            kernel(1.0, -s, h) / self.k_h
        } else if s <= 1.0 {
            (1.0 - s).powf(h) / self.k_h
        } else {
            0.0
        }
    }

    /// `∫_{−∞}^1 g²` for [`StrassenBall::proof_g`], by quadrature.
    pub fn proof_g_norm(&self) -> Result<f64> {
        let pos = tanh_sinh(|s| self.proof_g(s).powi(2), 0.0, 1.0, &de_finite())?;
        let neg = exp_sinh(|x| self.proof_g(-x).powi(2), 0.0, &de_half_line())?;
        Ok(pos.value + neg.value)
    }

    /// `f = T_H g` for the lower-bound `g`.
    pub fn proof_f(&self, t: f64) -> Result<f64> {
        riemann_liouville_th(|s| self.proof_g(s), t, self)
    }

    /// `f_δ(t) = f(min(t, 1 − δ))`.
    pub fn lower_bound_profile(&self, t: f64, delta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid("t", format!("{t} is not in [0, 1]")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta", format!("{delta} is not in (0, 1)")));
        }
        self.proof_f(t.min(1.0 - delta))
    }
}

fn first_integral_truncated(h: f64) -> Result<(Estimate, f64, f64)> {
    if h == 0.0 {
        return Ok((
            Estimate {
                value: 0.0,
                error: 0.0,
            },
            0.0,
            0.0,
        ));
    }
    let f = |x: f64| kernel(1.0, x, h).powi(2);
    let mut est = tanh_sinh(f, 0.0, 1.0, &de_finite())?;
    let gk = AdaptiveSettings {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        initial_panels: 4,
        max_panels: 2000,
    };
    let mut lo = 1.0;
    while lo < KH_TRUNCATION {
        let hi = (lo * 10.0).min(KH_TRUNCATION);
        est = est + gauss_kronrod(f, lo, hi, &gk)?;
        lo = hi;
    }
    // ((1+x)^h − x^h)² = h² x^{2h−2} + h²(h−1) x^{2h−3} + c3 x^{2h−4} + …
    let x = KH_TRUNCATION;
    let h2 = h * h;
    let tail = h2 * x.powf(2.0 * h - 1.0) / (1.0 - 2.0 * h) - 0.5 * h2 * x.powf(2.0 * h - 2.0);
    let c3 = h2 * (h - 1.0).powi(2) / 4.0 + h2 * (h - 1.0) * (h - 2.0) / 3.0;
    let tail_error = (c3 * x.powf(2.0 * h - 3.0) / (3.0 - 2.0 * h)).abs();
    Ok((est, tail, tail_error))
}

/// `T_H g(t)` for `t ∈ [0, 1]` and `g` on `(−∞, 1]`.
///
/// The `(t−u)^h` endpoint behaviour on `[0, t]` is handled by tanh–sinh;
/// the half line `(−∞, 0]` by exp–sinh, so `g` must decay fast enough for
/// the product with the kernel (≈ `h t x^{h−1}`) to be integrable.
pub fn riemann_liouville_th<G: Fn(f64) -> f64>(g: G, t: f64, ball: &StrassenBall) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("t", format!("{t} is not in [0, 1]")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let h = ball.h();
    let near = tanh_sinh(|u| (t - u).powf(h) * g(u), 0.0, t, &de_finite())?;
    let far = if h == 0.0 {
        0.0
    } else {
        exp_sinh(|x| kernel(t, x, h) * g(-x), 0.0, &de_half_line())?.value
    };
    let v = (near.value + far) / ball.k_h;
    if !v.is_finite() {
        return Err(Error::invalid(
            "g",
            "T_H g is not finite; g is not integrable against the kernel",
        ));
    }
    Ok(v)
}

/// `f_δ(t)` for the given Hurst index.
pub fn lower_bound_profile(t: f64, delta: f64, hurst: f64) -> Result<f64> {
    StrassenBall::new(hurst)?.lower_bound_profile(t, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wiener_case() {
        let b = StrassenBall::new(0.5).unwrap();
        assert!((b.k_h - 1.0).abs() < 1e-12);
        let v = riemann_liouville_th(
            |s| if (0.0..=1.0).contains(&s) { 1.0 } else { 0.0 },
            0.37,
            &b,
        )
        .unwrap();
        assert!((v - 0.37).abs() < 1e-12);
    }

    #[test]
    fn second_term_closed_form() {
        for &h in &[0.6, 0.7, 0.75, 0.8] {
            let b = StrassenBall::new(h).unwrap();
            assert!((b.second_integral - 1.0 / (2.0 * h)).abs() < 1e-10);
        }
        assert!((StrassenBall::new(0.75).unwrap().second_integral - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn truncation_error_small_and_routes_agree() {
        for &h in &[0.6, 0.75, 0.9] {
            let b = StrassenBall::new(h).unwrap();
            assert!(b.tail_error < 1e-6, "H={h} tail error {}", b.tail_error);
            let full = b.first_integral_untruncated().unwrap().value;
            assert!(
                (full - b.first_integral.value).abs() < 1e-8,
                "H={h}: {full} vs {:?}",
                b.first_integral
            );
        }
    }

    #[test]
    fn proof_profile_endpoints() {
        for &h in &[0.6, 0.75, 0.8] {
            let b = StrassenBall::new(h).unwrap();
            assert!((b.proof_g_norm().unwrap() - 1.0).abs() < 1e-6);
            assert_eq!(b.proof_f(0.0).unwrap(), 0.0);
            assert!((b.proof_f(1.0).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn profile_is_increasing() {
        let b = StrassenBall::new(0.8).unwrap();
        let vals: Vec<f64> = (0..=20)
            .map(|i| b.proof_f(i as f64 / 20.0).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cut_off_profile() {
        let b = StrassenBall::new(0.75).unwrap();
        assert_eq!(
            b.lower_bound_profile(0.4, 0.3).unwrap(),
            b.proof_f(0.4).unwrap()
        );
        assert_eq!(
            b.lower_bound_profile(1.0, 0.3).unwrap(),
            b.proof_f(0.7).unwrap()
        );
        // f_δ(1) increases to f(1) as δ shrinks.
        let at_one: Vec<f64> = [0.5, 0.2, 0.1, 0.01, 0.001]
            .iter()
            .map(|&d| b.lower_bound_profile(1.0, d).unwrap())
            .collect();
        assert!(at_one.windows(2).all(|w| w[1] > w[0]));
        assert!((at_one[4] - 1.0).abs() < 1e-2);
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            assert!((b.lower_bound_profile(t, 1e-6).unwrap() - b.proof_f(t).unwrap()).abs() < 1e-4);
        }
        assert!(lower_bound_profile(0.5, 0.0, 0.75).is_err());
        assert!(lower_bound_profile(1.5, 0.1, 0.75).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(StrassenBall::new(0.4).is_err());
        assert!(StrassenBall::new(1.0).is_err());
        let b = StrassenBall::new(0.7).unwrap();
        assert!(riemann_liouville_th(|_| 1.0, 1.2, &b).is_err());
    }
}
