//! Quadrature rules used by the theory module.
//!
//! Three rules, each suited to a different integrand shape:
//!
//! * adaptive Gauss–Kronrod (7/15) for smooth or mildly kinked integrands on
//!   finite intervals, including sharp interior transitions;
//! * tanh–sinh for finite intervals with endpoint singularities;
//! * exp–sinh for `[a, ∞)` with algebraic decay and an endpoint singularity.
//!
//! Gauss–Hermite nodes for normal expectations live here as well.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// A quadrature value together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Estimate {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

struct Panel {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Settings for [`gauss_kronrod`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Number of equal panels the interval is cut into before adapting.
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            initial_panels: 4,
            max_panels: 2000,
        }
    }
}

/// Globally adaptive Gauss–Kronrod 7/15 quadrature on `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol * |value|)`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    s: &AdaptiveSettings,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let n0 = s.initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(s.max_panels + n0);
    let (mut value, mut error) = (0.0, 0.0);
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 {
            b
        } else {
            a + width * (i + 1) as f64
        };
        let est = gk15(&f, lo, hi);
        value += est.value;
        error += est.error;
        heap.push(Panel { a: lo, b: hi, est });
    }
    while error > s.abs_tol.max(s.rel_tol * value.abs()) {
        if heap.len() >= s.max_panels {
            return Err(Error::Quadrature(format!(
                "Gauss-Kronrod on [{a}, {b}] hit {} panels with error {error:e}",
                s.max_panels
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel below floating-point resolution; keep its estimate.
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.est.value;
        error += left.error + right.error - worst.est.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            est: right,
        });
    }
    // Re-sum to shed the drift of incremental updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.est.value, e + p.est.error));
    Ok(Estimate { value, error })
}

/// Settings for the double-exponential rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleExpSettings {
    pub tol: f64,
    pub max_level: u32,
    /// Abscissa range `|t| <= t_max` in the transformed variable.
    pub t_max: f64,
}

impl Default for DoubleExpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_level: 12,
            t_max: 4.0,
        }
    }
}

/// Runs the level-doubling trapezoid shared by tanh–sinh and exp–sinh.
/// `term(t)` returns the transformed integrand including the Jacobian.
fn double_exponential<T: Fn(f64) -> f64>(term: T, s: &DoubleExpSettings) -> Result<Estimate> {
    let mut h = 1.0;
    let mut sum = term(0.0);
    let mut k = 1;
    while k as f64 * h <= s.t_max {
        let t = k as f64 * h;
        sum += term(t) + term(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for level in 1..=s.max_level {
        h *= 0.5;
        let mut fresh = 0.0;
        let mut k = 1;
        while k as f64 * h <= s.t_max {
            let t = k as f64 * h;
            fresh += term(t) + term(-t);
            k += 2;
        }
        sum += fresh;
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if level >= 3 && diff <= s.tol.max(s.tol * next.abs()) {
            return Ok(Estimate {
                value: next,
                error: diff,
            });
        }
    }
    Err(Error::Quadrature(format!(
        "double-exponential rule did not settle after {} levels (value {estimate})",
        s.max_level
    )))
}

/// Tanh–sinh quadrature on `[a, b]`; tolerates integrable endpoint
/// singularities. Nodes never touch the endpoints.
pub fn tanh_sinh<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    s: &DoubleExpSettings,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let half = 0.5 * (b - a);
    double_exponential(
        |t| {
            let u = FRAC_PI_2 * t.sinh();
            let cosh_u = u.cosh();
            // 1 - |tanh u| computed without cancellation.
            let complement = 1.0 / (u.abs().exp() * cosh_u);
            let w = FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
            if w == 0.0 || complement == 0.0 {
                return 0.0;
            }
            let x = if u >= 0.0 {
                b - half * complement
            } else {
                a + half * complement
            };
            half * w * f(x)
        },
        s,
    )
}

/// Exp–sinh quadrature on `[a, ∞)` via `x = a + exp(π/2 sinh t)`.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, a: f64, s: &DoubleExpSettings) -> Result<Estimate> {
    double_exponential(
        |t| {
            let e = (FRAC_PI_2 * t.sinh()).exp();
            if e == 0.0 || !e.is_finite() {
                return 0.0;
            }
            let jac = FRAC_PI_2 * t.cosh() * e;
            let v = f(a + e);
            if v == 0.0 {
                0.0
            } else {
                v * jac
            }
        },
        s,
    )
}

/// Gauss–Hermite rule for the weight `exp(-x²)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "Gauss-Hermite needs at least one node"));
        }
        const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Quadrature(format!("Gauss-Hermite node {i} of {n}")));
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        Ok(Self {
            nodes: x,
            weights: w,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫ exp(-x²) f(x) dx.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// E[f(Z)] for a standard normal Z.
    pub fn expect_normal<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let s2 = std::f64::consts::SQRT_2;
        self.integrate(|x| f(s2 * x)) / PI.sqrt()
    }
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}
