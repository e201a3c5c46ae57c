//! Empirical distribution utilities.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A sorted copy of a nonempty sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    sorted: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(values: &[f64]) -> Result<Self> {
        Self::from_vec(values.to_vec())
    }

    pub fn from_vec(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid(
                "sample",
                "empirical sample needs at least one value",
            ));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("sample", "NaN in sample"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    /// `#{x <= y} / n`.
    pub fn ecdf(&self, y: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= y) as f64 / self.len() as f64
    }

    /// Lower order-statistic quantile: `x_(⌊p (n−1)⌋)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("p", format!("{p} is not in [0, 1]")));
        }
        let idx = (p * (self.len() - 1) as f64).floor() as usize;
        Ok(self.sorted[idx])
    }

    /// `sup_y |F_n(y) − F(y)|` over the jump points, checking both one-sided
    /// deviations at every order statistic. `F` is evaluated in parallel.
    pub fn ks_distance<F>(&self, cdf: F) -> f64
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let n = self.len() as f64;
        self.sorted
            .par_iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                let above = (i + 1) as f64 / n - f;
                let below = f - i as f64 / n;
                above.max(below)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Fraction of `samples` strictly above `threshold`.
pub fn exceedance_fraction(samples: &[f64], threshold: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "empty sample"));
    }
    Ok(samples.iter().filter(|&&v| v > threshold).count() as f64 / samples.len() as f64)
}

/// Median and quartiles.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(sample: &EmpiricalSample) -> Self {
        Self {
            q25: sample.quantile(0.25).expect("fixed p"),
            median: sample.quantile(0.5).expect("fixed p"),
            q75: sample.quantile(0.75).expect("fixed p"),
        }
    }
}
