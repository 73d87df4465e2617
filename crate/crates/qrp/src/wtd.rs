//! Waiting-time distributions of the renewal process: exponential and Erlang
//! densities, survival probabilities, sampling, and modified sequences where
//! the first k waiting times follow their own distributions.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the Erlang shape parameter; keeps factorial-free evaluation
/// well-conditioned.
pub const MAX_ERLANG_SHAPE: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WtdSpec {
    /// `f(t) = rate * exp(-rate t)`.
    Exponential { rate: f64 },
    /// Convolution of `shape` exponentials with the same rate:
    /// `f(t) = rate^shape t^(shape-1) exp(-rate t) / (shape-1)!`.
    Erlang { rate: f64, shape: u32 },
}

fn check_rate(rate: f64) -> Result<()> {
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "waiting-time rate must be positive and finite, got {rate}"
        )));
    }
    Ok(())
}

impl WtdSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(WtdSpec::Exponential { rate })
    }

    pub fn erlang(rate: f64, shape: u32) -> Result<Self> {
        check_rate(rate)?;
        if shape == 0 || shape > MAX_ERLANG_SHAPE {
            return Err(Error::InvalidParameter(format!(
                "Erlang shape must lie in 1..={MAX_ERLANG_SHAPE}, got {shape}"
            )));
        }
        Ok(WtdSpec::Erlang { rate, shape })
    }

    pub fn rate(&self) -> f64 {
        match *self {
            WtdSpec::Exponential { rate } => rate,
            WtdSpec::Erlang { rate, .. } => rate,
        }
    }

    pub fn shape(&self) -> u32 {
        match *self {
            WtdSpec::Exponential { .. } => 1,
            WtdSpec::Erlang { shape, .. } => shape,
        }
    }

    /// Mean waiting time `shape / rate`.
    pub fn mean(&self) -> f64 {
        self.shape() as f64 / self.rate()
    }

    /// Variance `shape / rate^2`.
    pub fn variance(&self) -> f64 {
        self.shape() as f64 / (self.rate() * self.rate())
    }

    /// Probability density at `t >= 0`.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidParameter(format!("pdf time must be nonnegative, got {t}")));
        }
        Ok(self.pdf_unchecked(t))
    }

    #[inline]
    pub(crate) fn pdf_unchecked(&self, t: f64) -> f64 {
        match *self {
            WtdSpec::Exponential { rate } => rate * (-rate * t).exp(),
            WtdSpec::Erlang { rate, shape } => {
                if shape == 1 {
                    // Bit-identical to the exponential arm.
                    return rate * (-rate * t).exp();
                }
                if t == 0.0 {
                    return 0.0;
                }
                // Log-space keeps large shapes and rates from overflowing.
                let r = shape as f64;
                let mut ln_fact = 0.0;
                for j in 1..shape {
                    ln_fact += (j as f64).ln();
                }
                (r * rate.ln() + (r - 1.0) * t.ln() - rate * t - ln_fact).exp()
            }
        }
    }

    /// Survival probability `g(t) = 1 - integral of the pdf over [0, t]`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "survival time must be nonnegative, got {t}"
            )));
        }
        Ok(self.survival_unchecked(t))
    }

    #[inline]
    pub(crate) fn survival_unchecked(&self, t: f64) -> f64 {
        match *self {
            WtdSpec::Exponential { rate } => (-rate * t).exp(),
            WtdSpec::Erlang { rate, shape } => {
                // exp(-rate t) * sum_{j<shape} (rate t)^j / j!, accumulated in
                // scaled form so every term stays bounded.
                let x = rate * t;
                let mut term = (-x).exp();
                let mut sum = term;
                for j in 1..shape {
                    term *= x / j as f64;
                    sum += term;
                }
                sum.min(1.0)
            }
        }
    }

    /// Draws a strictly positive waiting time. Erlang draws are the sum of
    /// `shape` exponential draws, which is exact and branch-free.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let exp = Exp::new(self.rate()).expect("rate validated at construction");
        loop {
            let mut total = 0.0;
            for _ in 0..self.shape() {
                total += exp.sample(rng);
            }
            if total > 0.0 {
                return total;
            }
        }
    }
}

/// Modified renewal sequence: the first k waiting times have their own
/// distributions, all later ones follow the stationary distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtdSequence {
    modified: Vec<WtdSpec>,
    stationary: WtdSpec,
}

impl WtdSequence {
    pub fn new(modified: Vec<WtdSpec>, stationary: WtdSpec) -> Self {
        WtdSequence { modified, stationary }
    }

    /// Standard (unmodified) process: every waiting time is stationary.
    pub fn standard(stationary: WtdSpec) -> Self {
        WtdSequence { modified: Vec::new(), stationary }
    }

    /// Number of modified leading distributions (k).
    pub fn modified_count(&self) -> usize {
        self.modified.len()
    }

    pub fn modified(&self) -> &[WtdSpec] {
        &self.modified
    }

    pub fn stationary(&self) -> &WtdSpec {
        &self.stationary
    }

    /// Distribution of the n-th waiting time, 1-based: `f_n` for `n <= k`,
    /// the stationary distribution afterwards.
    pub fn nth_wtd(&self, n: usize) -> &WtdSpec {
        debug_assert!(n >= 1, "waiting times are 1-indexed");
        if n >= 1 && n <= self.modified.len() {
            &self.modified[n - 1]
        } else {
            &self.stationary
        }
    }

    /// True when every distribution in the sequence is exponential.
    pub fn all_exponential(&self) -> bool {
        self.modified
            .iter()
            .chain(std::iter::once(&self.stationary))
            .all(|w| matches!(w, WtdSpec::Exponential { .. }))
    }
}
