//! Closed-form propagator for the unital dephasing generator used as the
//! time-continuous evolution between jumps.
//!
//! The generator is diagonal in the Pauli basis: each Bloch component decays
//! as `exp(-lambda_i t)` with `lambda_i = gamma_j + gamma_k` built from the
//! three Pauli channel rates. Propagation is exact, there is no time-stepping
//! error.

use serde::{Deserialize, Serialize};

use crate::bloch::{AffineChannel, BlochVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingGenerator {
    /// Per-axis Bloch decay rates (lambda_1, lambda_2, lambda_3).
    decay_rates: [f64; 3],
    /// Pauli channel rates (gamma_1, gamma_2, gamma_3) when the generator was
    /// built from them; absent when decay rates were given directly.
    pauli_rates: Option<[f64; 3]>,
}

fn check_rates(rates: &[f64; 3], what: &str) -> Result<()> {
    for &r in rates {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{what} must be nonnegative and finite, got {r}"
            )));
        }
    }
    Ok(())
}

impl DephasingGenerator {
    /// No continuous evolution (pure-jump dynamics).
    pub fn zero() -> Self {
        DephasingGenerator {
            decay_rates: [0.0; 3],
            pauli_rates: Some([0.0; 3]),
        }
    }

    /// Builds from the three Pauli channel rates; `lambda_i = gamma_j + gamma_k`.
    pub fn from_pauli_rates(gammas: [f64; 3]) -> Result<Self> {
        check_rates(&gammas, "dephasing gamma rates")?;
        Ok(DephasingGenerator {
            decay_rates: [gammas[1] + gammas[2], gammas[0] + gammas[2], gammas[0] + gammas[1]],
            pauli_rates: Some(gammas),
        })
    }

    /// Builds directly from the per-axis decay rates.
    pub fn from_decay_rates(lambdas: [f64; 3]) -> Result<Self> {
        check_rates(&lambdas, "dephasing lambda rates")?;
        Ok(DephasingGenerator {
            decay_rates: lambdas,
            pauli_rates: None,
        })
    }

    pub fn decay_rates(&self) -> [f64; 3] {
        self.decay_rates
    }

    pub fn pauli_rates(&self) -> Option<[f64; 3]> {
        self.pauli_rates
    }

    pub fn is_zero(&self) -> bool {
        self.decay_rates == [0.0; 3]
    }

    /// Component decay factors `exp(-lambda_i dt)` for a nonnegative interval.
    /// Zero and isotropic rate patterns dominate the trajectory hot loop, so
    /// they skip redundant `exp` calls.
    #[inline]
    pub fn decay_factors(&self, dt: f64) -> [f64; 3] {
        debug_assert!(dt >= 0.0);
        let [l1, l2, l3] = self.decay_rates;
        if l1 == l2 && l2 == l3 {
            if l1 == 0.0 {
                return [1.0; 3];
            }
            let e = (-l1 * dt).exp();
            return [e, e, e];
        }
        let f = |l: f64| if l == 0.0 { 1.0 } else { (-l * dt).exp() };
        [f(l1), f(l2), f(l3)]
    }

    #[inline]
    pub(crate) fn apply_factors(factors: [f64; 3], v: BlochVector) -> BlochVector {
        BlochVector::new(factors[0] * v.x, factors[1] * v.y, factors[2] * v.z)
    }

    /// Exact propagation of a state over `dt >= 0`.
    pub fn propagate(&self, v: BlochVector, dt: f64) -> Result<BlochVector> {
        if dt.is_nan() || dt < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "propagation interval must be nonnegative, got {dt}"
            )));
        }
        Ok(Self::apply_factors(self.decay_factors(dt), v))
    }

    /// Packages `exp(L dt)` as an affine channel for composition.
    pub fn as_channel(&self, dt: f64) -> Result<AffineChannel> {
        if dt.is_nan() || dt < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "propagation interval must be nonnegative, got {dt}"
            )));
        }
        let f = self.decay_factors(dt);
        Ok(AffineChannel {
            matrix: [[f[0], 0.0, 0.0], [0.0, f[1], 0.0], [0.0, 0.0, f[2]]],
            translation: [0.0; 3],
            label: format!("deph(dt={dt})"),
        })
    }
}
