//! Uniform output time grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `steps + 1` points on `[0, t_end]`.
///
/// Point `j` sits at `j * (t_end / steps)`. Refining a grid by an integer
/// factor reproduces the original points bit-for-bit, which the trajectory
/// evolution relies on for its grid-independence guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !t_end.is_finite() || t_end <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "grid t_end must be positive and finite, got {t_end}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("grid needs at least one step".into()));
        }
        Ok(TimeGrid { t_end, steps })
    }

    /// Builds the grid whose step is closest to `dt_out`.
    pub fn from_step(t_end: f64, dt_out: f64) -> Result<Self> {
        if !dt_out.is_finite() || dt_out <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "grid step must be positive and finite, got {dt_out}"
            )));
        }
        let steps = (t_end / dt_out).round().max(1.0) as usize;
        TimeGrid::new(t_end, steps)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points (`steps + 1`).
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    /// Time of point `j`.
    pub fn t(&self, j: usize) -> f64 {
        debug_assert!(j <= self.steps);
        j as f64 * self.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.t(j))
    }

    /// Same span, `factor`-times finer.
    pub fn refine(&self, factor: usize) -> Self {
        TimeGrid {
            t_end: self.t_end,
            steps: self.steps * factor.max(1),
        }
    }
}
