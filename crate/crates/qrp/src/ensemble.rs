//! Monte Carlo estimation of the trace-distance curve between two evolved
//! initial states.
//!
//! Every realization draws ONE set of jump times and applies it to both
//! initial states; the per-realization coordinate differences are averaged
//! first and the norm of the averaged difference is halved afterwards. This
//! is not an average trace distance over trajectories. The shared jump record
//! is what the estimator requires, and doubles as common-random-numbers
//! variance reduction.
//!
//! Determinism: trajectory `n` uses a ChaCha stream derived from
//! `(master seed, n)`, trajectories are accumulated in fixed-size index
//! blocks, and block partials merge in index order, so results are
//! bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{AffineChannel, BlochVector, StatePair};
use crate::dephasing::DephasingGenerator;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::trajectory::{draw_jump_times_into, evolve_states_on_grid};
use crate::wtd::WtdSequence;

/// Default per-trajectory jump cap.
pub const DEFAULT_MAX_JUMPS: usize = 10_000;
/// A run fails when more than this fraction of trajectories hit the cap.
pub const MAX_TRUNCATED_FRACTION: f64 = 1e-6;

/// Trajectories per accumulation block; fixed so the reduction order (and
/// thus the bit pattern of every sum) does not depend on scheduling.
const BLOCK: usize = 1024;

/// The three ingredients of a quantum renewal process: continuous evolution,
/// jump channel, and waiting-time sequence.
#[derive(Debug, Clone)]
pub struct ProcessModel {
    pub generator: DephasingGenerator,
    pub channel: AffineChannel,
    pub wtds: WtdSequence,
}

/// One Monte Carlo run specification.
#[derive(Debug, Clone)]
pub struct EnsembleRun<'a> {
    pub model: &'a ProcessModel,
    pub pair: StatePair,
    pub grid: TimeGrid,
    pub trajectories: usize,
    pub seed: u64,
    pub max_jumps: usize,
}

impl<'a> EnsembleRun<'a> {
    pub fn new(
        model: &'a ProcessModel,
        pair: StatePair,
        grid: TimeGrid,
        trajectories: usize,
        seed: u64,
    ) -> Self {
        EnsembleRun {
            model,
            pair,
            grid,
            trajectories,
            seed,
            max_jumps: DEFAULT_MAX_JUMPS,
        }
    }

    pub fn with_max_jumps(mut self, max_jumps: usize) -> Self {
        self.max_jumps = max_jumps;
        self
    }
}

/// Independent RNG stream for one trajectory, derived from the master seed
/// and the trajectory index via ChaCha's counter-style stream selection.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Trace-distance estimate with pointwise standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceCurve {
    pub grid: TimeGrid,
    /// Trace-distance estimate per grid point.
    pub distance: Vec<f64>,
    /// Delta-method standard error per grid point, floored at half the
    /// largest component standard error where the norm degenerates.
    pub stderr: Vec<f64>,
    /// Number of realizations.
    pub trajectories: usize,
    /// Master seed of the run.
    pub seed: u64,
    /// Realizations that hit the jump cap.
    pub truncated: usize,
}

impl DistanceCurve {
    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().cloned().fold(0.0, f64::max)
    }
}

/// Ensemble-averaged Bloch coordinates of the two evolved states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanBlochCurves {
    pub grid: TimeGrid,
    pub plus: Vec<BlochVector>,
    pub minus: Vec<BlochVector>,
    pub trajectories: usize,
    pub seed: u64,
}

/// Raw accumulated moments of one run; both public views derive from it, so
/// the distance estimate and the mean curves always share their samples.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    grid: TimeGrid,
    trajectories: usize,
    seed: u64,
    truncated: usize,
    diff_sum: Vec<[f64; 3]>,
    diff_sq_sum: Vec<[f64; 3]>,
    plus_sum: Vec<[f64; 3]>,
    minus_sum: Vec<[f64; 3]>,
}

#[derive(Clone)]
struct BlockPartial {
    diff_sum: Vec<[f64; 3]>,
    diff_sq_sum: Vec<[f64; 3]>,
    plus_sum: Vec<[f64; 3]>,
    minus_sum: Vec<[f64; 3]>,
    truncated: usize,
}

impl BlockPartial {
    fn zero(points: usize) -> Self {
        BlockPartial {
            diff_sum: vec![[0.0; 3]; points],
            diff_sq_sum: vec![[0.0; 3]; points],
            plus_sum: vec![[0.0; 3]; points],
            minus_sum: vec![[0.0; 3]; points],
            truncated: 0,
        }
    }
}

/// Runs the Monte Carlo ensemble and returns the accumulated statistics.
pub fn run(params: &EnsembleRun<'_>) -> Result<EnsembleStats> {
    if params.trajectories == 0 {
        return Err(Error::InvalidParameter(
            "ensemble needs at least one trajectory".into(),
        ));
    }
    if params.max_jumps == 0 {
        return Err(Error::InvalidParameter("max_jumps must be positive".into()));
    }
    let n = params.trajectories;
    let points = params.grid.len();
    let n_blocks = n.div_ceil(BLOCK);

    let partials: Vec<BlockPartial> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(n);
            let mut acc = BlockPartial::zero(points);
            let mut jumps: Vec<f64> = Vec::new();
            for index in lo..hi {
                let mut rng = trajectory_rng(params.seed, index as u64);
                let truncated = draw_jump_times_into(
                    &params.model.wtds,
                    params.grid.t_end(),
                    params.max_jumps,
                    &mut rng,
                    &mut jumps,
                );
                if truncated {
                    acc.truncated += 1;
                }
                evolve_states_on_grid(
                    [params.pair.plus, params.pair.minus],
                    &jumps,
                    &params.model.generator,
                    &params.model.channel,
                    &params.grid,
                    |j, [p, m]| {
                        let d = [p.x - m.x, p.y - m.y, p.z - m.z];
                        for (k, dk) in d.iter().enumerate() {
                            acc.diff_sum[j][k] += dk;
                            acc.diff_sq_sum[j][k] += dk * dk;
                        }
                        acc.plus_sum[j][0] += p.x;
                        acc.plus_sum[j][1] += p.y;
                        acc.plus_sum[j][2] += p.z;
                        acc.minus_sum[j][0] += m.x;
                        acc.minus_sum[j][1] += m.y;
                        acc.minus_sum[j][2] += m.z;
                    },
                );
            }
            acc
        })
        .collect();

    // Blocks merge in index order regardless of which worker produced them.
    let mut total = BlockPartial::zero(points);
    for p in partials {
        total.truncated += p.truncated;
        for j in 0..points {
            for k in 0..3 {
                total.diff_sum[j][k] += p.diff_sum[j][k];
                total.diff_sq_sum[j][k] += p.diff_sq_sum[j][k];
                total.plus_sum[j][k] += p.plus_sum[j][k];
                total.minus_sum[j][k] += p.minus_sum[j][k];
            }
        }
    }

    let truncated_fraction = total.truncated as f64 / n as f64;
    if truncated_fraction > MAX_TRUNCATED_FRACTION {
        return Err(Error::NumericalQuality(format!(
            "{} of {} trajectories hit the jump cap {} (fraction {:.2e} > {:.0e}); \
             raise max_jumps or shorten the horizon",
            total.truncated, n, params.max_jumps, truncated_fraction, MAX_TRUNCATED_FRACTION
        )));
    }

    Ok(EnsembleStats {
        grid: params.grid,
        trajectories: n,
        seed: params.seed,
        truncated: total.truncated,
        diff_sum: total.diff_sum,
        diff_sq_sum: total.diff_sq_sum,
        plus_sum: total.plus_sum,
        minus_sum: total.minus_sum,
    })
}

impl EnsembleStats {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn trajectories(&self) -> usize {
        self.trajectories
    }

    pub fn truncated(&self) -> usize {
        self.truncated
    }

    /// Distance estimate: half the norm of the averaged coordinate
    /// differences, with a delta-method standard error.
    pub fn distance_curve(&self) -> DistanceCurve {
        let n = self.trajectories as f64;
        let points = self.grid.len();
        let mut distance = Vec::with_capacity(points);
        let mut stderr = Vec::with_capacity(points);
        for j in 0..points {
            let mean = [
                self.diff_sum[j][0] / n,
                self.diff_sum[j][1] / n,
                self.diff_sum[j][2] / n,
            ];
            let s = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
            distance.push(0.5 * s);

            if self.trajectories < 2 {
                stderr.push(0.0);
                continue;
            }
            let mut var_mean = [0.0; 3];
            for (k, slot) in var_mean.iter_mut().enumerate() {
                let var = (self.diff_sq_sum[j][k] - self.diff_sum[j][k] * self.diff_sum[j][k] / n)
                    / (n - 1.0);
                *slot = (var / n).max(0.0);
            }
            // Delta method on D = |mean|/2; degenerate near zero, so floor at
            // half the largest component standard error.
            let floor = 0.5 * var_mean.iter().map(|v| v.sqrt()).fold(0.0, f64::max);
            let delta = if s > 0.0 {
                let q = (0..3).map(|k| mean[k] * mean[k] * var_mean[k]).sum::<f64>();
                q.sqrt() / (2.0 * s)
            } else {
                0.0
            };
            stderr.push(delta.max(floor));
        }
        DistanceCurve {
            grid: self.grid,
            distance,
            stderr,
            trajectories: self.trajectories,
            seed: self.seed,
            truncated: self.truncated,
        }
    }

    /// Ensemble means of the two evolved states on the grid.
    pub fn mean_bloch_curves(&self) -> MeanBlochCurves {
        let n = self.trajectories as f64;
        let to_vec = |sums: &Vec<[f64; 3]>| {
            sums.iter()
                .map(|s| BlochVector::new(s[0] / n, s[1] / n, s[2] / n))
                .collect()
        };
        MeanBlochCurves {
            grid: self.grid,
            plus: to_vec(&self.plus_sum),
            minus: to_vec(&self.minus_sum),
            trajectories: self.trajectories,
            seed: self.seed,
        }
    }
}

/// Runs the ensemble and returns the distance curve.
pub fn estimate_distance_curve(params: &EnsembleRun<'_>) -> Result<DistanceCurve> {
    Ok(run(params)?.distance_curve())
}

/// Runs the ensemble and returns the averaged Bloch curves.
pub fn mean_bloch_curves(params: &EnsembleRun<'_>) -> Result<MeanBlochCurves> {
    Ok(run(params)?.mean_bloch_curves())
}
