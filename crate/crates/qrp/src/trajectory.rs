//! Single realizations of the quantum renewal process: random jump times and
//! exact piecewise-deterministic Bloch evolution.
//!
//! Between jumps the state follows the dephasing propagator, at each jump
//! time the jump channel is applied once. Grid values are always propagated
//! from the most recent event, so there is no time-stepping error and
//! refining the output grid reproduces shared points bit-for-bit. A jump
//! landing exactly on a grid point is applied before that point is read out.

use rand::Rng;

use crate::bloch::{AffineChannel, BlochVector};
use crate::dephasing::DephasingGenerator;
use crate::grid::TimeGrid;
use crate::wtd::WtdSequence;

/// Jump times of one realization, strictly increasing in `(0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTimes {
    times: Vec<f64>,
    truncated: bool,
}

impl JumpTimes {
    /// Wraps explicit jump times; callers must supply a strictly increasing
    /// sequence.
    pub fn from_times(times: Vec<f64>) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        JumpTimes { times, truncated: false }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn count(&self) -> usize {
        self.times.len()
    }

    /// True when the jump cap was reached before the draws exceeded the
    /// horizon, i.e. the realization may be missing late jumps.
    pub fn truncated(&self) -> bool {
        self.truncated
    }
}

/// Draws jump times by accumulating waiting times until the sum exceeds
/// `t_end`; the n-th waiting time follows `seq.nth_wtd(n)`.
pub fn draw_jump_times<R: Rng + ?Sized>(
    seq: &WtdSequence,
    t_end: f64,
    max_jumps: usize,
    rng: &mut R,
) -> JumpTimes {
    let mut times = Vec::new();
    let truncated = draw_jump_times_into(seq, t_end, max_jumps, rng, &mut times);
    JumpTimes { times, truncated }
}

/// Buffer-reusing core of [`draw_jump_times`]; returns the truncation flag.
pub(crate) fn draw_jump_times_into<R: Rng + ?Sized>(
    seq: &WtdSequence,
    t_end: f64,
    max_jumps: usize,
    rng: &mut R,
    times: &mut Vec<f64>,
) -> bool {
    times.clear();
    let mut t = 0.0;
    loop {
        if times.len() >= max_jumps {
            return true;
        }
        t += seq.nth_wtd(times.len() + 1).sample(rng);
        if t > t_end {
            return false;
        }
        times.push(t);
    }
}

/// One realization evaluated on an output grid.
#[derive(Debug, Clone)]
pub struct TrajectoryCurve {
    pub grid: TimeGrid,
    pub states: Vec<BlochVector>,
}

/// Walks `K` states through the same jump record, reporting the exact state
/// of each at every grid point.
pub(crate) fn evolve_states_on_grid<const K: usize>(
    initial: [BlochVector; K],
    jump_times: &[f64],
    generator: &DephasingGenerator,
    channel: &AffineChannel,
    grid: &TimeGrid,
    mut sink: impl FnMut(usize, [BlochVector; K]),
) {
    let mut state = initial;
    let mut t_last = 0.0;
    let mut next_jump = 0;
    for j in 0..grid.len() {
        let tj = grid.t(j);
        while next_jump < jump_times.len() && jump_times[next_jump] <= tj {
            let factors = generator.decay_factors(jump_times[next_jump] - t_last);
            for s in state.iter_mut() {
                *s = channel.apply(DephasingGenerator::apply_factors(factors, *s));
            }
            t_last = jump_times[next_jump];
            next_jump += 1;
        }
        let factors = generator.decay_factors(tj - t_last);
        let mut out = state;
        for s in out.iter_mut() {
            *s = DephasingGenerator::apply_factors(factors, *s);
        }
        sink(j, out);
    }
}

/// Exact evolution of a single initial state along one jump record.
pub fn evolve(
    initial: BlochVector,
    jumps: &JumpTimes,
    generator: &DephasingGenerator,
    channel: &AffineChannel,
    grid: &TimeGrid,
) -> TrajectoryCurve {
    let mut states = Vec::with_capacity(grid.len());
    evolve_states_on_grid([initial], jumps.times(), generator, channel, grid, |_, [s]| {
        states.push(s)
    });
    TrajectoryCurve { grid: *grid, states }
}
