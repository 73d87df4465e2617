//! Closed-form and semi-numerical oracles for pure-jump dynamics (no
//! continuous evolution, x-Pauli jumps).
//!
//! For that regime the optimal-pair trace distance equals `|q(t)|` where
//! `q = p_even - p_odd` is the difference between the probabilities of an
//! even and an odd number of jumps. Simple cases have closed forms; the
//! general case is evaluated as a truncated convolution series over the
//! jump-count decomposition
//!
//! `p_n(t) = (f_1 * f_2 * ... * f_n * g_{n+1})(t)`
//!
//! with `f_i` the i-th waiting-time density and `g_{n+1}` the survival
//! function of the next one. Convolutions run on a uniform grid with the
//! trapezoid rule at two resolutions and are Richardson-extrapolated; the
//! coarse/fine gap also yields the quadrature error estimate that backs the
//! resolution guard.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::wtd::{WtdSequence, WtdSpec};

/// Default total error budget for [`parity_series`].
pub const DEFAULT_SERIES_TOL: f64 = 1e-8;

/// Series terms are capped to keep runaway configurations from spinning.
const MAX_SERIES_TERMS: usize = 400;

/// Relative window around `mu1 = 2 mu` where the two-WTD closed form switches
/// to its removable-singularity expansion.
const TWO_WTD_SINGULAR_WINDOW: f64 = 1e-6;

/// Even/odd jump-count probabilities and their difference on a grid.
#[derive(Debug, Clone)]
pub struct ParityCurve {
    pub grid: TimeGrid,
    pub p_even: Vec<f64>,
    pub p_odd: Vec<f64>,
    pub q: Vec<f64>,
}

impl ParityCurve {
    fn from_q(grid: TimeGrid, q: Vec<f64>) -> Self {
        let p_even = q.iter().map(|v| 0.5 * (1.0 + v)).collect();
        let p_odd = q.iter().map(|v| 0.5 * (1.0 - v)).collect();
        ParityCurve { grid, p_even, p_odd, q }
    }

    /// `|q|`, the optimal-pair trace distance of the pure-jump process.
    pub fn distance(&self) -> Vec<f64> {
        self.q.iter().map(|v| v.abs()).collect()
    }
}

/// Unmodified exponential process: `q(t) = exp(-2 mu t)`.
pub fn q_markov(mu: f64, t: f64) -> f64 {
    debug_assert!(mu > 0.0 && t >= 0.0);
    (-2.0 * mu * t).exp()
}

/// Modified process with one leading exponential of rate `mu1` before the
/// stationary rate `mu`:
/// `q(t) = [2 (mu - mu1) e^{-mu1 t} + mu1 e^{-2 mu t}] / (2 mu - mu1)`.
///
/// The pole at `mu1 = 2 mu` is removable; inside a small window the value is
/// evaluated through a second-order expansion in `2 mu - mu1`.
pub fn q_exp_2wtd(mu: f64, mu1: f64, t: f64) -> f64 {
    debug_assert!(mu > 0.0 && mu1 > 0.0 && t >= 0.0);
    let a = 2.0 * mu - mu1;
    if a.abs() < TWO_WTD_SINGULAR_WINDOW * mu {
        // q = e^{-2 mu t} [1 - 2 mu t + a (2t - mu t^2) + a^2 (t^2 - mu t^3 / 3)]
        let correction = 1.0 - 2.0 * mu * t
            + a * (2.0 * t - mu * t * t)
            + a * a * (t * t - mu * t * t * t / 3.0);
        return (-2.0 * mu * t).exp() * correction;
    }
    (2.0 * (mu - mu1) * (-mu1 * t).exp() + mu1 * (-2.0 * mu * t).exp()) / a
}

/// Time of the single possible revival of the two-WTD exponential process:
/// `t = -ln(2 (mu1 - mu) / mu1) / (2 mu - mu1)`, defined only when
/// `mu1 > mu`. Near `mu1 = 2 mu` the expression is continued through its
/// limit `1 / (2 mu)`.
pub fn revival_time_exp_2wtd(mu: f64, mu1: f64) -> Option<f64> {
    debug_assert!(mu > 0.0 && mu1 > 0.0);
    if mu1 <= mu {
        return None;
    }
    let eps = mu1 - 2.0 * mu;
    if eps.abs() < TWO_WTD_SINGULAR_WINDOW * mu {
        let d = 2.0 * mu + eps;
        return Some(1.0 / d - eps / (2.0 * d * d));
    }
    Some(-(2.0 * (mu1 - mu) / mu1).ln() / (2.0 * mu - mu1))
}

/// Unmodified Erlang process. Shapes 1 and 2 use closed forms
/// (`exp(-2 mu t)` and `e^{-mu t} (sin mu t + cos mu t)`), larger shapes fall
/// back to the convolution series.
pub fn q_erlang_unmodified(mu: f64, shape: u32, grid: &TimeGrid) -> Result<ParityCurve> {
    match shape {
        0 => Err(Error::InvalidParameter("Erlang shape must be positive".into())),
        1 => Ok(ParityCurve::from_q(
            *grid,
            grid.times().map(|t| q_markov(mu, t)).collect(),
        )),
        2 => Ok(ParityCurve::from_q(
            *grid,
            grid.times()
                .map(|t| (-mu * t).exp() * ((mu * t).sin() + (mu * t).cos()))
                .collect(),
        )),
        _ => parity_series(
            &WtdSequence::standard(WtdSpec::erlang(mu, shape)?),
            grid,
            DEFAULT_SERIES_TOL,
        ),
    }
}

/// Modified Erlang process with both shapes equal to two: the first waiting
/// time is Erlang(2, mu1), the remaining ones Erlang(2, mu). The oscillatory
/// part decays at rate `mu`, the first-order polynomial part at `mu1`.
pub fn q_erlang_modified_22(mu: f64, mu1: f64, t: f64) -> f64 {
    debug_assert!(mu > 0.0 && mu1 > 0.0 && t >= 0.0);
    let denom = {
        let d = 2.0 * mu * mu - 2.0 * mu1 * mu + mu1 * mu1;
        d * d
    };
    let poly_a = mu1.powi(3) - 3.0 * mu1 * mu1 * mu + 2.0 * mu1 * mu * mu - 2.0 * mu.powi(3);
    let poly_b = mu1.powi(3) - 3.0 * mu1 * mu1 * mu + 4.0 * mu1 * mu * mu - 2.0 * mu.powi(3);
    let first = 2.0 * (mu1 - mu) * (-mu1 * t).exp() * (poly_a + t * mu1 * poly_b);
    let two_mu_minus_mu1 = 2.0 * mu - mu1;
    let osc_cos = two_mu_minus_mu1 * two_mu_minus_mu1 - 2.0 * mu * mu;
    let osc_sin = 2.0 * mu * mu - mu1 * mu1;
    let second =
        mu1 * mu1 * (-mu * t).exp() * (osc_cos * (mu * t).cos() - osc_sin * (mu * t).sin());
    (first - second) / denom
}

/// Strict sign changes of a sampled function, zeros skipped.
pub fn count_sign_changes(values: &[f64]) -> usize {
    count_sign_changes_filtered(values, 0.0)
}

/// Sign changes with amplitude hysteresis: a flip only registers once the
/// value exceeds `threshold` in magnitude on the new side. Used when the
/// curve carries numerical error of known size.
pub fn count_sign_changes_filtered(values: &[f64], threshold: f64) -> usize {
    let mut count = 0;
    let mut last_sign = 0i8;
    for &v in values {
        let sign = if v > threshold {
            1
        } else if v < -threshold {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                count += 1;
            }
            last_sign = sign;
        }
    }
    count
}

/// A parity curve plus provenance: which oracle produced it and the size of
/// its numerical error (zero for closed forms).
#[derive(Debug, Clone)]
pub struct QOracle {
    pub curve: ParityCurve,
    pub route: &'static str,
    pub numeric_tol: f64,
}

/// Dispatches a waiting-time sequence to the tightest available q-oracle:
/// closed forms where they exist, the convolution series otherwise.
pub fn q_oracle(seq: &WtdSequence, grid: &TimeGrid, tol: f64) -> Result<QOracle> {
    let closed = |route, q: Vec<f64>| QOracle {
        curve: ParityCurve::from_q(*grid, q),
        route,
        numeric_tol: 0.0,
    };
    match (seq.modified(), seq.stationary()) {
        ([], WtdSpec::Exponential { rate }) => Ok(closed(
            "exp-markov",
            grid.times().map(|t| q_markov(*rate, t)).collect(),
        )),
        ([], WtdSpec::Erlang { rate, shape: 2 }) => Ok(closed(
            "erlang-r2",
            grid.times()
                .map(|t| (-rate * t).exp() * ((rate * t).sin() + (rate * t).cos()))
                .collect(),
        )),
        ([WtdSpec::Exponential { rate: rate1 }], WtdSpec::Exponential { rate }) => Ok(closed(
            "exp-2wtd",
            grid.times().map(|t| q_exp_2wtd(*rate, *rate1, t)).collect(),
        )),
        ([WtdSpec::Erlang { rate: rate1, shape: 2 }], WtdSpec::Erlang { rate, shape: 2 }) => {
            Ok(closed(
                "erlang-modified-22",
                grid.times()
                    .map(|t| q_erlang_modified_22(*rate, *rate1, t))
                    .collect(),
            ))
        }
        _ => Ok(QOracle {
            curve: parity_series(seq, grid, tol)?,
            route: "convolution-series",
            numeric_tol: tol,
        }),
    }
}

/// Evaluates the jump-parity series for an arbitrary in-scope sequence.
///
/// `tol` is the total error budget: the series tail mass and the estimated
/// quadrature error must each stay below `tol / 2`, which keeps
/// `p_even + p_odd = 1` within `tol`. Returns a resolution error when the
/// grid cannot deliver that accuracy.
pub fn parity_series(seq: &WtdSequence, grid: &TimeGrid, tol: f64) -> Result<ParityCurve> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "series tolerance must be positive, got {tol}"
        )));
    }
    let budget = 0.5 * tol;
    let fine_grid = grid.refine(2);
    let coarse = raw_parity_series(seq, grid, budget)?;
    let fine = raw_parity_series(seq, &fine_grid, budget)?;

    let points = grid.len();
    let mut p_even = Vec::with_capacity(points);
    let mut p_odd = Vec::with_capacity(points);
    let mut quad_err: f64 = 0.0;
    for j in 0..points {
        let (ec, oc) = (coarse.0[j], coarse.1[j]);
        let (ef, of) = (fine.0[2 * j], fine.1[2 * j]);
        // Trapezoid error is O(dt^2): Richardson-extrapolate and use the
        // coarse/fine gap as the (conservative) error estimate.
        quad_err = quad_err.max(((ef - ec) / 3.0).abs().max(((of - oc) / 3.0).abs()));
        p_even.push((4.0 * ef - ec) / 3.0);
        p_odd.push((4.0 * of - oc) / 3.0);
    }
    if quad_err > budget {
        return Err(Error::NumericalQuality(format!(
            "parity series quadrature error estimate {quad_err:.3e} exceeds budget {budget:.3e}; \
             refine the grid or relax the tolerance"
        )));
    }
    let norm_err = p_even
        .iter()
        .zip(&p_odd)
        .map(|(e, o)| (e + o - 1.0).abs())
        .fold(0.0, f64::max);
    if norm_err > tol {
        return Err(Error::NumericalQuality(format!(
            "parity normalization defect {norm_err:.3e} exceeds tolerance {tol:.3e}"
        )));
    }
    let q = p_even.iter().zip(&p_odd).map(|(e, o)| e - o).collect();
    Ok(ParityCurve { grid: *grid, p_even, p_odd, q })
}

/// Single-grid trapezoid evaluation of the parity sums, truncated when the
/// probability of further jumps within the horizon drops below `tail_budget`.
fn raw_parity_series(
    seq: &WtdSequence,
    grid: &TimeGrid,
    tail_budget: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let points = grid.len();
    let dt = grid.dt();

    // p_0 = survival of the first waiting time.
    let mut p_even: Vec<f64> = grid
        .times()
        .map(|t| seq.nth_wtd(1).survival_unchecked(t))
        .collect();
    let mut p_odd = vec![0.0; points];

    // Density of the n-jump arrival time, starting with n = 1.
    let mut arrival: Vec<f64> = grid.times().map(|t| seq.nth_wtd(1).pdf_unchecked(t)).collect();

    let mut survival_buf = vec![0.0; points];
    let mut term = vec![0.0; points];
    let mut next_arrival = vec![0.0; points];

    for n in 1..=MAX_SERIES_TERMS {
        // Remaining mass bound: P(n-th jump happens before the horizon).
        let tail = trapezoid_mass(&arrival, dt);
        if tail < tail_budget {
            return Ok((p_even, p_odd));
        }

        let next_wtd = seq.nth_wtd(n + 1);
        for (j, t) in grid.times().enumerate() {
            survival_buf[j] = next_wtd.survival_unchecked(t);
        }
        convolve_into(&arrival, &survival_buf, dt, &mut term);
        let target = if n % 2 == 0 { &mut p_even } else { &mut p_odd };
        for j in 0..points {
            target[j] += term[j];
        }

        for (j, t) in grid.times().enumerate() {
            survival_buf[j] = next_wtd.pdf_unchecked(t);
        }
        convolve_into(&arrival, &survival_buf, dt, &mut next_arrival);
        std::mem::swap(&mut arrival, &mut next_arrival);
    }
    Err(Error::NumericalQuality(format!(
        "parity series did not converge within {MAX_SERIES_TERMS} terms; \
         the jump rate is too high for this horizon"
    )))
}

/// Trapezoid integral of a sampled function over the whole grid.
fn trapezoid_mass(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    dt * (0.5 * values[0] + interior + 0.5 * values[values.len() - 1])
}

/// Trapezoid convolution `(a * b)(t_j)` on a shared uniform grid.
fn convolve_into(a: &[f64], b: &[f64], dt: f64, out: &mut [f64]) {
    let n = a.len();
    out[0] = 0.0;
    for j in 1..n {
        let mut acc = 0.5 * (a[0] * b[j] + a[j] * b[0]);
        for i in 1..j {
            acc += a[i] * b[j - i];
        }
        out[j] = acc * dt;
    }
}
