//! Command implementations behind the binary: simulate, sweep, optimize,
//! analytic. Each writes deterministic CSV/JSON artifacts tagged with the
//! tool version, config hash, and seed, so identical invocations reproduce
//! outputs byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analytic::{self, QOracle};
use crate::config::{Experiment, ExperimentConfig};
use crate::ensemble::{estimate_distance_curve, DistanceCurve, EnsembleRun};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::nonmarkov::{
    self, count_revivals_sweep, detect_revivals_on_values, NmReport, OptimizeRequest, SweepCell,
};
use crate::trajectory::{draw_jump_times, evolve};
use crate::VERSION;

/// Detection threshold for noise-free oracle curves when the config does not
/// pin one; closed forms carry no numerical error, series curves widen this
/// by their tolerance.
const ANALYTIC_DELTA: f64 = 1e-9;

/// Metadata block embedded in every JSON artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub trajectories: usize,
}

impl RunMetadata {
    fn new(exp: &Experiment) -> Self {
        RunMetadata {
            version: VERSION.to_string(),
            config_hash: exp.config_hash.clone(),
            seed: exp.config.seed,
            trajectories: exp.config.trajectories,
        }
    }

    fn csv_header(&self) -> String {
        format!(
            "# version={} config_hash={} seed={} N={}\n",
            self.version, self.config_hash, self.seed, self.trajectories
        )
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

/// Files produced by a command, in creation order.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct SimulateReport {
    meta: RunMetadata,
    delta: f64,
    truncated: usize,
    measure: f64,
    measure_stderr: f64,
    revivals: Vec<nonmarkov::Revival>,
}

fn curve_csv(meta: &RunMetadata, curve: &DistanceCurve) -> String {
    let mut out = meta.csv_header();
    out.push_str("t,D,stderr\n");
    for (j, t) in curve.grid.times().enumerate() {
        let _ = writeln!(out, "{},{},{}", t, curve.distance[j], curve.stderr[j]);
    }
    out
}

/// Runs the ensemble for an explicit pair, detects revivals, writes
/// `curve.csv` and `report.json` (plus optional per-trajectory dumps).
pub fn cmd_simulate(exp: &Experiment, out_dir: &Path) -> Result<Outputs> {
    let pair = exp.pair.ok_or_else(|| {
        Error::Config("simulate needs an explicit pair direction; use the optimize command".into())
    })?;
    let run = EnsembleRun {
        model: &exp.model,
        pair,
        grid: exp.grid,
        trajectories: exp.config.trajectories,
        seed: exp.config.seed,
        max_jumps: exp.max_jumps,
    };
    let curve = estimate_distance_curve(&run)?;
    let delta = exp.config.delta.unwrap_or_else(|| nonmarkov::default_delta(&curve));
    let report = NmReport::from_curve(&curve, delta)?;
    let meta = RunMetadata::new(exp);

    let mut outputs = Outputs::default();
    let curve_path = out_dir.join("curve.csv");
    write_file(&curve_path, &curve_csv(&meta, &curve))?;
    outputs.files.push(curve_path);

    let report_path = out_dir.join("report.json");
    write_json(
        &report_path,
        &SimulateReport {
            meta,
            delta,
            truncated: curve.truncated,
            measure: report.measure,
            measure_stderr: report.measure_stderr,
            revivals: report.revivals,
        },
    )?;
    outputs.files.push(report_path);

    if let Some(count) = exp.config.dump_trajectories {
        outputs.files.extend(dump_trajectories(exp, pair, count, out_dir)?);
    }
    Ok(outputs)
}

/// Re-generates the first `count` trajectory streams and writes each as
/// `trajectory_<i>.csv` with columns `t,x,y,z` (the `plus` state).
fn dump_trajectories(
    exp: &Experiment,
    pair: crate::bloch::StatePair,
    count: usize,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let meta = RunMetadata::new(exp);
    for index in 0..count.min(exp.config.trajectories) {
        let mut rng = crate::ensemble::trajectory_rng(exp.config.seed, index as u64);
        let jumps = draw_jump_times(&exp.model.wtds, exp.grid.t_end(), exp.max_jumps, &mut rng);
        let curve = evolve(pair.plus, &jumps, &exp.model.generator, &exp.model.channel, &exp.grid);
        let mut out = meta.csv_header();
        out.push_str("t,x,y,z\n");
        for (j, t) in curve.grid.times().enumerate() {
            let s = curve.states[j];
            let _ = writeln!(out, "{},{},{},{}", t, s.x, s.y, s.z);
        }
        let path = out_dir.join(format!("trajectory_{index}.csv"));
        write_file(&path, &out)?;
        files.push(path);
    }
    Ok(files)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellRoute {
    Mc,
    Analytic,
}

/// Whether the pure-jump q-oracle applies: x jumps, no continuous evolution,
/// and an initial pair orthogonal to the rotation axis.
fn analytic_eligible(exp: &Experiment) -> bool {
    exp.config.channel.kind == "x"
        && exp.model.generator.is_zero()
        && exp
            .pair
            .map(|p| p.plus.x.abs() < 1e-12)
            .unwrap_or(false)
}

fn choose_route(exp: &Experiment) -> Result<CellRoute> {
    match exp.config.method.as_deref().unwrap_or("auto") {
        "mc" => Ok(CellRoute::Mc),
        "analytic" => {
            if analytic_eligible(exp) {
                Ok(CellRoute::Analytic)
            } else {
                Err(Error::Config(
                    "analytic method needs an x jump channel, zero generator, and a pair \
                     direction orthogonal to x"
                        .into(),
                ))
            }
        }
        _ => Ok(if analytic_eligible(exp) {
            CellRoute::Analytic
        } else {
            CellRoute::Mc
        }),
    }
}

/// Revival count and measure of one sweep cell.
fn eval_cell(cfg: &ExperimentConfig) -> Result<(usize, f64)> {
    let exp = cfg.validate()?;
    match choose_route(&exp)? {
        CellRoute::Mc => {
            let pair = exp.pair.ok_or_else(|| {
                Error::Config("sweep cells need an explicit pair direction".into())
            })?;
            let run = EnsembleRun {
                model: &exp.model,
                pair,
                grid: exp.grid,
                trajectories: exp.config.trajectories,
                seed: exp.config.seed,
                max_jumps: exp.max_jumps,
            };
            let curve = estimate_distance_curve(&run)?;
            let delta = cfg.delta.unwrap_or_else(|| nonmarkov::default_delta(&curve));
            let revivals = nonmarkov::detect_revivals(&curve, delta)?;
            Ok((revivals.len(), nonmarkov::sum_heights(&revivals)))
        }
        CellRoute::Analytic => {
            let oracle = analytic::q_oracle(
                &exp.model.wtds,
                &exp.grid,
                cfg.tol.unwrap_or(analytic::DEFAULT_SERIES_TOL),
            )?;
            let delta = cfg
                .delta
                .unwrap_or_else(|| ANALYTIC_DELTA.max(10.0 * oracle.numeric_tol));
            let distance = oracle.curve.distance();
            let revivals = detect_revivals_on_values(&distance, &exp.grid, delta)?;
            Ok((revivals.len(), nonmarkov::sum_heights(&revivals)))
        }
    }
}

#[derive(Serialize)]
struct SweepReport {
    meta: RunMetadata,
    axis1: String,
    axis2: Option<String>,
    cells: usize,
}

/// Evaluates a 1D or 2D parameter grid and writes `heatmap.csv`
/// (`param1,param2,revival_count,measure`) plus `sweep.json`.
pub fn cmd_sweep(exp: &Experiment, out_dir: &Path) -> Result<Outputs> {
    let sweep = exp
        .config
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep command needs a \"sweep\" section".into()))?;
    let axis1_values = sweep.axis1.resolve()?;
    if sweep.axis1.param == "t" {
        return Err(Error::Config("axis1 cannot be 't'; use it as axis2".into()));
    }

    let rows: Vec<SweepCell> = match &sweep.axis2 {
        Some(axis2) if axis2.param == "t" => {
            sweep_time_axis(exp, &sweep.axis1.param, &axis1_values, &axis2.resolve()?)?
        }
        Some(axis2) => {
            let axis2_values = axis2.resolve()?;
            let mut cells = Vec::with_capacity(axis1_values.len() * axis2_values.len());
            for &v1 in &axis1_values {
                for &v2 in &axis2_values {
                    cells.push((v1, v2));
                }
            }
            let base = exp.config.clone();
            let (p1, p2) = (sweep.axis1.param.clone(), axis2.param.clone());
            count_revivals_sweep(&cells, |a, b| {
                eval_cell(&base.with_param(&p1, a)?.with_param(&p2, b)?)
            })?
        }
        None => {
            let cells: Vec<(f64, f64)> = axis1_values.iter().map(|&v| (v, 0.0)).collect();
            let base = exp.config.clone();
            let p1 = sweep.axis1.param.clone();
            count_revivals_sweep(&cells, |a, _| eval_cell(&base.with_param(&p1, a)?))?
        }
    };

    let meta = RunMetadata::new(exp);
    let mut csv = meta.csv_header();
    csv.push_str("param1,param2,revival_count,measure\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            row.param1, row.param2, row.revival_count, row.measure
        );
    }

    let mut outputs = Outputs::default();
    let heatmap_path = out_dir.join("heatmap.csv");
    write_file(&heatmap_path, &csv)?;
    outputs.files.push(heatmap_path);

    let report_path = out_dir.join("sweep.json");
    write_json(
        &report_path,
        &SweepReport {
            meta,
            axis1: sweep.axis1.param.clone(),
            axis2: sweep.axis2.as_ref().map(|a| a.param.clone()),
            cells: rows.len(),
        },
    )?;
    outputs.files.push(report_path);
    Ok(outputs)
}

/// Time-axis sweep: per axis1 value, report the cumulative sign-change count
/// and the oracle q value at each requested time.
fn sweep_time_axis(
    exp: &Experiment,
    param: &str,
    values: &[f64],
    times: &[f64],
) -> Result<Vec<SweepCell>> {
    let mut rows = Vec::with_capacity(values.len() * times.len());
    for &v in values {
        let cfg = exp.config.with_param(param, v)?;
        let cell_exp = cfg.validate()?;
        if !analytic_eligible(&cell_exp) {
            return Err(Error::Config(
                "a 't' axis requires the analytic route (x channel, zero generator, pair \
                 orthogonal to x)"
                    .into(),
            ));
        }
        let oracle = analytic::q_oracle(
            &cell_exp.model.wtds,
            &cell_exp.grid,
            cfg.tol.unwrap_or(analytic::DEFAULT_SERIES_TOL),
        )?;
        let hysteresis = 10.0 * oracle.numeric_tol;
        for &t in times {
            let j = ((t / cell_exp.grid.dt()).round() as usize).min(cell_exp.grid.steps());
            let changes =
                analytic::count_sign_changes_filtered(&oracle.curve.q[..=j], hysteresis);
            rows.push(SweepCell {
                param1: v,
                param2: cell_exp.grid.t(j),
                revival_count: changes,
                measure: oracle.curve.q[j],
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct OptimizeReport {
    meta: RunMetadata,
    report: NmReport,
}

/// Optimizes the initial pair over the direction mesh and writes
/// `optimize.json` with the full landscape trace.
pub fn cmd_optimize(exp: &Experiment, out_dir: &Path) -> Result<Outputs> {
    if !exp.optimize {
        return Err(Error::Config(
            "optimize command needs \"pair\": \"optimize\" in the config".into(),
        ));
    }
    let request = OptimizeRequest {
        model: &exp.model,
        grid: exp.grid,
        trajectories: exp.config.trajectories,
        seed: exp.config.seed,
        max_jumps: exp.max_jumps,
        delta: exp.config.delta,
    };
    let report = nonmarkov::optimize_pair(&request)?;
    let mut outputs = Outputs::default();
    let path = out_dir.join("optimize.json");
    write_json(&path, &OptimizeReport { meta: RunMetadata::new(exp), report })?;
    outputs.files.push(path);
    Ok(outputs)
}

#[derive(Serialize)]
struct AnalyticReport {
    meta: RunMetadata,
    oracle: String,
    numeric_tol: f64,
    sign_changes: usize,
    zero_crossings: Vec<f64>,
    mc_residual_max: Option<f64>,
    mc_stderr_bound: Option<f64>,
    mc_bridge_ok: Option<bool>,
}

/// Evaluates the pure-jump q-oracle, writes `parity.csv`
/// (`t,p_even,p_odd,q`) and `analytic_report.json`; unless `method` is
/// `"analytic"`, also runs the Monte Carlo estimator and reports the maximum
/// residual `|D - |q||` against the pointwise three-sigma bound.
pub fn cmd_analytic(exp: &Experiment, out_dir: &Path) -> Result<Outputs> {
    if !analytic_eligible(exp) {
        return Err(Error::Config(
            "analytic command needs an x jump channel, zero generator, and an explicit pair \
             direction orthogonal to x"
                .into(),
        ));
    }
    let tol = exp.config.tol.unwrap_or(analytic::DEFAULT_SERIES_TOL);
    let QOracle { curve, route, numeric_tol } = analytic::q_oracle(&exp.model.wtds, &exp.grid, tol)?;

    let meta = RunMetadata::new(exp);
    let mut csv = meta.csv_header();
    csv.push_str("t,p_even,p_odd,q\n");
    for (j, t) in curve.grid.times().enumerate() {
        let _ = writeln!(csv, "{},{},{},{}", t, curve.p_even[j], curve.p_odd[j], curve.q[j]);
    }

    let zero_crossings = linear_zero_crossings(&curve.q, &curve.grid);
    let sign_changes =
        analytic::count_sign_changes_filtered(&curve.q, 10.0 * numeric_tol);

    let (mc_residual_max, mc_stderr_bound, mc_bridge_ok) =
        if exp.config.method.as_deref() == Some("analytic") {
            (None, None, None)
        } else {
            let run = EnsembleRun {
                model: &exp.model,
                pair: exp.pair.expect("eligibility guarantees an explicit pair"),
                grid: exp.grid,
                trajectories: exp.config.trajectories,
                seed: exp.config.seed,
                max_jumps: exp.max_jumps,
            };
            let mc = estimate_distance_curve(&run)?;
            let mut residual_max = 0.0f64;
            let mut ok = true;
            for j in 0..exp.grid.len() {
                let residual = (mc.distance[j] - curve.q[j].abs()).abs();
                residual_max = residual_max.max(residual);
                if residual > 3.0 * mc.stderr[j] + numeric_tol {
                    ok = false;
                }
            }
            (Some(residual_max), Some(3.0 * mc.max_stderr()), Some(ok))
        };

    let mut outputs = Outputs::default();
    let parity_path = out_dir.join("parity.csv");
    write_file(&parity_path, &csv)?;
    outputs.files.push(parity_path);

    let report_path = out_dir.join("analytic_report.json");
    write_json(
        &report_path,
        &AnalyticReport {
            meta,
            oracle: route.to_string(),
            numeric_tol,
            sign_changes,
            zero_crossings,
            mc_residual_max,
            mc_stderr_bound,
            mc_bridge_ok,
        },
    )?;
    outputs.files.push(report_path);
    Ok(outputs)
}

/// Linearly interpolated zero crossings of a sampled curve.
fn linear_zero_crossings(values: &[f64], grid: &TimeGrid) -> Vec<f64> {
    let mut crossings = Vec::new();
    for j in 1..values.len() {
        let (a, b) = (values[j - 1], values[j]);
        if a == 0.0 {
            continue;
        }
        if a.signum() != b.signum() && b != 0.0 {
            let frac = a / (a - b);
            crossings.push(grid.t(j - 1) + frac * grid.dt());
        }
    }
    crossings
}

/// Validated entry point shared by the binary and the integration tests.
pub fn run_command(command: &str, config_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<Outputs> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let exp = config.validate()?;
    for warning in &exp.warnings {
        eprintln!("warning: {warning}");
    }
    match command {
        "simulate" => cmd_simulate(&exp, out_dir),
        "sweep" => cmd_sweep(&exp, out_dir),
        "optimize" => cmd_optimize(&exp, out_dir),
        "analytic" => cmd_analytic(&exp, out_dir),
        other => Err(Error::Config(format!("unknown command '{other}'"))),
    }
}
