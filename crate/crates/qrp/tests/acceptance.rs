//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Pure-jump expectations come from the closed-form parity oracles, Monte
//! Carlo assertions use the run's own pointwise standard errors. All seeds
//! are fixed, so every run of this suite is bit-reproducible.

use qrp::analytic;
use qrp::bloch::{AffineChannel, BlochVector, StatePair};
use qrp::dephasing::DephasingGenerator;
use qrp::ensemble::{estimate_distance_curve, DistanceCurve, EnsembleRun, ProcessModel};
use qrp::grid::TimeGrid;
use qrp::nonmarkov::{self, detect_revivals_on_values, OptimizeRequest};
use qrp::wtd::{WtdSequence, WtdSpec};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn criterion(name: &str, ok: bool, detail: &str) {
    println!(
        "acceptance {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "acceptance {name} failed: {detail}");
}

fn pair_y() -> StatePair {
    StatePair::antipodal(BlochVector::new(0.0, 1.0, 0.0)).unwrap()
}

fn pure_jump_x(wtds: WtdSequence) -> ProcessModel {
    ProcessModel {
        generator: DephasingGenerator::zero(),
        channel: AffineChannel::pauli_x(),
        wtds,
    }
}

fn exp_seq(modified: &[f64], stationary: f64) -> WtdSequence {
    WtdSequence::new(
        modified
            .iter()
            .map(|&m| WtdSpec::exponential(m).unwrap())
            .collect(),
        WtdSpec::exponential(stationary).unwrap(),
    )
}

fn mc_curve(model: &ProcessModel, grid: TimeGrid, n: usize, seed: u64) -> DistanceCurve {
    estimate_distance_curve(&EnsembleRun::new(model, pair_y(), grid, n, seed)).unwrap()
}

/// Pointwise oracle-bridge tally: how many grid points fall outside the
/// 3-sigma band and outside the hard 5-sigma band (both widened by the
/// oracle's own numerical tolerance).
fn bridge_counts(curve: &DistanceCurve, q: &[f64], numeric_tol: f64) -> (usize, usize, usize) {
    let mut outside3 = 0;
    let mut outside5 = 0;
    for j in 0..curve.grid.len() {
        let residual = (curve.distance[j] - q[j].abs()).abs();
        if residual > 3.0 * curve.stderr[j] + numeric_tol {
            outside3 += 1;
        }
        if residual > 5.0 * curve.stderr[j] + numeric_tol {
            outside5 += 1;
        }
    }
    (outside3, outside5, curve.grid.len())
}

/// Criterion 1: unmodified exponential process decays as exp(-2 mu t) within
/// 0.01 everywhere and shows no revivals at delta = 3 max-stderr.
#[test]
fn criterion_01_markov_baseline() {
    let mu = 1.0;
    let model = pure_jump_x(exp_seq(&[], mu));
    let grid = TimeGrid::new(3.0, 300).unwrap();
    let curve = mc_curve(&model, grid, 100_000, 20_260_801);

    let max_err = grid
        .times()
        .enumerate()
        .map(|(j, t)| (curve.distance[j] - analytic::q_markov(mu, t)).abs())
        .fold(0.0, f64::max);
    let revivals = nonmarkov::detect_revivals(&curve, 3.0 * curve.max_stderr()).unwrap();
    criterion(
        "01 markov-baseline",
        max_err <= 0.01 && revivals.is_empty(),
        &format!("max |D - exp(-2t)| = {max_err:.4}, revivals = {}", revivals.len()),
    );
}

/// Criterion 2: one leading exponential (mu1 = 3 over mu = 1) produces
/// exactly one revival, at ln(4/3) and at zero distance.
#[test]
fn criterion_02_revival_time() {
    let (mu, mu1) = (1.0, 3.0);
    let model = pure_jump_x(exp_seq(&[mu1], mu));
    let grid = TimeGrid::new(2.0, 800).unwrap();
    let curve = mc_curve(&model, grid, 100_000, 20_260_802);

    let delta = nonmarkov::default_delta(&curve);
    let revivals = nonmarkov::detect_revivals(&curve, delta).unwrap();
    let expected_t = (4.0_f64 / 3.0).ln();
    let ok_count = revivals.len() == 1;
    let (t_err, onset_ratio) = if ok_count {
        let r = &revivals[0];
        (
            (r.t_onset - expected_t).abs(),
            r.onset_value / (3.0 * curve.stderr[r.onset_index]),
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    criterion(
        "02 revival-time",
        ok_count && t_err <= 0.02 && onset_ratio <= 1.0,
        &format!(
            "revivals = {}, |t_onset - ln(4/3)| = {t_err:.4}, onset/(3 stderr) = {onset_ratio:.2}",
            revivals.len()
        ),
    );
}

/// Deterministic rate triples shared by criteria 3 and 10.
fn random_triples(count: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_803);
    let (ln_lo, ln_hi) = (0.9_f64.ln(), 10.0_f64.ln());
    (0..count)
        .map(|_| {
            let mu = rng.gen_range(0.7..1.4);
            let mu1 = rng.gen_range(ln_lo..ln_hi).exp();
            let mu2 = rng.gen_range(ln_lo..ln_hi).exp();
            (mu, mu1, mu2)
        })
        .collect()
}

/// Criterion 3: for 200 random triples of a 3-WTD exponential process the
/// sign-change count of the analytic q and the Monte Carlo revival count
/// never exceed two.
#[test]
fn criterion_03_descartes_bound() {
    use rayon::prelude::*;
    let triples = random_triples(200);
    let violations: Vec<String> = triples
        .par_iter()
        .enumerate()
        .filter_map(|(i, &(mu, mu1, mu2))| {
            let seq = exp_seq(&[mu1, mu2], mu);
            let tol = 1e-4;
            let analytic_grid = TimeGrid::new(5.0, 1024).unwrap();
            let oracle = analytic::parity_series(&seq, &analytic_grid, tol).unwrap();
            let sign_changes = analytic::count_sign_changes_filtered(&oracle.q, tol);

            let model = pure_jump_x(seq);
            let mc_grid = TimeGrid::new(5.0, 250).unwrap();
            let curve = mc_curve(&model, mc_grid, 4_000, 3000 + i as u64);
            // 200 simultaneous tail scans: a 3-sigma threshold is expected to
            // produce O(1) false revivals across the family, so the bound
            // test runs at 5 sigma, still far below every genuine revival
            // height in the hierarchy region.
            let mc_count = nonmarkov::detect_revivals(&curve, 5.0 * curve.max_stderr())
                .unwrap()
                .len();
            (sign_changes > 2 || mc_count > 2).then(|| {
                format!("triple {i} ({mu:.2},{mu1:.2},{mu2:.2}): analytic {sign_changes}, mc {mc_count}")
            })
        })
        .collect();
    criterion(
        "03 descartes-bound",
        violations.is_empty(),
        &format!("{} of 200 triples violated k-1 = 2 ({:?})", violations.len(), violations.first()),
    );
}

/// Criterion 4: the hierarchy mu1 > mu2 > mu realizes both revivals, and a
/// single modified rate below the stationary one realizes none.
#[test]
fn criterion_04_hierarchy_realization() {
    // mu1 = 20, mu2 = 5, mu = 1: analytic and MC count = 2.
    let seq = exp_seq(&[20.0, 5.0], 1.0);
    let fine = TimeGrid::new(4.0, 4096).unwrap();
    let tol = 5e-4;
    let oracle = analytic::parity_series(&seq, &fine, tol).unwrap();
    let analytic_count = analytic::count_sign_changes_filtered(&oracle.q, tol);

    let model = pure_jump_x(seq);
    let grid = TimeGrid::new(4.0, 800).unwrap();
    let curve = mc_curve(&model, grid, 30_000, 20_260_804);
    let mc_count = nonmarkov::detect_revivals(&curve, nonmarkov::default_delta(&curve))
        .unwrap()
        .len();

    // mu1 = 0.5 < mu = 1 (two WTDs): no revival on either route.
    let seq_low = exp_seq(&[0.5], 1.0);
    let oracle_low = analytic::parity_series(&seq_low, &TimeGrid::new(6.0, 2048).unwrap(), tol).unwrap();
    let analytic_low = analytic::count_sign_changes_filtered(&oracle_low.q, tol);
    let model_low = pure_jump_x(seq_low);
    let curve_low = mc_curve(&model_low, TimeGrid::new(6.0, 600).unwrap(), 30_000, 20_260_814);
    let mc_low = nonmarkov::detect_revivals(&curve_low, nonmarkov::default_delta(&curve_low))
        .unwrap()
        .len();

    criterion(
        "04 hierarchy-realization",
        analytic_count == 2 && mc_count == 2 && analytic_low == 0 && mc_low == 0,
        &format!(
            "hierarchy: analytic {analytic_count}, mc {mc_count}; violated: analytic {analytic_low}, mc {mc_low}"
        ),
    );
}

/// Criterion 5: unmodified Erlang shape 2 revives at 3pi/4 + n pi; the first
/// three onsets match to 0.02 and the Monte Carlo distance there is
/// statistically zero.
#[test]
fn criterion_05_erlang_oscillations() {
    let mu = 1.0;
    let grid = TimeGrid::new(10.0, 1000).unwrap();
    let oracle = analytic::q_erlang_unmodified(mu, 2, &grid).unwrap();
    // Heights decay like exp(-n pi): revival three is ~8e-5 tall, far below
    // any Monte Carlo threshold, so onsets are read from the closed form and
    // the Monte Carlo run supplies the statistical zero check.
    let revivals = detect_revivals_on_values(&oracle.distance(), &grid, 1e-8).unwrap();
    let expected: Vec<f64> = (0..3)
        .map(|n| 0.75 * std::f64::consts::PI + n as f64 * std::f64::consts::PI)
        .collect();

    let model = pure_jump_x(WtdSequence::standard(WtdSpec::erlang(mu, 2).unwrap()));
    let curve = mc_curve(&model, grid, 100_000, 20_260_805);

    let mut ok = revivals.len() >= 3;
    let mut detail = String::new();
    for (n, target) in expected.iter().enumerate() {
        if !ok {
            break;
        }
        let r = &revivals[n];
        let t_err = (r.t_onset - target).abs();
        let mc_at_onset = curve.distance[r.onset_index];
        let bound = 3.0 * curve.stderr[r.onset_index];
        ok &= t_err <= 0.02 && mc_at_onset <= bound;
        detail.push_str(&format!(
            "onset{} err={t_err:.4} D_mc={mc_at_onset:.4} bound={bound:.4}; ",
            n + 1
        ));
    }
    criterion("05 erlang-oscillations", ok, detail.trim_end_matches("; "));
}

/// Criterion 6: amplitude-damping jumps alone stay Markovian for Erlang
/// waiting times across 20 seeds.
#[test]
fn criterion_06_ad_only_markovianity() {
    use rayon::prelude::*;
    let model = ProcessModel {
        generator: DephasingGenerator::from_decay_rates([0.3, 0.3, 0.3]).unwrap(),
        channel: AffineChannel::amplitude_damping(0.3).unwrap(),
        wtds: WtdSequence::standard(WtdSpec::erlang(2.0, 2).unwrap()),
    };
    let grid = TimeGrid::new(4.0, 200).unwrap();
    let seeds: Vec<u64> = (0..20).map(|k| 20_260_806 + k).collect();
    let with_revivals: usize = seeds
        .par_iter()
        .map(|&seed| {
            let curve = mc_curve(&model, grid, 20_000, seed);
            let revivals = nonmarkov::detect_revivals(&curve, 3.0 * curve.max_stderr()).unwrap();
            usize::from(!revivals.is_empty())
        })
        .sum();
    criterion(
        "06 ad-only-markovianity",
        with_revivals == 0,
        &format!("{with_revivals} of 20 seeds showed revivals"),
    );
}

/// Criterion 7: the optimizer lands within 15 degrees of the y axis and the
/// y-pair measure clearly beats the x and z pairs.
#[test]
fn criterion_07_fig2_optimum() {
    let model = ProcessModel {
        generator: DephasingGenerator::from_decay_rates([0.9, 0.9, 0.9]).unwrap(),
        channel: AffineChannel::pauli_x()
            .compose(&AffineChannel::amplitude_damping(0.3).unwrap()),
        wtds: exp_seq(&[10.0], 1.0),
    };
    let request = OptimizeRequest {
        model: &model,
        grid: TimeGrid::new(4.0, 200).unwrap(),
        trajectories: 100_000,
        seed: 20_260_807,
        max_jumps: qrp::ensemble::DEFAULT_MAX_JUMPS,
        delta: None,
    };
    let report = nonmarkov::optimize_pair(&request).unwrap();
    let best = report.optimal_pair.unwrap().plus;
    let alignment = best.y.abs();

    let lookup = |target: [f64; 3]| {
        report
            .optimizer_trace
            .iter()
            .find(|d| {
                !d.refined
                    && (d.direction[0] - target[0]).abs() < 1e-9
                    && (d.direction[1] - target[1]).abs() < 1e-9
                    && (d.direction[2] - target[2]).abs() < 1e-9
            })
            .expect("axis direction is part of the coarse mesh")
    };
    let y = lookup([0.0, 1.0, 0.0]);
    let x = lookup([1.0, 0.0, 0.0]);
    let z = lookup([0.0, 0.0, 1.0]);
    let margin_x = y.measure - x.measure
        - 3.0 * (y.measure_stderr.powi(2) + x.measure_stderr.powi(2)).sqrt();
    let margin_z = y.measure - z.measure
        - 3.0 * (y.measure_stderr.powi(2) + z.measure_stderr.powi(2)).sqrt();

    criterion(
        "07 fig2-optimum",
        alignment >= 15.0_f64.to_radians().cos() && margin_x > 0.0 && margin_z > 0.0,
        &format!(
            "|best.y| = {alignment:.4}, measure y/x/z = {:.4}/{:.4}/{:.4}, margins = {margin_x:.4}/{margin_z:.4}",
            y.measure, x.measure, z.measure
        ),
    );
}

/// Criterion 8: the modified Erlang(2,2) closed form has no sign change on
/// [0, 50] for mu1 = 0.5 and several for mu1 = 5.
#[test]
fn criterion_08_qerl_regimes() {
    let grid = TimeGrid::new(50.0, 5000).unwrap();
    let slow: Vec<f64> = grid
        .times()
        .map(|t| analytic::q_erlang_modified_22(1.0, 0.5, t))
        .collect();
    let fast: Vec<f64> = grid
        .times()
        .map(|t| analytic::q_erlang_modified_22(1.0, 5.0, t))
        .collect();
    let slow_changes = analytic::count_sign_changes(&slow);
    let fast_changes = analytic::count_sign_changes(&fast);
    criterion(
        "08 qerl-regimes",
        slow_changes == 0 && fast_changes >= 3,
        &format!("mu1=0.5: {slow_changes} sign changes, mu1=5: {fast_changes}"),
    );
}

/// Criterion 9: with mu2 slightly below mu1 and both much larger than mu,
/// the single revival starts at clearly nonzero distance.
#[test]
fn criterion_09_nonzero_onset() {
    let model = ProcessModel {
        generator: DephasingGenerator::from_decay_rates([0.1, 0.1, 0.1]).unwrap(),
        channel: AffineChannel::pauli_x()
            .compose(&AffineChannel::amplitude_damping(0.3).unwrap()),
        wtds: exp_seq(&[15.0, 12.0], 1.0),
    };
    let grid = TimeGrid::new(4.0, 800).unwrap();
    let curve = mc_curve(&model, grid, 100_000, 20_260_809);
    let revivals = nonmarkov::detect_revivals(&curve, nonmarkov::default_delta(&curve)).unwrap();
    let nonzero_onset = revivals
        .iter()
        .any(|r| r.onset_value > 5.0 * curve.stderr[r.onset_index]);
    criterion(
        "09 nonzero-onset",
        !revivals.is_empty() && revivals.len() < 2 && nonzero_onset,
        &format!(
            "revivals = {}, onset values = {:?}",
            revivals.len(),
            revivals.iter().map(|r| r.onset_value).collect::<Vec<_>>()
        ),
    );
}

/// Criterion 10: for every pure-jump configuration of criteria 1-5, the
/// Monte Carlo distance tracks |q| within its pointwise standard errors.
/// Across ~50k grid points a 3-sigma band is expected to miss ~0.3% of
/// points, so the check is an aggregate coverage test: at least 99% of all
/// points inside 3 sigma, no point outside 5 sigma (numerical oracles widen
/// both bands by their tolerance).
#[test]
fn criterion_10_oracle_bridge() {
    use rayon::prelude::*;
    let mut outside3 = 0usize;
    let mut outside5 = 0usize;
    let mut total = 0usize;
    let mut add = |c: (usize, usize, usize)| {
        outside3 += c.0;
        outside5 += c.1;
        total += c.2;
    };

    // Criterion 1 configuration.
    {
        let mu = 1.0;
        let grid = TimeGrid::new(3.0, 300).unwrap();
        let curve = mc_curve(&pure_jump_x(exp_seq(&[], mu)), grid, 100_000, 20_260_801);
        let q: Vec<f64> = grid.times().map(|t| analytic::q_markov(mu, t)).collect();
        add(bridge_counts(&curve, &q, 0.0));
    }
    // Criterion 2 configuration.
    {
        let (mu, mu1) = (1.0, 3.0);
        let grid = TimeGrid::new(2.0, 800).unwrap();
        let curve = mc_curve(&pure_jump_x(exp_seq(&[mu1], mu)), grid, 100_000, 20_260_802);
        let q: Vec<f64> = grid.times().map(|t| analytic::q_exp_2wtd(mu, mu1, t)).collect();
        add(bridge_counts(&curve, &q, 0.0));
    }
    // Criterion 4 configurations (series oracle).
    for (modified, stationary, t_end, seed) in
        [(vec![20.0, 5.0], 1.0, 4.0, 20_260_804u64), (vec![0.5], 1.0, 6.0, 20_260_814)]
    {
        let seq = exp_seq(&modified, stationary);
        let grid = TimeGrid::new(t_end, 400).unwrap();
        let tol = 4e-3;
        let oracle = analytic::parity_series(&seq, &grid, tol).unwrap();
        let curve = mc_curve(&pure_jump_x(seq), grid, 30_000, seed);
        add(bridge_counts(&curve, &oracle.q, tol));
    }
    // Criterion 5 configuration.
    {
        let mu = 1.0;
        let grid = TimeGrid::new(10.0, 1000).unwrap();
        let oracle = analytic::q_erlang_unmodified(mu, 2, &grid).unwrap();
        let model = pure_jump_x(WtdSequence::standard(WtdSpec::erlang(mu, 2).unwrap()));
        let curve = mc_curve(&model, grid, 100_000, 20_260_805);
        add(bridge_counts(&curve, &oracle.q, 0.0));
    }
    // Criterion 3 triples (series oracle at matching grids).
    let triple_counts = random_triples(200)
        .par_iter()
        .enumerate()
        .map(|(i, &(mu, mu1, mu2))| {
            let seq = exp_seq(&[mu1, mu2], mu);
            let grid = TimeGrid::new(5.0, 250).unwrap();
            let tol = 4e-3;
            let oracle = analytic::parity_series(&seq, &grid, tol).unwrap();
            let curve = mc_curve(&pure_jump_x(seq), grid, 4_000, 3000 + i as u64);
            bridge_counts(&curve, &oracle.q, tol)
        })
        .reduce(
            || (0, 0, 0),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
        );
    add(triple_counts);

    let fraction3 = outside3 as f64 / total as f64;
    criterion(
        "10 oracle-bridge",
        fraction3 <= 0.01 && outside5 == 0,
        &format!(
            "{total} points over 205 configurations: {outside3} outside 3-sigma ({:.3}%), {outside5} outside 5-sigma",
            100.0 * fraction3
        ),
    );
}

/// Criterion 11: identical invocations with different worker counts produce
/// byte-identical artifacts (exercised through the actual binary).
#[test]
fn criterion_11_worker_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        r#"{
            "channel": {"kind": "x-ad", "gamma": 0.3},
            "generator": {"lambdas": [0.9, 0.9, 0.9]},
            "wtds": {
                "modified": [{"kind": "exp", "mu": 10.0}],
                "stationary": {"kind": "exp", "mu": 1.0}
            },
            "pair": {"direction": [0, 1, 0]},
            "T": 2.0, "dt_out": 0.01, "N": 5000, "seed": 20260811
        }"#,
    )
    .unwrap();
    let sweep_path = dir.path().join("sweep.json");
    std::fs::write(
        &sweep_path,
        r#"{
            "channel": {"kind": "x"},
            "wtds": {
                "modified": [{"kind": "exp", "mu": 5.0}],
                "stationary": {"kind": "exp", "mu": 1.0}
            },
            "pair": {"direction": [0, 1, 0]},
            "T": 3.0, "dt_out": 0.01, "N": 2000, "seed": 20260812,
            "method": "mc",
            "sweep": {
                "axis1": {"param": "mu1", "values": [0.5, 3.0]},
                "axis2": {"param": "mu", "values": [1.0, 2.0]}
            }
        }"#,
    )
    .unwrap();

    let run = |cmd: &str, cfg: &std::path::Path, workers: &str, out: &str| {
        let out_dir = dir.path().join(out);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_qrp"))
            .args([
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--workers",
                workers,
                "--out-dir",
                out_dir.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        out_dir
    };

    let mut ok = true;
    let mut detail = String::new();
    for (cmd, cfg, files) in [
        ("simulate", &config_path, vec!["curve.csv", "report.json"]),
        ("sweep", &sweep_path, vec!["heatmap.csv", "sweep.json"]),
    ] {
        let a = run(cmd, cfg, "1", &format!("{cmd}_w1"));
        let b = run(cmd, cfg, "2", &format!("{cmd}_w2"));
        for file in files {
            let bytes_a = std::fs::read(a.join(file)).unwrap();
            let bytes_b = std::fs::read(b.join(file)).unwrap();
            let same = bytes_a == bytes_b;
            ok &= same;
            detail.push_str(&format!("{cmd}/{file}: {}; ", if same { "identical" } else { "DIFFERS" }));
        }
    }
    criterion("11 worker-determinism", ok, detail.trim_end_matches("; "));
}
