//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replicator_sindy::experiment::{generate_trajectories, prepare_derivatives, run};
use replicator_sindy::game::{builtin_game, ground_truth_coefficients, SimplexPoint};
use replicator_sindy::io::documents::to_json_string;
use replicator_sindy::io::{read_trajectory, write_trajectory, DerivativeSource, ExperimentConfig, GameSpec, ModelDocument};
use replicator_sindy::plot::{inside_triangle, polyline_points};
use replicator_sindy::sindy::linalg::lstsq_min_norm;
use replicator_sindy::sindy::{assemble_data, build_library, ensemble_fit, fit_with, stlsq, EnsembleOptions, FitOptions};
use replicator_sindy::trajectory::{sample_initial_state, simulate};

/// Seed shared by the single-trajectory RPS criteria.
const RPS_SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rps_config() -> ExperimentConfig {
    ExperimentConfig { seed: RPS_SEED, game: Some(GameSpec::builtin("rps")), ..Default::default() }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let e = start.elapsed();
    (e < limit, format!("{:.3}s (limit {}s)", e.as_secs_f64(), limit.as_secs()))
}

fn criterion_1() -> (Outcome, f64) {
    let start = Instant::now();
    let config = rps_config();
    let (id, report) = run(&config).expect("pipeline");
    let (fast, time) = within(Duration::from_secs(1), start);
    let game = builtin_game("rps").unwrap();
    let truth = ground_truth_coefficients(&game, id.model.library()).unwrap();
    let xi = id.model.coefficients();
    let same_support = xi.iter().zip(truth.coefficients().iter()).all(|(a, b)| (*a != 0.0) == (*b != 0.0));
    let unit = xi.iter().filter(|v| **v != 0.0).all(|v| (v.abs() - 1.0).abs() < 1e-6);
    let consistent = (0..xi.nrows()).all(|i| xi[(i, 2)] == -(xi[(i, 0)] + xi[(i, 1)]) || (xi[(i, 0)] + xi[(i, 1)] + xi[(i, 2)]).abs() < 1e-12);
    let pass = id.model.library().len() == 20
        && same_support
        && id.model.nonzero_count() == 6
        && id.model.reconstructed_columns() == [2]
        && consistent
        && unit
        && report.support_f1 == 1.0
        && fast;
    let detail = format!(
        "20 features, {} nonzeros, F1 {}, max coeff error {:.2e}, reconstructed column consistent: {consistent}, {time}",
        id.model.nonzero_count(),
        report.support_f1,
        report.coeff_max_abs_error
    );
    (outcome(pass, detail), report.coeff_max_abs_error)
}

fn criterion_2(clean_error: f64) -> Outcome {
    let mut config = rps_config();
    config.trajectories.h = 0.1;
    config.trajectories.t_end = 9.9;
    config.trajectories.derivatives = DerivativeSource::FiniteDifference;
    let game = builtin_game("rps").unwrap();
    let samples = generate_trajectories(&game, &config).unwrap()[0].len();
    let (_, r) = run(&config).expect("pipeline");
    let pass = samples == 100 && r.support_f1 == 1.0 && r.coeff_max_abs_error > clean_error && r.coeff_max_abs_error < 0.2;
    outcome(
        pass,
        format!(
            "{samples} samples, F1 {}, max coeff error {:.3e} (clean {:.2e}, bound 0.2)",
            r.support_f1, r.coeff_max_abs_error, clean_error
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let arm = |count: usize, samples: usize| {
        let (mut f1, mut err) = (Vec::new(), Vec::new());
        for seed in 0..10 {
            let mut c = ExperimentConfig { seed, game: Some(GameSpec::builtin("battle_of_sexes")), ..Default::default() };
            c.trajectories.count = count;
            c.trajectories.t_end = (samples - 1) as f64 * c.trajectories.h;
            c.trajectories.noise = 0.005;
            c.trajectories.derivatives = DerivativeSource::FiniteDifference;
            let (_, r) = run(&c).expect("pipeline");
            f1.push(r.support_f1);
            err.push(r.coeff_max_abs_error);
        }
        (median(f1), median(err))
    };
    let (f1_a, err_a) = arm(1, 2000);
    let (f1_b, err_b) = arm(20, 100);
    let (fast, time) = within(Duration::from_secs(30), start);
    outcome(
        f1_b >= f1_a && err_b <= err_a && fast,
        format!(
            "median F1 single {f1_a:.3} vs multi {f1_b:.3}; median max coeff error single {err_a:.3e} vs multi {err_b:.3e}; {time}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let game = builtin_game("rps").unwrap();
    let x0 = sample_initial_state(&game, RPS_SEED).unwrap();
    let t = simulate(&game, &x0, 50.0, 0.01).unwrap();
    let product = |i: usize| t.state_row(i).iter().product::<f64>();
    let p0 = product(0);
    let sum_err = (0..t.len()).map(|i| (t.state_row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let prod_err = (0..t.len()).map(|i| (product(i) - p0).abs()).fold(0.0, f64::max);
    let edge = simulate(&game, &[0.3, 0.7, 0.0], 50.0, 0.01).unwrap();
    let vertex = simulate(&game, &[0.0, 1.0, 0.0], 50.0, 0.01).unwrap();
    let faces = edge.states.column(2).iter().all(|v| *v == 0.0)
        && vertex.states.row_iter().all(|r| r.iter().copied().eq([0.0, 1.0, 0.0]));
    let (fast, time) = within(Duration::from_secs(1), start);
    outcome(
        sum_err < 1e-9 && prod_err < 1e-6 && faces && fast,
        format!("max |sum - 1| {sum_err:.2e}, max |prod - prod0| {prod_err:.2e}, faces invariant: {faces}, {time}"),
    )
}

/// Smallest support whose least-squares fit has (numerically) zero residual.
fn best_subset(theta: &DMatrix<f64>, y: &DVector<f64>) -> Vec<usize> {
    let p = theta.ncols();
    let mut masks: Vec<u32> = (0..1u32 << p).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        let cols: Vec<usize> = (0..p).filter(|i| mask >> i & 1 == 1).collect();
        let residual = if cols.is_empty() {
            y.norm()
        } else {
            let sub = theta.select_columns(&cols);
            let (x, _) = lstsq_min_norm(&sub, y, 1e-12);
            (&sub * x - y).norm()
        };
        if residual <= 1e-9 * y.norm().max(1.0) {
            return cols;
        }
    }
    unreachable!("the full support always fits noise-free data")
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let lambda = 0.1;
    let mut matches = 0;
    for instance in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + instance);
        let theta = DMatrix::from_fn(50, 5, |_, _| rng.random_range(-1.0..1.0));
        let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, 5, 2).into_vec();
        support.sort_unstable();
        let mut xi = DVector::zeros(5);
        for &i in &support {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            xi[i] = sign * rng.random_range(2.0 * lambda..1.0);
        }
        let y = &theta * &xi;
        let fitted = stlsq(&theta, &DMatrix::from_column_slice(50, 1, y.as_slice()), lambda, 10).unwrap();
        let found: Vec<usize> = (0..5).filter(|&i| fitted[(i, 0)] != 0.0).collect();
        if found == best_subset(&theta, &y) && found == support {
            matches += 1;
        }
    }
    let (fast, time) = within(Duration::from_secs(5), start);
    outcome(matches == 50 && fast, format!("{matches}/50 supports equal the exhaustive best subset, {time}"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let config = rps_config();
    let game = builtin_game("rps").unwrap();
    let trajs = prepare_derivatives(generate_trajectories(&game, &config).unwrap(), DerivativeSource::Exact, Some(&game)).unwrap();
    let data = assemble_data(&trajs).unwrap();
    let library = build_library(3, 3, false);
    let fo = FitOptions::new(0.05).with_blocks(game.blocks());
    let truth = ground_truth_coefficients(&game, &library).unwrap();
    let ens = ensemble_fit(&data, &library, &fo, &EnsembleOptions { n_models: 100, subsample_fraction: 0.6, ..Default::default() }).unwrap();
    let (mut true_min, mut spurious_max) = (1.0f64, 0.0f64);
    for (q, t) in ens.inclusion_probability.iter().zip(truth.coefficients().iter()) {
        if *t != 0.0 {
            true_min = true_min.min(*q);
        } else {
            spurious_max = spurious_max.max(*q);
        }
    }
    let full = ensemble_fit(&data, &library, &fo, &EnsembleOptions { n_models: 100, subsample_fraction: 1.0, ..Default::default() }).unwrap();
    let plain = fit_with(&data, &library, &fo).unwrap();
    let gap = (&full.coefficient_median - plain.coefficients()).amax();
    let (fast, time) = within(Duration::from_secs(10), start);
    outcome(
        true_min == 1.0 && spurious_max <= 0.2 && gap <= 1e-12 && fast,
        format!("min inclusion on true terms {true_min}, max on spurious terms {spurious_max}, full-bag median vs plain fit {gap:.1e}, {time}"),
    )
}

fn criterion_7() -> Outcome {
    let rps = builtin_game("rps").unwrap();
    let c = 1.0 / 3.0;
    let a = rps.replicator_rhs(&SimplexPoint::new(vec![c, c, c]).unwrap()).unwrap();
    let bos = builtin_game("battle_of_sexes").unwrap();
    let b = bos.velocity(&[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]).unwrap();
    let worst = a.iter().chain(&b).map(|v| v.abs()).fold(0.0, f64::max);
    outcome(worst <= 1e-14, format!("max |rhs| at the interior rest points {worst:.1e}"))
}

fn repsindy(args: &[&str], dir: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_repsindy")).args(args).current_dir(dir).status().map(|s| s.success()).unwrap_or(false)
}

fn criterion_8() -> Outcome {
    // in-memory round trips
    let game = builtin_game("battle_of_sexes").unwrap();
    let mut c = ExperimentConfig { seed: 5, game: Some(GameSpec::builtin("battle_of_sexes")), ..Default::default() };
    c.trajectories.noise = 0.01;
    let t = &generate_trajectories(&game, &c).unwrap()[0];
    let mut buf = Vec::new();
    write_trajectory(&mut buf, t).unwrap();
    let back = read_trajectory(buf.as_slice(), Path::new("mem")).unwrap();
    let csv_ok = back.times == t.times && back.states == t.states && back.derivatives == t.derivatives;
    let (id, _) = run(&rps_config()).unwrap();
    let doc = ModelDocument::new(&id.model, builtin_game("rps").unwrap().state_names(), None, rps_config()).unwrap();
    let model = serde_json::from_str::<ModelDocument>(&to_json_string(&doc)).unwrap().to_model().unwrap();
    let json_ok = model == id.model && model.predict(&[0.2, 0.5, 0.3]).unwrap() == id.model.predict(&[0.2, 0.5, 0.3]).unwrap();

    // every command twice with the same config and seed
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.toml"),
        "seed = 9\n[game]\nid = \"rps\"\n[trajectories]\ncount = 2\nt_end = 5.0\n[ensemble]\nn_models = 20\n[sweep]\nbudgets = [[1, 300], [3, 100]]\nreplicates = 2\n",
    )
    .unwrap();
    let mut identical = true;
    for (a, b) in [("a", "b")] {
        let ok = [a, b].iter().all(|s| {
            repsindy(&["simulate", "--config", "exp.toml", &format!("sim_{s}")], d)
                && repsindy(&["identify", "--config", "exp.toml", &format!("model_{s}.json"), &format!("sim_{s}/trajectory_000.csv"), &format!("sim_{s}/trajectory_001.csv")], d)
                && repsindy(&["evaluate", &format!("model_{s}.json"), &format!("report_{s}.json")], d)
                && repsindy(&["sweep", "--config", "exp.toml", &format!("sweep_{s}.csv")], d)
                && repsindy(&["plot", "--game", "rps", &format!("sim_{s}/trajectory_000.csv"), &format!("plot_{s}.svg")], d)
        });
        identical &= ok;
        for (x, y) in [
            (format!("sim_{a}/trajectory_000.csv"), format!("sim_{b}/trajectory_000.csv")),
            (format!("sim_{a}/trajectory_001.csv"), format!("sim_{b}/trajectory_001.csv")),
            (format!("sim_{a}/manifest.json"), format!("sim_{b}/manifest.json")),
            (format!("model_{a}.json"), format!("model_{b}.json")),
            (format!("report_{a}.json"), format!("report_{b}.json")),
            (format!("sweep_{a}.csv"), format!("sweep_{b}.csv")),
            (format!("plot_{a}.svg"), format!("plot_{b}.svg")),
        ] {
            identical &= matches!((std::fs::read(d.join(&x)), std::fs::read(d.join(&y))), (Ok(p), Ok(q)) if p == q);
        }
    }
    outcome(
        csv_ok && json_ok && identical,
        format!("CSV lossless: {csv_ok}, model JSON lossless: {json_ok}, simulate/identify/evaluate/sweep/plot byte-identical on rerun: {identical}"),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("orbit.toml"), "seed = 4\n[game]\nid = \"rps\"\n[trajectories]\nt_end = 150.0\nh = 0.01\n").unwrap();
    let ran = repsindy(&["simulate", "--config", "orbit.toml", "sim"], d)
        && repsindy(&["plot", "--config", "orbit.toml", "sim/trajectory_000.csv", "orbit.svg"], d);
    let svg = std::fs::read_to_string(d.join("orbit.svg")).unwrap_or_default();
    let points = polyline_points(&svg).unwrap_or_default();
    let inside = !points.is_empty() && points.iter().all(|p| inside_triangle(*p, 1e-12));
    let tail = &points[points.len() - points.len() / 10..];
    let start = points.first().copied().unwrap_or((f64::NAN, f64::NAN));
    let closest = tail.iter().map(|p| (p.0 - start.0).hypot(p.1 - start.1)).fold(f64::INFINITY, f64::min);
    let labelled = ["R", "P", "S"].iter().all(|l| svg.contains(&format!(">{l}</text>")));
    outcome(
        ran && inside && closest < 0.02 && labelled,
        format!("{} points all inside the triangle: {inside}, final 10% come within {closest:.2e} of the start, vertex labels R/P/S: {labelled}", points.len()),
    )
}

fn main() {
    let (c1, clean_error) = criterion_1();
    let results = [
        ("RPS exact recovery", c1),
        ("RPS low-data degradation", criterion_2(clean_error)),
        ("BoS multi-trajectory advantage", criterion_3()),
        ("conservation suite", criterion_4()),
        ("STLSQ vs best-subset oracle", criterion_5()),
        ("ensemble sanity", criterion_6()),
        ("fixed points", criterion_7()),
        ("round-trip and determinism", criterion_8()),
        ("plot contract", criterion_9()),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("criterion {}: {} [{name}] {}", k + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
