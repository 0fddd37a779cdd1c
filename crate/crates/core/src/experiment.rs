//! End-to-end pipeline shared by the command-line tool and the sweeps:
//! generate trajectories, identify a model, score it against the truth.
//!
//! Every random choice is derived from the configuration seed, so a run is a
//! pure function of its configuration.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{coefficient_error, forecast_error, support_metrics};
use crate::game::{ground_truth_coefficients, PayoffGame};
use crate::io::config::{DerivativeSource, ExperimentConfig};
use crate::io::documents::IdentificationReport;
use crate::sindy::{assemble_data, build_library, ensemble_fit, fit_with, EnsembleModel, SparseModel};
use crate::trajectory::{
    add_noise, derive_seed, exact_derivatives, finite_difference_derivatives, sample_initial_state, simulate,
    NoiseSpec, Trajectory,
};

const NOISE_STREAM: u64 = 0x006e_6f69_7365;
const FORECAST_STREAM: u64 = 0x666f_7265_6361_7374;

/// Seed of trajectory `k` in a run seeded with `seed`.
pub fn trajectory_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, k as u64)
}

/// Initial state of the forecast rollout for a run seeded with `seed`.
pub fn forecast_start(game: &PayoffGame, seed: u64) -> Result<Vec<f64>> {
    sample_initial_state(game, derive_seed(seed, FORECAST_STREAM))
}

/// Simulates `trajectories.count` runs from seeded random initial states.
/// With exact derivatives the true field is attached before noise is added,
/// so states and derivatives are perturbed independently. Finite-difference
/// derivatives are left to [`prepare_derivatives`].
pub fn generate_trajectories(game: &PayoffGame, config: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    let plan = &config.trajectories;
    (0..plan.count)
        .map(|k| {
            let s = trajectory_seed(config.seed, k);
            let x0 = sample_initial_state(game, s)?;
            let mut t = simulate(game, &x0, plan.t_end, plan.h)?;
            t.meta.seed = Some(s);
            if plan.derivatives == DerivativeSource::Exact {
                t = exact_derivatives(game, &t)?;
            }
            let mut t = add_noise(&t, NoiseSpec { sigma: plan.noise, seed: derive_seed(s, NOISE_STREAM) })?;
            t.meta.seed = Some(s);
            Ok(t)
        })
        .collect()
}

/// Makes sure every trajectory carries derivatives from the configured
/// source. Exact derivatives already present are kept; missing ones need the
/// game. Finite differences are always recomputed from the states.
pub fn prepare_derivatives(
    trajectories: Vec<Trajectory>,
    source: DerivativeSource,
    game: Option<&PayoffGame>,
) -> Result<Vec<Trajectory>> {
    trajectories
        .into_iter()
        .enumerate()
        .map(|(k, t)| match source {
            DerivativeSource::FiniteDifference => finite_difference_derivatives(&t),
            DerivativeSource::Exact if t.derivatives.is_some() => Ok(t),
            DerivativeSource::Exact => match game {
                Some(g) => exact_derivatives(g, &t),
                None => Err(Error::Config(format!(
                    "trajectory {k} has no derivative columns; exact derivatives need a game \
                     (or use derivatives = \"finite_difference\")"
                ))),
            },
        })
        .collect()
}

pub struct Identification {
    pub model: SparseModel,
    pub ensemble: Option<EnsembleModel>,
}

/// Fits a model (or an ensemble when configured). Constraint blocks come
/// from the game; without one the whole state is treated as one simplex.
pub fn identify(trajectories: &[Trajectory], config: &ExperimentConfig, game: Option<&PayoffGame>) -> Result<Identification> {
    let mut data = assemble_data(trajectories)?;
    data.noise_sigma = data.noise_sigma.max(config.trajectories.noise);
    let n = data.n_states();
    let library = build_library(n, config.library.degree, config.library.trig);
    let blocks = match game {
        Some(g) => {
            if g.state_dim() != n {
                return Err(Error::dim(format!("data has {n} states, game `{}` has {}", g.name, g.state_dim())));
            }
            g.blocks()
        }
        None => vec![(0..n).collect()],
    };
    let options = config.fit_options(blocks);
    match config.ensemble_options() {
        Some(eo) => {
            let ens = ensemble_fit(&data, &library, &options, &eo)?;
            Ok(Identification { model: ens.model.clone(), ensemble: Some(ens) })
        }
        None => Ok(Identification { model: fit_with(&data, &library, &options)?, ensemble: None }),
    }
}

/// Scores `model` against the replicator system of `game`.
pub fn evaluate(model: &SparseModel, game: &PayoffGame, config: &ExperimentConfig) -> Result<IdentificationReport> {
    let truth = ground_truth_coefficients(game, model.library())?;
    let support = support_metrics(model, &truth)?;
    let coeff = coefficient_error(model, &truth)?;
    let x0 = forecast_start(game, config.seed)?;
    let ev = &config.evaluate;
    let (forecast_rmse, forecast_diverged_at) = match forecast_error(model, game, &x0, ev.forecast_t_end, ev.forecast_h) {
        Ok(r) => (Some(r), None),
        Err(Error::Diverged { time }) => (None, Some(time)),
        Err(e) => return Err(e),
    };
    Ok(IdentificationReport {
        game: game.name.clone(),
        support_precision: support.precision,
        support_recall: support.recall,
        support_f1: support.f1,
        coeff_max_abs_error: coeff.max_abs,
        coeff_rms_error: coeff.rms,
        forecast_rmse,
        forecast_diverged_at,
        forecast_x0: x0,
        identified_terms: model.nonzero_count(),
        true_terms: truth.nonzero_count(),
        config: config.clone(),
    })
}

/// Generate, identify and evaluate in memory.
pub fn run(config: &ExperimentConfig) -> Result<(Identification, IdentificationReport)> {
    let game = config.build_game()?;
    let trajectories = generate_trajectories(&game, config)?;
    let trajectories = prepare_derivatives(trajectories, config.trajectories.derivatives, Some(&game))?;
    let id = identify(&trajectories, config, Some(&game))?;
    let report = evaluate(&id.model, &game, config)?;
    Ok((id, report))
}

/// One grid cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub replicate: usize,
    pub n_trajectories: usize,
    pub samples_per_trajectory: usize,
    pub noise: f64,
    pub threshold: f64,
    pub derivatives: DerivativeSource,
    pub config: ExperimentConfig,
}

/// Expands the `[sweep]` axes in the order budget, noise, threshold,
/// derivative source, replicate. Cell `k` is seeded with `seed + k`.
pub fn sweep_cells(config: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    let grid = config.sweep.as_ref().ok_or_else(|| Error::Config("no [sweep] section".into()))?;
    if grid.budgets.is_empty() {
        return Err(Error::Config("sweep grid is empty: give at least one entry in sweep.budgets".into()));
    }
    let or_default = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let noises = or_default(&grid.noise, config.trajectories.noise);
    let thresholds = or_default(&grid.threshold, config.fit.threshold);
    let sources =
        if grid.derivatives.is_empty() { vec![config.trajectories.derivatives] } else { grid.derivatives.clone() };
    let h = config.trajectories.h;
    let mut cells = Vec::new();
    for &(count, samples) in &grid.budgets {
        for &noise in &noises {
            for &threshold in &thresholds {
                for &derivatives in &sources {
                    for replicate in 0..grid.replicates {
                        let index = cells.len();
                        let mut c = config.clone();
                        c.sweep = None;
                        c.seed = config.seed.wrapping_add(index as u64);
                        c.trajectories.count = count;
                        c.trajectories.t_end = (samples - 1) as f64 * h;
                        c.trajectories.noise = noise;
                        c.trajectories.derivatives = derivatives;
                        c.fit.threshold = threshold;
                        c.validate()?;
                        cells.push(SweepCell {
                            index,
                            replicate,
                            n_trajectories: count,
                            samples_per_trajectory: samples,
                            noise,
                            threshold,
                            derivatives,
                            config: c,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub replicate: usize,
    pub n_trajectories: usize,
    pub samples_per_trajectory: usize,
    pub noise: f64,
    pub threshold: f64,
    pub derivatives: &'static str,
    pub seed: u64,
    pub support_precision: f64,
    pub support_recall: f64,
    pub support_f1: f64,
    pub coeff_max_abs_error: f64,
    pub coeff_rms_error: f64,
    pub forecast_rmse: Option<f64>,
    pub forecast_diverged_at: Option<f64>,
    pub identified_terms: usize,
    pub true_terms: usize,
}

/// Runs every cell (in parallel) and returns rows in cell order.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let cells = sweep_cells(config)?;
    cells
        .par_iter()
        .map(|cell| {
            let (_, r) = run(&cell.config).map_err(|e| match e {
                Error::Io { .. } => e,
                other => Error::Config(format!("sweep cell {}: {other}", cell.index)),
            })?;
            Ok(SweepRow {
                cell: cell.index,
                replicate: cell.replicate,
                n_trajectories: cell.n_trajectories,
                samples_per_trajectory: cell.samples_per_trajectory,
                noise: cell.noise,
                threshold: cell.threshold,
                derivatives: cell.derivatives.as_str(),
                seed: cell.config.seed,
                support_precision: r.support_precision,
                support_recall: r.support_recall,
                support_f1: r.support_f1,
                coeff_max_abs_error: r.coeff_max_abs_error,
                coeff_rms_error: r.coeff_rms_error,
                forecast_rmse: r.forecast_rmse,
                forecast_diverged_at: r.forecast_diverged_at,
                identified_terms: r.identified_terms,
                true_terms: r.true_terms,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(|e| Error::Numerical(format!("sweep table: {e}")))?;
    }
    out.flush().map_err(|e| Error::Io { path: "<sweep table>".into(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::{GameSpec, SweepConfig};

    fn rps_config() -> ExperimentConfig {
        ExperimentConfig { seed: 11, game: Some(GameSpec::builtin("rps")), ..Default::default() }
    }

    #[test]
    fn generation_is_seeded() {
        let mut c = rps_config();
        c.trajectories.count = 3;
        c.trajectories.t_end = 1.0;
        let g = c.build_game().unwrap();
        let a = generate_trajectories(&g, &c).unwrap();
        let b = generate_trajectories(&g, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_ne!(a[0].states.row(0), a[1].states.row(0));
        assert!(a.iter().all(|t| t.len() == 101 && t.derivatives.is_some()));
        c.seed = 12;
        assert_ne!(generate_trajectories(&g, &c).unwrap()[0].states, a[0].states);
    }

    #[test]
    fn clean_rps_run_recovers_truth() {
        let (_, r) = run(&rps_config()).unwrap();
        assert_eq!(r.support_f1, 1.0);
        assert!(r.coeff_max_abs_error < 1e-6);
        assert!(r.forecast_rmse.unwrap() < 1e-6);
    }

    #[test]
    fn missing_derivatives_need_a_game() {
        let mut c = rps_config();
        c.trajectories.t_end = 0.5;
        let g = c.build_game().unwrap();
        let mut ts = generate_trajectories(&g, &c).unwrap();
        ts[0].derivatives = None;
        assert!(matches!(prepare_derivatives(ts.clone(), DerivativeSource::Exact, None), Err(Error::Config(_))));
        assert!(prepare_derivatives(ts, DerivativeSource::FiniteDifference, None).is_ok());
    }

    #[test]
    fn sweep_grid_expansion() {
        let mut c = rps_config();
        c.sweep = Some(SweepConfig {
            budgets: vec![(1, 200), (4, 50)],
            noise: vec![0.0, 0.01],
            replicates: 2,
            ..Default::default()
        });
        let cells = sweep_cells(&c).unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[5].config.seed, 16);
        assert_eq!(cells[5].n_trajectories, 4);
        assert_eq!(crate::trajectory::sample_count(cells[5].config.trajectories.t_end, 0.01), 50);
        c.sweep.as_mut().unwrap().budgets.clear();
        assert!(matches!(sweep_cells(&c), Err(Error::Config(_))));
    }

    #[test]
    fn single_cell_sweep_matches_direct_run() {
        let mut c = rps_config();
        c.trajectories.t_end = 4.99;
        c.sweep = Some(SweepConfig { budgets: vec![(1, 500)], ..Default::default() });
        let rows = sweep(&c).unwrap();
        let mut direct = c.clone();
        direct.sweep = None;
        let (_, r) = run(&direct).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].support_f1, r.support_f1);
        assert_eq!(rows[0].coeff_max_abs_error, r.coeff_max_abs_error);
        assert_eq!(rows[0].forecast_rmse, r.forecast_rmse);
    }
}
