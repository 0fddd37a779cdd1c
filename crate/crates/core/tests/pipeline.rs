use replicator_sindy::evaluation::forecast_error;
use replicator_sindy::experiment::{identify, prepare_derivatives, run, sweep, sweep_cells};
use replicator_sindy::game::{builtin_game, ground_truth_coefficients};
use replicator_sindy::io::{DerivativeSource, ExperimentConfig, IdentificationReport};
use replicator_sindy::sindy::{build_library, SparseModel};
use replicator_sindy::Error;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).unwrap()
}

#[test]
fn forecast_error_ranks_truth_perturbation_and_zero() {
    let g = builtin_game("rps").unwrap();
    let lib = build_library(3, 3, false);
    let truth = ground_truth_coefficients(&g, &lib).unwrap();
    let mut perturbed = truth.clone();
    let (r, c) = (0..lib.len()).flat_map(|r| (0..3).map(move |c| (r, c))).find(|&(r, c)| truth.coefficients()[(r, c)] != 0.0).unwrap();
    perturbed.coefficients_mut()[(r, c)] *= 1.1;
    let zero = SparseModel::zeros(lib);
    let x0 = [0.5, 0.3, 0.2];
    let e = |m: &SparseModel| forecast_error(m, &g, &x0, 10.0, 0.01).unwrap();
    let (et, ep, ez) = (e(&truth), e(&perturbed), e(&zero));
    assert!(et < 1e-12, "{et}");
    assert!(et < ep && ep < ez, "{et} {ep} {ez}");
    assert!(ez > 0.01);
}

#[test]
fn clean_bimatrix_data_is_identified_exactly() {
    let (_, report) = run(&config(
        r#"
        seed = 3
        [game]
        id = "battle_of_sexes"
        [trajectories]
        count = 4
        t_end = 5.0
        "#,
    ))
    .unwrap();
    assert_eq!(report.support_f1, 1.0);
    assert!(report.coeff_max_abs_error < 1e-8, "{}", report.coeff_max_abs_error);
    assert!(report.forecast_rmse.unwrap() < 1e-8);
}

#[test]
fn runs_are_reproducible() {
    let c = config(
        r#"
        seed = 11
        [game]
        id = "rps"
        [trajectories]
        count = 2
        noise = 0.001
        derivatives = "finite_difference"
        [ensemble]
        n_models = 20
        "#,
    );
    let (a, ra) = run(&c).unwrap();
    let (b, rb) = run(&c).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(ra, rb);
    let ea = a.ensemble.unwrap();
    assert_eq!(ea.inclusion_probability, b.ensemble.unwrap().inclusion_probability);
    assert!(ea.inclusion_probability.iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn exact_derivatives_without_a_game_are_rejected() {
    let c = config("[game]\nid = \"rps\"");
    let g = builtin_game("rps").unwrap();
    let trajs = replicator_sindy::experiment::generate_trajectories(&g, &c).unwrap();
    let bare: Vec<_> = trajs.into_iter().map(|mut t| { t.derivatives = None; t }).collect();
    let exact = prepare_derivatives(bare.clone(), DerivativeSource::Exact, None);
    assert!(matches!(exact, Err(Error::Config(_))));
    let fd = prepare_derivatives(bare.clone(), DerivativeSource::FiniteDifference, None).unwrap();
    let model = identify(&fd, &c, None).unwrap().model;
    assert_eq!(model.blocks(), &[vec![0, 1, 2]]);
    let with_game = prepare_derivatives(bare, DerivativeSource::Exact, Some(&g)).unwrap();
    assert!(with_game.iter().all(|t| t.derivatives.is_some()));
}

#[test]
fn single_cell_sweep_matches_a_direct_run() {
    let c = config(
        r#"
        seed = 5
        [game]
        id = "rps"
        [trajectories]
        h = 0.02
        [sweep]
        budgets = [[2, 201]]
        noise = [0.002]
        derivatives = ["finite_difference"]
        "#,
    );
    let cells = sweep_cells(&c).unwrap();
    assert_eq!(cells.len(), 1);
    let rows = sweep(&c).unwrap();
    let (_, direct): (_, IdentificationReport) = run(&cells[0].config).unwrap();
    assert_eq!(rows[0].support_f1, direct.support_f1);
    assert_eq!(rows[0].coeff_rms_error, direct.coeff_rms_error);
    assert_eq!(rows[0].forecast_rmse, direct.forecast_rmse);
    assert_eq!(cells[0].config.trajectories.count, 2);
    assert!((cells[0].config.trajectories.t_end - 4.0).abs() < 1e-12);
}

#[test]
fn sweep_order_and_seeds() {
    let c = config(
        r#"
        seed = 100
        [game]
        id = "rps"
        [sweep]
        budgets = [[1, 50], [2, 50]]
        noise = [0.0, 0.01]
        replicates = 2
        "#,
    );
    let cells = sweep_cells(&c).unwrap();
    assert_eq!(cells.len(), 8);
    for (k, cell) in cells.iter().enumerate() {
        assert_eq!(cell.config.seed, 100 + k as u64);
        assert_eq!(cell.replicate, k % 2);
    }
    assert_eq!(cells[2].noise, 0.01);
    assert_eq!(cells[4].n_trajectories, 2);
}
