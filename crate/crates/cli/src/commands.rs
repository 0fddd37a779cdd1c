use std::fs;
use std::path::{Path, PathBuf};

use replicator_sindy::experiment::{self, trajectory_seed};
use replicator_sindy::game::PayoffGame;
use replicator_sindy::io::documents::to_json_string;
use replicator_sindy::io::{load_model, load_trajectory, save_json, save_trajectory, ExperimentConfig, GameSpec, ModelDocument};
use replicator_sindy::plot::render_svg;
use replicator_sindy::{Error, Result};
use serde::Serialize;

use crate::Common;

/// Config from `--config` (or defaults), with `--seed` and `--game` applied.
fn resolve(common: &Common, fallback: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    let mut config = match (&common.config, fallback) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(c)) => c,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(id) = &common.game {
        config.game = Some(GameSpec::builtin(id));
    }
    config.validate()?;
    Ok(config)
}

fn optional_game(config: &ExperimentConfig) -> Result<Option<PayoffGame>> {
    config.game.as_ref().map(GameSpec::build).transpose()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    seed: u64,
    samples: usize,
    x0: Vec<f64>,
}

#[derive(Serialize)]
struct Manifest {
    game: String,
    state_names: Vec<String>,
    trajectories: Vec<ManifestEntry>,
    config: ExperimentConfig,
}

pub fn simulate(common: &Common, out_dir: &Path) -> Result<()> {
    let config = resolve(common, None)?;
    let game = config.build_game()?;
    let trajectories = experiment::generate_trajectories(&game, &config)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io { path: out_dir.to_path_buf(), source: e })?;
    let mut entries = Vec::new();
    for (k, t) in trajectories.iter().enumerate() {
        let file = format!("trajectory_{k:03}.csv");
        save_trajectory(&out_dir.join(&file), t)?;
        entries.push(ManifestEntry { file, seed: trajectory_seed(config.seed, k), samples: t.len(), x0: t.state_row(0) });
    }
    let manifest = Manifest { game: game.name.clone(), state_names: game.state_names(), trajectories: entries, config };
    save_json(&out_dir.join("manifest.json"), &manifest)
}

pub fn identify(common: &Common, model_out: &Path, inputs: &[PathBuf]) -> Result<()> {
    let config = resolve(common, None)?;
    let game = optional_game(&config)?;
    let mut trajectories = Vec::with_capacity(inputs.len());
    for path in inputs {
        let mut t = load_trajectory(path)?;
        t.meta.noise_sigma = config.trajectories.noise;
        trajectories.push(t);
    }
    let trajectories = experiment::prepare_derivatives(trajectories, config.trajectories.derivatives, game.as_ref())?;
    let id = experiment::identify(&trajectories, &config, game.as_ref())?;
    let names = match &game {
        Some(g) => g.state_names(),
        None => (1..=id.model.n_states()).map(|i| format!("x{i}")).collect(),
    };
    let doc = ModelDocument::new(&id.model, names, id.ensemble.as_ref(), config)?;
    save_json(model_out, &doc)
}

pub fn evaluate(common: &Common, model_path: &Path, report_out: &Path) -> Result<()> {
    let (model, doc) = load_model(model_path)?;
    let config = resolve(common, Some(doc.config))?;
    let game = config.build_game()?;
    let report = experiment::evaluate(&model, &game, &config)?;
    write_text(report_out, &to_json_string(&report))
}

pub fn sweep(common: &Common, table_out: &Path) -> Result<()> {
    let config = resolve(common, None)?;
    let rows = experiment::sweep(&config)?;
    let mut buf = Vec::new();
    experiment::write_sweep_csv(&mut buf, &rows)?;
    fs::write(table_out, buf).map_err(|e| Error::Io { path: table_out.to_path_buf(), source: e })
}

pub fn plot(common: &Common, input: &Path, output: &Path) -> Result<()> {
    let config = resolve(common, None)?;
    let traj = load_trajectory(input)?;
    let labels = match optional_game(&config)? {
        Some(g) if g.state_dim() == 3 => g.labels().to_vec(),
        _ => (1..=traj.n_states()).map(|i| format!("x{i}")).collect(),
    };
    let svg = render_svg(&traj, &labels)?;
    write_text(output, &svg)
}
