//! TOML experiment configuration with strict schema checking.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{builtin_game, PayoffGame};
use crate::sindy::{EnsembleOptions, FitOptions, StlsqOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    #[default]
    Exact,
    FiniteDifference,
}

impl DerivativeSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DerivativeSource::Exact => "exact",
            DerivativeSource::FiniteDifference => "finite_difference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricSpec {
    pub payoff: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPopulationSpec {
    pub row_payoff: Vec<Vec<f64>>,
    pub col_payoff: Vec<Vec<f64>>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

/// Exactly one of `id`, `symmetric` or `two_population`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<SymmetricSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_population: Option<TwoPopulationSpec>,
}

impl GameSpec {
    pub fn builtin(id: &str) -> Self {
        GameSpec { id: Some(id.to_string()), ..Default::default() }
    }

    pub fn build(&self) -> Result<PayoffGame> {
        let name = || self.name.clone().unwrap_or_else(|| "custom".to_string());
        match (&self.id, &self.symmetric, &self.two_population) {
            (Some(id), None, None) => builtin_game(id),
            (None, Some(s), None) => PayoffGame::symmetric(name(), &s.payoff, s.labels.clone()),
            (None, None, Some(t)) => PayoffGame::two_population(
                name(),
                &t.row_payoff,
                &t.col_payoff,
                t.row_labels.clone(),
                t.col_labels.clone(),
            ),
            _ => Err(Error::Config(
                "[game] needs exactly one of `id`, `symmetric` or `two_population`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryPlan {
    pub count: usize,
    pub t_end: f64,
    pub h: f64,
    pub noise: f64,
    pub derivatives: DerivativeSource,
}

impl Default for TrajectoryPlan {
    fn default() -> Self {
        TrajectoryPlan { count: 1, t_end: 10.0, h: 0.01, noise: 0.0, derivatives: DerivativeSource::Exact }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LibraryConfig {
    pub degree: u32,
    pub trig: bool,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig { degree: 3, trig: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub threshold: f64,
    pub max_iter: usize,
    /// Fit one fewer equation per simplex block and reconstruct the last.
    pub constraints: bool,
    pub normalize: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { threshold: 0.05, max_iter: 10, constraints: true, normalize: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_models: usize,
    pub subsample_fraction: f64,
    pub inclusion_threshold: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        let d = EnsembleOptions::default();
        EnsembleConfig {
            n_models: d.n_models,
            subsample_fraction: d.subsample_fraction,
            inclusion_threshold: d.inclusion_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub forecast_t_end: f64,
    pub forecast_h: f64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { forecast_t_end: 10.0, forecast_h: 0.01 }
    }
}

/// Grid axes for `sweep`. Empty `noise`, `threshold` or `derivatives` axes
/// fall back to the single value of the main configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// `[n_trajectories, samples_per_trajectory]` pairs.
    pub budgets: Vec<(usize, usize)>,
    pub noise: Vec<f64>,
    pub threshold: Vec<f64>,
    pub derivatives: Vec<DerivativeSource>,
    pub replicates: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { budgets: Vec::new(), noise: Vec::new(), threshold: Vec::new(), derivatives: Vec::new(), replicates: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSpec>,
    #[serde(default)]
    pub trajectories: TrajectoryPlan,
    #[serde(default)]
    pub library: LibraryConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn non_negative(v: f64) -> bool {
    v >= 0.0 && v.is_finite()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.game {
            g.build()?;
        }
        let t = &self.trajectories;
        require(t.count >= 1, || "trajectories.count must be >= 1".into())?;
        require(positive(t.t_end), || format!("trajectories.t_end must be > 0, got {}", t.t_end))?;
        require(positive(t.h), || format!("trajectories.h must be > 0, got {}", t.h))?;
        require(t.h <= t.t_end, || format!("trajectories.h = {} exceeds t_end = {}", t.h, t.t_end))?;
        require(non_negative(t.noise), || format!("trajectories.noise must be >= 0, got {}", t.noise))?;
        require((1..=8).contains(&self.library.degree), || {
            format!("library.degree must be in 1..=8, got {}", self.library.degree)
        })?;
        let f = &self.fit;
        require(non_negative(f.threshold), || format!("fit.threshold must be >= 0, got {}", f.threshold))?;
        require(f.max_iter >= 1, || "fit.max_iter must be >= 1".into())?;
        if let Some(e) = &self.ensemble {
            require(e.n_models >= 1, || "ensemble.n_models must be >= 1".into())?;
            require(e.subsample_fraction > 0.0 && e.subsample_fraction <= 1.0, || {
                format!("ensemble.subsample_fraction must be in (0, 1], got {}", e.subsample_fraction)
            })?;
            require((0.0..=1.0).contains(&e.inclusion_threshold), || {
                format!("ensemble.inclusion_threshold must be in [0, 1], got {}", e.inclusion_threshold)
            })?;
        }
        let ev = &self.evaluate;
        require(positive(ev.forecast_t_end), || "evaluate.forecast_t_end must be > 0".into())?;
        require(positive(ev.forecast_h) && ev.forecast_h <= ev.forecast_t_end, || {
            "evaluate.forecast_h must be in (0, forecast_t_end]".into()
        })?;
        if let Some(s) = &self.sweep {
            require(s.replicates >= 1, || "sweep.replicates must be >= 1".into())?;
            for &(count, samples) in &s.budgets {
                require(count >= 1 && samples >= 2, || {
                    format!("sweep budget [{count}, {samples}] needs >= 1 trajectory and >= 2 samples")
                })?;
            }
            require(s.noise.iter().all(|v| non_negative(*v)), || "sweep.noise values must be >= 0".into())?;
            require(s.threshold.iter().all(|v| non_negative(*v)), || "sweep.threshold values must be >= 0".into())?;
        }
        Ok(())
    }

    pub fn build_game(&self) -> Result<PayoffGame> {
        self.game
            .as_ref()
            .ok_or_else(|| Error::Config("no [game] section and no game given".into()))?
            .build()
    }

    pub fn stlsq_options(&self) -> StlsqOptions {
        StlsqOptions {
            threshold: self.fit.threshold,
            max_iter: self.fit.max_iter,
            normalize_columns: self.fit.normalize,
            ..StlsqOptions::default()
        }
    }

    /// Fit options; constraint blocks come from `blocks` when constraints are on.
    pub fn fit_options(&self, blocks: Vec<Vec<usize>>) -> FitOptions {
        FitOptions {
            stlsq: self.stlsq_options(),
            constraint_blocks: if self.fit.constraints { Some(blocks) } else { None },
        }
    }

    pub fn ensemble_options(&self) -> Option<EnsembleOptions> {
        self.ensemble.map(|e| EnsembleOptions {
            n_models: e.n_models,
            subsample_fraction: e.subsample_fraction,
            inclusion_threshold: e.inclusion_threshold,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
seed = 7

[game]
id = "battle_of_sexes"

[trajectories]
count = 20
t_end = 0.99
h = 0.01
noise = 0.005
derivatives = "finite_difference"

[library]
degree = 3

[fit]
threshold = 0.05
constraints = true

[ensemble]
n_models = 50

[sweep]
budgets = [[1, 2000], [20, 100]]
replicates = 3
"#;

    #[test]
    fn parses_full_config() {
        let c = ExperimentConfig::from_toml_str(FULL).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.trajectories.derivatives, DerivativeSource::FiniteDifference);
        assert_eq!(c.ensemble.unwrap().subsample_fraction, 0.6);
        assert_eq!(c.sweep.as_ref().unwrap().budgets, vec![(1, 2000), (20, 100)]);
        assert_eq!(c.build_game().unwrap().state_dim(), 4);
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c.trajectories, TrajectoryPlan::default());
        assert_eq!(c.fit.threshold, 0.05);
        assert!(c.game.is_none());
        assert!(c.build_game().is_err());
    }

    #[test]
    fn inline_games() {
        let c = ExperimentConfig::from_toml_str(
            "[game.symmetric]\npayoff = [[0.0, 1.0], [1.0, 0.0]]\nlabels = [\"A\", \"B\"]\n",
        )
        .unwrap();
        assert_eq!(c.build_game().unwrap().state_dim(), 2);
        let both = "[game]\nid = \"rps\"\n[game.symmetric]\npayoff = [[0.0]]\nlabels = [\"A\"]\n";
        assert!(ExperimentConfig::from_toml_str(both).is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        for bad in [
            "sed = 1",
            "[fit]\nlambda = 0.1",
            "[trajectories]\nh = 2.0\nt_end = 1.0",
            "[trajectories]\nnoise = -0.1",
            "[game]\nid = \"chess\"",
            "[fit]\nthreshold = -1.0",
            "[library]\ndegree = 0",
            "[ensemble]\nsubsample_fraction = 0.0",
            "[trajectories]\nderivatives = \"spline\"",
            "[sweep]\nbudgets = [[0, 10]]",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml_str(bad), Err(Error::Config(_)) | Err(Error::UnknownGame(_))),
                "accepted {bad:?}"
            );
        }
    }
}
