//! JSON documents for identified models and evaluation reports.

use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::render_equations;
use crate::io::config::ExperimentConfig;
use crate::sindy::{EnsembleModel, FeatureLibrary, LibrarySpec, SparseModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSummary {
    pub n_models: usize,
    pub subsample_fraction: f64,
    pub inclusion_threshold: f64,
    /// Same layout as `coefficients`.
    pub inclusion_probability: Vec<Vec<f64>>,
}

/// On-disk form of a [`SparseModel`]. `coefficients` has one row per
/// library feature and one column per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub library: LibrarySpec,
    pub threshold: f64,
    pub coefficients: Vec<Vec<f64>>,
    pub reconstructed_columns: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
    pub state_names: Vec<String>,
    /// Rendered for reading only; ignored when loading.
    pub equations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSummary>,
    pub config: ExperimentConfig,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::dim(format!("{what} must be {nrows}×{ncols}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl ModelDocument {
    pub fn new(
        model: &SparseModel,
        state_names: Vec<String>,
        ensemble: Option<&EnsembleModel>,
        config: ExperimentConfig,
    ) -> Result<Self> {
        let equations = render_equations(model, &state_names)?;
        Ok(ModelDocument {
            library: model.library().spec(),
            threshold: model.threshold(),
            coefficients: rows(model.coefficients()),
            reconstructed_columns: model.reconstructed_columns().to_vec(),
            blocks: model.blocks().to_vec(),
            state_names,
            equations,
            ensemble: ensemble.map(|e| EnsembleSummary {
                n_models: e.member_count,
                subsample_fraction: e.subsample_fraction,
                inclusion_threshold: e.inclusion_threshold,
                inclusion_probability: rows(&e.inclusion_probability),
            }),
            config,
        })
    }

    pub fn to_model(&self) -> Result<SparseModel> {
        let spec = self.library;
        if spec.n == 0 || spec.degree > 8 {
            return Err(Error::Config(format!("unsupported library {{n: {}, degree: {}}}", spec.n, spec.degree)));
        }
        let library = FeatureLibrary::from(spec);
        let xi = from_rows(&self.coefficients, library.len(), spec.n, "coefficients")?;
        if self.reconstructed_columns.iter().chain(self.blocks.iter().flatten()).any(|&i| i >= spec.n) {
            return Err(Error::dim("state index out of range in model document"));
        }
        if self.state_names.len() != spec.n {
            return Err(Error::dim(format!("{} state names for {} states", self.state_names.len(), spec.n)));
        }
        Ok(SparseModel::new(library, xi, self.threshold, self.reconstructed_columns.clone(), self.blocks.clone()))
    }
}

/// Metrics of one identified model against the true replicator system,
/// together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentificationReport {
    pub game: String,
    pub support_precision: f64,
    pub support_recall: f64,
    pub support_f1: f64,
    pub coeff_max_abs_error: f64,
    pub coeff_rms_error: f64,
    /// `None` when the identified rollout diverged.
    pub forecast_rmse: Option<f64>,
    pub forecast_diverged_at: Option<f64>,
    pub forecast_x0: Vec<f64>,
    pub identified_terms: usize,
    pub true_terms: usize,
    pub config: ExperimentConfig,
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::Parse { file: path.to_path_buf(), line: e.line() as u64, message: e.to_string() }
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| json_error(path, e))
}

pub fn load_model(path: &Path) -> Result<(SparseModel, ModelDocument)> {
    let doc: ModelDocument = load_json(path)?;
    Ok((doc.to_model()?, doc))
}
