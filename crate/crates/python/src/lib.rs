//! Python bindings for the replicator-sindy core.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use replicator_sindy::evaluation;
use replicator_sindy::experiment;
use replicator_sindy::game::{self, PayoffGame};
use replicator_sindy::io::ExperimentConfig;
use replicator_sindy::sindy::{self, EnsembleOptions, FeatureLibrary, FitOptions, SparseModel};
use replicator_sindy::trajectory::{self as traj, NoiseSpec};

fn py_err(e: replicator_sindy::Error) -> PyErr {
    match e {
        replicator_sindy::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[pyclass(name = "Game", module = "repsindy", frozen)]
struct PyGame(PayoffGame);

#[pymethods]
impl PyGame {
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        game::builtin_game(name).map(PyGame).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (name, payoff, labels=None))]
    fn symmetric(name: &str, payoff: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> PyResult<Self> {
        let labels = labels.unwrap_or_else(|| (1..=payoff.len()).map(|i| format!("s{i}")).collect());
        PayoffGame::symmetric(name, &payoff, labels).map(PyGame).map_err(py_err)
    }

    #[staticmethod]
    fn two_population(
        name: &str,
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        labels_x: Vec<String>,
        labels_y: Vec<String>,
    ) -> PyResult<Self> {
        PayoffGame::two_population(name, &a, &b, labels_x, labels_y).map(PyGame).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.0.state_dim()
    }

    #[getter]
    fn state_names(&self) -> Vec<String> {
        self.0.state_names()
    }

    #[getter]
    fn blocks(&self) -> Vec<Vec<usize>> {
        self.0.blocks()
    }

    /// Replicator velocity at a (possibly concatenated) state.
    fn rhs(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.velocity(&x).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Game({:?}, states={})", self.0.name, self.0.state_dim())
    }
}

#[pyclass(name = "Trajectory", module = "repsindy", frozen)]
struct PyTrajectory(traj::Trajectory);

#[pymethods]
impl PyTrajectory {
    #[new]
    #[pyo3(signature = (times, states, derivatives=None))]
    fn new(times: Vec<f64>, states: Vec<Vec<f64>>, derivatives: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let meta = traj::TrajectoryMeta {
            game: String::new(),
            seed: None,
            step: times.get(1).zip(times.first()).map_or(0.0, |(b, a)| b - a),
            noise_sigma: 0.0,
            blocks: vec![],
        };
        let mut t = traj::Trajectory::new(times, from_rows(&states)?, meta).map_err(py_err)?;
        t.derivatives = derivatives.as_deref().map(from_rows).transpose()?;
        Ok(PyTrajectory(t))
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        rows(&self.0.states)
    }

    #[getter]
    fn derivatives(&self) -> Option<Vec<Vec<f64>>> {
        self.0.derivatives.as_ref().map(rows)
    }

    fn with_exact_derivatives(&self, game: &PyGame) -> PyResult<Self> {
        traj::exact_derivatives(&game.0, &self.0).map(PyTrajectory).map_err(py_err)
    }

    fn with_finite_differences(&self) -> PyResult<Self> {
        traj::finite_difference_derivatives(&self.0).map(PyTrajectory).map_err(py_err)
    }

    fn with_noise(&self, sigma: f64, seed: u64) -> PyResult<Self> {
        traj::add_noise(&self.0, NoiseSpec { sigma, seed }).map(PyTrajectory).map_err(py_err)
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        replicator_sindy::io::save_trajectory(std::path::Path::new(path), &self.0).map_err(py_err)
    }

    #[staticmethod]
    fn load_csv(path: &str) -> PyResult<Self> {
        replicator_sindy::io::load_trajectory(std::path::Path::new(path)).map(PyTrajectory).map_err(py_err)
    }

    /// Polyline of the trajectory drawn on the simplex triangle, as SVG text.
    #[pyo3(signature = (labels=None))]
    fn to_svg(&self, labels: Option<Vec<String>>) -> PyResult<String> {
        let labels = labels.unwrap_or_else(|| vec!["x1".into(), "x2".into(), "x3".into()]);
        replicator_sindy::plot::render_svg(&self.0, &labels).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Library", module = "repsindy", frozen)]
struct PyLibrary(FeatureLibrary);

#[pymethods]
impl PyLibrary {
    #[new]
    #[pyo3(signature = (n_states, degree=3, trig=false))]
    fn new(n_states: usize, degree: u32, trig: bool) -> Self {
        PyLibrary(sindy::build_library(n_states, degree, trig))
    }

    #[pyo3(signature = (names=None))]
    fn feature_names(&self, names: Option<Vec<String>>) -> Vec<String> {
        let names = names.unwrap_or_else(|| (1..=self.0.n_states()).map(|i| format!("x{i}")).collect());
        self.0.features().iter().map(|f| f.name(&names)).collect()
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.evaluate_row(&x).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Model", module = "repsindy", frozen)]
struct PyModel(SparseModel);

#[pymethods]
impl PyModel {
    /// Coefficients as rows of the library by columns of the state.
    #[getter]
    fn coefficients(&self) -> Vec<Vec<f64>> {
        rows(self.0.coefficients())
    }

    #[getter]
    fn nonzero_count(&self) -> usize {
        self.0.nonzero_count()
    }

    #[getter]
    fn library(&self) -> PyLibrary {
        PyLibrary(self.0.library().clone())
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.predict(&x).map_err(py_err)
    }

    #[pyo3(signature = (names=None))]
    fn equations(&self, names: Option<Vec<String>>) -> PyResult<Vec<String>> {
        let names = names.unwrap_or_else(|| (1..=self.0.n_states()).map(|i| format!("x{i}")).collect());
        evaluation::render_equations(&self.0, &names).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Model(states={}, nonzero={})", self.0.n_states(), self.0.nonzero_count())
    }
}

#[pyfunction]
#[pyo3(signature = (game, x0, t_end=10.0, h=0.01))]
fn simulate(game: &PyGame, x0: Vec<f64>, t_end: f64, h: f64) -> PyResult<PyTrajectory> {
    traj::simulate(&game.0, &x0, t_end, h).map(PyTrajectory).map_err(py_err)
}

#[pyfunction]
fn sample_initial_state(game: &PyGame, seed: u64) -> PyResult<Vec<f64>> {
    traj::sample_initial_state(&game.0, seed).map_err(py_err)
}

#[pyfunction]
fn ground_truth(game: &PyGame, library: &PyLibrary) -> PyResult<PyModel> {
    game::ground_truth_coefficients(&game.0, &library.0).map(PyModel).map_err(py_err)
}

fn assemble(trajectories: &[PyRef<'_, PyTrajectory>]) -> PyResult<sindy::DataMatrices> {
    let owned: Vec<traj::Trajectory> = trajectories.iter().map(|t| t.0.clone()).collect();
    sindy::assemble_data(&owned).map_err(py_err)
}

/// Fits a sparse model. `blocks` lists groups of states summing to one.
#[pyfunction]
#[pyo3(signature = (trajectories, library, threshold=0.05, blocks=None))]
fn fit(
    trajectories: Vec<PyRef<'_, PyTrajectory>>,
    library: &PyLibrary,
    threshold: f64,
    blocks: Option<Vec<Vec<usize>>>,
) -> PyResult<PyModel> {
    let data = assemble(&trajectories)?;
    sindy::fit(&data, &library.0, threshold, blocks).map(PyModel).map_err(py_err)
}

/// Plain thresholded least squares on explicit matrices.
#[pyfunction]
#[pyo3(signature = (theta, y, threshold, max_iter=10))]
fn stlsq(theta: Vec<Vec<f64>>, y: Vec<Vec<f64>>, threshold: f64, max_iter: usize) -> PyResult<Vec<Vec<f64>>> {
    sindy::stlsq(&from_rows(&theta)?, &from_rows(&y)?, threshold, max_iter).map(|xi| rows(&xi)).map_err(py_err)
}

/// Bagged fit. Returns the masked median model and the inclusion probabilities.
#[pyfunction]
#[pyo3(signature = (trajectories, library, threshold=0.05, blocks=None, n_models=100, subsample_fraction=0.6, inclusion_threshold=0.5, seed=0))]
#[allow(clippy::too_many_arguments)]
fn ensemble(
    trajectories: Vec<PyRef<'_, PyTrajectory>>,
    library: &PyLibrary,
    threshold: f64,
    blocks: Option<Vec<Vec<usize>>>,
    n_models: usize,
    subsample_fraction: f64,
    inclusion_threshold: f64,
    seed: u64,
) -> PyResult<(PyModel, Vec<Vec<f64>>)> {
    let data = assemble(&trajectories)?;
    let options = FitOptions { constraint_blocks: blocks, ..FitOptions::new(threshold) };
    let eo = EnsembleOptions { n_models, subsample_fraction, inclusion_threshold, seed };
    let ens = sindy::ensemble_fit(&data, &library.0, &options, &eo).map_err(py_err)?;
    Ok((PyModel(ens.model.clone()), rows(&ens.inclusion_probability)))
}

/// Support precision, recall and F1 of `identified` against `truth`.
#[pyfunction]
fn support_metrics(identified: &PyModel, truth: &PyModel) -> PyResult<(f64, f64, f64)> {
    let m = evaluation::support_metrics(&identified.0, &truth.0).map_err(py_err)?;
    Ok((m.precision, m.recall, m.f1))
}

/// Max-abs and RMS coefficient error.
#[pyfunction]
fn coefficient_error(identified: &PyModel, truth: &PyModel) -> PyResult<(f64, f64)> {
    let e = evaluation::coefficient_error(&identified.0, &truth.0).map_err(py_err)?;
    Ok((e.max_abs, e.rms))
}

#[pyfunction]
#[pyo3(signature = (model, game, x0, t_end=10.0, h=0.01))]
fn forecast_error(model: &PyModel, game: &PyGame, x0: Vec<f64>, t_end: f64, h: f64) -> PyResult<f64> {
    evaluation::forecast_error(&model.0, &game.0, &x0, t_end, h).map_err(py_err)
}

/// Runs a whole TOML experiment and returns the model and the report as JSON.
#[pyfunction]
fn run_config(toml_text: &str) -> PyResult<(PyModel, String)> {
    let config = ExperimentConfig::from_toml_str(toml_text).map_err(py_err)?;
    let (ident, report) = experiment::run(&config).map_err(py_err)?;
    let json = replicator_sindy::io::to_json_string(&report);
    Ok((PyModel(ident.model), json))
}

#[pymodule]
fn repsindy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyLibrary>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sample_initial_state, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(stlsq, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(support_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(coefficient_error, m)?)?;
    m.add_function(wrap_pyfunction!(forecast_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
