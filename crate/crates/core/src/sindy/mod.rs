//! Sparse identification of nonlinear dynamics.

pub mod data;
pub mod ensemble;
pub mod fit;
pub mod library;
pub mod linalg;
pub mod model;
pub mod stlsq;

pub use data::{assemble_data, DataMatrices};
pub use ensemble::{ensemble_fit, EnsembleModel, EnsembleOptions};
pub use fit::{fit, fit_with, FitOptions};
pub use library::{build_library, Feature, FeatureLibrary, LibrarySpec};
pub use model::SparseModel;
pub use stlsq::{stlsq, StlsqOptions, StlsqProblem};
