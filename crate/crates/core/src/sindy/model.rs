use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sindy::library::FeatureLibrary;

/// Identified right-hand side `ẋ = Θ(x)·Ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    library: FeatureLibrary,
    /// Ξ, one row per feature and one column per state.
    coefficients: DMatrix<f64>,
    threshold: f64,
    /// Columns obtained from the block constraint instead of regression.
    reconstructed_columns: Vec<usize>,
    /// State groups that sum to one in the training data.
    blocks: Vec<Vec<usize>>,
}

impl SparseModel {
    pub fn new(
        library: FeatureLibrary,
        coefficients: DMatrix<f64>,
        threshold: f64,
        reconstructed_columns: Vec<usize>,
        blocks: Vec<Vec<usize>>,
    ) -> Self {
        assert_eq!(coefficients.nrows(), library.len(), "one coefficient row per feature");
        assert_eq!(coefficients.ncols(), library.n_states(), "one coefficient column per state");
        SparseModel { library, coefficients, threshold, reconstructed_columns, blocks }
    }

    pub fn zeros(library: FeatureLibrary) -> Self {
        let (p, n) = (library.len(), library.n_states());
        SparseModel::new(library, DMatrix::zeros(p, n), 0.0, Vec::new(), Vec::new())
    }

    pub fn library(&self) -> &FeatureLibrary {
        &self.library
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.coefficients
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn reconstructed_columns(&self) -> &[usize] {
        &self.reconstructed_columns
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_states(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn nonzero_count(&self) -> usize {
        self.coefficients.iter().filter(|v| **v != 0.0).count()
    }

    /// Model estimate of `ẋ` at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let theta = self.library.evaluate_row(x)?;
        Ok((0..self.n_states())
            .map(|j| theta.iter().enumerate().map(|(i, t)| t * self.coefficients[(i, j)]).sum())
            .collect())
    }

    pub(crate) fn same_library(&self, other: &SparseModel) -> Result<()> {
        if self.library != other.library {
            return Err(Error::LibraryMismatch);
        }
        Ok(())
    }
}
