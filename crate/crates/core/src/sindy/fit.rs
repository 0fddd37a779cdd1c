use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sindy::data::DataMatrices;
use crate::sindy::library::FeatureLibrary;
use crate::sindy::model::SparseModel;
use crate::sindy::stlsq::{StlsqOptions, StlsqProblem};

/// Row sums of a constraint block may deviate from one by this much on
/// noise-free data.
pub const CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitOptions {
    pub stlsq: StlsqOptions,
    /// Groups of states that sum to one. For each group only the first
    /// `len - 1` derivatives are regressed; the last is reconstructed.
    pub constraint_blocks: Option<Vec<Vec<usize>>>,
}

impl FitOptions {
    pub fn new(threshold: f64) -> Self {
        FitOptions { stlsq: StlsqOptions { threshold, ..Default::default() }, constraint_blocks: None }
    }

    pub fn with_blocks(mut self, blocks: Vec<Vec<usize>>) -> Self {
        self.constraint_blocks = Some(blocks);
        self
    }
}

fn validate_blocks(blocks: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for block in blocks {
        if block.is_empty() {
            return Err(Error::dim("empty constraint block"));
        }
        for &i in block {
            if i >= n {
                return Err(Error::dim(format!("constraint index {i} out of range for {n} states")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::dim(format!("state {i} appears in two constraint blocks")));
            }
        }
    }
    Ok(())
}

fn check_constraints(data: &DataMatrices, blocks: &[Vec<usize>]) -> Result<()> {
    if data.noise_sigma > 0.0 {
        return Ok(());
    }
    for block in blocks {
        for row in 0..data.rows() {
            let sum: f64 = block.iter().map(|&i| data.x[(row, i)]).sum();
            if (sum - 1.0).abs() > CONSTRAINT_TOL {
                return Err(Error::ConstraintViolation { block: block.clone(), row, sum });
            }
        }
    }
    Ok(())
}

/// Validated fitting plan shared by single and ensemble fits.
pub(crate) struct FitPlan {
    pub blocks: Vec<Vec<usize>>,
    pub fitted: Vec<usize>,
    pub reconstructed: Vec<usize>,
    pub null: DMatrix<f64>,
}

impl FitPlan {
    pub fn new(data: &DataMatrices, library: &FeatureLibrary, options: &FitOptions) -> Result<Self> {
        let n = data.n_states();
        if library.n_states() != n {
            return Err(Error::dim(format!("library has {} states, data has {n}", library.n_states())));
        }
        options.stlsq.validate()?;
        let blocks = options.constraint_blocks.clone().unwrap_or_default();
        validate_blocks(&blocks, n)?;
        check_constraints(data, &blocks)?;
        let reconstructed: Vec<usize> = blocks.iter().map(|b| *b.last().expect("non-empty")).collect();
        let fitted = (0..n).filter(|i| !reconstructed.contains(i)).collect();
        let null = if blocks.is_empty() {
            DMatrix::zeros(library.len(), 0)
        } else {
            library.constraint_null_basis(&blocks)
        };
        Ok(FitPlan { blocks, fitted, reconstructed, null })
    }

    pub fn coefficients(&self, theta: &DMatrix<f64>, xdot: &DMatrix<f64>, options: &StlsqOptions) -> Result<DMatrix<f64>> {
        let problem = StlsqProblem::new(theta, *options)?.with_null_basis(self.null.clone());
        let mut xi = problem.fit_columns(xdot, &self.fitted)?;
        self.reconstruct(&mut xi, options.threshold);
        Ok(xi)
    }

    /// Sets the last column of every block to minus the sum of the others.
    /// The hard threshold applies here as well, and sums that cancel to
    /// rounding level become exact zeros.
    pub fn reconstruct(&self, xi: &mut DMatrix<f64>, threshold: f64) {
        for block in &self.blocks {
            let (&last, rest) = block.split_last().expect("non-empty");
            for i in 0..xi.nrows() {
                let sum: f64 = rest.iter().map(|&j| xi[(i, j)]).sum();
                let scale: f64 = rest.iter().map(|&j| xi[(i, j)].abs()).sum();
                let cancelled = sum.abs() <= 8.0 * f64::EPSILON * scale * rest.len() as f64;
                xi[(i, last)] = if cancelled || sum.abs() < threshold { 0.0 } else { -sum };
            }
        }
    }

    pub fn into_model(self, library: &FeatureLibrary, xi: DMatrix<f64>, threshold: f64) -> SparseModel {
        SparseModel::new(library.clone(), xi, threshold, self.reconstructed, self.blocks)
    }
}

/// Sparse regression of `data.xdot` on `library`.
pub fn fit_with(data: &DataMatrices, library: &FeatureLibrary, options: &FitOptions) -> Result<SparseModel> {
    let plan = FitPlan::new(data, library, options)?;
    let theta = library.evaluate(&data.x)?;
    let xi = plan.coefficients(&theta, &data.xdot, &options.stlsq)?;
    Ok(plan.into_model(library, xi, options.stlsq.threshold))
}

pub fn fit(
    data: &DataMatrices,
    library: &FeatureLibrary,
    threshold: f64,
    constraint_blocks: Option<Vec<Vec<usize>>>,
) -> Result<SparseModel> {
    let options = FitOptions { constraint_blocks, ..FitOptions::new(threshold) };
    fit_with(data, library, &options)
}
