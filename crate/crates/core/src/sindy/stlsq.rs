//! Sequentially thresholded least squares.
//!
//! Each target column alternates a least-squares solve with hard
//! thresholding until the active set stops changing. Solves go through the
//! SVD. When a restricted problem is rank deficient, or when the caller
//! supplies known degenerate directions (see [`StlsqProblem::with_null_basis`]),
//! the coefficient vector is picked as the l1-minimal member of the solution
//! set, which keeps collinear candidate libraries from smearing one term
//! over many equivalent columns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sindy::linalg::{lstsq_min_norm, min_l1_affine, orthogonal_complement, restrict_null_basis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StlsqOptions {
    pub threshold: f64,
    pub max_iter: usize,
    /// Scale Θ columns to unit norm before each solve. Thresholds still
    /// apply to the unscaled coefficients.
    pub normalize_columns: bool,
    /// Relative singular-value cutoff for the numerical rank.
    pub rcond: f64,
}

impl Default for StlsqOptions {
    fn default() -> Self {
        StlsqOptions { threshold: 0.05, max_iter: 10, normalize_columns: false, rcond: 1e-8 }
    }
}

impl StlsqOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!("threshold must be >= 0, got {}", self.threshold)));
        }
        if !(self.rcond > 0.0 && self.rcond < 1.0) {
            return Err(Error::Config(format!("rcond must be in (0, 1), got {}", self.rcond)));
        }
        Ok(())
    }
}

/// A regression problem `Θ ξ ≈ y` shared by all target columns.
pub struct StlsqProblem<'a> {
    theta: &'a DMatrix<f64>,
    options: StlsqOptions,
    null: DMatrix<f64>,
    norms: Vec<f64>,
}

impl<'a> StlsqProblem<'a> {
    pub fn new(theta: &'a DMatrix<f64>, options: StlsqOptions) -> Result<Self> {
        options.validate()?;
        if theta.nrows() == 0 || theta.ncols() == 0 {
            return Err(Error::dim(format!("Θ is {}×{}", theta.nrows(), theta.ncols())));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("Θ has non-finite entries".into()));
        }
        let norms = if options.normalize_columns {
            theta
                .column_iter()
                .map(|c| {
                    let n = c.norm();
                    if n > 0.0 {
                        n
                    } else {
                        1.0
                    }
                })
                .collect()
        } else {
            vec![1.0; theta.ncols()]
        };
        Ok(StlsqProblem { theta, options, null: DMatrix::zeros(theta.ncols(), 0), norms })
    }

    /// Declares coefficient directions (orthonormal columns, `p × k`) that
    /// are unidentifiable by construction, e.g. the simplex constraint. Least
    /// squares is then solved in their orthogonal complement.
    pub fn with_null_basis(mut self, null: DMatrix<f64>) -> Self {
        assert_eq!(null.nrows(), self.theta.ncols());
        self.null = null;
        self
    }

    pub fn options(&self) -> &StlsqOptions {
        &self.options
    }

    /// Solves one target column restricted to `support`.
    fn solve_on(&self, support: &[usize], y: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.theta.nrows();
        let q = support.len();
        let d: Vec<f64> = support.iter().map(|&i| self.norms[i]).collect();
        let scaled = DMatrix::from_fn(m, q, |r, c| self.theta[(r, support[c])] / d[c]);

        // known degeneracy, mapped into scaled coordinates v = D w
        let null_w = if q == self.theta.ncols() {
            self.null.clone()
        } else {
            restrict_null_basis(&self.null, support)
        };
        let (v0, null_v) = if null_w.ncols() == 0 {
            lstsq_min_norm(&scaled, y, self.options.rcond)
        } else {
            let null_v = DMatrix::from_fn(q, null_w.ncols(), |r, c| null_w[(r, c)] * d[r]);
            let null_v = crate::sindy::linalg::orthonormal_range(&null_v, 1e-10);
            let basis = orthogonal_complement(&null_v);
            let (z, null_z) = lstsq_min_norm(&(&scaled * &basis), y, self.options.rcond);
            let v0 = &basis * z;
            let extra = &basis * null_z;
            let mut all = DMatrix::zeros(q, null_v.ncols() + extra.ncols());
            all.columns_mut(0, null_v.ncols()).copy_from(&null_v);
            all.columns_mut(null_v.ncols(), extra.ncols()).copy_from(&extra);
            (v0, all)
        };
        let w0 = DVector::from_fn(q, |r, _| v0[r] / d[r]);
        if null_v.ncols() == 0 {
            return Ok(w0);
        }
        let basis_w = DMatrix::from_fn(q, null_v.ncols(), |r, c| null_v[(r, c)] / d[r]);
        min_l1_affine(&w0, &basis_w)
    }

    /// Runs the thresholding iteration on one target column, optionally
    /// starting from a given active set instead of the full library.
    pub fn fit_column(&self, y: &DVector<f64>, initial_support: Option<&[bool]>) -> Result<DVector<f64>> {
        let p = self.theta.ncols();
        if y.len() != self.theta.nrows() {
            return Err(Error::dim(format!(
                "target has {} rows, Θ has {}",
                y.len(),
                self.theta.nrows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("target has non-finite entries".into()));
        }
        let lambda = self.options.threshold;
        let start: Vec<usize> = match initial_support {
            Some(mask) => (0..p).filter(|&i| mask[i]).collect(),
            None => (0..p).collect(),
        };
        let mut w = self.scatter(&start, &self.solve_on(&start, y)?, p);
        for _ in 0..self.options.max_iter {
            let keep: Vec<usize> = (0..p).filter(|&i| w[i] != 0.0 && w[i].abs() >= lambda).collect();
            let active: Vec<usize> = (0..p).filter(|&i| w[i] != 0.0).collect();
            if keep == active {
                break;
            }
            if keep.is_empty() {
                w.fill(0.0);
                break;
            }
            w = self.scatter(&keep, &self.solve_on(&keep, y)?, p);
        }
        for v in w.iter_mut() {
            if v.abs() < lambda {
                *v = 0.0;
            }
        }
        Ok(w)
    }

    fn scatter(&self, support: &[usize], values: &DVector<f64>, p: usize) -> DVector<f64> {
        let mut w = DVector::zeros(p);
        for (k, &i) in support.iter().enumerate() {
            w[i] = values[k];
        }
        w
    }

    /// Fits every column of `xdot`.
    pub fn fit(&self, xdot: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.fit_columns(xdot, &(0..xdot.ncols()).collect::<Vec<_>>())
    }

    /// Fits the listed columns of `xdot`; other columns of the result stay zero.
    pub fn fit_columns(&self, xdot: &DMatrix<f64>, columns: &[usize]) -> Result<DMatrix<f64>> {
        if xdot.nrows() != self.theta.nrows() {
            return Err(Error::dim(format!(
                "Ẋ has {} rows, Θ has {}",
                xdot.nrows(),
                self.theta.nrows()
            )));
        }
        let mut xi = DMatrix::zeros(self.theta.ncols(), xdot.ncols());
        for &j in columns {
            let w = self.fit_column(&xdot.column(j).into_owned(), None)?;
            xi.set_column(j, &w);
        }
        Ok(xi)
    }
}

/// Plain STLSQ on every column of `xdot` with default solver settings.
pub fn stlsq(theta: &DMatrix<f64>, xdot: &DMatrix<f64>, threshold: f64, max_iter: usize) -> Result<DMatrix<f64>> {
    let options = StlsqOptions { threshold, max_iter, ..StlsqOptions::default() };
    StlsqProblem::new(theta, options)?.fit(xdot)
}
