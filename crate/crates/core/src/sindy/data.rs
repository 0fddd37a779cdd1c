use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Stacked state and derivative samples `X`, `Ẋ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    pub x: DMatrix<f64>,
    pub xdot: DMatrix<f64>,
    /// Start row of every trajectory, followed by the total row count.
    pub boundaries: Vec<usize>,
    /// Largest observation noise among the stacked trajectories.
    pub noise_sigma: f64,
}

impl DataMatrices {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_states(&self) -> usize {
        self.x.ncols()
    }

    /// Copy restricted to the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrices {
        DataMatrices {
            x: self.x.select_rows(rows),
            xdot: self.xdot.select_rows(rows),
            boundaries: vec![0, rows.len()],
            noise_sigma: self.noise_sigma,
        }
    }
}

/// Stacks trajectories in order, each in time order.
pub fn assemble_data(trajectories: &[Trajectory]) -> Result<DataMatrices> {
    let first = trajectories.first().ok_or_else(|| Error::dim("no trajectories to assemble"))?;
    let n = first.n_states();
    let mut boundaries = vec![0];
    let mut total = 0;
    for (k, t) in trajectories.iter().enumerate() {
        if t.n_states() != n {
            return Err(Error::dim(format!(
                "trajectory {k} has {} states, trajectory 0 has {n}",
                t.n_states()
            )));
        }
        if t.derivatives.is_none() {
            return Err(Error::MissingDerivatives(k));
        }
        total += t.len();
        boundaries.push(total);
    }
    let mut x = DMatrix::zeros(total, n);
    let mut xdot = DMatrix::zeros(total, n);
    for (t, &start) in trajectories.iter().zip(&boundaries) {
        let d = t.derivatives.as_ref().expect("checked above");
        x.rows_mut(start, t.len()).copy_from(&t.states);
        xdot.rows_mut(start, t.len()).copy_from(d);
    }
    let noise_sigma = trajectories.iter().map(|t| t.meta.noise_sigma).fold(0.0, f64::max);
    Ok(DataMatrices { x, xdot, boundaries, noise_sigma })
}
