//! Evolutionary games and their exact replicator vector fields.
//!
//! Symmetric games carry a single square payoff matrix `A`; the replicator
//! field is `x_i (f_i - f̄)` with `f = A x` and `f̄ = x·A·x`. Two-population
//! games carry a bimatrix `(A, B)` and evolve the row mix `x` and column mix
//! `y` jointly. States of two-population games are stored concatenated
//! (`x` then `y`) so downstream fitting code never needs to know which kind
//! of game produced the data.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sindy::library::{Feature, FeatureLibrary};
use crate::sindy::linalg::min_l1_affine;
use crate::sindy::model::SparseModel;

/// Tolerance on the component sum of a [`SimplexPoint`].
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GameKind {
    Symmetric {
        payoff: DMatrix<f64>,
        labels: Vec<String>,
    },
    /// `row_payoff` is `m × k`, `col_payoff` is `k × m`.
    TwoPopulation {
        row_payoff: DMatrix<f64>,
        col_payoff: DMatrix<f64>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffGame {
    pub name: String,
    pub kind: GameKind,
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidState("empty simplex point".into()));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidState(format!("component {v} is not a probability")));
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidState(format!("components sum to {sum}, not 1")));
        }
        Ok(SimplexPoint(x))
    }

    /// The `i`-th vertex of the `n`-strategy simplex.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut x = vec![0.0; n];
        x[i] = 1.0;
        SimplexPoint(x)
    }

    pub fn centroid(n: usize) -> Self {
        SimplexPoint(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Row-player and column-player mixes of a two-population game.
#[derive(Debug, Clone, PartialEq)]
pub struct BipopulationState {
    pub x: SimplexPoint,
    pub y: SimplexPoint,
}

impl BipopulationState {
    pub fn new(x: SimplexPoint, y: SimplexPoint) -> Self {
        BipopulationState { x, y }
    }

    /// `x` followed by `y`.
    pub fn concatenated(&self) -> Vec<f64> {
        let mut v = self.x.as_slice().to_vec();
        v.extend_from_slice(self.y.as_slice());
        v
    }
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::dim(format!("{what} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::dim(format!("{what} has ragged rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl PayoffGame {
    pub fn symmetric(name: impl Into<String>, payoff: &[Vec<f64>], labels: Vec<String>) -> Result<Self> {
        let payoff = to_matrix(payoff, "payoff matrix")?;
        if !payoff.is_square() {
            return Err(Error::dim(format!(
                "symmetric game needs a square payoff matrix, got {}×{}",
                payoff.nrows(),
                payoff.ncols()
            )));
        }
        if labels.len() != payoff.nrows() {
            return Err(Error::dim(format!(
                "{} labels for {} strategies",
                labels.len(),
                payoff.nrows()
            )));
        }
        Ok(PayoffGame { name: name.into(), kind: GameKind::Symmetric { payoff, labels } })
    }

    pub fn two_population(
        name: impl Into<String>,
        row_payoff: &[Vec<f64>],
        col_payoff: &[Vec<f64>],
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        let a = to_matrix(row_payoff, "row payoff matrix")?;
        let b = to_matrix(col_payoff, "column payoff matrix")?;
        let (m, k) = a.shape();
        if b.shape() != (k, m) {
            return Err(Error::dim(format!(
                "row payoffs are {m}×{k}, so column payoffs must be {k}×{m}, got {}×{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if row_labels.len() != m || col_labels.len() != k {
            return Err(Error::dim("label counts do not match payoff dimensions"));
        }
        Ok(PayoffGame {
            name: name.into(),
            kind: GameKind::TwoPopulation { row_payoff: a, col_payoff: b, row_labels, col_labels },
        })
    }

    /// Total length of the (concatenated) state vector.
    pub fn state_dim(&self) -> usize {
        match &self.kind {
            GameKind::Symmetric { payoff, .. } => payoff.nrows(),
            GameKind::TwoPopulation { row_payoff, .. } => row_payoff.nrows() + row_payoff.ncols(),
        }
    }

    /// Index groups whose components must sum to one.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        match &self.kind {
            GameKind::Symmetric { payoff, .. } => vec![(0..payoff.nrows()).collect()],
            GameKind::TwoPopulation { row_payoff, .. } => {
                let (m, k) = row_payoff.shape();
                vec![(0..m).collect(), (m..m + k).collect()]
            }
        }
    }

    /// Display names of the state components: `x_<label>` and, for the column
    /// population, `y_<label>`.
    pub fn state_names(&self) -> Vec<String> {
        match &self.kind {
            GameKind::Symmetric { labels, .. } => labels.iter().map(|l| format!("x_{l}")).collect(),
            GameKind::TwoPopulation { row_labels, col_labels, .. } => row_labels
                .iter()
                .map(|l| format!("x_{l}"))
                .chain(col_labels.iter().map(|l| format!("y_{l}")))
                .collect(),
        }
    }

    /// Strategy labels (first population only for two-population games).
    pub fn labels(&self) -> &[String] {
        match &self.kind {
            GameKind::Symmetric { labels, .. } => labels,
            GameKind::TwoPopulation { row_labels, .. } => row_labels,
        }
    }

    fn symmetric_payoff(&self) -> Result<&DMatrix<f64>> {
        match &self.kind {
            GameKind::Symmetric { payoff, .. } => Ok(payoff),
            GameKind::TwoPopulation { .. } => {
                Err(Error::dim(format!("`{}` is a two-population game", self.name)))
            }
        }
    }

    /// Per-strategy fitness `f = A·x`.
    pub fn fitness(&self, x: &SimplexPoint) -> Result<Vec<f64>> {
        let a = self.symmetric_payoff()?;
        check_len(x.dim(), a.nrows())?;
        Ok(mat_vec(a, x.as_slice()))
    }

    /// Population-average fitness `x·A·x`.
    pub fn average_fitness(&self, x: &SimplexPoint) -> Result<f64> {
        let f = self.fitness(x)?;
        Ok(dot(x.as_slice(), &f))
    }

    pub fn replicator_rhs(&self, x: &SimplexPoint) -> Result<Vec<f64>> {
        let a = self.symmetric_payoff()?;
        check_len(x.dim(), a.nrows())?;
        Ok(symmetric_field(a, x.as_slice()))
    }

    pub fn replicator_rhs_bipopulation(&self, s: &BipopulationState) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            GameKind::TwoPopulation { row_payoff, col_payoff, .. } => {
                check_len(s.x.dim(), row_payoff.nrows())?;
                check_len(s.y.dim(), row_payoff.ncols())?;
                Ok(bipopulation_field(row_payoff, col_payoff, s.x.as_slice(), s.y.as_slice()))
            }
            GameKind::Symmetric { .. } => {
                Err(Error::dim(format!("`{}` is a single-population game", self.name)))
            }
        }
    }

    /// Replicator field on a raw concatenated state. No simplex validation is
    /// done, so this is usable on intermediate Runge-Kutta stages.
    pub fn velocity(&self, state: &[f64]) -> Result<Vec<f64>> {
        check_len(state.len(), self.state_dim())?;
        Ok(match &self.kind {
            GameKind::Symmetric { payoff, .. } => symmetric_field(payoff, state),
            GameKind::TwoPopulation { row_payoff, col_payoff, .. } => {
                let (x, y) = state.split_at(row_payoff.nrows());
                let (dx, mut dy) = bipopulation_field(row_payoff, col_payoff, x, y);
                let mut v = dx;
                v.append(&mut dy);
                v
            }
        })
    }

    /// Checks that `state` is a valid (concatenated) state of this game.
    pub fn validate_state(&self, state: &[f64]) -> Result<()> {
        check_len(state.len(), self.state_dim())?;
        for block in self.blocks() {
            SimplexPoint::new(block.iter().map(|&i| state[i]).collect())?;
        }
        Ok(())
    }

    /// Polynomial expansion of the replicator field, one map per state
    /// component from exponent vector to coefficient. Exactly cancelling
    /// terms are dropped.
    pub fn polynomial_rhs(&self) -> Vec<BTreeMap<Vec<u32>, f64>> {
        let n = self.state_dim();
        let mut out = vec![BTreeMap::new(); n];
        let mut add = |row: usize, vars: &[usize], c: f64| {
            if c == 0.0 {
                return;
            }
            let mut e = vec![0u32; n];
            for &v in vars {
                e[v] += 1;
            }
            *out[row].entry(e).or_insert(0.0) += c;
        };
        match &self.kind {
            GameKind::Symmetric { payoff: a, .. } => {
                let s = a.nrows();
                for i in 0..s {
                    // x_i (A x)_i
                    for j in 0..s {
                        add(i, &[i, j], a[(i, j)]);
                    }
                    // - x_i (x·A·x)
                    for j in 0..s {
                        for k in 0..s {
                            add(i, &[i, j, k], -a[(j, k)]);
                        }
                    }
                }
            }
            GameKind::TwoPopulation { row_payoff: a, col_payoff: b, .. } => {
                let (m, k) = a.shape();
                for i in 0..m {
                    for l in 0..k {
                        add(i, &[i, m + l], a[(i, l)]);
                    }
                    for j in 0..m {
                        for l in 0..k {
                            add(i, &[i, j, m + l], -a[(j, l)]);
                        }
                    }
                }
                for jj in 0..k {
                    for i in 0..m {
                        add(m + jj, &[m + jj, i], b[(jj, i)]);
                    }
                    for l in 0..k {
                        for i in 0..m {
                            add(m + jj, &[m + jj, m + l, i], -b[(l, i)]);
                        }
                    }
                }
            }
        }
        for row in &mut out {
            row.retain(|_, c| *c != 0.0);
        }
        out
    }
}

/// The exact replicator field written in `library` coordinates.
///
/// On the simplex the monomials are linearly dependent (`Σ x_i = 1`), so the
/// symbolic expansion is only one of many equivalent coefficient vectors. The
/// returned model is the l1-minimal representative modulo that dependency,
/// which is the same representative the sparse fitter converges to.
pub fn ground_truth_coefficients(game: &PayoffGame, library: &FeatureLibrary) -> Result<SparseModel> {
    let n = game.state_dim();
    if library.n_states() != n {
        return Err(Error::dim(format!(
            "library has {} states, game has {n}",
            library.n_states()
        )));
    }
    let p = library.len();
    let blocks = game.blocks();
    let null = library.constraint_null_basis(&blocks);
    let expansion = game.polynomial_rhs();
    let mut coefficients = DMatrix::zeros(p, n);
    for (col, terms) in expansion.iter().enumerate() {
        let mut w = vec![0.0; p];
        for (exps, c) in terms {
            let idx = library.index_of(&Feature::Monomial(exps.clone())).ok_or_else(|| {
                Error::InsufficientLibrary(format!(
                    "degree-{} monomial needed, library degree is {}",
                    exps.iter().sum::<u32>(),
                    library.degree()
                ))
            })?;
            w[idx] = *c;
        }
        let canonical = if w.iter().all(|v| *v == 0.0) { w } else { canonicalize(&w, &null)? };
        for (i, v) in canonical.into_iter().enumerate() {
            coefficients[(i, col)] = v;
        }
    }
    Ok(SparseModel::new(library.clone(), coefficients, 0.0, Vec::new(), blocks))
}

/// Minimum-l1 representative of `w + span(null)`. The LP only picks the
/// support; coefficients are then re-solved on it to full precision.
fn canonicalize(w: &[f64], null: &DMatrix<f64>) -> Result<Vec<f64>> {
    if null.ncols() == 0 {
        return Ok(w.to_vec());
    }
    let p = w.len();
    let w0 = nalgebra::DVector::from_column_slice(w);
    let l1 = min_l1_affine(&w0, null)?;
    // Re-solve w_S = w + N z exactly on the chosen support.
    let support: Vec<usize> = (0..p).filter(|&i| l1[i] != 0.0).collect();
    let off: Vec<usize> = (0..p).filter(|&i| l1[i] == 0.0).collect();
    // N_off z = -w_off
    let n_off = DMatrix::from_fn(off.len(), null.ncols(), |r, c| null[(off[r], c)]);
    let rhs = nalgebra::DVector::from_fn(off.len(), |r, _| -w[off[r]]);
    let z = crate::sindy::linalg::lstsq_min_norm(&n_off, &rhs, 1e-12).0;
    let full = &w0 + null * z;
    let mut out = vec![0.0; p];
    for &i in &support {
        out[i] = full[i];
    }
    // Fall back to the LP answer if the exact re-solve disagrees.
    let agree = support.iter().all(|&i| (out[i] - l1[i]).abs() <= 1e-6 * (1.0 + l1[i].abs()))
        && off.iter().all(|&i| full[i].abs() <= 1e-9);
    if agree {
        Ok(out)
    } else {
        Ok(l1.iter().copied().collect())
    }
}

/// Built-in games: `rps` (Rock-Paper-Scissors) and `battle_of_sexes`.
pub fn builtin_game(name: &str) -> Result<PayoffGame> {
    let labels = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match name {
        "rps" => PayoffGame::symmetric(
            "rps",
            &[vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]],
            labels(&["R", "P", "S"]),
        ),
        "battle_of_sexes" => PayoffGame::two_population(
            "battle_of_sexes",
            &[vec![2.0, 0.0], vec![0.0, 1.0]],
            &[vec![1.0, 0.0], vec![0.0, 2.0]],
            labels(&["Football", "Ballet"]),
            labels(&["Football", "Ballet"]),
        ),
        other => Err(Error::UnknownGame(other.to_string())),
    }
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::dim(format!("state has {got} components, game expects {want}")));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

fn symmetric_field(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let f = mat_vec(a, x);
    let mean = dot(x, &f);
    x.iter().zip(&f).map(|(xi, fi)| xi * (fi - mean)).collect()
}

fn bipopulation_field(a: &DMatrix<f64>, b: &DMatrix<f64>, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let fx = mat_vec(a, y);
    let fy = mat_vec(b, x);
    let mx = dot(x, &fx);
    let my = dot(y, &fy);
    (
        x.iter().zip(&fx).map(|(xi, fi)| xi * (fi - mx)).collect(),
        y.iter().zip(&fy).map(|(yi, fi)| yi * (fi - my)).collect(),
    )
}
