//! Candidate feature libraries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    /// Product of states raised to the given exponents.
    Monomial(Vec<u32>),
    Sin(usize),
    Cos(usize),
}

impl Feature {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Feature::Monomial(e) => e
                .iter()
                .zip(x)
                .filter(|(p, _)| **p > 0)
                .map(|(p, v)| v.powi(*p as i32))
                .product(),
            Feature::Sin(i) => x[*i].sin(),
            Feature::Cos(i) => x[*i].cos(),
        }
    }

    pub fn name(&self, names: &[String]) -> String {
        match self {
            Feature::Monomial(e) => {
                let parts: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0)
                    .map(|(i, p)| if *p == 1 { names[i].clone() } else { format!("{}^{p}", names[i]) })
                    .collect();
                if parts.is_empty() {
                    "1".to_string()
                } else {
                    parts.join("*")
                }
            }
            Feature::Sin(i) => format!("sin({})", names[*i]),
            Feature::Cos(i) => format!("cos({})", names[*i]),
        }
    }
}

/// The compact description a library is rebuilt from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibrarySpec {
    pub n: usize,
    pub degree: u32,
    pub trig: bool,
}

/// Ordered candidate functions Θ: monomials by total degree (descending
/// lexicographic exponents within a degree), then `sin` of every state, then
/// `cos` of every state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LibrarySpec", into = "LibrarySpec")]
pub struct FeatureLibrary {
    n_states: usize,
    degree: u32,
    include_trig: bool,
    features: Vec<Feature>,
}

impl From<LibrarySpec> for FeatureLibrary {
    fn from(s: LibrarySpec) -> Self {
        build_library(s.n, s.degree, s.trig)
    }
}

impl From<FeatureLibrary> for LibrarySpec {
    fn from(l: FeatureLibrary) -> Self {
        l.spec()
    }
}

fn push_monomials(prefix: &mut Vec<u32>, n: usize, remaining: u32, out: &mut Vec<Feature>) {
    if prefix.len() + 1 == n {
        prefix.push(remaining);
        out.push(Feature::Monomial(prefix.clone()));
        prefix.pop();
        return;
    }
    for e in (0..=remaining).rev() {
        prefix.push(e);
        push_monomials(prefix, n, remaining - e, out);
        prefix.pop();
    }
}

pub fn build_library(n_states: usize, degree: u32, include_trig: bool) -> FeatureLibrary {
    assert!(n_states >= 1, "library needs at least one state");
    let mut features = Vec::new();
    for d in 0..=degree {
        push_monomials(&mut Vec::with_capacity(n_states), n_states, d, &mut features);
    }
    if include_trig {
        features.extend((0..n_states).map(Feature::Sin));
        features.extend((0..n_states).map(Feature::Cos));
    }
    FeatureLibrary { n_states, degree, include_trig, features }
}

impl FeatureLibrary {
    pub fn spec(&self) -> LibrarySpec {
        LibrarySpec { n: self.n_states, degree: self.degree, trig: self.include_trig }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn include_trig(&self) -> bool {
        self.include_trig
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, f: &Feature) -> Option<usize> {
        self.features.iter().position(|g| g == f)
    }

    pub fn evaluate_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_states {
            return Err(Error::dim(format!(
                "state has {} components, library expects {}",
                x.len(),
                self.n_states
            )));
        }
        Ok(self.features.iter().map(|f| f.eval(x)).collect())
    }

    /// Θ(X): one row per sample, one column per feature.
    pub fn evaluate(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_states {
            return Err(Error::dim(format!(
                "data has {} columns, library expects {}",
                x.ncols(),
                self.n_states
            )));
        }
        let mut theta = DMatrix::zeros(x.nrows(), self.len());
        let mut row = vec![0.0; self.n_states];
        for i in 0..x.nrows() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            for (j, f) in self.features.iter().enumerate() {
                theta[(i, j)] = f.eval(&row);
            }
        }
        Ok(theta)
    }

    /// Orthonormal basis (columns, `p × k`) of the coefficient directions that
    /// vanish identically whenever every block of states sums to one. These
    /// are spanned by `(Σ_{i∈b} x_i − 1)·m` for each block `b` and each
    /// monomial `m` of degree below the library degree.
    pub fn constraint_null_basis(&self, blocks: &[Vec<usize>]) -> DMatrix<f64> {
        let p = self.len();
        let mut generators: Vec<Vec<f64>> = Vec::new();
        for block in blocks {
            for f in &self.features {
                let Feature::Monomial(e) = f else { continue };
                if e.iter().sum::<u32>() >= self.degree {
                    continue;
                }
                let mut g = vec![0.0; p];
                g[self.index_of(f).expect("feature from own list")] -= 1.0;
                for &s in block {
                    let mut up = e.clone();
                    up[s] += 1;
                    let idx = self.index_of(&Feature::Monomial(up)).expect("degree below library degree");
                    g[idx] += 1.0;
                }
                generators.push(g);
            }
        }
        if generators.is_empty() {
            return DMatrix::zeros(p, 0);
        }
        let g = DMatrix::from_fn(p, generators.len(), |i, j| generators[j][i]);
        super::linalg::orthonormal_range(&g, 1e-10)
    }
}
