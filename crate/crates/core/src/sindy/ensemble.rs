//! Bagged STLSQ: fit many row subsamples and aggregate by median with
//! inclusion-probability masking.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sindy::data::DataMatrices;
use crate::sindy::fit::{FitOptions, FitPlan};
use crate::sindy::library::FeatureLibrary;
use crate::sindy::model::SparseModel;
use crate::trajectory::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub n_models: usize,
    pub subsample_fraction: f64,
    pub inclusion_threshold: f64,
    pub seed: u64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions { n_models: 100, subsample_fraction: 0.6, inclusion_threshold: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub member_count: usize,
    pub coefficient_median: DMatrix<f64>,
    /// Fraction of members with a nonzero coefficient, per entry.
    pub inclusion_probability: DMatrix<f64>,
    pub subsample_fraction: f64,
    pub inclusion_threshold: f64,
    /// The masked median as a usable model.
    pub model: SparseModel,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn ensemble_fit(
    data: &DataMatrices,
    library: &FeatureLibrary,
    fit_options: &FitOptions,
    options: &EnsembleOptions,
) -> Result<EnsembleModel> {
    if options.n_models < 1 {
        return Err(Error::Config("ensemble needs at least one model".into()));
    }
    if !(options.subsample_fraction > 0.0 && options.subsample_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "subsample fraction must be in (0, 1], got {}",
            options.subsample_fraction
        )));
    }
    if !(0.0..=1.0).contains(&options.inclusion_threshold) {
        return Err(Error::Config(format!(
            "inclusion threshold must be in [0, 1], got {}",
            options.inclusion_threshold
        )));
    }
    let m = data.rows();
    let rows = ((options.subsample_fraction * m as f64) - 1e-9).ceil().max(0.0) as usize;
    if rows < 1 {
        return Err(Error::Config("subsample has no rows".into()));
    }
    let rows = rows.min(m);

    let plan = FitPlan::new(data, library, fit_options)?;
    let theta = library.evaluate(&data.x)?;
    let members: Vec<DMatrix<f64>> = (0..options.n_models)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, k as u64));
            let mut idx = rand::seq::index::sample(&mut rng, m, rows).into_vec();
            idx.sort_unstable();
            let theta_k = theta.select_rows(&idx);
            let xdot_k = data.xdot.select_rows(&idx);
            plan.coefficients(&theta_k, &xdot_k, &fit_options.stlsq)
        })
        .collect::<Result<_>>()?;

    let (p, n) = (library.len(), data.n_states());
    let count = options.n_models as f64;
    let mut inclusion = DMatrix::zeros(p, n);
    let mut med = DMatrix::zeros(p, n);
    let mut buf = vec![0.0; options.n_models];
    for j in 0..n {
        for i in 0..p {
            for (b, member) in buf.iter_mut().zip(&members) {
                *b = member[(i, j)];
            }
            inclusion[(i, j)] = buf.iter().filter(|v| **v != 0.0).count() as f64 / count;
            med[(i, j)] = median(&mut buf);
        }
    }
    for (v, q) in med.iter_mut().zip(inclusion.iter()) {
        if *q < options.inclusion_threshold {
            *v = 0.0;
        }
    }
    plan.reconstruct(&mut med, fit_options.stlsq.threshold);
    let model = plan.into_model(library, med.clone(), fit_options.stlsq.threshold);
    Ok(EnsembleModel {
        member_count: options.n_models,
        coefficient_median: med,
        inclusion_probability: inclusion,
        subsample_fraction: options.subsample_fraction,
        inclusion_threshold: options.inclusion_threshold,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::builtin_game;
    use crate::sindy::data::assemble_data;
    use crate::sindy::fit::fit_with;
    use crate::sindy::library::build_library;
    use crate::trajectory::{exact_derivatives, simulate};

    fn data() -> DataMatrices {
        let g = builtin_game("rps").unwrap();
        let t = exact_derivatives(&g, &simulate(&g, &[0.6, 0.3, 0.1], 5.0, 0.01).unwrap()).unwrap();
        assemble_data(&[t]).unwrap()
    }

    #[test]
    fn full_bags_reproduce_plain_fit() {
        let data = data();
        let lib = build_library(3, 2, false);
        let fo = FitOptions::new(0.05).with_blocks(vec![vec![0, 1, 2]]);
        let eo = EnsembleOptions { n_models: 5, subsample_fraction: 1.0, ..Default::default() };
        let ens = ensemble_fit(&data, &lib, &fo, &eo).unwrap();
        let plain = fit_with(&data, &lib, &fo).unwrap();
        assert!((&ens.coefficient_median - plain.coefficients()).amax() < 1e-12);
        assert!(ens.inclusion_probability.iter().all(|q| *q == 0.0 || *q == 1.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let data = data();
        let lib = build_library(3, 2, false);
        let fo = FitOptions::new(0.05);
        let zero = EnsembleOptions { n_models: 0, ..Default::default() };
        assert!(matches!(ensemble_fit(&data, &lib, &fo, &zero), Err(Error::Config(_))));
        let frac = EnsembleOptions { subsample_fraction: 0.0, ..Default::default() };
        assert!(matches!(ensemble_fit(&data, &lib, &fo, &frac), Err(Error::Config(_))));
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0, 0.0]), 1.5);
        assert_eq!(median(&mut [0.0, 5.0, 1.0]), 1.0);
    }
}
