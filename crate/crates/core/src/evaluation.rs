//! Comparing an identified model against the ground-truth replicator system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::PayoffGame;
use crate::sindy::SparseModel;
use crate::trajectory::integrate;

/// Any component beyond this magnitude marks the identified rollout as diverged.
pub const DIVERGENCE_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientError {
    pub max_abs: f64,
    pub rms: f64,
}

/// Entrywise comparison of nonzero patterns over the full coefficient grid.
/// Nonzero means exactly nonzero.
pub fn support_metrics(identified: &SparseModel, truth: &SparseModel) -> Result<SupportMetrics> {
    identified.same_library(truth)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (a, b) in identified.coefficients().iter().zip(truth.coefficients().iter()) {
        match (*a != 0.0, *b != 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fn_ == 0 {
        return Ok(SupportMetrics { precision: 1.0, recall: 1.0, f1: 1.0 });
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(SupportMetrics { precision, recall, f1 })
}

/// Max and RMS coefficient difference over the union of both supports.
pub fn coefficient_error(identified: &SparseModel, truth: &SparseModel) -> Result<CoefficientError> {
    identified.same_library(truth)?;
    let diffs: Vec<f64> = identified
        .coefficients()
        .iter()
        .zip(truth.coefficients().iter())
        .filter(|(a, b)| **a != 0.0 || **b != 0.0)
        .map(|(a, b)| (a - b).abs())
        .collect();
    if diffs.is_empty() {
        return Ok(CoefficientError { max_abs: 0.0, rms: 0.0 });
    }
    let max_abs = diffs.iter().copied().fold(0.0, f64::max);
    let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    Ok(CoefficientError { max_abs, rms })
}

/// RMSE between RK4 rollouts of the identified model and of the true
/// replicator field, both started at `x0` with the same step.
pub fn forecast_error(model: &SparseModel, game: &PayoffGame, x0: &[f64], t_end: f64, h: f64) -> Result<f64> {
    game.validate_state(x0)?;
    if model.n_states() != game.state_dim() {
        return Err(Error::dim(format!(
            "model has {} states, game has {}",
            model.n_states(),
            game.state_dim()
        )));
    }
    let (_, truth) = integrate(|x| game.velocity(x), x0, t_end, h, |_, _| Ok(()))?;
    let last_good = std::cell::Cell::new(0.0);
    let identified = integrate(
        |x| model.predict(x),
        x0,
        t_end,
        h,
        |t, x| {
            if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
                Err(Error::Diverged { time: t })
            } else {
                last_good.set(t);
                Ok(())
            }
        },
    );
    let (_, identified) = match identified {
        // non-finite velocity inside a step: blame the step after the last good sample
        Err(Error::Numerical(_)) => return Err(Error::Diverged { time: last_good.get() + h }),
        other => other?,
    };
    let sq: f64 = (&identified - &truth).iter().map(|d| d * d).sum();
    Ok((sq / truth.len() as f64).sqrt())
}

fn format_coefficient(c: f64) -> String {
    let mag = c.abs();
    if mag == 0.0 {
        return "0.00000".into();
    }
    let exponent = mag.log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    let text = format!("{mag:.decimals$}");
    // rounding may carry into the next power of ten (0.9999999 -> 1.000000)
    match text.parse::<f64>() {
        Ok(v) if decimals > 0 && v >= 10f64.powi(exponent + 1) => format!("{mag:.prec$}", prec = decimals - 1),
        _ => text,
    }
}

/// One `d<name>/dt = …` line per state; terms in library order with six
/// significant digits, zero terms omitted.
pub fn render_equations(model: &SparseModel, names: &[String]) -> Result<Vec<String>> {
    if names.len() != model.n_states() {
        return Err(Error::dim(format!(
            "{} names for {} states",
            names.len(),
            model.n_states()
        )));
    }
    let features = model.library().features();
    Ok((0..model.n_states())
        .map(|j| {
            let mut rhs = String::new();
            for (i, f) in features.iter().enumerate() {
                let c = model.coefficients()[(i, j)];
                if c == 0.0 {
                    continue;
                }
                let term = match f.name(names).as_str() {
                    "1" => format_coefficient(c),
                    name => format!("{}*{name}", format_coefficient(c)),
                };
                match (rhs.is_empty(), c < 0.0) {
                    (true, true) => rhs.push_str(&format!("-{term}")),
                    (true, false) => rhs.push_str(&term),
                    (false, true) => rhs.push_str(&format!(" - {term}")),
                    (false, false) => rhs.push_str(&format!(" + {term}")),
                }
            }
            if rhs.is_empty() {
                rhs.push('0');
            }
            format!("d{}/dt = {rhs}", names[j])
        })
        .collect())
}
