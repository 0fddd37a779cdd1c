//! Trajectory generation: fixed-step RK4 integration of replicator fields,
//! derivative estimation, observation noise and simplex sampling.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{PayoffGame, SimplexPoint};

/// Default integration step.
pub const DEFAULT_STEP: f64 = 0.01;

/// Slack allowed outside `[0, 1]` before a simulation is declared unstable.
const STATE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub game: String,
    pub seed: Option<u64>,
    pub step: f64,
    pub noise_sigma: f64,
    /// Index groups of the state that sum to one.
    pub blocks: Vec<Vec<usize>>,
}

/// Uniformly sampled states `x(t_0) … x(t_{m-1})`, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    pub derivatives: Option<DMatrix<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: DMatrix<f64>, meta: TrajectoryMeta) -> Result<Self> {
        if times.len() != states.nrows() {
            return Err(Error::dim(format!(
                "{} times for {} state rows",
                times.len(),
                states.nrows()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidState("times must be strictly increasing".into()));
        }
        Ok(Trajectory { times, states, derivatives: None, meta })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.states.ncols()
    }

    pub fn state_row(&self, i: usize) -> Vec<f64> {
        self.states.row(i).iter().copied().collect()
    }

    /// Sample spacing, from the metadata when set, else from the time grid.
    pub fn step(&self) -> f64 {
        if self.meta.step > 0.0 {
            self.meta.step
        } else if self.times.len() >= 2 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(rhs: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    let eval = |y: &[f64]| -> Result<Vec<f64>> {
        let v = rhs(y)?;
        if v.len() != y.len() {
            return Err(Error::dim("right-hand side changed the state dimension"));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("right-hand side returned a non-finite value".into()));
        }
        Ok(v)
    };
    let stage = |k: &[f64], a: f64| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect() };
    let k1 = eval(x)?;
    let k2 = eval(&stage(&k1, h / 2.0))?;
    let k3 = eval(&stage(&k2, h / 2.0))?;
    let k4 = eval(&stage(&k3, h))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Number of samples on `[0, t_end]` with spacing `h`, both ends included.
pub fn sample_count(t_end: f64, h: f64) -> usize {
    (t_end / h + 1e-9).floor() as usize + 1
}

fn check_horizon(t_end: f64, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("t_end must be positive, got {t_end}")));
    }
    if h > t_end * (1.0 + 1e-12) {
        return Err(Error::Config(format!("step {h} exceeds t_end {t_end}")));
    }
    Ok(())
}

/// Integrates `rhs` from `x0` with fixed step `h`, returning
/// `sample_count(t_end, h)` rows. `guard` is checked on every new state.
pub fn integrate<F, G>(rhs: F, x0: &[f64], t_end: f64, h: f64, mut guard: G) -> Result<(Vec<f64>, DMatrix<f64>)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    G: FnMut(f64, &[f64]) -> Result<()>,
{
    check_horizon(t_end, h)?;
    let m = sample_count(t_end, h);
    let n = x0.len();
    let mut states = DMatrix::zeros(m, n);
    let mut x = x0.to_vec();
    states.row_mut(0).copy_from_slice(&x);
    let times: Vec<f64> = (0..m).map(|i| i as f64 * h).collect();
    for (i, &t) in times.iter().enumerate().skip(1) {
        x = rk4_step(&rhs, &x, h)?;
        guard(t, &x)?;
        states.row_mut(i).copy_from_slice(&x);
    }
    Ok((times, states))
}

/// Simulates the replicator dynamics of `game` from the (concatenated)
/// initial state `x0`.
pub fn simulate(game: &PayoffGame, x0: &[f64], t_end: f64, h: f64) -> Result<Trajectory> {
    game.validate_state(x0)?;
    let (times, states) = integrate(|x| game.velocity(x), x0, t_end, h, |t, x| {
        if x.iter().any(|v| *v < -STATE_SLACK || *v > 1.0 + STATE_SLACK) {
            return Err(Error::Numerical(format!(
                "state left the simplex at t = {t}; use a smaller step than {h}"
            )));
        }
        Ok(())
    })?;
    let meta = TrajectoryMeta {
        game: game.name.clone(),
        seed: None,
        step: h,
        noise_sigma: 0.0,
        blocks: game.blocks(),
    };
    Trajectory::new(times, states, meta)
}

/// Fills the derivative matrix with the exact replicator field.
pub fn exact_derivatives(game: &PayoffGame, traj: &Trajectory) -> Result<Trajectory> {
    if traj.n_states() != game.state_dim() {
        return Err(Error::dim(format!(
            "trajectory has {} states, game `{}` has {}",
            traj.n_states(),
            game.name,
            game.state_dim()
        )));
    }
    let mut d = DMatrix::zeros(traj.len(), traj.n_states());
    for i in 0..traj.len() {
        let v = game.velocity(&traj.state_row(i))?;
        d.row_mut(i).copy_from_slice(&v);
    }
    let mut out = traj.clone();
    out.derivatives = Some(d);
    Ok(out)
}

/// Second-order finite differences: central in the interior, one-sided
/// three-point stencils at both ends.
pub fn finite_difference_derivatives(traj: &Trajectory) -> Result<Trajectory> {
    let m = traj.len();
    if m < 3 {
        return Err(Error::TooShort { len: m, min: 3 });
    }
    let h = traj.times[1] - traj.times[0];
    let x = &traj.states;
    let mut d = DMatrix::zeros(m, traj.n_states());
    for j in 0..traj.n_states() {
        d[(0, j)] = (-3.0 * x[(0, j)] + 4.0 * x[(1, j)] - x[(2, j)]) / (2.0 * h);
        for i in 1..m - 1 {
            d[(i, j)] = (x[(i + 1, j)] - x[(i - 1, j)]) / (2.0 * h);
        }
        d[(m - 1, j)] = (3.0 * x[(m - 1, j)] - 4.0 * x[(m - 2, j)] + x[(m - 3, j)]) / (2.0 * h);
    }
    let mut out = traj.clone();
    out.derivatives = Some(d);
    Ok(out)
}

/// Uniform draw from the `(n-1)`-simplex (normalised unit exponentials).
pub fn sample_simplex(n: usize, seed: u64) -> Result<SimplexPoint> {
    if n < 2 {
        return Err(Error::dim(format!("simplex needs at least 2 strategies, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let e: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = e.iter().sum();
        if total > 0.0 {
            let mut x: Vec<f64> = e.iter().map(|v| v / total).collect();
            // absorb rounding so the sum is 1 to the last bit where possible
            let drift: f64 = 1.0 - x.iter().sum::<f64>();
            if let Some(big) = x.iter_mut().max_by(|a, b| a.total_cmp(b)) {
                *big += drift;
            }
            return SimplexPoint::new(x);
        }
    }
}

/// Independent uniform initial state for every block of `game`.
pub fn sample_initial_state(game: &PayoffGame, seed: u64) -> Result<Vec<f64>> {
    let mut x = vec![0.0; game.state_dim()];
    for (b, block) in game.blocks().iter().enumerate() {
        let p = sample_simplex(block.len(), derive_seed(seed, b as u64))?;
        for (&i, v) in block.iter().zip(p.as_slice()) {
            x[i] = *v;
        }
    }
    Ok(x)
}

/// Deterministic child seed (SplitMix64 finaliser over `seed` and `index`).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Adds i.i.d. Gaussian observation noise to every state entry (and every
/// derivative entry, when present). States are not re-projected.
pub fn add_noise(traj: &Trajectory, spec: NoiseSpec) -> Result<Trajectory> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {}", spec.sigma)));
    }
    let mut out = traj.clone();
    if spec.sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, spec.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut perturb = |m: &mut DMatrix<f64>| {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] += normal.sample(&mut rng);
            }
        }
    };
    perturb(&mut out.states);
    if let Some(d) = out.derivatives.as_mut() {
        perturb(d);
    }
    out.meta.noise_sigma = spec.sigma;
    out.meta.seed = Some(spec.seed);
    Ok(out)
}

/// Triangle vertices used for ternary plots.
pub const TRIANGLE: [(f64, f64); 3] = [(0.0, 0.0), (1.0, 0.0), (0.5, 0.866_025_403_784_438_6)];

/// Planar position of a 3-strategy mix inside [`TRIANGLE`].
pub fn to_barycentric(x: &SimplexPoint) -> Result<(f64, f64)> {
    if x.dim() != 3 {
        return Err(Error::dim(format!("barycentric map needs 3 strategies, got {}", x.dim())));
    }
    Ok(barycentric_raw(x.as_slice()))
}

/// Same affine map without simplex validation (for noisy observations).
pub fn barycentric_raw(x: &[f64]) -> (f64, f64) {
    let (mut u, mut v) = (0.0, 0.0);
    for (w, (px, py)) in x.iter().zip(TRIANGLE) {
        u += w * px;
        v += w * py;
    }
    (u, v)
}
