//! Volatile environment: piecewise-constant parameters with abrupt changes.
//!
//! At `t = 1` a change is forced. Afterwards `c_t ~ Bernoulli(p_c)`; a change
//! redraws `theta` from the prior, otherwise `theta` is copied. Each
//! observation is drawn from `P_Y(. | theta_t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{ConjugateModel, Family, Observation};

/// Random number generator used throughout.
pub type SimRng = ChaCha8Rng;

/// Stream used for the environment.
pub const ENV_STREAM: u64 = 0;
/// Stream used for a learner's own randomness.
pub const LEARNER_STREAM: u64 = 1;

/// Independent generator for `(seed, stream)`.
#[must_use]
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Environment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub model: ConjugateModel,
    pub p_c: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_c >= 0.0 && self.p_c <= 1.0) {
            return Err(Error::InvalidParameter(format!("p_c must lie in [0, 1], got {}", self.p_c)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// A simulated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// Change indicators, `changes[0]` is always true.
    pub changes: Vec<bool>,
    pub observations: Vec<Observation>,
    /// Row-major `horizon x dim` true parameters.
    pub thetas: Vec<f64>,
    /// Steps since the last change, counting the current one.
    pub run_lengths: Vec<u32>,
    pub dim: usize,
}

impl Trace {
    #[must_use]
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// True parameter at zero-based step `t`.
    #[must_use]
    pub fn theta(&self, t: usize) -> &[f64] {
        &self.thetas[t * self.dim..(t + 1) * self.dim]
    }
}

/// Draws `theta` from the prior.
pub fn sample_prior<R: Rng + ?Sized>(model: &ConjugateModel, rng: &mut R, out: &mut [f64]) {
    match model.family() {
        Family::Gaussian { .. } => {
            let (mu, var) = model.gaussian_prior().expect("gaussian");
            let z: f64 = StandardNormal.sample(rng);
            out[0] = mu + var.sqrt() * z;
        }
        Family::Categorical { .. } => sample_dirichlet(&model.prior().chi, rng, out),
    }
}

/// Dirichlet draw computed in log space. Small concentrations give exact
/// zeros rather than NaN.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R, out: &mut [f64]) {
    // G(a) = G(a + 1) U^(1/a) in distribution
    for (o, &a) in out.iter_mut().zip(alpha) {
        let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = rng.random::<f64>();
        *o = g.ln() + (1.0 - u).ln() / a;
    }
    let hi = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - hi).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Draws one observation given `theta`.
pub fn sample_observation<R: Rng + ?Sized>(model: &ConjugateModel, theta: &[f64], rng: &mut R) -> Observation {
    match model.family() {
        Family::Gaussian { sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            Observation::Real(theta[0] + sigma * z)
        }
        Family::Categorical { k } => {
            let u: f64 = rng.random::<f64>();
            let mut acc = 0.0;
            for (i, p) in theta.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Observation::Category(i);
                }
            }
            // rounding left the cumulative sum just below one
            let last = theta.iter().rposition(|&p| p > 0.0).unwrap_or(k - 1);
            Observation::Category(last)
        }
    }
}

/// Simulates a trace. Equal configurations give bit-identical traces.
pub fn generate(cfg: &EnvConfig) -> Result<Trace> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, ENV_STREAM);
    let dim = cfg.model.dim();
    let n = cfg.horizon;
    let mut trace = Trace {
        changes: Vec::with_capacity(n),
        observations: Vec::with_capacity(n),
        thetas: Vec::with_capacity(n * dim),
        run_lengths: Vec::with_capacity(n),
        dim,
    };
    let mut theta = vec![0.0; dim];
    let mut run = 0u32;
    for t in 0..n {
        let change = t == 0 || rng.random::<f64>() < cfg.p_c;
        if change {
            sample_prior(&cfg.model, &mut rng, &mut theta);
            run = 1;
        } else {
            run += 1;
        }
        let y = sample_observation(&cfg.model, &theta, &mut rng);
        trace.changes.push(change);
        trace.observations.push(y);
        trace.thetas.extend_from_slice(&theta);
        trace.run_lengths.push(run);
    }
    Ok(trace)
}
