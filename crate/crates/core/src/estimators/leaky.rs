//! Leaky integrator: exponentially discounted average of the observations
//! (one-hot vectors for categorical data).
//!
//! It keeps no belief, so its surprise record is computed from a belief
//! moment-matched to the estimate: the estimate as mean with the prior's
//! variance (Gaussian) or total concentration (categorical).

use smallvec::smallvec;

use crate::environment::SimRng;
use crate::error::Result;
use crate::expfam::{Belief, ConjugateModel, Family, Observation, Params};
use crate::surprise::SurpriseRecord;

use super::Learner;

/// Smallest concentration, relative to the prior total, of a moment-matched
/// Dirichlet belief.
pub const CONCENTRATION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Leaky {
    omega: f64,
    log_m: f64,
    num: Params,
    den: f64,
}

impl Leaky {
    #[must_use]
    pub fn new(model: &ConjugateModel, omega: f64, m: f64) -> Self {
        Self { omega, log_m: m.ln(), num: smallvec![0.0; model.dim()], den: 0.0 }
    }

    /// Belief used for the surprise record.
    #[must_use]
    pub fn matched_belief(&self, model: &ConjugateModel) -> Belief {
        let est = self.estimate(model);
        let prior = model.prior();
        match model.family() {
            Family::Gaussian { sigma } => {
                let var = sigma * sigma / prior.nu;
                Belief { chi: smallvec![est[0] / var], nu: prior.nu }
            }
            Family::Categorical { .. } => {
                let total: f64 = prior.chi.iter().sum();
                let chi = est.iter().map(|p| (p * total).max(CONCENTRATION_FLOOR * total)).collect();
                Belief { chi, nu: total }
            }
        }
    }
}

impl Learner for Leaky {
    fn step(&mut self, model: &ConjugateModel, y: &Observation, _rng: &mut SimRng) -> Result<SurpriseRecord> {
        let b = self.matched_belief(model);
        let record =
            SurpriseRecord::new(model.log_predictive(&b, y), model.log_predictive(model.prior(), y), self.log_m);
        for n in self.num.iter_mut() {
            *n *= self.omega;
        }
        match *y {
            Observation::Real(v) => self.num[0] += v,
            Observation::Category(i) => self.num[i] += 1.0,
        }
        self.den = self.omega * self.den + 1.0;
        Ok(record)
    }

    fn estimate_into(&self, model: &ConjugateModel, out: &mut [f64]) {
        if self.den == 0.0 {
            let prior = model.prior();
            model.mean_into(&prior.chi, prior.nu, out);
            return;
        }
        for (o, n) in out.iter_mut().zip(&self.num) {
            *o = n / self.den;
        }
    }

    fn gaussian_moments(&self, model: &ConjugateModel) -> Option<(f64, f64)> {
        let (_, var) = model.gaussian_prior()?;
        Some((self.estimate(model)[0], var))
    }
}
