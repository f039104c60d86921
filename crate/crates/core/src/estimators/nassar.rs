//! Nassar-style learners for Gaussian data, driven by the Bayes Factor
//! surprise.
//!
//! The state is a Gaussian belief `N(mu, var)` together with the effective
//! run length `r`, where `rho = sigma^2 / sigma0^2`. The mean update is
//!
//! ```text
//! mu' = (1 - g) [mu + (y - mu) / (rho + r + 1)] + g [mu0 + (y - mu0) / (rho + 1)]
//! ```
//!
//! `Nas10` advances `r' = (1 - g)(r + 1) + g` and sets
//! `var' = 1 / (1/sigma0^2 + r'/sigma^2)`. `Nas12` matches the variance of the
//! two-component mixture and reads `r'` back from it.

use serde::{Deserialize, Serialize};

use crate::environment::SimRng;
use crate::error::{Error, Result};
use crate::expfam::{ConjugateModel, Observation};
use crate::surprise::SurpriseRecord;

use super::Learner;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NassarVariant {
    Nas10,
    Nas12,
}

#[derive(Debug, Clone)]
pub struct Nassar {
    variant: NassarVariant,
    log_m: f64,
    sigma2: f64,
    mu0: f64,
    var0: f64,
    rho: f64,
    mu: f64,
    var: f64,
    r: f64,
}

fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var)
}

impl Nassar {
    pub fn new(model: &ConjugateModel, variant: NassarVariant, m: f64) -> Result<Self> {
        let (sigma, (mu0, var0)) = match (model.sigma(), model.gaussian_prior()) {
            (Some(s), Some(p)) => (s, p),
            _ => {
                return Err(Error::Unsupported("the Nassar learners are defined for Gaussian observations only".into()))
            }
        };
        let sigma2 = sigma * sigma;
        Ok(Self { variant, log_m: m.ln(), sigma2, mu0, var0, rho: sigma2 / var0, mu: mu0, var: var0, r: 0.0 })
    }

    /// Starts from a given mean and run length; the variance follows from `r`.
    #[must_use]
    pub fn with_state(mut self, mu: f64, r: f64) -> Self {
        self.mu = mu;
        self.r = r;
        self.var = self.sigma2 / (self.rho + r);
        self
    }

    /// `(mu, var, r)`.
    #[must_use]
    pub fn state(&self) -> (f64, f64, f64) {
        (self.mu, self.var, self.r)
    }
}

impl Learner for Nassar {
    fn step(&mut self, _model: &ConjugateModel, y: &Observation, _rng: &mut SimRng) -> Result<SurpriseRecord> {
        let Observation::Real(y) = *y else {
            return Err(Error::InvalidObservation("expected a real observation".into()));
        };
        let record = SurpriseRecord::new(
            normal_logpdf(y, self.mu, self.sigma2 + self.var),
            normal_logpdf(y, self.mu0, self.sigma2 + self.var0),
            self.log_m,
        );
        let g = record.gamma;
        let (rho, r) = (self.rho, self.r);
        let mu_stay = self.mu + (y - self.mu) / (rho + r + 1.0);
        let mu_change = self.mu0 + (y - self.mu0) / (rho + 1.0);
        self.mu = (1.0 - g) * mu_stay + g * mu_change;
        match self.variant {
            NassarVariant::Nas10 => {
                self.r = (1.0 - g) * (r + 1.0) + g;
                self.var = 1.0 / (1.0 / self.var0 + self.r / self.sigma2);
            }
            NassarVariant::Nas12 => {
                let alpha = (rho + g * r + 1.0) / (rho + r + 1.0);
                let b = mu_stay - mu_change;
                self.var = self.sigma2 * alpha / (rho + 1.0) + (1.0 - g) * g * b * b;
                self.r = (self.sigma2 / self.var - rho).max(0.0);
            }
        }
        Ok(record)
    }

    fn estimate_into(&self, _model: &ConjugateModel, out: &mut [f64]) {
        out[0] = self.mu;
    }

    fn gaussian_moments(&self, _model: &ConjugateModel) -> Option<(f64, f64)> {
        Some((self.mu, self.var))
    }
}
