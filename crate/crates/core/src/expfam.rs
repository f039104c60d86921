//! Conjugate exponential-family models.
//!
//! A belief is a pair `(chi, nu)` of natural hyper-parameters. Every update
//! used by the learners is affine in `(chi, nu)`:
//!
//! * Bayesian update: `(chi + phi(y), nu + 1)`
//! * reset to the prior: `(chi0 + phi(y), nu0 + 1)`
//! * geometric mixture: `((1 - g) chi_a + g chi_b, (1 - g) nu_a + g nu_b)`
//!
//! Two families are supported.
//!
//! **Gaussian, known `sigma`.** `phi(y) = y / sigma^2` and the belief is the
//! normal density with precision `nu / sigma^2` and mean `chi sigma^2 / nu`.
//! A prior `N(mu0, sigma0^2)` maps to `nu0 = sigma^2 / sigma0^2` and
//! `chi0 = mu0 / sigma0^2`.
//!
//! **Categorical over `K` outcomes.** `phi(y) = e_y` and `chi` holds the
//! Dirichlet concentrations directly. `nu` tracks the total concentration and
//! never enters a density.
//!
//! The carrier term of the conjugate prior is absorbed into `log_norm`, which
//! is the log of the normalising integral, so `ln f(chi, nu) = -log_norm`.

use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};
use crate::numeric::{digamma, ln_gamma};

/// Parameter vectors: length 1 for the Gaussian family, `K` for categorical.
pub type Params = SmallVec<[f64; 5]>;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Real(f64),
    /// Zero-based category index.
    Category(usize),
}

/// Observation family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Gaussian { sigma: f64 },
    Categorical { k: usize },
}

/// Natural hyper-parameters of a conjugate belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub chi: Params,
    pub nu: f64,
}

/// Observation family together with its conjugate prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateModel {
    family: Family,
    prior: Belief,
}

impl ConjugateModel {
    /// Gaussian observations `y ~ N(theta, sigma^2)` with prior
    /// `theta ~ N(prior_mean, prior_sd^2)`.
    pub fn gaussian(sigma: f64, prior_mean: f64, prior_sd: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidModel(format!("sigma must be positive, got {sigma}")));
        }
        if !(prior_sd.is_finite() && prior_sd > 0.0) || !prior_mean.is_finite() {
            return Err(Error::InvalidModel(format!(
                "prior must be a proper normal, got mean {prior_mean} sd {prior_sd}"
            )));
        }
        let prior_var = prior_sd * prior_sd;
        let prior = Belief { chi: smallvec![prior_mean / prior_var], nu: sigma * sigma / prior_var };
        Ok(Self { family: Family::Gaussian { sigma }, prior })
    }

    /// Categorical observations over `k` outcomes with a symmetric
    /// `Dirichlet(s, ..., s)` prior.
    pub fn categorical(k: usize, s: f64) -> Result<Self> {
        Self::categorical_with(&vec![s; k])
    }

    /// Categorical observations with an arbitrary Dirichlet prior.
    pub fn categorical_with(alpha: &[f64]) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidModel("need at least two categories".into()));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidModel("Dirichlet concentrations must be positive".into()));
        }
        let prior = Belief { chi: alpha.iter().copied().collect(), nu: alpha.iter().sum() };
        Ok(Self { family: Family::Categorical { k: alpha.len() }, prior })
    }

    #[must_use]
    pub fn family(&self) -> Family {
        self.family
    }

    #[must_use]
    pub fn prior(&self) -> &Belief {
        &self.prior
    }

    /// Length of a parameter vector.
    #[must_use]
    pub fn dim(&self) -> usize {
        match self.family {
            Family::Gaussian { .. } => 1,
            Family::Categorical { k } => k,
        }
    }

    #[must_use]
    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, Family::Gaussian { .. })
    }

    /// Observation noise of the Gaussian family.
    #[must_use]
    pub fn sigma(&self) -> Option<f64> {
        match self.family {
            Family::Gaussian { sigma } => Some(sigma),
            Family::Categorical { .. } => None,
        }
    }

    /// Mean and variance of the Gaussian prior.
    #[must_use]
    pub fn gaussian_prior(&self) -> Option<(f64, f64)> {
        self.sigma().map(|s| {
            let var = s * s / self.prior.nu;
            (self.prior.chi[0] * var, var)
        })
    }

    /// Rejects observations outside the support.
    pub fn check_observation(&self, y: &Observation) -> Result<()> {
        match (self.family, y) {
            (Family::Gaussian { .. }, Observation::Real(v)) if v.is_finite() => Ok(()),
            (Family::Categorical { k }, Observation::Category(i)) if *i < k => Ok(()),
            _ => Err(Error::InvalidObservation(format!("{y:?} for {:?}", self.family))),
        }
    }

    /// Sufficient statistic `phi(y)`.
    #[must_use]
    pub fn phi(&self, y: &Observation) -> Params {
        match (self.family, *y) {
            (Family::Gaussian { sigma }, Observation::Real(v)) => smallvec![v / (sigma * sigma)],
            (Family::Categorical { k }, Observation::Category(i)) => {
                let mut p: Params = smallvec![0.0; k];
                p[i] = 1.0;
                p
            }
            _ => panic!("observation {y:?} does not match family {:?}", self.family),
        }
    }

    /// Log base measure `ln h(y)` of the observation density.
    #[must_use]
    pub fn log_base_measure(&self, y: &Observation) -> f64 {
        match (self.family, *y) {
            (Family::Gaussian { sigma }, Observation::Real(v)) => {
                let s2 = sigma * sigma;
                -0.5 * (LN_2PI + s2.ln()) - v * v / (2.0 * s2)
            }
            _ => 0.0,
        }
    }

    /// Log normaliser of the conjugate density at `(chi, nu)`.
    #[must_use]
    pub fn log_norm(&self, chi: &[f64], nu: f64) -> f64 {
        match self.family {
            Family::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                0.5 * (LN_2PI + (s2 / nu).ln()) + chi[0] * chi[0] * s2 / (2.0 * nu)
            }
            Family::Categorical { .. } => {
                let total: f64 = chi.iter().sum();
                chi.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(total)
            }
        }
    }

    /// Log predictive `ln P(y; pi)` of the belief `(chi, nu)`.
    #[inline]
    #[must_use]
    pub fn log_predictive_raw(&self, chi: &[f64], nu: f64, y: &Observation) -> f64 {
        match (self.family, *y) {
            (Family::Gaussian { sigma }, Observation::Real(v)) => {
                let s2 = sigma * sigma;
                let var = s2 + s2 / nu;
                let d = v - chi[0] * s2 / nu;
                -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var)
            }
            (Family::Categorical { .. }, Observation::Category(i)) => {
                let total: f64 = chi.iter().sum();
                chi[i].ln() - total.ln()
            }
            _ => panic!("observation {y:?} does not match family {:?}", self.family),
        }
    }

    /// Log predictive `ln P(y; pi)`.
    #[must_use]
    pub fn log_predictive(&self, b: &Belief, y: &Observation) -> f64 {
        self.log_predictive_raw(&b.chi, b.nu, y)
    }

    /// In-place Bayesian update `(chi + phi(y), nu + 1)`.
    #[inline]
    pub fn bayes_update_raw(&self, chi: &mut [f64], nu: &mut f64, y: &Observation) {
        match (self.family, *y) {
            (Family::Gaussian { sigma }, Observation::Real(v)) => chi[0] += v / (sigma * sigma),
            (Family::Categorical { .. }, Observation::Category(i)) => chi[i] += 1.0,
            _ => panic!("observation {y:?} does not match family {:?}", self.family),
        }
        *nu += 1.0;
    }

    /// Bayesian update of a belief.
    #[must_use]
    pub fn bayes_update(&self, b: &Belief, y: &Observation) -> Belief {
        let mut out = b.clone();
        self.bayes_update_raw(&mut out.chi, &mut out.nu, y);
        out
    }

    /// Posterior of the prior after one observation, `P(theta | y)`.
    #[must_use]
    pub fn reset(&self, y: &Observation) -> Belief {
        self.bayes_update(&self.prior, y)
    }

    /// The improper flat belief whose update by `y` is the scaled likelihood.
    #[must_use]
    pub fn flat(&self) -> Belief {
        match self.family {
            Family::Gaussian { .. } => Belief { chi: smallvec![0.0], nu: 0.0 },
            Family::Categorical { k } => Belief { chi: smallvec![1.0; k], nu: k as f64 },
        }
    }

    /// Likelihood of `y` normalised over `theta`: `N(y, sigma^2)` for the
    /// Gaussian family, `Dirichlet(1 + e_y)` for the categorical family.
    #[must_use]
    pub fn scaled_likelihood(&self, y: &Observation) -> Belief {
        self.bayes_update(&self.flat(), y)
    }

    /// Geometric mixture `pi_a^(1-g) pi_b^g`, renormalised.
    #[must_use]
    pub fn geometric_mix(&self, a: &Belief, b: &Belief, g: f64) -> Belief {
        let chi = a.chi.iter().zip(&b.chi).map(|(x, z)| (1.0 - g) * x + g * z).collect();
        Belief { chi, nu: (1.0 - g) * a.nu + g * b.nu }
    }

    /// Writes the mean parameter of `(chi, nu)` into `out`.
    #[inline]
    pub fn mean_into(&self, chi: &[f64], nu: f64, out: &mut [f64]) {
        match self.family {
            Family::Gaussian { sigma } => out[0] = chi[0] * sigma * sigma / nu,
            Family::Categorical { .. } => {
                let total: f64 = chi.iter().sum();
                for (o, a) in out.iter_mut().zip(chi) {
                    *o = a / total;
                }
            }
        }
    }

    /// Mean parameter of a belief.
    #[must_use]
    pub fn mean(&self, b: &Belief) -> Params {
        let mut out: Params = smallvec![0.0; self.dim()];
        self.mean_into(&b.chi, b.nu, &mut out);
        out
    }

    /// Variance of a Gaussian belief, `sigma^2 / nu`.
    #[must_use]
    pub fn gaussian_variance(&self, b: &Belief) -> Option<f64> {
        self.sigma().map(|s| s * s / b.nu)
    }

    /// Gaussian belief with the given mean and variance.
    pub fn gaussian_belief(&self, mean: f64, var: f64) -> Result<Belief> {
        let sigma = self.sigma().ok_or_else(|| Error::Unsupported("not a Gaussian model".into()))?;
        if !(var.is_finite() && var > 0.0) {
            return Err(Error::InvalidParameter(format!("variance must be positive, got {var}")));
        }
        Ok(Belief { chi: smallvec![mean / var], nu: sigma * sigma / var })
    }

    /// Dirichlet belief with the given concentrations.
    pub fn dirichlet_belief(&self, alpha: &[f64]) -> Result<Belief> {
        match self.family {
            Family::Categorical { k } if alpha.len() == k => {
                if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(Error::InvalidParameter("concentrations must be positive".into()));
                }
                Ok(Belief { chi: alpha.iter().copied().collect(), nu: alpha.iter().sum() })
            }
            _ => Err(Error::Unsupported("not a matching categorical model".into())),
        }
    }

    /// True when the belief is a proper density.
    #[must_use]
    pub fn is_valid(&self, b: &Belief) -> bool {
        b.chi.len() == self.dim()
            && b.nu.is_finite()
            && b.nu > 0.0
            && b.chi.iter().all(|x| x.is_finite())
            && match self.family {
                Family::Gaussian { .. } => true,
                Family::Categorical { .. } => b.chi.iter().all(|&a| a > 0.0),
            }
    }

    /// Kullback-Leibler divergence `KL[a || b]`, clamped at zero.
    #[must_use]
    pub fn kl(&self, a: &Belief, b: &Belief) -> f64 {
        let d = match self.family {
            Family::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                let (va, vb) = (s2 / a.nu, s2 / b.nu);
                let (ma, mb) = (a.chi[0] * va, b.chi[0] * vb);
                0.5 * ((vb / va).ln() + (va + (ma - mb).powi(2)) / vb - 1.0)
            }
            Family::Categorical { .. } => {
                let a0: f64 = a.chi.iter().sum();
                let b0: f64 = b.chi.iter().sum();
                let psi0 = digamma(a0);
                let mut d = ln_gamma(a0) - ln_gamma(b0);
                for (&x, &z) in a.chi.iter().zip(&b.chi) {
                    d += ln_gamma(z) - ln_gamma(x) + (x - z) * (digamma(x) - psi0);
                }
                d
            }
        };
        d.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_log_normaliser() {
        let m = ConjugateModel::categorical(5, 1.0).unwrap();
        let ln = m.log_norm(&[1.0; 5], 5.0);
        assert!((-ln - 24f64.ln()).abs() < 1e-12);
        let ln = m.log_norm(&[2.0, 1.0, 1.0, 1.0, 1.0], 6.0);
        assert!((-ln - 120f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_prior_round_trip() {
        let m = ConjugateModel::gaussian(0.5, 0.3, 2.0).unwrap();
        let (mu, var) = m.gaussian_prior().unwrap();
        assert!((mu - 0.3).abs() < 1e-14 && (var - 4.0).abs() < 1e-14);
        let b = m.gaussian_belief(1.5, 0.2).unwrap();
        assert!((m.mean(&b)[0] - 1.5).abs() < 1e-15);
        assert!((m.gaussian_variance(&b).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn gaussian_posterior_after_one_observation() {
        // prior N(0,1), sigma = 1, y = 2: posterior N(1, 1/2)
        let m = ConjugateModel::gaussian(1.0, 0.0, 1.0).unwrap();
        let b = m.reset(&Observation::Real(2.0));
        assert!((m.mean(&b)[0] - 1.0).abs() < 1e-15);
        assert!((m.gaussian_variance(&b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixing_examples() {
        let m = ConjugateModel::categorical(5, 1.0).unwrap();
        let a = m.dirichlet_belief(&[3.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let b = m.prior().clone();
        let mix = m.geometric_mix(&a, &b, 0.5);
        assert_eq!(mix.chi.as_slice(), &[2.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(m.geometric_mix(&a, &b, 0.0), a);
    }

    #[test]
    fn scaled_likelihood_forms() {
        let m = ConjugateModel::categorical(5, 0.1).unwrap();
        let s = m.scaled_likelihood(&Observation::Category(2));
        assert_eq!(s.chi.as_slice(), &[1.0, 1.0, 2.0, 1.0, 1.0]);
        let g = ConjugateModel::gaussian(0.5, 0.0, 1.0).unwrap();
        let s = g.scaled_likelihood(&Observation::Real(1.2));
        assert!((g.mean(&s)[0] - 1.2).abs() < 1e-15);
        assert!((g.gaussian_variance(&s).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kl_zero_on_equal() {
        let m = ConjugateModel::categorical(5, 0.3).unwrap();
        let p = m.prior().clone();
        assert_eq!(m.kl(&p, &p), 0.0);
        let g = ConjugateModel::gaussian(2.0, 0.0, 1.0).unwrap();
        assert_eq!(g.kl(g.prior(), g.prior()), 0.0);
    }

    #[test]
    fn gaussian_kl_closed_form() {
        let g = ConjugateModel::gaussian(1.0, 0.0, 1.0).unwrap();
        let a = g.gaussian_belief(1.0, 2.0).unwrap();
        let b = g.gaussian_belief(0.0, 1.0).unwrap();
        let want = 0.5 * (0.5f64.ln() + 2.0 + 1.0 - 1.0);
        assert!((g.kl(&a, &b) - want).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ConjugateModel::gaussian(0.0, 0.0, 1.0).is_err());
        assert!(ConjugateModel::categorical(5, 0.0).is_err());
        let m = ConjugateModel::categorical(5, 1.0).unwrap();
        assert!(m.check_observation(&Observation::Category(5)).is_err());
        assert!(m.check_observation(&Observation::Real(0.0)).is_err());
    }
}
