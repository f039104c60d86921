//! Surprise measures and the adaptation rate.
//!
//! Rates are computed from log predictives so that a vanishing predictive
//! gives `S_BF = +inf` and `gamma = 1` instead of a division by zero.

use serde::{Deserialize, Serialize};

use crate::expfam::{Belief, ConjugateModel, Observation};
use crate::numeric::{log_add_exp, logistic, softplus};

/// `m = p_c / (1 - p_c)`.
#[must_use]
pub fn m_from_pc(p_c: f64) -> f64 {
    p_c / (1.0 - p_c)
}

/// `p_c = m / (1 + m)`.
#[must_use]
pub fn pc_from_m(m: f64) -> f64 {
    m / (1.0 + m)
}

/// Adaptation rate `gamma(S, m) = m S / (1 + m S)`.
#[must_use]
pub fn adaptation_rate(s_bf: f64, m: f64) -> f64 {
    if s_bf == f64::INFINITY {
        return 1.0;
    }
    let x = m * s_bf;
    x / (1.0 + x)
}

/// Adaptation rate from `ln S_BF` and `ln m`.
#[inline]
#[must_use]
pub fn adaptation_rate_log(log_s_bf: f64, log_m: f64) -> f64 {
    logistic(log_s_bf + log_m)
}

/// Rate recovered from Shannon surprises: `p_c exp(S_Sh - S_Sh_prior)`.
#[must_use]
pub fn gamma_from_shannon(s_sh: f64, s_sh_prior: f64, p_c: f64) -> f64 {
    p_c * (s_sh - s_sh_prior).exp()
}

/// Bayes Factor surprise `P(y; pi0) / P(y; pi)` evaluated through the
/// log normaliser.
#[must_use]
pub fn surprise_bf(model: &ConjugateModel, belief: &Belief, y: &Observation) -> f64 {
    let prior = model.prior();
    let phi = model.phi(y);
    let shift = |b: &Belief| -> f64 {
        let chi: Vec<f64> = b.chi.iter().zip(&phi).map(|(c, p)| c + p).collect();
        model.log_norm(&chi, b.nu + 1.0)
    };
    let log_s = (model.log_norm(&belief.chi, belief.nu) - model.log_norm(&prior.chi, prior.nu))
        + (shift(prior) - shift(belief));
    log_s.exp()
}

/// Shannon surprise `-ln((1 - p_c) P(y; pi) + p_c P(y; pi0))` from log predictives.
#[must_use]
pub fn shannon_surprise(log_pred: f64, log_pred_prior: f64, p_c: f64) -> f64 {
    -log_add_exp((-p_c).ln_1p() + log_pred, p_c.ln() + log_pred_prior)
}

/// Everything a learner reports about one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurpriseRecord {
    /// `ln P(y; pi_t)` under the current belief.
    pub log_pred: f64,
    /// `ln P(y; pi0)` under the prior.
    pub log_pred_prior: f64,
    pub s_bf: f64,
    /// Shannon surprise with the change probability `m / (1 + m)`.
    pub s_sh: f64,
    /// `-ln P(y; pi0)`.
    pub s_sh_prior: f64,
    /// `gamma(S_BF, m)`.
    pub gamma: f64,
    /// Confidence-corrected surprise, reported by SMiLe only.
    pub s_cc: Option<f64>,
}

impl SurpriseRecord {
    /// Builds the record for the change ratio `m`, given as `ln m`.
    #[must_use]
    pub fn new(log_pred: f64, log_pred_prior: f64, log_m: f64) -> Self {
        let log_s = log_pred_prior - log_pred;
        // ln(1 - p_c) = -ln(1 + m), ln p_c = ln m - ln(1 + m)
        let log_1p_m = softplus(log_m);
        let s_sh = -log_add_exp(log_pred - log_1p_m, log_m - log_1p_m + log_pred_prior);
        Self {
            log_pred,
            log_pred_prior,
            s_bf: log_s.exp(),
            s_sh,
            s_sh_prior: -log_pred_prior,
            gamma: adaptation_rate_log(log_s, log_m),
            s_cc: None,
        }
    }

    /// `ln(1 - gamma)` and `ln gamma` without cancellation.
    #[must_use]
    pub fn log_rates(&self, log_m: f64) -> (f64, f64) {
        let x = self.log_pred_prior - self.log_pred + log_m;
        (-softplus(x), -softplus(-x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert_eq!(adaptation_rate(1.0, 1.0), 0.5);
        assert!((adaptation_rate(3.0, 1.0 / 3.0) - 0.5).abs() < 1e-15);
        assert_eq!(adaptation_rate(f64::INFINITY, 0.2), 1.0);
        assert_eq!(adaptation_rate_log(f64::INFINITY, 0.0), 1.0);
        assert_eq!(adaptation_rate_log(f64::NEG_INFINITY, 0.0), 0.0);
    }

    #[test]
    fn shannon_rate_example() {
        let g = gamma_from_shannon(1.2, 1.0, 0.1);
        assert!((g - 0.1 * 0.2f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn bf_at_prior_is_one() {
        let m = ConjugateModel::gaussian(1.0, 0.0, 1.0).unwrap();
        assert_eq!(surprise_bf(&m, m.prior(), &Observation::Real(0.0)), 1.0);
    }

    #[test]
    fn bf_dirichlet_example() {
        let m = ConjugateModel::categorical(5, 1.0).unwrap();
        let b = m.dirichlet_belief(&[2.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let s = surprise_bf(&m, &b, &Observation::Category(0));
        assert!((s - 0.6).abs() < 1e-12);
    }

    #[test]
    fn record_with_vanishing_predictive() {
        let r = SurpriseRecord::new(f64::NEG_INFINITY, -1.0, 0.0);
        assert_eq!(r.s_bf, f64::INFINITY);
        assert_eq!(r.gamma, 1.0);
        let (l0, l1) = r.log_rates(0.0);
        assert_eq!(l0, f64::NEG_INFINITY);
        assert_eq!(l1, 0.0);
    }
}
