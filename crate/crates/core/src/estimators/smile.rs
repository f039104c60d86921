//! SMiLe: trust-region update towards the scaled likelihood.
//!
//! The new belief is the geometric mixture of the current belief and the
//! scaled likelihood whose divergence from the current belief equals
//! `B = B_max gamma(S_CC, m)`. The mixing weight is found by bisection.

use crate::environment::SimRng;
use crate::error::{Error, Result};
use crate::expfam::{Belief, ConjugateModel, Observation};
use crate::surprise::{adaptation_rate, SurpriseRecord};

use super::Learner;

pub const BISECTION_MAX_ITER: usize = 100;
pub const BISECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Smile {
    m: f64,
    log_m: f64,
    belief: Belief,
}

impl Smile {
    #[must_use]
    pub fn new(model: &ConjugateModel, m: f64) -> Self {
        Self { m, log_m: m.ln(), belief: model.prior().clone() }
    }

    #[must_use]
    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    #[must_use]
    pub fn with_belief(mut self, belief: Belief) -> Self {
        self.belief = belief;
        self
    }
}

/// Mixing weight `g` in `[0, 1]` with `KL[mix(g) || current] = bound`.
pub fn solve_mixing(model: &ConjugateModel, current: &Belief, target: &Belief, bound: f64, b_max: f64) -> Result<f64> {
    if bound <= BISECTION_TOL {
        return Ok(0.0);
    }
    if bound >= b_max - BISECTION_TOL {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let gap = model.kl(&model.geometric_mix(current, target, mid), current) - bound;
        if gap.is_nan() {
            return Err(Error::Numeric("divergence evaluated to NaN".into()));
        }
        if gap.abs() <= BISECTION_TOL {
            return Ok(mid);
        }
        if gap < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric(format!("mixing weight bisection did not converge (bound {bound}, B_max {b_max})")))
}

impl Learner for Smile {
    fn step(&mut self, model: &ConjugateModel, y: &Observation, _rng: &mut SimRng) -> Result<SurpriseRecord> {
        let mut record = SurpriseRecord::new(
            model.log_predictive(&self.belief, y),
            model.log_predictive(model.prior(), y),
            self.log_m,
        );
        let scaled = model.scaled_likelihood(y);
        let s_cc = model.kl(&self.belief, &scaled);
        let b_max = model.kl(&scaled, &self.belief);
        let bound = b_max * adaptation_rate(s_cc, self.m);
        let g = solve_mixing(model, &self.belief, &scaled, bound, b_max)?;
        self.belief = model.geometric_mix(&self.belief, &scaled, g);
        record.s_cc = Some(s_cc);
        Ok(record)
    }

    fn estimate_into(&self, model: &ConjugateModel, out: &mut [f64]) {
        model.mean_into(&self.belief.chi, self.belief.nu, out);
    }

    fn gaussian_moments(&self, model: &ConjugateModel) -> Option<(f64, f64)> {
        let var = model.gaussian_variance(&self.belief)?;
        Some((self.belief.chi[0] * var, var))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solved_weight_meets_the_bound() {
        let model = ConjugateModel::categorical(5, 0.5).unwrap();
        let cur = model.dirichlet_belief(&[4.0, 0.5, 0.5, 2.0, 0.5]).unwrap();
        let tgt = model.scaled_likelihood(&Observation::Category(1));
        let b_max = model.kl(&tgt, &cur);
        let bound = 0.3 * b_max;
        let g = solve_mixing(&model, &cur, &tgt, bound, b_max).unwrap();
        let kl = model.kl(&model.geometric_mix(&cur, &tgt, g), &cur);
        assert!((kl - bound).abs() <= BISECTION_TOL);
    }

    #[test]
    fn endpoints_short_circuit() {
        let model = ConjugateModel::gaussian(1.0, 0.0, 1.0).unwrap();
        let cur = model.prior().clone();
        let tgt = model.scaled_likelihood(&Observation::Real(3.0));
        let b_max = model.kl(&tgt, &cur);
        assert_eq!(solve_mixing(&model, &cur, &tgt, 0.0, b_max).unwrap(), 0.0);
        assert_eq!(solve_mixing(&model, &cur, &tgt, b_max, b_max).unwrap(), 1.0);
    }
}
