//! Variational SMiLe: a single conjugate belief pulled towards the prior in
//! proportion to the adaptation rate.

use crate::environment::SimRng;
use crate::error::Result;
use crate::expfam::{Belief, ConjugateModel, Observation};
use crate::surprise::SurpriseRecord;

use super::Learner;

#[derive(Debug, Clone)]
pub struct VarSmile {
    log_m: f64,
    belief: Belief,
}

impl VarSmile {
    #[must_use]
    pub fn new(model: &ConjugateModel, m: f64) -> Self {
        Self { log_m: m.ln(), belief: model.prior().clone() }
    }

    #[must_use]
    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    /// Starts from an arbitrary belief.
    #[must_use]
    pub fn with_belief(mut self, belief: Belief) -> Self {
        self.belief = belief;
        self
    }
}

impl Learner for VarSmile {
    fn step(&mut self, model: &ConjugateModel, y: &Observation, _rng: &mut SimRng) -> Result<SurpriseRecord> {
        let prior = model.prior();
        let record =
            SurpriseRecord::new(model.log_predictive(&self.belief, y), model.log_predictive(prior, y), self.log_m);
        let g = record.gamma;
        let phi = model.phi(y);
        for ((c, c0), p) in self.belief.chi.iter_mut().zip(&prior.chi).zip(&phi) {
            *c = (1.0 - g) * *c + g * c0 + p;
        }
        self.belief.nu = (1.0 - g) * self.belief.nu + g * prior.nu + 1.0;
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
    use crate::environment::stream_rng;

    #[test]
    fn first_step_lands_on_the_posterior() {
        let model = ConjugateModel::gaussian(0.5, 0.0, 1.0).unwrap();
        let mut v = VarSmile::new(&model, 0.3);
        let y = Observation::Real(0.8);
        v.step(&model, &y, &mut stream_rng(0, 1)).unwrap();
        let post = model.reset(&y);
        assert!((v.belief().chi[0] - post.chi[0]).abs() < 1e-15);
        assert!((v.belief().nu - post.nu).abs() < 1e-15);
    }
}
