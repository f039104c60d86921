//! Particle filter with a change-point proposal.
//!
//! Weights follow the exact mixture recursion; each particle draws its own
//! change flag from `gamma(S_BF,i, m)`. Multinomial resampling is triggered
//! when the effective sample size falls to the threshold, which defaults to
//! half the particle count.

use rand::Rng;

use crate::environment::SimRng;
use crate::error::Result;
use crate::expfam::{Belief, ConjugateModel, Observation};
use crate::numeric::{log_add_exp, log_sum_exp};
use crate::surprise::{adaptation_rate_log, SurpriseRecord};

use super::Learner;

#[derive(Debug, Clone)]
pub struct ParticleFilter {
    log_m: f64,
    n: usize,
    threshold: f64,
    dim: usize,
    chi: Vec<f64>,
    nu: Vec<f64>,
    log_w: Vec<f64>,
    joint: Vec<f64>,
    change_prob: Vec<f64>,
}

impl ParticleFilter {
    #[must_use]
    pub fn new(model: &ConjugateModel, m: f64, n: usize) -> Self {
        let prior = model.prior();
        let dim = model.dim();
        let mut chi = Vec::with_capacity(n * dim);
        for _ in 0..n {
            chi.extend_from_slice(&prior.chi);
        }
        Self {
            log_m: m.ln(),
            n,
            threshold: n as f64 / 2.0,
            dim,
            chi,
            nu: vec![prior.nu; n],
            log_w: vec![-(n as f64).ln(); n],
            joint: vec![0.0; n],
            change_prob: vec![0.0; n],
        }
    }

    /// Replaces the effective-sample-size threshold for resampling.
    #[must_use]
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// Replaces the belief of particle `i`.
    #[must_use]
    pub fn with_particle(mut self, i: usize, belief: &Belief) -> Self {
        let d = self.dim;
        self.chi[i * d..(i + 1) * d].copy_from_slice(&belief.chi);
        self.nu[i] = belief.nu;
        self
    }

    #[must_use]
    pub fn weights(&self) -> Vec<f64> {
        self.log_w.iter().map(|l| l.exp()).collect()
    }

    /// `(chi, nu)` of particle `i`.
    #[must_use]
    pub fn particle(&self, i: usize) -> (&[f64], f64) {
        (&self.chi[i * self.dim..(i + 1) * self.dim], self.nu[i])
    }

    /// Change probabilities drawn in the last step.
    #[must_use]
    pub fn change_probabilities(&self) -> &[f64] {
        &self.change_prob
    }

    /// One step with externally supplied change flags.
    pub fn step_with_flags(
        &mut self,
        model: &ConjugateModel,
        y: &Observation,
        flags: &[bool],
        rng: &mut SimRng,
    ) -> Result<SurpriseRecord> {
        self.advance(model, y, rng, Some(flags))
    }

    fn advance(
        &mut self,
        model: &ConjugateModel,
        y: &Observation,
        rng: &mut SimRng,
        fixed: Option<&[bool]>,
    ) -> Result<SurpriseRecord> {
        let d = self.dim;
        let lp0 = model.log_predictive(model.prior(), y);
        for i in 0..self.n {
            let lp = model.log_predictive_raw(&self.chi[i * d..(i + 1) * d], self.nu[i], y);
            self.joint[i] = self.log_w[i] + lp;
            self.change_prob[i] = adaptation_rate_log(lp0 - lp, self.log_m);
        }
        let lp = log_sum_exp(&self.joint);
        let record = SurpriseRecord::new(lp, lp0, self.log_m);
        let (log_stay, log_change) = record.log_rates(self.log_m);

        for i in 0..self.n {
            let bayes = if lp == f64::NEG_INFINITY { f64::NEG_INFINITY } else { log_stay + (self.joint[i] - lp) };
            self.log_w[i] = log_add_exp(bayes, log_change + self.log_w[i]);
        }
        let total = log_sum_exp(&self.log_w);
        for l in &mut self.log_w {
            *l -= total;
        }

        let mut flags: Vec<bool> = match fixed {
            Some(f) => f.to_vec(),
            None => self.change_prob.iter().map(|&p| rng.random::<f64>() < p).collect(),
        };

        let ess = 1.0 / self.log_w.iter().map(|l| (2.0 * l).exp()).sum::<f64>();
        if ess <= self.threshold {
            self.resample(rng, &mut flags);
        }

        let fresh = model.reset(y);
        for (i, &c) in flags.iter().enumerate() {
            let chi = &mut self.chi[i * d..(i + 1) * d];
            if c {
                chi.copy_from_slice(&fresh.chi);
                self.nu[i] = fresh.nu;
            } else {
                model.bayes_update_raw(chi, &mut self.nu[i], y);
            }
        }
        Ok(record)
    }

    fn resample(&mut self, rng: &mut SimRng, flags: &mut Vec<bool>) {
        let d = self.dim;
        let w = self.weights();
        let mut cum = Vec::with_capacity(self.n);
        let mut acc = 0.0;
        for x in &w {
            acc += x;
            cum.push(acc);
        }
        let mut chi = Vec::with_capacity(self.chi.len());
        let mut nu = Vec::with_capacity(self.n);
        let mut new_flags = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let u = rng.random::<f64>() * acc;
            let j = cum.partition_point(|&c| c <= u).min(self.n - 1);
            chi.extend_from_slice(&self.chi[j * d..(j + 1) * d]);
            nu.push(self.nu[j]);
            new_flags.push(flags[j]);
        }
        self.chi = chi;
        self.nu = nu;
        *flags = new_flags;
        self.log_w.fill(-(self.n as f64).ln());
    }
}

impl Learner for ParticleFilter {
    fn step(&mut self, model: &ConjugateModel, y: &Observation, rng: &mut SimRng) -> Result<SurpriseRecord> {
        self.advance(model, y, rng, None)
    }

    fn estimate_into(&self, model: &ConjugateModel, out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        let mut mean = vec![0.0; d];
        for (i, &l) in self.log_w.iter().enumerate() {
            model.mean_into(&self.chi[i * d..(i + 1) * d], self.nu[i], &mut mean);
            let w = l.exp();
            for (o, m) in out.iter_mut().zip(&mean) {
                *o += w * m;
            }
        }
    }

    fn gaussian_moments(&self, model: &ConjugateModel) -> Option<(f64, f64)> {
        let s2 = model.sigma()?.powi(2);
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, &l) in self.log_w.iter().enumerate() {
            let w = l.exp();
            let var = s2 / self.nu[i];
            let mean = self.chi[i] * var;
            m1 += w * mean;
            m2 += w * (mean * mean + var);
        }
        Some((m1, (m2 - m1 * m1).max(0.0)))
    }
}
