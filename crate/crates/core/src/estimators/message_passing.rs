//! Message passing over run-length hypotheses.
//!
//! Each particle is the posterior given the observations since a hypothesised
//! change. With a cap the lowest-weight particle is dropped once the count
//! exceeds it; without one the recursion is exact up to the pruning of
//! weights below machine precision. Both variants share every floating-point
//! operation, so they agree bit for bit while the cap is not reached.

use crate::environment::SimRng;
use crate::error::Result;
use crate::expfam::{ConjugateModel, Observation};
use crate::surprise::SurpriseRecord;

use super::Learner;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Normalised weights below this are discarded, with or without a cap.
pub const DEFAULT_PRUNE_WEIGHT: f64 = f64::EPSILON;

#[derive(Debug, Clone)]
pub struct MessagePassing {
    log_m: f64,
    cap: Option<usize>,
    log_prune: f64,
    dim: usize,
    started: bool,
    chi: Vec<f64>,
    nu: Vec<f64>,
    log_w: Vec<f64>,
    /// Linear copy of the normalised weights.
    w: Vec<f64>,
    runs: Vec<u32>,
    joint: Vec<f64>,
    /// Gaussian predictive terms indexed by run length.
    gauss: Option<GaussTable>,
}

/// `nu = nu0 + r` for a particle of run length `r`, so the predictive
/// variance and its log only depend on `r`.
#[derive(Debug, Clone)]
struct GaussTable {
    s2: f64,
    nu0: f64,
    /// `(-(ln 2pi + ln var) / 2, 1 / (2 var), sigma^2 / nu)`
    rows: Vec<(f64, f64, f64)>,
}

impl GaussTable {
    fn ensure(&mut self, r: usize) {
        while self.rows.len() <= r {
            let nu = self.nu0 + self.rows.len() as f64;
            let var = self.s2 + self.s2 / nu;
            self.rows.push((-0.5 * (LN_2PI + var.ln()), 0.5 / var, self.s2 / nu));
        }
    }
}

impl MessagePassing {
    /// `cap = None` gives the exact learner.
    #[must_use]
    pub fn new(model: &ConjugateModel, m: f64, cap: Option<usize>) -> Self {
        let prior = model.prior();
        Self {
            log_m: m.ln(),
            cap,
            log_prune: DEFAULT_PRUNE_WEIGHT.ln(),
            dim: model.dim(),
            started: false,
            chi: prior.chi.to_vec(),
            nu: vec![prior.nu],
            log_w: vec![0.0],
            w: vec![1.0],
            runs: vec![0],
            joint: Vec::new(),
            gauss: model.sigma().map(|s| GaussTable { s2: s * s, nu0: prior.nu, rows: Vec::new() }),
        }
    }

    /// Replaces the pruning threshold on normalised weights.
    #[must_use]
    pub fn with_prune_weight(mut self, w: f64) -> Self {
        self.log_prune = w.ln();
        self
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    /// Normalised weights.
    #[must_use]
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    #[must_use]
    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    /// Hypothesised run lengths, one per particle.
    #[must_use]
    pub fn run_lengths(&self) -> &[u32] {
        &self.runs
    }

    /// `(chi, nu)` of particle `i`.
    #[must_use]
    pub fn particle(&self, i: usize) -> (&[f64], f64) {
        (&self.chi[i * self.dim..(i + 1) * self.dim], self.nu[i])
    }

    fn remove(&mut self, i: usize) {
        let d = self.dim;
        self.chi.drain(i * d..(i + 1) * d);
        self.nu.remove(i);
        self.log_w.remove(i);
        self.w.remove(i);
        self.runs.remove(i);
    }

    fn prune(&mut self) {
        if self.log_w.iter().all(|&l| l >= self.log_prune) {
            return;
        }
        let d = self.dim;
        let mut keep = 0;
        for i in 0..self.log_w.len() {
            if self.log_w[i] >= self.log_prune {
                if keep != i {
                    self.chi.copy_within(i * d..(i + 1) * d, keep * d);
                    self.nu[keep] = self.nu[i];
                    self.log_w[keep] = self.log_w[i];
                    self.w[keep] = self.w[i];
                    self.runs[keep] = self.runs[i];
                }
                keep += 1;
            }
        }
        self.chi.truncate(keep * d);
        self.nu.truncate(keep);
        self.log_w.truncate(keep);
        self.w.truncate(keep);
        self.runs.truncate(keep);
    }
}

impl Learner for MessagePassing {
    fn step(&mut self, model: &ConjugateModel, y: &Observation, _rng: &mut SimRng) -> Result<SurpriseRecord> {
        let prior = model.prior();
        let lp0 = model.log_predictive(prior, y);
        if !self.started {
            // the first observation always follows a change
            self.started = true;
            model.bayes_update_raw(&mut self.chi, &mut self.nu[0], y);
            self.runs[0] = 1;
            return Ok(SurpriseRecord::new(lp0, lp0, self.log_m));
        }

        let d = self.dim;
        let n = self.log_w.len();
        self.joint.resize(n, 0.0);
        match (&mut self.gauss, *y) {
            (Some(tab), Observation::Real(v)) => {
                let longest = self.runs.iter().copied().max().unwrap_or(0) as usize;
                tab.ensure(longest);
                let rows = &tab.rows;
                for (((j, &l), &c), &r) in self.joint.iter_mut().zip(&self.log_w).zip(&self.chi).zip(&self.runs) {
                    let (k0, h, k) = rows[r as usize];
                    let dev = v - c * k;
                    *j = l + (k0 - dev * dev * h);
                }
            }
            _ => {
                for (i, j) in self.joint.iter_mut().enumerate() {
                    *j = self.log_w[i] + model.log_predictive_raw(&self.chi[i * d..(i + 1) * d], self.nu[i], y);
                }
            }
        }
        let hi = self.joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // w holds exp(joint - hi) until the weights are rebuilt below
        let mut sum = 0.0;
        for (w, &j) in self.w.iter_mut().zip(&self.joint) {
            *w = (j - hi).exp();
            sum += *w;
        }
        let lp = if hi == f64::NEG_INFINITY { hi } else { hi + sum.ln() };
        let record = SurpriseRecord::new(lp, lp0, self.log_m);
        let (log_stay, log_change) = record.log_rates(self.log_m);
        let change = log_change.exp();

        if lp == f64::NEG_INFINITY {
            self.log_w.fill(f64::NEG_INFINITY);
            self.w.fill(0.0);
        } else {
            let shift = log_stay - lp;
            let scale = log_stay.exp() / sum;
            for ((l, w), &j) in self.log_w.iter_mut().zip(self.w.iter_mut()).zip(&self.joint) {
                *l = j + shift;
                *w *= scale;
            }
        }
        match (&self.gauss, *y) {
            (Some(tab), Observation::Real(v)) => {
                let add = v / tab.s2;
                for (c, nu) in self.chi.iter_mut().zip(self.nu.iter_mut()) {
                    *c += add;
                    *nu += 1.0;
                }
            }
            _ => {
                for (c, nu) in self.chi.chunks_exact_mut(d).zip(self.nu.iter_mut()) {
                    model.bayes_update_raw(c, nu, y);
                }
            }
        }
        for r in &mut self.runs {
            *r += 1;
        }
        let fresh = model.reset(y);
        self.chi.extend_from_slice(&fresh.chi);
        self.nu.push(fresh.nu);
        self.log_w.push(log_change);
        self.w.push(change);
        self.runs.push(1);

        self.prune();
        if let Some(cap) = self.cap {
            while self.log_w.len() > cap {
                // lowest index wins ties
                let mut worst = 0;
                for (i, &l) in self.log_w.iter().enumerate() {
                    if l < self.log_w[worst] {
                        worst = i;
                    }
                }
                self.remove(worst);
            }
        }
        let total: f64 = self.w.iter().sum();
        let log_total = total.ln();
        for (l, w) in self.log_w.iter_mut().zip(self.w.iter_mut()) {
            *l -= log_total;
            *w /= total;
        }
        Ok(record)
    }

    fn estimate_into(&self, model: &ConjugateModel, out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        let mut mean = vec![0.0; d];
        for (i, &w) in self.w.iter().enumerate() {
            model.mean_into(&self.chi[i * d..(i + 1) * d], self.nu[i], &mut mean);
            for (o, m) in out.iter_mut().zip(&mean) {
                *o += w * m;
            }
        }
    }

    fn gaussian_moments(&self, model: &ConjugateModel) -> Option<(f64, f64)> {
        let s2 = model.sigma()?.powi(2);
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, &w) in self.w.iter().enumerate() {
            let var = s2 / self.nu[i];
            let mean = self.chi[i] * var;
            m1 += w * mean;
            m2 += w * (mean * mean + var);
        }
        Some((m1, (m2 - m1 * m1).max(0.0)))
    }
}
