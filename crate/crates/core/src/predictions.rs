//! Behavioural signatures separating Bayes Factor from Shannon surprise.
//!
//! Both analyses simulate several subjects on the Gaussian task, bin the time
//! points and average each surprise per subject and bin before taking the
//! mean and standard error across subjects.
//!
//! **Prediction 1.** Fix the previous estimate `theta_hat` near an anchor,
//! the belief's standard deviation near a confidence level, and the absolute
//! prediction error `|delta|`. Split by `s = sign(delta * theta_hat)`. A
//! Bayes Factor surprise is larger for `s = -1` (the observation lies towards
//! the prior mean) while a Shannon surprise is larger for `s = +1`.
//!
//! **Prediction 2.** Select steps where the current and the prior predictive
//! of the observation are both close to `p`. The Bayes Factor surprise is
//! then close to one for every `p`, while the Shannon surprise decreases
//! with `p`.

use serde::{Deserialize, Serialize};

use crate::environment::{generate, stream_rng, EnvConfig, LEARNER_STREAM};
use crate::error::{Error, Result};
use crate::estimators::Algorithm;
use crate::expfam::{ConjugateModel, Observation};
use crate::numeric::mean_sem;
use crate::par::Backend;

/// Fewest subjects needed for a bin to be reported.
pub const MIN_SUBJECTS: usize = 2;

/// Settings shared by both analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub horizon: usize,
    pub subjects: usize,
    pub sigma: f64,
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub p_c: f64,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self { horizon: 500, subjects: 20, sigma: 0.5, prior_mean: 0.0, prior_sd: 1.0, p_c: 0.1, seed: 0 }
    }
}

/// Bins of the first analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction1Config {
    pub task: TaskConfig,
    /// Anchor for the previous estimate and its half-width.
    pub theta_anchor: f64,
    pub theta_halfwidth: f64,
    /// Confidence level for the belief standard deviation and its half-width.
    pub confidence: f64,
    pub confidence_halfwidth: f64,
    /// Centres of the `|delta|` bins and their common half-width.
    pub deltas: Vec<f64>,
    pub delta_halfwidth: f64,
}

impl Default for Prediction1Config {
    fn default() -> Self {
        Self {
            task: TaskConfig::default(),
            theta_anchor: 1.0,
            theta_halfwidth: 0.25,
            confidence: 0.5,
            confidence_halfwidth: 1.0,
            deltas: (1..=15).map(|i| f64::from(i) / 10.0).collect(),
            delta_halfwidth: 0.05,
        }
    }
}

/// Bins of the second analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction2Config {
    pub task: TaskConfig,
    /// Centres of the probability bins and their common half-width.
    pub ps: Vec<f64>,
    pub p_halfwidth: f64,
}

impl Default for Prediction2Config {
    fn default() -> Self {
        let p_halfwidth = 0.0125;
        Self {
            task: TaskConfig::default(),
            ps: (2..=14).map(|i| f64::from(i) * 2.0 * p_halfwidth).collect(),
            p_halfwidth,
        }
    }
}

/// Across-subject summary of one bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub mean_sbf: f64,
    pub sem_sbf: f64,
    pub mean_ssh: f64,
    pub sem_ssh: f64,
    pub subjects: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction1Row {
    pub delta: f64,
    pub sign: i8,
    pub summary: BinSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction2Row {
    pub p: f64,
    pub summary: BinSummary,
}

/// Per-step quantities one subject contributes.
struct Step {
    theta_prev: f64,
    sd_prev: f64,
    y: f64,
    log_pred: f64,
    log_pred_prior: f64,
    s_bf: f64,
    s_sh: f64,
}

fn simulate_subject(task: &TaskConfig, alg: &Algorithm, subject: u64) -> Result<Vec<Step>> {
    let model = ConjugateModel::gaussian(task.sigma, task.prior_mean, task.prior_sd)?;
    let seed = task.seed.wrapping_add(subject);
    let trace = generate(&EnvConfig { model: model.clone(), p_c: task.p_c, horizon: task.horizon, seed })?;
    let mut learner = alg.build(&model)?;
    let mut rng = stream_rng(seed, LEARNER_STREAM);
    let mut steps = Vec::with_capacity(trace.len());
    for y in &trace.observations {
        let (theta_prev, var_prev) = learner
            .gaussian_moments(&model)
            .ok_or_else(|| Error::Unsupported("learner has no Gaussian belief".into()))?;
        let rec = learner.step(&model, y, &mut rng)?;
        let Observation::Real(v) = *y else { unreachable!("Gaussian task") };
        steps.push(Step {
            theta_prev,
            sd_prev: var_prev.sqrt(),
            y: v,
            log_pred: rec.log_pred,
            log_pred_prior: rec.log_pred_prior,
            s_bf: rec.s_bf,
            s_sh: rec.s_sh,
        });
    }
    Ok(steps)
}

/// First centre `c` with `|x - c| < half`.
fn bin_of(x: f64, centres: &[f64], half: f64) -> Option<usize> {
    centres.iter().position(|&c| (x - c).abs() < half)
}

#[derive(Clone, Default)]
struct Acc {
    sbf: f64,
    ssh: f64,
    n: usize,
}

fn summarise(per_subject: &[Vec<Acc>], bin: usize) -> Option<BinSummary> {
    let (mut sbf, mut ssh) = (Vec::new(), Vec::new());
    for subj in per_subject {
        let a = &subj[bin];
        if a.n > 0 {
            sbf.push(a.sbf / a.n as f64);
            ssh.push(a.ssh / a.n as f64);
        }
    }
    if sbf.len() < MIN_SUBJECTS {
        return None;
    }
    let (mean_sbf, sem_sbf) = mean_sem(&sbf)?;
    let (mean_ssh, sem_ssh) = mean_sem(&ssh)?;
    Some(BinSummary { mean_sbf, sem_sbf, mean_ssh, sem_ssh, subjects: sbf.len() })
}

/// Runs the first analysis. Bins with fewer than [`MIN_SUBJECTS`] subjects
/// are omitted.
pub fn prediction1(cfg: &Prediction1Config, alg: &Algorithm, backend: Backend) -> Result<Vec<Prediction1Row>> {
    let nb = cfg.deltas.len();
    let subjects: Vec<u64> = (0..cfg.task.subjects as u64).collect();
    let per_subject = backend
        .map(subjects, |s| -> Result<Vec<Acc>> {
            // bins 0..nb hold s = +1, nb..2nb hold s = -1
            let mut acc = vec![Acc::default(); 2 * nb];
            for st in simulate_subject(&cfg.task, alg, s)? {
                let delta = st.y - st.theta_prev;
                let sign = (delta * st.theta_prev).signum();
                if delta * st.theta_prev == 0.0
                    || (st.theta_prev.abs() - cfg.theta_anchor).abs() >= cfg.theta_halfwidth
                    || (st.sd_prev - cfg.confidence).abs() >= cfg.confidence_halfwidth
                {
                    continue;
                }
                if let Some(b) = bin_of(delta.abs(), &cfg.deltas, cfg.delta_halfwidth) {
                    let a = &mut acc[if sign > 0.0 { b } else { nb + b }];
                    a.sbf += st.s_bf;
                    a.ssh += st.s_sh;
                    a.n += 1;
                }
            }
            Ok(acc)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (b, &delta) in cfg.deltas.iter().enumerate() {
        for (offset, sign) in [(0, 1i8), (nb, -1i8)] {
            if let Some(summary) = summarise(&per_subject, b + offset) {
                rows.push(Prediction1Row { delta, sign, summary });
            }
        }
    }
    Ok(rows)
}

/// Runs the second analysis. Bins with fewer than [`MIN_SUBJECTS`] subjects
/// are omitted.
pub fn prediction2(cfg: &Prediction2Config, alg: &Algorithm, backend: Backend) -> Result<Vec<Prediction2Row>> {
    let subjects: Vec<u64> = (0..cfg.task.subjects as u64).collect();
    let per_subject = backend
        .map(subjects, |s| -> Result<Vec<Acc>> {
            let mut acc = vec![Acc::default(); cfg.ps.len()];
            for st in simulate_subject(&cfg.task, alg, s)? {
                let (p, p0) = (st.log_pred.exp(), st.log_pred_prior.exp());
                let (Some(b), Some(b0)) = (bin_of(p, &cfg.ps, cfg.p_halfwidth), bin_of(p0, &cfg.ps, cfg.p_halfwidth))
                else {
                    continue;
                };
                if b == b0 {
                    acc[b].sbf += st.s_bf;
                    acc[b].ssh += st.s_sh;
                    acc[b].n += 1;
                }
            }
            Ok(acc)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(cfg
        .ps
        .iter()
        .enumerate()
        .filter_map(|(b, &p)| summarise(&per_subject, b).map(|summary| Prediction2Row { p, summary }))
        .collect())
}

/// `mean(s = +1) - mean(s = -1)` of both surprises at each `delta` with both
/// signs reported, together with the pooled standard error of each gap.
#[must_use]
pub fn sign_gaps(rows: &[Prediction1Row]) -> Vec<SignGap> {
    let mut out = Vec::new();
    for r in rows.iter().filter(|r| r.sign > 0) {
        if let Some(m) = rows.iter().find(|q| q.sign < 0 && q.delta == r.delta) {
            let (a, b) = (r.summary, m.summary);
            out.push(SignGap {
                delta: r.delta,
                sbf_gap: a.mean_sbf - b.mean_sbf,
                sbf_sem: a.sem_sbf.hypot(b.sem_sbf),
                ssh_gap: a.mean_ssh - b.mean_ssh,
                ssh_sem: a.sem_ssh.hypot(b.sem_ssh),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignGap {
    pub delta: f64,
    pub sbf_gap: f64,
    pub sbf_sem: f64,
    pub ssh_gap: f64,
    pub ssh_sem: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_are_disjoint() {
        let c = [0.1, 0.2, 0.3];
        assert_eq!(bin_of(0.16, &c, 0.05), Some(1));
        assert_eq!(bin_of(0.14, &c, 0.05), Some(0));
        assert_eq!(bin_of(0.36, &c, 0.05), None);
        assert_eq!(bin_of(0.0, &c, 0.05), None);
    }

    #[test]
    fn gaussian_only() {
        let alg = Algorithm::ParticleFilter { particles: 2, p_c: 0.1 };
        let mut cfg = Prediction2Config::default();
        cfg.task.subjects = 2;
        cfg.task.horizon = 10;
        assert!(prediction2(&cfg, &alg, Backend::Sequential).is_ok());
    }
}
