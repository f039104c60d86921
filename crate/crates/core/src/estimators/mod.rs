//! Online learners for the volatile environment.
//!
//! Every learner consumes one observation per call to [`Learner::step`] and
//! returns a [`SurpriseRecord`] computed from its belief *before* the update.

mod leaky;
mod message_passing;
mod nassar;
mod particle_filter;
mod smile;
mod varsmile;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use leaky::Leaky;
pub use message_passing::{MessagePassing, DEFAULT_PRUNE_WEIGHT};
pub use nassar::{Nassar, NassarVariant};
pub use particle_filter::ParticleFilter;
pub use smile::{solve_mixing, Smile, BISECTION_MAX_ITER, BISECTION_TOL};
pub use varsmile::VarSmile;

use crate::environment::{stream_rng, SimRng, Trace, LEARNER_STREAM};
use crate::error::{Error, Result};
use crate::expfam::{ConjugateModel, Observation, Params};
use crate::surprise::{m_from_pc, SurpriseRecord};

/// Interface shared by all learners.
pub trait Learner: Send {
    /// Consumes `y` and returns the surprise of `y` under the current belief.
    fn step(&mut self, model: &ConjugateModel, y: &Observation, rng: &mut SimRng) -> Result<SurpriseRecord>;

    /// Writes the current point estimate of `theta` into `out`.
    fn estimate_into(&self, model: &ConjugateModel, out: &mut [f64]);

    /// Mean and variance of the belief about a Gaussian mean.
    fn gaussian_moments(&self, model: &ConjugateModel) -> Option<(f64, f64)>;

    /// Current point estimate of `theta`.
    fn estimate(&self, model: &ConjugateModel) -> Params {
        let mut out: Params = smallvec::smallvec![0.0; model.dim()];
        self.estimate_into(model, &mut out);
        out
    }
}

/// Algorithm together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    VarSmile {
        m: f64,
    },
    /// Message passing keeping at most `particles` hypotheses.
    MessagePassing {
        particles: usize,
        p_c: f64,
    },
    ExactBayes {
        p_c: f64,
    },
    ParticleFilter {
        particles: usize,
        p_c: f64,
    },
    Smile {
        m: f64,
    },
    Nassar {
        variant: NassarVariant,
        p_c: f64,
    },
    /// Leaky integrator. `p_c` only enters its surprise record.
    Leaky {
        omega: f64,
        p_c: f64,
    },
}

/// Which scalar a grid search tunes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    M,
    PC,
    Omega,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::M => "m",
            ParamKind::PC => "p_c",
            ParamKind::Omega => "omega",
        })
    }
}

impl Algorithm {
    /// Short name, for example `pf20` or `nas12`.
    #[must_use]
    pub fn label(&self) -> String {
        match self {
            Algorithm::VarSmile { .. } => "varsmile".into(),
            Algorithm::MessagePassing { particles, .. } => format!("mp{particles}"),
            Algorithm::ExactBayes { .. } => "exact".into(),
            Algorithm::ParticleFilter { particles, .. } => format!("pf{particles}"),
            Algorithm::Smile { .. } => "smile".into(),
            Algorithm::Nassar { variant: NassarVariant::Nas10, .. } => "nas10".into(),
            Algorithm::Nassar { variant: NassarVariant::Nas12, .. } => "nas12".into(),
            Algorithm::Leaky { .. } => "leaky".into(),
        }
    }

    #[must_use]
    pub fn param_kind(&self) -> ParamKind {
        match self {
            Algorithm::VarSmile { .. } | Algorithm::Smile { .. } => ParamKind::M,
            Algorithm::Leaky { .. } => ParamKind::Omega,
            _ => ParamKind::PC,
        }
    }

    /// Value of the tuned parameter.
    #[must_use]
    pub fn param(&self) -> f64 {
        match *self {
            Algorithm::VarSmile { m } | Algorithm::Smile { m } => m,
            Algorithm::Leaky { omega, .. } => omega,
            Algorithm::MessagePassing { p_c, .. }
            | Algorithm::ExactBayes { p_c }
            | Algorithm::ParticleFilter { p_c, .. }
            | Algorithm::Nassar { p_c, .. } => p_c,
        }
    }

    /// Copy with the tuned parameter replaced.
    #[must_use]
    pub fn with_param(mut self, value: f64) -> Self {
        match &mut self {
            Algorithm::VarSmile { m } | Algorithm::Smile { m } => *m = value,
            Algorithm::Leaky { omega, .. } => *omega = value,
            Algorithm::MessagePassing { p_c, .. }
            | Algorithm::ExactBayes { p_c }
            | Algorithm::ParticleFilter { p_c, .. }
            | Algorithm::Nassar { p_c, .. } => *p_c = value,
        }
        self
    }

    /// Change ratio `m` used in surprise records.
    #[must_use]
    pub fn m(&self) -> f64 {
        match *self {
            Algorithm::VarSmile { m } | Algorithm::Smile { m } => m,
            Algorithm::Leaky { p_c, .. }
            | Algorithm::MessagePassing { p_c, .. }
            | Algorithm::ExactBayes { p_c }
            | Algorithm::ParticleFilter { p_c, .. }
            | Algorithm::Nassar { p_c, .. } => m_from_pc(p_c),
        }
    }

    /// Copy whose parameters match an environment with change probability
    /// `p_c`. Tuned `m` and `omega` are left alone except for the record
    /// probability of the leaky integrator.
    #[must_use]
    pub fn matched_to(mut self, env_pc: f64) -> Self {
        match &mut self {
            Algorithm::VarSmile { .. } | Algorithm::Smile { .. } => {}
            Algorithm::Leaky { p_c, .. }
            | Algorithm::MessagePassing { p_c, .. }
            | Algorithm::ExactBayes { p_c }
            | Algorithm::ParticleFilter { p_c, .. }
            | Algorithm::Nassar { p_c, .. } => *p_c = env_pc,
        }
        self
    }

    /// Default tuning grid for the parameter.
    #[must_use]
    pub fn param_grid(&self) -> Vec<f64> {
        match self.param_kind() {
            ParamKind::M => m_grid(),
            ParamKind::PC => PC_GRID.to_vec(),
            ParamKind::Omega => omega_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        match *self {
            Algorithm::VarSmile { m } | Algorithm::Smile { m } if !(m > 0.0 && m.is_finite()) => bad("m", m),
            Algorithm::Leaky { omega, .. } if !(omega > 0.0 && omega <= 1.0) => bad("omega", omega),
            Algorithm::Leaky { p_c, .. }
            | Algorithm::MessagePassing { p_c, .. }
            | Algorithm::ExactBayes { p_c }
            | Algorithm::ParticleFilter { p_c, .. }
            | Algorithm::Nassar { p_c, .. }
                if !(p_c > 0.0 && p_c < 1.0) =>
            {
                bad("p_c", p_c)
            }
            Algorithm::MessagePassing { particles: 0, .. } | Algorithm::ParticleFilter { particles: 0, .. } => {
                Err(Error::InvalidParameter("particle count must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Instantiates the learner at its initial state.
    pub fn build(&self, model: &ConjugateModel) -> Result<Box<dyn Learner>> {
        self.validate()?;
        Ok(match *self {
            Algorithm::VarSmile { m } => Box::new(VarSmile::new(model, m)),
            Algorithm::MessagePassing { particles, p_c } => {
                Box::new(MessagePassing::new(model, m_from_pc(p_c), Some(particles)))
            }
            Algorithm::ExactBayes { p_c } => Box::new(MessagePassing::new(model, m_from_pc(p_c), None)),
            Algorithm::ParticleFilter { particles, p_c } => {
                Box::new(ParticleFilter::new(model, m_from_pc(p_c), particles))
            }
            Algorithm::Smile { m } => Box::new(Smile::new(model, m)),
            Algorithm::Nassar { variant, p_c } => Box::new(Nassar::new(model, variant, m_from_pc(p_c))?),
            Algorithm::Leaky { omega, p_c } => Box::new(Leaky::new(model, omega, m_from_pc(p_c))),
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}={})", self.label(), self.param_kind(), self.param())
    }
}

/// Parses a label such as `pf20`, `mp20`, `exact`, `varsmile`, `smile`,
/// `nas10`, `nas12` or `leaky`. Parameters take neutral defaults
/// (`p_c = 0.1`, `m = 0.1`, `omega = 0.9`, 20 particles) and are meant to be
/// overwritten by the caller.
impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let count = |rest: &str| -> Result<usize> {
            if rest.is_empty() {
                return Ok(20);
            }
            rest.parse().map_err(|_| Error::InvalidParameter(format!("bad particle count in {s:?}")))
        };
        let p_c = 0.1;
        Ok(match s.as_str() {
            "varsmile" => Algorithm::VarSmile { m: 0.1 },
            "smile" => Algorithm::Smile { m: 0.1 },
            "exact" | "exactbayes" => Algorithm::ExactBayes { p_c },
            "nas10" => Algorithm::Nassar { variant: NassarVariant::Nas10, p_c },
            "nas12" => Algorithm::Nassar { variant: NassarVariant::Nas12, p_c },
            "leaky" => Algorithm::Leaky { omega: 0.9, p_c },
            _ if s.starts_with("mp") => Algorithm::MessagePassing { particles: count(&s[2..])?, p_c },
            _ if s.starts_with("pf") => Algorithm::ParticleFilter { particles: count(&s[2..])?, p_c },
            _ => return Err(Error::InvalidParameter(format!("unknown algorithm {s:?}"))),
        })
    }
}

/// Change probabilities searched for learners tuned by `p_c`.
pub const PC_GRID: [f64; 6] = [0.1, 0.05, 0.01, 0.005, 0.001, 0.0001];

/// `m = 10^k` for `k = -4, -11/3, ..., 2`.
#[must_use]
pub fn m_grid() -> Vec<f64> {
    (0..=18).map(|i| 10f64.powf(-4.0 + f64::from(i) / 3.0)).collect()
}

/// Leak factors searched for the leaky integrator.
#[must_use]
pub fn omega_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect();
    g.extend([0.96, 0.97, 0.98, 0.99, 0.999, 0.9999, 1.0]);
    g
}

/// Output of one learner on one trace.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: String,
    pub dim: usize,
    /// Row-major estimates after each step.
    pub estimates: Vec<f64>,
    pub records: Vec<SurpriseRecord>,
}

impl RunResult {
    /// Estimate after zero-based step `t`.
    #[must_use]
    pub fn estimate(&self, t: usize) -> &[f64] {
        &self.estimates[t * self.dim..(t + 1) * self.dim]
    }
}

/// Runs a learner over a trace. `seed` keys the learner's own randomness.
pub fn run(alg: &Algorithm, model: &ConjugateModel, trace: &Trace, seed: u64) -> Result<RunResult> {
    let mut learner = alg.build(model)?;
    let mut rng = stream_rng(seed, LEARNER_STREAM);
    let dim = model.dim();
    let n = trace.len();
    let mut estimates = vec![0.0; n * dim];
    let mut records = Vec::with_capacity(n);
    for (t, y) in trace.observations.iter().enumerate() {
        model.check_observation(y)?;
        records.push(learner.step(model, y, &mut rng)?);
        learner.estimate_into(model, &mut estimates[t * dim..(t + 1) * dim]);
    }
    Ok(RunResult { label: alg.label(), dim, estimates, records })
}
