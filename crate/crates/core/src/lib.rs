//! Surprise-modulated learning in volatile environments.
//!
//! Observations come from an exponential-family likelihood whose parameter
//! is redrawn from the prior at random change points. The crate provides
//! the generative process, a family of online learners that modulate their
//! update by the Bayes Factor surprise, error measures and sweeps, and the
//! two behavioural signatures that separate Bayes Factor from Shannon
//! surprise.
//!
//! ```
//! use bfsurprise::prelude::*;
//!
//! let model = ConjugateModel::gaussian(0.5, 0.0, 1.0).unwrap();
//! let env = EnvConfig { model: model.clone(), p_c: 0.1, horizon: 200, seed: 7 };
//! let trace = generate(&env).unwrap();
//! let alg = Algorithm::ParticleFilter { particles: 20, p_c: 0.1 };
//! let out = run(&alg, &model, &trace, 7).unwrap();
//! assert_eq!(out.records.len(), 200);
//! ```

pub mod environment;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod expfam;
pub mod numeric;
pub mod par;
pub mod predictions;
pub mod report;
pub mod surprise;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::environment::{generate, EnvConfig, Trace};
    pub use crate::error::{Error, Result};
    pub use crate::estimators::{run, Algorithm, Learner, NassarVariant, RunResult};
    pub use crate::expfam::{Belief, ConjugateModel, Observation};
    pub use crate::par::Backend;
    pub use crate::surprise::SurpriseRecord;
}
