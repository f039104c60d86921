//! Randomised invariants shared by the property suite and the acceptance
//! gate.

use bfsurprise::environment::{generate, stream_rng, EnvConfig};
use bfsurprise::estimators::{Algorithm, Learner, MessagePassing, NassarVariant, ParticleFilter};
use bfsurprise::expfam::Belief;
use bfsurprise::surprise::{adaptation_rate, adaptation_rate_log, m_from_pc, surprise_bf};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

use super::Spec;

pub const CASES: u32 = 1000;

pub fn spec() -> impl Strategy<Value = Spec> {
    prop_oneof![
        (0.05f64..5.0, -3.0f64..3.0, 0.1f64..3.0).prop_map(|(sigma, mu0, sd0)| Spec::Gaussian { sigma, mu0, sd0 }),
        prop::collection::vec(0.05f64..5.0, 2..7).prop_map(|alpha| Spec::Categorical { alpha }),
    ]
}

/// A valid belief of the same family as `spec`.
pub fn belief(spec: &Spec) -> BoxedStrategy<Belief> {
    let model = spec.model();
    match spec {
        Spec::Gaussian { .. } => {
            (-5.0f64..5.0, 1e-3f64..5.0).prop_map(move |(m, v)| model.gaussian_belief(m, v).unwrap()).boxed()
        }
        Spec::Categorical { alpha } => prop::collection::vec(0.01f64..20.0, alpha.len())
            .prop_map(move |a| model.dirichlet_belief(&a).unwrap())
            .boxed(),
    }
}

/// `(spec, p_c, horizon, seed)` of a short random task.
pub fn task(max_t: usize) -> impl Strategy<Value = (Spec, f64, usize, u64)> {
    (spec(), 0.001f64..0.5, 1..=max_t, any::<u64>())
}

fn env(spec: &Spec, p_c: f64, horizon: usize, seed: u64) -> EnvConfig {
    EnvConfig { model: spec.model(), p_c, horizon, seed }
}

pub fn check_weight_normalization(
    (spec, p_c, horizon, seed): (Spec, f64, usize, u64),
    cap: usize,
) -> Result<(), TestCaseError> {
    let model = spec.model();
    let trace = generate(&env(&spec, p_c, horizon, seed)).unwrap();
    let m = m_from_pc(p_c);
    let mut mp = MessagePassing::new(&model, m, Some(cap));
    let mut exact = MessagePassing::new(&model, m, None);
    let mut pf = ParticleFilter::new(&model, m, cap);
    let mut rng = stream_rng(seed, 1);
    let sums_to_one = |w: &[f64]| (w.iter().sum::<f64>() - 1.0).abs() <= 1e-12 && w.iter().all(|&x| x >= 0.0);
    for y in &trace.observations {
        mp.step(&model, y, &mut rng).unwrap();
        exact.step(&model, y, &mut rng).unwrap();
        pf.step(&model, y, &mut rng).unwrap();
        prop_assert!(sums_to_one(mp.weights()), "capped weights {:?}", mp.weights());
        prop_assert!(sums_to_one(exact.weights()), "exact weights {:?}", exact.weights());
        prop_assert!(sums_to_one(&pf.weights()), "particle weights {:?}", pf.weights());
        prop_assert!(mp.len() <= cap && pf.weights().len() == cap);
    }
    Ok(())
}

pub fn check_kl_nonnegative(spec: &Spec, a: &Belief, b: &Belief) -> Result<(), TestCaseError> {
    let model = spec.model();
    let kl = model.kl(a, b);
    prop_assert!(kl >= 0.0 && kl.is_finite(), "kl = {kl}");
    prop_assert!(model.kl(a, a).abs() <= 1e-12);
    Ok(())
}

pub fn check_unit_surprise_at_prior((spec, p_c, horizon, seed): (Spec, f64, usize, u64)) -> Result<(), TestCaseError> {
    let model = spec.model();
    let trace = generate(&env(&spec, p_c, horizon, seed)).unwrap();
    let y = &trace.observations[horizon - 1];
    let s = surprise_bf(&model, model.prior(), y);
    prop_assert!((s - 1.0).abs() <= 1e-12, "S_BF at the prior = {s}");
    let mut algs = vec![
        Algorithm::VarSmile { m: 0.1 },
        Algorithm::MessagePassing { particles: 5, p_c },
        Algorithm::ExactBayes { p_c },
        Algorithm::ParticleFilter { particles: 5, p_c },
        Algorithm::Smile { m: 0.1 },
        Algorithm::Leaky { omega: 0.9, p_c },
    ];
    if model.is_gaussian() {
        algs.push(Algorithm::Nassar { variant: NassarVariant::Nas10, p_c });
        algs.push(Algorithm::Nassar { variant: NassarVariant::Nas12, p_c });
    }
    let mut rng = stream_rng(seed, 1);
    for alg in algs {
        let rec = alg.build(&model).unwrap().step(&model, y, &mut rng).unwrap();
        prop_assert!((rec.s_bf - 1.0).abs() <= 1e-12, "{} reports S_BF = {}", alg.label(), rec.s_bf);
    }
    Ok(())
}

pub fn check_rate_monotone(ls1: f64, ls2: f64, lm1: f64, lm2: f64) -> Result<(), TestCaseError> {
    let (ls_lo, ls_hi) = (ls1.min(ls2), ls1.max(ls2));
    let (lm_lo, lm_hi) = (lm1.min(lm2), lm1.max(lm2));
    for &lm in &[lm_lo, lm_hi] {
        let (a, b) = (adaptation_rate_log(ls_lo, lm), adaptation_rate_log(ls_hi, lm));
        prop_assert!(a <= b && (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        let (a, b) = (adaptation_rate(ls_lo.exp(), lm.exp()), adaptation_rate(ls_hi.exp(), lm.exp()));
        prop_assert!(a <= b, "linear rate not monotone in S: {a} > {b}");
    }
    for &ls in &[ls_lo, ls_hi] {
        prop_assert!(adaptation_rate_log(ls, lm_lo) <= adaptation_rate_log(ls, lm_hi));
        prop_assert!(adaptation_rate(ls.exp(), lm_lo.exp()) <= adaptation_rate(ls.exp(), lm_hi.exp()));
    }
    Ok(())
}

pub fn check_trace_reproducible((spec, p_c, horizon, seed): (Spec, f64, usize, u64)) -> Result<(), TestCaseError> {
    let cfg = env(&spec, p_c, horizon, seed);
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    prop_assert_eq!(&a.observations, &b.observations);
    prop_assert_eq!(&a.changes, &b.changes);
    prop_assert_eq!(&a.thetas, &b.thetas);
    prop_assert!(a.changes[0]);
    let mut r = 0;
    for (c, &n) in a.changes.iter().zip(&a.run_lengths) {
        r = if *c { 1 } else { r + 1 };
        prop_assert_eq!(n, r);
    }
    let alg = Algorithm::ParticleFilter { particles: 4, p_c };
    let x = bfsurprise::estimators::run(&alg, &cfg.model, &a, seed).unwrap();
    let y = bfsurprise::estimators::run(&alg, &cfg.model, &b, seed).unwrap();
    prop_assert_eq!(x.estimates, y.estimates);
    Ok(())
}

/// Runs `check` on `CASES` deterministic draws of `strategy`.
pub fn run_cases<S: Strategy>(
    strategy: S,
    check: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), TestError<S::Value>> {
    let config = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, check)
}
