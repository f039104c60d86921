//! Error measures, parameter tuning and benchmark sweeps.
//!
//! Sweeps fan out over independent `(seed, algorithm, grid point)` jobs via
//! [`Backend`]; results are identical for both backends.

use serde::{Deserialize, Serialize};

use crate::environment::{generate, EnvConfig, Trace};
use crate::error::{Error, Result};
use crate::estimators::{run, Algorithm, RunResult};
use crate::expfam::{ConjugateModel, Family};
use crate::numeric::mean_sem;
use crate::par::Backend;

/// Squared error of the estimate at each step, summed over components.
#[must_use]
pub fn squared_errors(trace: &Trace, out: &RunResult) -> Vec<f64> {
    (0..trace.len()).map(|t| trace.theta(t).iter().zip(out.estimate(t)).map(|(a, b)| (a - b).powi(2)).sum()).collect()
}

/// Time-averaged squared error.
#[must_use]
pub fn mse(trace: &Trace, out: &RunResult) -> f64 {
    let se = squared_errors(trace, out);
    se.iter().sum::<f64>() / se.len() as f64
}

/// Mean squared error over the steps whose run length is exactly `n`.
/// `None` when no step has that run length.
#[must_use]
pub fn transient_mse(trace: &Trace, out: &RunResult, n: u32) -> Option<f64> {
    let mut acc = TransientProfile::default();
    acc.add(trace, out);
    acc.mse(n)
}

/// `mse(algorithm) - mse(exact)`.
#[must_use]
pub fn delta_mse(alg_mse: f64, exact_mse: f64) -> f64 {
    alg_mse - exact_mse
}

/// Squared-error sums keyed by run length, poolable over runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransientProfile {
    /// `sums[n - 1]` is the summed squared error at run length `n`.
    pub sums: Vec<f64>,
    pub counts: Vec<u64>,
}

impl TransientProfile {
    pub fn add(&mut self, trace: &Trace, out: &RunResult) {
        for (t, se) in squared_errors(trace, out).into_iter().enumerate() {
            let n = trace.run_lengths[t] as usize;
            if self.sums.len() < n {
                self.sums.resize(n, 0.0);
                self.counts.resize(n, 0);
            }
            self.sums[n - 1] += se;
            self.counts[n - 1] += 1;
        }
    }

    pub fn merge(&mut self, other: &TransientProfile) {
        if self.sums.len() < other.sums.len() {
            self.sums.resize(other.sums.len(), 0.0);
            self.counts.resize(other.counts.len(), 0);
        }
        for (i, (s, c)) in other.sums.iter().zip(&other.counts).enumerate() {
            self.sums[i] += s;
            self.counts[i] += c;
        }
    }

    /// Mean squared error at run length `n`.
    #[must_use]
    pub fn mse(&self, n: u32) -> Option<f64> {
        let i = (n as usize).checked_sub(1)?;
        match self.counts.get(i) {
            Some(&c) if c > 0 => Some(self.sums[i] / c as f64),
            _ => None,
        }
    }

    /// Total number of steps pooled.
    #[must_use]
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// One environment setting of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: ConjugateModel,
    pub p_c: f64,
    pub horizon: usize,
}

impl Cell {
    #[must_use]
    pub fn env(&self, seed: u64) -> EnvConfig {
        EnvConfig { model: self.model.clone(), p_c: self.p_c, horizon: self.horizon, seed }
    }

    /// `sigma` for Gaussian cells, the symmetric concentration `s` otherwise.
    #[must_use]
    pub fn env_param(&self) -> f64 {
        match self.model.family() {
            Family::Gaussian { sigma } => sigma,
            Family::Categorical { .. } => self.model.prior().chi[0],
        }
    }

    /// Reference learner for this cell.
    #[must_use]
    pub fn exact(&self) -> Algorithm {
        Algorithm::ExactBayes { p_c: self.p_c }
    }
}

/// One grid point of a tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub param: f64,
    pub mean_mse: f64,
    pub per_seed: Vec<f64>,
}

/// Outcome of a grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best: Algorithm,
    pub best_mse: f64,
    pub table: Vec<GridRow>,
}

/// Minimises the seed-averaged MSE over `grid`. Ties go to the smaller value.
pub fn grid_search(
    template: &Algorithm,
    cell: &Cell,
    grid: &[f64],
    seeds: &[u64],
    backend: Backend,
) -> Result<GridSearch> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("grid search needs a grid and at least one seed".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let traces = backend.map(seeds.to_vec(), |s| generate(&cell.env(s))).into_iter().collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..seeds.len()).map(move |s| (g, s))).collect();
    let results = backend.map(jobs, |(g, s)| {
        let alg = template.with_param(grid[g]);
        run(&alg, &cell.model, &traces[s], seeds[s]).map(|out| mse(&traces[s], &out))
    });
    let mut table = Vec::with_capacity(grid.len());
    let mut it = results.into_iter();
    for &param in &grid {
        let per_seed = it.by_ref().take(seeds.len()).collect::<Result<Vec<_>>>()?;
        let mean_mse = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        table.push(GridRow { param, mean_mse, per_seed });
    }
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_mse < table[best].mean_mse {
            best = i;
        }
    }
    Ok(GridSearch { best: template.with_param(table[best].param), best_mse: table[best].mean_mse, table })
}

/// One row of a benchmark sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub algorithm: String,
    pub env_param: f64,
    pub p_c: f64,
    pub param_value: f64,
    pub seed: u64,
    pub mse: f64,
    pub delta_mse: f64,
}

/// Per-seed outcome of a benchmark, with transient profiles.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub exact_mse: f64,
    pub exact_profile: TransientProfile,
    /// `(mse, profile)` for each algorithm, in input order.
    pub algorithms: Vec<(f64, TransientProfile)>,
}

/// Runs every algorithm on the traces of `seeds` alongside the exact learner.
pub fn benchmark_detailed(
    cell: &Cell,
    algorithms: &[Algorithm],
    seeds: &[u64],
    backend: Backend,
) -> Result<Vec<SeedOutcome>> {
    let traces = backend.map(seeds.to_vec(), |s| generate(&cell.env(s))).into_iter().collect::<Result<Vec<_>>>()?;
    let exact = cell.exact();
    let mut all = vec![exact];
    all.extend_from_slice(algorithms);
    let jobs: Vec<(usize, usize)> = (0..seeds.len()).flat_map(|s| (0..all.len()).map(move |a| (s, a))).collect();
    let results = backend.map(jobs, |(s, a)| {
        run(&all[a], &cell.model, &traces[s], seeds[s]).map(|out| {
            let mut prof = TransientProfile::default();
            prof.add(&traces[s], &out);
            (mse(&traces[s], &out), prof)
        })
    });
    let mut it = results.into_iter();
    let mut outcomes = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut row = it.by_ref().take(all.len()).collect::<Result<Vec<_>>>()?;
        let (exact_mse, exact_profile) = row.remove(0);
        outcomes.push(SeedOutcome { seed, exact_mse, exact_profile, algorithms: row });
    }
    Ok(outcomes)
}

/// Flat results table of a benchmark.
pub fn benchmark(cell: &Cell, algorithms: &[Algorithm], seeds: &[u64], backend: Backend) -> Result<Vec<BenchmarkRow>> {
    let outcomes = benchmark_detailed(cell, algorithms, seeds, backend)?;
    let mut rows = Vec::new();
    for o in &outcomes {
        rows.push(BenchmarkRow {
            algorithm: cell.exact().label(),
            env_param: cell.env_param(),
            p_c: cell.p_c,
            param_value: cell.p_c,
            seed: o.seed,
            mse: o.exact_mse,
            delta_mse: 0.0,
        });
        for (alg, (m, _)) in algorithms.iter().zip(&o.algorithms) {
            rows.push(BenchmarkRow {
                algorithm: alg.label(),
                env_param: cell.env_param(),
                p_c: cell.p_c,
                param_value: alg.param(),
                seed: o.seed,
                mse: *m,
                delta_mse: delta_mse(*m, o.exact_mse),
            });
        }
    }
    Ok(rows)
}

/// Mean regret over seeds with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regret {
    pub mean: f64,
    pub sem: f64,
    pub per_seed: Vec<f64>,
}

/// `MSE(alg; env p_c) - MSE(exact at the true p_c; env p_c)` averaged over
/// seeds. `alg` carries the parameters it was tuned with.
pub fn mean_regret(alg: &Algorithm, cell: &Cell, seeds: &[u64], backend: Backend) -> Result<Regret> {
    let outcomes = benchmark_detailed(cell, std::slice::from_ref(alg), seeds, backend)?;
    let per_seed: Vec<f64> = outcomes.iter().map(|o| o.algorithms[0].0 - o.exact_mse).collect();
    let (mean, sem) = match mean_sem(&per_seed) {
        Some(x) => x,
        None => (per_seed[0], 0.0),
    };
    Ok(Regret { mean, sem, per_seed })
}

/// Regret of a fixed learner in one environment of a robustness sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub p_c: f64,
    pub regret: Regret,
}

/// Evaluates `alg` unchanged in environments with each change probability
/// in `pcs`, each with horizon `horizon(p_c)`.
pub fn regret_curve(
    alg: &Algorithm,
    model: &ConjugateModel,
    pcs: &[f64],
    horizon: impl Fn(f64) -> usize,
    seeds: &[u64],
    backend: Backend,
) -> Result<Vec<RegretPoint>> {
    pcs.iter()
        .map(|&p_c| {
            let cell = Cell { model: model.clone(), p_c, horizon: horizon(p_c) };
            mean_regret(alg, &cell, seeds, backend).map(|regret| RegretPoint { p_c, regret })
        })
        .collect()
}

/// Horizon of a cell at desk scale.
#[must_use]
pub fn desk_horizon(p_c: f64) -> usize {
    if p_c >= 0.005 {
        100_000
    } else {
        200_000
    }
}

/// The assumed change probabilities used for robustness sweeps.
pub const ROBUSTNESS_PC: [f64; 6] = crate::estimators::PC_GRID;

/// Observation noise levels of the Gaussian task.
pub const GAUSSIAN_SIGMAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

/// Prior concentrations of the categorical task.
pub const CATEGORICAL_S: [f64; 7] = [0.01, 0.1, 0.14, 0.25, 1.0, 2.0, 5.0];

/// Number of categories of the categorical task.
pub const CATEGORICAL_K: usize = 5;

/// Gaussian task with a standard normal prior on the mean.
pub fn gaussian_task(sigma: f64) -> Result<ConjugateModel> {
    ConjugateModel::gaussian(sigma, 0.0, 1.0)
}

/// Categorical task with a symmetric Dirichlet prior.
pub fn categorical_task(s: f64) -> Result<ConjugateModel> {
    ConjugateModel::categorical(CATEGORICAL_K, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell() -> Cell {
        Cell { model: ConjugateModel::gaussian(0.5, 0.0, 1.0).unwrap(), p_c: 0.1, horizon: 300 }
    }

    #[test]
    fn exact_has_zero_delta() {
        let rows = benchmark(&cell(), &[cell().exact()], &[1, 2], Backend::Sequential).unwrap();
        for r in rows {
            assert_eq!(r.delta_mse, 0.0);
        }
    }

    #[test]
    fn profile_recomposes_the_mse() {
        let c = cell();
        let tr = generate(&c.env(4)).unwrap();
        let out = run(&Algorithm::VarSmile { m: 0.1 }, &c.model, &tr, 4).unwrap();
        let mut p = TransientProfile::default();
        p.add(&tr, &out);
        let mut acc = 0.0;
        for n in 1..=p.sums.len() as u32 {
            if let Some(v) = p.mse(n) {
                acc += v * p.counts[n as usize - 1] as f64;
            }
        }
        assert!((acc / tr.len() as f64 - mse(&tr, &out)).abs() < 1e-12);
        assert_eq!(p.mse(0), None);
        assert_eq!(p.mse(100_000), None);
    }

    #[test]
    fn grid_search_ties_pick_the_smaller_value() {
        // every leak factor gives the same estimates on a one-step horizon
        let c = Cell { horizon: 1, ..cell() };
        let g =
            grid_search(&Algorithm::Leaky { omega: 0.9, p_c: 0.1 }, &c, &[0.9, 0.5, 0.7], &[1, 2], Backend::default())
                .unwrap();
        assert_eq!(g.best.param(), 0.5);
        assert_eq!(g.table.len(), 3);
    }
}
