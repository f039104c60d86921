//! Experiment settings: command-line flags layered over an optional JSON file.

use std::path::{Path, PathBuf};

use bfsurprise::estimators::{Algorithm, NassarVariant};
use bfsurprise::evaluation::{categorical_task, gaussian_task, Cell};
use bfsurprise::expfam::ConjugateModel;
use bfsurprise::surprise::m_from_pc;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Gaussian,
    Categorical,
}

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with default settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    /// Observation noise levels of the Gaussian task.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    /// Prior concentrations of the categorical task.
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    /// Change probabilities.
    #[arg(long = "pc", value_delimiter = ',')]
    pub pc: Option<Vec<f64>>,
    /// Horizon; by default 1e5 steps, or 2e5 when p_c < 0.005.
    #[arg(long = "T")]
    pub horizon: Option<usize>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Seeds as a list of values and half-open ranges, e.g. `0..10,42`.
    #[arg(long, value_delimiter = ',', value_parser = parse_seeds)]
    pub seeds: Option<Vec<Vec<u64>>>,
    /// Learners such as `pf20`, `smile`, or `leaky=0.9` for a fixed parameter.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<String>>,
    /// Particle count for `pf` and `mp` without a number.
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table written by `tune` to take parameters from.
    #[arg(long)]
    pub use_tuned: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub which: Option<u8>,
    /// Subjects simulated by `predict`.
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Largest run length in the transient table.
    #[arg(long)]
    pub transient_max: Option<u32>,
    /// Worker threads; 1 runs everything in order on one thread.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Same fields as [`Flags`], read from the config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSettings {
    task: Option<Task>,
    sigma: Option<Vec<f64>>,
    s: Option<Vec<f64>>,
    pc: Option<Vec<f64>>,
    #[serde(rename = "T")]
    horizon: Option<usize>,
    seeds: Option<Vec<u64>>,
    algorithms: Option<Vec<String>>,
    particles: Option<usize>,
    out: Option<PathBuf>,
    use_tuned: Option<PathBuf>,
    which: Option<u8>,
    subjects: Option<usize>,
    transient_max: Option<u32>,
    jobs: Option<usize>,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub command: String,
    pub task: Task,
    pub env_params: Vec<f64>,
    pub pcs: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<String>,
    pub particles: usize,
    pub out: PathBuf,
    pub use_tuned: Option<PathBuf>,
    pub which: u8,
    pub subjects: usize,
    pub transient_max: u32,
    pub jobs: Option<usize>,
}

/// Defaults that differ between subcommands.
pub struct Defaults {
    pub sigma: Vec<f64>,
    pub pcs: Vec<f64>,
    pub horizon: Option<usize>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<&'static str>,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let b: u64 = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            if a >= b {
                return Err(format!("empty seed range {s}"));
            }
            Ok((a..b).collect())
        }
        None => s.trim().parse().map(|x| vec![x]).map_err(|e| format!("{s}: {e}")),
    }
}

impl ExperimentSpec {
    pub fn resolve(command: &str, flags: Flags, defaults: Defaults) -> Result<Self, UsageError> {
        let file: FileSettings = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
            }
            None => FileSettings::default(),
        };
        let task = flags.task.or(file.task).unwrap_or(Task::Gaussian);
        let env_params = match task {
            Task::Gaussian => flags.sigma.or(file.sigma).unwrap_or(defaults.sigma),
            Task::Categorical => flags.s.or(file.s).unwrap_or_else(|| vec![1.0]),
        };
        let seeds = match (flags.seed, flags.seeds) {
            (Some(s), _) => vec![s],
            (None, Some(lists)) => lists.concat(),
            (None, None) => file.seeds.unwrap_or(defaults.seeds),
        };
        let spec = Self {
            command: command.to_string(),
            task,
            env_params,
            pcs: flags.pc.or(file.pc).unwrap_or(defaults.pcs),
            horizon: flags.horizon.or(file.horizon).or(defaults.horizon),
            seeds,
            algorithms: flags
                .algorithms
                .or(file.algorithms)
                .unwrap_or_else(|| defaults.algorithms.iter().map(|s| s.to_string()).collect()),
            particles: flags.particles.or(file.particles).unwrap_or(20),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            use_tuned: flags.use_tuned.or(file.use_tuned),
            which: flags.which.or(file.which).unwrap_or(1),
            subjects: flags.subjects.or(file.subjects).unwrap_or(20),
            transient_max: flags.transient_max.or(file.transient_max).unwrap_or(20),
            jobs: flags.jobs.or(file.jobs),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), UsageError> {
        let bad = |msg: String| Err(UsageError(msg));
        if let Some(p) = self.pcs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return bad(format!("--pc must lie in (0, 1), got {p}"));
        }
        if let Some(x) = self.env_params.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return bad(format!("--sigma and --s must be positive, got {x}"));
        }
        if self.pcs.is_empty() || self.env_params.is_empty() {
            return bad("empty environment grid".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.horizon == Some(0) {
            return bad("--T must be at least 1".into());
        }
        if self.particles == 0 || self.subjects == 0 || self.jobs == Some(0) {
            return bad("--particles, --subjects and --jobs must be at least 1".into());
        }
        if !(1..=2).contains(&self.which) {
            return bad(format!("--which must be 1 or 2, got {}", self.which));
        }
        for a in &self.algorithms {
            AlgorithmSpec::parse(a, self.particles)?;
        }
        Ok(())
    }

    pub fn model(&self, env_param: f64) -> Result<ConjugateModel, UsageError> {
        let m = match self.task {
            Task::Gaussian => gaussian_task(env_param),
            Task::Categorical => categorical_task(env_param),
        };
        m.map_err(|e| UsageError(e.to_string()))
    }

    pub fn horizon_for(&self, p_c: f64) -> usize {
        self.horizon.unwrap_or_else(|| bfsurprise::evaluation::desk_horizon(p_c))
    }

    /// Every `(env_param, p_c)` cell of the grid.
    pub fn cells(&self) -> Result<Vec<Cell>, UsageError> {
        let mut out = Vec::new();
        for &e in &self.env_params {
            for &p_c in &self.pcs {
                out.push(Cell { model: self.model(e)?, p_c, horizon: self.horizon_for(p_c) });
            }
        }
        Ok(out)
    }

    pub fn algorithm_specs(&self) -> Vec<AlgorithmSpec> {
        self.algorithms.iter().map(|a| AlgorithmSpec::parse(a, self.particles).expect("validated")).collect()
    }

    pub fn param_name(&self) -> &'static str {
        match self.task {
            Task::Gaussian => "sigma",
            Task::Categorical => "s",
        }
    }

    /// Key naming a cell in tables, e.g. `sigma=1 p_c=0.01`.
    pub fn cell_key(&self, cell: &Cell) -> String {
        format!("{}={} p_c={}", self.param_name(), cell.env_param(), cell.p_c)
    }
}

/// A learner and the source of its parameter.
#[derive(Debug, Clone, Copy)]
pub struct AlgorithmSpec {
    template: Algorithm,
    fixed: Option<f64>,
}

impl AlgorithmSpec {
    pub fn parse(text: &str, particles: usize) -> Result<Self, UsageError> {
        let (name, fixed) = match text.split_once('=') {
            Some((n, v)) => {
                let v: f64 = v.parse().map_err(|_| UsageError(format!("bad parameter in {text}")))?;
                (n.trim(), Some(v))
            }
            None => (text.trim(), None),
        };
        let count = |prefix: &str| -> Result<usize, UsageError> {
            let rest = &name[prefix.len()..];
            if rest.is_empty() {
                Ok(particles)
            } else {
                rest.parse().ok().filter(|&n| n > 0).ok_or_else(|| UsageError(format!("bad particle count in {text}")))
            }
        };
        // placeholder p_c until the learner is matched to a cell
        let p_c = 0.5;
        let template = match name {
            "varsmile" => Algorithm::VarSmile { m: 1.0 },
            "smile" => Algorithm::Smile { m: 1.0 },
            "exact" => Algorithm::ExactBayes { p_c },
            "leaky" => Algorithm::Leaky { omega: 1.0, p_c },
            "nas10" => Algorithm::Nassar { variant: NassarVariant::Nas10, p_c },
            "nas12" => Algorithm::Nassar { variant: NassarVariant::Nas12, p_c },
            n if n.starts_with("mp") => Algorithm::MessagePassing { particles: count("mp")?, p_c },
            n if n.starts_with("pf") => Algorithm::ParticleFilter { particles: count("pf")?, p_c },
            _ => return Err(UsageError(format!("unknown algorithm {text}"))),
        };
        let spec = Self { template, fixed };
        if let Some(v) = fixed {
            spec.template.with_param(v).validate().map_err(|e| UsageError(format!("{text}: {e}")))?;
        }
        Ok(spec)
    }

    pub fn label(&self) -> String {
        self.template.label()
    }

    pub fn is_fixed(&self) -> bool {
        self.fixed.is_some()
    }

    /// Learner with its parameter matched to a cell with change
    /// probability `p_c`: `m = p_c / (1 - p_c)`, `omega = 1 - p_c`, or the
    /// fixed value when one was given.
    pub fn for_pc(&self, p_c: f64) -> Algorithm {
        let alg = self.template.matched_to(p_c);
        let default = match alg {
            Algorithm::VarSmile { .. } | Algorithm::Smile { .. } => m_from_pc(p_c),
            Algorithm::Leaky { .. } => 1.0 - p_c,
            _ => p_c,
        };
        alg.with_param(self.fixed.unwrap_or(default))
    }

    /// Grid searched by `tune`; a fixed value is searched alone.
    pub fn grid(&self) -> Vec<f64> {
        match self.fixed {
            Some(v) => vec![v],
            None => self.template.param_grid(),
        }
    }
}

/// Best parameter per `(algorithm, cell)` read back from a tuned table.
pub struct TunedTable {
    rows: Vec<(String, String, f64)>,
}

impl TunedTable {
    pub fn read(path: &Path) -> Result<Self, UsageError> {
        let err = |e: &dyn std::fmt::Display| UsageError(format!("tuned table {}: {e}", path.display()));
        let mut rdr = csv::Reader::from_path(path).map_err(|e| err(&e))?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| err(&e))?;
            let param: f64 = rec.get(2).unwrap_or("").parse().map_err(|e| err(&e))?;
            rows.push((rec.get(0).unwrap_or("").to_string(), rec.get(1).unwrap_or("").to_string(), param));
        }
        Ok(Self { rows })
    }

    pub fn lookup(&self, label: &str, cell: &str) -> Result<f64, UsageError> {
        self.rows
            .iter()
            .find(|(a, c, _)| a == label && c == cell)
            .map(|r| r.2)
            .ok_or_else(|| UsageError(format!("no tuned parameter for {label} at {cell}")))
    }
}
