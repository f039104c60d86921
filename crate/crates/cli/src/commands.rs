use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use bfsurprise::environment::generate;
use bfsurprise::estimators::{run, Algorithm};
use bfsurprise::evaluation::{
    benchmark_detailed, delta_mse, grid_search, regret_curve, BenchmarkRow, Cell, TransientProfile, ROBUSTNESS_PC,
};
use bfsurprise::par::Backend;
use bfsurprise::predictions::{prediction1, prediction2, sign_gaps, Prediction1Config, Prediction2Config, TaskConfig};
use bfsurprise::report::{self, fmt17, Metadata};

use crate::spec::{AlgorithmSpec, Defaults, ExperimentSpec, Flags, Task, TunedTable};
use crate::{Failure, UsageError};

type Outcome = Result<(), Failure>;

const BENCHMARK_ALGORITHMS: [&str; 5] = ["pf20", "mp20", "varsmile", "smile", "leaky"];

fn setup(command: &str, flags: Flags, defaults: Defaults) -> Result<(ExperimentSpec, Backend, Metadata), Failure> {
    let spec = ExperimentSpec::resolve(command, flags, defaults)?;
    let backend = backend(spec.jobs)?;
    fs::create_dir_all(&spec.out).with_context(|| format!("creating {}", spec.out.display()))?;
    let meta = Metadata {
        spec: serde_json::to_value(&spec).context("serialising settings")?,
        git_describe: env!("BFSURPRISE_GIT_DESCRIBE").to_string(),
        seeds: spec.seeds.clone(),
    };
    Ok((spec, backend, meta))
}

#[cfg(feature = "parallel")]
fn backend(jobs: Option<usize>) -> Result<Backend, Failure> {
    match jobs {
        Some(1) => Ok(Backend::Sequential),
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the thread pool")?;
            Ok(Backend::Parallel)
        }
        None => Ok(Backend::Parallel),
    }
}

#[cfg(not(feature = "parallel"))]
fn backend(jobs: Option<usize>) -> Result<Backend, Failure> {
    match jobs {
        None | Some(1) => Ok(Backend::Sequential),
        Some(_) => Err(UsageError("built without thread support; use --jobs 1".into()).into()),
    }
}

fn file_stem(spec: &ExperimentSpec, cell: &Cell) -> String {
    format!("{}{}_pc{}", spec.param_name(), cell.env_param(), cell.p_c)
}

fn done(path: &Path) {
    println!("{}", path.display());
}

pub fn simulate(flags: Flags) -> Outcome {
    let defaults = Defaults { sigma: vec![1.0], pcs: vec![0.01], horizon: None, seeds: vec![0], algorithms: vec![] };
    let (spec, backend, meta) = setup("simulate", flags, defaults)?;
    let algs = spec.algorithm_specs();
    for cell in spec.cells()? {
        let stem = file_stem(&spec, &cell);
        let traces = backend.map(spec.seeds.clone(), |s| generate(&cell.env(s)).map(|t| (s, t)));
        for item in traces {
            let (seed, trace) = item?;
            let path = spec.out.join(format!("trace_{stem}_seed{seed}.csv"));
            report::write_trace(&path, &trace, &meta)?;
            done(&path);
            for a in &algs {
                let alg = a.for_pc(cell.p_c);
                let out = run(&alg, &cell.model, &trace, seed)?;
                let path = spec.out.join(format!("estimates_{}_{stem}_seed{seed}.csv", alg.label()));
                report::write_estimator_trace(&path, &trace, &out, &meta)?;
                done(&path);
            }
        }
    }
    Ok(())
}

fn tuned_or_matched(
    spec: &ExperimentSpec,
    table: Option<&TunedTable>,
    a: &AlgorithmSpec,
    cell: &Cell,
) -> Result<Algorithm, Failure> {
    let alg = a.for_pc(cell.p_c);
    match table {
        Some(t) if !a.is_fixed() => Ok(alg.with_param(t.lookup(&a.label(), &spec.cell_key(cell))?)),
        _ => Ok(alg),
    }
}

pub fn tune(flags: Flags) -> Outcome {
    let defaults = Defaults {
        sigma: vec![1.0],
        pcs: vec![0.01],
        horizon: None,
        seeds: vec![100, 101, 102],
        algorithms: BENCHMARK_ALGORITHMS.to_vec(),
    };
    let (spec, backend, meta) = setup("tune", flags, defaults)?;
    let mut searches = Vec::new();
    for cell in spec.cells()? {
        for a in spec.algorithm_specs() {
            let g = grid_search(&a.for_pc(cell.p_c), &cell, &a.grid(), &spec.seeds, backend)?;
            searches.push((spec.cell_key(&cell), g));
        }
    }
    let path = spec.out.join("tuned.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| path.display().to_string())?;
    w.write_record(["algorithm", "cell", "param", "mse"]).context("writing tuned table")?;
    for (cell, g) in &searches {
        w.write_record([g.best.label(), cell.clone(), fmt17(g.best.param()), fmt17(g.best_mse)])
            .context("writing tuned table")?;
    }
    w.flush().context("writing tuned table")?;
    write_sidecar(&path, &meta)?;
    done(&path);
    let grid_path = spec.out.join("tune_grid.csv");
    report::write_tune(&grid_path, &searches, &meta)?;
    done(&grid_path);
    Ok(())
}

fn write_sidecar(path: &Path, meta: &Metadata) -> Outcome {
    let side = report::sidecar_path(path);
    let mut f = fs::File::create(&side).with_context(|| side.display().to_string())?;
    serde_json::to_writer_pretty(&mut f, meta).context("writing sidecar")?;
    f.write_all(b"\n").context("writing sidecar")?;
    Ok(())
}

fn load_table(spec: &ExperimentSpec) -> Result<Option<TunedTable>, Failure> {
    Ok(match &spec.use_tuned {
        Some(p) => Some(TunedTable::read(p)?),
        None => None,
    })
}

pub fn benchmark(flags: Flags) -> Outcome {
    let defaults = Defaults {
        sigma: vec![1.0],
        pcs: vec![0.01],
        horizon: None,
        seeds: (0..10).collect(),
        algorithms: BENCHMARK_ALGORITHMS.to_vec(),
    };
    let (spec, backend, meta) = setup("benchmark", flags, defaults)?;
    let table = load_table(&spec)?;
    let mut rows = Vec::new();
    let mut transient = Vec::new();
    for cell in spec.cells()? {
        let algs = spec
            .algorithm_specs()
            .iter()
            .map(|a| tuned_or_matched(&spec, table.as_ref(), a, &cell))
            .collect::<Result<Vec<_>, _>>()?;
        let outcomes = benchmark_detailed(&cell, &algs, &spec.seeds, backend)?;
        let exact = cell.exact();
        let mut profiles = vec![TransientProfile::default(); algs.len() + 1];
        for o in &outcomes {
            let row = |alg: &Algorithm, mse: f64| BenchmarkRow {
                algorithm: alg.label(),
                env_param: cell.env_param(),
                p_c: cell.p_c,
                param_value: alg.param(),
                seed: o.seed,
                mse,
                delta_mse: delta_mse(mse, o.exact_mse),
            };
            rows.push(row(&exact, o.exact_mse));
            profiles[0].merge(&o.exact_profile);
            for (i, (alg, (mse, prof))) in algs.iter().zip(&o.algorithms).enumerate() {
                rows.push(row(alg, *mse));
                profiles[i + 1].merge(prof);
            }
        }
        let labels = std::iter::once(&exact).chain(&algs).map(Algorithm::label);
        for (label, prof) in labels.zip(&profiles) {
            for n in 1..=spec.transient_max {
                if let Some(v) = prof.mse(n) {
                    transient.push(vec![
                        label.clone(),
                        fmt17(cell.env_param()),
                        fmt17(cell.p_c),
                        n.to_string(),
                        fmt17(v),
                    ]);
                }
            }
        }
    }
    let path = spec.out.join("results.csv");
    report::write_results(&path, &rows, &meta)?;
    done(&path);
    let path = spec.out.join("transient.csv");
    write_rows(&path, &["algorithm", "env_param", "p_c", "n", "transient_mse"], &transient, &meta)?;
    done(&path);
    Ok(())
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>], meta: &Metadata) -> Outcome {
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(header).context("writing table")?;
    for r in rows {
        w.write_record(r).context("writing table")?;
    }
    w.flush().context("writing table")?;
    write_sidecar(path, meta)
}

pub fn robustness(flags: Flags) -> Outcome {
    let defaults = Defaults {
        sigma: vec![1.0],
        pcs: vec![0.01],
        horizon: None,
        seeds: vec![0, 1, 2],
        algorithms: vec!["exact", "pf20", "varsmile"],
    };
    let (spec, backend, meta) = setup("robustness", flags, defaults)?;
    let table = load_table(&spec)?;
    let mut rows = Vec::new();
    for cell in spec.cells()? {
        for a in spec.algorithm_specs() {
            let alg = match (&table, a.is_fixed()) {
                (Some(_), _) | (None, true) => tuned_or_matched(&spec, table.as_ref(), &a, &cell)?,
                (None, false) => grid_search(&a.for_pc(cell.p_c), &cell, &a.grid(), &spec.seeds, backend)?.best,
            };
            let curve = regret_curve(&alg, &cell.model, &ROBUSTNESS_PC, |p| spec.horizon_for(p), &spec.seeds, backend)?;
            for point in curve {
                rows.push(vec![
                    alg.label(),
                    fmt17(cell.env_param()),
                    fmt17(cell.p_c),
                    fmt17(alg.param()),
                    fmt17(point.p_c),
                    fmt17(point.regret.mean),
                    fmt17(point.regret.sem),
                ]);
            }
        }
    }
    let path = spec.out.join("regret.csv");
    let header = ["algorithm", "env_param", "tuned_pc", "param_value", "p_c", "mean_regret", "sem_regret"];
    write_rows(&path, &header, &rows, &meta)?;
    done(&path);
    Ok(())
}

pub fn predict(flags: Flags) -> Outcome {
    let defaults = Defaults {
        sigma: vec![0.5],
        pcs: vec![0.1],
        horizon: Some(500),
        seeds: vec![0],
        algorithms: vec!["nas12", "pf20"],
    };
    let (spec, backend, meta) = setup("predict", flags, defaults)?;
    if spec.task != Task::Gaussian {
        return Err(UsageError("the predictions use the Gaussian task".into()).into());
    }
    let table = load_table(&spec)?;
    let mut outputs: Vec<PathBuf> = Vec::new();
    for cell in spec.cells()? {
        let (sigma, p_c) = (cell.env_param(), cell.p_c);
        let task = TaskConfig {
            horizon: spec.horizon_for(p_c),
            subjects: spec.subjects,
            sigma,
            p_c,
            seed: spec.seeds[0],
            ..TaskConfig::default()
        };
        let stem = format!("sigma{sigma}_pc{p_c}");
        for a in spec.algorithm_specs() {
            let alg = tuned_or_matched(&spec, table.as_ref(), &a, &cell)?;
            let name = alg.label();
            if spec.which == 1 {
                let cfg = Prediction1Config { task: task.clone(), ..Prediction1Config::default() };
                let rows = prediction1(&cfg, &alg, backend)?;
                let path = spec.out.join(format!("prediction1_{name}_{stem}.csv"));
                report::write_prediction1(&path, &rows, &meta)?;
                outputs.push(path);
                let gaps: Vec<Vec<String>> = sign_gaps(&rows)
                    .iter()
                    .map(|g| [g.delta, g.sbf_gap, g.sbf_sem, g.ssh_gap, g.ssh_sem].map(fmt17).to_vec())
                    .collect();
                let path = spec.out.join(format!("prediction1_gaps_{name}_{stem}.csv"));
                write_rows(&path, &["delta", "sbf_gap", "sbf_sem", "ssh_gap", "ssh_sem"], &gaps, &meta)?;
                outputs.push(path);
            } else {
                let cfg = Prediction2Config { task: task.clone(), ..Prediction2Config::default() };
                let rows = prediction2(&cfg, &alg, backend)?;
                let path = spec.out.join(format!("prediction2_{name}_{stem}.csv"));
                report::write_prediction2(&path, &rows, &meta)?;
                outputs.push(path);
            }
        }
    }
    outputs.iter().for_each(|p| done(p));
    Ok(())
}
