//! CSV output with JSON metadata sidecars.
//!
//! Every table starts with a header row. Floats are written with 17
//! significant digits so that they round-trip. Each file `x.csv` gets a
//! sidecar `x.csv.meta.json` holding the resolved settings, the source
//! version string and the seeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environment::Trace;
use crate::error::Result;
use crate::estimators::RunResult;
use crate::evaluation::{BenchmarkRow, GridSearch};
use crate::expfam::Observation;
use crate::predictions::{Prediction1Row, Prediction2Row};

/// `%.17g`-style formatting.
#[must_use]
pub fn fmt17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let s = format!("{:.*}", (16 - exp) as usize, x);
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Contents of a metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub spec: serde_json::Value,
    pub git_describe: String,
    pub seeds: Vec<u64>,
}

/// Path of the sidecar for `csv`.
#[must_use]
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_table(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
    meta: &Metadata,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    let mut side = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(&mut side, meta)?;
    side.write_all(b"\n")?;
    Ok(())
}

fn obs_field(y: &Observation) -> String {
    match *y {
        Observation::Real(v) => fmt17(v),
        // categories are written one-based
        Observation::Category(i) => (i + 1).to_string(),
    }
}

fn indexed(name: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![name.to_string()]
    } else {
        (1..=dim).map(|k| format!("{name}_{k}")).collect()
    }
}

/// `t,c,y,theta...`
pub fn write_trace(path: &Path, trace: &Trace, meta: &Metadata) -> Result<()> {
    let mut header = vec!["t".to_string(), "c".into(), "y".into()];
    header.extend(indexed("theta", trace.dim));
    let rows = (0..trace.len()).map(|t| {
        let mut r =
            vec![(t + 1).to_string(), u8::from(trace.changes[t]).to_string(), obs_field(&trace.observations[t])];
        r.extend(trace.theta(t).iter().map(|&x| fmt17(x)));
        r
    });
    write_table(path, &header, rows, meta)
}

/// `t,y,estimate...,s_bf,s_sh,gamma`
pub fn write_estimator_trace(path: &Path, trace: &Trace, out: &RunResult, meta: &Metadata) -> Result<()> {
    let mut header = vec!["t".to_string(), "y".into()];
    header.extend(indexed("estimate", out.dim));
    header.extend(["s_bf".into(), "s_sh".into(), "gamma".into()]);
    let rows = (0..trace.len()).map(|t| {
        let rec = &out.records[t];
        let mut r = vec![(t + 1).to_string(), obs_field(&trace.observations[t])];
        r.extend(out.estimate(t).iter().map(|&x| fmt17(x)));
        r.extend([fmt17(rec.s_bf), fmt17(rec.s_sh), fmt17(rec.gamma)]);
        r
    });
    write_table(path, &header, rows, meta)
}

/// `algorithm,env_param,p_c,param_value,seed,mse,delta_mse`
pub fn write_results(path: &Path, rows: &[BenchmarkRow], meta: &Metadata) -> Result<()> {
    let header = ["algorithm", "env_param", "p_c", "param_value", "seed", "mse", "delta_mse"].map(String::from);
    let rows = rows.iter().map(|r| {
        vec![
            r.algorithm.clone(),
            fmt17(r.env_param),
            fmt17(r.p_c),
            fmt17(r.param_value),
            r.seed.to_string(),
            fmt17(r.mse),
            fmt17(r.delta_mse),
        ]
    });
    write_table(path, &header, rows, meta)
}

/// `algorithm,cell,param,mse`, one row per grid point of each search.
pub fn write_tune(path: &Path, searches: &[(String, GridSearch)], meta: &Metadata) -> Result<()> {
    let header = ["algorithm", "cell", "param", "mse"].map(String::from);
    let rows = searches.iter().flat_map(|(cell, g)| {
        g.table.iter().map(move |row| vec![g.best.label(), cell.clone(), fmt17(row.param), fmt17(row.mean_mse)])
    });
    write_table(path, &header, rows, meta)
}

/// `delta,sign,mean_sbf,sem_sbf,mean_ssh,sem_ssh`
pub fn write_prediction1(path: &Path, rows: &[Prediction1Row], meta: &Metadata) -> Result<()> {
    let header = ["delta", "sign", "mean_sbf", "sem_sbf", "mean_ssh", "sem_ssh"].map(String::from);
    let rows = rows.iter().map(|r| {
        let s = r.summary;
        vec![
            fmt17(r.delta),
            r.sign.to_string(),
            fmt17(s.mean_sbf),
            fmt17(s.sem_sbf),
            fmt17(s.mean_ssh),
            fmt17(s.sem_ssh),
        ]
    });
    write_table(path, &header, rows, meta)
}

/// `p,mean_sbf,sem_sbf,mean_ssh,sem_ssh`
pub fn write_prediction2(path: &Path, rows: &[Prediction2Row], meta: &Metadata) -> Result<()> {
    let header = ["p", "mean_sbf", "sem_sbf", "mean_ssh", "sem_ssh"].map(String::from);
    let rows = rows.iter().map(|r| {
        let s = r.summary;
        vec![fmt17(r.p), fmt17(s.mean_sbf), fmt17(s.sem_sbf), fmt17(s.mean_ssh), fmt17(s.sem_ssh)]
    });
    write_table(path, &header, rows, meta)
}
