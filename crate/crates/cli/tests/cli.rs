use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bfs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfsurprise")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

const SIMULATE: [&str; 11] =
    ["simulate", "--task", "gaussian", "--sigma", "1", "--pc", "0.01", "--T", "1000", "--seed", "7"];

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = bfs(&SIMULATE, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csvs: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    assert_eq!(csvs.len(), 1);
    let rows = lines(&csvs[0]);
    assert_eq!(rows[0], "t,c,y,theta");
    assert_eq!(rows.len(), 1001);
    assert!(rows[1].starts_with("1,1,"));

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("trace_sigma1_pc0.01_seed7.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seeds"], serde_json::json!([7]));
    assert_eq!(meta["spec"]["T"], 1000);
    assert!(meta["git_describe"].as_str().is_some_and(|s| !s.is_empty()));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [&SIMULATE[..], &["--algorithms", "pf5,exact"]].concat();
    assert!(bfs(&args, a.path()).status.success());
    assert!(bfs(&args, b.path()).status.success());
    for name in [
        "trace_sigma1_pc0.01_seed7.csv",
        "estimates_pf5_sigma1_pc0.01_seed7.csv",
        "estimates_exact_sigma1_pc0.01_seed7.csv",
    ] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args =
        ["benchmark", "--sigma", "0.5", "--pc", "0.1", "--T", "300", "--seeds", "0..4", "--algorithms", "pf10,smile"];
    assert!(bfs(&[&args[..], &["--jobs", "1"]].concat(), a.path()).status.success());
    assert!(bfs(&[&args[..], &["--jobs", "2"]].concat(), b.path()).status.success());
    for name in ["results.csv", "transient.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--pc", "0"][..],
        &["simulate", "--pc", "1"],
        &["predict", "--which", "3"],
        &["simulate", "--algorithms", "kalman"],
        &["simulate", "--sigma", "-1"],
        &["simulate", "--bogus"],
        &["benchmark", "--T", "10", "--use-tuned", "/nonexistent/tuned.csv"],
        &["simulate", "--task", "categorical", "--T", "5", "--algorithms", "nas10"],
    ] {
        let out = bfs(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn tuned_table_has_one_row_per_algorithm_and_cell() {
    let dir = tempfile::tempdir().unwrap();
    let args =
        ["tune", "--sigma", "0.5,1", "--pc", "0.01,0.1", "--T", "2000", "--algorithms", "exact,smile=0.05,leaky"];
    let out = bfs(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&dir.path().join("tuned.csv"));
    assert_eq!(rows[0], "algorithm,cell,param,mse");
    assert_eq!(rows.len(), 1 + 3 * 4);
    // exact inference does best with the true change probability
    for r in rows.iter().filter(|r| r.starts_with("exact,")) {
        let f: Vec<&str> = r.split(',').collect();
        let true_pc = f[1].rsplit("p_c=").next().unwrap();
        assert_eq!(f[2].parse::<f64>().unwrap(), true_pc.parse::<f64>().unwrap(), "{r}");
    }
    // a fixed value is a one-point grid
    assert!(rows
        .iter()
        .filter(|r| r.starts_with("smile,"))
        .all(|r| r.split(',').nth(2) == Some("0.050000000000000003")));

    let bench = bfs(
        &[
            "benchmark",
            "--sigma",
            "1",
            "--pc",
            "0.1",
            "--T",
            "500",
            "--seeds",
            "0..2",
            "--algorithms",
            "leaky,exact",
            "--use-tuned",
            dir.path().join("tuned.csv").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(bench.status.success(), "{}", String::from_utf8_lossy(&bench.stderr));
    for r in lines(&dir.path().join("results.csv")).iter().skip(1).filter(|r| r.starts_with("exact,")) {
        assert!(r.ends_with(",0"), "{r}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"task": "categorical", "s": [0.25], "pc": [0.2], "T": 50, "seeds": [3]}"#).unwrap();
    let out = bfs(&["simulate", "--config", cfg.to_str().unwrap(), "--T", "20"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&dir.path().join("trace_s0.25_pc0.2_seed3.csv"));
    assert_eq!(rows[0], "t,c,y,theta_1,theta_2,theta_3,theta_4,theta_5");
    assert_eq!(rows.len(), 21);

    fs::write(&cfg, r#"{"unknown": 1}"#).unwrap();
    assert_eq!(bfs(&["simulate", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn prediction_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = bfs(&["predict", "--which", "1", "--algorithms", "nas12"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&dir.path().join("prediction1_nas12_sigma0.5_pc0.1.csv"));
    assert_eq!(rows[0], "delta,sign,mean_sbf,sem_sbf,mean_ssh,sem_ssh");
    let gaps = lines(&dir.path().join("prediction1_gaps_nas12_sigma0.5_pc0.1.csv"));
    assert!(gaps.len() > 1);
    let meta: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("prediction1_nas12_sigma0.5_pc0.1.csv.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["spec"]["T"], 500);

    let out = bfs(&["predict", "--which", "2", "--algorithms", "nas12"], dir.path());
    assert!(out.status.success());
    assert_eq!(
        lines(&dir.path().join("prediction2_nas12_sigma0.5_pc0.1.csv"))[0],
        "p,mean_sbf,sem_sbf,mean_ssh,sem_ssh"
    );
}

#[test]
fn robustness_curve_is_zero_where_matched() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        bfs(&["robustness", "--sigma", "1", "--pc", "0.01", "--T", "1000", "--algorithms", "exact=0.01"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&dir.path().join("regret.csv"));
    assert_eq!(rows.len(), 1 + 6);
    assert!(rows.contains(&"exact,1,0.01,0.01,0.01,0,0".to_string()));
}
