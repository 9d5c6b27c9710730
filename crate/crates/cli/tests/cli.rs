#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use fredholm::baselines::GridProblem;
use fredholm::io;
use fredholm_cli::commands;
use fredholm_cli::config;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fredholm"))
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn run(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const SMALL_TOY: &str = r#"{
  "preset": "toy_gaussian",
  "n_observations": 300,
  "solver": {"n_particles": 60, "minibatch": 60, "max_steps": 5, "monitor_every": 2},
  "replicates": 3,
  "seed_base": 4,
  "mse_points": [[0.0], [0.5]]
}"#;

#[test]
fn missing_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("run", &tmp.path().join("absent.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_baseline_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"preset": "toy_gaussian", "baseline": {"kind": "dkde"}}"#);
    let out = run("baseline", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn invalid_config_exits_2_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"preset": "toy_gaussian", "n_observations": 10, "solver": {"minibatch": 50}}"#);
    let out_dir = tmp.path().join("o");
    let out = run("run", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn zero_steps_returns_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"preset": "gaussian_mixture_1d", "n_observations": 200, "solver": {"n_particles": 50, "minibatch": 50, "max_steps": 0}}"#,
    );
    let out_dir = tmp.path().join("o");
    let out = run("run", &cfg, &out_dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = out_dir.join("replicate_000");
    assert_eq!(fs::read(rep.join("init_cloud.csv")).unwrap(), fs::read(rep.join("final_cloud.csv")).unwrap());
}

#[test]
fn reruns_and_worker_counts_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_TOY);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run("run", &cfg, &a, &["--workers", "1"]).status.success());
    assert!(run("run", &cfg, &b, &["--workers", "3"]).status.success());
    let fa = files(&a);
    assert!(fa.iter().any(|(p, _)| p.ends_with("kde_grid.csv")));
    assert!(fa.iter().any(|(p, _)| p.ends_with("trace.csv")));
    assert_eq!(fa, files(&b));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_TOY);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run("run", &cfg, &a, &[]).status.success());
    assert!(run("run", &cfg, &b, &["--seed", "5"]).status.success());
    let fa = fs::read(a.join("replicate_000/final_cloud.csv")).unwrap();
    let fb = fs::read(b.join("replicate_000/final_cloud.csv")).unwrap();
    assert_ne!(fa, fb);
    // replicate 1 of seed base 4 is replicate 0 of seed base 5
    assert_eq!(fs::read(a.join("replicate_001/final_cloud.csv")).unwrap(), fb);
}

#[test]
fn artifacts_round_trip_and_metrics_recompute() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), "c.json", SMALL_TOY);
    let out_dir = tmp.path().join("o");
    let resolved = config::load(&cfg_path).unwrap().resolve(None).unwrap();
    commands::cmd_run(&resolved, &out_dir).unwrap();

    let metrics_text = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let rows = io::parse_metrics(&metrics_text, "metrics").unwrap();
    assert_eq!(io::metrics_to_csv(&rows), metrics_text);
    for name in ["ise", "w1_marginal", "reconvolution_ise", "g_hat", "mse@0.0000000000000000e0"] {
        assert!(rows.iter().any(|r| r.metric == name), "{name} missing");
    }
    assert!(rows.iter().all(|r| r.value.is_finite()));

    let rep = out_dir.join("replicate_001");
    let cloud_text = fs::read_to_string(rep.join("final_cloud.csv")).unwrap();
    assert_eq!(io::points_to_csv(&io::parse_points(&cloud_text, "c").unwrap()), cloud_text);
    let trace_text = fs::read_to_string(rep.join("trace.csv")).unwrap();
    let trace = io::parse_trace(&trace_text, "t").unwrap();
    assert_eq!(trace.records.len(), 6);
    assert_eq!(io::trace_to_csv(&trace, 1), trace_text);
    let grid_text = fs::read_to_string(rep.join("kde_grid.csv")).unwrap();
    let (nodes, values) = io::parse_grid(&grid_text, "g").unwrap();
    assert_eq!(io::grid_to_csv(&nodes, &values, "density"), grid_text);

    fs::remove_file(out_dir.join("metrics.csv")).unwrap();
    commands::cmd_metrics(&resolved, &out_dir).unwrap();
    assert_eq!(fs::read_to_string(out_dir.join("metrics.csv")).unwrap(), metrics_text);

    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(echoed["problem"]["solver"]["n_particles"], 60);
}

#[test]
fn toy_sweep_starts_at_the_prior_variance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"preset": "toy_gaussian", "baseline": {"kind": "toy", "sigma_pi2": 0.1849, "sigma_k2": 0.2025, "sigma_0_2": 0.01, "alphas": [0, 0.5, 1]}}"#,
    );
    let out_dir = tmp.path().join("o");
    assert!(run("baseline", &cfg, &out_dir, &[]).status.success());
    let text = fs::read_to_string(out_dir.join("toy_sweep.csv")).unwrap();
    let rows = io::parse_toy_sweep(&text, "s").unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].beta, 0.1849);
    assert!(rows[1].beta < rows[0].beta && rows[2].beta < rows[1].beta);
}

#[test]
fn oslem_baseline_reaches_three_cell_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let json = r#"{"preset": "toy_gaussian", "n_observations": 2000,
        "baseline": {"kind": "oslem", "bins": 3, "lo": -1.5, "hi": 1.5, "alpha": 0.1, "iterations": 500}}"#;
    let cfg_path = write_config(tmp.path(), "c.json", json);
    let out_dir = tmp.path().join("o");
    let out = run("baseline", &cfg_path, &out_dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = io::parse_metrics(&fs::read_to_string(out_dir.join("metrics.csv")).unwrap(), "m").unwrap();
    let f_em = rows[0].value;

    let resolved = config::load(&cfg_path).unwrap().resolve(None).unwrap();
    let p = &resolved.problem;
    let obs = commands::observations(&resolved, 0).unwrap();
    let reference = p.reference.resolve(1, &obs).unwrap();
    let grid = GridProblem::discretize(&p.kernel, &reference, &obs.points, 3, -1.5, 1.5).unwrap();
    let mut k = [[0.0; 3]; 3];
    for (b, row) in k.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = grid.kernel(b, c);
        }
    }
    let mu: [f64; 3] = grid.target().try_into().unwrap();
    let prior: [f64; 3] = grid.prior().try_into().unwrap();
    let (f_grid, _) = oracles::simplex_search(&k, &mu, &prior, 0.1, 1000);
    let (f_fine, _) = oracles::simplex_search_refined(&k, &mu, &prior, 0.1, 1000, 2);
    assert!(f_em <= f_grid + 1e-12, "{f_em} vs {f_grid}");
    assert!((f_em - f_fine).abs() < 1e-6, "{f_em} vs {f_fine}");
}

#[test]
fn cv_selects_small_alpha_on_the_toy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"preset": "toy_gaussian", "n_observations": 1000,
            "solver": {"n_particles": 200, "minibatch": 200, "max_steps": 100},
            "cv": {"folds": 5, "alpha_grid": [1e-5, 1e-3, 1e-1, 1], "seed": 3}}"#,
    );
    let out_dir = tmp.path().join("o");
    let out = run("cv", &cfg, &out_dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("cv_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 4 * 5);
    let summary = fs::read_to_string(out_dir.join("cv_summary.csv")).unwrap();
    let selected: Vec<f64> = summary
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",true"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(selected.len(), 1, "{summary}");
    assert!(selected[0] <= 1e-3, "{summary}");
}
