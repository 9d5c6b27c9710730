//! Subcommand implementations. Every artefact is a pure function of the
//! resolved configuration, so repeated runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use fredholm::baselines::{oslem_run, toy_sweep, GridProblem, ToyGaussianSpec};
use fredholm::crossval::cv_score;
use fredholm::density::Kde;
use fredholm::functional::{g_hat, Score};
use fredholm::io;
use fredholm::kernels::KernelModel;
use fredholm::metrics::{ise, pointwise_mse, reconvolve_particles, wasserstein1_1d, DensityOnGrid, MetricRow};
use fredholm::reference::ReferenceMeasure;
use fredholm::rng::{stream, Role};
use fredholm::solver::{initialize, run, ObservationSample, ParticleCloud, SolverTrace};
use fredholm::PointSet;
use rayon::prelude::*;

use crate::config::{BaselineConfig, Resolved};
use crate::CliError;

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    io::write_text(path, text).map_err(CliError::from)
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

fn write_resolved(resolved: &Resolved, out: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(resolved).expect("resolved config serializes");
    write(&out.join("resolved_config.json"), &(text + "\n"))
}

pub fn replicate_dir(out: &Path, r: usize) -> PathBuf {
    out.join(format!("replicate_{r:03}"))
}

/// The observation sample for a replicate seed.
pub fn observations(resolved: &Resolved, seed: u64) -> Result<ObservationSample, CliError> {
    let obs = match &resolved.observations_file {
        Some(path) => ObservationSample::new(io::read_points(path)?)?,
        None => resolved.problem.sample_observations(resolved.n_observations, seed)?,
    };
    if obs.dim() != resolved.problem.kernel.dim_y() {
        return Err(CliError::Config(format!(
            "observations have {} columns, the kernel expects {}",
            obs.dim(),
            resolved.problem.kernel.dim_y()
        )));
    }
    Ok(obs)
}

struct Replicate {
    init: ParticleCloud,
    cloud: ParticleCloud,
    trace: SolverTrace,
    eval: Evaluation,
}

/// Metrics and grid outputs of one final cloud.
pub struct Evaluation {
    pub rows: Vec<MetricRow>,
    pub kde_grid: Option<(PointSet, Vec<f64>)>,
    pub reconvolution: Option<(PointSet, Vec<f64>)>,
    /// KDE at each configured MSE point.
    pub point_values: Vec<f64>,
}

fn wants(resolved: &Resolved, metric: &str) -> bool {
    resolved.metrics.iter().any(|m| m == metric)
}

/// Evaluates the final cloud of the replicate run with `seed`.
pub fn evaluate(
    resolved: &Resolved,
    cloud: &PointSet,
    obs: &ObservationSample,
    reference: &ReferenceMeasure,
    seed: u64,
) -> Result<Evaluation, CliError> {
    let p = &resolved.problem;
    let row = |metric: &str, value: f64| MetricRow {
        experiment: p.name.clone(),
        method: "particles".into(),
        n: cloud.len(),
        m: obs.len(),
        seed,
        metric: metric.into(),
        value,
    };
    let mut rows = Vec::new();
    let d = cloud.dim();
    let kde = if d <= 2 && cloud.len() >= 2 { Some(Kde::fit(cloud)?) } else { None };

    let mut kde_grid = None;
    if let (Some(grid), Some(kde)) = (&p.grid, &kde) {
        let nodes = grid.nodes();
        let values = kde.eval_points(&nodes)?;
        if wants(resolved, "ise") {
            let truth = DensityOnGrid::new(grid.clone(), p.truth_on_grid().expect("grid present"))?;
            let est = DensityOnGrid::new(grid.clone(), values.clone())?;
            rows.push(row("ise", ise(&est, &truth)?));
        }
        kde_grid = Some((nodes, values));
    }

    if wants(resolved, "w1_marginal") {
        let mut truth = vec![0.0; cloud.len()];
        let mut x = vec![0.0; d];
        for (i, t) in truth.iter_mut().enumerate() {
            p.truth.sample(&mut stream(seed, Role::Truth, 0, i as u64), &mut x);
            *t = x[0];
        }
        rows.push(row("w1_marginal", wasserstein1_1d(&cloud.column(0), &truth)?));
    }

    let mut reconvolution = None;
    if let Some(grid) = &p.observation_grid {
        let rec = reconvolve_particles(cloud, &p.kernel, grid)?;
        if let (true, Some(mu)) = (wants(resolved, "reconvolution_ise"), p.observation_mixture()) {
            let truth = DensityOnGrid::from_fn(grid.clone(), |y| mu.density(y))?;
            rows.push(row("reconvolution_ise", ise(&rec, &truth)?));
        }
        reconvolution = Some((grid.nodes(), rec.values));
    }

    if wants(resolved, "g_hat") {
        let alpha = match p.solver.score {
            Score::Full if !reference.is_flat() => p.solver.alpha,
            _ => 0.0,
        };
        if alpha == 0.0 || kde.is_some() || cloud.len() >= 2 {
            let e = g_hat(cloud, &obs.points, &p.kernel, reference, alpha, p.solver.eta, p.solver.denom_floor, kde.as_ref())?;
            rows.push(row("g_hat", e.total));
            rows.push(row("g_hat_data_term", e.data_term));
            rows.push(row("g_hat_kl_term", e.kl_term));
        }
    }

    let point_values = match &kde {
        Some(kde) => resolved
            .mse_points
            .iter()
            .map(|x| kde.eval(x))
            .collect::<fredholm::Result<Vec<f64>>>()?,
        None => Vec::new(),
    };
    Ok(Evaluation {
        rows,
        kde_grid,
        reconvolution,
        point_values,
    })
}

fn run_replicate(resolved: &Resolved, r: usize) -> Result<Replicate, CliError> {
    let p = &resolved.problem;
    let seed = resolved.seed_base.wrapping_add(r as u64);
    let obs = observations(resolved, seed)?;
    let d = p.kernel.dim_x();
    let reference = p.reference.resolve(d, &obs)?;
    let mut config = p.solver.clone();
    config.seed = seed;
    let init = initialize(&p.init, config.n_particles, d, &obs, &reference, seed)?;
    let out = run(&config, &p.kernel, &reference, init.clone(), &obs)?;
    let eval = evaluate(resolved, &out.cloud.points, &obs, &reference, seed)?;
    Ok(Replicate {
        init,
        cloud: out.cloud,
        trace: out.trace,
        eval,
    })
}

fn mse_rows(resolved: &Resolved, per_replicate: &[Vec<f64>], n: usize, m: usize) -> Result<Vec<MetricRow>, CliError> {
    if !wants(resolved, "mse") || per_replicate.len() < 2 {
        return Ok(Vec::new());
    }
    let p = &resolved.problem;
    let mut rows = Vec::new();
    for (i, x) in resolved.mse_points.iter().enumerate() {
        let reps: Vec<f64> = per_replicate.iter().filter_map(|v| v.get(i).copied()).collect();
        if reps.len() < 2 {
            continue;
        }
        rows.push(MetricRow {
            experiment: p.name.clone(),
            method: "particles".into(),
            n,
            m,
            seed: resolved.seed_base,
            metric: format!("mse@{}", x.iter().map(|v| io::fmt_f64(*v)).collect::<Vec<_>>().join(";")),
            value: pointwise_mse(&reps, p.truth.density(x))?,
        });
    }
    Ok(rows)
}

fn write_evaluation_grids(dir: &Path, eval: &Evaluation) -> Result<(), CliError> {
    if let Some((nodes, values)) = &eval.kde_grid {
        write(&dir.join("kde_grid.csv"), &io::grid_to_csv(nodes, values, "density"))?;
    }
    if let Some((nodes, values)) = &eval.reconvolution {
        if nodes.dim() <= 2 {
            write(&dir.join("reconvolution.csv"), &io::grid_to_csv(nodes, values, "density"))?;
        }
    }
    Ok(())
}

/// `run`: every replicate, its artefacts, and a combined metrics table.
pub fn cmd_run(resolved: &Resolved, out: &Path) -> Result<String, CliError> {
    ensure_dir(out)?;
    write_resolved(resolved, out)?;
    let results: Vec<Result<Replicate, CliError>> = (0..resolved.replicates)
        .into_par_iter()
        .map(|r| run_replicate(resolved, r))
        .collect();
    let mut all_rows = Vec::new();
    let mut point_values = Vec::new();
    let d = resolved.problem.kernel.dim_x();
    let mut summary = String::new();
    for (r, res) in results.into_iter().enumerate() {
        let rep = res.map_err(|e| e.context(&format!("replicate {r}")))?;
        let dir = replicate_dir(out, r);
        ensure_dir(&dir)?;
        write(&dir.join("init_cloud.csv"), &io::points_to_csv(&rep.init.points))?;
        write(&dir.join("final_cloud.csv"), &io::points_to_csv(&rep.cloud.points))?;
        write(&dir.join("trace.csv"), &io::trace_to_csv(&rep.trace, d))?;
        write_evaluation_grids(&dir, &rep.eval)?;
        let steps = rep.trace.last().map_or(0, |l| l.step);
        summary.push_str(&format!("replicate {r}: {steps} steps\n"));
        all_rows.extend(rep.eval.rows);
        point_values.push(rep.eval.point_values);
    }
    let n = resolved.problem.solver.n_particles;
    all_rows.extend(mse_rows(resolved, &point_values, n, resolved.n_observations)?);
    write(&out.join("metrics.csv"), &io::metrics_to_csv(&all_rows))?;
    Ok(summary)
}

/// `metrics`: recomputes the metrics table from stored final clouds.
pub fn cmd_metrics(resolved: &Resolved, out: &Path) -> Result<String, CliError> {
    let p = &resolved.problem;
    let d = p.kernel.dim_x();
    let mut all_rows = Vec::new();
    let mut point_values = Vec::new();
    for r in 0..resolved.replicates {
        let seed = resolved.seed_base.wrapping_add(r as u64);
        let dir = replicate_dir(out, r);
        let cloud = io::read_points(&dir.join("final_cloud.csv"))?;
        if cloud.dim() != d {
            return Err(CliError::Config(format!("{}: cloud dimension {} does not match the problem", dir.display(), cloud.dim())));
        }
        let obs = observations(resolved, seed)?;
        let reference = p.reference.resolve(d, &obs)?;
        let eval = evaluate(resolved, &cloud, &obs, &reference, seed)?;
        all_rows.extend(eval.rows);
        point_values.push(eval.point_values);
    }
    let n = resolved.problem.solver.n_particles;
    all_rows.extend(mse_rows(resolved, &point_values, n, resolved.n_observations)?);
    write(&out.join("metrics.csv"), &io::metrics_to_csv(&all_rows))?;
    Ok(format!("{} metric rows\n", all_rows.len()))
}

/// `cv`: the α-by-fold score table and its per-α summary.
pub fn cmd_cv(resolved: &Resolved, out: &Path) -> Result<String, CliError> {
    let plan = resolved
        .cv
        .as_ref()
        .ok_or_else(|| CliError::Config("the cv command needs a \"cv\" section".into()))?;
    ensure_dir(out)?;
    write_resolved(resolved, out)?;
    let p = &resolved.problem;
    let obs = observations(resolved, resolved.seed_base)?;
    let reference = p.reference.resolve(p.kernel.dim_x(), &obs)?;
    let mut config = p.solver.clone();
    config.seed = resolved.seed_base;
    let res = cv_score(plan, &p.kernel, &reference, &obs, &config, &p.init)?;
    write(&out.join("cv_table.csv"), &io::cv_cells_to_csv(&res.cells))?;
    write(&out.join("cv_summary.csv"), &io::cv_summary_to_csv(&res.summary, res.best_alpha))?;
    Ok(match res.best_alpha {
        Some(a) => format!("selected alpha {a}\n"),
        None => "every cross-validation cell failed\n".into(),
    })
}

/// `baseline`: the analytic toy sweep or a grid OSL-EM run.
pub fn cmd_baseline(resolved: &Resolved, out: &Path) -> Result<String, CliError> {
    let baseline = resolved
        .baseline
        .as_ref()
        .ok_or_else(|| CliError::Config("the baseline command needs a \"baseline\" section".into()))?;
    ensure_dir(out)?;
    write_resolved(resolved, out)?;
    match baseline {
        BaselineConfig::Toy { sigma_pi2, sigma_k2, sigma_0_2, alphas, cubic } => {
            let spec = ToyGaussianSpec::new(*sigma_pi2, *sigma_k2, *sigma_0_2, 0.0)?;
            let rows = toy_sweep(&spec, alphas, *cubic)?;
            write(&out.join("toy_sweep.csv"), &io::toy_sweep_to_csv(&rows))?;
            Ok(rows.iter().map(|r| format!("alpha {} beta {}\n", r.alpha, r.beta)).collect())
        }
        BaselineConfig::Oslem { bins, lo, hi, alpha, iterations } => {
            let p = &resolved.problem;
            let obs = observations(resolved, resolved.seed_base)?;
            let reference = p.reference.resolve(p.kernel.dim_x(), &obs)?;
            let grid = GridProblem::discretize(&p.kernel, &reference, &obs.points, *bins, *lo, *hi)?;
            let state = oslem_run(&grid, grid.uniform_state(), *alpha, *iterations)?;
            let objective = grid.objective(&state, *alpha)?;
            write(
                &out.join("oslem_state.csv"),
                &io::grid_to_csv(grid.centers(), &grid.state_density(&state), "density"),
            )?;
            let row = MetricRow {
                experiment: p.name.clone(),
                method: if *alpha == 0.0 { "richardson_lucy" } else { "oslem" }.into(),
                n: grid.len(),
                m: obs.len(),
                seed: resolved.seed_base,
                metric: "objective".into(),
                value: objective,
            };
            write(&out.join("metrics.csv"), &io::metrics_to_csv(&[row]))?;
            Ok(format!("objective {objective}\n"))
        }
    }
}
