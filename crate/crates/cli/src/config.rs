//! JSON run configuration and its resolution against the presets.

use std::path::{Path, PathBuf};

use fredholm::baselines::{CubicForm, ToyGaussianSpec};
use fredholm::crossval::CvPlan;
use fredholm::functional::Score;
use fredholm::kernels::{Kernel, KernelModel};
use fredholm::problems::{preset_by_name, ExperimentPreset, ReferenceRule};
use fredholm::solver::{InitRule, ResamplePolicy, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Field-wise overrides of a preset's solver settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub n_particles: Option<usize>,
    pub minibatch: Option<usize>,
    pub max_steps: Option<usize>,
    pub resample_each_step: Option<bool>,
    pub resample_policy: Option<ResamplePolicy>,
    pub stop_tol: Option<f64>,
    pub stop_window: Option<usize>,
    pub early_stop: Option<bool>,
    pub denom_floor: Option<f64>,
    pub monitor_every: Option<usize>,
    pub score: Option<Score>,
}

impl SolverOverrides {
    pub fn apply(&self, c: &mut SolverConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        set!(
            alpha, eta, gamma, n_particles, minibatch, max_steps, resample_each_step,
            resample_policy, stop_tol, stop_window, early_stop, denom_floor, monitor_every, score
        );
    }
}

/// Grid baseline settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineConfig {
    /// Closed-form optimum of the Gaussian toy over a sweep of `α`.
    Toy {
        sigma_pi2: f64,
        sigma_k2: f64,
        sigma_0_2: f64,
        alphas: Vec<f64>,
        #[serde(default)]
        cubic: CubicForm,
    },
    /// OSL-EM on a grid over `[lo, hi]^d`; `alpha = 0` is Richardson–Lucy.
    Oslem {
        bins: usize,
        lo: f64,
        hi: f64,
        alpha: f64,
        iterations: usize,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Named preset; ignored when `problem` is given.
    #[serde(default)]
    pub preset: Option<String>,
    /// Dimension for presets that take one.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Full inline problem description.
    #[serde(default)]
    pub problem: Option<ExperimentPreset>,
    #[serde(default)]
    pub kernel: Option<Kernel>,
    #[serde(default)]
    pub reference: Option<ReferenceRule>,
    #[serde(default)]
    pub init: Option<InitRule>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub n_observations: Option<usize>,
    /// CSV of observations (one row per point) used instead of sampling.
    #[serde(default)]
    pub observations_file: Option<PathBuf>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Subset of [`METRICS`]; empty selects all that apply.
    #[serde(default)]
    pub metrics: Vec<String>,
    /// Points at which the pointwise MSE over replicates is reported.
    #[serde(default)]
    pub mse_points: Vec<Vec<f64>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub cv: Option<CvPlan>,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
}

fn one() -> usize {
    1
}

pub const METRICS: [&str; 5] = ["ise", "w1_marginal", "reconvolution_ise", "g_hat", "mse"];

/// A configuration with the preset and every override applied.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub problem: ExperimentPreset,
    pub n_observations: usize,
    pub observations_file: Option<PathBuf>,
    pub replicates: usize,
    pub seed_base: u64,
    pub metrics: Vec<String>,
    pub mse_points: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvPlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
}

pub fn parse(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

impl RunConfig {
    /// Applies overrides and checks everything that can be checked before
    /// any computation.
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<Resolved, CliError> {
        let cfg_err = |e: fredholm::Error| CliError::Config(e.to_string());
        let mut problem = match (&self.problem, &self.preset) {
            (Some(p), _) => p.clone(),
            (None, Some(name)) => preset_by_name(name, self.dim).map_err(cfg_err)?,
            (None, None) => {
                return Err(CliError::Config(
                    "config needs either \"preset\" or \"problem\"".into(),
                ))
            }
        };
        if let Some(k) = &self.kernel {
            problem.kernel = k.clone();
        }
        if let Some(r) = &self.reference {
            problem.reference = r.clone();
        }
        if let Some(i) = &self.init {
            problem.init = i.clone();
        }
        if let Some(n) = self.n_observations {
            problem.n_observations = n;
        }
        self.solver.apply(&mut problem.solver);
        problem.validate().map_err(cfg_err)?;

        let s = &problem.solver;
        let m_obs = problem.n_observations;
        if self.observations_file.is_none()
            && s.resample_each_step
            && s.resample_policy == ResamplePolicy::WithoutReplacement
            && s.minibatch > m_obs
        {
            return Err(CliError::Config(format!(
                "minibatch {} exceeds the {m_obs} observations; sampling without replacement needs minibatch <= n_observations",
                s.minibatch
            )));
        }
        let monitored = s.early_stop || s.monitor_every > 0;
        if matches!(problem.reference, ReferenceRule::Flat) && s.alpha > 0.0 && (monitored || self.cv.is_some()) && s.score == Score::Full {
            return Err(CliError::Config(
                "a flat reference with alpha > 0 has no KL term; set solver.score to \"data_only\"".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(CliError::Config("replicates must be at least 1".into()));
        }
        for m in &self.metrics {
            if !METRICS.contains(&m.as_str()) {
                return Err(CliError::Config(format!("unknown metric {m:?}; expected one of {METRICS:?}")));
            }
        }
        for p in &self.mse_points {
            if p.len() != problem.kernel.dim_x() {
                return Err(CliError::Config("mse_points must match the problem dimension".into()));
            }
        }
        if let Some(plan) = &self.cv {
            plan.validate().map_err(cfg_err)?;
            if plan.folds > m_obs {
                return Err(CliError::Config("more folds than observations".into()));
            }
        }
        if let Some(BaselineConfig::Toy { sigma_pi2, sigma_k2, sigma_0_2, alphas, .. }) = &self.baseline {
            ToyGaussianSpec::new(*sigma_pi2, *sigma_k2, *sigma_0_2, 0.0).map_err(cfg_err)?;
            if alphas.iter().any(|a| !(*a >= 0.0)) {
                return Err(CliError::Config("toy alphas must be nonnegative".into()));
            }
        }
        Ok(Resolved {
            problem,
            n_observations: m_obs,
            observations_file: self.observations_file.clone(),
            replicates: self.replicates,
            seed_base: seed_override.unwrap_or(self.seed_base),
            metrics: if self.metrics.is_empty() {
                METRICS.iter().map(|s| s.to_string()).collect()
            } else {
                self.metrics.clone()
            },
            mse_points: self.mse_points.clone(),
            cv: self.cv.clone(),
            baseline: self.baseline.clone(),
        })
    }
}
