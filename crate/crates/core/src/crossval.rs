//! L-fold cross-validation of the regularization strength `α`.
//!
//! For each `α` and fold `j` the solver is fitted on the observations outside
//! fold `j` and the fitted cloud is scored with `Ĝ` against fold `j`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{g_hat, Score};
use crate::kernels::KernelModel;
use crate::reference::ReferenceMeasure;
use crate::rng::{stream, Role};
use crate::solver::{initialize, run, InitRule, ObservationSample, SolverConfig};
use crate::sum::pairwise_sum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvPlan {
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub alpha_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Validation score; `data_only` drops the `α·KL` term.
    #[serde(default)]
    pub score: Score,
}

fn default_folds() -> usize {
    5
}

impl CvPlan {
    pub fn new(folds: usize, alpha_grid: Vec<f64>, seed: u64) -> Result<Self> {
        let plan = CvPlan {
            folds,
            alpha_grid,
            seed,
            score: Score::Full,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::input("cross-validation needs at least 2 folds"));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::input("alpha grid is empty"));
        }
        if self.alpha_grid.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::input("alpha grid entries must be positive"));
        }
        if self.alpha_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::input("alpha grid must be strictly increasing"));
        }
        Ok(())
    }
}

/// Seeded random partition of `0..n` into `folds` parts whose sizes differ by
/// at most one. Indices within a fold are ascending.
pub fn partition(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::input(format!(
            "cannot split {n} observations into {folds} nonempty folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Role::Fold, 0, 0));
    let mut parts = vec![Vec::with_capacity(n / folds + 1); folds];
    for (pos, i) in order.into_iter().enumerate() {
        parts[pos % folds].push(i);
    }
    parts.iter_mut().for_each(|p| p.sort_unstable());
    Ok(parts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub alpha: f64,
    pub fold: usize,
    /// NaN when the cell failed.
    pub g_hat: f64,
    /// `ok` or the failure message.
    pub status: String,
}

impl CvCell {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub alpha: f64,
    /// Mean over successful folds; NaN when none succeeded.
    pub mean_g_hat: f64,
    pub folds_ok: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub cells: Vec<CvCell>,
    pub summary: Vec<CvSummary>,
    /// `None` when every cell failed.
    pub best_alpha: Option<f64>,
}

/// Cross-validates `plan.alpha_grid` with a random partition of the sample.
pub fn cv_score<K: KernelModel + ?Sized>(
    plan: &CvPlan,
    kernel: &K,
    reference: &ReferenceMeasure,
    observations: &ObservationSample,
    base: &SolverConfig,
    init: &InitRule,
) -> Result<CvResult> {
    plan.validate()?;
    let folds = partition(observations.len(), plan.folds, plan.seed)?;
    cv_score_with_folds(plan, &folds, kernel, reference, observations, base, init)
}

/// As [`cv_score`] with an explicit partition.
pub fn cv_score_with_folds<K: KernelModel + ?Sized>(
    plan: &CvPlan,
    folds: &[Vec<usize>],
    kernel: &K,
    reference: &ReferenceMeasure,
    observations: &ObservationSample,
    base: &SolverConfig,
    init: &InitRule,
) -> Result<CvResult> {
    plan.validate()?;
    let n_obs = observations.len();
    let mut fold_of = vec![usize::MAX; n_obs];
    for (f, idx) in folds.iter().enumerate() {
        if idx.is_empty() {
            return Err(Error::input(format!("fold {f} is empty")));
        }
        for &i in idx {
            if i >= n_obs || fold_of[i] != usize::MAX {
                return Err(Error::input("folds must partition the observation indices"));
            }
            fold_of[i] = f;
        }
    }
    if fold_of.contains(&usize::MAX) {
        return Err(Error::input("folds do not cover every observation"));
    }

    let jobs: Vec<(f64, usize)> = plan
        .alpha_grid
        .iter()
        .flat_map(|&a| (0..folds.len()).map(move |f| (a, f)))
        .collect();
    let cells: Vec<CvCell> = jobs
        .par_iter()
        .map(|&(alpha, fold)| {
            let train: Vec<usize> = (0..n_obs).filter(|&i| fold_of[i] != fold).collect();
            let train = ObservationSample {
                points: observations.points.select(&train),
            };
            let held_out = observations.points.select(&folds[fold]);
            let config = SolverConfig {
                alpha,
                ..base.clone()
            };
            let score_alpha = match plan.score {
                Score::Full => alpha,
                Score::DataOnly => 0.0,
            };
            let outcome = initialize(
                init,
                config.n_particles,
                kernel.dim_x(),
                &train,
                reference,
                config.seed,
            )
            .and_then(|cloud| run(&config, kernel, reference, cloud, &train))
            .and_then(|out| {
                g_hat(
                    &out.cloud.points,
                    &held_out,
                    kernel,
                    reference,
                    score_alpha,
                    config.eta,
                    config.denom_floor,
                    None,
                )
            });
            match outcome {
                Ok(e) => CvCell {
                    alpha,
                    fold,
                    g_hat: e.total,
                    status: "ok".into(),
                },
                Err(e) => CvCell {
                    alpha,
                    fold,
                    g_hat: f64::NAN,
                    status: e.to_string(),
                },
            }
        })
        .collect();

    let summary: Vec<CvSummary> = plan
        .alpha_grid
        .iter()
        .map(|&alpha| {
            let ok: Vec<f64> = cells
                .iter()
                .filter(|c| c.alpha == alpha && c.is_ok())
                .map(|c| c.g_hat)
                .collect();
            CvSummary {
                alpha,
                mean_g_hat: if ok.is_empty() {
                    f64::NAN
                } else {
                    pairwise_sum(&ok) / ok.len() as f64
                },
                folds_ok: ok.len(),
            }
        })
        .collect();
    let best_alpha = summary
        .iter()
        .filter(|s| s.mean_g_hat.is_finite())
        .min_by(|a, b| a.mean_g_hat.total_cmp(&b.mean_g_hat))
        .map(|s| s.alpha);
    Ok(CvResult {
        cells,
        summary,
        best_alpha,
    })
}
