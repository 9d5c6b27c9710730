//! Plug-in estimate of the regularized objective
//!
//! ```text
//! G(π) = -∫ log(πk + η)(y) μ(dy) + α KL(π | π0)
//! ```
//!
//! from a particle cloud and an observation sample:
//!
//! ```text
//! Ĝ = -(1/M) Σ_j log((1/N) Σ_k k(X^k, y_j) + η)
//!     + (α/N) Σ_k [log π̂(X^k) - log π0(X^k)]
//! ```
//!
//! where `π̂` is a Gaussian KDE of the cloud.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::Kde;
use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelModel;
use crate::points::PointSet;
use crate::reference::ReferenceMeasure;
use crate::sum::pairwise_sum;

/// Which part of the objective a monitor evaluates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    #[default]
    Full,
    /// Only the data-fit term; valid for a flat reference.
    DataOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEstimate {
    pub data_term: f64,
    /// `α` times the KL estimate; zero when `α = 0`.
    pub kl_term: f64,
    pub total: f64,
    /// Number of observations whose density `(πk)(y) + η` hit the floor.
    pub floored: usize,
}

/// Data-fit term and the count of floored observations.
pub fn data_term<K: KernelModel + ?Sized>(
    cloud: &PointSet,
    observations: &PointSet,
    kernel: &K,
    eta: f64,
    floor: f64,
) -> Result<(f64, usize)> {
    check_dim("cloud vs kernel", kernel.dim_x(), cloud.dim())?;
    check_dim("observations vs kernel", kernel.dim_y(), observations.dim())?;
    if cloud.is_empty() || observations.is_empty() {
        return Err(Error::input("empty cloud or observation sample"));
    }
    let n = cloud.len() as f64;
    let logs: Vec<(f64, bool)> = (0..observations.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; cloud.len()],
            |buf, j| {
                kernel.eval_many_x(cloud, observations.row(j), buf);
                let v = pairwise_sum(buf) / n + eta;
                (v.max(floor).ln(), v < floor)
            },
        )
        .collect();
    let floored = logs.iter().filter(|(_, f)| *f).count();
    let logs: Vec<f64> = logs.into_iter().map(|(l, _)| l).collect();
    Ok((-pairwise_sum(&logs) / observations.len() as f64, floored))
}

/// `(1/N) Σ_k [log π̂(X^k) - log π0(X^k)]`.
pub fn kl_estimate(cloud: &PointSet, reference: &ReferenceMeasure, kde: &Kde) -> Result<f64> {
    check_dim("cloud vs reference", reference.dim(), cloud.dim())?;
    if reference.is_flat() {
        return Err(Error::Unsupported(
            "KL to a flat reference is not defined".into(),
        ));
    }
    let dens = kde.eval_points(cloud)?;
    let mut terms = Vec::with_capacity(cloud.len());
    for (k, (x, p)) in cloud.rows().zip(dens).enumerate() {
        if !(p > 0.0) {
            return Err(Error::Numerical {
                step: None,
                index: Some(k),
                message: "kernel density estimate vanished at a particle".into(),
            });
        }
        terms.push(p.ln() - reference.log_density(x)?);
    }
    Ok(pairwise_sum(&terms) / cloud.len() as f64)
}

/// The full estimate `Ĝ`. `kde` is fitted to `cloud` when absent and `α > 0`.
#[allow(clippy::too_many_arguments)]
pub fn g_hat<K: KernelModel + ?Sized>(
    cloud: &PointSet,
    observations: &PointSet,
    kernel: &K,
    reference: &ReferenceMeasure,
    alpha: f64,
    eta: f64,
    floor: f64,
    kde: Option<&Kde>,
) -> Result<FunctionalEstimate> {
    if alpha > 0.0 && reference.is_flat() {
        return Err(Error::Unsupported(
            "KL term with a flat reference; use the data-only score".into(),
        ));
    }
    let (data, floored) = data_term(cloud, observations, kernel, eta, floor)?;
    let kl_term = if alpha > 0.0 {
        let fitted;
        let kde = match kde {
            Some(k) => k,
            None => {
                fitted = Kde::fit(cloud)?;
                &fitted
            }
        };
        alpha * kl_estimate(cloud, reference, kde)?
    } else {
        0.0
    };
    Ok(FunctionalEstimate {
        data_term: data,
        kl_term,
        total: data + kl_term,
        floored,
    })
}
