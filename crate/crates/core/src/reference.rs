//! Reference measure `π0 ∝ exp(-U)`.

use std::f64::consts::TAU;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::points::PointSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceMeasure {
    /// Diagonal Gaussian, `U(x) = Σ_i (x_i - m_i)² / (2 v_i)`.
    Gaussian { mean: Vec<f64>, variances: Vec<f64> },
    /// Improper constant reference; contributes nothing to the drift.
    Flat { dim: usize },
}

impl ReferenceMeasure {
    pub fn gaussian(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let r = ReferenceMeasure::Gaussian { mean, variances };
        r.validate()?;
        Ok(r)
    }

    pub fn isotropic(dim: usize, mean: f64, variance: f64) -> Result<Self> {
        Self::gaussian(vec![mean; dim], vec![variance; dim])
    }

    pub fn flat(dim: usize) -> Self {
        ReferenceMeasure::Flat { dim }
    }

    /// Gaussian with the sample's per-coordinate mean and variance, its mean
    /// moved by `shift` (e.g. minus a mean reporting delay).
    pub fn from_sample(sample: &PointSet, shift: Option<&[f64]>) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::input("need at least two observations for sample moments"));
        }
        let (mut mean, var) = sample.moments();
        if let Some(shift) = shift {
            check_dim("reference shift", sample.dim(), shift.len())?;
            mean.iter_mut().zip(shift).for_each(|(m, s)| *m += s);
        }
        Self::gaussian(mean, var)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReferenceMeasure::Gaussian { mean, variances } => {
                if mean.is_empty() || mean.len() != variances.len() {
                    return Err(Error::input("reference mean and variances differ in length"));
                }
                if variances.iter().any(|v| !(v.is_finite() && *v > 0.0))
                    || mean.iter().any(|m| !m.is_finite())
                {
                    return Err(Error::input("reference variances must be finite and positive"));
                }
                Ok(())
            }
            ReferenceMeasure::Flat { dim } if *dim == 0 => {
                Err(Error::input("reference dimension must be positive"))
            }
            ReferenceMeasure::Flat { .. } => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ReferenceMeasure::Gaussian { mean, .. } => mean.len(),
            ReferenceMeasure::Flat { dim } => *dim,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, ReferenceMeasure::Flat { .. })
    }

    /// `∇U(x)` without dimension checks.
    pub fn grad_u_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ReferenceMeasure::Gaussian { mean, variances } => {
                for (((o, xi), m), v) in out.iter_mut().zip(x).zip(mean).zip(variances) {
                    *o = (xi - m) / v;
                }
            }
            ReferenceMeasure::Flat { .. } => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    pub fn grad_u(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("reference point", self.dim(), x.len())?;
        let mut g = vec![0.0; x.len()];
        self.grad_u_into(x, &mut g);
        Ok(g)
    }

    /// `log π0(x)` including the Gaussian normalizing constant.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim("reference point", self.dim(), x.len())?;
        match self {
            ReferenceMeasure::Gaussian { mean, variances } => {
                let mut acc = 0.0;
                for ((xi, m), v) in x.iter().zip(mean).zip(variances) {
                    acc -= 0.5 * ((TAU * v).ln() + (xi - m) * (xi - m) / v);
                }
                Ok(acc)
            }
            ReferenceMeasure::Flat { .. } => Err(Error::Unsupported(
                "flat reference measure has no normalizable log-density".into(),
            )),
        }
    }

    /// Lipschitz constant of `∇U`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            ReferenceMeasure::Gaussian { variances, .. } => {
                variances.iter().map(|v| 1.0 / v).fold(0.0, f64::max)
            }
            ReferenceMeasure::Flat { .. } => 0.0,
        }
    }

    /// Dissipativity constants `(m, c)` with `⟨∇U(x), x⟩ ≥ m‖x‖² - c` for a
    /// centred Gaussian; only reported, never enforced.
    pub fn dissipativity(&self) -> Option<(f64, f64)> {
        match self {
            ReferenceMeasure::Gaussian { variances, .. } => Some((
                variances.iter().map(|v| 1.0 / v).fold(f64::INFINITY, f64::min),
                0.0,
            )),
            ReferenceMeasure::Flat { .. } => None,
        }
    }

    /// Draws one point from `π0`.
    pub fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> Result<()> {
        match self {
            ReferenceMeasure::Gaussian { mean, variances } => {
                for ((o, m), v) in out.iter_mut().zip(mean).zip(variances) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = m + v.sqrt() * z;
                }
                Ok(())
            }
            ReferenceMeasure::Flat { .. } => Err(Error::Unsupported(
                "cannot sample from a flat reference measure".into(),
            )),
        }
    }
}
