//! Accuracy metrics: integrated squared error, pointwise MSE over replicates,
//! 1-D Wasserstein-1 and reconvolution of an estimate through the kernel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::EvaluationGrid;
use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelModel;
use crate::points::PointSet;
use crate::sum::pairwise_sum;

/// Density values at the nodes of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOnGrid {
    pub grid: EvaluationGrid,
    pub values: Vec<f64>,
}

impl DensityOnGrid {
    pub fn new(grid: EvaluationGrid, values: Vec<f64>) -> Result<Self> {
        check_dim("grid values", grid.len(), values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("density value at node {i} is not finite")));
        }
        Ok(DensityOnGrid { grid, values })
    }

    /// Evaluates `f` at every node.
    pub fn from_fn(grid: EvaluationGrid, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.node(i)))
            .collect();
        Self::new(grid, values)
    }

    pub fn integral(&self) -> f64 {
        self.grid
            .integrate(&self.values)
            .expect("length checked at construction")
    }
}

/// `∫ (π̂ - π)²` by trapezoid quadrature on the shared grid.
pub fn ise(estimate: &DensityOnGrid, truth: &DensityOnGrid) -> Result<f64> {
    if estimate.grid != truth.grid {
        return Err(Error::input("ISE needs both densities on the same grid"));
    }
    let sq: Vec<f64> = estimate
        .values
        .iter()
        .zip(&truth.values)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    estimate.grid.integrate(&sq)
}

/// Mean of `(π(x) - π̂_r(x))²` over replicate estimates at one point.
pub fn pointwise_mse(replicates: &[f64], truth: f64) -> Result<f64> {
    if replicates.len() < 2 {
        return Err(Error::input("pointwise MSE needs at least two replicates"));
    }
    let sq: Vec<f64> = replicates.iter().map(|r| (r - truth) * (r - truth)).collect();
    Ok(pairwise_sum(&sq) / replicates.len() as f64)
}

/// Wasserstein-1 distance between two empirical measures on the line:
/// `∫₀¹ |F_a⁻¹(t) - F_b⁻¹(t)| dt`.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("Wasserstein distance of an empty sample"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::input("Wasserstein distance of non-finite values"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
        return Ok(pairwise_sum(&d) / a.len() as f64);
    }
    // Walk the merged breakpoints i/na and j/nb of the two quantile functions,
    // using integer cross-multiplication to compare them exactly.
    let (na, nb) = (a.len(), b.len());
    let total = (na * nb) as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut t = 0usize; // current position, in units of 1/(na·nb)
    let mut terms = Vec::with_capacity(na + nb);
    while i < na && j < nb {
        let next_a = (i + 1) * nb;
        let next_b = (j + 1) * na;
        let next = next_a.min(next_b);
        terms.push((next - t) as f64 * (a[i] - b[j]).abs());
        t = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Ok(pairwise_sum(&terms) / total)
}

/// `μ_rec(y) = (1/N) Σ_k k(X^k, y)` at every node of `y_grid`.
pub fn reconvolve_particles<K: KernelModel + ?Sized>(
    cloud: &PointSet,
    kernel: &K,
    y_grid: &EvaluationGrid,
) -> Result<DensityOnGrid> {
    check_dim("cloud vs kernel", kernel.dim_x(), cloud.dim())?;
    check_dim("y grid vs kernel", kernel.dim_y(), y_grid.dim())?;
    if cloud.is_empty() {
        return Err(Error::input("empty particle cloud"));
    }
    let values = (0..y_grid.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; cloud.len()],
            |buf, i| {
                kernel.eval_many_x(cloud, &y_grid.node(i), buf);
                pairwise_sum(buf) / cloud.len() as f64
            },
        )
        .collect();
    DensityOnGrid::new(y_grid.clone(), values)
}

/// `μ_rec(y) = ∫ k(x, y) π̂(x) dx` by trapezoid quadrature over the grid of
/// `density`.
pub fn reconvolve_density<K: KernelModel + ?Sized>(
    density: &DensityOnGrid,
    kernel: &K,
    y_grid: &EvaluationGrid,
) -> Result<DensityOnGrid> {
    check_dim("x grid vs kernel", kernel.dim_x(), density.grid.dim())?;
    check_dim("y grid vs kernel", kernel.dim_y(), y_grid.dim())?;
    let nodes = density.grid.nodes();
    let weighted: Vec<f64> = density
        .grid
        .trapezoid_weights()
        .iter()
        .zip(&density.values)
        .map(|(w, v)| w * v)
        .collect();
    let values = (0..y_grid.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; nodes.len()],
            |buf, i| {
                kernel.eval_many_x(&nodes, &y_grid.node(i), buf);
                buf.iter_mut().zip(&weighted).for_each(|(k, w)| *k *= w);
                pairwise_sum(buf)
            },
        )
        .collect();
    DensityOnGrid::new(y_grid.clone(), values)
}

/// One line of a metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub experiment: String,
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}
