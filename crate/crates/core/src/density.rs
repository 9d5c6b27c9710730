//! Gaussian kernel density readout of a particle cloud.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::points::PointSet;
use crate::sum::pairwise_sum;

/// Diagonal bandwidth matrix `H`, entries in squared units of `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthMatrix {
    diag: Vec<f64>,
}

impl BandwidthMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || diag.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::input("bandwidth entries must be finite and positive"));
        }
        Ok(BandwidthMatrix { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }
}

/// Silverman's rule of thumb, one scale per coordinate:
/// `h_i = (4/(d+2))^{1/(d+4)} N^{-1/(d+4)} σ̂_i`, `H = diag(h_i²)`.
pub fn silverman_bandwidth(cloud: &PointSet) -> Result<BandwidthMatrix> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::input(format!(
            "bandwidth selection needs at least 2 particles, got {n}"
        )));
    }
    let d = cloud.dim() as f64;
    let factor = (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * (n as f64).powf(-1.0 / (d + 4.0));
    let (_, var) = cloud.moments();
    let mut diag = Vec::with_capacity(var.len());
    for (c, v) in var.iter().enumerate() {
        // unbiased sample variance
        let s2 = v * n as f64 / (n as f64 - 1.0);
        if !(s2 > 0.0) {
            return Err(Error::input(format!(
                "coordinate {c} of the cloud has zero variance"
            )));
        }
        diag.push(factor * factor * s2);
    }
    BandwidthMatrix::new(diag)
}

/// `(1/N) Σ_k det(H)^{-1/2} φ(H^{-1/2}(x - X^k))`.
pub fn kde_eval(cloud: &PointSet, h: &BandwidthMatrix, x: &[f64]) -> Result<f64> {
    check_dim("bandwidth", cloud.dim(), h.dim())?;
    check_dim("query point", cloud.dim(), x.len())?;
    if cloud.is_empty() {
        return Err(Error::input("empty cloud"));
    }
    Ok(kde_unchecked(cloud, h, x))
}

fn kde_unchecked(cloud: &PointSet, h: &BandwidthMatrix, x: &[f64]) -> f64 {
    let norm = h
        .diag
        .iter()
        .map(|v| 1.0 / (TAU * v).sqrt())
        .product::<f64>();
    let terms: Vec<f64> = cloud
        .rows()
        .map(|p| {
            let mut q = 0.0;
            for ((xi, pi), v) in x.iter().zip(p).zip(&h.diag) {
                q += (xi - pi) * (xi - pi) / v;
            }
            (-0.5 * q).exp()
        })
        .collect();
    norm * pairwise_sum(&terms) / cloud.len() as f64
}

/// A cloud together with its bandwidth.
#[derive(Clone, Debug)]
pub struct Kde {
    cloud: PointSet,
    bandwidth: BandwidthMatrix,
}

impl Kde {
    /// Fits with [`silverman_bandwidth`].
    pub fn fit(cloud: &PointSet) -> Result<Self> {
        let bandwidth = silverman_bandwidth(cloud)?;
        Ok(Kde {
            cloud: cloud.clone(),
            bandwidth,
        })
    }

    pub fn with_bandwidth(cloud: &PointSet, bandwidth: BandwidthMatrix) -> Result<Self> {
        check_dim("bandwidth", cloud.dim(), bandwidth.dim())?;
        if cloud.is_empty() {
            return Err(Error::input("empty cloud"));
        }
        Ok(Kde {
            cloud: cloud.clone(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> &BandwidthMatrix {
        &self.bandwidth
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        kde_eval(&self.cloud, &self.bandwidth, x)
    }

    /// Density at each row of `points`.
    pub fn eval_points(&self, points: &PointSet) -> Result<Vec<f64>> {
        check_dim("query points", self.cloud.dim(), points.dim())?;
        Ok((0..points.len())
            .into_par_iter()
            .map(|i| kde_unchecked(&self.cloud, &self.bandwidth, points.row(i)))
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }
}

/// Tensor grid; nodes are flattened row-major (last axis varies fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    axes: Vec<GridAxis>,
}

impl EvaluationGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::input("grid needs at least one axis"));
        }
        for (i, a) in axes.iter().enumerate() {
            if !(a.lo < a.hi) || a.n < 2 || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(Error::input(format!(
                    "grid axis {i}: need lo < hi and at least 2 points"
                )));
            }
        }
        Ok(EvaluationGrid { axes })
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![GridAxis { lo, hi, n }; dim])
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (slot, a) in idx.iter_mut().zip(&self.axes).rev() {
            *slot = flat % a.n;
            flat /= a.n;
        }
        idx
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.node(i))
            .collect()
    }

    pub fn nodes(&self) -> PointSet {
        let mut data = Vec::with_capacity(self.len() * self.dim());
        for i in 0..self.len() {
            data.extend(self.node(i));
        }
        PointSet::new(self.dim(), data).expect("grid dimension is positive")
    }

    /// Tensor-product trapezoid weights, one per node.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|flat| {
                self.multi_index(flat)
                    .iter()
                    .zip(&self.axes)
                    .map(|(&i, a)| {
                        let end = i == 0 || i + 1 == a.n;
                        a.step() * if end { 0.5 } else { 1.0 }
                    })
                    .product()
            })
            .collect()
    }

    /// Trapezoid quadrature of node values.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        check_dim("grid values", self.len(), values.len())?;
        let terms: Vec<f64> = self
            .trapezoid_weights()
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .collect();
        Ok(pairwise_sum(&terms))
    }
}

/// KDE at every node of `grid` (direct summation).
pub fn kde_grid(cloud: &PointSet, h: &BandwidthMatrix, grid: &EvaluationGrid) -> Result<Vec<f64>> {
    check_dim("grid", cloud.dim(), grid.dim())?;
    Kde::with_bandwidth(cloud, h.clone())?.eval_points(&grid.nodes())
}
