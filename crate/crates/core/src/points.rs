use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `n × dim` matrix of points in `ℝ^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("point dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::input(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        Ok(PointSet { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::input("no rows"))?;
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::input(format!(
                    "row {i} has {} columns, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    /// One-dimensional points.
    pub fn from_scalars(xs: &[f64]) -> Self {
        PointSet {
            dim: 1,
            data: xs.to_vec(),
        }
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        PointSet {
            dim,
            data: vec![0.0; n * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Values of one coordinate across all rows.
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    pub fn select(&self, indices: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        PointSet {
            dim: self.dim,
            data,
        }
    }

    /// Index of the first row holding a NaN or infinite value.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.rows().position(|r| r.iter().any(|v| !v.is_finite()))
    }

    /// Per-coordinate mean and (population) variance.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len() as f64;
        let mut mean = vec![0.0; self.dim];
        let mut var = vec![0.0; self.dim];
        for c in 0..self.dim {
            let col = self.column(c);
            let m = crate::sum::pairwise_sum(&col) / n;
            let sq: Vec<f64> = col.iter().map(|v| (v - m) * (v - m)).collect();
            mean[c] = m;
            var[c] = crate::sum::pairwise_sum(&sq) / n;
        }
        (mean, var)
    }
}
