//! Markov kernel densities `k(x, y)` with `x ∈ ℝ^d`, `y ∈ ℝ^p`.
//!
//! Each kernel supplies its density, the gradient in the first argument and a
//! sampler for `y ~ k(x, ·)`. `bound()` is an analytic upper bound on `k`,
//! `‖∇₁k‖` and the operator norm of `∇₁²k`, valid over all of `ℝ^d × ℝ^p`.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::points::PointSet;

const INV_SQRT_TAU: f64 = 0.398_942_280_401_432_7;

pub trait KernelModel: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn bound(&self) -> f64;

    /// `k(x, y)` without dimension checks.
    fn density(&self, x: &[f64], y: &[f64]) -> f64;

    /// Writes `∇₁k(x, y)` into `grad` and returns `k(x, y)`.
    fn density_and_grad(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64;

    /// Draws `y ~ k(x, ·)` into `out`.
    fn sample_y(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]);

    /// Whether `k(x, y)` depends on `y - x` only (and `p = d`).
    fn is_convolution(&self) -> bool {
        false
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim("kernel x", self.dim_x(), x.len())?;
        check_dim("kernel y", self.dim_y(), y.len())?;
        Ok(self.density(x, y))
    }

    fn grad1(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_dim("kernel x", self.dim_x(), x.len())?;
        check_dim("kernel y", self.dim_y(), y.len())?;
        let mut g = vec![0.0; x.len()];
        self.density_and_grad(x, y, &mut g);
        Ok(g)
    }

    /// `k(x_l, y)` for every row `x_l` of `xs`.
    fn eval_many_x(&self, xs: &PointSet, y: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(xs.rows()) {
            *o = self.density(x, y);
        }
    }

    /// `k(x, y_j)` for every row `y_j` of `ys`.
    fn eval_many_y(&self, x: &[f64], ys: &PointSet, out: &mut [f64]) {
        for (o, y) in out.iter_mut().zip(ys.rows()) {
            *o = self.density(x, y);
        }
    }

    /// [`density_and_grad`](Self::density_and_grad) for every row `y_j` of
    /// `ys`; gradient `j` goes to `grads[j * d..(j + 1) * d]`.
    fn density_and_grad_many_y(&self, x: &[f64], ys: &PointSet, dens: &mut [f64], grads: &mut [f64]) {
        let d = x.len();
        for ((k, g), y) in dens.iter_mut().zip(grads.chunks_exact_mut(d)).zip(ys.rows()) {
            *k = self.density_and_grad(x, y, g);
        }
    }

    /// `scale · ∇₁k(x_l, y)` for the flat row-major points `xs`, given
    /// `dens[l] = k(x_l, y)`. Kernels whose gradient is not a function of the
    /// value recompute it.
    fn scaled_grad_many_x_from_density(&self, xs: &[f64], y: &[f64], dens: &[f64], scale: f64, grads: &mut [f64]) {
        let _ = dens;
        let d = self.dim_x();
        for (g, x) in grads.chunks_exact_mut(d).zip(xs.chunks_exact(d)) {
            self.density_and_grad(x, y, g);
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// `k(x, y) = ∏_i N(y_i; x_i, σ_i²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianConvolutionKernel {
    pub noise_sd: Vec<f64>,
}

impl GaussianConvolutionKernel {
    pub fn new(noise_sd: Vec<f64>) -> Result<Self> {
        validate_positive("noise_sd", &noise_sd)?;
        Ok(GaussianConvolutionKernel { noise_sd })
    }

    pub fn isotropic(dim: usize, sd: f64) -> Result<Self> {
        Self::new(vec![sd; dim])
    }

    fn peak(&self) -> f64 {
        self.noise_sd
            .iter()
            .map(|s| INV_SQRT_TAU / s)
            .product()
    }

    fn constants(&self) -> GaussianConstants {
        GaussianConstants {
            peak: self.peak(),
            inv_var: self.noise_sd.iter().map(|s| 1.0 / (s * s)).collect(),
        }
    }
}

/// Per-kernel constants hoisted out of the pairwise loops. Every evaluation
/// path goes through them, so batched and single-pair values agree bitwise.
struct GaussianConstants {
    peak: f64,
    inv_var: Vec<f64>,
}

impl GaussianConstants {
    #[inline]
    fn density(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut q = 0.0;
        for ((xi, yi), w) in x.iter().zip(y).zip(&self.inv_var) {
            let r = yi - xi;
            q += r * r * w;
        }
        self.peak * (-0.5 * q).exp()
    }

    #[inline]
    fn grad_from_value(&self, k: f64, x: &[f64], y: &[f64], grad: &mut [f64]) {
        for (((g, xi), yi), w) in grad.iter_mut().zip(x).zip(y).zip(&self.inv_var) {
            *g = k * (yi - xi) * w;
        }
    }
}

impl KernelModel for GaussianConvolutionKernel {
    fn dim_x(&self) -> usize {
        self.noise_sd.len()
    }

    fn dim_y(&self) -> usize {
        self.noise_sd.len()
    }

    fn bound(&self) -> f64 {
        // k ≤ C, ‖∇k‖ ≤ C e^{-1/2}/σ_min, ‖∇²k‖ ≤ C/σ_min²
        let c = self.peak();
        let s_min = self.noise_sd.iter().cloned().fold(f64::INFINITY, f64::min);
        c.max(c * (-0.5f64).exp() / s_min).max(c / (s_min * s_min))
    }

    fn density(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut q = 0.0;
        for ((xi, yi), s) in x.iter().zip(y).zip(&self.noise_sd) {
            let r = yi - xi;
            q += r * r * (1.0 / (s * s));
        }
        self.peak() * (-0.5 * q).exp()
    }

    fn density_and_grad(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.density(x, y);
        for (((g, xi), yi), s) in grad.iter_mut().zip(x).zip(y).zip(&self.noise_sd) {
            *g = k * (yi - xi) * (1.0 / (s * s));
        }
        k
    }

    fn eval_many_x(&self, xs: &PointSet, y: &[f64], out: &mut [f64]) {
        let c = self.constants();
        if let ([y0], [w]) = (y, c.inv_var.as_slice()) {
            // same operations as the general path, whose sum starts at 0.0
            for (o, x) in out.iter_mut().zip(xs.as_slice()) {
                let r = y0 - x;
                *o = c.peak * (-0.5 * (r * r * w)).exp();
            }
            return;
        }
        for (o, x) in out.iter_mut().zip(xs.rows()) {
            *o = c.density(x, y);
        }
    }

    fn eval_many_y(&self, x: &[f64], ys: &PointSet, out: &mut [f64]) {
        let c = self.constants();
        for (o, y) in out.iter_mut().zip(ys.rows()) {
            *o = c.density(x, y);
        }
    }

    fn density_and_grad_many_y(&self, x: &[f64], ys: &PointSet, dens: &mut [f64], grads: &mut [f64]) {
        let c = self.constants();
        let d = x.len();
        for ((k, g), y) in dens.iter_mut().zip(grads.chunks_exact_mut(d)).zip(ys.rows()) {
            *k = c.density(x, y);
            c.grad_from_value(*k, x, y, g);
        }
    }

    fn scaled_grad_many_x_from_density(&self, xs: &[f64], y: &[f64], dens: &[f64], scale: f64, grads: &mut [f64]) {
        let c = self.constants();
        if let ([y0], [w]) = (y, c.inv_var.as_slice()) {
            for ((g, k), x) in grads.iter_mut().zip(dens).zip(xs) {
                *g = k * (y0 - x) * w * scale;
            }
            return;
        }
        let d = y.len();
        for ((k, g), x) in dens.iter().zip(grads.chunks_exact_mut(d)).zip(xs.chunks_exact(d)) {
            c.grad_from_value(*k, x, y, g);
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }

    fn sample_y(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        for ((o, xi), s) in out.iter_mut().zip(x).zip(&self.noise_sd) {
            let z: f64 = rng.sample(StandardNormal);
            *o = xi + s * z;
        }
    }

    fn is_convolution(&self) -> bool {
        true
    }
}

/// One-dimensional delay kernel `k(x, y) = Σ_i w_i N(y - x; m_i, s_i²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureDelayKernel {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl GaussianMixtureDelayKernel {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != sds.len() {
            return Err(Error::input(
                "delay kernel needs equally many weights, means and sds",
            ));
        }
        validate_positive("sds", &sds)?;
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::input("delay kernel weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!(
                "delay kernel weights sum to {total}, expected 1"
            )));
        }
        Ok(GaussianMixtureDelayKernel {
            weights,
            means,
            sds,
        })
    }

    /// Infection-to-death delay fitted on the 1918 Philadelphia influenza data.
    pub fn influenza_1918() -> Self {
        GaussianMixtureDelayKernel {
            weights: vec![0.595, 0.405],
            means: vec![8.63, 15.24],
            sds: vec![2.56, 5.39],
        }
    }

    pub fn mean_delay(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, m), s)| (*w, *m, *s))
    }
}

impl KernelModel for GaussianMixtureDelayKernel {
    fn dim_x(&self) -> usize {
        1
    }

    fn dim_y(&self) -> usize {
        1
    }

    fn bound(&self) -> f64 {
        let (mut k, mut g, mut h) = (0.0, 0.0, 0.0);
        for (w, _, s) in self.components() {
            let c = w * INV_SQRT_TAU / s;
            k += c;
            g += c * (-0.5f64).exp() / s;
            h += c / (s * s);
        }
        k.max(g).max(h)
    }

    fn density(&self, x: &[f64], y: &[f64]) -> f64 {
        let delay = y[0] - x[0];
        self.components()
            .map(|(w, m, s)| {
                let z = (delay - m) / s;
                w * INV_SQRT_TAU / s * (-0.5 * z * z).exp()
            })
            .sum()
    }

    fn density_and_grad(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        let delay = y[0] - x[0];
        let (mut k, mut g) = (0.0, 0.0);
        for (w, m, s) in self.components() {
            let z = (delay - m) / s;
            let term = w * INV_SQRT_TAU / s * (-0.5 * z * z).exp();
            k += term;
            // ∂/∂x of N(y - x; m, s²) = N · (y - x - m)/s²
            g += term * z / s;
        }
        grad[0] = g;
        k
    }

    fn sample_y(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        out[0] = x[0] + self.means[chosen] + self.sds[chosen] * z;
    }

    fn is_convolution(&self) -> bool {
        true
    }
}

/// Line-alignment kernel for parallel-beam tomography.
///
/// `x = (x₁, x₂)` is a point in the image plane and `y = (φ, ξ)` a projection
/// angle and offset; `k(x, y) = c · exp(-(x₁cos φ + x₂ sin φ - ξ)² / (2σ²))`.
/// The constant `c` normalizes `k(0, ·)` over the window `[0, 2π] × [-R, R]`
/// and is computed once by quadrature.
#[derive(Debug, Serialize, Deserialize)]
pub struct RadonAlignmentKernel {
    pub sigma: f64,
    pub radius: f64,
    #[serde(skip)]
    norm: OnceLock<f64>,
}

impl Clone for RadonAlignmentKernel {
    fn clone(&self) -> Self {
        RadonAlignmentKernel {
            sigma: self.sigma,
            radius: self.radius,
            norm: self.norm.clone(),
        }
    }
}

impl PartialEq for RadonAlignmentKernel {
    fn eq(&self, other: &Self) -> bool {
        self.sigma == other.sigma && self.radius == other.radius
    }
}

impl RadonAlignmentKernel {
    pub fn new(sigma: f64, radius: f64) -> Result<Self> {
        validate_positive("sigma", &[sigma])?;
        validate_positive("radius", &[radius])?;
        Ok(RadonAlignmentKernel {
            sigma,
            radius,
            norm: OnceLock::new(),
        })
    }

    /// Reciprocal of `∫∫ exp(-residual²/(2σ²)) dφ dξ` at the origin.
    pub fn normalization(&self) -> f64 {
        *self.norm.get_or_init(|| {
            let n_phi = 257;
            let n_xi = 4001;
            let h_phi = TAU / (n_phi - 1) as f64;
            let h_xi = 2.0 * self.radius / (n_xi - 1) as f64;
            let mut total = 0.0;
            for i in 0..n_phi {
                let wi = if i == 0 || i == n_phi - 1 { 0.5 } else { 1.0 };
                let mut row = 0.0;
                for j in 0..n_xi {
                    let wj = if j == 0 || j == n_xi - 1 { 0.5 } else { 1.0 };
                    let xi = -self.radius + j as f64 * h_xi;
                    row += wj * self.unnormalized(&[0.0, 0.0], &[i as f64 * h_phi, xi]);
                }
                total += wi * row * h_xi;
            }
            1.0 / (total * h_phi)
        })
    }

    fn residual(x: &[f64], y: &[f64]) -> f64 {
        let (s, c) = y[0].sin_cos();
        x[0] * c + x[1] * s - y[1]
    }

    fn unnormalized(&self, x: &[f64], y: &[f64]) -> f64 {
        let r = Self::residual(x, y) / self.sigma;
        (-0.5 * r * r).exp()
    }
}

impl KernelModel for RadonAlignmentKernel {
    fn dim_x(&self) -> usize {
        2
    }

    fn dim_y(&self) -> usize {
        2
    }

    fn bound(&self) -> f64 {
        let c = self.normalization();
        let s = self.sigma;
        c.max(c * (-0.5f64).exp() / s).max(c / (s * s))
    }

    fn density(&self, x: &[f64], y: &[f64]) -> f64 {
        self.normalization() * self.unnormalized(x, y)
    }

    fn density_and_grad(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        let (s, c) = y[0].sin_cos();
        let r = x[0] * c + x[1] * s - y[1];
        let k = self.normalization() * (-0.5 * r * r / (self.sigma * self.sigma)).exp();
        let scale = -k * r / (self.sigma * self.sigma);
        grad[0] = scale * c;
        grad[1] = scale * s;
        k
    }

    fn sample_y(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let phi: f64 = rng.random::<f64>() * TAU;
        let z: f64 = rng.sample(StandardNormal);
        let (s, c) = phi.sin_cos();
        out[0] = phi;
        out[1] = x[0] * c + x[1] * s + self.sigma * z;
    }
}

/// `k(x, y) = ∏_i N(y_i; c_i, σ_i²)`, ignoring `x`. Its gradient in `x` is
/// identically zero, which isolates the reference-measure part of the drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependentGaussianKernel {
    pub dim_x: usize,
    pub center: Vec<f64>,
    pub sd: Vec<f64>,
}

impl IndependentGaussianKernel {
    pub fn new(dim_x: usize, center: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        if dim_x == 0 || center.is_empty() || center.len() != sd.len() {
            return Err(Error::input("independent kernel: bad dimensions"));
        }
        validate_positive("sd", &sd)?;
        Ok(IndependentGaussianKernel { dim_x, center, sd })
    }

    fn peak(&self) -> f64 {
        self.sd.iter().map(|s| INV_SQRT_TAU / s).product()
    }
}

impl KernelModel for IndependentGaussianKernel {
    fn dim_x(&self) -> usize {
        self.dim_x
    }

    fn dim_y(&self) -> usize {
        self.center.len()
    }

    fn bound(&self) -> f64 {
        self.peak()
    }

    fn density(&self, _x: &[f64], y: &[f64]) -> f64 {
        let mut q = 0.0;
        for ((yi, c), s) in y.iter().zip(&self.center).zip(&self.sd) {
            let z = (yi - c) / s;
            q += z * z;
        }
        self.peak() * (-0.5 * q).exp()
    }

    fn density_and_grad(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.density(x, y)
    }

    fn sample_y(&self, _x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        for ((o, c), s) in out.iter_mut().zip(&self.center).zip(&self.sd) {
            let z: f64 = rng.sample(StandardNormal);
            *o = c + s * z;
        }
    }
}

/// Every kernel the presets and configuration files can name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    GaussianConvolution(GaussianConvolutionKernel),
    GaussianMixtureDelay(GaussianMixtureDelayKernel),
    RadonAlignment(RadonAlignmentKernel),
    IndependentGaussian(IndependentGaussianKernel),
}

macro_rules! dispatch {
    ($self:ident, $k:ident => $body:expr) => {
        match $self {
            Kernel::GaussianConvolution($k) => $body,
            Kernel::GaussianMixtureDelay($k) => $body,
            Kernel::RadonAlignment($k) => $body,
            Kernel::IndependentGaussian($k) => $body,
        }
    };
}

impl Kernel {
    /// Re-checks parameters of a deserialized kernel.
    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::GaussianConvolution(k) => validate_positive("noise_sd", &k.noise_sd),
            Kernel::GaussianMixtureDelay(k) => {
                GaussianMixtureDelayKernel::new(k.weights.clone(), k.means.clone(), k.sds.clone())
                    .map(|_| ())
            }
            Kernel::RadonAlignment(k) => RadonAlignmentKernel::new(k.sigma, k.radius).map(|_| ()),
            Kernel::IndependentGaussian(k) => {
                IndependentGaussianKernel::new(k.dim_x, k.center.clone(), k.sd.clone()).map(|_| ())
            }
        }
    }
}

impl KernelModel for Kernel {
    fn dim_x(&self) -> usize {
        dispatch!(self, k => k.dim_x())
    }
    fn dim_y(&self) -> usize {
        dispatch!(self, k => k.dim_y())
    }
    fn bound(&self) -> f64 {
        dispatch!(self, k => k.bound())
    }
    fn density(&self, x: &[f64], y: &[f64]) -> f64 {
        dispatch!(self, k => k.density(x, y))
    }
    fn density_and_grad(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        dispatch!(self, k => k.density_and_grad(x, y, grad))
    }
    fn sample_y(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        dispatch!(self, k => k.sample_y(x, rng, out))
    }
    fn is_convolution(&self) -> bool {
        dispatch!(self, k => k.is_convolution())
    }
    fn eval_many_x(&self, xs: &PointSet, y: &[f64], out: &mut [f64]) {
        dispatch!(self, k => k.eval_many_x(xs, y, out))
    }
    fn eval_many_y(&self, x: &[f64], ys: &PointSet, out: &mut [f64]) {
        dispatch!(self, k => k.eval_many_y(x, ys, out))
    }
    fn density_and_grad_many_y(&self, x: &[f64], ys: &PointSet, dens: &mut [f64], grads: &mut [f64]) {
        dispatch!(self, k => k.density_and_grad_many_y(x, ys, dens, grads))
    }
    fn scaled_grad_many_x_from_density(&self, xs: &[f64], y: &[f64], dens: &[f64], scale: f64, grads: &mut [f64]) {
        dispatch!(self, k => k.scaled_grad_many_x_from_density(xs, y, dens, scale, grads))
    }
}

fn validate_positive(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::input(format!(
            "{name} must be nonempty, finite and strictly positive"
        )));
    }
    Ok(())
}

/// Standard normal density, shared by the presets and tests.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}
