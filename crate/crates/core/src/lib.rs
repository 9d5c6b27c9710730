//! Particle solver for regularized Fredholm integral equations of the first kind.
//!
//! Given observations `y_1..y_M` from a measure `μ` and a Markov kernel with
//! density `k(x, y)`, the solver looks for a probability density `π` on `ℝ^d`
//! with `μ(y) ≈ ∫ k(x, y) π(x) dx`, regularized towards a reference measure
//! `π0` by a cross-entropy penalty of weight `α`:
//!
//! ```text
//! G(π) = -∫ log(π[k(·, y)] + η) dμ(y) + α KL(π | π0)
//! ```
//!
//! The minimizer is approximated by an interacting particle system, a tamed
//! Euler–Maruyama discretization of the McKean–Vlasov diffusion
//!
//! ```text
//! dX = { ∫ ∇₁k(X, y) / (λ_t[k(·, y)] + η) dμ(y) - α ∇U(X) } dt + √(2α) dB
//! ```
//!
//! where `λ_t` is the law of `X_t` (replaced by the particle cloud) and
//! `π0 ∝ exp(-U)`.
//!
//! Module map:
//! - [`kernels`]: Markov kernel densities and their spatial gradients.
//! - [`reference`]: the reference measure `π0` through its potential.
//! - [`solver`]: drift, tamed step, minibatching and the full particle loop.
//! - [`functional`]: Monte Carlo estimate of the regularized objective.
//! - [`density`]: Gaussian KDE readout of the cloud, grids and quadrature.
//! - [`metrics`]: ISE, pointwise MSE, 1-D Wasserstein-1, reconvolution.
//! - [`baselines`]: grid OSL-EM / Richardson–Lucy and the analytic Gaussian toy.
//! - [`crossval`]: L-fold cross-validation of `α`.
//! - [`problems`]: experiment presets with closed-form truths and samplers.

pub mod baselines;
pub mod crossval;
pub mod density;
pub mod error;
pub mod functional;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod points;
pub mod problems;
pub mod reference;
pub mod rng;
pub mod solver;
pub mod sum;

pub use error::{Error, Result};
pub use points::PointSet;
