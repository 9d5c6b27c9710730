//! Grid-based comparators: one-step-late EM (OSL-EM) with a cross-entropy
//! penalty, its unpenalized special case Richardson–Lucy, and the analytic
//! Gaussian toy problem whose regularized optimum solves a cubic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelModel;
use crate::points::PointSet;
use crate::reference::ReferenceMeasure;
use crate::sum::pairwise_sum;

/// Largest number of cells (`B^d`) a grid problem may have; the kernel matrix
/// holds the square of this.
pub const MAX_CELLS: usize = 4096;

/// A discretized Fredholm problem on a tensor grid of `B^d` cells.
///
/// States are cell masses. Kernel rows are normalized so that
/// `Σ_c k[b][c] = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridProblem {
    centers: PointSet,
    cell_volume: f64,
    prior: Vec<f64>,
    target: Vec<f64>,
    kernel: Vec<f64>,
}

impl GridProblem {
    /// Builds a problem from explicit masses and a kernel matrix (row `b`,
    /// column `c`). Rows are normalized here.
    pub fn new(
        centers: PointSet,
        cell_volume: f64,
        prior: Vec<f64>,
        target: Vec<f64>,
        mut kernel: Vec<f64>,
    ) -> Result<Self> {
        let n = centers.len();
        if n == 0 || n > MAX_CELLS {
            return Err(Error::input(format!(
                "grid must have between 1 and {MAX_CELLS} cells, got {n}"
            )));
        }
        if !(cell_volume > 0.0) {
            return Err(Error::input("cell volume must be positive"));
        }
        check_dim("prior masses", n, prior.len())?;
        check_dim("target masses", n, target.len())?;
        check_dim("kernel matrix", n * n, kernel.len())?;
        if prior.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::input("prior masses must be positive"));
        }
        if target.iter().chain(&kernel).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::input("target masses and kernel entries must be nonnegative"));
        }
        for (b, row) in kernel.chunks_exact_mut(n).enumerate() {
            let s = pairwise_sum(row);
            if !(s > 0.0) {
                return Err(Error::input(format!("kernel row {b} vanishes on the grid")));
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        Ok(GridProblem {
            centers,
            cell_volume,
            prior,
            target,
            kernel,
        })
    }

    /// Discretizes on `[lo, hi]^d` with `bins` cells per axis. The prior is the
    /// reference density at cell centres, the target the histogram of
    /// `observations` (points outside the box are dropped), both normalized to
    /// unit mass.
    pub fn discretize<K: KernelModel + ?Sized>(
        kernel: &K,
        reference: &ReferenceMeasure,
        observations: &PointSet,
        bins: usize,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        let d = kernel.dim_x();
        check_dim("grid kernel output", d, kernel.dim_y())?;
        check_dim("grid reference", d, reference.dim())?;
        check_dim("grid observations", d, observations.dim())?;
        if bins == 0 || !(lo < hi) {
            return Err(Error::input("grid needs bins ≥ 1 and lo < hi"));
        }
        let cells = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(bins));
        let n = match cells {
            Some(n) if n <= MAX_CELLS => n,
            _ => {
                return Err(Error::input(format!(
                    "{bins}^{d} cells exceeds the limit of {MAX_CELLS}"
                )))
            }
        };
        let width = (hi - lo) / bins as f64;
        let mut centers = PointSet::zeros(n, d);
        for flat in 0..n {
            let mut rest = flat;
            for c in (0..d).rev() {
                let b = rest % bins;
                rest /= bins;
                centers.row_mut(flat)[c] = lo + (b as f64 + 0.5) * width;
            }
        }

        let mut prior = Vec::with_capacity(n);
        for x in centers.rows() {
            prior.push(reference.log_density(x)?.exp());
        }
        normalize(&mut prior, "prior")?;

        let mut target = vec![0.0; n];
        for y in observations.rows() {
            let mut flat = 0usize;
            let mut inside = true;
            for &v in y {
                let b = ((v - lo) / width).floor();
                if !(b >= 0.0 && b < bins as f64) {
                    inside = false;
                    break;
                }
                flat = flat * bins + b as usize;
            }
            if inside {
                target[flat] += 1.0;
            }
        }
        normalize(&mut target, "observation histogram")?;

        let mut k = vec![0.0; n * n];
        k.par_chunks_mut(n).enumerate().for_each(|(b, row)| {
            kernel.eval_many_y(centers.row(b), &centers, row);
        });
        Self::new(centers, width.powi(d as i32), prior, target, k)
    }

    pub fn len(&self) -> usize {
        self.prior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prior.is_empty()
    }

    pub fn centers(&self) -> &PointSet {
        &self.centers
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Row-normalized kernel entry `k[b][c]`.
    pub fn kernel(&self, b: usize, c: usize) -> f64 {
        self.kernel[b * self.len() + c]
    }

    /// Uniform masses summing to one.
    pub fn uniform_state(&self) -> Vec<f64> {
        vec![1.0 / self.len() as f64; self.len()]
    }

    /// Cell masses divided by the cell volume.
    pub fn state_density(&self, state: &[f64]) -> Vec<f64> {
        state.iter().map(|p| p / self.cell_volume).collect()
    }

    /// `(πk)_c = Σ_b π_b k[b][c]`.
    pub fn forward(&self, state: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |terms, c| {
                    for b in 0..n {
                        terms[b] = state[b] * self.kernel[b * n + c];
                    }
                    pairwise_sum(terms)
                },
            )
            .collect()
    }

    /// `Σ_c μ_c k[b][c] / (πk)_c` for every `b`.
    fn multiplicative_factor(&self, state: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let fwd = self.forward(state);
        let ratio: Vec<f64> = self
            .target
            .iter()
            .zip(&fwd)
            .map(|(m, f)| if *m == 0.0 { 0.0 } else { m / f })
            .collect();
        if let Some(c) = ratio.iter().position(|r| !r.is_finite()) {
            return Err(Error::Numerical {
                step: None,
                index: Some(c),
                message: "forward image vanishes where the target has mass".into(),
            });
        }
        Ok((0..n)
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |terms, b| {
                    let row = &self.kernel[b * n..(b + 1) * n];
                    for c in 0..n {
                        terms[c] = ratio[c] * row[c];
                    }
                    pairwise_sum(terms)
                },
            )
            .collect())
    }

    /// Penalized objective extended to unnormalized masses:
    /// `-Σ_c μ_c log (πk)_c + Σ_b π_b + α Σ_b π_b log(π_b / π0_b)`.
    /// Its stationary points are the fixed points of [`oslem_step`]; on the
    /// simplex the middle term is the constant 1.
    pub fn objective(&self, state: &[f64], alpha: f64) -> Result<f64> {
        check_dim("grid state", self.len(), state.len())?;
        let fwd = self.forward(state);
        let mut terms = Vec::with_capacity(2 * self.len());
        for (m, f) in self.target.iter().zip(&fwd) {
            if *m > 0.0 {
                terms.push(-m * f.ln());
            }
        }
        for (p, p0) in state.iter().zip(&self.prior) {
            terms.push(*p);
            if alpha > 0.0 && *p > 0.0 {
                terms.push(alpha * p * (p / p0).ln());
            }
        }
        Ok(pairwise_sum(&terms))
    }
}

fn normalize(v: &mut [f64], what: &str) -> Result<()> {
    let s = pairwise_sum(v);
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::input(format!("{what} has no mass on the grid")));
    }
    v.iter_mut().for_each(|x| *x /= s);
    Ok(())
}

fn check_state(problem: &GridProblem, state: &[f64]) -> Result<()> {
    check_dim("grid state", problem.len(), state.len())?;
    if let Some(b) = state.iter().position(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::Numerical {
            step: None,
            index: Some(b),
            message: "grid state must be strictly positive".into(),
        });
    }
    Ok(())
}

/// One OSL-EM update:
/// `π_b ← π_b / (1 + α(1 + log π_b - log π0_b)) · Σ_c μ_c k[b][c] / (πk)_c`.
pub fn oslem_step(state: &[f64], problem: &GridProblem, alpha: f64) -> Result<Vec<f64>> {
    check_state(problem, state)?;
    let factor = problem.multiplicative_factor(state)?;
    let mut next = Vec::with_capacity(state.len());
    for (b, ((p, p0), f)) in state.iter().zip(&problem.prior).zip(&factor).enumerate() {
        let denom = if alpha == 0.0 {
            1.0
        } else {
            1.0 + alpha * (1.0 + p.ln() - p0.ln())
        };
        if !(denom > 0.0) {
            return Err(Error::Numerical {
                step: None,
                index: Some(b),
                message: format!("OSL denominator {denom} is not positive"),
            });
        }
        next.push(p / denom * f);
    }
    Ok(next)
}

/// Richardson–Lucy update `π_b ← π_b Σ_c μ_c k[b][c] / (πk)_c`.
pub fn richardson_lucy_step(state: &[f64], problem: &GridProblem) -> Result<Vec<f64>> {
    check_state(problem, state)?;
    let factor = problem.multiplicative_factor(state)?;
    Ok(state.iter().zip(&factor).map(|(p, f)| p * f).collect())
}

/// `iterations` OSL-EM updates from `init`.
pub fn oslem_run(
    problem: &GridProblem,
    init: Vec<f64>,
    alpha: f64,
    iterations: usize,
) -> Result<Vec<f64>> {
    let mut state = init;
    for it in 0..iterations {
        state = oslem_step(&state, problem, alpha).map_err(|e| e.at_step(it))?;
    }
    Ok(state)
}

/// The Gaussian toy problem: `π = N(0, σ_π²)`, `k(x, ·) = N(x, σ_k²)`,
/// `π0 = N(0, σ_0²)`, candidate solutions `N(0, β)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyGaussianSpec {
    pub sigma_pi2: f64,
    pub sigma_k2: f64,
    pub sigma_0_2: f64,
    pub alpha: f64,
}

impl ToyGaussianSpec {
    pub fn new(sigma_pi2: f64, sigma_k2: f64, sigma_0_2: f64, alpha: f64) -> Result<Self> {
        let spec = ToyGaussianSpec {
            sigma_pi2,
            sigma_k2,
            sigma_0_2,
            alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.sigma_pi2) && ok(self.sigma_k2) && ok(self.sigma_0_2)) {
            return Err(Error::input("toy variances must be positive and finite"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::input("toy alpha must be nonnegative"));
        }
        Ok(())
    }

    pub fn sigma_mu2(&self) -> f64 {
        self.sigma_pi2 + self.sigma_k2
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        ToyGaussianSpec { alpha, ..self }
    }
}

/// `G(N(0, β))` in closed form.
pub fn toy_closed_form_g(spec: &ToyGaussianSpec, beta: f64) -> Result<f64> {
    spec.validate()?;
    if !(beta > 0.0) {
        return Err(Error::input("beta must be positive"));
    }
    let (s, v, s0, a) = (spec.sigma_k2, spec.sigma_mu2(), spec.sigma_0_2, spec.alpha);
    Ok(0.5 * (std::f64::consts::TAU * (beta + s)).ln()
        + v / (2.0 * (beta + s))
        + 0.5 * a * ((s0 / beta).ln() + beta / s0 - 1.0))
}

/// Which cubic to solve for the optimal `β`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubicForm {
    /// `dG/dβ = 0` cleared of denominators.
    #[default]
    Stationary,
    /// Linear term with `-2ασ_k²` in place of `-2ασ_k²σ_0²`. Both forms
    /// agree at `α = 0`.
    UnscaledCross,
}

/// Coefficients `[c3, c2, c1, c0]` of the cubic in `β`.
pub fn toy_cubic(spec: &ToyGaussianSpec, form: CubicForm) -> [f64; 4] {
    let (s, v, s0, a) = (spec.sigma_k2, spec.sigma_mu2(), spec.sigma_0_2, spec.alpha);
    let cross = match form {
        CubicForm::Stationary => 2.0 * a * s * s0,
        CubicForm::UnscaledCross => 2.0 * a * s,
    };
    [
        a,
        2.0 * a * s + (1.0 - a) * s0,
        a * s * s - v * s0 + s0 * s - cross,
        -a * s0 * s * s,
    ]
}

fn horner(c: &[f64; 4], x: f64) -> f64 {
    ((c[0] * x + c[1]) * x + c[2]) * x + c[3]
}

/// `|p(x)| / Σ_i |c_i x^i|`.
pub fn cubic_relative_residual(c: &[f64; 4], x: f64) -> f64 {
    let scale = c[0].abs() * x.abs().powi(3)
        + c[1].abs() * x * x
        + c[2].abs() * x.abs()
        + c[3].abs();
    horner(c, x).abs() / scale.max(f64::MIN_POSITIVE)
}

/// Real roots of `c3 x³ + c2 x² + c1 x + c0`, ascending, each polished by
/// Newton steps. Degenerate leading coefficients fall back to lower degree.
pub fn real_cubic_roots(c: [f64; 4]) -> Vec<f64> {
    let mut roots = if c[0] == 0.0 {
        quadratic_roots(c[1], c[2], c[3])
    } else {
        let (p, q, r) = (c[1] / c[0], c[2] / c[0], c[3] / c[0]);
        // x = t - p/3, t³ + a t + b = 0
        let a = q - p * p / 3.0;
        let b = 2.0 * p * p * p / 27.0 - p * q / 3.0 + r;
        let shift = -p / 3.0;
        let disc = (b / 2.0).powi(2) + (a / 3.0).powi(3);
        if a == 0.0 && b == 0.0 {
            vec![shift]
        } else if disc > 0.0 {
            let sq = disc.sqrt();
            vec![(-b / 2.0 + sq).cbrt() + (-b / 2.0 - sq).cbrt() + shift]
        } else {
            let m = 2.0 * (-a / 3.0).sqrt();
            let arg = (3.0 * b / (a * m)).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            (0..3)
                .map(|k| m * (theta - std::f64::consts::TAU * k as f64 / 3.0).cos() + shift)
                .collect()
        }
    };
    for x in roots.iter_mut() {
        for _ in 0..4 {
            let f = horner(&c, *x);
            let df = (3.0 * c[0] * *x + 2.0 * c[1]) * *x + c[2];
            if df == 0.0 || f == 0.0 {
                break;
            }
            let next = *x - f / df;
            if horner(&c, next).abs() >= f.abs() {
                break;
            }
            *x = next;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    roots
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut r = vec![q / a];
    if q != 0.0 {
        r.push(c / q);
    }
    r
}

/// Minimizing positive root of the stationarity cubic; `σ_π²` when `α = 0`.
pub fn toy_optimal_beta(spec: &ToyGaussianSpec) -> Result<f64> {
    toy_optimal_beta_with(spec, CubicForm::Stationary)
}

/// As [`toy_optimal_beta`] for a chosen cubic.
pub fn toy_optimal_beta_with(spec: &ToyGaussianSpec, form: CubicForm) -> Result<f64> {
    spec.validate()?;
    if spec.alpha == 0.0 {
        return Ok(spec.sigma_pi2);
    }
    let mut best: Option<(f64, f64)> = None;
    for beta in real_cubic_roots(toy_cubic(spec, form)) {
        if beta > 0.0 {
            let g = toy_closed_form_g(spec, beta)?;
            if best.is_none_or(|(_, bg)| g < bg) {
                best = Some((beta, g));
            }
        }
    }
    best.map(|(b, _)| b)
        .ok_or_else(|| Error::numerical("toy cubic has no positive root"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToySweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub g: f64,
}

/// `(α, β(α), G(β(α)))` for every `α` in `alphas`.
pub fn toy_sweep(spec: &ToyGaussianSpec, alphas: &[f64], form: CubicForm) -> Result<Vec<ToySweepRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            let s = spec.with_alpha(alpha);
            let beta = toy_optimal_beta_with(&s, form)?;
            Ok(ToySweepRow {
                alpha,
                beta,
                g: toy_closed_form_g(&s, beta)?,
            })
        })
        .collect()
}
