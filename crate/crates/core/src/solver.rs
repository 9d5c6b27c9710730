//! The interacting particle solver.
//!
//! Each step computes the empirical drift
//!
//! ```text
//! b(X^k) = (1/m) Σ_j ∇₁k(X^k, y_j) / (λ[k(·, y_j)] + η) - α ∇U(X^k),
//! λ[k(·, y)] = (1/N) Σ_l k(X^l, y)
//! ```
//!
//! on a minibatch `y_1..y_m` of the observations and moves every particle by
//! the tamed Euler–Maruyama update
//!
//! ```text
//! X^k ← X^k + γ b(X^k) / (1 + γ ‖b(X^k)‖) + √(2αγ) Z^k,   Z^k ~ N(0, I).
//! ```
//!
//! Randomness is drawn from keyed streams (see [`crate::rng`]) and every
//! reduction is a fixed-order pairwise sum, so runs are bit-reproducible for a
//! given seed regardless of the number of worker threads.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::Kde;
use crate::error::{check_dim, Error, Result};
use crate::functional::{g_hat, FunctionalEstimate, Score};
use crate::kernels::KernelModel;
use crate::points::PointSet;
use crate::reference::ReferenceMeasure;
use crate::rng::{stream, Role};
use crate::sum::{pairwise_sum, pairwise_sum_rows};

/// Solver state: `N` particles in `ℝ^d` after `step` updates.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    pub points: PointSet,
    pub step: usize,
}

impl ParticleCloud {
    pub fn new(points: PointSet) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("particle cloud must hold at least one particle"));
        }
        if let Some(i) = points.first_non_finite() {
            return Err(Error::Numerical {
                step: None,
                index: Some(i),
                message: "non-finite particle coordinate".into(),
            });
        }
        Ok(ParticleCloud { points, step: 0 })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }
}

/// The `M` observed points standing in for `μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSample {
    pub points: PointSet,
}

impl ObservationSample {
    pub fn new(points: PointSet) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("observation sample is empty"));
        }
        if let Some(i) = points.first_non_finite() {
            return Err(Error::input(format!("observation {i} is not finite")));
        }
        Ok(ObservationSample { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplePolicy {
    /// `m` distinct observations per step; the whole sample when `m ≥ M`.
    #[default]
    WithoutReplacement,
    /// `m` i.i.d. draws from the empirical measure.
    WithReplacement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
    pub n_particles: usize,
    pub minibatch: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Draw a fresh minibatch each step; otherwise every step uses all `M`
    /// observations.
    pub resample_each_step: bool,
    pub resample_policy: ResamplePolicy,
    /// Stop when the windowed mean of `Ĝ` decreases by less than this
    /// (relative) between consecutive windows. Only with `early_stop`.
    pub stop_tol: f64,
    pub stop_window: usize,
    pub early_stop: bool,
    /// Lower clamp on `λ[k(·, y)] + η` before division.
    pub denom_floor: f64,
    /// Evaluate `Ĝ` every this many steps (0 disables; the final state is
    /// always evaluated when enabled).
    pub monitor_every: usize,
    pub score: Score,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 0.01,
            eta: 0.0,
            gamma: 1e-2,
            n_particles: 500,
            minibatch: 500,
            max_steps: 100,
            seed: 0,
            resample_each_step: true,
            resample_policy: ResamplePolicy::WithoutReplacement,
            stop_tol: 1e-4,
            stop_window: 10,
            early_stop: false,
            denom_floor: 1e-30,
            monitor_every: 0,
            score: Score::Full,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::input(msg.to_string()));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and nonnegative");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be finite and nonnegative");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be finite and positive");
        }
        if self.n_particles == 0 {
            return bad("n_particles must be at least 1");
        }
        if self.minibatch == 0 {
            return bad("minibatch must be at least 1");
        }
        if !(self.denom_floor > 0.0) {
            return bad("denom_floor must be positive");
        }
        if !(self.stop_tol > 0.0) || self.stop_window == 0 {
            return bad("stop_tol and stop_window must be positive");
        }
        Ok(())
    }

    fn monitors(&self, step: usize) -> bool {
        if self.early_stop {
            return true;
        }
        self.monitor_every > 0 && (step % self.monitor_every == 0 || step == self.max_steps)
    }
}

/// Per-step diagnostics. `g_hat`, `data_term` and `kl_term` are NaN on steps
/// where the functional was not evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub g_hat: f64,
    pub data_term: f64,
    pub kl_term: f64,
    pub drift_mean: f64,
    pub drift_max: f64,
    /// Largest `γ‖b‖ / (1 + γ‖b‖)` over particles: the norm of the largest
    /// deterministic increment.
    pub taming_max: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<StepRecord>,
    pub stopped_early: bool,
}

impl SolverTrace {
    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub cloud: ParticleCloud,
    pub trace: SolverTrace,
}

/// Shared parameters of the drift.
#[derive(Clone, Copy, Debug)]
pub struct DriftParams {
    pub alpha: f64,
    pub eta: f64,
    pub denom_floor: f64,
}

/// Row `k` is `b^M(X^k, λ)` for the empirical measure `λ` of `cloud` and the
/// empirical measure of `batch`.
pub fn drift_empirical<K: KernelModel + ?Sized>(
    cloud: &PointSet,
    batch: &PointSet,
    kernel: &K,
    reference: &ReferenceMeasure,
    params: DriftParams,
) -> Result<PointSet> {
    drift_empirical_in(&mut DriftWorkspace::default(), cloud, batch, kernel, reference, params)
}

/// Scratch memory for [`drift_empirical_in`], reused across steps.
#[derive(Debug, Default)]
pub struct DriftWorkspace {
    by_obs: Vec<f64>,
}

/// [`drift_empirical`] with caller-owned scratch memory.
pub fn drift_empirical_in<K: KernelModel + ?Sized>(
    ws: &mut DriftWorkspace,
    cloud: &PointSet,
    batch: &PointSet,
    kernel: &K,
    reference: &ReferenceMeasure,
    params: DriftParams,
) -> Result<PointSet> {
    drift_impl(ws, cloud, batch, kernel, reference, params, DENSITY_CACHE_LIMIT)
}

fn drift_impl<K: KernelModel + ?Sized>(
    ws: &mut DriftWorkspace,
    cloud: &PointSet,
    batch: &PointSet,
    kernel: &K,
    reference: &ReferenceMeasure,
    params: DriftParams,
    cache_limit: usize,
) -> Result<PointSet> {
    let d = cloud.dim();
    check_dim("cloud vs kernel", kernel.dim_x(), d)?;
    check_dim("cloud vs reference", reference.dim(), d)?;
    check_dim("batch vs kernel", kernel.dim_y(), batch.dim())?;
    if batch.is_empty() {
        return Err(Error::input("empty observation batch"));
    }
    if cloud.is_empty() {
        return Err(Error::input("empty particle cloud"));
    }
    let n = cloud.len();
    let m = batch.len();

    // 1 / max(λ[k(·, y_j)] + η, floor)
    let weight = |col: &[f64]| {
        let denom = pairwise_sum(col) / n as f64 + params.eta;
        1.0 / denom.max(params.denom_floor)
    };
    let cached = n.checked_mul(m).is_some_and(|nm| nm <= cache_limit);
    if cached {
        ws.by_obs.resize(n * m, 0.0);
    }
    let weights: Vec<f64> = if cached {
        ws.by_obs[..n * m]
            .par_chunks_mut(n)
            .enumerate()
            .map(|(j, col)| {
                kernel.eval_many_x(cloud, batch.row(j), col);
                weight(col)
            })
            .collect()
    } else {
        (0..m)
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |buf, j| {
                    kernel.eval_many_x(cloud, batch.row(j), buf);
                    weight(buf)
                },
            )
            .collect()
    };
    let by_obs = &ws.by_obs;

    // particles in tiles so the cached densities are read in contiguous runs
    let tile_len = drift_tile(n, m, d);
    let mut out = PointSet::zeros(n, d);
    out.as_mut_slice()
        .par_chunks_mut(tile_len * d)
        .enumerate()
        .for_each_init(
            || (vec![0.0; tile_len * d * m], vec![0.0; m], vec![0.0; m * d], vec![0.0; tile_len * d], vec![0.0; d]),
            |(terms, dens, grads, sums, gu), (tile, rows)| {
                let k0 = tile * tile_len;
                let width = rows.len();
                let len = width / d;
                let xs = &cloud.as_slice()[k0 * d..(k0 + len) * d];
                // terms[j * width + t * d + c] = w_j ∂_c k(x_{k0+t}, y_j)
                let terms = &mut terms[..m * width];
                if cached {
                    for (j, (w, block)) in weights.iter().zip(terms.chunks_exact_mut(width)).enumerate() {
                        let col = &by_obs[j * n + k0..j * n + k0 + len];
                        kernel.scaled_grad_many_x_from_density(xs, batch.row(j), col, *w, block);
                    }
                } else {
                    for t in 0..len {
                        kernel.density_and_grad_many_y(&xs[t * d..(t + 1) * d], batch, dens, grads);
                        for (j, (g, w)) in grads.chunks_exact(d).zip(&weights).enumerate() {
                            for c in 0..d {
                                terms[j * width + t * d + c] = g[c] * w;
                            }
                        }
                    }
                }
                let sums = &mut sums[..width];
                pairwise_sum_rows(terms, width, sums);
                for (t, row) in rows.chunks_exact_mut(d).enumerate() {
                    reference.grad_u_into(&xs[t * d..(t + 1) * d], gu);
                    for c in 0..d {
                        row[c] = sums[t * d + c] / m as f64 - params.alpha * gu[c];
                    }
                }
            },
        );
    if let Some(i) = out.first_non_finite() {
        return Err(Error::Numerical {
            step: None,
            index: Some(i),
            message: "non-finite drift".into(),
        });
    }
    Ok(out)
}

/// Largest particle-by-observation density matrix kept between the two
/// passes of [`drift_empirical`]; beyond it densities are recomputed.
const DENSITY_CACHE_LIMIT: usize = 1 << 24;

/// Particles per work item in the second pass of [`drift_empirical`]:
/// about four items per worker, within `[16, 256]`, and at most 2^20 scratch
/// terms. Results do not depend on it.
fn drift_tile(n: usize, m: usize, d: usize) -> usize {
    let by_memory = ((1usize << 20) / (m * d).max(1)).max(1);
    n.div_ceil(4 * rayon::current_num_threads()).clamp(16, 256).min(by_memory)
}

/// Deterministic part of the tamed update, `γb / (1 + γ‖b‖)`.
pub fn tamed_increment(drift_row: &[f64], gamma: f64, out: &mut [f64]) {
    let norm = euclidean(drift_row);
    let scale = gamma / (1.0 + gamma * norm);
    for (o, b) in out.iter_mut().zip(drift_row) {
        *o = scale * b;
    }
}

/// One tamed Euler–Maruyama update. `noise` holds standard Gaussians; the
/// Brownian increment over the step is `√γ` times that.
pub fn tamed_step(
    cloud: &ParticleCloud,
    drift: &PointSet,
    gamma: f64,
    alpha: f64,
    noise: &PointSet,
) -> Result<ParticleCloud> {
    check_dim("drift rows", cloud.len(), drift.len())?;
    check_dim("drift columns", cloud.dim(), drift.dim())?;
    check_dim("noise rows", cloud.len(), noise.len())?;
    check_dim("noise columns", cloud.dim(), noise.dim())?;
    let d = cloud.dim();
    let diffusion = (2.0 * alpha * gamma).sqrt();
    let mut next = cloud.points.clone();
    next.as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .for_each_init(
            || vec![0.0; d],
            |inc, (k, row)| {
                tamed_increment(drift.row(k), gamma, inc);
                for c in 0..d {
                    row[c] += inc[c] + diffusion * noise.row(k)[c];
                }
            },
        );
    if let Some(i) = next.first_non_finite() {
        return Err(Error::Numerical {
            step: Some(cloud.step),
            index: Some(i),
            message: "non-finite particle after update".into(),
        });
    }
    Ok(ParticleCloud {
        points: next,
        step: cloud.step + 1,
    })
}

/// Standard Gaussian noise for step `step`; particle `k` reads its own stream.
pub fn noise_matrix(seed: u64, step: usize, n: usize, d: usize) -> PointSet {
    let mut z = PointSet::zeros(n, d);
    z.as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(k, row)| {
            let mut rng = stream(seed, Role::Noise, step as u64, k as u64);
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        });
    z
}

/// Minibatch of `m` observations for step `step`.
pub fn draw_minibatch(
    full: &ObservationSample,
    m: usize,
    policy: ResamplePolicy,
    seed: u64,
    step: usize,
) -> ObservationSample {
    let big_m = full.len();
    let mut rng = stream(seed, Role::Minibatch, step as u64, 0);
    let idx: Vec<usize> = match policy {
        ResamplePolicy::WithoutReplacement if m >= big_m => return full.clone(),
        ResamplePolicy::WithoutReplacement => index::sample(&mut rng, big_m, m).into_vec(),
        ResamplePolicy::WithReplacement => (0..m).map(|_| rng.random_range(0..big_m)).collect(),
    };
    ObservationSample {
        points: full.points.select(&idx),
    }
}

/// Where the particles start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InitRule {
    /// Observations resampled (without replacement when `N ≤ M`), each moved
    /// by `shift` when given.
    FromObservations {
        #[serde(default)]
        shift: Option<Vec<f64>>,
    },
    /// I.i.d. draws from the reference measure.
    Reference,
    /// Every particle at the same point.
    PointMass { at: Vec<f64> },
    /// Uniform on the box `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Diagonal Gaussian.
    Gaussian { mean: Vec<f64>, variances: Vec<f64> },
}

pub fn initialize(
    rule: &InitRule,
    n: usize,
    dim: usize,
    observations: &ObservationSample,
    reference: &ReferenceMeasure,
    seed: u64,
) -> Result<ParticleCloud> {
    if n == 0 {
        return Err(Error::input("n_particles must be at least 1"));
    }
    let mut rng = stream(seed, Role::Init, 0, 0);
    let mut points = PointSet::zeros(n, dim);
    match rule {
        InitRule::FromObservations { shift } => {
            check_dim("observations vs particles", dim, observations.dim())?;
            let big_m = observations.len();
            let idx: Vec<usize> = if n <= big_m {
                index::sample(&mut rng, big_m, n).into_vec()
            } else {
                (0..n).map(|_| rng.random_range(0..big_m)).collect()
            };
            points = observations.points.select(&idx);
            if let Some(shift) = shift {
                check_dim("init shift", dim, shift.len())?;
                for k in 0..n {
                    points.row_mut(k).iter_mut().zip(shift).for_each(|(v, s)| *v += s);
                }
            }
        }
        InitRule::Reference => {
            check_dim("reference vs particles", dim, reference.dim())?;
            for k in 0..n {
                reference.sample(&mut rng, points.row_mut(k))?;
            }
        }
        InitRule::PointMass { at } => {
            check_dim("point mass", dim, at.len())?;
            for k in 0..n {
                points.row_mut(k).copy_from_slice(at);
            }
        }
        InitRule::UniformBox { lo, hi } => {
            check_dim("box lo", dim, lo.len())?;
            check_dim("box hi", dim, hi.len())?;
            if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return Err(Error::input("uniform box needs lo < hi"));
            }
            for k in 0..n {
                for ((v, a), b) in points.row_mut(k).iter_mut().zip(lo).zip(hi) {
                    *v = rng.random_range(*a..*b);
                }
            }
        }
        InitRule::Gaussian { mean, variances } => {
            let g = ReferenceMeasure::gaussian(mean.clone(), variances.clone())?;
            check_dim("gaussian init", dim, g.dim())?;
            for k in 0..n {
                g.sample(&mut rng, points.row_mut(k))?;
            }
        }
    }
    ParticleCloud::new(points)
}

fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn step_record(
    step: usize,
    cloud: &ParticleCloud,
    drift: &PointSet,
    gamma: f64,
    estimate: Option<&FunctionalEstimate>,
) -> StepRecord {
    let norms: Vec<f64> = drift.rows().map(euclidean).collect();
    let drift_max = norms.iter().cloned().fold(0.0, f64::max);
    let (mean, var) = cloud.points.moments();
    StepRecord {
        step,
        g_hat: estimate.map_or(f64::NAN, |e| e.total),
        data_term: estimate.map_or(f64::NAN, |e| e.data_term),
        kl_term: estimate.map_or(f64::NAN, |e| e.kl_term),
        drift_mean: pairwise_sum(&norms) / norms.len() as f64,
        drift_max,
        taming_max: gamma * drift_max / (1.0 + gamma * drift_max),
        mean,
        var,
    }
}

/// Evaluates the monitored functional on the current cloud.
pub fn monitor_estimate<K: KernelModel + ?Sized>(
    cloud: &ParticleCloud,
    observations: &ObservationSample,
    kernel: &K,
    reference: &ReferenceMeasure,
    config: &SolverConfig,
) -> Result<FunctionalEstimate> {
    let alpha = match config.score {
        Score::Full => config.alpha,
        Score::DataOnly => 0.0,
    };
    let kde = if alpha > 0.0 {
        Some(Kde::fit(&cloud.points)?)
    } else {
        None
    };
    g_hat(
        &cloud.points,
        &observations.points,
        kernel,
        reference,
        alpha,
        config.eta,
        config.denom_floor,
        kde.as_ref(),
    )
}

/// Whether the early-stopping rule fires on the sequence of `Ĝ` values.
pub fn should_stop(values: &[f64], window: usize, tol: f64) -> bool {
    if values.len() < 2 * window {
        return false;
    }
    let cur = &values[values.len() - window..];
    let prev = &values[values.len() - 2 * window..values.len() - window];
    let (cur, prev) = (
        pairwise_sum(cur) / window as f64,
        pairwise_sum(prev) / window as f64,
    );
    (prev - cur) / prev.abs().max(f64::MIN_POSITIVE) < tol
}

/// Checks that the inputs of [`run`] fit together.
pub fn validate_inputs<K: KernelModel + ?Sized>(
    config: &SolverConfig,
    kernel: &K,
    reference: &ReferenceMeasure,
    init: &ParticleCloud,
    observations: &ObservationSample,
) -> Result<()> {
    config.validate()?;
    reference.validate()?;
    if observations.is_empty() {
        return Err(Error::input("observation sample is empty"));
    }
    check_dim("init rows vs n_particles", config.n_particles, init.len())?;
    check_dim("particles vs kernel", kernel.dim_x(), init.dim())?;
    check_dim("particles vs reference", reference.dim(), init.dim())?;
    check_dim("observations vs kernel", kernel.dim_y(), observations.dim())?;
    let monitored = config.early_stop || config.monitor_every > 0;
    if monitored && config.score == Score::Full && config.alpha > 0.0 && reference.is_flat() {
        return Err(Error::input(
            "the KL term is undefined for a flat reference with alpha > 0; use score = data_only",
        ));
    }
    Ok(())
}

/// Runs the particle system for up to `max_steps` updates.
pub fn run<K: KernelModel + ?Sized>(
    config: &SolverConfig,
    kernel: &K,
    reference: &ReferenceMeasure,
    init: ParticleCloud,
    observations: &ObservationSample,
) -> Result<RunOutput> {
    run_with_hook(config, kernel, reference, init, observations, &mut |_, _| {})
}

/// [`run`] with a callback invoked after every record is produced.
pub fn run_with_hook<K: KernelModel + ?Sized>(
    config: &SolverConfig,
    kernel: &K,
    reference: &ReferenceMeasure,
    init: ParticleCloud,
    observations: &ObservationSample,
    hook: &mut dyn FnMut(&ParticleCloud, &StepRecord),
) -> Result<RunOutput> {
    validate_inputs(config, kernel, reference, &init, observations)?;
    let params = DriftParams {
        alpha: config.alpha,
        eta: config.eta,
        denom_floor: config.denom_floor,
    };
    let (n, d) = (init.len(), init.dim());
    let mut cloud = init;
    let mut trace = SolverTrace::default();
    let mut g_values = Vec::new();
    let mut workspace = DriftWorkspace::default();

    for step in 0..=config.max_steps {
        let batch_owned;
        let batch = if config.resample_each_step {
            batch_owned = draw_minibatch(
                observations,
                config.minibatch,
                config.resample_policy,
                config.seed,
                step,
            );
            &batch_owned
        } else {
            observations
        };
        let drift = drift_empirical_in(&mut workspace, &cloud.points, &batch.points, kernel, reference, params)
            .map_err(|e| e.at_step(step))?;

        let estimate = if config.monitors(step) {
            let e = monitor_estimate(&cloud, observations, kernel, reference, config)
                .map_err(|e| e.at_step(step))?;
            g_values.push(e.total);
            Some(e)
        } else {
            None
        };
        let record = step_record(step, &cloud, &drift, config.gamma, estimate.as_ref());
        hook(&cloud, &record);
        trace.records.push(record);

        if step == config.max_steps {
            break;
        }
        if config.early_stop && should_stop(&g_values, config.stop_window, config.stop_tol) {
            trace.stopped_early = true;
            break;
        }
        let noise = noise_matrix(config.seed, step, n, d);
        cloud = tamed_step(&cloud, &drift, config.gamma, config.alpha, &noise)
            .map_err(|e| e.at_step(step))?;
    }
    Ok(RunOutput { cloud, trace })
}
