//! Straight-line reference implementations used as test oracles. Nothing here
//! calls into the library's numerical code.
#![allow(dead_code)]

use std::f64::consts::PI;

pub fn gauss(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Product Gaussian `∏_i N(y_i; x_i, sd_i²)`.
pub fn conv_kernel(x: &[f64], y: &[f64], sd: &[f64]) -> f64 {
    let mut p = 1.0;
    for i in 0..x.len() {
        p *= gauss(y[i], x[i], sd[i] * sd[i]);
    }
    p
}

/// Drift by an explicit triple loop for the Gaussian convolution kernel and a
/// diagonal Gaussian reference.
#[allow(clippy::too_many_arguments)]
pub fn naive_drift(
    cloud: &[Vec<f64>],
    batch: &[Vec<f64>],
    sd: &[f64],
    ref_mean: &[f64],
    ref_var: &[f64],
    alpha: f64,
    eta: f64,
) -> Vec<Vec<f64>> {
    let n = cloud.len() as f64;
    let m = batch.len() as f64;
    let d = sd.len();
    let mut out = Vec::new();
    for x in cloud {
        let mut row = vec![0.0; d];
        for y in batch {
            let mut lam = 0.0;
            for xl in cloud {
                lam += conv_kernel(xl, y, sd);
            }
            lam /= n;
            let k = conv_kernel(x, y, sd);
            for c in 0..d {
                row[c] += k * (y[c] - x[c]) / (sd[c] * sd[c]) / (lam + eta) / m;
            }
        }
        for c in 0..d {
            row[c] -= alpha * (x[c] - ref_mean[c]) / ref_var[c];
        }
        out.push(row);
    }
    out
}

/// `(1/N) Σ_k N(x; X^k, diag h)`.
pub fn naive_kde(cloud: &[Vec<f64>], h: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for p in cloud {
        let mut v = 1.0;
        for i in 0..x.len() {
            v *= gauss(x[i], p[i], h[i]);
        }
        s += v;
    }
    s / cloud.len() as f64
}

/// `(1/N) Σ_k k(X^k, y)` for the Gaussian convolution kernel.
pub fn naive_reconvolve(cloud: &[Vec<f64>], sd: &[f64], y: &[f64]) -> f64 {
    cloud.iter().map(|x| conv_kernel(x, y, sd)).sum::<f64>() / cloud.len() as f64
}

/// Optimal assignment cost over every permutation (equal sizes only).
pub fn brute_w1(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], used: &mut Vec<bool>, i: usize, acc: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                go(a, b, used, i + 1, acc + (a[i] - b[j]).abs(), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best / a.len() as f64
}

/// Penalized grid objective `-Σ μ_c log (πk)_c + Σ π_b + α Σ π_b log(π_b/π0_b)`
/// for a 3-cell problem with row-normalized `k`.
pub fn grid_objective(k: &[[f64; 3]; 3], mu: &[f64; 3], prior: &[f64; 3], alpha: f64, p: &[f64; 3]) -> f64 {
    let mut f = 0.0;
    for c in 0..3 {
        let fwd: f64 = (0..3).map(|b| p[b] * k[b][c]).sum();
        if mu[c] > 0.0 {
            f -= mu[c] * fwd.ln();
        }
    }
    for b in 0..3 {
        f += p[b];
        if p[b] > 0.0 {
            f += alpha * p[b] * (p[b] / prior[b]).ln();
        }
    }
    f
}

/// Minimum of [`grid_objective`] over the positive orthant: every shape on
/// the 2-simplex at resolution `1/steps`, with the optimal total mass found
/// by Newton's method on the (convex) one-dimensional profile.
pub fn simplex_search(k: &[[f64; 3]; 3], mu: &[f64; 3], prior: &[f64; 3], alpha: f64, steps: usize) -> (f64, [f64; 3]) {
    let mut best = (f64::INFINITY, [0.0; 3]);
    for i in 0..=steps {
        for j in 0..=steps - i {
            let q = [i as f64 / steps as f64, j as f64 / steps as f64];
            consider(k, mu, prior, alpha, q, &mut best);
        }
    }
    best
}

/// [`simplex_search`] followed by `levels` zoomed grid searches, each on a
/// window of two coarse cells around the incumbent at 100x finer resolution.
pub fn simplex_search_refined(
    k: &[[f64; 3]; 3],
    mu: &[f64; 3],
    prior: &[f64; 3],
    alpha: f64,
    steps: usize,
    levels: usize,
) -> (f64, [f64; 3]) {
    let mut best = simplex_search(k, mu, prior, alpha, steps);
    let mut half = 2.0 / steps as f64;
    for _ in 0..levels {
        let t: f64 = best.1.iter().sum();
        let center = [best.1[0] / t, best.1[1] / t];
        let n = 400;
        for i in 0..=n {
            for j in 0..=n {
                let q = [
                    center[0] - half + 2.0 * half * i as f64 / n as f64,
                    center[1] - half + 2.0 * half * j as f64 / n as f64,
                ];
                if q[0] >= 0.0 && q[1] >= 0.0 && q[0] + q[1] <= 1.0 {
                    consider(k, mu, prior, alpha, q, &mut best);
                }
            }
        }
        half /= 100.0;
    }
    best
}

fn consider(k: &[[f64; 3]; 3], mu: &[f64; 3], prior: &[f64; 3], alpha: f64, q2: [f64; 2], best: &mut (f64, [f64; 3])) {
    let q = [q2[0], q2[1], (1.0 - q2[0] - q2[1]).max(0.0)];
    let total: f64 = mu.iter().sum();
    let kl: f64 = (0..3)
        .filter(|&b| q[b] > 0.0)
        .map(|b| q[b] * (q[b] / prior[b]).ln())
        .sum();
    // d/dt: -S/t + 1 + α(log t + 1) + α KL = 0
    let mut t = total;
    for _ in 0..50 {
        let g = -total / t + 1.0 + alpha * (t.ln() + 1.0) + alpha * kl;
        let h = total / (t * t) + alpha / t;
        let next = (t - g / h).max(t / 10.0);
        let done = (next - t).abs() < 1e-15 * t;
        t = next;
        if done {
            break;
        }
    }
    let p = [t * q[0], t * q[1], t * q[2]];
    let f = grid_objective(k, mu, prior, alpha, &p);
    if f < best.0 {
        *best = (f, p);
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
