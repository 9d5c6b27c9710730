mod oracles;

use fredholm::density::{BandwidthMatrix, Kde};
use fredholm::density::EvaluationGrid;
use fredholm::kernels::GaussianConvolutionKernel;
use fredholm::metrics::{reconvolve_particles, wasserstein1_1d};
use fredholm::reference::ReferenceMeasure;
use fredholm::solver::{drift_empirical, DriftParams};
use fredholm::PointSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rows(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-spread..spread)).collect())
        .collect()
}

fn pointset(r: &[Vec<f64>]) -> PointSet {
    PointSet::from_rows(r).unwrap()
}

#[test]
fn drift_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=5);
        let sd: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..1.5)).collect();
        let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let var: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..2.0)).collect();
        let alpha = rng.random_range(0.0..1.0);
        let eta = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.1) };
        let cloud = rows(&mut rng, n, d, 1.5);
        let batch = rows(&mut rng, m, d, 1.5);
        let kernel = GaussianConvolutionKernel::new(sd.clone()).unwrap();
        let reference = ReferenceMeasure::gaussian(mean.clone(), var.clone()).unwrap();
        let got = drift_empirical(
            &pointset(&cloud),
            &pointset(&batch),
            &kernel,
            &reference,
            DriftParams { alpha, eta, denom_floor: 1e-30 },
        )
        .unwrap();
        let want = oracles::naive_drift(&cloud, &batch, &sd, &mean, &var, alpha, eta);
        let scale = want.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        for (k, w) in want.iter().enumerate() {
            for c in 0..d {
                assert!((got.row(k)[c] - w[c]).abs() <= 1e-12 * scale, "{} vs {}", got.row(k)[c], w[c]);
            }
        }
    }
}

#[test]
fn kde_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=20);
        let cloud = rows(&mut rng, n, d, 2.0);
        let h: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let kde = Kde::with_bandwidth(&pointset(&cloud), BandwidthMatrix::new(h.clone()).unwrap()).unwrap();
        let got = kde.eval(&x).unwrap();
        let want = oracles::naive_kde(&cloud, &h, &x);
        assert!(oracles::rel_err(got, want) <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn reconvolution_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.random_range(1..=30);
        let cloud = rows(&mut rng, n, 1, 1.0);
        let sd = [rng.random_range(0.1..1.0)];
        let kernel = GaussianConvolutionKernel::new(sd.to_vec()).unwrap();
        let grid = EvaluationGrid::uniform(1, -2.0, 2.0, 9).unwrap();
        let r = reconvolve_particles(&pointset(&cloud), &kernel, &grid).unwrap();
        for (i, v) in r.values.iter().enumerate() {
            let want = oracles::naive_reconvolve(&cloud, &sd, &grid.node(i));
            assert!(oracles::rel_err(*v, want) <= 1e-12);
        }
    }
}

#[test]
fn w1_matches_assignment_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let got = wasserstein1_1d(&a, &b).unwrap();
        let want = oracles::brute_w1(&a, &b);
        assert!(oracles::rel_err(got, want) <= 1e-12 || (got - want).abs() < 1e-15);
    }
}

#[test]
fn unequal_w1_matches_replicated_sample() {
    // an empirical measure with n atoms equals the one with each atom repeated
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let na = rng.random_range(1..=4);
        let nb = rng.random_range(1..=4);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a_rep: Vec<f64> = a.iter().flat_map(|v| std::iter::repeat_n(*v, nb)).collect();
        let b_rep: Vec<f64> = b.iter().flat_map(|v| std::iter::repeat_n(*v, na)).collect();
        let got = wasserstein1_1d(&a, &b).unwrap();
        let want = wasserstein1_1d(&a_rep, &b_rep).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }
}
