use fredholm::baselines::{toy_closed_form_g, toy_optimal_beta, ToyGaussianSpec};
use fredholm::density::Kde;
use fredholm::functional::{g_hat, kl_estimate};
use fredholm::kernels::{GaussianConvolutionKernel, IndependentGaussianKernel, KernelModel};
use fredholm::problems::{preset_gaussian_mixture_1d, preset_toy_gaussian};
use fredholm::reference::ReferenceMeasure;
use fredholm::rng::{stream, Role};
use fredholm::solver::{
    drift_empirical, initialize, noise_matrix, run, tamed_increment, tamed_step, DriftParams,
    InitRule, ObservationSample, ParticleCloud, SolverConfig,
};
use fredholm::PointSet;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ornstein_uhlenbeck_limit() {
    // with ∇₁k ≡ 0 the particles follow dX = -α X dt + √(2α) dW
    let kernel = IndependentGaussianKernel::new(1, vec![0.0], vec![1.0]).unwrap();
    let reference = ReferenceMeasure::isotropic(1, 0.0, 1.0).unwrap();
    let obs = ObservationSample::new(PointSet::from_scalars(&[0.0])).unwrap();
    let config = SolverConfig {
        alpha: 1.0,
        gamma: 0.01,
        n_particles: 4000,
        minibatch: 1,
        max_steps: 1000,
        seed: 17,
        ..SolverConfig::default()
    };
    let init = ParticleCloud::new(PointSet::from_scalars(&vec![3.0; 4000])).unwrap();
    let out = run(&config, &kernel, &reference, init, &obs).unwrap();
    let (mean, var) = out.cloud.points.moments();
    assert!(mean[0].abs() < 0.1, "mean {}", mean[0]);
    assert!((var[0] - 1.0).abs() < 0.1, "variance {}", var[0]);
    let first = &out.trace.records[0];
    assert!((first.mean[0] - 3.0).abs() < 1e-12);
}

fn toy_setup(seed: u64) -> (fredholm::kernels::Kernel, ReferenceMeasure, ObservationSample, ParticleCloud, SolverConfig) {
    let mut p = preset_toy_gaussian();
    p.solver.n_particles = 200;
    p.solver.minibatch = 200;
    p.solver.max_steps = 20;
    p.solver.seed = seed;
    p.solver.monitor_every = 5;
    let obs = p.sample_observations(1000, seed).unwrap();
    let reference = p.reference.resolve(1, &obs).unwrap();
    let init = initialize(&p.init, 200, 1, &obs, &reference, seed).unwrap();
    (p.kernel, reference, obs, init, p.solver)
}

#[test]
fn runs_are_bit_reproducible_across_thread_counts() {
    let (k, r, obs, init, config) = toy_setup(3);
    let go = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run(&config, &k, &r, init.clone(), &obs).unwrap())
    };
    let a = go(1);
    let b = go(4);
    assert_eq!(a.cloud, b.cloud);
    assert_eq!(format!("{:?}", a.trace), format!("{:?}", b.trace));
    let c = run(&config, &k, &r, init.clone(), &obs).unwrap();
    assert_eq!(a.cloud, c.cloud);
}

#[test]
fn permuting_particles_permutes_the_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 30;
    let xs: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cloud = PointSet::new(2, xs).unwrap();
    let batch = PointSet::new(2, ys).unwrap();
    let kernel = GaussianConvolutionKernel::new(vec![0.3, 0.5]).unwrap();
    let reference = ReferenceMeasure::gaussian(vec![0.0, 0.1], vec![1.0, 2.0]).unwrap();
    let params = DriftParams { alpha: 0.1, eta: 0.0, denom_floor: 1e-30 };
    let noise = noise_matrix(5, 0, n, 2);

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let cloud_p = cloud.select(&perm);
    let noise_p = noise.select(&perm);

    let b = drift_empirical(&cloud, &batch, &kernel, &reference, params).unwrap();
    let b_p = drift_empirical(&cloud_p, &batch, &kernel, &reference, params).unwrap();
    let next = tamed_step(&ParticleCloud::new(cloud).unwrap(), &b, 0.05, 0.1, &noise).unwrap();
    let next_p = tamed_step(&ParticleCloud::new(cloud_p).unwrap(), &b_p, 0.05, 0.1, &noise_p).unwrap();
    for (i, &k) in perm.iter().enumerate() {
        for c in 0..2 {
            assert!((next_p.points.row(i)[c] - next.points.row(k)[c]).abs() < 1e-13);
        }
    }
}

#[test]
fn drift_has_linear_growth_when_eta_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let kernel = GaussianConvolutionKernel::new(vec![0.2, 0.4]).unwrap();
    let reference = ReferenceMeasure::gaussian(vec![0.5, -1.0], vec![0.5, 3.0]).unwrap();
    let grad0 = reference.grad_u(&[0.0, 0.0]).unwrap();
    let grad0 = grad0.iter().map(|g| g * g).sum::<f64>().sqrt();
    for _ in 0..200 {
        let eta = rng.random_range(1e-3..1.0);
        let alpha = rng.random_range(0.0..2.0);
        let xs: Vec<f64> = (0..40).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ys: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
        let cloud = PointSet::new(2, xs).unwrap();
        let b = drift_empirical(
            &cloud,
            &PointSet::new(2, ys).unwrap(),
            &kernel,
            &reference,
            DriftParams { alpha, eta, denom_floor: 1e-30 },
        )
        .unwrap();
        for (x, row) in cloud.rows().zip(b.rows()) {
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let bn = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let bound = kernel.bound() / eta + alpha * reference.lipschitz() * xn + alpha * grad0;
            assert!(bn <= bound * (1.0 + 1e-12));
        }
    }
}

#[test]
fn functional_at_toy_optimum_matches_closed_form() {
    let p = preset_toy_gaussian();
    let spec = ToyGaussianSpec::new(0.43 * 0.43, 0.45 * 0.45, 0.5, 0.02).unwrap();
    let beta = toy_optimal_beta(&spec).unwrap();
    let reference = ReferenceMeasure::isotropic(1, 0.0, spec.sigma_0_2).unwrap();
    let mut rng = stream(21, Role::Truth, 0, 0);
    let cloud: Vec<f64> = (0..5000)
        .map(|_| beta.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let cloud = PointSet::from_scalars(&cloud);
    let obs = p.sample_observations(10_000, 21).unwrap();
    let e = g_hat(&cloud, &obs.points, &p.kernel, &reference, spec.alpha, 0.0, 1e-30, None).unwrap();
    let want = toy_closed_form_g(&spec, beta).unwrap();
    assert!(((e.total - want) / want).abs() < 0.05, "{} vs {want}", e.total);
    assert_eq!(e.total, e.data_term + e.kl_term);
}

#[test]
fn kl_estimate_vanishes_on_reference_draws() {
    let reference = ReferenceMeasure::gaussian(vec![0.3], vec![0.2]).unwrap();
    let mut rng = stream(4, Role::Truth, 0, 0);
    let mut data = vec![0.0; 10_000];
    for v in data.iter_mut() {
        reference.sample(&mut rng, std::slice::from_mut(v)).unwrap();
    }
    let cloud = PointSet::from_scalars(&data);
    let kl = kl_estimate(&cloud, &reference, &Kde::fit(&cloud).unwrap()).unwrap();
    assert!(kl.abs() <= 0.05, "{kl}");
}

#[test]
fn objective_decreases_on_mixture_preset() {
    let mut p = preset_gaussian_mixture_1d();
    p.solver.n_particles = 300;
    p.solver.minibatch = 300;
    p.solver.monitor_every = 1;
    let obs = p.sample_observations(p.n_observations, 2).unwrap();
    let reference = p.reference.resolve(1, &obs).unwrap();
    let init = initialize(&InitRule::Reference, 300, 1, &obs, &reference, 2).unwrap();
    let out = run(&p.solver, &p.kernel, &reference, init, &obs).unwrap();
    let g: Vec<f64> = out.trace.records.iter().map(|r| r.g_hat).collect();
    assert_eq!(g.len(), p.solver.max_steps + 1);
    let w = 10;
    let head: f64 = g[..w].iter().sum::<f64>() / w as f64;
    let tail: f64 = g[g.len() - w..].iter().sum::<f64>() / w as f64;
    assert!(tail <= head, "{tail} > {head}");
    assert!(out.trace.records.iter().all(|r| r.taming_max < 1.0));
}

#[test]
fn early_stopping_fires_on_a_converged_run() {
    let (k, r, obs, init, mut config) = toy_setup(6);
    config.max_steps = 400;
    config.early_stop = true;
    config.stop_tol = 1e-2;
    let out = run(&config, &k, &r, init, &obs).unwrap();
    assert!(out.trace.stopped_early);
    assert!(out.trace.records.len() < 401);
    assert!(out.trace.records.len() >= 2 * config.stop_window);
}

proptest! {
    #[test]
    fn taming_bound(b in prop::collection::vec(-1e8f64..1e8, 1..6), gamma in 1e-6f64..10.0) {
        let mut inc = vec![0.0; b.len()];
        tamed_increment(&b, gamma, &mut inc);
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n = inc.iter().map(|v| v * v).sum::<f64>().sqrt();
        let want = gamma * bn / (1.0 + gamma * bn);
        prop_assert!(n < 1.0);
        prop_assert!(n <= gamma * bn * (1.0 + 1e-12));
        prop_assert!((n - want).abs() <= 1e-12 * want.max(1e-300));
    }
}
